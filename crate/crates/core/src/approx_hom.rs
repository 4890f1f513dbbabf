//! Affine fits to functions `F^n -> F^m` and the affine-map discovery step used
//! to cover a family of fibered subspaces.

use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{
    invert, mat_mul, random_vector, transpose, AffineMap, FieldParams, Subspace, Vector,
};
use crate::setlab::DenseSet;

/// Exhaustive fitting is used when `p^{m(n+1)}` is at most this.
pub const EXHAUSTIVE_FIT_BUDGET: u128 = 1 << 22;
/// Extra coordinates given to off-restriction values in `fr_on_restriction`.
pub const ENLARGE_BY: usize = 8;
pub const DEFAULT_TRIALS: usize = 8;

/// A total function `F^n -> F^m`, optionally with a restriction set `Z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionTable {
    domain: FieldParams,
    codomain: FieldParams,
    values: Vec<Vector>,
    restriction: Option<DenseSet>,
}

impl FunctionTable {
    pub fn new(domain: FieldParams, codomain: usize, values: Vec<Vector>) -> Result<Self> {
        let codomain = FieldParams::linear(domain.p, codomain)?;
        if values.len() != domain.size() {
            return Err(Error::DimensionMismatch { expected: domain.size(), found: values.len() });
        }
        for v in &values {
            codomain.check_vec(v)?;
        }
        Ok(Self { domain, codomain, values, restriction: None })
    }

    pub fn from_map(domain: FieldParams, map: &AffineMap) -> Result<Self> {
        let values = (0..domain.size()).map(|i| map.apply(&domain.vector(i))).collect();
        Self::new(domain, map.codomain(), values)
    }

    pub fn with_restriction(mut self, z: DenseSet) -> Result<Self> {
        if z.ambient() != self.domain {
            return Err(Error::AmbientMismatch);
        }
        self.restriction = Some(z);
        Ok(self)
    }

    pub fn domain(&self) -> FieldParams {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain.n
    }

    pub fn value(&self, x: usize) -> &[u32] {
        &self.values[x]
    }

    pub fn restriction(&self) -> Option<&DenseSet> {
        self.restriction.as_ref()
    }

    fn in_z(&self, x: usize) -> bool {
        self.restriction.as_ref().is_none_or(|z| z.contains(x))
    }

    fn z_points(&self) -> Vec<usize> {
        (0..self.domain.size()).filter(|&x| self.in_z(x)).collect()
    }

    /// `(#{z in Z : L(z) = f(z)}, |Z|)`.
    pub fn agreement(&self, map: &AffineMap) -> (usize, usize) {
        let zs = self.z_points();
        let hits = zs.iter().filter(|&&z| map.apply(&self.domain.vector(z)) == self.values[z]).count();
        (hits, zs.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fit {
    pub map: AffineMap,
    pub agreeing: usize,
    pub population: usize,
}

impl Fit {
    pub fn agreement(&self) -> Ratio<u64> {
        Ratio::new(self.agreeing as u64, self.population.max(1) as u64)
    }

    pub fn agreement_f64(&self) -> f64 {
        self.agreeing as f64 / self.population.max(1) as f64
    }
}

/// Most frequent vector index among `items`; ties go to the smallest index.
fn plurality(items: impl Iterator<Item = usize>) -> Option<(usize, usize)> {
    let mut tally = std::collections::HashMap::new();
    for i in items {
        *tally.entry(i).or_insert(0usize) += 1;
    }
    tally.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
}

fn plurality_offset(f: &FunctionTable, matrix: &[Vector], zs: &[usize]) -> (Vector, usize) {
    let cod = f.codomain;
    let residuals = zs.iter().map(|&z| {
        let mz = crate::gf::mat_vec(&cod, matrix, &f.domain.vector(z));
        cod.index(&cod.sub_vec(&f.values[z], &mz))
    });
    match plurality(residuals) {
        Some((r, count)) => (cod.vector(r), count),
        None => (cod.zero_vec(), 0),
    }
}

/// The affine map with the most agreements on `Z`, over every matrix (in index
/// order of the row-major entries) with its plurality offset.
pub fn affine_fit_exhaustive(f: &FunctionTable) -> Result<Fit> {
    let (p, n, m) = (f.domain.p, f.domain.n, f.codomain.n);
    let needed = (p as u128).checked_pow((m * (n + 1)) as u32).unwrap_or(u128::MAX);
    if needed > EXHAUSTIVE_FIT_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: EXHAUSTIVE_FIT_BUDGET });
    }
    // (m n) <= 22 here, so the residual tables fit in memory.
    let cod = f.codomain;
    let zs = f.z_points();
    let entries = FieldParams { p, n: m * n };
    let mut best: Option<(usize, Vec<Vector>, Vector)> = None;
    let mut tally = vec![0usize; cod.checked_size().map_or(0, |s| s as usize)];
    for idx in 0..entries.size() {
        let flat = entries.vector(idx);
        let matrix: Vec<Vector> = if n == 0 { vec![Vec::new(); m] } else { flat.chunks(n).map(|c| c.to_vec()).collect() };
        tally.iter_mut().for_each(|t| *t = 0);
        for &z in &zs {
            let mz = crate::gf::mat_vec(&cod, &matrix, &f.domain.vector(z));
            tally[cod.index(&cod.sub_vec(&f.values[z], &mz))] += 1;
        }
        let (off, count) = tally.iter().enumerate().fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, matrix, cod.vector(off)));
        }
    }
    let (agreeing, matrix, offset) = best.expect("at least one matrix");
    Ok(Fit { map: AffineMap::new(p, n, matrix, offset)?, agreeing, population: zs.len() })
}

fn random_basis<R: Rng>(rng: &mut R, f: &FieldParams) -> Vec<Vector> {
    loop {
        let g: Vec<Vector> = (0..f.n).map(|_| random_vector(rng, f)).collect();
        if invert(f, &g).is_some() {
            return g;
        }
    }
}

/// Majority-vote fit: for a basis `g_1..g_n` each column `M g_j` is the most common
/// `f(z + g_j) - f(z)` over `z, z + g_j in Z`, then the offset is the most common
/// residual. Trial 0 uses the standard basis, later trials random ones. Unless
/// some trial already fits all of `Z`, up to `SAMPLED_FITS` maps through random
/// `n + 1` points of `Z` are tried as well.
pub fn affine_fit_heuristic(f: &FunctionTable, seed: u64, trials: usize) -> Result<Fit> {
    heuristic_with_pool(f, seed, trials, &f.z_points())
}

/// As `affine_fit_heuristic`, drawing the minimal samples from `pool` only.
fn heuristic_with_pool(f: &FunctionTable, seed: u64, trials: usize, pool: &[usize]) -> Result<Fit> {
    let (p, n) = (f.domain.p, f.domain.n);
    let cod = f.codomain;
    let zs = f.z_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Fit> = None;
    for trial in 0..trials.max(1) {
        // Rows of `g` are the basis vectors.
        let g: Vec<Vector> =
            if trial == 0 { (0..n).map(|j| f.domain.unit_vec(j)).collect() } else { random_basis(&mut rng, &f.domain) };
        let mut columns = Vec::with_capacity(n);
        for gj in &g {
            let gi = f.domain.index(gj);
            let diffs = zs.iter().filter_map(|&z| {
                let z2 = f.domain.add_idx(z, gi);
                f.in_z(z2).then(|| cod.index(&cod.sub_vec(&f.values[z2], &f.values[z])))
            });
            let col = plurality(diffs).map_or(cod.zero_vec(), |(c, _)| cod.vector(c));
            columns.push(col);
        }
        // M G^T = C with C's columns the voted images, so M = C (G^T)^{-1}.
        let c = transpose(&columns, cod.n);
        let gt = transpose(&g, n);
        let ginv = invert(&f.domain, &gt).expect("basis is invertible");
        let matrix = if n == 0 { vec![Vec::new(); cod.n] } else { mat_mul(&cod, &c, &ginv, n) };
        let (offset, agreeing) = plurality_offset(f, &matrix, &zs);
        let fit = Fit { map: AffineMap::new(p, n, matrix, offset)?, agreeing, population: zs.len() };
        if best.as_ref().is_none_or(|b| fit.agreeing > b.agreeing) {
            best = Some(fit);
        }
    }
    for _ in 0..SAMPLED_FITS {
        if best.as_ref().is_some_and(|b| b.agreeing == zs.len()) || pool.len() <= n {
            break;
        }
        if let Some(map) = interpolate_random(f, pool, &mut rng)? {
            let (agreeing, population) = f.agreement(&map);
            if best.as_ref().is_none_or(|b| agreeing > b.agreeing) {
                best = Some(Fit { map, agreeing, population });
            }
        }
    }
    Ok(best.expect("at least one trial"))
}

/// Minimal-sample fits tried after the voting trials.
pub const SAMPLED_FITS: usize = 64;

/// The affine map through `n + 1` random points of `Z`, if they are affinely independent.
fn interpolate_random<R: Rng>(f: &FunctionTable, zs: &[usize], rng: &mut R) -> Result<Option<AffineMap>> {
    let (dom, cod) = (f.domain, f.codomain);
    let n = dom.n;
    let x0 = zs[rng.gen_range(0..zs.len())];
    let v0 = dom.vector(x0);
    let pts: Vec<usize> = (0..n).map(|_| zs[rng.gen_range(0..zs.len())]).collect();
    // Rows of `d` are x_i - x0, rows of `e` are f(x_i) - f(x0); M D^T = E^T.
    let d: Vec<Vector> = pts.iter().map(|&x| dom.sub_vec(&dom.vector(x), &v0)).collect();
    let Some(dinv) = invert(&dom, &transpose(&d, n)) else {
        return Ok(None);
    };
    let e: Vec<Vector> = pts.iter().map(|&x| cod.sub_vec(&f.values[x], &f.values[x0])).collect();
    let matrix = if n == 0 { vec![Vec::new(); cod.n] } else { mat_mul(&cod, &transpose(&e, cod.n), &dinv, n) };
    let mv0 = crate::gf::mat_vec(&cod, &matrix, &v0);
    let offset = cod.sub_vec(&f.values[x0], &mv0);
    Ok(Some(AffineMap::new(dom.p, n, matrix, offset)?))
}

/// Whether the exhaustive backend is affordable for this shape.
pub fn exhaustive_affordable(p: u32, n: usize, m: usize) -> bool {
    (p as u128).checked_pow((m * (n + 1)) as u32).is_some_and(|s| s <= EXHAUSTIVE_FIT_BUDGET)
}

/// Fit `f` on its restriction `Z`. Off `Z` the function is replaced by random
/// values in `F^{m+8}` (zero-padded on `Z`) so the heuristic cannot be attracted
/// by them; the resulting map is truncated back to `F^m`. Agreement is measured
/// on `Z` only.
pub fn fr_on_restriction(f: &FunctionTable, seed: u64) -> Result<Fit> {
    let zs = f.z_points();
    if zs.is_empty() {
        return Err(Error::EmptySet);
    }
    let (p, n, m) = (f.domain.p, f.domain.n, f.codomain.n);
    if exhaustive_affordable(p, n, m) {
        return affine_fit_exhaustive(f);
    }
    let big = FieldParams::linear(p, m + ENLARGE_BY)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_0000_0000_0001);
    let values = (0..f.domain.size())
        .map(|x| {
            if f.in_z(x) {
                let mut v = f.values[x].clone();
                v.resize(m + ENLARGE_BY, 0);
                v
            } else {
                random_vector(&mut rng, &big)
            }
        })
        .collect();
    let enlarged = FunctionTable::new(f.domain, m + ENLARGE_BY, values)?;
    let fit = heuristic_with_pool(&enlarged, seed, DEFAULT_TRIALS, &zs)?;
    let map = AffineMap::new(p, n, fit.map.matrix()[..m].to_vec(), fit.map.offset()[..m].to_vec())?;
    let (agreeing, population) = f.agreement(&map);
    Ok(Fit { map, agreeing, population })
}

/// Subspaces `U_y` of `F^m`, one per point of a tabulated `F^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberedSubspaces {
    domain: FieldParams,
    codomain: FieldParams,
    fibers: Vec<Subspace>,
}

impl FiberedSubspaces {
    pub fn new(domain: FieldParams, codomain: usize, fibers: Vec<Subspace>) -> Result<Self> {
        let codomain = FieldParams::linear(domain.p, codomain)?;
        if fibers.len() != domain.size() {
            return Err(Error::DimensionMismatch { expected: domain.size(), found: fibers.len() });
        }
        if fibers.iter().any(|u| u.ambient() != codomain) {
            return Err(Error::AmbientMismatch);
        }
        Ok(Self { domain, codomain, fibers })
    }

    pub fn domain(&self) -> FieldParams {
        self.domain
    }

    pub fn codomain(&self) -> FieldParams {
        self.codomain
    }

    pub fn fiber(&self, y: usize) -> &Subspace {
        &self.fibers[y]
    }

    /// `d = max_y dim U_y`.
    pub fn max_dim(&self) -> usize {
        self.fibers.iter().map(Subspace::dim).max().unwrap_or(0)
    }
}

/// Discovered maps, and at every point the maps selected there together with
/// the span of their values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyState {
    maps: Vec<AffineMap>,
    selected: Vec<Vec<usize>>,
    spans: Vec<Subspace>,
}

impl FamilyState {
    pub fn new(u: &FiberedSubspaces) -> Self {
        let size = u.domain.size();
        Self { maps: Vec::new(), selected: vec![Vec::new(); size], spans: vec![Subspace::zero(u.codomain); size] }
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn t(&self) -> usize {
        self.maps.len()
    }

    pub fn selected(&self, x: usize) -> &[usize] {
        &self.selected[x]
    }

    pub fn span(&self, x: usize) -> &Subspace {
        &self.spans[x]
    }

    /// Whether `L(x)` lies in `U_x` but outside the current span at `x`.
    pub fn is_new_at(&self, u: &FiberedSubspaces, map: &AffineMap, x: usize) -> bool {
        let v = map.apply(&u.domain.vector(x));
        u.fibers[x].contains(&v) && !self.spans[x].contains(&v)
    }

    /// Select `map` at every point where it is new; returns how many points grew.
    pub fn add_map(&mut self, u: &FiberedSubspaces, map: AffineMap) -> usize {
        let id = self.maps.len();
        let mut grown = 0;
        for x in 0..u.domain.size() {
            if self.is_new_at(u, &map, x) {
                let v = map.apply(&u.domain.vector(x));
                self.spans[x] = self.spans[x].extend(&[v]).expect("same codomain");
                self.selected[x].push(id);
                debug_assert!(self.selected[x].len() <= u.fibers[x].dim());
                grown += 1;
            }
        }
        self.maps.push(map);
        grown
    }

    /// `sum_x dim(span at x)`.
    pub fn coverage(&self) -> usize {
        self.spans.iter().map(Subspace::dim).sum()
    }
}

/// `(U_z + U_{y+z}) cap (U_w + U_{y+w})`.
pub fn step4_target(u: &FiberedSubspaces, y: usize, z: usize, w: usize) -> Subspace {
    let f = u.domain;
    let left = u.fibers[z].sum(&u.fibers[f.add_idx(y, z)]).expect("same codomain");
    let right = u.fibers[w].sum(&u.fibers[f.add_idx(y, w)]).expect("same codomain");
    left.intersect(&right).expect("same codomain")
}

/// Whether the target of `(y, z, w)` lies in the sum of the selected spans at
/// `z, y+z, w, y+w`.
pub fn containment_holds(u: &FiberedSubspaces, state: &FamilyState, y: usize, z: usize, w: usize) -> bool {
    let f = u.domain;
    let target = step4_target(u, y, z, w);
    if target.is_zero() {
        return true;
    }
    let cover = [f.add_idx(y, z), w, f.add_idx(y, w)]
        .iter()
        .fold(state.spans[z].clone(), |acc, &a| acc.sum(&state.spans[a]).expect("same codomain"));
    cover.contains_subspace(&target)
}

pub fn sample_triples<R: Rng>(rng: &mut R, domain: FieldParams, count: usize) -> Vec<(usize, usize, usize)> {
    let size = domain.size();
    (0..count).map(|_| (rng.gen_range(0..size), rng.gen_range(0..size), rng.gen_range(0..size))).collect()
}

pub fn containment_failure_rate(u: &FiberedSubspaces, state: &FamilyState, triples: &[(usize, usize, usize)]) -> f64 {
    if triples.is_empty() {
        return 0.0;
    }
    let fails = triples.iter().filter(|&&(y, z, w)| !containment_holds(u, state, y, z, w)).count();
    fails as f64 / triples.len() as f64
}

/// Which pair of positions carries values outside the selected spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `f(y+z)` and `f(y+w)`.
    YzYw,
    /// `f(z)` and `f(y+w)`.
    ZYw,
    /// `f(y+z)` and `f(w)`.
    YzW,
    /// `f(z)` and `f(w)`.
    ZW,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discovery {
    pub map: AffineMap,
    /// Points where the map is new, over all points.
    pub new_points: usize,
    pub branch: Branch,
    pub branch_counts: [usize; 4],
    pub attempts: usize,
}

pub const DEFAULT_RETRY_BUDGET: usize = 32;

/// Look for an affine map that is new (in `U_x` but outside the selected span) on
/// a positive fraction of points. Each attempt samples `f(x)` uniformly in `U_x`,
/// tallies on the sampled triples which branch of the case split the collisions
/// `f(y+z) - f(z) = f(y+w) - f(w)` fall into, and fits an affine map to `f` on
/// `Z = {x : f(x) not in span at x}`. Callers check beforehand that the
/// containment event fails on more than half of the triples.
pub fn intersect_search(
    u: &FiberedSubspaces,
    state: &FamilyState,
    seed: u64,
    triples: &[(usize, usize, usize)],
    retry_budget: usize,
) -> Result<Option<Discovery>> {
    let dom = u.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=retry_budget {
        let values: Vec<Vector> = (0..dom.size())
            .map(|x| {
                let basis = &u.fibers[x];
                let coords: Vector = (0..basis.dim()).map(|_| rng.gen_range(0..dom.p)).collect();
                basis.from_coordinates(&coords)
            })
            .collect();
        let fresh: Vec<bool> = (0..dom.size()).map(|x| !state.spans[x].contains(&values[x])).collect();
        let mut branch_counts = [0usize; 4];
        for &(y, z, w) in triples {
            let (yz, yw) = (dom.add_idx(y, z), dom.add_idx(y, w));
            let cod = u.codomain;
            let lhs = cod.sub_vec(&values[yz], &values[z]);
            let rhs = cod.sub_vec(&values[yw], &values[w]);
            if lhs != rhs || lhs.iter().all(|&c| c == 0) {
                continue;
            }
            let flags = [fresh[yz] && fresh[yw], fresh[z] && fresh[yw], fresh[yz] && fresh[w], fresh[z] && fresh[w]];
            for (count, flag) in branch_counts.iter_mut().zip(flags) {
                *count += usize::from(flag);
            }
        }
        let top = (0..4).fold(3, |b, i| if branch_counts[i] > branch_counts[b] { i } else { b });
        let branch = [Branch::YzYw, Branch::ZYw, Branch::YzW, Branch::ZW][top];
        let z_set = DenseSet::from_predicate(dom, |x| fresh[x]);
        if z_set.is_empty() {
            continue;
        }
        let table = FunctionTable::new(dom, u.codomain.n, values)?.with_restriction(z_set)?;
        let fit = fr_on_restriction(&table, rng.gen())?;
        let new_points = (0..dom.size()).filter(|&x| state.is_new_at(u, &fit.map, x)).count();
        if new_points > 0 {
            return Ok(Some(Discovery { map: fit.map, new_points, branch, branch_counts, attempts: attempt }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::canonical_basis;

    fn f2(n: usize) -> FieldParams {
        FieldParams::new(2, n).unwrap()
    }

    fn random_map<R: Rng>(rng: &mut R, p: u32, n: usize, m: usize) -> AffineMap {
        let cod = FieldParams::linear(p, m).unwrap();
        let dom = FieldParams::linear(p, n).unwrap();
        let matrix = (0..m).map(|_| random_vector(rng, &dom)).collect();
        AffineMap::new(p, n, matrix, random_vector(rng, &cod)).unwrap()
    }

    #[test]
    fn exhaustive_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dom = f2(3);
        let l0 = random_map(&mut rng, 2, 3, 2);
        let fit = affine_fit_exhaustive(&FunctionTable::from_map(dom, &l0).unwrap()).unwrap();
        assert_eq!(fit.map, l0);
        assert_eq!(fit.agreement(), Ratio::from_integer(1));

        let c = AffineMap::constant(2, 3, vec![1, 0]).unwrap();
        let fit = affine_fit_exhaustive(&FunctionTable::from_map(dom, &c).unwrap()).unwrap();
        assert_eq!(fit.map, c);

        // L0 on half the points, something else on the rest.
        let values: Vec<Vector> = (0..8)
            .map(|x| if x < 4 { l0.apply(&dom.vector(x)) } else { dom.vector(x)[..2].iter().map(|v| 1 - v).collect() })
            .collect();
        let f = FunctionTable::new(dom, 2, values).unwrap();
        let fit = affine_fit_exhaustive(&f).unwrap();
        assert!(fit.agreement_f64() >= 0.5);
        assert!(fit.agreeing >= f.agreement(&l0).0);

        let too_big = FunctionTable::new(f2(8), 8, vec![vec![0; 8]; 256]).unwrap();
        assert!(matches!(affine_fit_exhaustive(&too_big), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn heuristic_recovers_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [2, 3] {
            let dom = FieldParams::new(p, 4).unwrap();
            let l0 = random_map(&mut rng, p, 4, 3);
            for seed in 0..5 {
                let fit = affine_fit_heuristic(&FunctionTable::from_map(dom, &l0).unwrap(), seed, 3).unwrap();
                assert_eq!(fit.map, l0);
                assert_eq!(fit.agreement(), Ratio::from_integer(1));
            }
        }
    }

    #[test]
    fn heuristic_on_random_function_is_poor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dom = f2(6);
        let cod = FieldParams::linear(2, 6).unwrap();
        let values = (0..64).map(|_| random_vector(&mut rng, &cod)).collect();
        let fit = affine_fit_heuristic(&FunctionTable::new(dom, 6, values).unwrap(), 0, DEFAULT_TRIALS).unwrap();
        assert!(fit.agreement_f64() < 0.2);
    }

    #[test]
    fn restriction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dom = f2(6);
        let l0 = random_map(&mut rng, 2, 6, 4);
        let full = FunctionTable::from_map(dom, &l0).unwrap();
        let plain = affine_fit_heuristic(&full, 5, DEFAULT_TRIALS).unwrap();
        let restricted = fr_on_restriction(&full.clone().with_restriction(DenseSet::full(dom)).unwrap(), 5).unwrap();
        assert_eq!(plain.map, restricted.map);

        let z = DenseSet::random(&mut rng, dom, 0.5);
        let cod = FieldParams::linear(2, 4).unwrap();
        let values = (0..64)
            .map(|x| if z.contains(x) { l0.apply(&dom.vector(x)) } else { random_vector(&mut rng, &cod) })
            .collect();
        let f = FunctionTable::new(dom, 4, values).unwrap().with_restriction(z).unwrap();
        let fit = fr_on_restriction(&f, 9).unwrap();
        assert_eq!(fit.agreement(), Ratio::from_integer(1));
        assert!(fit.agreeing >= 1);
    }

    #[test]
    fn discovery_on_planted_line_family() {
        // U_y = span{L0 y} for a linear L0 of full column support.
        let p = 2;
        let dom = f2(4);
        let cod = FieldParams::linear(p, 5).unwrap();
        let l0 = AffineMap::linear(
            p,
            4,
            vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1], vec![1, 1, 1, 1]],
        )
        .unwrap();
        let fibers = (0..16).map(|y| canonical_basis(cod, &[l0.apply(&dom.vector(y))]).unwrap()).collect();
        let u = FiberedSubspaces::new(dom, 5, fibers).unwrap();
        let state = FamilyState::new(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let triples = sample_triples(&mut rng, dom, 256);
        assert!(containment_failure_rate(&u, &state, &triples) > 0.5);
        let found = intersect_search(&u, &state, 11, &triples, DEFAULT_RETRY_BUDGET).unwrap().unwrap();
        let agree = (0..16).filter(|&x| found.map.apply(&dom.vector(x)) == l0.apply(&dom.vector(x))).count();
        assert!(agree >= 8, "agrees with L0 on {agree} points");
        let mut grown = state.clone();
        assert_eq!(grown.add_map(&u, found.map.clone()), found.new_points);
        assert!(grown.coverage() > state.coverage());
    }

    #[test]
    fn discovery_on_constant_line() {
        let dom = f2(4);
        let cod = FieldParams::linear(2, 3).unwrap();
        let u0 = canonical_basis(cod, &[vec![1, 1, 0]]).unwrap();
        let u = FiberedSubspaces::new(dom, 3, vec![u0.clone(); 16]).unwrap();
        let state = FamilyState::new(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let triples = sample_triples(&mut rng, dom, 128);
        let found = intersect_search(&u, &state, 3, &triples, DEFAULT_RETRY_BUDGET).unwrap().unwrap();
        assert!(found.map.matrix().iter().flatten().all(|&c| c == 0));
        assert!(u0.contains(found.map.offset()));
        let mut covered = state.clone();
        covered.add_map(&u, found.map);
        assert_eq!(containment_failure_rate(&u, &covered, &triples), 0.0);
    }
}
