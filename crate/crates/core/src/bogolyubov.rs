//! A constructive Bogolyubov lemma: a subspace inside `2A - 2A` from the large
//! spectrum of `A`, with exact representation-count certificates.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf::{canonical_basis, FieldParams, Subspace, Vector};
use crate::setlab::{diff_rep_counts, fourier, spectrum_sq, DenseSet, RepTable};

/// Identity of the subspace oracle, recorded in reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleInfo {
    pub name: String,
    pub rho: String,
    pub codim_bound: String,
}

impl Default for OracleInfo {
    fn default() -> Self {
        Self {
            name: "spectral_bogolyubov".into(),
            rho: "sqrt(alpha/2)".into(),
            codim_bound: "ceil(2/alpha^2)".into(),
        }
    }
}

/// Exact count evidence for `V` inside `2A - 2A`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountCertificate {
    pub min_count: u128,
    /// `min_count / p^{3n}`.
    pub min_normalized: BigRational,
    /// Lower bound `alpha^4 - rho^2 alpha^3` the construction promises.
    pub guaranteed: BigRational,
    pub points_checked: usize,
}

#[derive(Clone, Debug)]
pub struct BogolyubovOutput {
    pub subspace: Subspace,
    pub spectrum: Vec<usize>,
    pub rho_sq: BigRational,
    pub alpha: BigRational,
    pub certificate: CountCertificate,
}

pub fn exact_density(a: &DenseSet) -> BigRational {
    BigRational::new(BigInt::from(a.len()), BigInt::from(a.ambient().size()))
}

/// `p^{3n}` as a big integer.
fn cube_scale(f: FieldParams) -> BigInt {
    BigInt::from(f.p).pow(3 * f.n as u32)
}

fn min_over(counts: &RepTable, v: &Subspace) -> Result<(u128, usize)> {
    let f = counts.ambient();
    let mut min = u128::MAX;
    let mut checked = 0;
    for idx in v.element_indices() {
        let c = counts.get(idx);
        if c == 0 {
            return Err(Error::NotContained(idx));
        }
        min = min.min(c);
        checked += 1;
    }
    debug_assert_eq!(checked, f.size() / FieldParams { p: f.p, n: v.codim() }.size());
    Ok((min, checked))
}

/// `V = Spec_rho(A)^perp`, by default with `rho^2 = alpha / 2`. Every `y in V` is
/// certified to have at least `(alpha^4 - rho^2 alpha^3) p^{3n}` representations
/// as `a1 + a2 - a3 - a4`.
pub fn bogolyubov_subspace(a: &DenseSet, rho_sq: Option<&BigRational>) -> Result<BogolyubovOutput> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let f = a.ambient();
    let alpha = exact_density(a);
    let rho_sq = match rho_sq {
        Some(r) => r.clone(),
        None => &alpha / BigRational::from_integer(2.into()),
    };
    let spec = spectrum_sq(a, &fourier(a), &rho_sq)?;
    let chars: Vec<Vector> = spec.iter().map(|&xi| f.vector(xi)).collect();
    let subspace = canonical_basis(f, &chars)?.annihilator();

    // codim <= |Spec| <= 1 / (rho^2 alpha)
    let codim_bound = (BigRational::one() / (&rho_sq * &alpha)).ceil();
    assert!(BigRational::from_integer(subspace.codim().into()) <= codim_bound, "codimension bound violated");

    let guaranteed = &alpha * &alpha * &alpha * (&alpha - &rho_sq);
    let counts = diff_rep_counts(a);
    let (min_count, points_checked) = min_over(&counts, &subspace)?;
    let min_normalized = BigRational::new(BigInt::from(min_count), cube_scale(f));
    if guaranteed > BigRational::zero() {
        assert!(min_normalized >= guaranteed, "spectral count guarantee violated");
    }
    Ok(BogolyubovOutput {
        subspace,
        spectrum: spec,
        rho_sq,
        alpha,
        certificate: CountCertificate { min_count, min_normalized, guaranteed, points_checked },
    })
}

/// `min_{y in V} #{a1 + a2 - a3 - a4 = y} / p^{3n}`.
pub fn robust_certificate(a: &DenseSet, v: &Subspace) -> Result<BigRational> {
    if v.ambient().n != a.ambient().n || v.ambient().p != a.ambient().p {
        return Err(Error::AmbientMismatch);
    }
    let counts = diff_rep_counts(a);
    let (min, _) = min_over(&counts, v)?;
    Ok(BigRational::new(BigInt::from(min), cube_scale(a.ambient())))
}

pub const MAX_SUBSPACE_BRUTEFORCE_POINTS: usize = 256;

/// A largest subspace contained in `D`, by exhaustive search over subspaces;
/// among those of largest dimension, the one with the smallest canonical basis.
pub fn max_subspace_bruteforce(d: &DenseSet) -> Result<Subspace> {
    let f = d.ambient();
    if f.size() > MAX_SUBSPACE_BRUTEFORCE_POINTS {
        return Err(Error::BudgetExceeded {
            needed: f.size() as u128,
            budget: MAX_SUBSPACE_BRUTEFORCE_POINTS as u128,
        });
    }
    if !d.contains(0) {
        return Err(Error::EmptySet);
    }
    let members: Vec<usize> = d.iter().filter(|&i| i != 0).collect();
    let mut level: HashSet<Subspace> = HashSet::from([Subspace::zero(f)]);
    loop {
        let mut next = HashSet::new();
        for s in &level {
            let elems = s.element_indices();
            for &v in &members {
                if s.contains_index(v) {
                    continue;
                }
                // The new elements are c*v + s for c != 0.
                let fits = (1..f.p).all(|c| {
                    let cv = f.index(&f.scale_vec(c, &f.vector(v)));
                    elems.iter().all(|&e| d.contains(f.add_idx(cv, e)))
                });
                if fits {
                    next.insert(s.extend(&[f.vector(v)])?);
                }
            }
        }
        if next.is_empty() {
            let mut best: Vec<Subspace> = level.into_iter().collect();
            best.sort_by(|a, b| a.basis().cmp(b.basis()));
            return Ok(best.swap_remove(0));
        }
        level = next;
    }
}

/// Fallback exhaustive search is allowed when `p^{2n}` is at most this.
pub const EXHAUSTIVE_REPRESENTATION_LIMIT: u128 = 1 << 20;

/// Draw budget `64 / alpha^3`.
pub fn representation_budget(alpha: f64) -> u64 {
    (64.0 / alpha.powi(3)).ceil().min(1e9) as u64
}

/// `(y1, y2, y3, y4)` in `S^4` with `y = y1 + y2 - y3 - y4`, as point indices.
pub fn find_representation_idx(y: usize, s: &DenseSet, seed: u64) -> Result<[usize; 4]> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let f = s.ambient();
    if y == 0 {
        let first = s.iter().next().expect("nonempty");
        return Ok([first; 4]);
    }
    let members: Vec<usize> = s.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..representation_budget(s.density_f64()) {
        let y1 = members[rng.gen_range(0..members.len())];
        let y2 = members[rng.gen_range(0..members.len())];
        let y3 = members[rng.gen_range(0..members.len())];
        let y4 = f.sub_idx(f.sub_idx(f.add_idx(y1, y2), y3), y);
        if s.contains(y4) {
            return Ok([y1, y2, y3, y4]);
        }
    }
    let pairs = (f.size() as u128).pow(2);
    if pairs > EXHAUSTIVE_REPRESENTATION_LIMIT {
        return Err(Error::RepresentationNotFound(y));
    }
    let mut by_sum: HashMap<usize, (usize, usize)> = HashMap::new();
    for &a in &members {
        for &b in &members {
            by_sum.entry(f.add_idx(a, b)).or_insert((a, b));
        }
    }
    for &y3 in &members {
        for &y4 in &members {
            let target = f.add_idx(f.add_idx(y, y3), y4);
            if let Some(&(y1, y2)) = by_sum.get(&target) {
                return Ok([y1, y2, y3, y4]);
            }
        }
    }
    Err(Error::RepresentationNotFound(y))
}

pub fn find_representation(y: &[u32], s: &DenseSet, seed: u64) -> Result<[Vector; 4]> {
    let f = s.ambient();
    f.check_vec(y)?;
    let q = find_representation_idx(f.index(y), s, seed)?;
    Ok(q.map(|i| f.vector(i)))
}
