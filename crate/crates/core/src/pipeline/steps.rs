//! Steps 1 through 6 of the construction, operating on a shared state.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::approx_hom::{
    containment_failure_rate, containment_holds, intersect_search, sample_triples, step4_target, FamilyState,
    FiberedSubspaces,
};
use crate::bogolyubov::{bogolyubov_subspace, find_representation_idx};
use crate::error::{Error, Result};
use crate::gf::{canonical_basis, projection_along, AffineMap, BilinearForm, FieldParams, MapFamily, Subspace, Vector};
use crate::rng::{derive_seed, stream};
use crate::setlab::DenseSet;

use super::mapsubspace::{lift, mapsubspace};
use super::robust;
use super::variety::BilinearVariety;
use super::{PipelineState, TSelection};

fn rational(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `S = {y : |A_y| >= (alpha / 2) p^m}` and `V'_y` inside `2A_y - 2A_y` for `y in S`.
pub fn step1(state: &mut PipelineState) -> Result<()> {
    let a = &state.a;
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let ys = a.y_params();
    let total = a.len();
    let fibers: Vec<DenseSet> = (0..ys.size()).map(|y| a.fiber(y)).collect();
    // 2 |A_y| p^n >= |A|
    let s = DenseSet::from_predicate(ys, |y| 2 * fibers[y].len() * ys.size() >= total);
    assert!(2 * s.len() * a.num_points() >= total * ys.size(), "averaging bound on S violated");

    let outputs: Vec<Option<(Subspace, BigRational)>> = (0..ys.size())
        .into_par_iter()
        .map(|y| {
            s.contains(y).then(|| {
                let out = bogolyubov_subspace(&fibers[y], None).expect("fibers in S are nonempty");
                (out.subspace, out.certificate.min_normalized)
            })
        })
        .collect();
    let d1 = outputs.iter().flatten().map(|(v, _)| v.codim()).max().unwrap_or(0);
    let eps1 = outputs.iter().flatten().map(|(_, c)| c.clone()).min().expect("S is nonempty");
    state.trace.insert(
        "step1".into(),
        json!({ "S_size": s.len(), "S_density": super::ratio_string(&rational(s.len(), ys.size())), "d": d1 }),
    );
    state.v_prime = outputs.into_iter().map(|o| o.map(|(v, _)| v)).collect();
    state.s = Some(s);
    state.d1 = d1;
    state.eps1 = Some(eps1);
    Ok(())
}

/// Candidate `V_y` from the representation `y = y1 + y2 - y3 - y4`.
fn quadruple_intersection(v_prime: &[Option<Subspace>], q: [usize; 4]) -> Subspace {
    let get = |i: usize| v_prime[i].as_ref().expect("representation uses points of S");
    q[1..].iter().fold(get(q[0]).clone(), |acc, &i| acc.intersect(get(i)).expect("same ambient"))
}

/// `W' = bog(S)`, identified with `F^{n'}` through its pivot coordinates, and for
/// each `y` in `W'` the largest `V_y` over the structured representations
/// `(s + y, s, s, s)` and one sampled representation.
pub fn step2(state: &mut PipelineState) -> Result<()> {
    let s = state.s.clone().expect("step1 ran");
    let ys = s.ambient();
    let bog = bogolyubov_subspace(&s, None)?;
    let w_prime = bog.subspace;
    let reduced = FieldParams::new(ys.p, w_prime.dim())?;
    let embed: Vec<usize> =
        (0..reduced.size()).map(|c| ys.index(&w_prime.from_coordinates(&reduced.vector(c)))).collect();
    let root = state.config.seed;
    state.seeds.insert("step2".into(), derive_seed(root, "step2"));

    let members: Vec<usize> = s.iter().collect();
    let v_prime = &state.v_prime;
    let chosen: Vec<Result<Subspace>> = embed
        .par_iter()
        .enumerate()
        .map(|(yr, &y)| {
            let mut best: Option<Subspace> = None;
            for &t in &members {
                let ty = ys.add_idx(t, y);
                if !s.contains(ty) {
                    continue;
                }
                let cand = quadruple_intersection(v_prime, [ty, t, t, t]);
                if best.as_ref().is_none_or(|b| cand.dim() > b.dim()) {
                    best = Some(cand);
                }
            }
            let q = find_representation_idx(y, &s, derive_seed(root, &format!("step2/{yr}")))?;
            let sampled = quadruple_intersection(v_prime, q);
            if best.as_ref().is_none_or(|b| sampled.dim() > b.dim()) {
                best = Some(sampled);
            }
            Ok(best.expect("a representation exists"))
        })
        .collect();
    let v_red: Vec<Subspace> = chosen.into_iter().collect::<Result<_>>()?;
    let d = v_red.iter().map(Subspace::codim).max().unwrap_or(0);
    assert!(d <= 4 * state.d1, "quadruple intersections have codimension at most 4d");
    state.trace.insert(
        "step2".into(),
        json!({ "W_prime_codim": w_prime.codim(), "n_reduced": reduced.n, "d": d }),
    );
    state.ledger.r2 += w_prime.codim();
    state.w_prime = Some(w_prime);
    state.reduced = Some(reduced);
    state.embed = embed;
    state.v_red = v_red;
    state.d = d;
    Ok(())
}

/// Popular selections over the triples where containment holds (all triples if
/// none do): the union of the four per-point selections of each of the `k` most
/// frequent keys.
fn popular_families(u: &FiberedSubspaces, fam: &FamilyState, triples: &[(usize, usize, usize)], k: usize) -> Vec<Vec<usize>> {
    let dom = u.domain();
    let good: Vec<&(usize, usize, usize)> =
        triples.iter().filter(|&&(y, z, w)| containment_holds(u, fam, y, z, w)).collect();
    let pool: Vec<&(usize, usize, usize)> = if good.is_empty() { triples.iter().collect() } else { good };
    let mut tally: BTreeMap<[Vec<usize>; 4], usize> = BTreeMap::new();
    for &&(y, z, w) in &pool {
        let key = [z, dom.add_idx(y, z), w, dom.add_idx(y, w)].map(|a| fam.selected(a).to_vec());
        *tally.entry(key).or_insert(0) += 1;
    }
    let mut ranked: Vec<([Vec<usize>; 4], usize)> = tally.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (key, _) in ranked.into_iter().take(k.max(1)) {
        let mut ids: Vec<usize> = key.into_iter().flatten().collect();
        ids.sort_unstable();
        ids.dedup();
        if !out.contains(&ids) {
            out.push(ids);
        }
    }
    if out.is_empty() {
        out.push(Vec::new());
    }
    out
}

/// The `(z, w)` pairs examined: all of them when few, else a seeded sample.
pub(super) fn candidate_pairs<R: Rng>(rng: &mut R, dom: FieldParams, limit: usize, samples: usize) -> Vec<(usize, usize)> {
    let size = dom.size();
    if size.saturating_mul(size) <= limit {
        (0..size).flat_map(|z| (0..size).map(move |w| (z, w))).collect()
    } else {
        (0..samples).map(|_| (rng.gen_range(0..size), rng.gen_range(0..size))).collect()
    }
}

/// `Q + span{M_L y : L in family}`.
pub(super) fn linear_values(q: &Subspace, linear: &[&AffineMap], y: &[u32]) -> Subspace {
    let vals: Vec<Vector> = linear.iter().map(|l| l.apply_linear(y)).collect();
    q.extend(&vals).expect("values live in F^m")
}

pub(super) struct Discovered {
    pub u: FiberedSubspaces,
    pub maps: Vec<AffineMap>,
    pub families: Vec<Vec<usize>>,
}

/// Grow the map family until the containment event holds on at least half of
/// the sampled triples, then rank popular selections.
pub(super) fn discover(state: &mut PipelineState) -> Result<Discovered> {
    let reduced = state.reduced.expect("step2 ran");
    let m = state.a.x_params().n;
    let fibers: Vec<Subspace> = state.v_red.iter().map(Subspace::annihilator).collect();
    let u = FiberedSubspaces::new(reduced, m, fibers)?;
    let cfg = state.config.clone();
    state.seeds.insert("step4".into(), derive_seed(cfg.seed, "step4"));
    let mut rng = stream(cfg.seed, "step4");
    let mut fam = FamilyState::new(&u);
    let mut rates = Vec::new();
    let mut branches = Vec::new();
    loop {
        let triples = sample_triples(&mut rng, reduced, cfg.samples);
        let rate = containment_failure_rate(&u, &fam, &triples);
        rates.push(rate);
        if rate <= 0.5 {
            break;
        }
        if fam.t() >= cfg.t_max {
            state.degraded.push("step4_t_max_reached".into());
            break;
        }
        match intersect_search(&u, &fam, rng.gen(), &triples, cfg.retry_budget)? {
            Some(found) => {
                branches.push(format!("{:?}", found.branch));
                fam.add_map(&u, found.map);
            }
            None => {
                state.degraded.push("step4_search_exhausted".into());
                break;
            }
        }
    }
    let triples = sample_triples(&mut rng, reduced, cfg.samples);
    let families = popular_families(&u, &fam, &triples, cfg.popular_keys);
    state.trace.insert(
        "discovery".into(),
        json!({ "t": fam.t(), "failure_rates": rates, "branches": branches, "d": u.max_dim() }),
    );
    Ok(Discovered { u, maps: fam.maps().to_vec(), families })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    cost: usize,
    size: Reverse<usize>,
    pi: usize,
    fi: usize,
    oi: usize,
}

const Q_OPTIONS: [&str; 3] = ["values", "values+meet", "zero"];

/// Steps 3 and 4: a family `L`, a subspace `Q` and a fixed `(z, w)` with
/// `T = {y : X_y(z, w) in Q + span{M_L y}}`, maximizing `|T| p^{-dim Q}`.
pub fn step34(state: &mut PipelineState) -> Result<()> {
    let reduced = state.reduced.expect("step2 ran");
    let m = state.a.x_params().n;
    let xs = FieldParams::linear(reduced.p, m)?;
    if state.d == 0 {
        state.t_selection = Some(TSelection {
            family: Vec::new(),
            q: Subspace::zero(xs),
            t: DenseSet::full(reduced),
            zw: Some((0, 0)),
        });
        state.trace.insert("step4".into(), json!({ "family": 0, "Q_dim": 0, "T_size": reduced.size() }));
        return Ok(());
    }
    let found = discover(state)?;
    let cfg = state.config.clone();
    let mut rng = stream(cfg.seed, "step4/pairs");
    let pairs = candidate_pairs(&mut rng, reduced, cfg.exhaustive_pairs_limit, cfg.pair_candidates);
    let u = &found.u;
    // Cost `dim Q + codim bog(T)` estimates what the choice adds to `r1 + r2`;
    // ties go to the larger `T`, then to the earliest candidate.
    let best = pairs
        .par_iter()
        .enumerate()
        .map(|(pi, &(z, w))| {
            let targets: Vec<Subspace> = (0..reduced.size()).map(|y| step4_target(u, y, z, w)).collect();
            let (zv, wv) = (reduced.vector(z), reduced.vector(w));
            let mut local: Option<(Candidate, Subspace, Vec<usize>)> = None;
            for (fi, ids) in found.families.iter().enumerate() {
                let maps: Vec<&AffineMap> = ids.iter().map(|&i| &found.maps[i]).collect();
                let mut gens: Vec<Vector> = Vec::new();
                for l in &maps {
                    gens.push(l.apply(&zv));
                    gens.push(l.apply(&wv));
                    gens.push(l.offset().to_vec());
                }
                let qa = canonical_basis(xs, &gens).expect("values in F^m");
                let qb = qa.sum(&u.fiber(z).intersect(u.fiber(w)).expect("same")).expect("same");
                for (oi, q) in [qa, qb, Subspace::zero(xs)].into_iter().enumerate() {
                    let t: Vec<usize> = (0..reduced.size())
                        .filter(|&y| linear_values(&q, &maps, &reduced.vector(y)).contains_subspace(&targets[y]))
                        .collect();
                    if t.is_empty() {
                        continue;
                    }
                    let tset = DenseSet::from_indices(reduced, t.iter().copied());
                    let codim = bogolyubov_subspace(&tset, None).expect("T is nonempty").subspace.codim();
                    let key = Candidate { cost: q.dim() + codim, size: Reverse(t.len()), pi, fi, oi };
                    if local.as_ref().is_none_or(|b| key < b.0) {
                        local = Some((key, q, t));
                    }
                }
            }
            local.expect("the widest Q puts 0 in T")
        })
        .reduce_with(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one pair");
    let (Candidate { pi, fi, oi, .. }, q, t) = best;
    assert!(!t.is_empty(), "T contains 0 under the widest Q");
    let family: Vec<AffineMap> = found.families[fi].iter().map(|&i| found.maps[i].clone()).collect();
    state.trace.insert(
        "step4".into(),
        json!({
            "family": family.len(),
            "Q_dim": q.dim(),
            "Q_option": Q_OPTIONS[oi],
            "T_size": t.len(),
            "T_density": super::ratio_string(&rational(t.len(), reduced.size())),
            "z": pairs[pi].0,
            "w": pairs[pi].1,
        }),
    );
    state.ledger.r1 += q.dim();
    state.t_selection = Some(TSelection { family, q, t: DenseSet::from_indices(reduced, t), zw: Some(pairs[pi]) });
    Ok(())
}

/// Rejection sampler for `S_y = {(y1, y2, y3) : y1, y2, y3, y1 + y2 - y3 - y in T}`.
#[derive(Clone, Debug)]
pub struct TripleSampler {
    t: DenseSet,
}

impl TripleSampler {
    pub fn new(t: DenseSet) -> Self {
        Self { t }
    }

    pub fn accepts(&self, y: usize, triple: (usize, usize, usize)) -> bool {
        let f = self.t.ambient();
        let (a, b, c) = triple;
        let d = f.sub_idx(f.sub_idx(f.add_idx(a, b), c), y);
        self.t.contains(a) && self.t.contains(b) && self.t.contains(c) && self.t.contains(d)
    }

    /// A uniform member of `S_y`, or `None` after `max_draws` rejections.
    pub fn sample<R: Rng>(&self, rng: &mut R, y: usize, max_draws: usize) -> Option<(usize, usize, usize)> {
        let size = self.t.ambient().size();
        (0..max_draws).find_map(|_| {
            let triple = (rng.gen_range(0..size), rng.gen_range(0..size), rng.gen_range(0..size));
            self.accepts(y, triple).then_some(triple)
        })
    }

    pub fn acceptance_rate<R: Rng>(&self, rng: &mut R, y: usize, draws: usize) -> f64 {
        let size = self.t.ambient().size();
        let hits = (0..draws)
            .filter(|_| self.accepts(y, (rng.gen_range(0..size), rng.gen_range(0..size), rng.gen_range(0..size))))
            .count();
        hits as f64 / draws.max(1) as f64
    }
}

/// `W = bog(T)` with the exact density `delta_T` of the smallest `S_y`.
pub fn step5(state: &mut PipelineState) -> Result<()> {
    let sel = state.t_selection.as_ref().expect("step34 ran");
    let t = sel.t.clone();
    if t.is_empty() {
        return Err(Error::EmptySet);
    }
    let out = bogolyubov_subspace(&t, None)?;
    let delta = out.certificate.min_normalized.clone();
    let sampler = TripleSampler::new(t.clone());
    let mut rng = stream(state.config.seed, "step5");
    state.seeds.insert("step5".into(), derive_seed(state.config.seed, "step5"));
    let probe = out.subspace.element_indices().into_iter().take(4).collect::<Vec<_>>();
    let rates: Vec<f64> = probe.iter().map(|&y| sampler.acceptance_rate(&mut rng, y, 1024)).collect();
    state.trace.insert(
        "step5".into(),
        json!({ "W_codim": out.subspace.codim(), "delta_T": super::ratio_string(&delta), "acceptance": rates }),
    );
    state.ledger.r2 += out.subspace.codim();
    state.w = Some(out.subspace);
    state.delta_t = Some(delta);
    Ok(())
}

/// Linear parts of the family, projected along `Q`.
fn projected_family(state: &PipelineState) -> Result<MapFamily> {
    let reduced = state.reduced.expect("step2 ran");
    let sel = state.t_selection.as_ref().expect("step34 ran");
    let proj = projection_along(&sel.q);
    let maps: Vec<AffineMap> = sel.family.iter().map(|l| l.linear_part().compose_after(proj.matrix())).collect();
    MapFamily::new(reduced.p, reduced.n, state.a.x_params().n, maps)
}

/// `V = Q^perp cap Z^perp` with `Z` from the lifted family, `W` carried back into
/// `F^n`, and one form `x^T M_L C y` per map where `C` reads off the coordinates
/// of `y` in `W'`.
pub fn step6(state: &mut PipelineState) -> Result<BilinearVariety> {
    let reduced = state.reduced.expect("step2 ran");
    let (m, n) = (state.a.x_params().n, state.a.y_params().n);
    let sel = state.t_selection.clone().expect("step34 ran");
    let projected = projected_family(state)?;
    let (copies, delta) = if state.config.robust {
        (11, robust::tuple_density(state)?)
    } else {
        (3, state.delta_t.clone().expect("step5 ran"))
    };
    let lifted = lift(&projected, copies)?;
    let ms = mapsubspace(&lifted, &delta, state.config.rank_cap)?;
    if !ms.exhaustive {
        state.degraded.push("min_rank_non_exhaustive".into());
    }
    let v = sel.q.annihilator().intersect(&ms.z.annihilator())?;

    let w_prime = state.w_prime.clone().expect("step2 ran");
    let w_red = state.w.clone().expect("step5 ran");
    let ys = FieldParams::linear(reduced.p, n)?;
    let lifted_w: Vec<Vector> = w_red.basis().iter().map(|c| w_prime.from_coordinates(c)).collect();
    let w = canonical_basis(ys, &lifted_w)?;
    let mut forms = Vec::with_capacity(sel.family.len());
    for l in &sel.family {
        let matrix: Vec<Vector> = l
            .matrix()
            .iter()
            .map(|row| {
                let mut wide = vec![0; n];
                for (&col, &c) in w_prime.pivots().iter().zip(row) {
                    wide[col] = c;
                }
                wide
            })
            .collect();
        forms.push(BilinearForm::new(reduced.p, n, matrix)?);
    }
    let variety = BilinearVariety::new(v, w, forms)?.reduced();
    state.trace.insert(
        "step6".into(),
        json!({
            "lift": copies,
            "delta": super::ratio_string(&delta),
            "k": lifted.dim(),
            "Z_dim": ms.z.dim(),
            "depth": ms.depth,
            "forms_before_reduction": sel.family.len(),
        }),
    );
    state.ledger.r1 = state.ledger.r1.max(variety.r1());
    state.ledger.r2 = state.ledger.r2.max(variety.r2());
    state.ledger.r3 = variety.r3();
    debug_assert_eq!(m, variety.m());
    state.z = Some(ms.z);
    Ok(variety)
}
