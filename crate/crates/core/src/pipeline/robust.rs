//! The counting variant: T by fraction of good `(z, w)` pairs, the 11-fold
//! tuple density, and the composed constant `eps6 * eps2^32 * eps1^128`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::approx_hom::{step4_target, FiberedSubspaces};
use crate::error::{Error, Result};
use crate::gf::{canonical_basis, AffineMap, FieldParams, Subspace, Vector};
use crate::phi::{count_table, ArithmeticMode, GridSet, Word};
use crate::rng::{derive_seed, stream};
use crate::setlab::DenseSet;

use super::steps::{candidate_pairs, discover};
use super::variety::BilinearVariety;
use super::{ratio_string, PipelineState, TSelection};

/// `P - Q` as a set together with `eta = |P cap Q| / p^n`, the fraction of
/// representations every element of the difference has.
pub fn subspace_diff_eta(p: &Subspace, q: &Subspace) -> Result<(Subspace, BigRational)> {
    let diff = p.sum(q)?;
    let meet = p.intersect(q)?;
    let f = p.ambient();
    let eta = BigRational::new(
        BigInt::from(f.p).pow(meet.dim() as u32),
        BigInt::from(f.p).pow(f.n as u32),
    );
    Ok((diff, eta))
}

fn fibers(state: &PipelineState) -> Result<FiberedSubspaces> {
    let reduced = state.reduced.expect("step2 ran");
    let m = state.a.x_params().n;
    FiberedSubspaces::new(reduced, m, state.v_red.iter().map(Subspace::annihilator).collect())
}

/// `X_y(z, w) in Q0 + span{M_L y, M_L z, M_L w}`.
fn pair_good(
    u: &FiberedSubspaces,
    q0: &Subspace,
    maps: &[&AffineMap],
    y: usize,
    z: usize,
    w: usize,
) -> bool {
    let dom = u.domain();
    let (yv, zv, wv) = (dom.vector(y), dom.vector(z), dom.vector(w));
    let mut vals: Vec<Vector> = Vec::with_capacity(3 * maps.len());
    for l in maps {
        vals.push(l.apply_linear(&yv));
        vals.push(l.apply_linear(&zv));
        vals.push(l.apply_linear(&wv));
    }
    q0.extend(&vals).expect("values in F^m").contains_subspace(&step4_target(u, y, z, w))
}

/// Steps 3 and 4 with `Q0` the span of the offsets and
/// `T = {y : at least tau of the (z, w) pairs are good}`.
pub fn step34(state: &mut PipelineState) -> Result<()> {
    let reduced = state.reduced.expect("step2 ran");
    let m = state.a.x_params().n;
    let xs = FieldParams::linear(reduced.p, m)?;
    if state.d == 0 {
        state.t_selection =
            Some(TSelection { family: Vec::new(), q: Subspace::zero(xs), t: DenseSet::full(reduced), zw: None });
        state.trace.insert("step4".into(), json!({ "family": 0, "Q_dim": 0, "T_size": reduced.size() }));
        return Ok(());
    }
    let found = discover(state)?;
    let cfg = state.config.clone();
    let mut rng = stream(cfg.seed, "step4/pairs");
    let pairs = candidate_pairs(&mut rng, reduced, cfg.exhaustive_pairs_limit, cfg.pair_candidates);
    let u = &found.u;
    let p = reduced.p as u128;
    let (tau_num, tau_den) = (cfg.tau.numer().clone(), cfg.tau.denom().clone());

    let mut best: Option<(u128, usize, Subspace, Vec<usize>, bool)> = None;
    for (fi, ids) in found.families.iter().enumerate() {
        let maps: Vec<&AffineMap> = ids.iter().map(|&i| &found.maps[i]).collect();
        let offsets: Vec<Vector> = maps.iter().map(|l| l.offset().to_vec()).collect();
        let q0 = canonical_basis(xs, &offsets)?;
        let good: Vec<usize> = (0..reduced.size())
            .into_par_iter()
            .map(|y| pairs.iter().filter(|&&(z, w)| pair_good(u, &q0, &maps, y, z, w)).count())
            .collect();
        let total = BigInt::from(pairs.len());
        let mut t: Vec<usize> =
            (0..reduced.size()).filter(|&y| BigInt::from(good[y]) * &tau_den >= &tau_num * &total).collect();
        let mut lowered = false;
        let top = good.iter().copied().max().unwrap_or(0);
        if t.is_empty() && top > 0 {
            t = (0..reduced.size()).filter(|&y| good[y] == top).collect();
            lowered = true;
        }
        let score = t.len() as u128 * p.pow((m - q0.dim()) as u32);
        if score > 0 && best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, fi, q0, t, lowered));
        }
    }
    let (family, q, t) = match best {
        Some((_, fi, q, t, lowered)) => {
            if lowered {
                state.degraded.push("robust_tau_lowered".into());
            }
            (found.families[fi].iter().map(|&i| found.maps[i].clone()).collect::<Vec<_>>(), q, t)
        }
        None => {
            state.degraded.push("robust_T_empty".into());
            (Vec::new(), Subspace::full(xs), (0..reduced.size()).collect())
        }
    };
    state.trace.insert(
        "step4".into(),
        json!({
            "family": family.len(),
            "Q_dim": q.dim(),
            "T_size": t.len(),
            "pairs": pairs.len(),
            "tau": ratio_string(&cfg.tau),
        }),
    );
    state.ledger.r1 += q.dim();
    state.t_selection = Some(TSelection { family, q, t: DenseSet::from_indices(reduced, t), zw: None });
    Ok(())
}

/// Smallest measured density, over sampled `y in W`, of the 11-tuples
/// `(y1, y2, y3, w1..w4, z1..z4)` for which `y1, y2, y3, y4 = y1 + y2 - y3 - y`
/// lie in `T` and every `(y_i, z_i, w_i)` is good. Floored at one sample.
pub fn tuple_density(state: &mut PipelineState) -> Result<BigRational> {
    let sel = state.t_selection.clone().expect("step34 ran");
    let w = state.w.clone().expect("step5 ran");
    let reduced = state.reduced.expect("step2 ran");
    if sel.q.is_full() || sel.family.is_empty() {
        let delta = state.delta_t.clone().expect("step5 ran");
        return Ok(delta);
    }
    let u = fibers(state)?;
    let maps: Vec<&AffineMap> = sel.family.iter().collect();
    let n_samples = state.config.tuple_samples.max(1);
    let seed = derive_seed(state.config.seed, "step6/tuples");
    state.seeds.insert("step6/tuples".into(), seed);
    let mut probe_rng = stream(seed, "probe");
    let mut probes = w.element_indices();
    if probes.len() > 64 {
        probes = (0..64).map(|_| reduced.index(&w.from_coordinates(&random_coords(&mut probe_rng, &w)))).collect();
    }
    let size = reduced.size();
    let hits: Vec<usize> = probes
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut rng = stream(seed, &format!("y{i}"));
            (0..n_samples)
                .filter(|_| {
                    let mut draw = || rng.gen_range(0..size);
                    let (y1, y2, y3) = (draw(), draw(), draw());
                    let zs: [usize; 4] = [draw(), draw(), draw(), draw()];
                    let ws: [usize; 4] = [draw(), draw(), draw(), draw()];
                    let y4 = reduced.sub_idx(reduced.sub_idx(reduced.add_idx(y1, y2), y3), y);
                    let ys = [y1, y2, y3, y4];
                    ys.iter().all(|&v| sel.t.contains(v))
                        && (0..4).all(|j| pair_good(&u, &sel.q, &maps, ys[j], zs[j], ws[j]))
                })
                .count()
        })
        .collect();
    let min_hits = hits.iter().copied().min().unwrap_or(0);
    if min_hits == 0 {
        state.degraded.push("tuple_density_floor".into());
    }
    Ok(BigRational::new(BigInt::from(min_hits.max(1)), BigInt::from(n_samples)))
}

fn random_coords<R: Rng>(rng: &mut R, w: &Subspace) -> Vec<u32> {
    let p = w.ambient().p;
    (0..w.dim()).map(|_| rng.gen_range(0..p)).collect()
}

/// `B^1 = union over y in S of V'_y x {y}`.
fn b1_grid(state: &PipelineState) -> Result<GridSet> {
    let (xs, ys) = (state.a.x_params(), state.a.y_params());
    let mut g = GridSet::empty(xs.p, xs.n, ys.n)?;
    for (y, v) in state.v_prime.iter().enumerate() {
        if let Some(v) = v {
            for x in v.element_indices() {
                g.insert(x, y);
            }
        }
    }
    Ok(g)
}

/// `B^2 = union over y in W' of V_y x {y}`, in original coordinates.
fn b2_grid(state: &PipelineState) -> Result<GridSet> {
    let (xs, ys) = (state.a.x_params(), state.a.y_params());
    let mut g = GridSet::empty(xs.p, xs.n, ys.n)?;
    for (yr, v) in state.v_red.iter().enumerate() {
        for x in v.element_indices() {
            g.insert(x, state.embed[yr]);
        }
    }
    Ok(g)
}

/// Minimum exact normalized count of `word` over `source`, taken at `points`.
fn min_count_over(source: &GridSet, word: &str, points: impl Iterator<Item = (usize, usize)>) -> Result<BigRational> {
    let table = count_table(source, &word.parse::<Word>()?, ArithmeticMode::Exact)?;
    let mut best: Option<BigRational> = None;
    for (x, y) in points {
        let c = table.normalized(x, y).ok_or_else(|| Error::ModeMismatch("exact table required".into()))?;
        if best.as_ref().is_none_or(|b| c < *b) {
            best = Some(c);
        }
    }
    Ok(best.unwrap_or_else(BigRational::one))
}

/// `eps2 = min over B^2 of the vv-count of B^1`.
pub fn eps2(state: &mut PipelineState) -> Result<BigRational> {
    let b1 = b1_grid(state)?;
    let embed = &state.embed;
    let pts = state.v_red.iter().enumerate().flat_map(|(yr, v)| {
        let y = embed[yr];
        v.element_indices().into_iter().map(move |x| (x, y))
    });
    let e = min_count_over(&b1, "vv", pts)?;
    assert!(e > BigRational::zero(), "B^2 must lie in the support of vv(B^1)");
    Ok(e)
}

/// `eps6 = min over B of the hvvhv-count of B^2`; zero if some point is missed.
pub fn eps6(state: &PipelineState, variety: &BilinearVariety) -> Result<BigRational> {
    let b2 = b2_grid(state)?;
    min_count_over(&b2, "hvvhv", variety.points().into_iter())
}

/// `eps6 * eps2^32 * eps1^128`.
pub fn compose(eps1: &BigRational, eps2: &BigRational, eps6: &BigRational) -> BigRational {
    eps6 * num_traits::pow(eps2.clone(), 32) * num_traits::pow(eps1.clone(), 128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldParams;

    #[test]
    fn eta_of_equal_hyperplanes() {
        let f = FieldParams::linear(2, 4).unwrap();
        let h = canonical_basis(f, &[vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0]]).unwrap();
        let (d, eta) = subspace_diff_eta(&h, &h).unwrap();
        assert_eq!(d, h);
        assert_eq!(eta, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn eta_of_complementary_pair() {
        let f = FieldParams::linear(3, 2).unwrap();
        let a = canonical_basis(f, &[vec![1, 0]]).unwrap();
        let b = canonical_basis(f, &[vec![0, 1]]).unwrap();
        let (d, eta) = subspace_diff_eta(&a, &b).unwrap();
        assert!(d.is_full());
        assert_eq!(eta, BigRational::new(1.into(), 9.into()));
    }

    #[test]
    fn eta_counts_representations() {
        let mut rng = crate::rng::stream(3, "eta");
        let f = FieldParams::new(2, 6).unwrap();
        for _ in 0..10 {
            let a = crate::gf::random_subspace_of_codim(&mut rng, f, 2).unwrap();
            let b = crate::gf::random_subspace_of_codim(&mut rng, f, 2).unwrap();
            let (d, eta) = subspace_diff_eta(&a, &b).unwrap();
            // every element of a - b has |a cap b| representations
            let mut reps = vec![0usize; f.size()];
            for x in a.element_indices() {
                for y in b.element_indices() {
                    reps[f.sub_idx(x, y)] += 1;
                }
            }
            for (z, &r) in reps.iter().enumerate() {
                assert_eq!(r > 0, d.contains_index(z));
                if r > 0 {
                    assert_eq!(BigRational::new(r.into(), 64.into()), eta);
                }
            }
        }
    }
}
