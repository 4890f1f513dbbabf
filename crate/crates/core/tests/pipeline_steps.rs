use bbr_core::gf::{canonical_basis, random_subspace_of_codim, AffineMap, FieldParams, Subspace};
use bbr_core::phi::{count_table, phi_bruteforce, ArithmeticMode, GridSet, Word};
use bbr_core::pipeline::*;
use bbr_core::rng::stream;
use bbr_core::setlab::{diff_rep_counts, DenseSet};
use bbr_core::{bogolyubov::bogolyubov_subspace, generate::*, verify};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

fn random_grid(p: u32, m: usize, n: usize, density: f64, seed: u64) -> GridSet {
    generate(&GeneratorSpec::Random { p, m, n, density }, seed).unwrap()
}

fn state_for(a: GridSet) -> PipelineState {
    PipelineState::new(a, RunConfig::default()).unwrap()
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn step1_full_grid() {
    let mut s = state_for(GridSet::full(2, 3, 3).unwrap());
    step1(&mut s).unwrap();
    assert_eq!(s.s.as_ref().unwrap().len(), 8);
    assert!(s.v_prime.iter().all(|v| v.as_ref().unwrap().is_full()));
    assert_eq!(s.d1, 0);
}

#[test]
fn step1_product_fibers() {
    let mut rng = stream(4, "product");
    let v = random_subspace_of_codim(&mut rng, FieldParams::new(2, 4).unwrap(), 1).unwrap();
    let w = random_subspace_of_codim(&mut rng, FieldParams::new(2, 4).unwrap(), 2).unwrap();
    let mut s = state_for(GridSet::product(&v, &w).unwrap());
    step1(&mut s).unwrap();
    let set = s.s.clone().unwrap();
    assert_eq!(set.iter().collect::<Vec<_>>(), w.element_indices());
    for y in set.iter() {
        assert_eq!(s.v_prime[y].as_ref().unwrap(), &v);
    }
}

#[test]
fn step1_random_fibers_in_difference_sets() {
    let a = random_grid(2, 5, 5, 0.4, 11);
    let mut s = state_for(a.clone());
    step1(&mut s).unwrap();
    let set = s.s.clone().unwrap();
    assert!(set.len() * 10 >= 2 * 32);
    for y in set.iter() {
        let support = diff_rep_counts(&a.fiber(y)).support();
        let v = s.v_prime[y].as_ref().unwrap();
        assert!(v.element_indices().into_iter().all(|x| support.contains(x)));
    }
}

#[test]
fn step2_full_s_keeps_coordinates() {
    let mut s = state_for(GridSet::full(2, 2, 3).unwrap());
    step1(&mut s).unwrap();
    step2(&mut s).unwrap();
    assert!(s.w_prime.as_ref().unwrap().is_full());
    assert_eq!(s.embed, (0..8).collect::<Vec<_>>());
}

#[test]
fn step2_product_identical_fibers() {
    let mut rng = stream(5, "product");
    let v = random_subspace_of_codim(&mut rng, FieldParams::new(2, 4).unwrap(), 2).unwrap();
    let w = random_subspace_of_codim(&mut rng, FieldParams::new(2, 4).unwrap(), 1).unwrap();
    let mut s = state_for(GridSet::product(&v, &w).unwrap());
    step1(&mut s).unwrap();
    step2(&mut s).unwrap();
    assert_eq!(s.w_prime.as_ref().unwrap(), &w);
    assert!(s.v_red.iter().all(|vy| vy == &v));
}

#[test]
fn step2_fibers_lie_in_vv_of_b1() {
    for seed in 0..3 {
        let a = random_grid(2, 4, 4, 0.45, 20 + seed);
        let mut s = state_for(a.clone());
        step1(&mut s).unwrap();
        step2(&mut s).unwrap();
        let mut b1 = GridSet::empty(2, 4, 4).unwrap();
        for (y, v) in s.v_prime.iter().enumerate() {
            if let Some(v) = v {
                for x in v.element_indices() {
                    b1.insert(x, y);
                }
            }
        }
        let brute = phi_bruteforce(&b1, &"vv".parse().unwrap()).unwrap();
        for (yr, v) in s.v_red.iter().enumerate() {
            for x in v.element_indices() {
                assert!(brute.is_positive(x, s.embed[yr]));
            }
        }
        assert!(s.d <= 4 * s.d1);
    }
}

/// A state whose reduced fibers are given directly.
fn fibered_state(p: u32, m: usize, n: usize, v_red: Vec<Subspace>) -> PipelineState {
    let mut s = state_for(GridSet::full(p, m, n).unwrap());
    s.reduced = Some(FieldParams::new(p, n).unwrap());
    s.d = v_red.iter().map(Subspace::codim).max().unwrap();
    s.v_red = v_red;
    s
}

#[test]
fn step34_constant_fibers() {
    let mut rng = stream(6, "v0");
    let v0 = random_subspace_of_codim(&mut rng, FieldParams::new(2, 5).unwrap(), 2).unwrap();
    let mut s = fibered_state(2, 5, 4, vec![v0.clone(); 16]);
    step34(&mut s).unwrap();
    let sel = s.t_selection.clone().unwrap();
    assert_eq!(sel.t.len(), 16);
    let trace = &s.trace["discovery"];
    assert!(trace["t"].as_u64().unwrap() <= 1);
    // X_y lies in Q plus the values, which therefore cover U0
    let u0 = v0.annihilator();
    for y in 0..16 {
        let yv = FieldParams::new(2, 4).unwrap().vector(y);
        let vals: Vec<_> = sel.family.iter().map(|l| l.apply_linear(&yv)).collect();
        assert!(sel.q.extend(&vals).unwrap().contains_subspace(&u0));
    }
}

#[test]
fn step34_trivial_when_fibers_full() {
    let full = Subspace::full(FieldParams::new(2, 3).unwrap());
    let mut s = fibered_state(2, 3, 3, vec![full; 8]);
    step34(&mut s).unwrap();
    let sel = s.t_selection.unwrap();
    assert!(sel.family.is_empty() && sel.q.is_zero() && sel.t.len() == 8);
}

#[test]
fn step34_recovers_planted_linear_map() {
    let (m, n) = (5, 4);
    let xs = FieldParams::linear(2, m).unwrap();
    let ys = FieldParams::new(2, n).unwrap();
    let mut rng = stream(7, "l0");
    let matrix = (0..m).map(|_| (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..2)).collect()).collect();
    let l0 = AffineMap::linear(2, n, matrix).unwrap();
    let fibers: Vec<Subspace> =
        (0..16).map(|y| canonical_basis(xs, &[l0.apply(&ys.vector(y))]).unwrap().annihilator()).collect();
    let mut s = fibered_state(2, m, n, fibers);
    step34(&mut s).unwrap();
    let sel = s.t_selection.clone().unwrap();
    assert!(sel.t.len() * 2 >= 16);
    // some map of the family agrees with L0 on at least half the points
    let best = sel
        .family
        .iter()
        .map(|l| (0..16).filter(|&y| l.apply(&ys.vector(y)) == l0.apply(&ys.vector(y))).count())
        .max()
        .unwrap_or(0);
    assert!(best * 2 >= 16, "best agreement {best}");
}

fn with_t(t: DenseSet) -> PipelineState {
    let f = t.ambient();
    let mut s = state_for(GridSet::full(f.p, 2, f.n).unwrap());
    s.reduced = Some(f);
    s.t_selection = Some(TSelection {
        family: vec![],
        q: Subspace::zero(FieldParams::linear(f.p, 2).unwrap()),
        t,
        zw: None,
    });
    s
}

#[test]
fn step5_full_and_subspace() {
    let f = FieldParams::new(2, 4).unwrap();
    let mut s = with_t(DenseSet::full(f));
    step5(&mut s).unwrap();
    assert!(s.w.as_ref().unwrap().is_full());
    assert_eq!(s.delta_t.clone().unwrap(), BigRational::one());
    let mut rng = stream(1, "t");
    let t = random_subspace_of_codim(&mut rng, f, 2).unwrap();
    let mut s = with_t(DenseSet::from_indices(f, t.element_indices()));
    step5(&mut s).unwrap();
    assert_eq!(s.w.as_ref().unwrap(), &t);
    // S_y is T^3 exactly, of density 2^{-6}
    assert_eq!(s.delta_t.clone().unwrap(), ratio(1, 64));
}

#[test]
fn step5_sampler_acceptance_bounds() {
    let f = FieldParams::new(2, 5).unwrap();
    let mut rng = stream(2, "t");
    let t = DenseSet::random(&mut rng, f, 0.3);
    let mut s = with_t(t.clone());
    step5(&mut s).unwrap();
    let delta = s.delta_t.clone().unwrap();
    let sampler = TripleSampler::new(t);
    for y in s.w.as_ref().unwrap().element_indices() {
        let exact = (0..32 * 32 * 32).filter(|&i| sampler.accepts(y, (i % 32, (i / 32) % 32, i / 1024))).count();
        assert!(ratio(exact as i64, 32768) >= delta);
        let measured = sampler.acceptance_rate(&mut rng, y, 20_000);
        let expected = exact as f64 / 32768.0;
        assert!((measured - expected).abs() < 0.02, "{measured} vs {expected}");
        if exact > 0 {
            let (a, b, c) = sampler.sample(&mut rng, y, 100_000).unwrap();
            assert!(sampler.accepts(y, (a, b, c)));
        }
    }
}

#[test]
fn step6_rank_one_map() {
    let f2 = FieldParams::new(2, 2).unwrap();
    let l = AffineMap::linear(2, 2, vec![vec![1, 1], vec![0, 0]]).unwrap();
    let mut s = with_t(DenseSet::full(f2));
    s.w_prime = Some(Subspace::full(f2));
    s.t_selection.as_mut().unwrap().family = vec![l.clone()];
    step5(&mut s).unwrap();
    let b = step6(&mut s).unwrap();
    assert!(b.r1() <= 1);
    for (x, y) in b.points() {
        let (xv, yv) = (f2.vector(x), f2.vector(y));
        assert_eq!(f2.dot(&xv, &l.apply(&yv)), 0);
    }
    assert!(b.points().len() >= 2);
}

#[test]
fn step6_empty_family_gives_full_grid() {
    let f = FieldParams::new(3, 2).unwrap();
    let mut s = with_t(DenseSet::full(f));
    s.w_prime = Some(Subspace::full(f));
    step5(&mut s).unwrap();
    let b = step6(&mut s).unwrap();
    assert_eq!(b.r(), 0);
}

#[test]
fn run_full_grid() {
    let a = GridSet::full(3, 2, 2).unwrap();
    let out = run_pipeline(&a, &RunConfig::default()).unwrap();
    assert_eq!(out.report.r, 0);
    assert!(out.report.certificate.pass && out.report.certificate.exhaustive);
    assert_eq!(out.variety.to_grid().unwrap(), a);
}

#[test]
fn run_graph_slices_in_difference_set() {
    for seed in 0..3 {
        let mut rng = stream(seed, "a0");
        let a0 = DenseSet::random(&mut rng, FieldParams::new(2, 5).unwrap(), 0.3);
        let a = generate(&GeneratorSpec::Graph { m: 5, base: a0.clone() }, 0).unwrap();
        let out = run_pipeline(&a, &RunConfig { seed, ..Default::default() }).unwrap();
        assert!(out.report.certificate.pass);
        let diff = diff_rep_counts(&a0).support();
        for y in out.variety.w().element_indices() {
            assert!(diff.contains(y));
        }
        let bog = bogolyubov_subspace(&a0, None).unwrap().subspace;
        assert!(bog.contains_subspace(out.variety.w()));
    }
}

#[test]
fn run_planted_variety_passes() {
    let spec = GeneratorSpec::PlantedVariety { p: 2, m: 6, n: 6, codims: (1, 1, 1), deletion: 0.1 };
    let a = generate(&spec, 7).unwrap();
    let out = run_pipeline(&a, &RunConfig { seed: 7, ..Default::default() }).unwrap();
    assert!(out.report.certificate.pass);
    let check = verify::verify_variety(&out.variety, &a, &Word::theorem(), None).unwrap();
    assert!(check.pass);
}

#[test]
fn report_ledger_matches_variety() {
    let a = random_grid(2, 4, 4, 0.4, 3);
    let out = run_pipeline(&a, &RunConfig { seed: 3, ..Default::default() }).unwrap();
    let r = &out.report;
    assert_eq!((r.r1, r.r2, r.r3), (out.variety.r1(), out.variety.r2(), out.variety.r3()));
    assert_eq!(r.r, r.r1 + r.r2 + r.r3);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for key in ["p", "m", "n", "alpha", "word", "mode", "r1", "r2", "r3", "r", "epsilon", "certificate", "seeds", "oracle", "timings_ms", "degraded_flags"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    for key in ["checked", "exhaustive", "min_normalized_count", "pass"] {
        assert!(json["certificate"].get(key).is_some());
    }
}

#[test]
fn robust_full_grid_has_unit_epsilon() {
    let a = GridSet::full(2, 2, 2).unwrap();
    let out = run_pipeline_robust(&a, &RunConfig::default()).unwrap();
    assert_eq!(out.report.epsilon.as_deref(), Some("1/1"));
    assert!(out.report.certificate.pass);
}

#[test]
fn robust_product_counts_uniform() {
    let mut rng = stream(8, "product");
    let f = FieldParams::new(2, 3).unwrap();
    let v = random_subspace_of_codim(&mut rng, f, 1).unwrap();
    let w = random_subspace_of_codim(&mut rng, f, 1).unwrap();
    let a = GridSet::product(&v, &w).unwrap();
    let out = run_pipeline_robust(&a, &RunConfig::default()).unwrap();
    assert!(out.report.certificate.pass);
    let table = count_table(&a, &Word::theorem(), ArithmeticMode::Exact).unwrap();
    let values: Vec<BigRational> = out.variety.points().into_iter().map(|(x, y)| table.normalized(x, y).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] == w[1]));
    let eps: BigRational = parse_ratio(out.report.epsilon.as_deref().unwrap());
    // every factor is a power of 1/2 bounded by the codimensions
    assert!(eps >= BigRational::new(BigInt::one(), BigInt::from(2).pow(1024)));
}

fn parse_ratio(s: &str) -> BigRational {
    let (n, d) = s.split_once('/').unwrap();
    BigRational::new(n.parse().unwrap(), d.parse().unwrap())
}

#[test]
fn robust_random_epsilon_below_exact_minimum() {
    let a = random_grid(2, 4, 4, 0.4, 12);
    let out = run_pipeline_robust(&a, &RunConfig { seed: 12, ..Default::default() }).unwrap();
    let eps = parse_ratio(out.report.epsilon.as_deref().unwrap());
    let check = verify::verify_variety(&out.variety, &a, &Word::theorem(), Some(&eps)).unwrap();
    assert!(out.report.certificate.pass && check.pass);
    assert_eq!(parse_ratio(&out.report.certificate.min_normalized_count), check.min_normalized.unwrap());
    assert!(eps > BigRational::from_integer(0.into()));
}

#[test]
fn identical_inputs_give_identical_reports() {
    let a = random_grid(2, 5, 5, 0.4, 1);
    let cfg = RunConfig { seed: 99, ..Default::default() };
    assert_eq!(run_pipeline(&a, &cfg).unwrap().report.to_json(), run_pipeline(&a, &cfg).unwrap().report.to_json());
    let b = random_grid(2, 4, 4, 0.4, 2);
    assert_eq!(
        run_pipeline_robust(&b, &cfg).unwrap().report.to_json(),
        run_pipeline_robust(&b, &cfg).unwrap().report.to_json()
    );
}

#[test]
fn mapsubspace_examples() {
    let half = ratio(1, 2);
    let zero = bbr_core::gf::MapFamily::new(2, 3, 3, vec![]).unwrap();
    assert!(mapsubspace(&zero, &half, 4096).unwrap().z.is_zero());
    let l = AffineMap::linear(2, 3, vec![vec![0, 1, 1], vec![0, 0, 0], vec![0, 1, 1]]).unwrap();
    let fam = bbr_core::gf::MapFamily::new(2, 3, 3, vec![l.clone()]).unwrap();
    assert_eq!(mapsubspace(&fam, &half, 4096).unwrap().z, l.image());
    let id = AffineMap::identity(2, 8).unwrap();
    let fam = bbr_core::gf::MapFamily::new(2, 8, 8, vec![id]).unwrap();
    assert!(mapsubspace(&fam, &half, 4096).unwrap().z.is_zero());
}
