//! The bilinear-variety construction and its certificate.

pub mod mapsubspace;
pub mod robust;
pub mod steps;
pub mod variety;

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bogolyubov::OracleInfo;
use crate::error::{Error, Result};
use crate::gf::{AffineMap, FieldParams, Subspace, DEFAULT_RANK_ENUMERATION_CAP, MAX_TABLE_POINTS};
use crate::phi::{count_table, phi_word, ArithmeticMode, CountTable, GridSet, Word};
use crate::rng::{derive_seed, stream};
use crate::setlab::DenseSet;

pub use mapsubspace::{lift, mapsubspace, pair_property_holds, MapSubspace};
pub use robust::subspace_diff_eta;
pub use steps::{step1, step2, step34, step5, step6, TripleSampler};
pub use variety::BilinearVariety;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub word: Word,
    pub robust: bool,
    pub arithmetic: ArithmeticMode,
    pub seed: u64,
    /// Triples sampled per discovery round.
    pub samples: usize,
    pub t_max: usize,
    pub retry_budget: usize,
    pub popular_keys: usize,
    /// All `(z, w)` pairs are examined when there are at most this many.
    pub exhaustive_pairs_limit: usize,
    pub pair_candidates: usize,
    /// Fraction of good `(z, w)` pairs required of `y in T` on the counting path.
    pub tau: BigRational,
    /// 11-tuples sampled per probe `y` when estimating the lifted density.
    pub tuple_samples: usize,
    pub rank_cap: u128,
    /// `B` is enumerated in full when it has at most this many points.
    pub enumeration_cap: u128,
    pub verify_samples: usize,
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            word: Word::theorem(),
            robust: false,
            arithmetic: ArithmeticMode::Exact,
            seed: 0,
            samples: 512,
            t_max: 64,
            retry_budget: 32,
            popular_keys: 4,
            exhaustive_pairs_limit: 1024,
            pair_candidates: 256,
            tau: BigRational::new(1.into(), 8.into()),
            tuple_samples: 2048,
            rank_cap: DEFAULT_RANK_ENUMERATION_CAP,
            enumeration_cap: MAX_TABLE_POINTS as u128,
            verify_samples: 4096,
            record_timings: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Ledger {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
}

/// Output of steps 3 and 4.
#[derive(Clone, Debug)]
pub struct TSelection {
    pub family: Vec<AffineMap>,
    pub q: Subspace,
    pub t: DenseSet,
    pub zw: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct PipelineState {
    pub a: GridSet,
    pub config: RunConfig,
    pub alpha: BigRational,
    pub s: Option<DenseSet>,
    /// `V'_y` for `y in S`, indexed by `y`.
    pub v_prime: Vec<Option<Subspace>>,
    pub d1: usize,
    pub eps1: Option<BigRational>,
    pub w_prime: Option<Subspace>,
    /// `F^{n'}` with `n' = dim W'`.
    pub reduced: Option<FieldParams>,
    /// Reduced index to index in `F^n`.
    pub embed: Vec<usize>,
    /// `V_y` indexed by reduced `y`.
    pub v_red: Vec<Subspace>,
    pub d: usize,
    pub eps2: Option<BigRational>,
    pub t_selection: Option<TSelection>,
    pub w: Option<Subspace>,
    pub delta_t: Option<BigRational>,
    pub z: Option<Subspace>,
    pub ledger: Ledger,
    pub degraded: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub trace: BTreeMap<String, Value>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl PipelineState {
    pub fn new(a: GridSet, config: RunConfig) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptySet);
        }
        let alpha = a.density();
        let mut seeds = BTreeMap::new();
        seeds.insert("root".to_string(), config.seed);
        Ok(Self {
            a,
            config,
            alpha,
            s: None,
            v_prime: Vec::new(),
            d1: 0,
            eps1: None,
            w_prime: None,
            reduced: None,
            embed: Vec::new(),
            v_red: Vec::new(),
            d: 0,
            eps2: None,
            t_selection: None,
            w: None,
            delta_t: None,
            z: None,
            ledger: Ledger::default(),
            degraded: Vec::new(),
            seeds,
            trace: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        if self.config.record_timings {
            self.timings_ms.insert(label.to_string(), start.elapsed().as_millis() as u64);
        }
        Ok(out)
    }
}

pub(crate) fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn log2_of(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = |x: &BigInt| -> f64 {
        let b = x.bits();
        let shift = b.saturating_sub(52);
        (x >> shift).to_f64().unwrap_or(1.0).log2() + shift as f64
    };
    bits(r.numer()) - bits(r.denom())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub checked: usize,
    pub exhaustive: bool,
    pub min_normalized_count: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<[usize; 2]>,
    /// On a failed counting check, the largest `eps` the checked points support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_passing_epsilon: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub p: u32,
    pub m: usize,
    pub n: usize,
    pub alpha: String,
    pub word: String,
    pub mode: String,
    pub arithmetic: ArithmeticMode,
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    pub r: usize,
    pub epsilon: Option<String>,
    pub certificate: Certificate,
    pub seeds: BTreeMap<String, u64>,
    pub oracle: OracleInfo,
    pub timings_ms: BTreeMap<String, u64>,
    pub degraded_flags: Vec<String>,
    pub trace: BTreeMap<String, Value>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub variety: BilinearVariety,
    pub report: PipelineReport,
    pub state: PipelineState,
}

/// Points of `B` to check: all of them when `|B|` is within the cap, else
/// `(0, 0)`, the basis probes of `W` and of the zero slice, and seeded random points.
pub fn check_points(variety: &BilinearVariety, cap: u128, samples: usize, seed: u64) -> (Vec<(usize, usize)>, bool) {
    if variety.size_bound().is_some_and(|s| s <= cap) {
        return (variety.points(), true);
    }
    let (xs, ys) = (variety.v().ambient(), variety.w().ambient());
    let zero_y = ys.zero_vec();
    let mut pts = vec![(0, 0)];
    pts.extend(variety.w().basis().iter().map(|b| (0, ys.index(b))));
    pts.extend(variety.slice(&zero_y).basis().iter().map(|b| (xs.index(b), 0)));
    let mut rng = stream(seed, "verify");
    while pts.len() < samples.max(pts.len()) {
        let y = variety.w().from_coordinates(&random_coords(&mut rng, variety.w()));
        let slice = variety.slice(&y);
        let x = slice.from_coordinates(&random_coords(&mut rng, &slice));
        pts.push((xs.index(&x), ys.index(&y)));
    }
    (pts, false)
}

fn random_coords<R: Rng>(rng: &mut R, s: &Subspace) -> Vec<u32> {
    let p = s.ambient().p;
    (0..s.dim()).map(|_| rng.gen_range(0..p)).collect()
}

fn count_table_with_fallback(a: &GridSet, w: &Word, mode: ArithmeticMode, flags: &mut Vec<String>) -> Result<CountTable> {
    match count_table(a, w, mode) {
        Err(Error::ModeMismatch(_)) if mode == ArithmeticMode::Exact => {
            flags.push("certificate_counts_float".into());
            count_table(a, w, ArithmeticMode::Float)
        }
        other => other,
    }
}

fn plain_certificate(state: &mut PipelineState, variety: &BilinearVariety) -> Result<Certificate> {
    let cfg = &state.config;
    let seed = derive_seed(cfg.seed, "verify");
    let (pts, exhaustive) = check_points(variety, cfg.enumeration_cap, cfg.verify_samples, seed);
    let support = phi_word(&state.a, &cfg.word);
    let table = count_table_with_fallback(&state.a, &cfg.word, cfg.arithmetic, &mut state.degraded)?;
    let first_failure = pts.iter().find(|&&(x, y)| !support.contains(x, y)).map(|&(x, y)| [x, y]);
    let min = match table.values() {
        crate::phi::CountValues::Exact(_) => pts
            .iter()
            .map(|&(x, y)| table.normalized(x, y).expect("exact table"))
            .min()
            .map(|r| ratio_string(&r))
            .unwrap_or_default(),
        crate::phi::CountValues::Normalized(_) => pts
            .iter()
            .map(|&(x, y)| table.normalized_f64(x, y))
            .fold(f64::INFINITY, f64::min)
            .to_string(),
    };
    Ok(Certificate {
        checked: pts.len(),
        exhaustive,
        min_normalized_count: min,
        pass: first_failure.is_none(),
        first_failure,
        largest_passing_epsilon: None,
    })
}

fn robust_certificate(state: &mut PipelineState, variety: &BilinearVariety, eps: &BigRational) -> Result<Certificate> {
    let cfg = &state.config;
    let seed = derive_seed(cfg.seed, "verify");
    let (pts, exhaustive) = check_points(variety, cfg.enumeration_cap, cfg.verify_samples, seed);
    let table = count_table(&state.a, &cfg.word, ArithmeticMode::Exact)?;
    let mut min: Option<BigRational> = None;
    let mut first_failure = None;
    for &(x, y) in &pts {
        let c = table.normalized(x, y).expect("exact table");
        if first_failure.is_none() && (c < *eps || c.is_zero()) {
            first_failure = Some([x, y]);
        }
        if min.as_ref().is_none_or(|b| c < *b) {
            min = Some(c);
        }
    }
    let min = min.unwrap_or_else(|| BigRational::from_integer(1.into()));
    let pass = first_failure.is_none() && *eps > BigRational::zero();
    Ok(Certificate {
        checked: pts.len(),
        exhaustive,
        min_normalized_count: ratio_string(&min),
        pass,
        first_failure,
        largest_passing_epsilon: (!pass && !min.is_zero()).then(|| ratio_string(&min)),
    })
}

fn run(a: &GridSet, config: RunConfig) -> Result<PipelineOutput> {
    if config.robust && config.arithmetic != ArithmeticMode::Exact {
        return Err(Error::ModeMismatch("the counting path needs exact arithmetic".into()));
    }
    let robust = config.robust;
    let mut state = PipelineState::new(a.clone(), config)?;
    state.timed("step1", step1)?;
    state.timed("step2", step2)?;
    if robust {
        let e2 = state.timed("eps2", robust::eps2)?;
        state.eps2 = Some(e2);
        state.timed("step34", robust::step34)?;
    } else {
        state.timed("step34", step34)?;
    }
    state.timed("step5", step5)?;
    let variety = state.timed("step6", step6)?;
    debug_assert!(variety.contains(&variety.v().ambient().zero_vec(), &variety.w().ambient().zero_vec()));

    let (certificate, epsilon) = if robust {
        let e6 = robust::eps6(&state, &variety)?;
        let e1 = state.eps1.clone().expect("step1 ran");
        let e2 = state.eps2.clone().expect("computed above");
        let eps = robust::compose(&e1, &e2, &e6);
        state.trace.insert(
            "epsilon".into(),
            json!({
                "eps1": ratio_string(&e1),
                "eps2": ratio_string(&e2),
                "eps6": ratio_string(&e6),
                "log2_eps": log2_of(&eps),
            }),
        );
        let cert = state.timed("certificate", |s| robust_certificate(s, &variety, &eps))?;
        (cert, Some(ratio_string(&eps)))
    } else {
        (state.timed("certificate", |s| plain_certificate(s, &variety))?, None)
    };
    let (xs, ys) = (state.a.x_params(), state.a.y_params());
    state.trace.insert("arithmetic".into(), json!(state.config.arithmetic.to_string()));
    let report = PipelineReport {
        p: xs.p,
        m: xs.n,
        n: ys.n,
        alpha: ratio_string(&state.alpha),
        word: state.config.word.to_string(),
        mode: if robust { "robust" } else { "plain" }.into(),
        arithmetic: state.config.arithmetic,
        r1: variety.r1(),
        r2: variety.r2(),
        r3: variety.r3(),
        r: variety.r(),
        epsilon,
        certificate,
        seeds: state.seeds.clone(),
        oracle: OracleInfo::default(),
        timings_ms: state.timings_ms.clone(),
        degraded_flags: state.degraded.clone(),
        trace: state.trace.clone(),
    };
    Ok(PipelineOutput { variety, report, state })
}

/// Steps 1 through 6 and the check `B in phi_w(A)`.
pub fn run_pipeline(a: &GridSet, config: &RunConfig) -> Result<PipelineOutput> {
    run(a, RunConfig { robust: false, ..config.clone() })
}

/// The counting variant with `B in phi^eps_w(A)` for the reported `eps`.
pub fn run_pipeline_robust(a: &GridSet, config: &RunConfig) -> Result<PipelineOutput> {
    run(a, RunConfig { robust: true, ..config.clone() })
}
