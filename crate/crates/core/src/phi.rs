//! The fiberwise difference operators `phi_h`, `phi_v`, their compositions along
//! words, and exact or normalized representation counts.
//!
//! A grid point `(x, y)` with `x in F^m`, `y in F^n` has index `y * p^m + x`, which
//! is also the index of the concatenated vector `(x, y)` in `F^{m+n}`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldParams, Subspace};
use crate::setlab::{dft_prime_power, DenseSet};

pub const MAX_WORD_LEN: usize = 12;
/// Largest grid on which exact big-integer count tables are built.
pub const EXACT_MAX_POINTS: usize = 1 << 16;
/// Budget on `p^{(m+n)(k+1)}` for the definitional enumerator.
pub const BRUTEFORCE_BUDGET: u128 = 1 << 40;
/// Normalized values below this are treated as zero in floating mode.
pub const FLOAT_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    H,
    V,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::H => 'h',
            Letter::V => 'v',
        }
    }
}

/// A word over `{h, v}`; `phi_w` applies the last letter first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.len() > MAX_WORD_LEN {
            return Err(Error::WordTooLong);
        }
        Ok(Self(letters))
    }

    /// The word `hvvhvvvhh` of the main construction.
    pub fn theorem() -> Self {
        "hvvhvvvhh".parse().expect("valid word")
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letters in the order they are applied.
    pub fn application_order(&self) -> impl Iterator<Item = Letter> + '_ {
        self.0.iter().rev().copied()
    }

    /// All words of length exactly `k`.
    pub fn all_of_length(k: usize) -> Vec<Word> {
        (0..1usize << k)
            .map(|bits| Word((0..k).map(|i| if bits >> i & 1 == 0 { Letter::H } else { Letter::V }).collect()))
            .collect()
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                'h' => Ok(Letter::H),
                'v' => Ok(Letter::V),
                other => Err(Error::BadWord(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Word::new(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

/// A subset of `F^m x F^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GridSet {
    xs: FieldParams,
    ys: FieldParams,
    points: DenseSet,
}

impl GridSet {
    pub fn empty(p: u32, m: usize, n: usize) -> Result<Self> {
        let xs = FieldParams::new(p, m)?;
        let ys = FieldParams::new(p, n)?;
        let joint = FieldParams::new(p, m + n)?;
        Ok(Self { xs, ys, points: DenseSet::empty(joint) })
    }

    pub fn full(p: u32, m: usize, n: usize) -> Result<Self> {
        let mut g = Self::empty(p, m, n)?;
        g.points = DenseSet::full(g.points.ambient());
        Ok(g)
    }

    pub fn from_predicate(p: u32, m: usize, n: usize, mut pred: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut g = Self::empty(p, m, n)?;
        let sx = g.xs.size();
        g.points = DenseSet::from_predicate(g.points.ambient(), |i| pred(i % sx, i / sx));
        Ok(g)
    }

    /// Wrap a set of `F^{m+n}` whose first `m` coordinates are the x-side.
    pub fn from_joint(m: usize, points: DenseSet) -> Result<Self> {
        let joint = points.ambient();
        if m > joint.n {
            return Err(Error::DimensionMismatch { expected: joint.n, found: m });
        }
        Ok(Self { xs: FieldParams::new(joint.p, m)?, ys: FieldParams::new(joint.p, joint.n - m)?, points })
    }

    /// `V x W`.
    pub fn product(v: &Subspace, w: &Subspace) -> Result<Self> {
        if v.ambient().p != w.ambient().p {
            return Err(Error::AmbientMismatch);
        }
        let vs = DenseSet::from_indices(FieldParams::new(v.ambient().p, v.ambient().n)?, v.element_indices());
        let ws = DenseSet::from_indices(FieldParams::new(w.ambient().p, w.ambient().n)?, w.element_indices());
        Self::from_predicate(v.ambient().p, v.ambient().n, w.ambient().n, |x, y| vs.contains(x) && ws.contains(y))
    }

    /// `F^m x A0`.
    pub fn graph(m: usize, a0: &DenseSet) -> Result<Self> {
        let ys = a0.ambient();
        Self::from_predicate(ys.p, m, ys.n, |_, y| a0.contains(y))
    }

    pub fn p(&self) -> u32 {
        self.xs.p
    }

    pub fn x_params(&self) -> FieldParams {
        self.xs
    }

    pub fn y_params(&self) -> FieldParams {
        self.ys
    }

    pub fn joint(&self) -> &DenseSet {
        &self.points
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.xs.size() + x
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        let sx = self.xs.size();
        (idx % sx, idx / sx)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.points.contains(self.index(x, y))
    }

    pub fn insert(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.points.insert(i);
    }

    pub fn remove(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.points.remove(i);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_points(&self) -> usize {
        self.points.ambient().size()
    }

    pub fn density(&self) -> BigRational {
        BigRational::new(BigInt::from(self.len()), BigInt::from(self.num_points()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.points.iter().map(|i| self.split(i))
    }

    /// `A_y = {x : (x, y) in A}`.
    pub fn fiber(&self, y: usize) -> DenseSet {
        DenseSet::from_predicate(self.xs, |x| self.contains(x, y))
    }

    /// `{y : (x, y) in A}`.
    pub fn column(&self, x: usize) -> DenseSet {
        DenseSet::from_predicate(self.ys, |y| self.contains(x, y))
    }

    pub fn y_projection(&self) -> DenseSet {
        DenseSet::from_predicate(self.ys, |y| (0..self.xs.size()).any(|x| self.contains(x, y)))
    }

    pub fn is_subset_of(&self, other: &GridSet) -> bool {
        self.points.is_subset_of(&other.points)
    }

    fn same_shape(&self, other: &GridSet) -> bool {
        self.xs == other.xs && self.ys == other.ys
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        if !self.same_shape(other) {
            return Err(Error::AmbientMismatch);
        }
        Ok(Self { xs: self.xs, ys: self.ys, points: self.points.intersection(&other.points)? })
    }

    /// The fibers along the acted-on side: index lists of each line.
    fn lines(&self, letter: Letter) -> (usize, usize, usize, FieldParams) {
        // (number of lines, stride between lines, stride within a line, line ambient)
        match letter {
            Letter::H => (self.ys.size(), self.xs.size(), 1, self.xs),
            Letter::V => (self.xs.size(), 1, self.xs.size(), self.ys),
        }
    }
}

/// One application of `phi_h` or `phi_v` on supports.
pub fn phi_step(a: &GridSet, letter: Letter) -> GridSet {
    let (lines, line_stride, step, side) = a.lines(letter);
    let line_size = side.size();
    let rows: Vec<Vec<usize>> = (0..lines)
        .into_par_iter()
        .map(|l| {
            let base = l * line_stride;
            let members: Vec<usize> =
                (0..line_size).filter(|&t| a.points.contains(base + t * step)).collect();
            let mut hit = vec![false; line_size];
            for &t1 in &members {
                for &t2 in &members {
                    hit[side.sub_idx(t1, t2)] = true;
                }
            }
            (0..line_size).filter(|&t| hit[t]).map(|t| base + t * step).collect()
        })
        .collect();
    let points = DenseSet::from_indices(a.points.ambient(), rows.into_iter().flatten());
    GridSet { xs: a.xs, ys: a.ys, points }
}

/// `phi_w(A)`, applying the last letter first.
pub fn phi_word(a: &GridSet, w: &Word) -> GridSet {
    w.application_order().fold(a.clone(), |acc, l| phi_step(&acc, l))
}

/// Arithmetic used for count tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    #[default]
    Exact,
    Float,
}

impl fmt::Display for ArithmeticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithmeticMode::Exact => "exact",
            ArithmeticMode::Float => "float",
        })
    }
}

impl FromStr for ArithmeticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ArithmeticMode::Exact),
            "float" => Ok(ArithmeticMode::Float),
            other => Err(Error::InvalidParameter(format!("unknown arithmetic mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CountValues {
    Exact(Vec<BigUint>),
    /// `count / p^exponent`.
    Normalized(Vec<f64>),
}

/// Representation counts of every grid point under a word.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    shape: GridSet,
    word: Word,
    /// The normalizer is `p^exponent`.
    exponent: usize,
    values: CountValues,
}

/// `e` such that the full grid has count `p^e` everywhere under `w`.
pub fn normalizer_exponent(m: usize, n: usize, w: &Word) -> usize {
    w.application_order().fold(0, |e, l| 2 * e + if l == Letter::H { m } else { n })
}

impl CountTable {
    pub fn mode(&self) -> ArithmeticMode {
        match self.values {
            CountValues::Exact(_) => ArithmeticMode::Exact,
            CountValues::Normalized(_) => ArithmeticMode::Float,
        }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    pub fn normalizer(&self) -> BigUint {
        BigUint::from(self.shape.p()).pow(self.exponent as u32)
    }

    pub fn values(&self) -> &CountValues {
        &self.values
    }

    pub fn x_params(&self) -> FieldParams {
        self.shape.xs
    }

    pub fn y_params(&self) -> FieldParams {
        self.shape.ys
    }

    pub fn exact(&self, x: usize, y: usize) -> Option<&BigUint> {
        match &self.values {
            CountValues::Exact(v) => Some(&v[self.shape.index(x, y)]),
            CountValues::Normalized(_) => None,
        }
    }

    /// Exact normalized count (exact mode only).
    pub fn normalized(&self, x: usize, y: usize) -> Option<BigRational> {
        self.exact(x, y).map(|c| {
            BigRational::new(BigInt::from(c.clone()), BigInt::from(self.normalizer()))
        })
    }

    pub fn normalized_f64(&self, x: usize, y: usize) -> f64 {
        match &self.values {
            CountValues::Exact(v) => {
                let r = BigRational::new(BigInt::from(v[self.shape.index(x, y)].clone()), BigInt::from(self.normalizer()));
                r.to_f64().unwrap_or(0.0)
            }
            CountValues::Normalized(v) => v[self.shape.index(x, y)],
        }
    }

    pub fn is_positive(&self, x: usize, y: usize) -> bool {
        let i = self.shape.index(x, y);
        match &self.values {
            CountValues::Exact(v) => !v[i].is_zero(),
            CountValues::Normalized(v) => v[i] > FLOAT_ZERO,
        }
    }

    /// Whether the normalized count at `(x, y)` is at least `eps`. Exact in exact
    /// mode; in floating mode a relative slack of `1e-9` is granted.
    pub fn at_least(&self, x: usize, y: usize, eps: &BigRational) -> bool {
        let i = self.shape.index(x, y);
        match &self.values {
            CountValues::Exact(v) => {
                BigInt::from(v[i].clone()) * eps.denom() >= eps.numer() * BigInt::from(self.normalizer())
            }
            CountValues::Normalized(v) => {
                let e = eps.to_f64().unwrap_or(f64::INFINITY);
                v[i] > FLOAT_ZERO && v[i] >= e * (1.0 - 1e-9)
            }
        }
    }

    pub fn support(&self) -> GridSet {
        let mut out = GridSet { points: DenseSet::empty(self.shape.points.ambient()), ..self.shape.clone() };
        for i in 0..self.shape.num_points() {
            let (x, y) = self.shape.split(i);
            if self.is_positive(x, y) {
                out.points.insert(i);
            }
        }
        out
    }

    /// `{(x, y) : normalized count >= eps}`.
    pub fn threshold(&self, eps: &BigRational) -> GridSet {
        let mut out = GridSet { points: DenseSet::empty(self.shape.points.ambient()), ..self.shape.clone() };
        for i in 0..self.shape.num_points() {
            let (x, y) = self.shape.split(i);
            if self.at_least(x, y, eps) {
                out.points.insert(i);
            }
        }
        out
    }
}

fn exact_step(a: &GridSet, counts: &[BigUint], letter: Letter) -> Vec<BigUint> {
    let (lines, line_stride, step, side) = a.lines(letter);
    let line_size = side.size();
    let per_line: Vec<Vec<BigUint>> = (0..lines)
        .into_par_iter()
        .map(|l| {
            let base = l * line_stride;
            let nz: Vec<(usize, &BigUint)> = (0..line_size)
                .map(|t| (t, &counts[base + t * step]))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            let mut out = vec![BigUint::zero(); line_size];
            for &(t2, c2) in &nz {
                for &(t1, c1) in &nz {
                    out[side.sub_idx(t1, t2)] += c1 * c2;
                }
            }
            out
        })
        .collect();
    let mut next = vec![BigUint::zero(); counts.len()];
    for (l, vals) in per_line.into_iter().enumerate() {
        for (t, v) in vals.into_iter().enumerate() {
            next[l * line_stride + t * step] = v;
        }
    }
    next
}

/// Normalized autocorrelation of one line through a transform.
fn float_line(side: FieldParams, line: &[f64]) -> Vec<f64> {
    let size = side.size() as f64;
    let raw: Vec<f64> = if side.p == 2 {
        let mut buf = line.to_vec();
        walsh_hadamard_f64(&mut buf);
        for v in buf.iter_mut() {
            *v *= *v;
        }
        walsh_hadamard_f64(&mut buf);
        buf.into_iter().map(|v| v / size).collect()
    } else {
        let mut buf: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        dft_prime_power(side, &mut buf);
        for v in buf.iter_mut() {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        dft_prime_power(side, &mut buf);
        buf.into_iter().map(|v| v.re / size).collect()
    };
    raw.into_iter()
        .map(|r| {
            let v = r / size;
            if v < FLOAT_ZERO {
                0.0
            } else {
                v.min(1.0)
            }
        })
        .collect()
}

fn walsh_hadamard_f64(data: &mut [f64]) {
    let mut h = 1;
    while h < data.len() {
        for chunk in data.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn float_step(a: &GridSet, values: &[f64], letter: Letter) -> Vec<f64> {
    let (lines, line_stride, step, side) = a.lines(letter);
    let line_size = side.size();
    let per_line: Vec<Vec<f64>> = (0..lines)
        .into_par_iter()
        .map(|l| {
            let base = l * line_stride;
            let line: Vec<f64> = (0..line_size).map(|t| values[base + t * step]).collect();
            float_line(side, &line)
        })
        .collect();
    let mut next = vec![0.0; values.len()];
    for (l, vals) in per_line.into_iter().enumerate() {
        for (t, v) in vals.into_iter().enumerate() {
            next[l * line_stride + t * step] = v;
        }
    }
    next
}

/// Representation counts of every point under `phi_w`. One `h` step sends `c` to
/// `c'(x, y) = sum_{x2} c(x + x2, y) c(x2, y)`, and symmetrically for `v`.
pub fn count_table(a: &GridSet, w: &Word, mode: ArithmeticMode) -> Result<CountTable> {
    let (m, n) = (a.xs.n, a.ys.n);
    let exponent = normalizer_exponent(m, n, w);
    let values = match mode {
        ArithmeticMode::Exact => {
            if a.num_points() > EXACT_MAX_POINTS {
                return Err(Error::ModeMismatch(format!(
                    "exact count tables are limited to {EXACT_MAX_POINTS} grid points"
                )));
            }
            let mut c: Vec<BigUint> =
                (0..a.num_points()).map(|i| BigUint::from(u8::from(a.points.contains(i)))).collect();
            for l in w.application_order() {
                c = exact_step(a, &c, l);
            }
            CountValues::Exact(c)
        }
        ArithmeticMode::Float => {
            let mut c: Vec<f64> = (0..a.num_points()).map(|i| f64::from(u8::from(a.points.contains(i)))).collect();
            for l in w.application_order() {
                c = float_step(a, &c, l);
            }
            CountValues::Normalized(c)
        }
    };
    Ok(CountTable { shape: a.clone(), word: w.clone(), exponent, values })
}

/// `phi_w^eps(A) = {(x, y) : count / normalizer >= eps}`.
pub fn phi_robust(a: &GridSet, w: &Word, eps: &BigRational, mode: ArithmeticMode) -> Result<GridSet> {
    if *eps <= BigRational::zero() {
        return Err(Error::NonPositiveThreshold);
    }
    Ok(count_table(a, w, mode)?.threshold(eps))
}

struct Enumerator<'a> {
    a: &'a GridSet,
}

impl Enumerator<'_> {
    /// Sums `cont()` over every realization tree of `(x, y)` under `word`.
    fn realize(&self, word: &[Letter], x: usize, y: usize, cont: &mut dyn FnMut() -> u128) -> u128 {
        let Some((&first, rest)) = word.split_first() else {
            return if self.a.contains(x, y) { cont() } else { 0 };
        };
        let mut total = 0;
        match first {
            Letter::H => {
                let xs = self.a.xs;
                for x2 in 0..xs.size() {
                    let x1 = xs.add_idx(x, x2);
                    total += self.realize(rest, x1, y, &mut || self.realize(rest, x2, y, cont));
                }
            }
            Letter::V => {
                let ys = self.a.ys;
                for y2 in 0..ys.size() {
                    let y1 = ys.add_idx(y, y2);
                    total += self.realize(rest, x, y1, &mut || self.realize(rest, x, y2, cont));
                }
            }
        }
        total
    }
}

/// Exact counts by enumerating every realization tree, one at a time.
pub fn phi_bruteforce(a: &GridSet, w: &Word) -> Result<CountTable> {
    let needed = (a.p() as u128)
        .checked_pow(((a.xs.n + a.ys.n) * (w.len() + 1)) as u32)
        .unwrap_or(u128::MAX);
    if needed > BRUTEFORCE_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: BRUTEFORCE_BUDGET });
    }
    let e = Enumerator { a };
    let counts = (0..a.num_points())
        .map(|i| {
            let (x, y) = a.split(i);
            BigUint::from(e.realize(w.letters(), x, y, &mut || 1))
        })
        .collect();
    Ok(CountTable {
        shape: a.clone(),
        word: w.clone(),
        exponent: normalizer_exponent(a.xs.n, a.ys.n, w),
        values: CountValues::Exact(counts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::canonical_basis;
    use num_traits::One;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts_of(t: &CountTable) -> Vec<u64> {
        match t.values() {
            CountValues::Exact(v) => v.iter().map(|c| c.to_u64().unwrap()).collect(),
            CountValues::Normalized(_) => panic!("exact expected"),
        }
    }

    #[test]
    fn word_parsing_and_order() {
        let w: Word = "hvvhvvvhh".parse().unwrap();
        assert_eq!(w, Word::theorem());
        assert_eq!(w.to_string(), "hvvhvvvhh");
        assert_eq!(w.application_order().take(2).collect::<Vec<_>>(), vec![Letter::H, Letter::H]);
        assert_eq!("hx".parse::<Word>(), Err(Error::BadWord('x')));
        assert_eq!("h".repeat(13).parse::<Word>(), Err(Error::WordTooLong));
        assert_eq!((0..=3).map(|k| Word::all_of_length(k).len()).sum::<usize>(), 15);
    }

    #[test]
    fn phi_step_examples() {
        let full = GridSet::full(2, 2, 2).unwrap();
        assert_eq!(phi_step(&full, Letter::H), full);
        assert_eq!(phi_step(&full, Letter::V), full);

        let f3 = FieldParams::new(2, 3).unwrap();
        let v = canonical_basis(f3, &[vec![1, 1, 0]]).unwrap();
        let w = canonical_basis(f3, &[vec![0, 1, 1], vec![1, 0, 0]]).unwrap();
        let prod = GridSet::product(&v, &w).unwrap();
        assert_eq!(phi_step(&prod, Letter::H), prod);
        assert_eq!(phi_step(&prod, Letter::V), prod);

        let mut a = GridSet::empty(2, 1, 1).unwrap();
        for (x, y) in [(0, 0), (1, 0), (0, 1)] {
            a.insert(x, y);
        }
        assert_eq!(phi_step(&a, Letter::H), a);
    }

    #[test]
    fn phi_word_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = GridSet::from_predicate(2, 2, 2, |_, _| rng.gen_bool(0.5)).unwrap();
        assert_eq!(phi_word(&a, &Word::empty()), a);
        let mut b = GridSet::empty(2, 2, 2).unwrap();
        b.insert(3, 1);
        assert!(phi_word(&b, &"hv".parse().unwrap()).contains(0, 0));
    }

    #[test]
    fn count_table_examples() {
        let full = GridSet::full(2, 1, 1).unwrap();
        let t = count_table(&full, &"h".parse().unwrap(), ArithmeticMode::Exact).unwrap();
        assert_eq!(counts_of(&t), vec![2; 4]);

        let mut a = GridSet::empty(2, 1, 1).unwrap();
        a.insert(0, 0);
        a.insert(1, 0);
        let t = count_table(&a, &"h".parse().unwrap(), ArithmeticMode::Exact).unwrap();
        assert_eq!(counts_of(&t), vec![2, 2, 0, 0]);

        let empty = GridSet::empty(2, 2, 2).unwrap();
        let t = count_table(&empty, &"hvh".parse().unwrap(), ArithmeticMode::Exact).unwrap();
        assert!(counts_of(&t).iter().all(|&c| c == 0));
    }

    #[test]
    fn bruteforce_examples() {
        let mut delta = GridSet::empty(2, 2, 2).unwrap();
        delta.insert(0, 0);
        let t = phi_bruteforce(&delta, &"h".parse().unwrap()).unwrap();
        let c = counts_of(&t);
        assert_eq!(c[0], 1);
        assert!(c[1..].iter().all(|&v| v == 0));

        let full = GridSet::full(2, 1, 1).unwrap();
        let t = phi_bruteforce(&full, &"hv".parse().unwrap()).unwrap();
        assert_eq!(counts_of(&t), vec![8; 4]);
    }

    #[test]
    fn float_mode_tracks_exact_mode() {
        for p in [2, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            let a = GridSet::from_predicate(p, 2, 2, |_, _| rng.gen_bool(0.6)).unwrap();
            let w: Word = "vhhv".parse().unwrap();
            let exact = count_table(&a, &w, ArithmeticMode::Exact).unwrap();
            let float = count_table(&a, &w, ArithmeticMode::Float).unwrap();
            for (x, y) in GridSet::full(p, 2, 2).unwrap().iter() {
                let e = exact.normalized(x, y).unwrap().to_f64().unwrap();
                let f = float.normalized_f64(x, y);
                assert!((e - f).abs() <= 1e-9 * e.max(1e-300) || (e == 0.0 && f == 0.0), "{e} vs {f}");
            }
            assert_eq!(exact.support(), float.support());
        }
    }

    #[test]
    fn phi_robust_examples() {
        let full = GridSet::full(2, 2, 2).unwrap();
        let w: Word = "hvh".parse().unwrap();
        assert_eq!(phi_robust(&full, &w, &BigRational::one(), ArithmeticMode::Exact).unwrap(), full);
        assert_eq!(phi_robust(&full, &w, &BigRational::zero(), ArithmeticMode::Exact), Err(Error::NonPositiveThreshold));

        // V x W with codims 1, 1 in F_2^2 x F_2^2: a count table that is uniform on
        // the support, so thresholding at its value keeps everything.
        let f2 = FieldParams::new(2, 2).unwrap();
        let v = canonical_basis(f2, &[vec![1, 1]]).unwrap();
        let wsp = canonical_basis(f2, &[vec![0, 1]]).unwrap();
        let prod = GridSet::product(&v, &wsp).unwrap();
        let hv: Word = "hv".parse().unwrap();
        let t = count_table(&prod, &hv, ArithmeticMode::Exact).unwrap();
        // v step: |W| per point, then h step: |V| * |W|^2 per point.
        let expected = BigUint::from(2u32 * 4);
        for (x, y) in prod.iter() {
            assert_eq!(t.exact(x, y), Some(&expected));
        }
        let eps = BigRational::new(8.into(), BigInt::from(t.normalizer()));
        assert_eq!(phi_robust(&prod, &hv, &eps, ArithmeticMode::Exact).unwrap(), prod);
    }
}
