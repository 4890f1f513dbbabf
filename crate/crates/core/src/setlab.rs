//! Dense subsets of `F_p^n`: densities, exact group convolutions, Fourier
//! coefficients, large spectra and additive energy.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::FieldParams;

/// A subset of `F_p^n` stored as a membership bitmap in index order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DenseSet {
    ambient: FieldParams,
    words: Vec<u64>,
}

impl DenseSet {
    pub fn empty(ambient: FieldParams) -> Self {
        let words = vec![0; ambient.size().div_ceil(64)];
        Self { ambient, words }
    }

    pub fn full(ambient: FieldParams) -> Self {
        Self::from_predicate(ambient, |_| true)
    }

    pub fn from_predicate(ambient: FieldParams, mut pred: impl FnMut(usize) -> bool) -> Self {
        let mut set = Self::empty(ambient);
        for i in 0..ambient.size() {
            if pred(i) {
                set.insert(i);
            }
        }
        set
    }

    pub fn from_indices(ambient: FieldParams, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(ambient);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// A uniformly random set with exactly `round(density * p^n)` points.
    pub fn random<R: Rng>(rng: &mut R, ambient: FieldParams, density: f64) -> Self {
        let size = ambient.size();
        let k = ((density.clamp(0.0, 1.0) * size as f64).round() as usize).min(size);
        Self::from_indices(ambient, sample(rng, size, k))
    }

    pub fn ambient(&self) -> FieldParams {
        self.ambient
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        (self.words[idx >> 6] >> (idx & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, idx: usize) {
        self.words[idx >> 6] |= 1 << (idx & 63);
    }

    pub fn remove(&mut self, idx: usize) {
        self.words[idx >> 6] &= !(1 << (idx & 63));
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ambient.size()).filter(move |&i| self.contains(i))
    }

    /// Exact `|A| / p^n`.
    pub fn density(&self) -> Ratio<u64> {
        Ratio::new(self.len() as u64, self.ambient.size() as u64)
    }

    pub fn density_f64(&self) -> f64 {
        self.len() as f64 / self.ambient.size() as f64
    }

    pub fn complement(&self) -> Self {
        Self::from_predicate(self.ambient, |i| !self.contains(i))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        Ok(Self { ambient: self.ambient, words })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        Ok(Self { ambient: self.ambient, words })
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// `-A`.
    pub fn negate(&self) -> Self {
        Self::from_indices(self.ambient, self.iter().map(|i| self.ambient.neg_idx(i)))
    }

    pub fn indicator(&self) -> RepTable {
        let counts = (0..self.ambient.size()).map(|i| u128::from(self.contains(i))).collect();
        RepTable { ambient: self.ambient, counts }
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch);
        }
        Ok(())
    }
}

/// Exact non-negative counts over the points of `F_p^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepTable {
    ambient: FieldParams,
    counts: Vec<u128>,
}

impl RepTable {
    pub fn new(ambient: FieldParams, counts: Vec<u128>) -> Result<Self> {
        if counts.len() != ambient.size() {
            return Err(Error::DimensionMismatch { expected: ambient.size(), found: counts.len() });
        }
        Ok(Self { ambient, counts })
    }

    pub fn delta(ambient: FieldParams, at: usize) -> Self {
        let mut counts = vec![0; ambient.size()];
        counts[at] = 1;
        Self { ambient, counts }
    }

    pub fn ambient(&self) -> FieldParams {
        self.ambient
    }

    pub fn counts(&self) -> &[u128] {
        &self.counts
    }

    pub fn get(&self, idx: usize) -> u128 {
        self.counts[idx]
    }

    pub fn total(&self) -> Result<u128> {
        self.counts.iter().try_fold(0u128, |acc, &c| acc.checked_add(c)).ok_or(Error::Overflow)
    }

    pub fn support(&self) -> DenseSet {
        DenseSet::from_predicate(self.ambient, |i| self.counts[i] > 0)
    }
}

/// `out(x) = sum_t f(t) g(x - t)`, exactly.
pub fn convolve_counts(f: &RepTable, g: &RepTable) -> Result<RepTable> {
    if f.ambient != g.ambient {
        return Err(Error::AmbientMismatch);
    }
    let amb = f.ambient;
    let mut out = vec![0u128; amb.size()];
    let g_support: Vec<(usize, u128)> =
        g.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect();
    for (t, &ft) in f.counts.iter().enumerate() {
        if ft == 0 {
            continue;
        }
        for &(s, gs) in &g_support {
            let x = amb.add_idx(t, s);
            let term = ft.checked_mul(gs).ok_or(Error::Overflow)?;
            out[x] = out[x].checked_add(term).ok_or(Error::Overflow)?;
        }
    }
    Ok(RepTable { ambient: amb, counts: out })
}

/// `counts(y) = #{(a1,a2,a3,a4) in A^4 : a1 + a2 - a3 - a4 = y}`.
pub fn diff_rep_counts(a: &DenseSet) -> RepTable {
    let ind = a.indicator();
    let sums = convolve_counts(&ind, &ind).expect("pair counts fit in u128");
    let neg = a.negate().indicator();
    let neg_sums = convolve_counts(&neg, &neg).expect("pair counts fit in u128");
    // Each count is at most |A|^3 <= 2^66.
    convolve_counts(&sums, &neg_sums).expect("quadruple counts fit in u128")
}

/// Fourier coefficients `f^(xi) = E_x 1_A(x) e^{2 pi i xi.x / p}`, stored as the
/// unnormalised character sums. For `p = 2` the sums are integers.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqTable {
    ambient: FieldParams,
    values: FreqValues,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FreqValues {
    /// Walsh sums `sum_{x in A} (-1)^{xi.x}`.
    Integer(Vec<i64>),
    Complex(Vec<Complex64>),
}

impl FreqTable {
    pub fn ambient(&self) -> FieldParams {
        self.ambient
    }

    pub fn values(&self) -> &FreqValues {
        &self.values
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.values, FreqValues::Integer(_))
    }

    /// `f^(xi)` as a complex number.
    pub fn coefficient(&self, xi: usize) -> Complex64 {
        let scale = self.ambient.size() as f64;
        match &self.values {
            FreqValues::Integer(v) => Complex64::new(v[xi] as f64 / scale, 0.0),
            FreqValues::Complex(v) => v[xi] / scale,
        }
    }

    /// Exact `f^(xi)` for `p = 2`.
    pub fn exact_coefficient(&self, xi: usize) -> Option<BigRational> {
        match &self.values {
            FreqValues::Integer(v) => Some(BigRational::new(
                BigInt::from(v[xi]),
                BigInt::from(self.ambient.size()),
            )),
            FreqValues::Complex(_) => None,
        }
    }

    /// `|sum|^2` of the unnormalised character sum.
    fn sum_norm_sqr(&self, xi: usize) -> f64 {
        match &self.values {
            FreqValues::Integer(v) => (v[xi] as f64).powi(2),
            FreqValues::Complex(v) => v[xi].norm_sqr(),
        }
    }

    /// `sum_xi |f^(xi)|^2`, which Parseval equates to the density.
    pub fn parseval_sum(&self) -> f64 {
        let scale = (self.ambient.size() as f64).powi(2);
        (0..self.ambient.size()).map(|xi| self.sum_norm_sqr(xi)).sum::<f64>() / scale
    }

    /// Exact `sum_xi W(xi)^2` for `p = 2` (equals `2^n |A|`).
    pub fn exact_parseval_numerator(&self) -> Option<u128> {
        match &self.values {
            FreqValues::Integer(v) => Some(v.iter().map(|&w| (w as i128 * w as i128) as u128).sum()),
            FreqValues::Complex(_) => None,
        }
    }
}

/// In-place Walsh-Hadamard transform.
pub fn walsh_hadamard(data: &mut [i64]) {
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

/// Multidimensional DFT over `Z_p^n` with kernel `e^{+2 pi i j k / p}` along each axis.
pub fn dft_prime_power(ambient: FieldParams, data: &mut [Complex64]) {
    let p = ambient.p as usize;
    let roots: Vec<Complex64> =
        (0..p).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / p as f64)).collect();
    let mut line = vec![Complex64::zero(); p];
    let mut stride = 1;
    for _ in 0..ambient.n {
        let block = stride * p;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                for k in 0..p {
                    let mut acc = Complex64::zero();
                    for (j, &v) in line.iter().enumerate() {
                        acc += v * roots[(j * k) % p];
                    }
                    data[start + k * stride] = acc;
                }
            }
        }
        stride = block;
    }
}

pub fn fourier(a: &DenseSet) -> FreqTable {
    let amb = a.ambient();
    let values = if amb.p == 2 {
        let mut v: Vec<i64> = (0..amb.size()).map(|i| i64::from(a.contains(i))).collect();
        walsh_hadamard(&mut v);
        FreqValues::Integer(v)
    } else {
        let mut v: Vec<Complex64> =
            (0..amb.size()).map(|i| if a.contains(i) { Complex64::one() } else { Complex64::zero() }).collect();
        dft_prime_power(amb, &mut v);
        FreqValues::Complex(v)
    };
    FreqTable { ambient: amb, values }
}

const FLOAT_INCLUSION_SLACK: f64 = 1e-9;

/// `{xi != 0 : |f^(xi)| >= rho * alpha}` given `rho^2`. Exact for `p = 2`; for odd
/// `p` borderline characters within a relative `1e-9` are included, which can only
/// shrink the annihilator.
pub fn spectrum_sq(a: &DenseSet, freq: &FreqTable, rho_sq: &BigRational) -> Result<Vec<usize>> {
    if !rho_sq.is_positive_value() {
        return Err(Error::NonPositiveThreshold);
    }
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let size = BigInt::from(a.len());
    let amb = a.ambient();
    let out: Vec<usize> = match freq.values() {
        FreqValues::Integer(v) => {
            // W^2 >= rho^2 |A|^2  <=>  W^2 * den >= num * |A|^2
            let rhs = rho_sq.numer() * &size * &size;
            (1..amb.size())
                .filter(|&xi| BigInt::from(v[xi]) * BigInt::from(v[xi]) * rho_sq.denom() >= rhs)
                .collect()
        }
        FreqValues::Complex(_) => {
            let threshold = rho_sq.to_f64().unwrap_or(f64::INFINITY) * (a.len() as f64).powi(2)
                * (1.0 - FLOAT_INCLUSION_SLACK);
            (1..amb.size()).filter(|&xi| freq.sum_norm_sqr(xi) >= threshold).collect()
        }
    };
    if amb.p == 2 {
        // |Spec| * rho^2 * alpha <= 1
        let alpha = BigRational::new(size, BigInt::from(amb.size()));
        let bound = BigRational::from_integer(BigInt::from(out.len())) * rho_sq * alpha;
        assert!(bound <= BigRational::one(), "spectrum exceeds the Parseval bound");
    }
    Ok(out)
}

pub fn spectrum(a: &DenseSet, rho: &BigRational) -> Result<Vec<usize>> {
    if !rho.is_positive_value() {
        return Err(Error::NonPositiveThreshold);
    }
    spectrum_sq(a, &fourier(a), &(rho * rho))
}

trait PositiveValue {
    fn is_positive_value(&self) -> bool;
}

impl PositiveValue for BigRational {
    fn is_positive_value(&self) -> bool {
        *self > BigRational::zero()
    }
}

fn raw_energy(g1: &DenseSet, g2: &DenseSet) -> u128 {
    let r = convolve_counts(&g1.indicator(), &g2.negate().indicator()).expect("pair counts fit");
    r.counts().iter().map(|&c| c * c).sum()
}

/// `E(G1, G2) = #{(a,b,c,d) : a,c in G1, b,d in G2, a - b = c - d}`.
pub fn additive_energy(g1: &DenseSet, g2: &DenseSet) -> Result<u128> {
    if g1.ambient() != g2.ambient() {
        return Err(Error::AmbientMismatch);
    }
    let e = raw_energy(g1, g2);
    let (e11, e22) = (raw_energy(g1, g1), raw_energy(g2, g2));
    assert!(
        BigUint::from(e) * BigUint::from(e) <= BigUint::from(e11) * BigUint::from(e22),
        "Cauchy-Schwarz for additive energy violated"
    );
    Ok(e)
}
