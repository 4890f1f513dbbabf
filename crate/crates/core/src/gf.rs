//! Exact linear algebra over a prime field `F_p`.
//!
//! Vectors are plain coordinate slices with entries in `[0, p)`. Points of a
//! tabulated ambient `F_p^n` are also addressed by their index
//! `sum_i v_i * p^i`, so most set code never materialises coordinates.
//!
//! Subspaces are stored in reduced row echelon form with pivots taken left to
//! right, which makes structural equality coincide with set equality.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tabulated ambient, in points per side.
pub const MAX_TABLE_POINTS: usize = 1 << 22;
/// Largest supported modulus.
pub const MAX_PRIME: u32 = 17;
/// Default number of span elements `min_rank_element` is allowed to enumerate.
pub const DEFAULT_RANK_ENUMERATION_CAP: u128 = 4096;

pub type Vector = Vec<u32>;

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// The prime field `F_p` together with an ambient dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldParams {
    pub p: u32,
    pub n: usize,
}

impl FieldParams {
    /// Ambient that may be tabulated: `p^n <= 2^22`.
    pub fn new(p: u32, n: usize) -> Result<Self> {
        let params = Self::linear(p, n)?;
        match params.checked_size() {
            Some(s) if s <= MAX_TABLE_POINTS as u128 => Ok(params),
            _ => Err(Error::AmbientTooLarge { p, n }),
        }
    }

    /// Coordinate space used only for linear algebra, never tabulated.
    pub fn linear(p: u32, n: usize) -> Result<Self> {
        if !is_prime(p) || p > MAX_PRIME {
            return Err(Error::BadModulus(p));
        }
        Ok(Self { p, n })
    }

    pub fn checked_size(&self) -> Option<u128> {
        (self.p as u128).checked_pow(u32::try_from(self.n).ok()?)
    }

    /// Number of points `p^n`. Only meaningful for tabulated ambients.
    pub fn size(&self) -> usize {
        self.checked_size()
            .and_then(|s| usize::try_from(s).ok())
            .expect("ambient too large to tabulate")
    }

    pub fn with_dim(&self, n: usize) -> Self {
        Self { p: self.p, n }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        (a + b) % self.p
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        (a + self.p - b) % self.p
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        (a * b) % self.p
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        (self.p - a) % self.p
    }

    pub fn inv(&self, a: u32) -> u32 {
        assert!(a % self.p != 0, "inverse of zero");
        let mut result = 1;
        let mut base = a % self.p;
        let mut exp = self.p - 2;
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        result
    }

    pub fn dot(&self, a: &[u32], b: &[u32]) -> u32 {
        let s: u64 = a.iter().zip(b).map(|(&x, &y)| (x * y) as u64).sum();
        (s % self.p as u64) as u32
    }

    pub fn add_vec(&self, a: &[u32], b: &[u32]) -> Vector {
        a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect()
    }

    pub fn sub_vec(&self, a: &[u32], b: &[u32]) -> Vector {
        a.iter().zip(b).map(|(&x, &y)| self.sub(x, y)).collect()
    }

    pub fn scale_vec(&self, c: u32, a: &[u32]) -> Vector {
        a.iter().map(|&x| self.mul(c, x)).collect()
    }

    /// `acc += c * v`
    pub fn axpy(&self, acc: &mut [u32], c: u32, v: &[u32]) {
        if c == 0 {
            return;
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a = (*a + c * x) % self.p;
        }
    }

    pub fn zero_vec(&self) -> Vector {
        vec![0; self.n]
    }

    pub fn unit_vec(&self, i: usize) -> Vector {
        let mut v = self.zero_vec();
        v[i] = 1;
        v
    }

    pub fn check_vec(&self, v: &[u32]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        if let Some(&value) = v.iter().find(|&&x| x >= self.p) {
            return Err(Error::CoordinateOutOfRange { value, p: self.p });
        }
        Ok(())
    }

    /// Index of `v`, least significant coordinate first.
    pub fn index(&self, v: &[u32]) -> usize {
        v.iter().rev().fold(0usize, |acc, &c| acc * self.p as usize + c as usize)
    }

    pub fn vector(&self, mut idx: usize) -> Vector {
        let p = self.p as usize;
        (0..self.n)
            .map(|_| {
                let d = idx % p;
                idx /= p;
                d as u32
            })
            .collect()
    }

    #[inline]
    pub fn add_idx(&self, a: usize, b: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let (mut a, mut b, mut out, mut place) = (a, b, 0usize, 1usize);
        for _ in 0..self.n {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    #[inline]
    pub fn sub_idx(&self, a: usize, b: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let (mut a, mut b, mut out, mut place) = (a, b, 0usize, 1usize);
        for _ in 0..self.n {
            out += ((a % p + p - b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    #[inline]
    pub fn neg_idx(&self, a: usize) -> usize {
        self.sub_idx(0, a)
    }

    /// Dot product of two points given by index.
    pub fn dot_idx(&self, a: usize, b: usize) -> u32 {
        if self.p == 2 {
            return ((a & b).count_ones() & 1) as u32;
        }
        let p = self.p as usize;
        let (mut a, mut b, mut s) = (a, b, 0usize);
        for _ in 0..self.n {
            s += (a % p) * (b % p);
            a /= p;
            b /= p;
        }
        (s % p) as u32
    }
}

/// Reduced row echelon form; returns the nonzero rows and their pivot columns.
pub(crate) fn rref(f: &FieldParams, mut rows: Vec<Vector>, ncols: usize) -> (Vec<Vector>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(r) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, r);
        let inv = f.inv(rows[rank][col]);
        for x in rows[rank].iter_mut() {
            *x = f.mul(*x, inv);
        }
        let pivot_row = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[col] != 0 {
                let c = f.neg(row[col]);
                f.axpy(row, c, &pivot_row);
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    (rows, pivots)
}

pub fn rank_of_rows(f: &FieldParams, rows: &[Vector], ncols: usize) -> usize {
    rref(f, rows.to_vec(), ncols).0.len()
}

/// Inverse of a square matrix, if it is invertible.
pub fn invert(f: &FieldParams, a: &[Vector]) -> Option<Vec<Vector>> {
    let n = a.len();
    let rows: Vec<Vector> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u32::from(i == j)));
            r
        })
        .collect();
    let (rows, _) = rref(&f.with_dim(2 * n), rows, n);
    if rows.len() < n || (0..n).any(|i| rows[i][i] != 1) {
        return None;
    }
    Some(rows.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// A subspace of `F_p^n` in canonical reduced echelon form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: FieldParams,
    rows: Vec<Vector>,
    pivots: Vec<usize>,
}

/// Reduced echelon basis of the span of `vectors`.
pub fn canonical_basis(ambient: FieldParams, vectors: &[Vector]) -> Result<Subspace> {
    for v in vectors {
        ambient.check_vec(v)?;
    }
    let (rows, pivots) = rref(&ambient, vectors.to_vec(), ambient.n);
    Ok(Subspace { ambient, rows, pivots })
}

impl Subspace {
    pub fn zero(ambient: FieldParams) -> Self {
        Self { ambient, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn full(ambient: FieldParams) -> Self {
        let rows = (0..ambient.n).map(|i| ambient.unit_vec(i)).collect();
        Self { ambient, rows, pivots: (0..ambient.n).collect() }
    }

    pub fn ambient(&self) -> FieldParams {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn codim(&self) -> usize {
        self.ambient.n - self.rows.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.ambient.n
    }

    /// Residual of `v` after eliminating every pivot coordinate.
    pub fn reduce(&self, v: &[u32]) -> Vector {
        let f = &self.ambient;
        let mut out = v.to_vec();
        for (row, &piv) in self.rows.iter().zip(&self.pivots) {
            if out[piv] != 0 {
                let c = f.neg(out[piv]);
                f.axpy(&mut out, c, row);
            }
        }
        out
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.contains(&self.ambient.vector(idx))
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.rows.iter().all(|r| self.contains(r))
    }

    fn check_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch);
        }
        Ok(())
    }

    /// `{x : x . s = 0 for all s in self}`.
    pub fn annihilator(&self) -> Subspace {
        let f = self.ambient;
        let mut rows = Vec::with_capacity(f.n - self.dim());
        for free in (0..f.n).filter(|c| !self.pivots.contains(c)) {
            let mut v = f.unit_vec(free);
            for (row, &piv) in self.rows.iter().zip(&self.pivots) {
                v[piv] = f.neg(row[free]);
            }
            rows.push(v);
        }
        let (rows, pivots) = rref(&f, rows, f.n);
        Subspace { ambient: f, rows, pivots }
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.check_ambient(other)?;
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let (rows, pivots) = rref(&self.ambient, rows, self.ambient.n);
        Ok(Subspace { ambient: self.ambient, rows, pivots })
    }

    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.check_ambient(other)?;
        if self.is_full() {
            return Ok(other.clone());
        }
        if other.is_full() {
            return Ok(self.clone());
        }
        Ok(self.annihilator().sum(&other.annihilator())?.annihilator())
    }

    /// Add more generators.
    pub fn extend(&self, vectors: &[Vector]) -> Result<Subspace> {
        for v in vectors {
            self.ambient.check_vec(v)?;
        }
        let mut rows = self.rows.clone();
        rows.extend(vectors.iter().cloned());
        let (rows, pivots) = rref(&self.ambient, rows, self.ambient.n);
        Ok(Subspace { ambient: self.ambient, rows, pivots })
    }

    /// Coordinates of `v` (assumed to be a member) in the echelon basis; these are
    /// just the entries of `v` at the pivot columns.
    pub fn coordinates(&self, v: &[u32]) -> Vector {
        self.pivots.iter().map(|&c| v[c]).collect()
    }

    pub fn from_coordinates(&self, c: &[u32]) -> Vector {
        let mut out = self.ambient.zero_vec();
        for (row, &ci) in self.rows.iter().zip(c) {
            self.ambient.axpy(&mut out, ci, row);
        }
        out
    }

    /// Span of the unit vectors at non-pivot columns; a complement of `self`.
    pub fn echelon_complement(&self) -> Subspace {
        let f = self.ambient;
        let rows: Vec<Vector> =
            (0..f.n).filter(|c| !self.pivots.contains(c)).map(|c| f.unit_vec(c)).collect();
        let pivots = (0..f.n).filter(|c| !self.pivots.contains(c)).collect();
        Subspace { ambient: f, rows, pivots }
    }

    /// All `p^dim` members, in coordinate-index order.
    pub fn elements(&self) -> Vec<Vector> {
        let coords = FieldParams { p: self.ambient.p, n: self.dim() };
        (0..coords.size()).map(|i| self.from_coordinates(&coords.vector(i))).collect()
    }

    pub fn element_indices(&self) -> Vec<usize> {
        self.elements().iter().map(|v| self.ambient.index(v)).collect()
    }
}

pub fn mat_vec(f: &FieldParams, matrix: &[Vector], v: &[u32]) -> Vector {
    matrix.iter().map(|row| f.dot(row, v)).collect()
}

/// `a * b` where `a` is `r x k` and `b` is `k x c`.
pub fn mat_mul(f: &FieldParams, a: &[Vector], b: &[Vector], cols: usize) -> Vec<Vector> {
    a.iter()
        .map(|row| {
            let mut out = vec![0; cols];
            for (k, &c) in row.iter().enumerate() {
                f.axpy(&mut out, c, &b[k]);
            }
            out
        })
        .collect()
}

pub fn transpose(matrix: &[Vector], cols: usize) -> Vec<Vector> {
    (0..cols).map(|c| matrix.iter().map(|row| row[c]).collect()).collect()
}

/// An affine map `y -> M y + b` from `F^n` to `F^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineMap {
    field: FieldParams,
    domain: usize,
    codomain: usize,
    matrix: Vec<Vector>,
    offset: Vector,
}

impl AffineMap {
    pub fn new(p: u32, domain: usize, matrix: Vec<Vector>, offset: Vector) -> Result<Self> {
        let codomain = offset.len();
        let field = FieldParams::linear(p, codomain)?;
        field.check_vec(&offset)?;
        if matrix.len() != codomain {
            return Err(Error::DimensionMismatch { expected: codomain, found: matrix.len() });
        }
        let row_space = FieldParams::linear(p, domain)?;
        for row in &matrix {
            row_space.check_vec(row)?;
        }
        Ok(Self { field, domain, codomain, matrix, offset })
    }

    pub fn linear(p: u32, domain: usize, matrix: Vec<Vector>) -> Result<Self> {
        let codomain = matrix.len();
        Self::new(p, domain, matrix, vec![0; codomain])
    }

    pub fn zero(p: u32, domain: usize, codomain: usize) -> Result<Self> {
        Self::linear(p, domain, vec![vec![0; domain]; codomain])
    }

    pub fn identity(p: u32, n: usize) -> Result<Self> {
        let f = FieldParams::linear(p, n)?;
        Self::linear(p, n, (0..n).map(|i| f.unit_vec(i)).collect())
    }

    pub fn constant(p: u32, domain: usize, value: Vector) -> Result<Self> {
        let m = value.len();
        Self::new(p, domain, vec![vec![0; domain]; m], value)
    }

    pub fn p(&self) -> u32 {
        self.field.p
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn matrix(&self) -> &[Vector] {
        &self.matrix
    }

    pub fn offset(&self) -> &[u32] {
        &self.offset
    }

    pub fn is_linear(&self) -> bool {
        self.offset.iter().all(|&x| x == 0)
    }

    pub fn linear_part(&self) -> AffineMap {
        AffineMap { offset: vec![0; self.codomain], ..self.clone() }
    }

    pub fn apply_linear(&self, y: &[u32]) -> Vector {
        mat_vec(&self.field, &self.matrix, y)
    }

    pub fn apply(&self, y: &[u32]) -> Vector {
        let v = self.apply_linear(y);
        self.field.add_vec(&v, &self.offset)
    }

    pub fn rank(&self) -> usize {
        rank_of_rows(&self.field, &self.matrix, self.domain)
    }

    /// Column space of the linear part, as a subspace of `F^m`.
    pub fn image(&self) -> Subspace {
        let cols = transpose(&self.matrix, self.domain);
        canonical_basis(self.field, &cols).expect("columns have codomain length")
    }

    /// `left o self`, with `left` a `k x m` matrix.
    pub fn compose_after(&self, left: &[Vector]) -> AffineMap {
        let f = &self.field;
        let matrix = mat_mul(f, left, &self.matrix, self.domain);
        let offset = mat_vec(f, left, &self.offset);
        AffineMap {
            field: f.with_dim(left.len()),
            domain: self.domain,
            codomain: left.len(),
            matrix,
            offset,
        }
    }

    /// `self o right`, with `right` an `n x k` matrix (a linear map `F^k -> F^n`).
    pub fn compose_before(&self, right: &[Vector], k: usize) -> AffineMap {
        let matrix = mat_mul(&self.field, &self.matrix, right, k);
        AffineMap { domain: k, matrix, ..self.clone() }
    }

    /// Row-major entries of the linear part.
    pub fn flattened(&self) -> Vector {
        self.matrix.iter().flatten().copied().collect()
    }

    pub fn from_flat(p: u32, domain: usize, codomain: usize, flat: &[u32]) -> Result<Self> {
        if flat.len() != domain * codomain {
            return Err(Error::DimensionMismatch { expected: domain * codomain, found: flat.len() });
        }
        let matrix = flat.chunks(domain.max(1)).take(codomain).map(|c| c.to_vec()).collect();
        let matrix = if domain == 0 { vec![Vec::new(); codomain] } else { matrix };
        Self::linear(p, domain, matrix)
    }
}

/// A finite list of affine maps with the reduced echelon basis of the span of
/// their linear parts (viewed in the `m*n`-dimensional matrix space).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapFamily {
    p: u32,
    domain: usize,
    codomain: usize,
    maps: Vec<AffineMap>,
    span_basis: Subspace,
}

impl MapFamily {
    pub fn new(p: u32, domain: usize, codomain: usize, maps: Vec<AffineMap>) -> Result<Self> {
        for m in &maps {
            if m.domain() != domain || m.codomain() != codomain || m.p() != p {
                return Err(Error::AmbientMismatch);
            }
        }
        let matrix_space = FieldParams::linear(p, domain * codomain)?;
        let flats: Vec<Vector> = maps.iter().map(|m| m.flattened()).collect();
        let span_basis = canonical_basis(matrix_space, &flats)?;
        Ok(Self { p, domain, codomain, maps, span_basis })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn span_basis(&self) -> &Subspace {
        &self.span_basis
    }

    /// `k = dim(span)`.
    pub fn dim(&self) -> usize {
        self.span_basis.dim()
    }

    pub fn is_linear(&self) -> bool {
        self.maps.iter().all(AffineMap::is_linear)
    }

    /// The span member with the given coordinates in the span basis.
    pub fn span_element(&self, coeffs: &[u32]) -> AffineMap {
        let flat = self.span_basis.from_coordinates(coeffs);
        AffineMap::from_flat(self.p, self.domain, self.codomain, &flat).expect("shape checked")
    }

    /// `span{L(y) : L in family}` in `F^m`, using the full affine values.
    pub fn values_span(&self, y: &[u32]) -> Subspace {
        let f = FieldParams { p: self.p, n: self.codomain };
        let vals: Vec<Vector> = self.maps.iter().map(|m| m.apply(y)).collect();
        canonical_basis(f, &vals).expect("values have codomain length")
    }

    /// Apply `left` (a `k x m` matrix) to every member.
    pub fn compose_after(&self, left: &[Vector]) -> Result<MapFamily> {
        let maps = self.maps.iter().map(|m| m.compose_after(left)).collect();
        MapFamily::new(self.p, self.domain, left.len(), maps)
    }
}

/// Result of a minimum-rank search over the span of a family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinRank {
    pub map: AffineMap,
    pub rank: usize,
    /// Whether every nonzero span element was examined.
    pub exhaustive: bool,
}

/// A nonzero member of the span of minimum rank. Exhaustive when `p^k <= cap`;
/// otherwise the best of `cap` seeded random span elements plus the generators,
/// flagged as non-exhaustive.
pub fn min_rank_element(family: &MapFamily, enumeration_cap: u128) -> Result<MinRank> {
    if !family.is_linear() {
        return Err(Error::NotLinear);
    }
    let k = family.dim();
    if k == 0 {
        return Err(Error::EmptySpan);
    }
    let coords = FieldParams { p: family.p, n: k };
    let exhaustive = coords.checked_size().is_some_and(|s| s <= enumeration_cap);
    let mut best: Option<(usize, AffineMap)> = None;
    let mut consider = |map: AffineMap| {
        let r = map.rank();
        if r > 0 && best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, map));
        }
    };
    if exhaustive {
        for i in 1..coords.size() {
            consider(family.span_element(&coords.vector(i)));
        }
    } else {
        for m in family.maps() {
            consider(m.clone());
        }
        for i in 0..k {
            consider(family.span_element(&coords.unit_vec(i)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d69_6e72_616e_6b00 ^ k as u64);
        let draws = u64::try_from(enumeration_cap).unwrap_or(u64::MAX);
        for _ in 0..draws {
            let c: Vector = (0..k).map(|_| rng.gen_range(0..family.p)).collect();
            if c.iter().any(|&x| x != 0) {
                consider(family.span_element(&c));
            }
        }
    }
    let (rank, map) = best.expect("a nonzero span has a nonzero element");
    Ok(MinRank { map, rank, exhaustive })
}

/// Projection of `F^m` onto a complement `Y` along a kernel subspace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projection {
    matrix: Vec<Vector>,
    complement: Subspace,
    kernel: Subspace,
}

impl Projection {
    pub fn matrix(&self) -> &[Vector] {
        &self.matrix
    }

    pub fn complement(&self) -> &Subspace {
        &self.complement
    }

    pub fn kernel(&self) -> &Subspace {
        &self.kernel
    }

    pub fn apply(&self, v: &[u32]) -> Vector {
        self.kernel.reduce(v)
    }
}

/// Idempotent projection with the given kernel onto its echelon complement.
pub fn projection_along(kernel: &Subspace) -> Projection {
    let f = kernel.ambient();
    let cols: Vec<Vector> = (0..f.n).map(|i| kernel.reduce(&f.unit_vec(i))).collect();
    Projection {
        matrix: transpose(&cols, f.n),
        complement: kernel.echelon_complement(),
        kernel: kernel.clone(),
    }
}

/// `(proj_Y, Y)` with `Y + Im(L) = F^m` and `proj_Y(Im L) = 0`.
pub fn project_along(l: &AffineMap) -> Result<Projection> {
    if !l.is_linear() {
        return Err(Error::NotLinear);
    }
    Ok(projection_along(&l.image()))
}

/// `b(x, y) = x^T M y` with `M` an `m x n` matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BilinearForm {
    field: FieldParams,
    matrix: Vec<Vector>,
    cols: usize,
}

impl BilinearForm {
    pub fn new(p: u32, cols: usize, matrix: Vec<Vector>) -> Result<Self> {
        let field = FieldParams::linear(p, cols)?;
        for row in &matrix {
            field.check_vec(row)?;
        }
        Ok(Self { field, matrix, cols })
    }

    pub fn matrix(&self) -> &[Vector] {
        &self.matrix
    }

    pub fn x_dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn y_dim(&self) -> usize {
        self.cols
    }

    pub fn eval(&self, x: &[u32], y: &[u32]) -> u32 {
        let my = mat_vec(&self.field, &self.matrix, y);
        self.field.dot(x, &my)
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().flatten().all(|&c| c == 0)
    }
}

pub(crate) fn random_vector<R: Rng>(rng: &mut R, f: &FieldParams) -> Vector {
    (0..f.n).map(|_| rng.gen_range(0..f.p)).collect()
}

/// Uniform subspace-ish sample: the annihilator of `codim` independent random vectors.
pub fn random_subspace_of_codim<R: Rng>(rng: &mut R, f: FieldParams, codim: usize) -> Result<Subspace> {
    if codim > f.n {
        return Err(Error::InvalidParameter(format!("codim {codim} exceeds dimension {}", f.n)));
    }
    loop {
        let normals: Vec<Vector> = (0..codim).map(|_| random_vector(rng, &f)).collect();
        let span = canonical_basis(f, &normals)?;
        if span.dim() == codim {
            return Ok(span.annihilator());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn f2(n: usize) -> FieldParams {
        FieldParams::new(2, n).unwrap()
    }

    #[test]
    fn rejects_bad_moduli_and_huge_ambients() {
        assert_eq!(FieldParams::new(4, 2), Err(Error::BadModulus(4)));
        assert_eq!(FieldParams::new(19, 1), Err(Error::BadModulus(19)));
        assert!(FieldParams::new(2, 22).is_ok());
        assert!(matches!(FieldParams::new(2, 23), Err(Error::AmbientTooLarge { .. })));
        assert!(FieldParams::linear(2, 100).is_ok());
    }

    #[test]
    fn index_round_trip_and_arithmetic() {
        let f = FieldParams::new(3, 4).unwrap();
        for i in 0..f.size() {
            assert_eq!(f.index(&f.vector(i)), i);
        }
        let a = f.index(&[1, 2, 0, 1]);
        let b = f.index(&[2, 2, 1, 0]);
        assert_eq!(f.vector(f.add_idx(a, b)), vec![0, 1, 1, 1]);
        assert_eq!(f.vector(f.sub_idx(a, b)), vec![2, 0, 2, 1]);
        assert_eq!(f.dot_idx(a, b), f.dot(&[1, 2, 0, 1], &[2, 2, 1, 0]));
        for a in 1..3 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn canonical_basis_examples() {
        let f = f2(3);
        let zero = canonical_basis(f, &[]).unwrap();
        assert_eq!(zero.dim(), 0);
        let s = canonical_basis(f, &[vec![1, 0, 0], vec![1, 1, 0]]).unwrap();
        assert_eq!(s.basis(), &[vec![1, 0, 0], vec![0, 1, 0]]);
        let all: Vec<Vector> = (0..8).map(|i| f.vector(i)).collect();
        assert!(canonical_basis(f, &all).unwrap().is_full());
        assert_eq!(
            canonical_basis(f, &[vec![1, 0]]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        );
    }

    #[test]
    fn annihilator_examples() {
        assert!(Subspace::zero(f2(4)).annihilator().is_full());
        let f3 = FieldParams::new(3, 2).unwrap();
        assert!(Subspace::full(f3).annihilator().is_zero());

        let s = canonical_basis(f2(3), &[vec![1, 1, 0]]).unwrap();
        let ann = s.annihilator();
        let expected: BTreeSet<usize> = (0..8)
            .filter(|&i| {
                let v = f2(3).vector(i);
                (v[0] + v[1]) % 2 == 0
            })
            .collect();
        assert_eq!(ann.dim(), 2);
        assert_eq!(ann.element_indices().into_iter().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn hyperplane_intersection_and_identity() {
        let f = f2(3);
        let h1 = canonical_basis(f, &[vec![1, 0, 0]]).unwrap().annihilator();
        let h2 = canonical_basis(f, &[vec![0, 1, 0]]).unwrap().annihilator();
        assert_eq!(h1.intersect(&h2).unwrap().dim(), 1);
        assert_eq!(h1.intersect(&Subspace::full(f)).unwrap(), h1);
        assert_eq!(h1.intersect(&Subspace::zero(f2(2))), Err(Error::AmbientMismatch));
    }

    #[test]
    fn min_rank_examples() {
        let id = AffineMap::identity(2, 3).unwrap();
        let fam = MapFamily::new(2, 3, 3, vec![id.clone()]).unwrap();
        let r = min_rank_element(&fam, DEFAULT_RANK_ENUMERATION_CAP).unwrap();
        assert_eq!((r.map, r.rank, r.exhaustive), (id, 3, true));

        // L1 = I, L2 = I + E_00: their sum is the rank-1 matrix E_00.
        let l1 = AffineMap::identity(2, 3).unwrap();
        let l2 = AffineMap::linear(2, 3, vec![vec![0, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        let fam = MapFamily::new(2, 3, 3, vec![l1, l2]).unwrap();
        let r = min_rank_element(&fam, DEFAULT_RANK_ENUMERATION_CAP).unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.map.matrix(), &[vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]);

        let zero = MapFamily::new(2, 2, 2, vec![AffineMap::zero(2, 2, 2).unwrap()]).unwrap();
        assert_eq!(min_rank_element(&zero, 16), Err(Error::EmptySpan));
    }

    #[test]
    fn min_rank_non_exhaustive_past_cap() {
        // Ten independent 4x4 maps over F_2: span of size 1024 > cap 512.
        let f = FieldParams::linear(2, 16).unwrap();
        let maps: Vec<AffineMap> = (0..10)
            .map(|i| {
                let flat = f.unit_vec(i);
                AffineMap::from_flat(2, 4, 4, &flat).unwrap()
            })
            .collect();
        let fam = MapFamily::new(2, 4, 4, maps).unwrap();
        assert_eq!(fam.dim(), 10);
        let r = min_rank_element(&fam, 512).unwrap();
        assert!(!r.exhaustive);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn project_along_examples() {
        let zero = AffineMap::zero(2, 2, 3).unwrap();
        let proj = project_along(&zero).unwrap();
        assert!(proj.complement().is_full());
        assert_eq!(proj.matrix(), AffineMap::identity(2, 3).unwrap().matrix());

        let id = AffineMap::identity(2, 2).unwrap();
        let proj = project_along(&id).unwrap();
        assert!(proj.complement().is_zero());
        assert!(proj.matrix().iter().flatten().all(|&c| c == 0));

        // Rank one map F_2^1 -> F_2^3 with image span{(1,1,0)}.
        let l = AffineMap::linear(2, 1, vec![vec![1], vec![1], vec![0]]).unwrap();
        let proj = project_along(&l).unwrap();
        assert_eq!(proj.complement().dim(), 2);
        assert!(proj.apply(&[1, 1, 0]).iter().all(|&c| c == 0));
        let composed = l.compose_after(proj.matrix());
        assert!(composed.matrix().iter().flatten().all(|&c| c == 0));
        assert_eq!(
            project_along(&AffineMap::constant(2, 1, vec![1, 0]).unwrap()),
            Err(Error::NotLinear)
        );
    }

    #[test]
    fn bilinear_form_evaluates_xt_m_y() {
        let b = BilinearForm::new(3, 2, vec![vec![1, 2], vec![0, 1]]).unwrap();
        // x = (1,1), y = (2,1): M y = (1*2+2*1, 1) = (1, 1); x . (1,1) = 2.
        assert_eq!(b.eval(&[1, 1], &[2, 1]), 2);
    }
}
