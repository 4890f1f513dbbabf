//! Re-checks `B in phi_w(A)` (or `phi_w^eps(A)`) without the pipeline's code:
//! counts by exact Walsh-Hadamard autocorrelation for `p = 2` and by a direct
//! sum over coordinate vectors otherwise, membership in `B` by rank tests.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf::{rank_of_rows, FieldParams, Vector};
use crate::phi::{GridSet, Letter, Word, EXACT_MAX_POINTS};
use crate::pipeline::BilinearVariety;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub points_in_b: usize,
    /// Smallest `count / p^e` over `B`, when counts were computed.
    pub min_normalized: Option<BigRational>,
    pub pass: bool,
    pub first_failure: Option<(usize, usize)>,
}

fn in_span(f: &FieldParams, basis: &[Vector], v: &[u32]) -> bool {
    let mut rows = basis.to_vec();
    rows.push(v.to_vec());
    rank_of_rows(f, &rows, f.n) == basis.len()
}

/// Membership from the presentation alone.
pub fn member(b: &BilinearVariety, x: &[u32], y: &[u32]) -> bool {
    let (xs, ys) = (b.v().ambient(), b.w().ambient());
    in_span(&xs, b.v().basis(), x)
        && in_span(&ys, b.w().basis(), y)
        && b.forms().iter().all(|form| {
            let mut acc = 0u64;
            for (i, row) in form.matrix().iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    acc += u64::from(x[i]) * u64::from(c) * u64::from(y[j]);
                }
            }
            acc % u64::from(xs.p) == 0
        })
}

/// Autocorrelation `sum_t c(s + t) c(t)` of one line.
fn autocorrelate(side: &FieldParams, line: &[BigUint]) -> Vec<BigUint> {
    if side.p == 2 {
        let mut buf: Vec<BigInt> = line.iter().map(|c| BigInt::from(c.clone())).collect();
        wht(&mut buf);
        for v in buf.iter_mut() {
            *v = &*v * &*v;
        }
        wht(&mut buf);
        let size = BigInt::from(line.len());
        buf.into_iter()
            .map(|v| {
                debug_assert!(!v.is_negative());
                (v / &size).to_biguint().expect("autocorrelations are nonnegative")
            })
            .collect()
    } else {
        let vecs: Vec<Vector> = (0..line.len()).map(|i| side.vector(i)).collect();
        let mut out = vec![BigUint::zero(); line.len()];
        for (i, ci) in line.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (j, cj) in line.iter().enumerate() {
                if !cj.is_zero() {
                    out[side.index(&side.sub_vec(&vecs[i], &vecs[j]))] += ci * cj;
                }
            }
        }
        out
    }
}

fn wht(data: &mut [BigInt]) {
    let mut h = 1;
    while h < data.len() {
        for chunk in data.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let s = &*a + &*b;
                let d = &*a - &*b;
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

/// Exact counts under `w` and the exponent of their normalizer, grid indexed `y p^m + x`.
pub fn counts(a: &GridSet, w: &Word) -> Result<(Vec<BigUint>, usize)> {
    if a.num_points() > EXACT_MAX_POINTS {
        return Err(Error::ModeMismatch("exact verification needs a small grid".into()));
    }
    let (xs, ys) = (a.x_params(), a.y_params());
    let (mx, ny) = (xs.size(), ys.size());
    let mut c: Vec<BigUint> = (0..a.num_points())
        .map(|i| BigUint::from(u8::from(a.contains(i % mx, i / mx))))
        .collect();
    let mut exponent = 0;
    for &letter in w.letters().iter().rev() {
        match letter {
            Letter::H => {
                let rows: Vec<Vec<BigUint>> =
                    (0..ny).into_par_iter().map(|y| autocorrelate(&xs, &c[y * mx..(y + 1) * mx])).collect();
                c = rows.concat();
                exponent = 2 * exponent + xs.n;
            }
            Letter::V => {
                let cols: Vec<Vec<BigUint>> = (0..mx)
                    .into_par_iter()
                    .map(|x| {
                        let col: Vec<BigUint> = (0..ny).map(|y| c[y * mx + x].clone()).collect();
                        autocorrelate(&ys, &col)
                    })
                    .collect();
                for (x, col) in cols.into_iter().enumerate() {
                    for (y, v) in col.into_iter().enumerate() {
                        c[y * mx + x] = v;
                    }
                }
                exponent = 2 * exponent + ys.n;
            }
        }
    }
    Ok((c, exponent))
}

/// Every point of the grid is tested against the presentation of `B`; with
/// `eps` the normalized count must reach it, otherwise it must be positive.
pub fn verify_variety(b: &BilinearVariety, a: &GridSet, w: &Word, eps: Option<&BigRational>) -> Result<VerifyOutcome> {
    let (xs, ys) = (a.x_params(), a.y_params());
    if b.p() != a.p() || b.m() != xs.n || b.n() != ys.n {
        return Err(Error::AmbientMismatch);
    }
    if eps.is_some_and(|e| *e <= BigRational::zero()) {
        return Err(Error::NonPositiveThreshold);
    }
    let mx = xs.size();
    let members: Vec<(usize, usize)> = (0..a.num_points())
        .into_par_iter()
        .filter_map(|i| {
            let (x, y) = (i % mx, i / mx);
            member(b, &xs.vector(x), &ys.vector(y)).then_some((x, y))
        })
        .collect();
    let exact = a.num_points() <= EXACT_MAX_POINTS;
    if !exact && eps.is_some() {
        return Err(Error::ModeMismatch("counting verification needs a small grid".into()));
    }
    if !exact {
        let support = support(a, w);
        let first_failure = members.iter().copied().find(|&(x, y)| !support[y * mx + x]);
        return Ok(VerifyOutcome {
            points_in_b: members.len(),
            min_normalized: None,
            pass: first_failure.is_none(),
            first_failure,
        });
    }
    let (c, exponent) = counts(a, w)?;
    let norm = BigInt::from(a.p()).pow(exponent as u32);
    let mut min: Option<BigRational> = None;
    let mut first_failure = None;
    for &(x, y) in &members {
        let value = BigRational::new(BigInt::from(c[y * mx + x].clone()), norm.clone());
        let ok = !value.is_zero() && eps.is_none_or(|e| value >= *e);
        if !ok && first_failure.is_none() {
            first_failure = Some((x, y));
        }
        if min.as_ref().is_none_or(|m| value < *m) {
            min = Some(value);
        }
    }
    Ok(VerifyOutcome { points_in_b: members.len(), min_normalized: min, pass: first_failure.is_none(), first_failure })
}

/// Support of `phi_w(A)` by sumset closure on boolean lines.
fn support(a: &GridSet, w: &Word) -> Vec<bool> {
    let (xs, ys) = (a.x_params(), a.y_params());
    let (mx, ny) = (xs.size(), ys.size());
    let mut s: Vec<bool> = (0..a.num_points()).map(|i| a.contains(i % mx, i / mx)).collect();
    let diff = |side: &FieldParams, line: &[bool]| -> Vec<bool> {
        let members: Vec<Vector> = (0..line.len()).filter(|&i| line[i]).map(|i| side.vector(i)).collect();
        let mut out = vec![false; line.len()];
        for u in &members {
            for v in &members {
                out[side.index(&side.sub_vec(u, v))] = true;
            }
        }
        out
    };
    for &letter in w.letters().iter().rev() {
        match letter {
            Letter::H => {
                let rows: Vec<Vec<bool>> = (0..ny).into_par_iter().map(|y| diff(&xs, &s[y * mx..(y + 1) * mx])).collect();
                s = rows.concat();
            }
            Letter::V => {
                let cols: Vec<Vec<bool>> = (0..mx)
                    .into_par_iter()
                    .map(|x| diff(&ys, &(0..ny).map(|y| s[y * mx + x]).collect::<Vec<_>>()))
                    .collect();
                for (x, col) in cols.into_iter().enumerate() {
                    for (y, v) in col.into_iter().enumerate() {
                        s[y * mx + x] = v;
                    }
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{count_table, phi_word, ArithmeticMode, CountValues};
    use crate::setlab::DenseSet;

    #[test]
    fn counts_agree_with_count_table() {
        let mut rng = crate::rng::stream(9, "verify");
        for (p, m, n) in [(2, 2, 3), (3, 1, 2), (5, 1, 1)] {
            let joint = DenseSet::random(&mut rng, FieldParams::new(p, m + n).unwrap(), 0.5);
            let a = GridSet::from_joint(m, joint).unwrap();
            for w in ["hv", "vvh", "hvvh"] {
                let w: Word = w.parse().unwrap();
                let t = count_table(&a, &w, ArithmeticMode::Exact).unwrap();
                let (c, e) = counts(&a, &w).unwrap();
                assert_eq!(e, t.exponent());
                let CountValues::Exact(expected) = t.values() else { unreachable!() };
                assert_eq!(&c, expected);
                let s = support(&a, &w);
                let sup = phi_word(&a, &w);
                for i in 0..a.num_points() {
                    let (x, y) = (i % a.x_params().size(), i / a.x_params().size());
                    assert_eq!(s[i], sup.contains(x, y));
                }
            }
        }
    }

    #[test]
    fn zero_variety_always_passes() {
        let f = FieldParams::linear(2, 3).unwrap();
        let zero = BilinearVariety::new(
            crate::gf::Subspace::zero(f),
            crate::gf::Subspace::zero(f),
            vec![],
        )
        .unwrap();
        let a = GridSet::from_predicate(2, 3, 3, |x, y| x == 5 && y == 6).unwrap();
        let out = verify_variety(&zero, &a, &Word::theorem(), None).unwrap();
        assert!(out.pass);
        assert_eq!(out.points_in_b, 1);
    }

    #[test]
    fn extra_basis_vector_fails_with_witness() {
        let f = FieldParams::linear(2, 2).unwrap();
        let a = GridSet::from_predicate(2, 2, 2, |x, _| x == 0).unwrap();
        let w: Word = "hh".parse().unwrap();
        let v = crate::gf::canonical_basis(f, &[vec![1, 0]]).unwrap();
        let b = BilinearVariety::new(v, crate::gf::Subspace::full(f), vec![]).unwrap();
        let out = verify_variety(&b, &a, &w, None).unwrap();
        assert!(!out.pass);
        assert_eq!(out.first_failure, Some((1, 0)));
    }
}
