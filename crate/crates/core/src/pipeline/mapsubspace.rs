//! A subspace `Z` absorbing the pairwise intersections of a linear map family's
//! value spans, built by peeling off low-rank members.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::gf::{min_rank_element, projection_along, FieldParams, MapFamily, Subspace, Vector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapSubspace {
    pub z: Subspace,
    /// Number of low-rank members peeled off.
    pub depth: usize,
    /// Whether every min-rank search enumerated its whole span.
    pub exhaustive: bool,
}

/// `delta * p^{rank - 4k - 1} > 1`, i.e. `rank > 4k + log_p(1/delta) + 1`.
pub fn is_high_rank(p: u32, rank: usize, k: usize, delta: &BigRational) -> bool {
    let excess = rank as i64 - 4 * k as i64 - 1;
    if excess <= 0 {
        return false;
    }
    delta * BigRational::from_integer(BigInt::from(p).pow(excess as u32)) > BigRational::one()
}

/// `k (2k + log_p(1/delta) + 3)`.
pub fn dimension_bound(p: u32, k: usize, delta: &BigRational) -> f64 {
    let inv = num_traits::ToPrimitive::to_f64(&(BigRational::one() / delta)).unwrap_or(f64::INFINITY);
    k as f64 * (2.0 * k as f64 + inv.ln() / f64::from(p).ln() + 3.0)
}

/// If every nonzero member of the span has rank above `4k + log_p(1/delta) + 1`
/// the answer is `{0}`; otherwise a low-rank member `L` is peeled off and
/// `Z = Im(L) + mapsubspace(proj o family)` with the projection along `Im(L)`.
/// When the min-rank search could not be exhaustive the low-rank branch is taken
/// with the best member found.
pub fn mapsubspace(family: &MapFamily, delta: &BigRational, rank_cap: u128) -> Result<MapSubspace> {
    if !family.is_linear() {
        return Err(Error::NotLinear);
    }
    if *delta <= BigRational::zero() || *delta > BigRational::one() {
        return Err(Error::InvalidParameter("delta must lie in (0, 1]".into()));
    }
    let cod = FieldParams::linear(family.p(), family.codomain())?;
    let k0 = family.dim();
    let mut z = Subspace::zero(cod);
    let mut current = family.clone();
    let mut depth = 0;
    let mut exhaustive = true;
    loop {
        let k = current.dim();
        if k == 0 {
            break;
        }
        let best = min_rank_element(&current, rank_cap)?;
        exhaustive &= best.exhaustive;
        if best.exhaustive && is_high_rank(family.p(), best.rank, k, delta) {
            break;
        }
        let image = best.map.image();
        z = z.sum(&image)?;
        let proj = projection_along(&image);
        current = current.compose_after(proj.matrix())?;
        depth += 1;
        debug_assert!(current.dim() < k);
    }
    if exhaustive {
        let bound = dimension_bound(family.p(), k0, delta);
        assert!(z.dim() as f64 <= bound + 1e-9, "dimension bound violated: {} > {bound}", z.dim());
    }
    Ok(MapSubspace { z, depth, exhaustive })
}

/// `span{L(y) : L in family}` with the maps' matrices only.
pub fn family_values(family: &MapFamily, y: &[u32]) -> Subspace {
    family.values_span(y)
}

/// `(L(s) + L(y)) cap (L(s') + L(y))` inside `Z + L(y)`.
pub fn pair_property_holds(family: &MapFamily, z: &Subspace, s: &[u32], s2: &[u32], y: &[u32]) -> bool {
    let ly = family.values_span(y);
    let left = family.values_span(s).sum(&ly).expect("same codomain");
    let right = family.values_span(s2).sum(&ly).expect("same codomain");
    let target = z.sum(&ly).expect("same codomain");
    target.contains_subspace(&left.intersect(&right).expect("same codomain"))
}

/// The linear maps `s -> L(s_i)` on `(F^n)^copies`, for every member and slot.
pub fn lift(family: &MapFamily, copies: usize) -> Result<MapFamily> {
    let n = family.domain();
    let mut maps = Vec::with_capacity(family.maps().len() * copies);
    for map in family.maps() {
        for slot in 0..copies {
            let matrix: Vec<Vector> = map
                .matrix()
                .iter()
                .map(|row| {
                    let mut wide = vec![0; n * copies];
                    wide[slot * n..(slot + 1) * n].copy_from_slice(row);
                    wide
                })
                .collect();
            maps.push(crate::gf::AffineMap::linear(family.p(), n * copies, matrix)?);
        }
    }
    MapFamily::new(family.p(), n * copies, family.codomain(), maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::{AffineMap, DEFAULT_RANK_ENUMERATION_CAP};
    use num_traits::One;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn empty_family_gives_zero() {
        let fam = MapFamily::new(2, 3, 3, vec![]).unwrap();
        let out = mapsubspace(&fam, &half(), DEFAULT_RANK_ENUMERATION_CAP).unwrap();
        assert!(out.z.is_zero());
        let zero = MapFamily::new(2, 3, 3, vec![AffineMap::zero(2, 3, 3).unwrap()]).unwrap();
        assert!(mapsubspace(&zero, &half(), DEFAULT_RANK_ENUMERATION_CAP).unwrap().z.is_zero());
    }

    #[test]
    fn rank_one_map_contributes_its_image() {
        let l = AffineMap::linear(2, 3, vec![vec![1, 0, 1], vec![1, 0, 1], vec![0, 0, 0]]).unwrap();
        let fam = MapFamily::new(2, 3, 3, vec![l.clone()]).unwrap();
        let out = mapsubspace(&fam, &half(), DEFAULT_RANK_ENUMERATION_CAP).unwrap();
        assert_eq!(out.z, l.image());
        assert_eq!(out.z.dim(), 1);
    }

    #[test]
    fn full_rank_map_above_threshold_gives_zero() {
        // rank 7 > log_2(1) + 5
        let l = AffineMap::identity(2, 7).unwrap();
        let fam = MapFamily::new(2, 7, 7, vec![l]).unwrap();
        let out = mapsubspace(&fam, &BigRational::one(), DEFAULT_RANK_ENUMERATION_CAP).unwrap();
        assert!(out.z.is_zero());
        assert!(is_high_rank(2, 7, 1, &BigRational::one()));
        assert!(!is_high_rank(2, 6, 1, &half()));
        assert!(is_high_rank(2, 7, 1, &half()));
        assert!(is_high_rank(2, 8, 1, &half()));
    }

    #[test]
    fn lift_places_maps_in_slots() {
        let l = AffineMap::linear(2, 2, vec![vec![1, 0], vec![1, 1]]).unwrap();
        let fam = MapFamily::new(2, 2, 2, vec![l.clone()]).unwrap();
        let lifted = lift(&fam, 3).unwrap();
        assert_eq!(lifted.dim(), 3);
        let s = vec![1, 0, 0, 1, 1, 1];
        assert_eq!(lifted.maps()[1].apply(&s), l.apply(&[0, 1]));
    }
}
