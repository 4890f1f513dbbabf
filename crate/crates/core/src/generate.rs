//! Seeded input sets.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::{random_subspace_of_codim, BilinearForm, FieldParams, Subspace};
use crate::phi::GridSet;
use crate::pipeline::BilinearVariety;
use crate::rng::stream;
use crate::setlab::DenseSet;

#[derive(Clone, Debug)]
pub enum GeneratorSpec {
    /// `round(density * p^{m+n})` points chosen uniformly.
    Random { p: u32, m: usize, n: usize, density: f64 },
    /// `V x W` for random subspaces of the given codimensions.
    Product { p: u32, m: usize, n: usize, codim_v: usize, codim_w: usize },
    /// A random variety with `(r1, r2, r3)` equations, minus a fraction of its points.
    PlantedVariety { p: u32, m: usize, n: usize, codims: (usize, usize, usize), deletion: f64 },
    /// `F^m x A0`.
    Graph { m: usize, base: DenseSet },
}

fn check_fraction(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must lie in [0, 1]")))
    }
}

/// A variety whose forms stay independent on `V x W`, so it has exactly `r3` of them.
pub fn planted_variety<R: Rng>(rng: &mut R, p: u32, m: usize, n: usize, codims: (usize, usize, usize)) -> Result<BilinearVariety> {
    let (xs, ys) = (FieldParams::new(p, m)?, FieldParams::new(p, n)?);
    let (r1, r2, r3) = codims;
    if r1 > m || r2 > n || r3 > (m - r1) * (n - r2) {
        return Err(Error::InvalidParameter("codimensions exceed the ambient".into()));
    }
    let v = random_subspace_of_codim(rng, xs, r1)?;
    let w = random_subspace_of_codim(rng, ys, r2)?;
    loop {
        let forms: Vec<BilinearForm> = (0..r3)
            .map(|_| {
                let matrix = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..p)).collect()).collect();
                BilinearForm::new(p, n, matrix)
            })
            .collect::<Result<_>>()?;
        let b = BilinearVariety::new(v.clone(), w.clone(), forms)?;
        if b.reduced().r3() == r3 {
            return Ok(b);
        }
    }
}

/// Remove `round(fraction * |A|)` uniformly chosen points.
pub fn delete_fraction<R: Rng>(rng: &mut R, a: &GridSet, fraction: f64) -> Result<GridSet> {
    check_fraction(fraction, "deletion")?;
    let points: Vec<(usize, usize)> = a.iter().collect();
    let k = (fraction * points.len() as f64).round() as usize;
    let mut out = a.clone();
    for i in sample(rng, points.len(), k.min(points.len())) {
        let (x, y) = points[i];
        out.remove(x, y);
    }
    Ok(out)
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<GridSet> {
    let mut rng = stream(seed, "generate");
    match spec {
        &GeneratorSpec::Random { p, m, n, density } => {
            check_fraction(density, "density")?;
            let joint = FieldParams::new(p, m + n)?;
            GridSet::from_joint(m, DenseSet::random(&mut rng, joint, density))
        }
        &GeneratorSpec::Product { p, m, n, codim_v, codim_w } => {
            if codim_v > m || codim_w > n {
                return Err(Error::InvalidParameter("codimensions exceed the ambient".into()));
            }
            let v: Subspace = random_subspace_of_codim(&mut rng, FieldParams::new(p, m)?, codim_v)?;
            let w: Subspace = random_subspace_of_codim(&mut rng, FieldParams::new(p, n)?, codim_w)?;
            GridSet::product(&v, &w)
        }
        &GeneratorSpec::PlantedVariety { p, m, n, codims, deletion } => {
            let b = planted_variety(&mut rng, p, m, n, codims)?;
            delete_fraction(&mut rng, &b.to_grid()?, deletion)
        }
        GeneratorSpec::Graph { m, base } => GridSet::graph(*m, base),
    }
}
