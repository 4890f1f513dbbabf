use crate::error::{Error, Result};
use crate::gf::{canonical_basis, mat_mul, mat_vec, transpose, BilinearForm, FieldParams, Subspace, Vector};
use crate::phi::GridSet;

/// `{(x, y) : x in V, y in W, b_i(x, y) = 0 for all i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearVariety {
    v: Subspace,
    w: Subspace,
    forms: Vec<BilinearForm>,
}

impl BilinearVariety {
    pub fn new(v: Subspace, w: Subspace, forms: Vec<BilinearForm>) -> Result<Self> {
        if v.ambient().p != w.ambient().p {
            return Err(Error::AmbientMismatch);
        }
        for b in &forms {
            if b.x_dim() != v.ambient().n || b.y_dim() != w.ambient().n {
                return Err(Error::AmbientMismatch);
            }
        }
        Ok(Self { v, w, forms })
    }

    pub fn full(p: u32, m: usize, n: usize) -> Result<Self> {
        Self::new(Subspace::full(FieldParams::linear(p, m)?), Subspace::full(FieldParams::linear(p, n)?), vec![])
    }

    pub fn p(&self) -> u32 {
        self.v.ambient().p
    }

    pub fn m(&self) -> usize {
        self.v.ambient().n
    }

    pub fn n(&self) -> usize {
        self.w.ambient().n
    }

    pub fn v(&self) -> &Subspace {
        &self.v
    }

    pub fn w(&self) -> &Subspace {
        &self.w
    }

    pub fn forms(&self) -> &[BilinearForm] {
        &self.forms
    }

    pub fn r1(&self) -> usize {
        self.v.codim()
    }

    pub fn r2(&self) -> usize {
        self.w.codim()
    }

    pub fn r3(&self) -> usize {
        self.forms.len()
    }

    pub fn r(&self) -> usize {
        self.r1() + self.r2() + self.r3()
    }

    pub fn contains(&self, x: &[u32], y: &[u32]) -> bool {
        self.v.contains(x) && self.w.contains(y) && self.forms.iter().all(|b| b.eval(x, y) == 0)
    }

    /// `{x : (x, y) in B}` for `y in W`: `V` cut by the hyperplanes `M_i y`.
    pub fn slice(&self, y: &[u32]) -> Subspace {
        let xs = self.v.ambient();
        let normals: Vec<Vector> = self.forms.iter().map(|b| mat_vec(&xs, b.matrix(), y)).collect();
        let cut = canonical_basis(xs, &normals).expect("normals live in F^m").annihilator();
        self.v.intersect(&cut).expect("same ambient")
    }

    /// Upper bound `|V| |W|` on the number of points, if it fits.
    pub fn size_bound(&self) -> Option<u128> {
        let dims = (self.v.dim() + self.w.dim()) as u32;
        (self.p() as u128).checked_pow(dims)
    }

    /// Every point, as `(x_index, y_index)`, slice by slice in the order of `W`'s elements.
    pub fn points(&self) -> Vec<(usize, usize)> {
        let ys = self.w.ambient();
        let mut out = Vec::new();
        for y in self.w.elements() {
            let yi = ys.index(&y);
            for x in self.slice(&y).element_indices() {
                out.push((x, yi));
            }
        }
        out
    }

    pub fn to_grid(&self) -> Result<GridSet> {
        let mut g = GridSet::empty(self.p(), self.m(), self.n())?;
        for (x, y) in self.points() {
            g.insert(x, y);
        }
        Ok(g)
    }

    /// Drop forms that vanish on `V x W` or are combinations of earlier forms there.
    /// The point set is unchanged.
    pub fn reduced(&self) -> Self {
        let f = self.v.ambient();
        let (vb, wb) = (self.v.basis(), self.w.basis());
        let cols = self.w.dim();
        let restricted_space = FieldParams { p: f.p, n: self.v.dim() * cols };
        let mut kept: Vec<BilinearForm> = Vec::new();
        let mut span = Subspace::zero(restricted_space);
        for b in &self.forms {
            // R = Vb M Wb^T, flattened.
            let mw = mat_mul(&f, b.matrix(), &transpose(wb, self.n()), cols);
            let r = if self.v.dim() == 0 || cols == 0 { Vec::new() } else { mat_mul(&f, vb, &mw, cols) };
            let flat: Vector = r.into_iter().flatten().collect();
            if restricted_space.n == 0 || span.contains(&flat) {
                continue;
            }
            span = span.extend(&[flat]).expect("same shape");
            kept.push(b.clone());
        }
        Self { v: self.v.clone(), w: self.w.clone(), forms: kept }
    }
}
