//! Real-valued fields on a [`Grid`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::Spectrum;
use crate::tensor::Mat2;

/// A scalar field sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, data })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        ScalarField {
            data: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Sample `f(x1, x2)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let data = (0..grid.len())
            .map(|idx| f(grid.coord(idx % n), grid.coord(idx / n)))
            .collect();
        ScalarField {
            grid: grid.clone(),
            data,
        }
    }

    pub(crate) fn from_vec_unchecked(grid: &Arc<Grid>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_field(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Integral over the domain by the (spectrally exact) trapezoidal rule.
    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.area()
    }

    /// `∫ f g` by trapezoidal quadrature.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s * self.grid.area() / self.data.len() as f64
    }

    /// `∫ |f|^2` by trapezoidal quadrature.
    pub fn l2_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.data.iter_mut() {
            *x *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        self.map(|x| a * x)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }
}

/// Common surface of all field types: a fixed list of scalar components.
pub trait GridField: Clone {
    fn components(&self) -> Vec<&ScalarField>;
    fn components_mut(&mut self) -> Vec<&mut ScalarField>;

    /// Multiplicity of each stored component in the Frobenius norm.
    fn weights(&self) -> Vec<f64> {
        vec![1.0; self.components().len()]
    }

    fn grid(&self) -> &Arc<Grid> {
        self.components()[0].grid()
    }

    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .fold(0.0, |m, c| m.max(c.max_abs()))
    }

    fn l2_sq(&self) -> f64 {
        self.components()
            .iter()
            .zip(self.weights())
            .map(|(c, w)| w * c.l2_sq())
            .sum()
    }

    fn inner(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .zip(self.weights())
            .map(|((a, b), w)| w * a.inner(b))
            .sum()
    }

    /// Apply `f` to every component.
    fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        let mut out = self.clone();
        for (dst, src) in out.components_mut().into_iter().zip(self.components()) {
            *dst = f(src);
        }
        out
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.components_mut().into_iter().zip(other.components()) {
            x.axpy(a, y);
        }
    }
}

impl GridField for ScalarField {
    fn components(&self) -> Vec<&ScalarField> {
        vec![self]
    }
    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![self]
    }
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub v1: ScalarField,
    pub v2: ScalarField,
}

impl VectorField {
    pub fn new(v1: ScalarField, v2: ScalarField) -> Self {
        VectorField { v1, v2 }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField::new(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        VectorField::new(
            ScalarField::from_fn(grid, |x, y| f(x, y)[0]),
            ScalarField::from_fn(grid, |x, y| f(x, y)[1]),
        )
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 2] {
        [self.v1.data[idx], self.v2.data[idx]]
    }

    /// Pointwise maximum of the Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.v1
            .data
            .iter()
            .zip(&self.v2.data)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

impl GridField for VectorField {
    fn components(&self) -> Vec<&ScalarField> {
        vec![&self.v1, &self.v2]
    }
    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![&mut self.v1, &mut self.v2]
    }
}

/// Symmetric 2x2 tensor field storing `V11, V12, V22`; `V21 = V12`.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    pub s11: ScalarField,
    pub s12: ScalarField,
    pub s22: ScalarField,
}

impl SymTensorField {
    pub fn new(s11: ScalarField, s12: ScalarField, s22: ScalarField) -> Self {
        SymTensorField { s11, s12, s22 }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SymTensorField::new(
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        )
    }

    pub fn constant(grid: &Arc<Grid>, m: Mat2) -> Self {
        SymTensorField::new(
            ScalarField::constant(grid, m.a11),
            ScalarField::constant(grid, 0.5 * (m.a12 + m.a21)),
            ScalarField::constant(grid, m.a22),
        )
    }

    /// Build from a pointwise generator; the result is symmetrized.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> Mat2) -> Self {
        let n = grid.len();
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for idx in 0..n {
            let m = f(grid.coord(idx % grid.n()), grid.coord(idx / grid.n()));
            a[idx] = m.a11;
            b[idx] = 0.5 * (m.a12 + m.a21);
            c[idx] = m.a22;
        }
        SymTensorField::new(
            ScalarField::from_vec_unchecked(grid, a),
            ScalarField::from_vec_unchecked(grid, b),
            ScalarField::from_vec_unchecked(grid, c),
        )
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Mat2 {
        let off = self.s12.data[idx];
        Mat2::new(self.s11.data[idx], off, off, self.s22.data[idx])
    }

    pub fn trace(&self) -> ScalarField {
        self.s11.add(&self.s22)
    }

    pub fn to_full(&self) -> Tensor2Field {
        Tensor2Field::new(
            self.s11.clone(),
            self.s12.clone(),
            self.s12.clone(),
            self.s22.clone(),
        )
    }
}

impl GridField for SymTensorField {
    fn components(&self) -> Vec<&ScalarField> {
        vec![&self.s11, &self.s12, &self.s22]
    }
    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![&mut self.s11, &mut self.s12, &mut self.s22]
    }
    fn weights(&self) -> Vec<f64> {
        vec![1.0, 2.0, 1.0]
    }
}

/// General 2x2 tensor field, row-major components.
#[derive(Clone, Debug)]
pub struct Tensor2Field {
    pub t11: ScalarField,
    pub t12: ScalarField,
    pub t21: ScalarField,
    pub t22: ScalarField,
}

impl Tensor2Field {
    pub fn new(t11: ScalarField, t12: ScalarField, t21: ScalarField, t22: ScalarField) -> Self {
        Tensor2Field {
            t11,
            t12,
            t21,
            t22,
        }
    }

    pub fn constant(grid: &Arc<Grid>, m: Mat2) -> Self {
        Tensor2Field::new(
            ScalarField::constant(grid, m.a11),
            ScalarField::constant(grid, m.a12),
            ScalarField::constant(grid, m.a21),
            ScalarField::constant(grid, m.a22),
        )
    }

    pub fn identity(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, Mat2::identity())
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> Mat2) -> Self {
        Self::from_points(grid, |idx| {
            f(grid.coord(idx % grid.n()), grid.coord(idx / grid.n()))
        })
    }

    /// Build from a generator over node indices.
    pub fn from_points(grid: &Arc<Grid>, f: impl Fn(usize) -> Mat2) -> Self {
        let n = grid.len();
        let mut c = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for idx in 0..n {
            let m = f(idx);
            c[0][idx] = m.a11;
            c[1][idx] = m.a12;
            c[2][idx] = m.a21;
            c[3][idx] = m.a22;
        }
        let [a, b, d, e] = c;
        Tensor2Field::new(
            ScalarField::from_vec_unchecked(grid, a),
            ScalarField::from_vec_unchecked(grid, b),
            ScalarField::from_vec_unchecked(grid, d),
            ScalarField::from_vec_unchecked(grid, e),
        )
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Mat2 {
        Mat2::new(
            self.t11.data[idx],
            self.t12.data[idx],
            self.t21.data[idx],
            self.t22.data[idx],
        )
    }

    pub fn determinant(&self) -> ScalarField {
        let g = self.t11.grid();
        ScalarField::from_vec_unchecked(g, (0..g.len()).map(|i| self.at(i).det()).collect())
    }
}

impl GridField for Tensor2Field {
    fn components(&self) -> Vec<&ScalarField> {
        vec![&self.t11, &self.t12, &self.t21, &self.t22]
    }
    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![&mut self.t11, &mut self.t12, &mut self.t21, &mut self.t22]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadrature_of_sin_squared() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        assert!((f.l2_sq() - 2.0 * PI * PI).abs() < 1e-12);
        assert!(f.mean().abs() < 1e-15);
    }

    #[test]
    fn sym_tensor_norm_counts_off_diagonal_twice() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let v = SymTensorField::constant(&g, Mat2::new(0.0, 1.0, 1.0, 0.0));
        assert!((v.l2_sq() - 2.0 * g.area()).abs() < 1e-12);
    }

    #[test]
    fn wrong_length_rejected() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 10]).is_err());
    }
}
