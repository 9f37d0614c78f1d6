//! Fourier-space representation and the spatial operators built on it.
//!
//! Conventions: `(∇u)_ij = ∂_j u_i`, tensor divergence acts on rows,
//! `(∇·T)_i = Σ_j ∂_j T_ij`, and `∇⊥ = (−∂₂, ∂₁)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::{GridField, ScalarField, SymTensorField, Tensor2Field, VectorField};
use crate::grid::{Axis, Grid};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fourier coefficients of a real field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_field(f: &ScalarField) -> Self {
        Spectrum {
            coeffs: f.grid().forward(f.data()),
            grid: f.grid().clone(),
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(&self.grid, self.grid.inverse(&self.coeffs))
    }

    /// Multiply every coefficient by `symbol(idx)`.
    pub fn apply(&self, symbol: impl Fn(usize) -> Complex64) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| c * symbol(i))
                .collect(),
        }
    }

    pub fn apply_real(&self, symbol: impl Fn(usize) -> f64) -> Spectrum {
        self.apply(|i| Complex64::new(symbol(i), 0.0))
    }

    pub fn deriv(&self, axis: Axis) -> Spectrum {
        let g = self.grid.clone();
        self.apply(|i| {
            let (k1, k2) = g.kd(i);
            I * match axis {
                Axis::X1 => k1,
                Axis::X2 => k2,
            }
        })
    }

    pub fn laplacian(&self) -> Spectrum {
        let g = self.grid.clone();
        self.apply_real(|i| {
            let (k1, k2) = g.kd(i);
            -(k1 * k1 + k2 * k2)
        })
    }

    /// Inverse Laplacian with the undefined modes set to zero.
    pub fn inv_laplacian(&self) -> Spectrum {
        let g = self.grid.clone();
        self.apply_real(|i| {
            let (k1, k2) = g.kd(i);
            let k2s = k1 * k1 + k2 * k2;
            if k2s == 0.0 {
                0.0
            } else {
                -1.0 / k2s
            }
        })
    }

    pub fn dealias(&mut self) {
        for (c, &keep) in self.coeffs.iter_mut().zip(self.grid.dealias_mask()) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealiased(mut self) -> Spectrum {
        self.dealias();
        self
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= a;
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Spectrum) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn plus(mut self, a: f64, other: &Spectrum) -> Spectrum {
        self.axpy(a, other);
        self
    }

    /// `∫ f g` over the domain (Parseval).
    pub fn inner(&self, other: &Spectrum) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        s * self.grid.area()
    }

    /// `Σ_k (1 + |k|^2)^s |f̂_k|^2`, scaled so that `s = 0` is `∫ |f|^2`.
    pub fn sobolev_sq(&self, s: u32) -> f64 {
        let total: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (k1, k2) = self.grid.k(i);
                (1.0 + k1 * k1 + k2 * k2).powi(s as i32) * c.norm_sqr()
            })
            .sum();
        total * self.grid.area()
    }
}

/// Spectral derivative along `axis`.
pub fn derivative(f: &ScalarField, axis: Axis) -> ScalarField {
    f.spectrum().deriv(axis).to_field()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.spectrum().laplacian().to_field()
}

/// Result of [`inv_laplacian`].
#[derive(Clone, Debug)]
pub struct InvLaplacian {
    pub field: ScalarField,
    /// Mean of the input when it was large enough to be worth flagging; the
    /// inverse Laplacian of a constant does not exist on the torus.
    pub dropped_mean: Option<f64>,
}

pub fn inv_laplacian(f: &ScalarField) -> InvLaplacian {
    let s = f.spectrum();
    let mean = s.mean();
    let tol = 1e-12 * (1.0 + f.max_abs());
    InvLaplacian {
        field: s.inv_laplacian().to_field(),
        dropped_mean: (mean.abs() > tol).then_some(mean),
    }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let s = f.spectrum();
    VectorField::new(s.deriv(Axis::X1).to_field(), s.deriv(Axis::X2).to_field())
}

/// `∇⊥f = (−∂₂f, ∂₁f)`
pub fn perp_gradient(f: &ScalarField) -> VectorField {
    let s = f.spectrum();
    VectorField::new(
        s.deriv(Axis::X2).to_field().scaled(-1.0),
        s.deriv(Axis::X1).to_field(),
    )
}

pub fn divergence(v: &VectorField) -> ScalarField {
    v.v1
        .spectrum()
        .deriv(Axis::X1)
        .plus(1.0, &v.v2.spectrum().deriv(Axis::X2))
        .to_field()
}

/// `(∇u)_ij = ∂_j u_i`
pub fn velocity_gradient(u: &VectorField) -> Tensor2Field {
    let s1 = u.v1.spectrum();
    let s2 = u.v2.spectrum();
    Tensor2Field::new(
        s1.deriv(Axis::X1).to_field(),
        s1.deriv(Axis::X2).to_field(),
        s2.deriv(Axis::X1).to_field(),
        s2.deriv(Axis::X2).to_field(),
    )
}

/// Row divergence of a symmetric tensor field.
pub fn div_sym(v: &SymTensorField) -> VectorField {
    let (a, b, c) = (v.s11.spectrum(), v.s12.spectrum(), v.s22.spectrum());
    VectorField::new(
        a.deriv(Axis::X1).plus(1.0, &b.deriv(Axis::X2)).to_field(),
        b.deriv(Axis::X1).plus(1.0, &c.deriv(Axis::X2)).to_field(),
    )
}

/// Row divergence `(∇·T)_i = Σ_j ∂_j T_ij`.
pub fn div_rows(t: &Tensor2Field) -> VectorField {
    VectorField::new(
        t.t11
            .spectrum()
            .deriv(Axis::X1)
            .plus(1.0, &t.t12.spectrum().deriv(Axis::X2))
            .to_field(),
        t.t21
            .spectrum()
            .deriv(Axis::X1)
            .plus(1.0, &t.t22.spectrum().deriv(Axis::X2))
            .to_field(),
    )
}

/// `∇·Tᵀ`, i.e. component `j` is `Σ_i ∂_i T_ij`.
pub fn div_transpose(t: &Tensor2Field) -> VectorField {
    VectorField::new(
        t.t11
            .spectrum()
            .deriv(Axis::X1)
            .plus(1.0, &t.t21.spectrum().deriv(Axis::X2))
            .to_field(),
        t.t12
            .spectrum()
            .deriv(Axis::X1)
            .plus(1.0, &t.t22.spectrum().deriv(Axis::X2))
            .to_field(),
    )
}

/// Leray projection of a pair of spectra, in place.
pub(crate) fn project_spectra(s1: &mut Spectrum, s2: &mut Spectrum) {
    let g = s1.grid().clone();
    for (idx, (a, b)) in s1
        .coeffs_mut()
        .iter_mut()
        .zip(s2.coeffs_mut().iter_mut())
        .enumerate()
    {
        let (k1, k2) = g.kd(idx);
        let k2s = k1 * k1 + k2 * k2;
        if k2s == 0.0 {
            continue;
        }
        let kdotv = (*a * k1 + *b * k2) / k2s;
        *a -= kdotv * k1;
        *b -= kdotv * k2;
    }
}

/// Orthogonal projection onto divergence-free fields.
pub fn leray_project(v: &VectorField) -> VectorField {
    let mut s1 = v.v1.spectrum();
    let mut s2 = v.v2.spectrum();
    project_spectra(&mut s1, &mut s2);
    VectorField::new(s1.to_field(), s2.to_field())
}

/// Zero every mode outside the 2/3-rule mask.
pub fn dealias<F: GridField>(f: &F) -> F {
    f.map_components(|c| c.spectrum().dealiased().to_field())
}

/// Squared `H^s` norm; tensor fields sum their (Frobenius-weighted) components.
pub fn sobolev_norm_sq<F: GridField>(f: &F, s: u32) -> f64 {
    f.components()
        .iter()
        .zip(f.weights())
        .map(|(c, w)| w * c.spectrum().sobolev_sq(s))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_band_limited;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn derivative_of_sin() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let d = derivative(&f, Axis::X1);
        let exact = ScalarField::from_fn(&g, |x, _| x.cos());
        assert!(max_diff(&d, &exact) < 1e-13);
        assert!(d.mean().abs() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(16);
        let f = ScalarField::constant(&g, 3.5);
        assert!(derivative(&f, Axis::X1).max_abs() < 1e-15);
        assert!(derivative(&f, Axis::X2).max_abs() < 1e-15);
    }

    #[test]
    fn mixed_product_derivative() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x, y| x.sin() * y.sin());
        let exact = ScalarField::from_fn(&g, |x, y| x.sin() * y.cos());
        assert!(max_diff(&derivative(&f, Axis::X2), &exact) < 1e-13);
    }

    #[test]
    fn inverse_laplacian_cases() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x, _| x.cos());
        let r = inv_laplacian(&f);
        assert!(r.dropped_mean.is_none());
        assert!(max_diff(&r.field, &f.scaled(-1.0)) < 1e-14);

        let z = inv_laplacian(&ScalarField::zeros(&g));
        assert!(z.field.max_abs() == 0.0 && z.dropped_mean.is_none());

        let shifted = ScalarField::from_fn(&g, |x, _| x.cos() + 5.0);
        let r = inv_laplacian(&shifted);
        assert!((r.dropped_mean.unwrap() - 5.0).abs() < 1e-13);
        assert!(max_diff(&r.field, &f.scaled(-1.0)) < 1e-14);
    }

    #[test]
    fn laplacian_inverts_inverse_laplacian() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_band_limited(&g, 6, 1.0, &mut rng);
        let f = f.map(|x| x + 0.7);
        let back = laplacian(&inv_laplacian(&f).field);
        let target = f.map(|x| x - f.mean());
        assert!(max_diff(&back, &target) <= 1e-12 * target.max_abs());
    }

    #[test]
    fn leray_keeps_solenoidal_and_kills_gradients() {
        let g = grid(32);
        let psi = ScalarField::from_fn(&g, |x, y| x.sin() * y.sin());
        let v = perp_gradient(&psi);
        let w = leray_project(&v);
        assert!(max_diff(&w.v1, &v.v1) < 1e-14 && max_diff(&w.v2, &v.v2) < 1e-14);

        let phi = ScalarField::from_fn(&g, |_, y| y.cos());
        let w = leray_project(&gradient(&phi));
        assert!(w.max_abs() < 1e-14);
    }

    #[test]
    fn leray_output_is_divergence_free() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = VectorField::new(
            random_band_limited(&g, 8, 1.0, &mut rng),
            random_band_limited(&g, 8, 1.0, &mut rng),
        );
        let w = leray_project(&v);
        assert!(divergence(&w).max_abs() < 1e-12);
        // v - w is a gradient: its curl vanishes.
        let d = VectorField::new(v.v1.sub(&w.v1), v.v2.sub(&w.v2));
        let curl = derivative(&d.v2, Axis::X1).sub(&derivative(&d.v1, Axis::X2));
        assert!(curl.max_abs() < 1e-12);
    }

    #[test]
    fn leray_is_idempotent_and_self_adjoint() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rv = || {
            VectorField::new(
                random_band_limited(&g, 10, 1.0, &mut rng),
                random_band_limited(&g, 10, 1.0, &mut rng),
            )
        };
        let (u, v) = (rv(), rv());
        let pu = leray_project(&u);
        let pv = leray_project(&v);
        let lhs = pu.inner(&v);
        let rhs = u.inner(&pv);
        assert!((lhs - rhs).abs() <= 1e-12 * u.l2_sq().sqrt() * v.l2_sq().sqrt());
        let ppu = leray_project(&pu);
        assert!(max_diff(&ppu.v1, &pu.v1) < 1e-13 && max_diff(&ppu.v2, &pu.v2) < 1e-13);
    }

    #[test]
    fn dealias_cases() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x, y| (21.0 * x).cos() + (3.0 * y).sin());
        assert!(max_diff(&dealias(&f), &f) < 1e-13);
        let high = ScalarField::from_fn(&g, |x, _| (31.0 * x).cos());
        assert!(dealias(&high).max_abs() < 1e-13);
        let mut pure = Spectrum::zeros(&g);
        pure.coeffs_mut()[g.index_of(31, 0)] = Complex64::new(1.0, 0.0);
        assert!(pure.dealiased().coeffs().iter().all(|c| c.norm() == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_band_limited(&g, 32, 1.0, &mut rng);
        let once = dealias(&r);
        assert!(max_diff(&dealias(&once), &once) < 1e-14);
        let once = r.spectrum().dealiased();
        assert_eq!(once.clone().dealiased().coeffs(), once.coeffs());
    }

    #[test]
    fn derivative_commutes_with_dealias() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_band_limited(&g, 16, 1.0, &mut rng);
        let a = f.spectrum().dealiased().deriv(Axis::X1);
        let b = f.spectrum().deriv(Axis::X1).dealiased();
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn sobolev_values() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        assert!((sobolev_norm_sq(&f, 0) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sobolev_norm_sq(&f, 1) - 4.0 * PI * PI).abs() < 1e-12);
        assert!((sobolev_norm_sq(&f, 3) - 16.0 * PI * PI).abs() < 1e-11);
        assert_eq!(sobolev_norm_sq(&ScalarField::zeros(&g), 2), 0.0);
    }

    #[test]
    fn sobolev_zero_matches_quadrature() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_band_limited(&g, 10, 1.0, &mut rng);
        let q = f.l2_sq();
        assert!((sobolev_norm_sq(&f, 0) - q).abs() <= 1e-10 * q);
    }
}
