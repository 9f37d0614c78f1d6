//! Pointwise 2x2 matrix algebra.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Singularity guard for determinants of stretch and deformation tensors.
pub const EPS_SPD: f64 = 1e-8;
/// Singularity guard for the `2 + tr V` denominator.
pub const EPS_TR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

/// The rotation generator `[[0, -1], [1, 0]]`.
pub const A: Mat2 = Mat2 {
    a11: 0.0,
    a12: -1.0,
    a21: 1.0,
    a22: 0.0,
};

impl Mat2 {
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub const fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(s * self.a11, s * self.a12, s * self.a21, s * self.a22)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// Frobenius inner product.
    pub fn dot(&self, o: &Mat2) -> f64 {
        self.a11 * o.a11 + self.a12 * o.a12 + self.a21 * o.a21 + self.a22 * o.a22
    }

    pub fn max_abs(&self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.a22, -self.a12, -self.a21, self.a11).scale(1.0 / d))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

/// Left polar factors `F = (I + V) R(theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarParts {
    pub v: Mat2,
    pub r: Mat2,
    pub theta: f64,
}

/// Square root of a symmetric positive definite 2x2 matrix.
pub fn sqrt_spd2(m: &Mat2) -> Result<Mat2> {
    let det = m.det();
    let tr = m.trace();
    if det <= EPS_SPD || tr <= 0.0 || !det.is_finite() {
        return Err(Error::Degenerate {
            what: "matrix square root of a non-SPD matrix",
            det,
        });
    }
    let sd = det.sqrt();
    let denom = (tr + 2.0 * sd).sqrt();
    // Symmetrize the input so the result is symmetric to the last bit.
    let off = 0.5 * (m.a12 + m.a21);
    Ok(Mat2::new((m.a11 + sd) / denom, off / denom, off / denom, (m.a22 + sd) / denom))
}

/// Split `F` into its left stretch `I + V` and rotation `R`.
pub fn polar_decompose_left(f: &Mat2) -> Result<PolarParts> {
    let det = f.det();
    if det <= EPS_SPD || !det.is_finite() {
        return Err(Error::Degenerate {
            what: "deformation tensor",
            det,
        });
    }
    let stretch = sqrt_spd2(&(*f * f.transpose()))?;
    let r = stretch.inverse().ok_or(Error::Degenerate {
        what: "left stretch tensor",
        det: stretch.det(),
    })? * *f;
    let v = stretch - Mat2::identity();
    Ok(PolarParts {
        v: Mat2::new(v.a11, v.a12, v.a12, v.a22),
        r,
        theta: r.a21.atan2(r.a11),
    })
}

/// `F = (I + V) R(theta)`.
pub fn compose_from_strain_angle(v: &Mat2, theta: f64) -> Result<Mat2> {
    let stretch = Mat2::identity() + *v;
    if stretch.det() <= EPS_SPD || stretch.trace() <= 0.0 {
        return Err(Error::Degenerate {
            what: "I + V is not positive definite",
            det: stretch.det(),
        });
    }
    Ok(stretch * Mat2::rotation(theta))
}

/// Symmetric part `S(u)` and the vorticity entry `ω₁₂ = (∂₂u₁ − ∂₁u₂)/2`.
pub fn velocity_split(gradu: &Mat2) -> (Mat2, f64) {
    let off = 0.5 * (gradu.a12 + gradu.a21);
    (
        Mat2::new(gradu.a11, off, off, gradu.a22),
        0.5 * (gradu.a12 - gradu.a21),
    )
}

/// `VA − AV`.
pub fn a_commutator(v: &Mat2) -> Mat2 {
    *v * A - A * *v
}

/// Unchecked form of [`gamma_coefficient`] for the hot loops; caller guarantees
/// the denominator is safe.
#[inline]
pub(crate) fn gamma_raw(g: &Mat2, v: &Mat2) -> f64 {
    let tr = v.trace();
    let omega12 = 0.5 * (g.a12 - g.a21);
    // ∂_k u₁ V_k2 − ∂_k u₂ V_k1
    let cross = (g.a11 * v.a12 + g.a12 * v.a22) - (g.a21 * v.a11 + g.a22 * v.a21);
    (tr * omega12 - cross) / (2.0 + tr)
}

/// Rotation-rate coupling coefficient `γ` of the strain-angle system.
pub fn gamma_coefficient(gradu: &Mat2, v: &Mat2) -> Result<f64> {
    let denom = 2.0 + v.trace();
    if denom.abs() <= EPS_TR {
        return Err(Error::GammaSingular {
            index: 0,
            value: denom,
        });
    }
    Ok(gamma_raw(gradu, v))
}

/// Exact inverse of `I + V`.
pub fn inv_i_plus_v(v: &Mat2) -> Result<Mat2> {
    let m = Mat2::identity() + *v;
    let det = m.det();
    if det.abs() <= EPS_SPD {
        return Err(Error::Degenerate {
            what: "I + V is singular",
            det,
        });
    }
    Ok(Mat2::new(m.a22, -m.a12, -m.a21, m.a11).scale(1.0 / det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    /// Square root through the eigendecomposition, for comparison.
    fn sqrt_by_eigen(m: &Mat2) -> Mat2 {
        let phi = 0.5 * (2.0 * m.a12).atan2(m.a11 - m.a22);
        let q = Mat2::rotation(phi);
        let d = q.transpose() * *m * q;
        q * Mat2::diag(d.a11.sqrt(), d.a22.sqrt()) * q.transpose()
    }

    #[test]
    fn sqrt_examples() {
        assert!(close(&sqrt_spd2(&Mat2::identity()).unwrap(), &Mat2::identity(), 1e-15));
        let s = sqrt_spd2(&Mat2::diag(4.0, 0.25)).unwrap();
        assert!(close(&s, &Mat2::diag(2.0, 0.5), 1e-15));
        assert!(sqrt_spd2(&Mat2::diag(1.0, 0.0)).is_err());
        assert!(sqrt_spd2(&Mat2::diag(-1.0, -1.0)).is_err());
    }

    #[test]
    fn polar_examples() {
        let p = polar_decompose_left(&Mat2::identity()).unwrap();
        assert!(close(&p.v, &Mat2::default(), 1e-15) && p.theta == 0.0);

        let p = polar_decompose_left(&Mat2::rotation(0.7)).unwrap();
        assert!(p.v.max_abs() < 1e-15);
        assert!((p.theta - 0.7).abs() < 1e-15);

        let p = polar_decompose_left(&Mat2::diag(2.0, 0.5)).unwrap();
        assert!(close(&p.v, &Mat2::diag(1.0, -0.5), 1e-15));
        assert_eq!(p.theta, 0.0);
        assert!((p.v.trace() - 0.5).abs() < 1e-15);
        assert!((p.v.trace() + p.v.det()).abs() < 1e-15);
    }

    #[test]
    fn polar_rejects_reflections() {
        let err = polar_decompose_left(&Mat2::diag(1.0, -1.0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate { det, .. } if det == -1.0));
    }

    #[test]
    fn compose_examples() {
        let f = compose_from_strain_angle(&Mat2::default(), 0.0).unwrap();
        assert!(close(&f, &Mat2::identity(), 0.0));
        let f = compose_from_strain_angle(&Mat2::default(), PI / 2.0).unwrap();
        assert!(close(&f, &A, 1e-16));
        assert!(compose_from_strain_angle(&Mat2::diag(-2.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = Mat2::new(0.3, -1.2, 0.4, -0.3);
        assert_eq!(gamma_coefficient(&g, &Mat2::default()).unwrap(), 0.0);
        let shear = Mat2::new(0.0, 1.0, 0.0, 0.0);
        let gamma = gamma_coefficient(&shear, &Mat2::diag(1.0, 0.0)).unwrap();
        assert!((gamma - 1.0 / 6.0).abs() < 1e-16);
        let v = Mat2::new(0.2, 0.1, 0.1, -0.05);
        assert_eq!(gamma_coefficient(&Mat2::default(), &v).unwrap(), 0.0);
        assert!(gamma_coefficient(&shear, &Mat2::diag(-1.0, -1.0)).is_err());
    }

    #[test]
    fn split_examples() {
        let (s, w) = velocity_split(&Mat2::identity());
        assert!(close(&s, &Mat2::identity(), 0.0) && w == 0.0);
        let (s, w) = velocity_split(&Mat2::new(0.0, 1.0, 0.0, 0.0));
        assert!(close(&s, &Mat2::new(0.0, 0.5, 0.5, 0.0), 0.0) && w == 0.5);
        let a = 0.8;
        let (s, w) = velocity_split(&Mat2::new(0.0, -a, a, 0.0));
        assert!(s.max_abs() == 0.0 && w == -a);
    }

    #[test]
    fn commutator_examples() {
        assert_eq!(a_commutator(&Mat2::identity()).max_abs(), 0.0);
        let (a, b) = (0.3, -1.1);
        assert!(close(
            &a_commutator(&Mat2::diag(a, b)),
            &Mat2::new(0.0, b - a, b - a, 0.0),
            1e-15
        ));
        let c = 0.4;
        assert!(close(
            &a_commutator(&Mat2::new(0.0, c, c, 0.0)),
            &Mat2::new(2.0 * c, 0.0, 0.0, -2.0 * c),
            1e-15
        ));
    }

    #[test]
    fn inverse_examples() {
        assert!(close(&inv_i_plus_v(&Mat2::default()).unwrap(), &Mat2::identity(), 0.0));
        let inv = inv_i_plus_v(&Mat2::diag(1.0, -0.5)).unwrap();
        assert!(close(&inv, &Mat2::diag(0.5, 2.0), 1e-15));
        assert!(inv_i_plus_v(&Mat2::diag(-1.0, 0.0)).is_err());
    }

    fn sym_strain() -> impl Strategy<Value = Mat2> {
        (-0.4..0.4f64, -0.3..0.3f64, -0.4..0.4f64).prop_map(|(a, b, c)| Mat2::new(a, b, b, c))
    }

    fn deformation() -> impl Strategy<Value = Mat2> {
        (-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64)
            .prop_filter("det in [0.5, 2]", |(a, b, c, d)| {
                let det = a * d - b * c;
                (0.5..=2.0).contains(&det)
            })
            .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn polar_reconstructs(f in deformation()) {
            let p = polar_decompose_left(&f).unwrap();
            let stretch = Mat2::identity() + p.v;
            prop_assert!(close(&(stretch * p.r), &f, 1e-12));
            prop_assert!(close(&(p.r * p.r.transpose()), &Mat2::identity(), 1e-12));
            prop_assert!(stretch.trace() > 0.0 && stretch.det() > 0.0);
            prop_assert!(close(&p.r, &Mat2::rotation(p.theta), 1e-12));
        }

        #[test]
        fn unimodular_strain_satisfies_trace_det(f in deformation()) {
            let s = f.det().sqrt();
            let unimodular = f.scale(1.0 / s);
            let p = polar_decompose_left(&unimodular).unwrap();
            prop_assert!((p.v.trace() + p.v.det()).abs() <= 1e-12);
        }

        #[test]
        fn sqrt_matches_eigendecomposition(f in deformation()) {
            let m = f * f.transpose();
            let s = sqrt_spd2(&m).unwrap();
            prop_assert!(close(&s, &sqrt_by_eigen(&m), 1e-12));
            prop_assert!(close(&(s * s), &m, 1e-12));
        }

        #[test]
        fn compose_round_trip(v in sym_strain(), theta in -3.0..3.0f64) {
            let f = compose_from_strain_angle(&v, theta).unwrap();
            let p = polar_decompose_left(&f).unwrap();
            prop_assert!(close(&p.v, &v, 1e-10));
            let d = (p.theta - theta).rem_euclid(2.0 * PI);
            prop_assert!(d.min(2.0 * PI - d) < 1e-10);
        }

        #[test]
        fn commutator_symmetric(v in sym_strain()) {
            let c = a_commutator(&v);
            prop_assert!((c.a12 - c.a21).abs() <= 1e-14);
        }

        #[test]
        fn gamma_ignores_isotropic_gradient(
            v in sym_strain(),
            g in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64),
            c in -3.0..3.0f64,
        ) {
            let g = Mat2::new(g.0, g.1, g.2, g.3);
            let a = gamma_coefficient(&g, &v).unwrap();
            let b = gamma_coefficient(&(g + Mat2::identity().scale(c)), &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-14);
        }

        #[test]
        fn split_recomposes(g in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)) {
            let g = Mat2::new(g.0, g.1, g.2, g.3);
            let (s, w) = velocity_split(&g);
            // ω(u) = ½(∇u − ∇uᵀ) = −ω₁₂ A
            prop_assert!(close(&(s + (-A).scale(w)), &g, 1e-15));
        }

        #[test]
        fn inverse_multiplies_to_identity(v in sym_strain()) {
            let inv = inv_i_plus_v(&v).unwrap();
            prop_assert!(close(&((Mat2::identity() + v) * inv), &Mat2::identity(), 1e-13));
        }
    }
}
