//! Initial data that satisfies the incompressibility constraints to
//! discretization accuracy, and matched states for every formulation.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{GridField, ScalarField, SymTensorField, Tensor2Field, VectorField};
use crate::grid::Grid;
use crate::integrator::{Integrator, SchemeKind, SchemeSpec};
use crate::models::{
    constraint_residuals, ConstraintResiduals, DeformationState, FrozenTransport, Observable,
    OldroydState, RotStrainState, StrainState,
};
use crate::spectral::{dealias, leray_project, perp_gradient};
use crate::tensor;

/// Real trigonometric polynomial with random coefficients on the modes
/// `0 < max(|m₁|, |m₂|) ≤ kmax`, scaled so that `max |f| = amp`.
pub fn random_band_limited(
    grid: &Arc<Grid>,
    kmax: i64,
    amp: f64,
    rng: &mut impl Rng,
) -> ScalarField {
    let kmax = kmax.min(grid.n() as i64 / 2 - 1);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let (m1, m2) = grid.mode(idx);
        let m = m1.abs().max(m2.abs());
        if m == 0 || m > kmax {
            continue;
        }
        *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let f = ScalarField::from_vec_unchecked(grid, grid.inverse(&coeffs));
    let peak = f.max_abs();
    if peak == 0.0 {
        return f;
    }
    f.scaled(amp / peak)
}

/// `amplitude · (sin x₁ cos x₂, −cos x₁ sin x₂)`.
pub fn taylor_green_velocity(grid: &Arc<Grid>, amplitude: f64) -> VectorField {
    let k = 2.0 * PI / grid.length();
    VectorField::from_fn(grid, |x, y| {
        [
            amplitude * (k * x).sin() * (k * y).cos(),
            -amplitude * (k * x).cos() * (k * y).sin(),
        ]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// `u₀ = 0`, `F₀ = I`.
    Trivial,
    /// Taylor–Green velocity, `F₀ = I`.
    TaylorGreen,
    /// Taylor–Green velocity and `F₀` transported from `I` by a frozen flow.
    WarmStart,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Trivial => "trivial",
            InitKind::TaylorGreen => "taylor_green",
            InitKind::WarmStart => "warm_start",
        })
    }
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "trivial" => Ok(InitKind::Trivial),
            "taylor_green" => Ok(InitKind::TaylorGreen),
            "warm_start" => Ok(InitKind::WarmStart),
            _ => Err(format!(
                "unknown init kind '{s}' (expected trivial, taylor_green or warm_start)"
            )),
        }
    }
}

/// Stream function `ψ` of the frozen generator `b = ∇⊥ψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StreamSpec {
    /// `ψ = a sin x₁ sin x₂`
    SinSin(f64),
    /// Random band-limited `ψ` with `max |ψ| = a`, drawn from the recipe seed.
    Random { amplitude: f64, kmax: i64 },
}

impl fmt::Display for StreamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamSpec::SinSin(a) => write!(f, "sinsin {a:?}"),
            StreamSpec::Random { amplitude, kmax } => write!(f, "random {amplitude:?} {kmax}"),
        }
    }
}

impl FromStr for StreamSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let num = |w: &str| {
            w.parse::<f64>()
                .map_err(|_| format!("'{w}' is not a number"))
        };
        match words.as_slice() {
            ["sinsin", a] => Ok(StreamSpec::SinSin(num(a)?)),
            ["random", a, k] => Ok(StreamSpec::Random {
                amplitude: num(a)?,
                kmax: k
                    .parse()
                    .map_err(|_| format!("'{k}' is not an integer"))?,
            }),
            _ => Err(format!(
                "bad stream '{s}' (expected 'sinsin A' or 'random A KMAX')"
            )),
        }
    }
}

impl StreamSpec {
    pub fn stream_function(&self, grid: &Arc<Grid>, seed: u64) -> ScalarField {
        match *self {
            StreamSpec::SinSin(a) => {
                let k = 2.0 * PI / grid.length();
                ScalarField::from_fn(grid, |x, y| a * (k * x).sin() * (k * y).sin())
            }
            StreamSpec::Random { amplitude, kmax } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                random_band_limited(grid, kmax, amplitude, &mut rng)
            }
        }
    }

    pub fn velocity(&self, grid: &Arc<Grid>, seed: u64) -> VectorField {
        perp_gradient(&self.stream_function(grid, seed))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitRecipe {
    pub kind: InitKind,
    /// Taylor–Green amplitude of `u₀`.
    pub amplitude: f64,
    /// Transport time `s₀` of the warm start.
    pub warm_time: f64,
    pub warm_stream: StreamSpec,
    /// Step of the warm-start transport.
    pub warm_dt: f64,
    pub seed: u64,
}

impl Default for InitRecipe {
    fn default() -> Self {
        InitRecipe {
            kind: InitKind::WarmStart,
            amplitude: 0.05,
            warm_time: 0.5,
            warm_stream: StreamSpec::SinSin(0.1),
            warm_dt: 1e-2,
            seed: 0,
        }
    }
}

impl InitRecipe {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad("amplitude must be a finite value >= 0");
        }
        if !(self.warm_time >= 0.0 && self.warm_time.is_finite()) {
            return bad("warm_time must be a finite value >= 0");
        }
        if !(self.warm_dt > 0.0 && self.warm_dt.is_finite()) {
            return bad("warm_dt must be positive");
        }
        Ok(())
    }

    pub fn velocity(&self, grid: &Arc<Grid>) -> VectorField {
        match self.kind {
            InitKind::Trivial => VectorField::zeros(grid),
            _ => dealias(&leray_project(&taylor_green_velocity(grid, self.amplitude))),
        }
    }

    pub fn deformation(&self, grid: &Arc<Grid>) -> Result<Tensor2Field> {
        match self.kind {
            InitKind::WarmStart => warm_start_deformation(grid, self),
            _ => Ok(Tensor2Field::identity(grid)),
        }
    }
}

/// Transport `F = I` along the frozen flow `b = ∇⊥ψ` for time `s₀`:
/// `F_s + b·∇F = ∇b F`.
pub fn warm_start_deformation(grid: &Arc<Grid>, recipe: &InitRecipe) -> Result<Tensor2Field> {
    recipe.validate()?;
    let identity = Tensor2Field::identity(grid);
    if recipe.warm_time == 0.0 {
        return Ok(identity);
    }
    let b = recipe.warm_stream.velocity(grid, recipe.seed);
    let speed = b.max_magnitude();
    if speed == 0.0 {
        return Ok(identity);
    }
    let steps = (recipe.warm_time / recipe.warm_dt).ceil().max(1.0) as usize;
    let dt = recipe.warm_time / steps as f64;
    let courant = dt * speed / grid.dx();
    if courant > 1.0 {
        return Err(Error::Cfl(format!(
            "warm start: Courant number {courant:.3} with dt {dt:e} and max |b| {speed:e}"
        )));
    }
    let scheme = SchemeSpec {
        kind: SchemeKind::Rk4Explicit,
        dt,
        ..SchemeSpec::default()
    };
    let mut integrator = Integrator::new(FrozenTransport::new(b), scheme);
    let s0 = DeformationState { f: identity };
    let out = integrator.integrate(s0, steps, |_, _, _| Ok(()))?;
    Ok(out.f)
}

/// Polar decomposition of `F` at every grid point, with the raw angle made
/// continuous by [`unwrap_angle`].
pub fn polar_fields(f: &Tensor2Field) -> Result<(SymTensorField, ScalarField)> {
    let g = f.grid().clone();
    let n = g.len();
    let (mut a, mut b, mut c, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let p = tensor::polar_decompose_left(&f.at(i))?;
        a[i] = p.v.a11;
        b[i] = p.v.a12;
        c[i] = p.v.a22;
        t[i] = p.theta;
    }
    let v = SymTensorField::new(
        ScalarField::from_vec_unchecked(&g, a),
        ScalarField::from_vec_unchecked(&g, b),
        ScalarField::from_vec_unchecked(&g, c),
    );
    let theta = unwrap_angle(&ScalarField::from_vec_unchecked(&g, t))?;
    Ok((v, theta))
}

/// Removes `2π` jumps by breadth-first continuation from grid point 0 over
/// periodic nearest neighbours. Fails if any neighbouring pair still differs
/// by `π/2` or more, which signals a winding of the rotation field.
pub fn unwrap_angle(raw: &ScalarField) -> Result<ScalarField> {
    let g = raw.grid().clone();
    let n = g.n();
    let data = raw.data();
    let neighbours = |idx: usize| {
        let (i1, i2) = (idx % n, idx / n);
        [
            i2 * n + (i1 + 1) % n,
            i2 * n + (i1 + n - 1) % n,
            ((i2 + 1) % n) * n + i1,
            ((i2 + n - 1) % n) * n + i1,
        ]
    };
    let mut out = vec![f64::NAN; g.len()];
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([0usize]);
    out[0] = data[0];
    seen[0] = true;
    while let Some(idx) = queue.pop_front() {
        for nb in neighbours(idx) {
            if seen[nb] {
                continue;
            }
            let jump = out[idx] - data[nb];
            out[nb] = data[nb] + 2.0 * PI * (jump / (2.0 * PI)).round();
            seen[nb] = true;
            queue.push_back(nb);
        }
    }
    for idx in 0..g.len() {
        for nb in neighbours(idx) {
            let d = (out[nb] - out[idx]).abs();
            if !(d < 0.5 * PI) {
                return Err(Error::Unwrap(format!(
                    "angle jumps by {d:.3} between grid points {idx} and {nb}"
                )));
            }
        }
    }
    Ok(ScalarField::from_vec_unchecked(&g, out))
}

/// Matched initial states of the three formulations.
#[derive(Clone, Debug)]
pub struct MatchedStates {
    pub oldroyd: OldroydState,
    pub strain: StrainState,
    pub rotstrain: RotStrainState,
}

impl MatchedStates {
    /// Constraint residuals of the rotation-strain state.
    pub fn residuals(&self) -> Result<ConstraintResiduals> {
        constraint_residuals(&self.rotstrain.observe()?)
    }
}

/// Splits `F₀` into `(V₀, θ₀)` pointwise and builds all three states. The
/// derived fields are truncated to the dealiased band.
pub fn states_from_deformation(u0: &VectorField, f0: &Tensor2Field) -> Result<MatchedStates> {
    for i in 0..f0.grid().len() {
        let det = f0.at(i).det();
        if det <= tensor::EPS_SPD || !det.is_finite() {
            return Err(Error::Degenerate {
                what: "initial deformation tensor",
                det,
            });
        }
    }
    let (v, theta) = polar_fields(f0)?;
    let v = dealias(&v);
    let theta = dealias(&theta);
    Ok(MatchedStates {
        oldroyd: OldroydState {
            u: u0.clone(),
            f: f0.clone(),
        },
        strain: StrainState {
            u: u0.clone(),
            v: v.clone(),
        },
        rotstrain: RotStrainState {
            u: u0.clone(),
            v,
            theta,
        },
    })
}

/// Builds the matched states described by `recipe`.
pub fn initial_states(grid: &Arc<Grid>, recipe: &InitRecipe) -> Result<MatchedStates> {
    recipe.validate()?;
    let u0 = recipe.velocity(grid);
    let f0 = recipe.deformation(grid)?;
    states_from_deformation(&u0, &f0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{divergence, sobolev_norm_sq};
    use crate::tensor::Mat2;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn taylor_green_cases() {
        let g = grid(32);
        assert_eq!(taylor_green_velocity(&g, 0.0).max_abs(), 0.0);
        let u = taylor_green_velocity(&g, 1.0);
        assert!(divergence(&u).l2_sq().sqrt() <= 1e-13);
        // Four modes (±1, ±1) per component, each with |û|² = a²/16 and
        // (1 + |k|²)² = 9: ‖u‖²_{H²} = 2 · 4 · 9 · a²/16 · (2π)².
        let a = 0.05;
        let u = taylor_green_velocity(&g, a);
        let expect = 2.0 * 4.0 * 9.0 * a * a / 16.0 * (2.0 * PI).powi(2);
        assert!((sobolev_norm_sq(&u, 2) - expect).abs() <= 1e-14 * expect.max(1.0));
    }

    #[test]
    fn random_fields_are_band_limited_and_seeded() {
        let g = grid(32);
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = random_band_limited(&g, 5, 0.3, &mut r1);
        let b = random_band_limited(&g, 5, 0.3, &mut r2);
        assert_eq!(a.data(), b.data());
        assert!((a.max_abs() - 0.3).abs() < 1e-15);
        let s = a.spectrum();
        for (idx, c) in s.coeffs().iter().enumerate() {
            let (m1, m2) = g.mode(idx);
            if m1.abs().max(m2.abs()) > 5 {
                assert!(c.norm() < 1e-16);
            }
        }
        assert!(a.mean().abs() < 1e-15);
    }

    #[test]
    fn stream_spec_round_trips() {
        for s in ["sinsin 0.1", "random 0.05 4"] {
            let spec: StreamSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<StreamSpec>().unwrap(), spec);
        }
        assert!("sinsin".parse::<StreamSpec>().is_err());
        assert!("cos 1".parse::<StreamSpec>().is_err());
    }

    #[test]
    fn warm_start_trivial_cases() {
        let g = grid(16);
        let id = Tensor2Field::identity(&g);
        let zero_time = InitRecipe {
            warm_time: 0.0,
            ..InitRecipe::default()
        };
        let f = warm_start_deformation(&g, &zero_time).unwrap();
        assert_eq!(f.components()[0].data(), id.components()[0].data());
        let still = InitRecipe {
            warm_stream: StreamSpec::SinSin(0.0),
            ..InitRecipe::default()
        };
        let f = warm_start_deformation(&g, &still).unwrap();
        for (a, b) in f.components().iter().zip(id.components()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn warm_start_meets_constraints_at_default_scale() {
        let g = grid(64);
        let f = warm_start_deformation(&g, &InitRecipe::default()).unwrap();
        let det = f.determinant().map(|d| d - 1.0).max_abs();
        let div = crate::spectral::div_transpose(&f).l2_sq().sqrt();
        assert!(det <= 1e-6, "detF residual {det:e}");
        assert!(div <= 1e-6, "divFT residual {div:e}");
        // The deformation is not trivial.
        assert!((f.t12.max_abs()) > 1e-3);
    }

    #[test]
    fn warm_start_cfl_abort() {
        let g = grid(16);
        let recipe = InitRecipe {
            warm_stream: StreamSpec::SinSin(50.0),
            warm_dt: 0.1,
            ..InitRecipe::default()
        };
        assert!(matches!(warm_start_deformation(&g, &recipe), Err(Error::Cfl(_))));
    }

    #[test]
    fn identity_deformation_gives_zero_strain() {
        let g = grid(16);
        let u = taylor_green_velocity(&g, 0.1);
        let m = states_from_deformation(&u, &Tensor2Field::identity(&g)).unwrap();
        assert_eq!(m.rotstrain.v.max_abs(), 0.0);
        assert_eq!(m.rotstrain.theta.max_abs(), 0.0);
        let r = m.residuals().unwrap();
        assert_eq!(r.det_ipv, 0.0);
        assert_eq!(r.trdet, 0.0);
        assert_eq!(r.compat, Some(0.0));
        assert_eq!(r.newid, 0.0);
    }

    #[test]
    fn global_rotation_gives_constant_angle() {
        let g = grid(16);
        let f = Tensor2Field::constant(&g, Mat2::rotation(0.3));
        let m = states_from_deformation(&VectorField::zeros(&g), &f).unwrap();
        assert!(m.rotstrain.v.max_abs() < 1e-15);
        assert!(m.rotstrain.theta.map(|t| t - 0.3).max_abs() < 1e-15);
        assert!(m.residuals().unwrap().compat.unwrap() < 1e-14);
    }

    #[test]
    fn unwrap_resolves_branch_cut() {
        let g = grid(16);
        // A smooth angle near π: raw values wrap to −π on part of the grid.
        let smooth = ScalarField::from_fn(&g, |x, y| PI - 0.05 + 0.1 * x.sin() * y.cos());
        let raw = smooth.map(|t| t.sin().atan2(t.cos()));
        assert!(raw.data().iter().any(|&t| t < 0.0));
        let un = unwrap_angle(&raw).unwrap();
        let shift = un.data()[0] - smooth.data()[0];
        assert!(un.sub(&smooth).map(|d| d - shift).max_abs() < 1e-13);
    }

    #[test]
    fn unwrap_rejects_winding() {
        let g = grid(16);
        let raw = ScalarField::from_fn(&g, |x, _| x.sin().atan2(x.cos()));
        assert!(matches!(unwrap_angle(&raw), Err(Error::Unwrap(_))));
    }

    #[test]
    fn warm_start_states_are_consistent() {
        let g = grid(64);
        let m = initial_states(&g, &InitRecipe::default()).unwrap();
        assert!(divergence(&m.strain.u).l2_sq().sqrt() <= 1e-12);
        let r = m.residuals().unwrap();
        assert!(r.compat.unwrap() <= 1e-6, "compat {:e}", r.compat.unwrap());
        assert!(r.det_ipv <= 1e-6 && r.trdet <= 1e-6 && r.newid <= 1e-6);
    }
}
