//! Time stepping. The integrating-factor scheme treats `μΔu` exactly in
//! Fourier space and runs classical RK4 on everything else.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{DeformationState, Dynamics, OldroydState, RotStrainState, State, StrainState};
use crate::spectral::{project_spectra, Spectrum};
use crate::tensor::Mat2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    IfRk4,
    Rk4Explicit,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::IfRk4 => "if_rk4",
            SchemeKind::Rk4Explicit => "rk4_explicit",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "if_rk4" => Ok(SchemeKind::IfRk4),
            "rk4_explicit" => Ok(SchemeKind::Rk4Explicit),
            _ => Err(format!("unknown scheme '{s}' (expected if_rk4 or rk4_explicit)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    /// Step size, and the upper bound of adaptive steps.
    pub dt: f64,
    pub cfl_safety: f64,
    /// Shrink steps to the CFL bound instead of failing.
    pub adaptive: bool,
    /// Coefficient of an optional `|k|⁴` damping of the non-velocity fields,
    /// applied through the integrating factor. Off by default; any nonzero
    /// value changes the model.
    pub hyperviscosity: f64,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        SchemeSpec {
            kind: SchemeKind::IfRk4,
            dt: 1e-3,
            cfl_safety: 0.5,
            adaptive: false,
            hyperviscosity: 0.0,
        }
    }
}

impl SchemeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.hyperviscosity >= 0.0 && self.hyperviscosity.is_finite()) {
            return Err(Error::InvalidConfig("hyperviscosity must be >= 0".into()));
        }
        if self.hyperviscosity > 0.0 && self.kind != SchemeKind::IfRk4 {
            return Err(Error::InvalidConfig(
                "hyperviscosity is only available with if_rk4".into(),
            ));
        }
        Ok(())
    }
}

/// Signal speeds bounding the explicit step: advection speed `‖u‖_∞` and the
/// elastic speed `‖I + V‖_∞` (spectral norm, equal to that of `F`).
pub trait SignalSpeed {
    fn signal_speeds(&self) -> (f64, f64);
}

fn spectral_norm(m: &Mat2) -> f64 {
    // Largest singular value from the eigenvalues of MᵀM.
    let p = m.transpose() * *m;
    let half_tr = 0.5 * p.trace();
    let disc = (half_tr * half_tr - p.det()).max(0.0).sqrt();
    (half_tr + disc).max(0.0).sqrt()
}

fn max_over<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    (0..n).fold(0.0, |m, i| m.max(f(i)))
}

impl SignalSpeed for OldroydState {
    fn signal_speeds(&self) -> (f64, f64) {
        let n = self.u.v1.grid().len();
        (self.u.max_magnitude(), max_over(n, |i| spectral_norm(&self.f.at(i))))
    }
}

impl SignalSpeed for StrainState {
    fn signal_speeds(&self) -> (f64, f64) {
        let n = self.u.v1.grid().len();
        let id = Mat2::identity();
        (
            self.u.max_magnitude(),
            max_over(n, |i| spectral_norm(&(id + self.v.at(i)))),
        )
    }
}

impl SignalSpeed for RotStrainState {
    fn signal_speeds(&self) -> (f64, f64) {
        let n = self.u.v1.grid().len();
        let id = Mat2::identity();
        (
            self.u.max_magnitude(),
            max_over(n, |i| spectral_norm(&(id + self.v.at(i)))),
        )
    }
}

impl SignalSpeed for DeformationState {
    fn signal_speeds(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// `min(cap, safety · Δx / max(‖u‖_∞, ‖I + V‖_∞))`; zero speeds impose no bound.
pub fn cfl_dt(state: &impl SignalSpeed, grid: &Grid, cfl_safety: f64, cap: f64) -> f64 {
    let (adv, elastic) = state.signal_speeds();
    let speed = adv.max(elastic);
    if speed > 0.0 && speed.is_finite() {
        cap.min(cfl_safety * grid.dx() / speed)
    } else {
        cap
    }
}

struct Factors {
    dt: f64,
    vel_half: Vec<f64>,
    vel_full: Vec<f64>,
    other: Option<(Vec<f64>, Vec<f64>)>,
}

impl Factors {
    fn new(grid: &Grid, mu: f64, nu_h: f64, dt: f64) -> Self {
        let k2: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.kd(i);
                a * a + b * b
            })
            .collect();
        let expo = |c: f64, p: i32, h: f64| -> Vec<f64> {
            k2.iter().map(|k| (-c * k.powi(p) * h).exp()).collect()
        };
        Factors {
            dt,
            vel_half: expo(mu, 1, 0.5 * dt),
            vel_full: expo(mu, 1, dt),
            other: (nu_h > 0.0).then(|| (expo(nu_h, 2, 0.5 * dt), expo(nu_h, 2, dt))),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Span {
    Half,
    Full,
}

/// Time stepper bound to one model and scheme.
pub struct Integrator<D: Dynamics> {
    model: D,
    scheme: SchemeSpec,
    factors: Option<Factors>,
    steps_taken: usize,
}

impl<D: Dynamics> Integrator<D>
where
    D::State: SignalSpeed,
{
    pub fn new(model: D, scheme: SchemeSpec) -> Self {
        Integrator {
            model,
            scheme,
            factors: None,
            steps_taken: 0,
        }
    }

    pub fn model(&self) -> &D {
        &self.model
    }

    pub fn scheme(&self) -> &SchemeSpec {
        &self.scheme
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    fn factors(&mut self, grid: &Grid, dt: f64) -> &Factors {
        let stale = self.factors.as_ref().is_none_or(|f| f.dt != dt);
        if stale {
            self.factors = Some(Factors::new(
                grid,
                self.model.viscosity(),
                self.scheme.hyperviscosity,
                dt,
            ));
        }
        self.factors.as_ref().unwrap()
    }

    /// Applies the integrating factor over `span` (or none) and re-projects
    /// the velocity.
    fn propagate(&mut self, y: &D::State, dt: f64, span: Option<Span>) -> D::State {
        let grid = y.grid().clone();
        let nvel = y.velocity_fields();
        let factors = span.map(|s| {
            let f = self.factors(&grid, dt);
            let pick = |pair: (&Vec<f64>, &Vec<f64>)| {
                if s == Span::Half {
                    pair.0.clone()
                } else {
                    pair.1.clone()
                }
            };
            (
                pick((&f.vel_half, &f.vel_full)),
                f.other.as_ref().map(|(h, full)| pick((h, full))),
            )
        });
        let mut out = y.clone();
        let fields = out.fields_mut();
        let mut fields = fields.into_iter();
        if nvel == 2 {
            let a = fields.next().unwrap();
            let b = fields.next().unwrap();
            let mut sa = a.spectrum();
            let mut sb = b.spectrum();
            if let Some((vel, _)) = &factors {
                scale_modes(&mut sa, vel);
                scale_modes(&mut sb, vel);
            }
            project_spectra(&mut sa, &mut sb);
            *a = sa.to_field();
            *b = sb.to_field();
        }
        if let Some((_, Some(other))) = &factors {
            for f in fields {
                let mut s = f.spectrum();
                scale_modes(&mut s, other);
                *f = s.to_field();
            }
        }
        out
    }

    fn rhs(&self, y: &D::State, explicit_viscosity: bool) -> Result<D::State> {
        self.model.rhs(y, explicit_viscosity)
    }

    fn combine(a: &D::State, terms: &[(f64, &D::State)]) -> D::State {
        let mut out = a.clone();
        for (c, t) in terms {
            out.axpy(*c, t);
        }
        out
    }

    /// One step of size `dt`.
    pub fn step(&mut self, y: &D::State, dt: f64) -> Result<D::State> {
        let out = match self.scheme.kind {
            SchemeKind::Rk4Explicit => self.step_rk4(y, dt)?,
            SchemeKind::IfRk4 => self.step_if_rk4(y, dt)?,
        };
        self.steps_taken += 1;
        if let Some(name) = out.first_non_finite() {
            return Err(Error::Unstable {
                step: self.steps_taken,
                reason: format!("non-finite values in {name}"),
            });
        }
        Ok(out)
    }

    fn step_rk4(&mut self, y: &D::State, dt: f64) -> Result<D::State> {
        let k1 = self.rhs(y, true)?;
        let ya = self.propagate(&Self::combine(y, &[(0.5 * dt, &k1)]), dt, None);
        let k2 = self.rhs(&ya, true)?;
        let yb = self.propagate(&Self::combine(y, &[(0.5 * dt, &k2)]), dt, None);
        let k3 = self.rhs(&yb, true)?;
        let yc = self.propagate(&Self::combine(y, &[(dt, &k3)]), dt, None);
        let k4 = self.rhs(&yc, true)?;
        let out = Self::combine(
            y,
            &[(dt / 6.0, &k1), (dt / 3.0, &k2), (dt / 3.0, &k3), (dt / 6.0, &k4)],
        );
        Ok(self.propagate(&out, dt, None))
    }

    fn step_if_rk4(&mut self, y: &D::State, dt: f64) -> Result<D::State> {
        let half = Some(Span::Half);
        let full = Some(Span::Full);
        let k1 = self.rhs(y, false)?;
        let ya = self.propagate(&Self::combine(y, &[(0.5 * dt, &k1)]), dt, half);
        let k2 = self.rhs(&ya, false)?;
        let eh_y = self.propagate(y, dt, half);
        let yb = self.propagate(&Self::combine(&eh_y, &[(0.5 * dt, &k2)]), dt, None);
        let k3 = self.rhs(&yb, false)?;
        let ey = self.propagate(y, dt, full);
        let eh_k3 = self.propagate(&k3, dt, half);
        let yc = self.propagate(&Self::combine(&ey, &[(dt, &eh_k3)]), dt, None);
        let k4 = self.rhs(&yc, false)?;
        let ek1 = self.propagate(&k1, dt, full);
        let mid = self.propagate(&Self::combine(&k2, &[(1.0, &k3)]), dt, half);
        let out = Self::combine(&ey, &[(dt / 6.0, &ek1), (dt / 3.0, &mid), (dt / 6.0, &k4)]);
        Ok(self.propagate(&out, dt, None))
    }

    /// Advances over `interval`, in steps of at most the configured `dt`. With
    /// `adaptive` the steps also respect the CFL bound; otherwise a Courant
    /// number above one is an error.
    pub fn advance(&mut self, y: &D::State, interval: f64) -> Result<D::State> {
        let grid = y.grid().clone();
        let cap = self.scheme.dt;
        let bound = cfl_dt(y, &grid, self.scheme.cfl_safety, cap);
        let limit = if self.scheme.adaptive {
            bound
        } else {
            let hard = cfl_dt(y, &grid, 1.0, f64::INFINITY);
            if cap > hard {
                return Err(Error::Cfl(format!(
                    "dt {cap:e} exceeds the stability bound {hard:e} at step {}",
                    self.steps_taken
                )));
            }
            cap
        };
        let m = (interval / limit * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = interval / m as f64;
        let mut cur = self.step(y, h)?;
        for _ in 1..m {
            cur = self.step(&cur, h)?;
        }
        Ok(cur)
    }

    /// Takes `steps` steps of the configured `dt`, calling `observe(k, t, y)`
    /// at `k = 0` and after every step with `t = k·dt`.
    pub fn integrate(
        &mut self,
        y0: D::State,
        steps: usize,
        mut observe: impl FnMut(usize, f64, &D::State) -> Result<()>,
    ) -> Result<D::State> {
        let dt = self.scheme.dt;
        observe(0, 0.0, &y0)?;
        let mut y = y0;
        for k in 1..=steps {
            y = self.advance(&y, dt)?;
            observe(k, k as f64 * dt, &y)?;
        }
        Ok(y)
    }
}

fn scale_modes(s: &mut Spectrum, factor: &[f64]) {
    for (c, f) in s.coeffs_mut().iter_mut().zip(factor) {
        *c *= *f;
    }
}

/// Number of steps of size `dt` covering `t_final`, rejecting horizons that
/// are not an integer multiple of `dt`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(Error::InvalidConfig(format!(
            "t_final {t_final} is not a multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Convenience for tests and presets: integrate `y0` for `steps` steps and
/// return every state at `k·stride`.
pub fn sample_trajectory<D: Dynamics>(
    integrator: &mut Integrator<D>,
    y0: D::State,
    steps: usize,
    stride: usize,
) -> Result<Vec<(f64, D::State)>>
where
    D::State: SignalSpeed,
{
    let mut out = Vec::new();
    let stride = stride.max(1);
    integrator.integrate(y0, steps, |k, t, y| {
        if k % stride == 0 {
            out.push((t, y.clone()));
        }
        Ok(())
    })?;
    Ok(out)
}
