//! Energies, Sobolev norms, the auxiliary velocity `U`, balance checks and
//! the boundedness/dissipation certificate.

use crate::error::{Error, Result};
use crate::field::{GridField, ScalarField, SymTensorField, VectorField};
use crate::grid::Axis;
use crate::models::{
    balance_terms, constraint_residuals, ConstraintResiduals, Observation, PressureMode,
    StrainState,
};
use crate::spectral::{div_sym, inv_laplacian, laplacian, sobolev_norm_sq};

/// `(E_basic, E_alt)` with `E_basic = ∫ |u|² + |V|² + 2 tr V` and
/// `E_alt = ∫ |u|² + (V₁₁ − V₂₂)² + (V₁₂ + V₂₁)²`.
pub fn basic_energy(s: &StrainState) -> (f64, f64) {
    let g = s.u.v1.grid();
    let (mut basic, mut alt) = (0.0, 0.0);
    for i in 0..g.len() {
        let [a, b] = s.u.at(i);
        let v = s.v.at(i);
        let u2 = a * a + b * b;
        basic += u2 + v.dot(&v) + 2.0 * v.trace();
        let d = v.a11 - v.a22;
        let o = v.a12 + v.a21;
        alt += u2 + d * d + o * o;
    }
    let w = g.dx() * g.dx();
    (basic * w, alt * w)
}

/// `U = u + 2μ⁻¹Δ⁻¹∇·V`.
pub fn auxiliary_u(s: &StrainState, mu: f64) -> VectorField {
    let d = div_sym(&s.v);
    let c = 2.0 / mu;
    VectorField::new(
        s.u.v1.add(&inv_laplacian(&d.v1).field.scaled(c)),
        s.u.v2.add(&inv_laplacian(&d.v2).field.scaled(c)),
    )
}

/// `ΔU = Δu + 2μ⁻¹∇·V`.
pub fn delta_auxiliary_u(s: &StrainState, mu: f64) -> VectorField {
    let d = div_sym(&s.v);
    let c = 2.0 / mu;
    VectorField::new(
        laplacian(&s.u.v1).add(&d.v1.scaled(c)),
        laplacian(&s.u.v2).add(&d.v2.scaled(c)),
    )
}

/// Instantaneous dissipation integrands `‖∇u‖²_{H²}`, `‖ΔU‖²_{H¹}` and
/// `‖∇·V‖²_{H¹}`, evaluated entirely in Fourier space.
pub fn dissipation_integrands(s: &StrainState, mu: f64) -> [f64; 3] {
    let u = [s.u.v1.spectrum(), s.u.v2.spectrum()];
    let v = [s.v.s11.spectrum(), s.v.s12.spectrum(), s.v.s22.spectrum()];
    let grad_h2: f64 = u
        .iter()
        .map(|c| c.deriv(Axis::X1).sobolev_sq(2) + c.deriv(Axis::X2).sobolev_sq(2))
        .sum();
    let d = [
        v[0].deriv(Axis::X1).plus(1.0, &v[1].deriv(Axis::X2)),
        v[1].deriv(Axis::X1).plus(1.0, &v[2].deriv(Axis::X2)),
    ];
    let mut delta_u_h1 = 0.0;
    let mut divv_h1 = 0.0;
    for c in 0..2 {
        delta_u_h1 += u[c].laplacian().plus(2.0 / mu, &d[c]).sobolev_sq(1);
        divv_h1 += d[c].sobolev_sq(1);
    }
    [grad_h2, delta_u_h1, divv_h1]
}

/// Running trapezoid integrals of the dissipation integrands.
#[derive(Clone, Debug, Default)]
pub struct DissipationAccumulator {
    last: Option<(f64, [f64; 3])>,
    total: [f64; 3],
}

impl DissipationAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, values: [f64; 3]) {
        if let Some((t0, v0)) = self.last {
            let h = t - t0;
            for k in 0..3 {
                self.total[k] += 0.5 * h * (v0[k] + values[k]);
            }
        }
        self.last = Some((t, values));
    }

    pub fn totals(&self) -> [f64; 3] {
        self.total
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_basic: f64,
    pub e_alt: f64,
    pub gradu_l2sq: f64,
    pub h2_u: f64,
    pub h2_v: f64,
    pub delta_u_l2sq: f64,
    pub residuals: ConstraintResiduals,
    /// `∫‖∇u‖²_{H²}`, `∫‖ΔU‖²_{H¹}`, `∫‖∇·V‖²_{H¹}` from 0 to `t`.
    pub dissip_accum: [f64; 3],
}

/// Full record for an observed state.
pub fn record(
    obs: &Observation,
    t: f64,
    mu: f64,
    acc: &DissipationAccumulator,
) -> Result<DiagnosticsRecord> {
    let s = obs.strain();
    let (e_basic, e_alt) = basic_energy(&s);
    let gradu_l2sq: f64 = s
        .u
        .components()
        .iter()
        .map(|c| {
            let sp = c.spectrum();
            sp.deriv(Axis::X1).sobolev_sq(0) + sp.deriv(Axis::X2).sobolev_sq(0)
        })
        .sum();
    Ok(DiagnosticsRecord {
        t,
        e_basic,
        e_alt,
        gradu_l2sq,
        h2_u: sobolev_norm_sq(&s.u, 2),
        h2_v: sobolev_norm_sq(&s.v, 2),
        delta_u_l2sq: delta_auxiliary_u(&s, mu).l2_sq(),
        residuals: constraint_residuals(obs)?,
        dissip_accum: acc.totals(),
    })
}

fn check_uniform(ts: &[f64]) -> Result<f64> {
    if ts.len() < 2 {
        return Err(Error::InvalidInput("need at least two records".into()));
    }
    let h = ts[1] - ts[0];
    if !(h > 0.0) {
        return Err(Error::InvalidInput("records must advance in time".into()));
    }
    for w in ts.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::InvalidInput("records are not uniformly spaced".into()));
        }
    }
    Ok(h)
}

/// `∫₀^{t_k} g` at every sample, by composite Simpson with a 3/8 panel on an
/// odd tail. The first interval alone uses the cubic through the first four
/// samples, so every entry is exact for cubics once four samples exist.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let simpson = |a: usize, b: usize| -> f64 {
        (a..b)
            .step_by(2)
            .map(|i| h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]))
            .sum()
    };
    (0..values.len())
        .map(|k| match k {
            0 => 0.0,
            1 => match values {
                [a, b, c, d, ..] => h / 24.0 * (9.0 * a + 19.0 * b - 5.0 * c + d),
                [a, b, c] => h / 12.0 * (5.0 * a + 8.0 * b - c),
                [a, b, ..] => 0.5 * h * (a + b),
                _ => unreachable!(),
            },
            k if k % 2 == 0 => simpson(0, k),
            k => {
                let head = simpson(0, k - 3);
                let tail = 3.0 * h / 8.0
                    * (values[k - 3] + 3.0 * values[k - 2] + 3.0 * values[k - 1] + values[k]);
                head + tail
            }
        })
        .collect()
}

/// `max_t |½(E(t) − E(0)) + μ∫₀ᵗ‖∇u‖²| / E(0)` over a uniformly spaced series.
pub fn energy_law_residual(series: &[DiagnosticsRecord], mu: f64) -> Result<f64> {
    let ts: Vec<f64> = series.iter().map(|r| r.t).collect();
    let h = check_uniform(&ts)?;
    let grads: Vec<f64> = series.iter().map(|r| r.gradu_l2sq).collect();
    let integral = cumulative_simpson(&grads, h);
    let e0 = series[0].e_basic;
    let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
    Ok(series
        .iter()
        .zip(&integral)
        .map(|(r, i)| (0.5 * (r.e_basic - e0) + mu * i).abs() / scale)
        .fold(0.0, f64::max))
}

/// Whether `E_basic` never grows by more than `slack · |E_basic(0)|` between
/// consecutive records.
pub fn energy_non_increasing(series: &[DiagnosticsRecord], slack: f64) -> bool {
    let tol = slack * series.first().map_or(0.0, |r| r.e_basic.abs());
    series
        .windows(2)
        .all(|w| w[1].e_basic <= w[0].e_basic + tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceReport {
    /// `d/dt ½‖ΔU‖² + μ‖∇ΔU‖²`
    pub lhs: f64,
    /// `(Δp, ∇·ΔU) + μ⁻¹(Δu, ΔU) + (f, ΔU)`
    pub rhs: f64,
    pub residual: f64,
    pub dt_used: f64,
    pub pressure: PressureMode,
    pub transport_coefficient: f64,
}

/// Balance of `½‖ΔU‖²` over three consecutive states `(t, s)`. The time
/// derivative is the centered difference across the window and the other
/// terms are Simpson averages over it, so the check has no access to the
/// integrator's stages.
pub fn u_balance(
    window: &[(f64, StrainState); 3],
    mu: f64,
    pressure: PressureMode,
    transport_coefficient: f64,
) -> Result<BalanceReport> {
    let h = check_uniform(&[window[0].0, window[1].0, window[2].0])?;
    let mut terms = Vec::with_capacity(3);
    for (_, s) in window {
        terms.push(balance_terms(s, mu, pressure, transport_coefficient)?);
    }
    let avg = |f: &dyn Fn(usize) -> f64| (f(0) + 4.0 * f(1) + f(2)) / 6.0;
    let lhs = (terms[2].half_delta_u_sq - terms[0].half_delta_u_sq) / (2.0 * h)
        + avg(&|i| terms[i].dissipation);
    let rhs = avg(&|i| terms[i].source());
    Ok(BalanceReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        dt_used: h,
        pressure,
        transport_coefficient,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremCertificate {
    /// `sup_t (‖u‖²_{H²} + ‖V‖²_{H²})` over its initial value.
    pub rho_sup: f64,
    /// Accumulated dissipation integrals over the initial `H²` size.
    pub rho_dis: [f64; 3],
    pub energy_non_increasing: bool,
}

pub fn theorem_certificate(series: &[DiagnosticsRecord], initial: &DiagnosticsRecord) -> TheoremCertificate {
    let size = |r: &DiagnosticsRecord| r.h2_u + r.h2_v;
    let base = size(initial);
    let sup = series.iter().map(size).fold(base, f64::max);
    let ratio = |x: f64| {
        if base > 0.0 {
            x / base
        } else if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let rho_sup = if base == 0.0 && sup == 0.0 { 1.0 } else { ratio(sup) };
    let last = series.last().unwrap_or(initial);
    TheoremCertificate {
        rho_sup,
        rho_dis: last.dissip_accum.map(ratio),
        energy_non_increasing: energy_non_increasing(series, 1e-10),
    }
}

/// `‖a − b‖_{L²}` of two scalar fields.
pub fn l2_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).l2_sq().sqrt()
}

/// `‖V‖_{H¹}` (Frobenius).
pub fn h1_norm(v: &SymTensorField) -> f64 {
    sobolev_norm_sq(v, 1).sqrt()
}
