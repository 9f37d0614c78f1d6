//! Semi-discrete right-hand sides of the deformation-tensor and
//! rotation-strain formulations, pressure recovery, and identity residuals.
//!
//! Every quadratic or rational product is evaluated pointwise on the grid and
//! then truncated with the 2/3 rule. Momentum tendencies are Leray projected,
//! so pressure never appears as a prognostic variable.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{GridField, ScalarField, SymTensorField, Tensor2Field, VectorField};
use crate::grid::{Axis, Grid};
use crate::init::polar_fields;
use crate::spectral::{project_spectra, Spectrum};
use crate::tensor::{self, gamma_raw, Mat2, A, EPS_SPD, EPS_TR};

/// An evolvable collection of scalar fields. The first
/// [`State::velocity_fields`] fields are the velocity components, which are
/// the only diffused and projected fields.
pub trait State: Clone {
    fn fields(&self) -> Vec<&ScalarField>;
    fn fields_mut(&mut self) -> Vec<&mut ScalarField>;
    fn field_names(&self) -> Vec<&'static str>;

    fn velocity_fields(&self) -> usize {
        2
    }

    fn grid(&self) -> &Arc<Grid> {
        self.fields()[0].grid()
    }

    /// `self += a * other`
    fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.fields_mut().into_iter().zip(other.fields()) {
            x.axpy(a, y);
        }
    }

    fn scale(&mut self, a: f64) {
        for x in self.fields_mut() {
            x.scale(a);
        }
    }

    /// Name of the first field holding a non-finite value.
    fn first_non_finite(&self) -> Option<&'static str> {
        self.fields()
            .iter()
            .zip(self.field_names())
            .find(|(f, _)| !f.is_finite())
            .map(|(_, name)| name)
    }
}

/// Semi-discrete dynamics `dy/dt = rhs(y)`.
pub trait Dynamics {
    type State: State;

    /// Viscosity acting on the velocity fields.
    fn viscosity(&self) -> f64;

    /// Time derivative of `s`. With `explicit_viscosity == false` the viscous
    /// term is omitted so that an integrating factor can treat it exactly.
    fn rhs(&self, s: &Self::State, explicit_viscosity: bool) -> Result<Self::State>;
}

#[derive(Clone, Debug)]
pub struct OldroydState {
    pub u: VectorField,
    pub f: Tensor2Field,
}

#[derive(Clone, Debug)]
pub struct StrainState {
    pub u: VectorField,
    pub v: SymTensorField,
}

#[derive(Clone, Debug)]
pub struct RotStrainState {
    pub u: VectorField,
    pub v: SymTensorField,
    /// Unwrapped rotation angle (not reduced modulo 2π).
    pub theta: ScalarField,
}

impl RotStrainState {
    pub fn strain(&self) -> StrainState {
        StrainState {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

impl State for OldroydState {
    fn fields(&self) -> Vec<&ScalarField> {
        let mut v = self.u.components();
        v.extend(self.f.components());
        v
    }
    fn fields_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v = self.u.components_mut();
        v.extend(self.f.components_mut());
        v
    }
    fn field_names(&self) -> Vec<&'static str> {
        vec!["u1", "u2", "F11", "F12", "F21", "F22"]
    }
}

impl State for StrainState {
    fn fields(&self) -> Vec<&ScalarField> {
        let mut v = self.u.components();
        v.extend(self.v.components());
        v
    }
    fn fields_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v = self.u.components_mut();
        v.extend(self.v.components_mut());
        v
    }
    fn field_names(&self) -> Vec<&'static str> {
        vec!["u1", "u2", "V11", "V12", "V22"]
    }
}

impl State for RotStrainState {
    fn fields(&self) -> Vec<&ScalarField> {
        let mut v = self.u.components();
        v.extend(self.v.components());
        v.push(&self.theta);
        v
    }
    fn fields_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v = self.u.components_mut();
        v.extend(self.v.components_mut());
        v.push(&mut self.theta);
        v
    }
    fn field_names(&self) -> Vec<&'static str> {
        vec!["u1", "u2", "V11", "V12", "V22", "theta"]
    }
}

/// Deformation tensor alone, transported by a frozen velocity.
#[derive(Clone, Debug)]
pub struct DeformationState {
    pub f: Tensor2Field,
}

impl State for DeformationState {
    fn fields(&self) -> Vec<&ScalarField> {
        self.f.components()
    }
    fn fields_mut(&mut self) -> Vec<&mut ScalarField> {
        self.f.components_mut()
    }
    fn field_names(&self) -> Vec<&'static str> {
        vec!["F11", "F12", "F21", "F22"]
    }
    fn velocity_fields(&self) -> usize {
        0
    }
}

fn grad_pair(s: &Spectrum) -> (ScalarField, ScalarField) {
    (s.deriv(Axis::X1).to_field(), s.deriv(Axis::X2).to_field())
}

fn forward_dealiased(g: &Arc<Grid>, data: Vec<f64>) -> Spectrum {
    ScalarField::from_vec_unchecked(g, data)
        .spectrum()
        .dealiased()
}

fn check_finite(name: &str, fields: &[&ScalarField]) -> Result<()> {
    if fields.iter().all(|f| f.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: name.to_string(),
        })
    }
}

/// Row divergence of a symmetric tensor given by its three spectra.
fn div_sym_spectra(a: &Spectrum, b: &Spectrum, c: &Spectrum) -> [Spectrum; 2] {
    [
        a.deriv(Axis::X1).plus(1.0, &b.deriv(Axis::X2)),
        b.deriv(Axis::X1).plus(1.0, &c.deriv(Axis::X2)),
    ]
}

/// `∇·∇·T` of a symmetric tensor.
fn div_div_sym(a: &Spectrum, b: &Spectrum, c: &Spectrum) -> Spectrum {
    let [d1, d2] = div_sym_spectra(a, b, c);
    d1.deriv(Axis::X1).plus(1.0, &d2.deriv(Axis::X2))
}

fn div_vec(s1: &Spectrum, s2: &Spectrum) -> Spectrum {
    s1.deriv(Axis::X1).plus(1.0, &s2.deriv(Axis::X2))
}

/// The dealiased products shared by the strain right-hand side, the pressure
/// and the forcing of the `ΔU` equation.
struct StrainTerms {
    u_hat: [Spectrum; 2],
    v_hat: [Spectrum; 3],
    /// `D(u·∇u)`
    adv_u: [Spectrum; 2],
    /// `D(V Vᵀ)` as `(11, 12, 22)`
    vsq: [Spectrum; 3],
    /// `D(u·∇V)`
    adv_v: [Spectrum; 3],
    /// `D(½(∇u V + V ∇uᵀ) + ½(ω₁₂ − γ)(VA − AV))`
    coupling: [Spectrum; 3],
    /// `D(γ − u·∇θ)` when θ is present.
    theta_terms: Option<Spectrum>,
}

impl StrainTerms {
    fn compute(u: &VectorField, v: &SymTensorField, theta: Option<&ScalarField>) -> Result<Self> {
        let g = u.v1.grid().clone();
        let n = g.len();
        let u_hat = [u.v1.spectrum(), u.v2.spectrum()];
        let v_hat = [v.s11.spectrum(), v.s12.spectrum(), v.s22.spectrum()];
        let (g11, g12) = grad_pair(&u_hat[0]);
        let (g21, g22) = grad_pair(&u_hat[1]);
        let (a1, a2) = grad_pair(&v_hat[0]);
        let (b1, b2) = grad_pair(&v_hat[1]);
        let (c1, c2) = grad_pair(&v_hat[2]);
        let theta_grad = theta.map(|t| grad_pair(&t.spectrum()));

        let mut adv = [vec![0.0; n], vec![0.0; n]];
        let mut vsq = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut adv_v = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut coupling = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut theta_nl = theta.map(|_| vec![0.0; n]);

        let (u1, u2) = (u.v1.data(), u.v2.data());
        let (va, vb, vc) = (v.s11.data(), v.s12.data(), v.s22.data());
        for i in 0..n {
            let (x, y) = (u1[i], u2[i]);
            let gm = Mat2::new(g11.data()[i], g12.data()[i], g21.data()[i], g22.data()[i]);
            let vm = Mat2::new(va[i], vb[i], vb[i], vc[i]);
            adv[0][i] = x * gm.a11 + y * gm.a12;
            adv[1][i] = x * gm.a21 + y * gm.a22;
            vsq[0][i] = va[i] * va[i] + vb[i] * vb[i];
            vsq[1][i] = vb[i] * (va[i] + vc[i]);
            vsq[2][i] = vb[i] * vb[i] + vc[i] * vc[i];
            adv_v[0][i] = x * a1.data()[i] + y * a2.data()[i];
            adv_v[1][i] = x * b1.data()[i] + y * b2.data()[i];
            adv_v[2][i] = x * c1.data()[i] + y * c2.data()[i];

            let denom = 2.0 + vm.trace();
            if denom.abs() <= EPS_TR || !denom.is_finite() {
                return Err(Error::GammaSingular {
                    index: i,
                    value: denom,
                });
            }
            let gamma = gamma_raw(&gm, &vm);
            let omega12 = 0.5 * (gm.a12 - gm.a21);
            let gv = gm * vm;
            let comm = tensor::a_commutator(&vm);
            let w = 0.5 * (omega12 - gamma);
            coupling[0][i] = gv.a11 + w * comm.a11;
            coupling[1][i] = 0.5 * (gv.a12 + gv.a21) + w * comm.a12;
            coupling[2][i] = gv.a22 + w * comm.a22;

            if let (Some(out), Some((t1, t2))) = (theta_nl.as_mut(), theta_grad.as_ref()) {
                out[i] = gamma - (x * t1.data()[i] + y * t2.data()[i]);
            }
        }
        let [p, q] = adv;
        let [s0, s1, s2] = vsq;
        let [w0, w1, w2] = adv_v;
        let [n0, n1, n2] = coupling;
        Ok(StrainTerms {
            adv_u: [forward_dealiased(&g, p), forward_dealiased(&g, q)],
            vsq: [
                forward_dealiased(&g, s0),
                forward_dealiased(&g, s1),
                forward_dealiased(&g, s2),
            ],
            adv_v: [
                forward_dealiased(&g, w0),
                forward_dealiased(&g, w1),
                forward_dealiased(&g, w2),
            ],
            coupling: [
                forward_dealiased(&g, n0),
                forward_dealiased(&g, n1),
                forward_dealiased(&g, n2),
            ],
            theta_terms: theta_nl.map(|t| forward_dealiased(&g, t)),
            u_hat,
            v_hat,
        })
    }

    /// Momentum forcing before projection, without the viscous term:
    /// `−D(u·∇u) + ∇·D(VVᵀ) + 2∇·V`.
    fn momentum_forcing(&self) -> [Spectrum; 2] {
        let [e1, e2] = div_sym_spectra(&self.vsq[0], &self.vsq[1], &self.vsq[2]);
        let [d1, d2] = div_sym_spectra(&self.v_hat[0], &self.v_hat[1], &self.v_hat[2]);
        [
            e1.plus(2.0, &d1).plus(-1.0, &self.adv_u[0]),
            e2.plus(2.0, &d2).plus(-1.0, &self.adv_u[1]),
        ]
    }

    fn tendencies(&self, mu_explicit: f64) -> (VectorField, SymTensorField) {
        let [mut m1, mut m2] = self.momentum_forcing();
        if mu_explicit != 0.0 {
            m1.axpy(mu_explicit, &self.u_hat[0].laplacian());
            m2.axpy(mu_explicit, &self.u_hat[1].laplacian());
        }
        project_spectra(&mut m1, &mut m2);
        let du = VectorField::new(m1.to_field(), m2.to_field());

        // S(u) = ½(∇u + ∇uᵀ)
        let s11 = self.u_hat[0].deriv(Axis::X1);
        let s12 = self.u_hat[0]
            .deriv(Axis::X2)
            .plus(1.0, &self.u_hat[1].deriv(Axis::X1));
        let s22 = self.u_hat[1].deriv(Axis::X2);
        let dv = SymTensorField::new(
            s11.plus(1.0, &self.coupling[0])
                .plus(-1.0, &self.adv_v[0])
                .to_field(),
            self.coupling[1]
                .clone()
                .plus(0.5, &s12)
                .plus(-1.0, &self.adv_v[1])
                .to_field(),
            s22.plus(1.0, &self.coupling[2])
                .plus(-1.0, &self.adv_v[2])
                .to_field(),
        );
        (du, dv)
    }

    fn theta_tendency(&self) -> Option<ScalarField> {
        let nl = self.theta_terms.as_ref()?;
        // −ω₁₂ = −½(∂₂u₁ − ∂₁u₂)
        let omega = self.u_hat[0]
            .deriv(Axis::X2)
            .plus(-1.0, &self.u_hat[1].deriv(Axis::X1));
        Some(nl.clone().plus(-0.5, &omega).to_field())
    }
}

/// Right-hand side of the velocity/deformation-tensor system.
pub fn rhs_oldroyd(s: &OldroydState, mu: f64) -> Result<OldroydState> {
    let g = s.u.v1.grid().clone();
    let n = g.len();
    let u_hat = [s.u.v1.spectrum(), s.u.v2.spectrum()];
    let (g11, g12) = grad_pair(&u_hat[0]);
    let (g21, g22) = grad_pair(&u_hat[1]);
    let f_grads: Vec<(ScalarField, ScalarField)> = s
        .f
        .components()
        .iter()
        .map(|c| grad_pair(&c.spectrum()))
        .collect();

    let mut adv = [vec![0.0; n], vec![0.0; n]];
    let mut ff = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut df = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (u1, u2) = (s.u.v1.data(), s.u.v2.data());
    for i in 0..n {
        let (x, y) = (u1[i], u2[i]);
        let gm = Mat2::new(g11.data()[i], g12.data()[i], g21.data()[i], g22.data()[i]);
        let fm = s.f.at(i);
        adv[0][i] = x * gm.a11 + y * gm.a12;
        adv[1][i] = x * gm.a21 + y * gm.a22;
        let fft = fm * fm.transpose();
        ff[0][i] = fft.a11;
        ff[1][i] = 0.5 * (fft.a12 + fft.a21);
        ff[2][i] = fft.a22;
        let gf = gm * fm;
        let gf = [gf.a11, gf.a12, gf.a21, gf.a22];
        for (c, (d1, d2)) in f_grads.iter().enumerate() {
            df[c][i] = gf[c] - (x * d1.data()[i] + y * d2.data()[i]);
        }
    }
    let [p, q] = adv;
    let [s0, s1, s2] = ff;
    let [e1, e2] = div_sym_spectra(
        &forward_dealiased(&g, s0),
        &forward_dealiased(&g, s1),
        &forward_dealiased(&g, s2),
    );
    let mut m1 = e1.plus(-1.0, &forward_dealiased(&g, p));
    let mut m2 = e2.plus(-1.0, &forward_dealiased(&g, q));
    if mu != 0.0 {
        m1.axpy(mu, &u_hat[0].laplacian());
        m2.axpy(mu, &u_hat[1].laplacian());
    }
    project_spectra(&mut m1, &mut m2);
    let du = VectorField::new(m1.to_field(), m2.to_field());
    let [d11, d12, d21, d22] = df.map(|d| forward_dealiased(&g, d).to_field());
    let dfield = Tensor2Field::new(d11, d12, d21, d22);
    check_finite("du", &du.components())?;
    check_finite("dF", &dfield.components())?;
    Ok(OldroydState { u: du, f: dfield })
}

/// Right-hand side of the closed velocity/strain subsystem.
pub fn rhs_strain(s: &StrainState, mu: f64) -> Result<StrainState> {
    let terms = StrainTerms::compute(&s.u, &s.v, None)?;
    let (du, dv) = terms.tendencies(mu);
    check_finite("du", &du.components())?;
    check_finite("dV", &dv.components())?;
    Ok(StrainState { u: du, v: dv })
}

/// Right-hand side of the full rotation-strain system.
pub fn rhs_rotstrain(s: &RotStrainState, mu: f64) -> Result<RotStrainState> {
    let terms = StrainTerms::compute(&s.u, &s.v, Some(&s.theta))?;
    let (du, dv) = terms.tendencies(mu);
    let dtheta = terms.theta_tendency().expect("theta terms requested");
    check_finite("du", &du.components())?;
    check_finite("dV", &dv.components())?;
    check_finite("dtheta", &[&dtheta])?;
    Ok(RotStrainState {
        u: du,
        v: dv,
        theta: dtheta,
    })
}

/// Angle tendency `−u·∇θ − ω₁₂(u) + γ`.
pub fn rhs_theta(s: &RotStrainState) -> Result<ScalarField> {
    let terms = StrainTerms::compute(&s.u, &s.v, Some(&s.theta))?;
    let dtheta = terms.theta_tendency().expect("theta terms requested");
    check_finite("dtheta", &[&dtheta])?;
    Ok(dtheta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureMode {
    /// `Δp = ∇·(−u·∇u + ∇·(VVᵀ) + 2∇·V)`, the pressure the projection removes.
    Projection,
    /// `2∇·∇·V` replaced by `−2∇·[AV(I+V)⁻¹A∇·V]`.
    Structural,
}

impl std::fmt::Display for PressureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PressureMode::Projection => "projection",
            PressureMode::Structural => "structural",
        })
    }
}

/// `AV(I+V)⁻¹A∇·V` evaluated pointwise.
fn structural_flux(v: &SymTensorField, divv: &VectorField) -> Result<VectorField> {
    let g = v.s11.grid();
    let n = g.len();
    let (mut w1, mut w2) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let vm = v.at(i);
        let inv = tensor::inv_i_plus_v(&vm).map_err(|_| Error::Degenerate {
            what: "I + V is singular",
            det: (Mat2::identity() + vm).det(),
        })?;
        let w = (A * vm * inv * A).apply(divv.at(i));
        w1[i] = w[0];
        w2[i] = w[1];
    }
    Ok(VectorField::new(
        ScalarField::from_vec_unchecked(g, w1),
        ScalarField::from_vec_unchecked(g, w2),
    ))
}

fn div_v(v_hat: &[Spectrum; 3]) -> VectorField {
    let [d1, d2] = div_sym_spectra(&v_hat[0], &v_hat[1], &v_hat[2]);
    VectorField::new(d1.to_field(), d2.to_field())
}

fn pressure_from_terms(terms: &StrainTerms, v: &SymTensorField, mode: PressureMode) -> Result<Spectrum> {
    let rhs = match mode {
        PressureMode::Projection => {
            let [m1, m2] = terms.momentum_forcing();
            div_vec(&m1, &m2)
        }
        PressureMode::Structural => {
            let advection = div_vec(&terms.adv_u[0], &terms.adv_u[1]);
            let elastic = div_div_sym(&terms.vsq[0], &terms.vsq[1], &terms.vsq[2]);
            let w = structural_flux(v, &div_v(&terms.v_hat))?;
            let dw = div_vec(&w.v1.spectrum(), &w.v2.spectrum());
            elastic.plus(-1.0, &advection).plus(-2.0, &dw)
        }
    };
    Ok(rhs.inv_laplacian())
}

/// Mean-zero pressure of a strain state.
pub fn recover_pressure(s: &StrainState, mode: PressureMode) -> Result<ScalarField> {
    let terms = StrainTerms::compute(&s.u, &s.v, None)?;
    Ok(pressure_from_terms(&terms, &s.v, mode)?.to_field())
}

/// Coefficient of the transport commutator `∇·(u·∇V) − u·∇(∇·V)` in the
/// forcing of the `ΔU` equation, as obtained by differentiating
/// `ΔU = Δu + 2μ⁻¹∇·V` along the dynamics.
pub fn derived_transport_coefficient(mu: f64) -> f64 {
    2.0 / mu
}

/// Forcing `f` of `ΔU_t + u·∇ΔU + ∇Δp = μΔ²U + μ⁻¹Δu + f`.
pub fn assemble_f(s: &StrainState, mu: f64) -> Result<VectorField> {
    assemble_f_with_coefficient(s, mu, derived_transport_coefficient(mu))
}

/// [`assemble_f`] with an explicit transport-commutator coefficient, used to
/// compare candidate forms of the forcing.
pub fn assemble_f_with_coefficient(
    s: &StrainState,
    mu: f64,
    transport_coefficient: f64,
) -> Result<VectorField> {
    let terms = StrainTerms::compute(&s.u, &s.v, None)?;
    Ok(forcing_from_terms(&terms, &s.u, mu, transport_coefficient))
}

fn forcing_from_terms(terms: &StrainTerms, u: &VectorField, mu: f64, coeff: f64) -> VectorField {
    let g = u.v1.grid().clone();
    let n = g.len();
    let lap_u = [terms.u_hat[0].laplacian(), terms.u_hat[1].laplacian()];
    let dv = div_sym_spectra(&terms.v_hat[0], &terms.v_hat[1], &terms.v_hat[2]);
    let grads_lap: Vec<_> = lap_u.iter().map(grad_pair).collect();
    let grads_dv: Vec<_> = dv.iter().map(grad_pair).collect();
    let (u1, u2) = (u.v1.data(), u.v2.data());
    let advect = |grads: &[(ScalarField, ScalarField)], c: usize| -> Spectrum {
        let data = (0..n)
            .map(|i| u1[i] * grads[c].0.data()[i] + u2[i] * grads[c].1.data()[i])
            .collect();
        forward_dealiased(&g, data)
    };
    let adv_lap = [advect(&grads_lap, 0), advect(&grads_lap, 1)];
    let adv_dv = [advect(&grads_dv, 0), advect(&grads_dv, 1)];

    let transport = div_sym_spectra(&terms.adv_v[0], &terms.adv_v[1], &terms.adv_v[2]);
    let elastic = div_sym_spectra(&terms.vsq[0], &terms.vsq[1], &terms.vsq[2]);
    let coupling = div_sym_spectra(&terms.coupling[0], &terms.coupling[1], &terms.coupling[2]);

    let component = |c: usize| -> ScalarField {
        terms.adv_u[c]
            .laplacian()
            .plus(-1.0, &adv_lap[c])
            .apply_real(|_| -1.0)
            .plus(-coeff, &transport[c])
            .plus(coeff, &adv_dv[c])
            .plus(1.0, &elastic[c].laplacian())
            .plus(2.0 / mu, &coupling[c])
            .to_field()
    };
    VectorField::new(component(0), component(1))
}

/// Everything needed to evaluate the `ΔU` energy balance at one state.
#[derive(Clone, Copy, Debug)]
pub struct BalanceTerms {
    /// `½‖ΔU‖²`
    pub half_delta_u_sq: f64,
    /// `μ‖∇ΔU‖²`
    pub dissipation: f64,
    /// `(Δp, ∇·ΔU)`
    pub pressure: f64,
    /// `μ⁻¹(Δu, ΔU)`
    pub linear: f64,
    /// `(f, ΔU)`
    pub forcing: f64,
}

impl BalanceTerms {
    pub fn source(&self) -> f64 {
        self.pressure + self.linear + self.forcing
    }
}

/// Terms of the `ΔU` balance at a single strain state.
pub fn balance_terms(
    s: &StrainState,
    mu: f64,
    mode: PressureMode,
    transport_coefficient: f64,
) -> Result<BalanceTerms> {
    let terms = StrainTerms::compute(&s.u, &s.v, None)?;
    let p = pressure_from_terms(&terms, &s.v, mode)?;
    let f = forcing_from_terms(&terms, &s.u, mu, transport_coefficient);
    let dv = div_sym_spectra(&terms.v_hat[0], &terms.v_hat[1], &terms.v_hat[2]);
    let lap_u = [terms.u_hat[0].laplacian(), terms.u_hat[1].laplacian()];
    // ΔU = Δu + 2μ⁻¹∇·V
    let du = [
        lap_u[0].clone().plus(2.0 / mu, &dv[0]),
        lap_u[1].clone().plus(2.0 / mu, &dv[1]),
    ];
    let grad_sq: f64 = du
        .iter()
        .map(|c| {
            let d1 = c.deriv(Axis::X1);
            let d2 = c.deriv(Axis::X2);
            d1.inner(&d1) + d2.inner(&d2)
        })
        .sum();
    let div_du = div_vec(&du[0], &du[1]);
    let f_hat = [f.v1.spectrum(), f.v2.spectrum()];
    Ok(BalanceTerms {
        half_delta_u_sq: 0.5 * (du[0].inner(&du[0]) + du[1].inner(&du[1])),
        dissipation: mu * grad_sq,
        pressure: p.laplacian().inner(&div_du),
        linear: (lap_u[0].inner(&du[0]) + lap_u[1].inner(&du[1])) / mu,
        forcing: f_hat[0].inner(&du[0]) + f_hat[1].inner(&du[1]),
    })
}

/// Residual norms of the intrinsic constraints. Entries that need a field the
/// formulation does not carry are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstraintResiduals {
    /// `‖det(I+V) − 1‖_∞`
    pub det_ipv: f64,
    /// `‖tr V + det V‖_∞`
    pub trdet: f64,
    /// `‖∇·V − A(I+V)∇θ‖_{L²}`
    pub compat: Option<f64>,
    /// `‖∇·∇·V + ∇·[AV(I+V)⁻¹A∇·V]‖_{L²}`
    pub newid: f64,
    /// `‖det F − 1‖_∞`
    pub det_f: Option<f64>,
    /// `‖∇·Fᵀ‖_{L²}`
    pub div_ft: Option<f64>,
}

/// Physical fields common to all formulations, for diagnostics.
#[derive(Clone, Debug)]
pub struct Observation {
    pub u: VectorField,
    pub v: SymTensorField,
    pub theta: Option<ScalarField>,
    pub f: Option<Tensor2Field>,
}

impl Observation {
    pub fn strain(&self) -> StrainState {
        StrainState {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

pub trait Observable {
    fn observe(&self) -> Result<Observation>;

    /// Velocity and strain only, skipping the angle.
    fn strain_view(&self) -> Result<StrainState> {
        Ok(self.observe()?.strain())
    }
}

impl Observable for StrainState {
    fn observe(&self) -> Result<Observation> {
        Ok(Observation {
            u: self.u.clone(),
            v: self.v.clone(),
            theta: None,
            f: None,
        })
    }
}

impl Observable for RotStrainState {
    fn strain_view(&self) -> Result<StrainState> {
        Ok(self.strain())
    }

    fn observe(&self) -> Result<Observation> {
        let g = self.u.v1.grid();
        let mut mats = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            mats.push(tensor::compose_from_strain_angle(&self.v.at(i), self.theta.data()[i])?);
        }
        Ok(Observation {
            u: self.u.clone(),
            v: self.v.clone(),
            theta: Some(self.theta.clone()),
            f: Some(Tensor2Field::from_points(g, |i| mats[i])),
        })
    }
}

impl Observable for OldroydState {
    fn strain_view(&self) -> Result<StrainState> {
        let g = self.f.grid().clone();
        let n = g.len();
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let p = tensor::polar_decompose_left(&self.f.at(i))?;
            a[i] = p.v.a11;
            b[i] = p.v.a12;
            c[i] = p.v.a22;
        }
        Ok(StrainState {
            u: self.u.clone(),
            v: SymTensorField::new(
                ScalarField::from_vec_unchecked(&g, a),
                ScalarField::from_vec_unchecked(&g, b),
                ScalarField::from_vec_unchecked(&g, c),
            ),
        })
    }

    fn observe(&self) -> Result<Observation> {
        let (v, theta) = polar_fields(&self.f)?;
        Ok(Observation {
            u: self.u.clone(),
            v,
            theta: Some(theta),
            f: Some(self.f.clone()),
        })
    }
}

/// Residuals of the constraints carried by an observation.
pub fn constraint_residuals(obs: &Observation) -> Result<ConstraintResiduals> {
    let v = &obs.v;
    let g = v.s11.grid().clone();
    let n = g.len();
    let mut det_ipv: f64 = 0.0;
    let mut trdet: f64 = 0.0;
    for i in 0..n {
        let m = v.at(i);
        det_ipv = det_ipv.max(((Mat2::identity() + m).det() - 1.0).abs());
        trdet = trdet.max((m.trace() + m.det()).abs());
    }
    let v_hat = [v.s11.spectrum(), v.s12.spectrum(), v.s22.spectrum()];
    let divv = div_v(&v_hat);

    let w = structural_flux(v, &divv)?;
    let newid_hat = div_div_sym(&v_hat[0], &v_hat[1], &v_hat[2])
        .plus(1.0, &div_vec(&w.v1.spectrum(), &w.v2.spectrum()));
    let newid = newid_hat.inner(&newid_hat).max(0.0).sqrt();

    let compat = obs.theta.as_ref().map(|theta| {
        let (t1, t2) = grad_pair(&theta.spectrum());
        let mut r1 = vec![0.0; n];
        let mut r2 = vec![0.0; n];
        for i in 0..n {
            let rot = A * (Mat2::identity() + v.at(i));
            let a = rot.apply([t1.data()[i], t2.data()[i]]);
            r1[i] = divv.v1.data()[i] - a[0];
            r2[i] = divv.v2.data()[i] - a[1];
        }
        let r = VectorField::new(
            ScalarField::from_vec_unchecked(&g, r1),
            ScalarField::from_vec_unchecked(&g, r2),
        );
        r.l2_sq().sqrt()
    });

    let (det_f, div_ft) = match obs.f.as_ref() {
        Some(f) => {
            let det = f.determinant().map(|d| d - 1.0).max_abs();
            let d = crate::spectral::div_transpose(f);
            (Some(det), Some(d.l2_sq().sqrt()))
        }
        None => (None, None),
    };
    Ok(ConstraintResiduals {
        det_ipv,
        trdet,
        compat,
        newid,
        det_f,
        div_ft,
    })
}

/// `(∇⊥_1, ∇⊥_2) = (−∂₂, ∂₁)` applied to a spectrum.
fn perp(s: &Spectrum, component: usize) -> Spectrum {
    match component {
        0 => s.deriv(Axis::X2).apply_real(|_| -1.0),
        _ => s.deriv(Axis::X1),
    }
}

fn partial(s: &Spectrum, component: usize) -> Spectrum {
    s.deriv(if component == 0 { Axis::X1 } else { Axis::X2 })
}

/// `L²` norm of `ΔV − ∇∇·V − (∇⊥)²tr V + ∇⊥(A∇·V)` with
/// `(∇∇·V)_ij = ∂_j(∇·V)_i`, `((∇⊥)²φ)_ij = ∇⊥_i∇⊥_j φ` and
/// `(∇⊥w)_ij = ∇⊥_j w_i`.
pub fn hodge_residual(v: &SymTensorField) -> f64 {
    let vh = [v.s11.spectrum(), v.s12.spectrum(), v.s22.spectrum()];
    let entries = [[&vh[0], &vh[1]], [&vh[1], &vh[2]]];
    let d = div_sym_spectra(&vh[0], &vh[1], &vh[2]);
    let tr = vh[0].clone().plus(1.0, &vh[2]);
    // A∇·V = (−d₂, d₁)
    let ad = [d[1].apply_real(|_| -1.0), d[0].clone()];
    let mut total = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let r = entries[i][j]
                .laplacian()
                .plus(-1.0, &partial(&d[i], j))
                .plus(-1.0, &perp(&perp(&tr, j), i))
                .plus(1.0, &perp(&ad[i], j));
            total += r.inner(&r);
        }
    }
    total.max(0.0).sqrt()
}

/// Velocity/deformation-tensor dynamics.
#[derive(Clone, Copy, Debug)]
pub struct OldroydModel {
    pub mu: f64,
}

/// Closed velocity/strain subsystem.
#[derive(Clone, Copy, Debug)]
pub struct StrainModel {
    pub mu: f64,
}

/// Velocity/strain/angle system.
#[derive(Clone, Copy, Debug)]
pub struct RotStrainModel {
    pub mu: f64,
}

impl Dynamics for OldroydModel {
    type State = OldroydState;
    fn viscosity(&self) -> f64 {
        self.mu
    }
    fn rhs(&self, s: &OldroydState, explicit_viscosity: bool) -> Result<OldroydState> {
        rhs_oldroyd(s, if explicit_viscosity { self.mu } else { 0.0 })
    }
}

impl Dynamics for StrainModel {
    type State = StrainState;
    fn viscosity(&self) -> f64 {
        self.mu
    }
    fn rhs(&self, s: &StrainState, explicit_viscosity: bool) -> Result<StrainState> {
        rhs_strain(s, if explicit_viscosity { self.mu } else { 0.0 })
    }
}

impl Dynamics for RotStrainModel {
    type State = RotStrainState;
    fn viscosity(&self) -> f64 {
        self.mu
    }
    fn rhs(&self, s: &RotStrainState, explicit_viscosity: bool) -> Result<RotStrainState> {
        rhs_rotstrain(s, if explicit_viscosity { self.mu } else { 0.0 })
    }
}

/// `F_s + b·∇F = ∇b F` for a frozen velocity `b`.
#[derive(Clone, Debug)]
pub struct FrozenTransport {
    b: VectorField,
    grad_b: Tensor2Field,
}

impl FrozenTransport {
    pub fn new(b: VectorField) -> Self {
        let grad_b = crate::spectral::velocity_gradient(&b);
        FrozenTransport { b, grad_b }
    }

    pub fn velocity(&self) -> &VectorField {
        &self.b
    }
}

impl Dynamics for FrozenTransport {
    type State = DeformationState;
    fn viscosity(&self) -> f64 {
        0.0
    }
    fn rhs(&self, s: &DeformationState, _explicit_viscosity: bool) -> Result<DeformationState> {
        let g = self.b.v1.grid().clone();
        let n = g.len();
        let grads: Vec<_> = s
            .f
            .components()
            .iter()
            .map(|c| grad_pair(&c.spectrum()))
            .collect();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let [x, y] = self.b.at(i);
            let gf = self.grad_b.at(i) * s.f.at(i);
            let gf = [gf.a11, gf.a12, gf.a21, gf.a22];
            for (c, (d1, d2)) in grads.iter().enumerate() {
                out[c][i] = gf[c] - (x * d1.data()[i] + y * d2.data()[i]);
            }
        }
        let [a, b, c, d] = out.map(|d| forward_dealiased(&g, d).to_field());
        let f = Tensor2Field::new(a, b, c, d);
        check_finite("dF", &f.components())?;
        Ok(DeformationState { f })
    }
}

/// Guard used by state constructors: `det(I + V) > ε` everywhere.
pub fn check_stretch(v: &SymTensorField) -> Result<()> {
    for i in 0..v.s11.grid().len() {
        let det = (Mat2::identity() + v.at(i)).det();
        if det <= EPS_SPD {
            return Err(Error::Degenerate {
                what: "I + V at a grid point",
                det,
            });
        }
    }
    Ok(())
}
