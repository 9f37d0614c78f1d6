//! Acceptance experiments behind the presets. Each preset runs its
//! trajectories, measures the quantities of its criteria and compares them
//! against the bounds below.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::thread;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::diagnostics::{
    basic_energy, energy_law_residual, energy_non_increasing, h1_norm, l2_distance,
    theorem_certificate, u_balance, DiagnosticsRecord,
};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField};
use crate::grid::Grid;
use crate::init::{initial_states, random_band_limited, MatchedStates};
use crate::integrator::{step_count, SchemeSpec, SignalSpeed};
use crate::models::{
    derived_transport_coefficient, hodge_residual, recover_pressure, Dynamics, Observable,
    OldroydModel, PressureMode, RotStrainModel, StrainModel, StrainState,
};
use crate::output::write_series;
use crate::simulation::{run_trajectory, RunFailure, TrajectorySpec};
use crate::spectral::sobolev_norm_sq;
use crate::tensor::{polar_decompose_left, sqrt_spd2, Mat2};

pub const TOL_IDENTITY: f64 = 1e-12;
pub const HODGE_SAMPLES: usize = 100;
pub const MATRIX_SAMPLES: usize = 1000;

pub const TOL_EQUIVALENCE: f64 = 1e-4;
pub const EQUIVALENCE_TIMES: [f64; 3] = [0.25, 0.5, 1.0];
/// `(n, dt)` pairs of the equivalence refinement.
pub const EQUIVALENCE_LADDER: [(usize, f64); 2] = [(64, 0.05), (128, 0.025)];
pub const MIN_REFINEMENT_RATIO: f64 = 8.0;

pub const TOL_ENERGY_LAW: f64 = 1e-6;
pub const ENERGY_SLACK: f64 = 1e-10;
pub const MIN_ENERGY_ORDER: f64 = 3.0;
pub const ENERGY_LADDER: [f64; 3] = [0.04, 0.02, 0.01];

pub const TOL_CONSTRAINT_RUN: f64 = 1e-5;
pub const TOL_CONSTRAINT_T0: f64 = 1e-6;
pub const MIN_CONSTRAINT_ORDER: f64 = 2.0;
pub const CONSTRAINT_LADDER: [(usize, f64); 2] = [(32, 0.04), (64, 0.02)];

pub const PRESSURE_FACTOR: f64 = 10.0;

pub const MAX_RHO_SUP: f64 = 10.0;
pub const MAX_SATURATION_CHANGE: f64 = 0.05;
pub const THEOREM_HORIZONS: (f64, f64) = (4.0, 8.0);

pub const BALANCE_CENTER: f64 = 0.5;
pub const BALANCE_LADDER: [f64; 3] = [0.05, 0.025, 0.0125];

pub const ORDER_RANGE: (f64, f64) = (3.5, 4.5);
pub const RICHARDSON_TIME: f64 = 0.1;
pub const RICHARDSON_LADDER: [f64; 3] = [0.025, 0.0125, 0.00625];

/// Horizon of the convergence ladders.
pub const LADDER_HORIZON: f64 = 1.0;
/// A coarse-level error below this is roundoff and carries no rate.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Identities,
    Equivalence,
    EnergyLaw,
    Refinement,
    Theorem,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Identities,
        Preset::Equivalence,
        Preset::EnergyLaw,
        Preset::Refinement,
        Preset::Theorem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Identities => "identities",
            Preset::Equivalence => "equivalence",
            Preset::EnergyLaw => "energy_law",
            Preset::Refinement => "refinement",
            Preset::Theorem => "theorem",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidConfig(format!("unknown preset '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{}] {}: {}", self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct PresetReport {
    pub preset: Preset,
    pub criteria: Vec<Criterion>,
}

impl PresetReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Criterion> {
        self.criteria.iter().find(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("preset {}\n", self.preset);
        for c in &self.criteria {
            out.push_str(&format!("{c}\n"));
        }
        out.push_str(if self.passed() { "result: pass\n" } else { "result: FAIL\n" });
        out
    }
}

/// Runs `preset` with the grid, scheme, horizon and initial data of `base`.
/// Convergence ladders use their own fixed `(n, dt)` levels. Series of the
/// base-resolution runs and the report go to `base.output_dir` when set.
pub fn execute_preset(preset: Preset, base: &RunConfig) -> std::result::Result<PresetReport, RunFailure> {
    let ctx = Ctx { base, preset };
    base.validate().map_err(|e| ctx.fail(e))?;
    if base.scheme.hyperviscosity != 0.0 {
        return Err(ctx.fail(Error::InvalidConfig(
            "hyperviscosity is a stabilizer and disqualifies a run from acceptance presets".into(),
        )));
    }
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| ctx.fail(e.into()))?;
    }
    let criteria = match preset {
        Preset::Identities => {
            let mut c = vec![exact_identities(base.init.seed)];
            c.extend(constraints_and_pressure(&ctx)?);
            c
        }
        Preset::Equivalence => vec![equivalence(&ctx)?],
        Preset::EnergyLaw => vec![energy_law(&ctx)?],
        Preset::Refinement => vec![balance(&ctx)?, integrator_order(&ctx)?],
        Preset::Theorem => vec![weak_dissipation(&ctx)?],
    };
    let report = PresetReport { preset, criteria };
    if let Some(dir) = &base.output_dir {
        std::fs::write(dir.join(format!("report_{preset}.txt")), report.render())
            .map_err(|e| ctx.fail(e.into()))?;
    }
    Ok(report)
}

type Outcome<T> = std::result::Result<T, RunFailure>;

struct Ctx<'a> {
    base: &'a RunConfig,
    preset: Preset,
}

impl Ctx<'_> {
    fn fail(&self, error: Error) -> RunFailure {
        RunFailure {
            label: self.preset.to_string(),
            error,
            series: Vec::new(),
        }
    }

    fn grid(&self, n: usize) -> Outcome<Arc<Grid>> {
        Grid::new(n, self.base.length).map_err(|e| self.fail(e))
    }

    fn states(&self, n: usize) -> Outcome<MatchedStates> {
        initial_states(&self.grid(n)?, &self.base.init).map_err(|e| self.fail(e))
    }

    fn spec(&self, dt: f64, t_final: f64, record_every: usize, label: &str) -> Outcome<TrajectorySpec> {
        Ok(TrajectorySpec {
            scheme: SchemeSpec {
                dt,
                ..self.base.scheme
            },
            mu: self.base.mu,
            steps: step_count(t_final, dt).map_err(|e| self.fail(e))?,
            record_every,
            snapshots: None,
            label: format!("{}/{label}", self.preset),
        })
    }

    fn steps(&self, t: f64, dt: f64) -> Outcome<usize> {
        step_count(t, dt).map_err(|e| self.fail(e))
    }

    fn save(&self, formulation: &str, series: &[DiagnosticsRecord]) -> Outcome<()> {
        match &self.base.output_dir {
            Some(dir) => {
                let path: PathBuf = dir.join(format!("{}_series_{formulation}.csv", self.preset));
                write_series(&path, series).map_err(|e| self.fail(e))
            }
            None => Ok(()),
        }
    }
}

struct Sampled<S> {
    series: Vec<DiagnosticsRecord>,
    samples: Vec<(f64, S)>,
}

/// Runs a trajectory, keeping the states at the steps in `keep` and handing
/// every recorded state to `on_record`.
fn run_sampled<D>(
    model: D,
    y0: D::State,
    spec: &TrajectorySpec,
    keep: &[usize],
    mut on_record: impl FnMut(&D::State, &DiagnosticsRecord) -> Result<()>,
) -> Outcome<Sampled<D::State>>
where
    D: Dynamics,
    D::State: Observable + SignalSpeed,
{
    let mut samples = Vec::new();
    let trajectory = run_trajectory(model, y0, spec, |k, t, y, r| {
        if keep.contains(&k) {
            samples.push((t, y.clone()));
        }
        match r {
            Some(r) => on_record(y, r),
            None => Ok(()),
        }
    })?;
    Ok(Sampled {
        series: trajectory.series,
        samples,
    })
}

/// Runs `job(i)` for every `i < count` on its own thread.
fn concurrently<T: Send>(count: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    thread::scope(|s| {
        let job = &job;
        let handles: Vec<_> = (0..count).map(|i| s.spawn(move || job(i))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ladder member panicked"))
            .collect()
    })
}

fn collect<T>(results: Vec<Outcome<T>>) -> Outcome<Vec<T>> {
    results.into_iter().collect()
}

/// Observed orders `log₂(e_i / e_{i+1})` of a halving ladder. `None` marks a
/// level whose coarse error is already roundoff.
fn orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| (w[0] > ROUNDOFF_FLOOR).then(|| (w[0] / w[1]).log2()))
        .collect()
}

fn orders_at_least(orders: &[Option<f64>], min: f64) -> bool {
    orders.iter().all(|o| o.is_none_or(|o| o >= min))
}

fn show_orders(orders: &[Option<f64>]) -> String {
    let parts: Vec<String> = orders
        .iter()
        .map(|o| o.map_or_else(|| "exact".to_string(), |o| format!("{o:.2}")))
        .collect();
    parts.join(", ")
}

fn show_errors(errors: &[f64]) -> String {
    let parts: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    parts.join(" -> ")
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    parts.join(", ")
}

fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sym_sup_gap(a: &SymTensorField, b: &SymTensorField) -> f64 {
    max_abs_diff(&a.s11, &b.s11)
        .max(max_abs_diff(&a.s12, &b.s12))
        .max(max_abs_diff(&a.s22, &b.s22))
}

/// `max |a − b|` with the difference taken modulo 2π.
fn angle_sup_gap(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| ((x - y + PI).rem_euclid(2.0 * PI) - PI).abs())
        .fold(0.0, f64::max)
}

fn random_stretch_rotation(rng: &mut impl Rng) -> Mat2 {
    let a = rng.gen_range(0.5..2.0);
    let b = rng.gen_range(0.5..2.0);
    Mat2::rotation(rng.gen_range(-PI..PI)) * Mat2::diag(a, b) * Mat2::rotation(rng.gen_range(-PI..PI))
}

fn eigen_sqrt(m: &Mat2) -> Mat2 {
    let e = SymmetricEigen::new(Matrix2::new(m.a11, m.a12, m.a21, m.a22));
    let d = Matrix2::from_diagonal(&e.eigenvalues.map(f64::sqrt));
    let s = e.eigenvectors * d * e.eigenvectors.transpose();
    Mat2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)])
}

/// Criterion 1: pointwise and spectral identities on random data.
pub fn exact_identities(seed: u64) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(64, 2.0 * PI).expect("valid grid");
    let mut hodge = 0.0f64;
    for _ in 0..HODGE_SAMPLES {
        let mut component = || random_band_limited(&grid, 12, 0.3, &mut rng);
        let v = SymTensorField::new(component(), component(), component());
        hodge = hodge.max(hodge_residual(&v) / sobolev_norm_sq(&v, 2).sqrt());
    }
    let (mut polar, mut sqrt, mut trdet) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..MATRIX_SAMPLES {
        let f = random_stretch_rotation(&mut rng);
        let unimodular = f.scale(1.0 / f.det().sqrt());
        let m = f * f.transpose();
        match (polar_decompose_left(&f), sqrt_spd2(&m), polar_decompose_left(&unimodular)) {
            (Ok(p), Ok(s), Ok(q)) => {
                polar = polar.max(((Mat2::identity() + p.v) * p.r - f).max_abs());
                sqrt = sqrt.max((s - eigen_sqrt(&m)).max_abs());
                trdet = trdet.max((q.v.trace() + q.v.det()).abs());
            }
            _ => failures += 1,
        }
    }
    let passed =
        failures == 0 && hodge <= TOL_IDENTITY && polar <= TOL_IDENTITY && sqrt <= TOL_IDENTITY && trdet <= TOL_IDENTITY;
    Criterion {
        id: 1,
        name: "exact identities",
        passed,
        detail: format!(
            "hodge rel {hodge:.2e} ({HODGE_SAMPLES} fields), polar round trip {polar:.2e}, sqrt vs eigen {sqrt:.2e}, \
             |trV+detV| at detF=1 {trdet:.2e} ({MATRIX_SAMPLES} matrices, {failures} decomposition failures); bound {TOL_IDENTITY:e}"
        ),
    }
}

/// Criteria 4 and 5 from one rotation-strain run plus a constraint ladder.
fn constraints_and_pressure(ctx: &Ctx) -> Outcome<Vec<Criterion>> {
    let base = ctx.base;
    let spec = ctx.spec(base.scheme.dt, base.t_final, base.record_every, "rotstrain")?;
    let mut worst_ratio = 0.0f64;
    let mut pressure_ok = true;
    let run = run_sampled(
        RotStrainModel { mu: base.mu },
        ctx.states(base.n)?.rotstrain,
        &spec,
        &[],
        |y, r| {
            let s = y.strain();
            let gap = l2_distance(
                &recover_pressure(&s, PressureMode::Projection)?,
                &recover_pressure(&s, PressureMode::Structural)?,
            );
            let bound = PRESSURE_FACTOR * r.residuals.newid * h1_norm(&s.v);
            pressure_ok &= gap <= bound;
            if gap > 0.0 {
                worst_ratio = worst_ratio.max(gap / (bound / PRESSURE_FACTOR));
            }
            Ok(())
        },
    )?;
    ctx.save("rotstrain", &run.series)?;

    type Pick = fn(&DiagnosticsRecord) -> f64;
    let picks: [(&str, Pick); 4] = [
        ("detIpV", |r| r.residuals.det_ipv),
        ("trdet", |r| r.residuals.trdet),
        ("compat", |r| r.residuals.compat.unwrap_or(f64::NAN)),
        ("newid", |r| r.residuals.newid),
    ];
    let worst = |series: &[DiagnosticsRecord], pick: Pick| series.iter().map(pick).fold(0.0, f64::max);

    let ladder = collect(concurrently(CONSTRAINT_LADDER.len(), |i| {
        let (n, dt) = CONSTRAINT_LADDER[i];
        let spec = ctx.spec(dt, LADDER_HORIZON, 1, &format!("rotstrain_n{n}"))?;
        run_sampled(RotStrainModel { mu: base.mu }, ctx.states(n)?.rotstrain, &spec, &[], |_, _| Ok(()))
            .map(|r| r.series)
    }))?;

    let mut passed = true;
    let mut parts = Vec::new();
    for (name, pick) in picks {
        let over_run = worst(&run.series, pick);
        let initial = pick(&run.series[0]);
        let errors: Vec<f64> = ladder.iter().map(|s| worst(s, pick)).collect();
        let rate = orders(&errors);
        passed &= over_run <= TOL_CONSTRAINT_RUN
            && initial <= TOL_CONSTRAINT_T0
            && orders_at_least(&rate, MIN_CONSTRAINT_ORDER);
        parts.push(format!(
            "{name} max {over_run:.2e} t0 {initial:.2e} ladder {} order {}",
            show_errors(&errors),
            show_orders(&rate)
        ));
    }
    let constraints = Criterion {
        id: 4,
        name: "constraint propagation",
        passed,
        detail: format!(
            "{}; bounds {TOL_CONSTRAINT_RUN:e} run, {TOL_CONSTRAINT_T0:e} t0, order >= {MIN_CONSTRAINT_ORDER} over (n, dt) {:?}",
            parts.join("; "),
            CONSTRAINT_LADDER
        ),
    };
    let pressure = Criterion {
        id: 5,
        name: "pressure consistency",
        passed: pressure_ok,
        detail: format!(
            "max ||p_proj - p_struct||_L2 / (newid * ||V||_H1) = {worst_ratio:.3} over {} records; bound {PRESSURE_FACTOR}",
            run.series.len()
        ),
    };
    Ok(vec![constraints, pressure])
}

/// Largest strain and angle gaps between matched Oldroyd and rotation-strain
/// runs at `times`, with the base-resolution series when `save` is set.
fn equivalence_gaps(ctx: &Ctx, n: usize, dt: f64, horizon: f64, times: &[f64], save: bool) -> Outcome<Vec<(f64, f64, f64)>> {
    let mu = ctx.base.mu;
    let keep: Vec<usize> = times.iter().map(|&t| ctx.steps(t, dt)).collect::<Outcome<_>>()?;
    let states = ctx.states(n)?;
    let every = if save { ctx.base.record_every } else { usize::MAX };
    let oldroyd_spec = ctx.spec(dt, horizon, every, &format!("oldroyd_n{n}"))?;
    let rot_spec = ctx.spec(dt, horizon, every, &format!("rotstrain_n{n}"))?;
    let (a, b) = thread::scope(|s| {
        let a = s.spawn(|| run_sampled(OldroydModel { mu }, states.oldroyd.clone(), &oldroyd_spec, &keep, |_, _| Ok(())));
        let b = run_sampled(RotStrainModel { mu }, states.rotstrain.clone(), &rot_spec, &keep, |_, _| Ok(()));
        (a.join().expect("oldroyd run panicked"), b)
    });
    let (a, b) = (a?, b?);
    if save {
        ctx.save("oldroyd", &a.series)?;
        ctx.save("rotstrain", &b.series)?;
    }
    let mut gaps = Vec::new();
    for ((t, x), (_, y)) in a.samples.iter().zip(&b.samples) {
        let obs = x.observe().map_err(|e| ctx.fail(e))?;
        let theta = obs.theta.as_ref().expect("oldroyd observation carries an angle");
        gaps.push((*t, sym_sup_gap(&obs.v, &y.v), angle_sup_gap(theta, &y.theta)));
    }
    Ok(gaps)
}

/// Criterion 2.
fn equivalence(ctx: &Ctx) -> Outcome<Criterion> {
    let base = ctx.base;
    let mut times: Vec<f64> = EQUIVALENCE_TIMES
        .into_iter()
        .filter(|&t| t <= base.t_final * (1.0 + 1e-12))
        .collect();
    if times.is_empty() {
        times.push(base.t_final);
    }
    let gaps = equivalence_gaps(ctx, base.n, base.scheme.dt, base.t_final, &times, true)?;
    let ladder = collect(concurrently(EQUIVALENCE_LADDER.len(), |i| {
        let (n, dt) = EQUIVALENCE_LADDER[i];
        equivalence_gaps(ctx, n, dt, LADDER_HORIZON, &EQUIVALENCE_TIMES, false)
    }))?;
    let sup = |g: &[(f64, f64, f64)], pick: fn(&(f64, f64, f64)) -> f64| g.iter().map(pick).fold(0.0, f64::max);
    let (v_gap, theta_gap) = (sup(&gaps, |g| g.1), sup(&gaps, |g| g.2));
    let v_ladder: Vec<f64> = ladder.iter().map(|g| sup(g, |g| g.1)).collect();
    let theta_ladder: Vec<f64> = ladder.iter().map(|g| sup(g, |g| g.2)).collect();
    let v_orders = orders(&v_ladder);
    let min_order = MIN_REFINEMENT_RATIO.log2();
    let at_times: Vec<String> = gaps
        .iter()
        .map(|(t, v, th)| format!("t={t}: V {v:.2e} theta {th:.2e}"))
        .collect();
    Ok(Criterion {
        id: 2,
        name: "formulation equivalence",
        passed: v_gap <= TOL_EQUIVALENCE && theta_gap <= TOL_EQUIVALENCE && orders_at_least(&v_orders, min_order),
        detail: format!(
            "{}; bound {TOL_EQUIVALENCE:e}; V gap ladder {:?} {} (ratio {}), theta {}; ratio >= {MIN_REFINEMENT_RATIO}",
            at_times.join(", "),
            EQUIVALENCE_LADDER,
            show_errors(&v_ladder),
            ratios(&v_orders),
            show_errors(&theta_ladder)
        ),
    })
}

fn ratios(orders: &[Option<f64>]) -> String {
    let parts: Vec<String> = orders
        .iter()
        .map(|o| o.map_or_else(|| "exact".to_string(), |o| format!("{:.1}", o.exp2())))
        .collect();
    parts.join(", ")
}

/// Criterion 3.
fn energy_law(ctx: &Ctx) -> Outcome<Criterion> {
    let base = ctx.base;
    let mu = base.mu;
    let spec = ctx.spec(base.scheme.dt, base.t_final, base.record_every, "strain")?;
    let run = run_sampled(StrainModel { mu }, ctx.states(base.n)?.strain, &spec, &[], |_, _| Ok(()))?;
    ctx.save("strain", &run.series)?;
    let residual = energy_law_residual(&run.series, mu).map_err(|e| ctx.fail(e))?;
    let monotone = energy_non_increasing(&run.series, ENERGY_SLACK);
    let ladder = collect(concurrently(ENERGY_LADDER.len(), |i| {
        let dt = ENERGY_LADDER[i];
        let spec = ctx.spec(dt, LADDER_HORIZON, 1, &format!("strain_dt{dt}"))?;
        let run = run_sampled(StrainModel { mu }, ctx.states(base.n)?.strain, &spec, &[], |_, _| Ok(()))?;
        energy_law_residual(&run.series, mu).map_err(|e| ctx.fail(e))
    }))?;
    let rate = orders(&ladder);
    Ok(Criterion {
        id: 3,
        name: "energy law",
        passed: residual <= TOL_ENERGY_LAW && monotone && orders_at_least(&rate, MIN_ENERGY_ORDER),
        detail: format!(
            "residual {residual:.2e} (bound {TOL_ENERGY_LAW:e}), E_basic non-increasing: {monotone} (slack {ENERGY_SLACK:e}); \
             dt ladder {ENERGY_LADDER:?} {} order {} (>= {MIN_ENERGY_ORDER})",
            show_errors(&ladder),
            show_orders(&rate)
        ),
    })
}

/// Criterion 6.
fn weak_dissipation(ctx: &Ctx) -> Outcome<Criterion> {
    let base = ctx.base;
    let dt = base.scheme.dt;
    let (short, long) = THEOREM_HORIZONS;
    let every = base.record_every;
    let (k1, k_short) = (ctx.steps(1.0, dt)?, ctx.steps(short, dt)?);
    if k_short % every != 0 {
        return Err(ctx.fail(Error::InvalidConfig(format!(
            "record_every {every} must divide the {k_short} steps to t = {short}"
        ))));
    }
    let spec = ctx.spec(dt, long, every, "strain")?;
    let run = run_sampled(StrainModel { mu: base.mu }, ctx.states(base.n)?.strain, &spec, &[0, k1], |_, _| Ok(()))?;
    ctx.save("strain", &run.series)?;
    let energy = |s: &StrainState| basic_energy(s).0;
    let (e0, e1) = (energy(&run.samples[0].1), energy(&run.samples[1].1));
    let cert = theorem_certificate(&run.series, &run.series[0]);
    let at_short = run
        .series
        .iter()
        .find(|r| (r.t - short).abs() <= 1e-9 * short)
        .expect("record at the short horizon")
        .dissip_accum;
    let at_long = run.series.last().expect("non-empty series").dissip_accum;
    let change: Vec<f64> = at_short
        .iter()
        .zip(&at_long)
        .map(|(a, b)| if *b == 0.0 && *a == 0.0 { 0.0 } else { (b - a).abs() / b.abs() })
        .collect();
    let saturated = at_long.iter().all(|x| x.is_finite()) && change.iter().all(|c| *c < MAX_SATURATION_CHANGE);
    Ok(Criterion {
        id: 6,
        name: "weak dissipation",
        passed: cert.rho_sup <= MAX_RHO_SUP && e1 < e0 && saturated,
        detail: format!(
            "rho_sup {:.3} (bound {MAX_RHO_SUP}), rho_dis {:.3?}, E_basic(0) {e0:.4e} E_basic(1) {e1:.4e}; \
             integrals at t={short} [{}] t={long} [{}], relative change [{}] (< {MAX_SATURATION_CHANGE})",
            cert.rho_sup,
            cert.rho_dis,
            sci(&at_short),
            sci(&at_long),
            sci(&change)
        ),
    })
}

/// Criterion 7. The window is centred on `BALANCE_CENTER` with spacing equal
/// to the step, so halving the step shrinks both.
fn balance(ctx: &Ctx) -> Outcome<Criterion> {
    let base = ctx.base;
    let mu = base.mu;
    let coefficient = derived_transport_coefficient(mu);
    let windows = collect(concurrently(BALANCE_LADDER.len(), |i| {
        let h = BALANCE_LADDER[i];
        let k = ctx.steps(BALANCE_CENTER, h)?;
        let spec = ctx.spec(h, BALANCE_CENTER + h, usize::MAX, &format!("strain_dt{h}"))?;
        let run = run_sampled(StrainModel { mu }, ctx.states(base.n)?.strain, &spec, &[k - 1, k, k + 1], |_, _| Ok(()))?;
        let w: [(f64, StrainState); 3] = run.samples.try_into().map_err(|_| ctx.fail(Error::InvalidInput("incomplete balance window".into())))?;
        Ok(w)
    }))?;
    let residuals = |mode: PressureMode, c: f64| -> Outcome<Vec<f64>> {
        windows
            .iter()
            .map(|w| u_balance(w, mu, mode, c).map(|r| r.residual).map_err(|e| ctx.fail(e)))
            .collect()
    };
    let derived = residuals(PressureMode::Projection, coefficient)?;
    let structural = residuals(PressureMode::Structural, coefficient)?;
    let unit = residuals(PressureMode::Projection, 1.0)?;
    let rate = orders(&derived);
    Ok(Criterion {
        id: 7,
        name: "U-balance",
        passed: orders_at_least(&rate, MIN_REFINEMENT_RATIO.log2()),
        detail: format!(
            "dt ladder {BALANCE_LADDER:?} at t={BALANCE_CENTER}, projection pressure, transport coefficient 2/mu = {coefficient}: \
             {} (ratio {}, >= {MIN_REFINEMENT_RATIO}); structural pressure {}; coefficient 1 {} (ratio {})",
            show_errors(&derived),
            ratios(&rate),
            show_errors(&structural),
            show_errors(&unit),
            ratios(&orders(&unit))
        ),
    })
}

/// Criterion 8, by Richardson differences of three halved steps.
fn integrator_order(ctx: &Ctx) -> Outcome<Criterion> {
    let base = ctx.base;
    let finals = collect(concurrently(RICHARDSON_LADDER.len(), |i| {
        let dt = RICHARDSON_LADDER[i];
        let k = ctx.steps(RICHARDSON_TIME, dt)?;
        let spec = ctx.spec(dt, RICHARDSON_TIME, usize::MAX, &format!("strain_dt{dt}"))?;
        let mut run = run_sampled(StrainModel { mu: base.mu }, ctx.states(base.n)?.strain, &spec, &[k], |_, _| Ok(()))?;
        Ok(run.samples.pop().expect("final sample").1)
    }))?;
    let du = |a: &StrainState, b: &StrainState| {
        (l2_distance(&a.u.v1, &b.u.v1).powi(2) + l2_distance(&a.u.v2, &b.u.v2).powi(2)).sqrt()
    };
    let dv = |a: &StrainState, b: &StrainState| {
        (l2_distance(&a.v.s11, &b.v.s11).powi(2)
            + 2.0 * l2_distance(&a.v.s12, &b.v.s12).powi(2)
            + l2_distance(&a.v.s22, &b.v.s22).powi(2))
        .sqrt()
    };
    let u_diffs = [du(&finals[0], &finals[1]), du(&finals[1], &finals[2])];
    let v_diffs = [dv(&finals[0], &finals[1]), dv(&finals[1], &finals[2])];
    let (u_order, v_order) = (orders(&u_diffs)[0], orders(&v_diffs)[0]);
    let in_range = |o: Option<f64>| o.is_none_or(|o| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&o));
    Ok(Criterion {
        id: 8,
        name: "integrator order",
        passed: in_range(u_order) && in_range(v_order),
        detail: format!(
            "{} at t={RICHARDSON_TIME}, dt {RICHARDSON_LADDER:?}: u diffs {} order {}, V diffs {} order {}; range {ORDER_RANGE:?}",
            base.scheme.kind,
            show_errors(&u_diffs),
            show_orders(&[u_order]),
            show_errors(&v_diffs),
            show_orders(&[v_order])
        ),
    })
}
