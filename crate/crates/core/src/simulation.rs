//! Configured runs: initial data, integration, diagnostics records, and
//! persistence of series and snapshots.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::config::{Formulation, RunConfig};
use crate::diagnostics::{dissipation_integrands, record, DiagnosticsRecord, DissipationAccumulator};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::init::initial_states;
use crate::integrator::{Integrator, SchemeSpec, SignalSpeed};
use crate::models::{
    Dynamics, Observable, OldroydModel, OldroydState, RotStrainModel, RotStrainState, State,
    StrainModel, StrainState,
};
use crate::output::{write_series, write_snapshot};

/// How one trajectory is integrated and observed.
#[derive(Clone, Debug)]
pub struct TrajectorySpec {
    pub scheme: SchemeSpec,
    pub mu: f64,
    pub steps: usize,
    pub record_every: usize,
    /// Directory and cadence (in steps) of snapshots.
    pub snapshots: Option<(PathBuf, usize)>,
    pub label: String,
}

#[derive(Debug)]
pub struct Trajectory<S> {
    pub series: Vec<DiagnosticsRecord>,
    pub final_state: S,
}

/// A failed run, with everything recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub label: String,
    pub error: Error,
    pub series: Vec<DiagnosticsRecord>,
}

impl RunFailure {
    pub fn last_record(&self) -> Option<&DiagnosticsRecord> {
        self.series.last()
    }
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} run failed: {}", self.label, self.error)?;
        if let Some(r) = self.last_record() {
            write!(f, " (last healthy record at t = {}, E_basic = {:e})", r.t, r.e_basic)?;
        }
        Ok(())
    }
}

impl std::error::Error for RunFailure {}

fn snapshot<S: State>(dir: &Path, label: &str, step: usize, t: f64, s: &S) -> Result<()> {
    let names = s.field_names();
    let fields: Vec<(&str, &crate::field::ScalarField)> =
        names.iter().copied().zip(s.fields()).collect();
    write_snapshot(&dir.join(format!("{label}_{step:06}.bin")), t, label, &fields)
}

/// Integrates `y0`, accumulating the dissipation integrals every step and
/// recording diagnostics every `record_every` steps and at the end.
/// `on_step(k, t, y, record)` runs after every step (and at `k = 0`), with the
/// record when one was taken.
pub fn run_trajectory<D>(
    model: D,
    y0: D::State,
    spec: &TrajectorySpec,
    mut on_step: impl FnMut(usize, f64, &D::State, Option<&DiagnosticsRecord>) -> Result<()>,
) -> std::result::Result<Trajectory<D::State>, RunFailure>
where
    D: Dynamics,
    D::State: Observable + SignalSpeed,
{
    let mut series = Vec::new();
    let mut acc = DissipationAccumulator::new();
    let mut integrator = Integrator::new(model, spec.scheme);
    let mu = spec.mu;
    let every = spec.record_every.max(1);
    let result = integrator.integrate(y0, spec.steps, |k, t, y| {
        acc.push(t, dissipation_integrands(&y.strain_view()?, mu));
        if k % every == 0 || k == spec.steps {
            let r = record(&y.observe()?, t, mu, &acc)?;
            on_step(k, t, y, Some(&r))?;
            series.push(r);
        } else {
            on_step(k, t, y, None)?;
        }
        if let Some((dir, n)) = &spec.snapshots {
            if *n > 0 && k % n == 0 {
                snapshot(dir, &spec.label, k, t, y)?;
            }
        }
        Ok(())
    });
    match result {
        Ok(final_state) => Ok(Trajectory {
            series,
            final_state,
        }),
        Err(error) => Err(RunFailure {
            label: spec.label.clone(),
            error,
            series,
        }),
    }
}

#[derive(Clone, Debug)]
pub enum FinalState {
    Oldroyd(OldroydState),
    Strain(StrainState),
    RotStrain(RotStrainState),
}

#[derive(Debug)]
pub struct FormulationRun {
    pub formulation: Formulation,
    pub series: Vec<DiagnosticsRecord>,
    pub final_state: FinalState,
}

#[derive(Debug)]
pub struct RunOutput {
    pub runs: Vec<FormulationRun>,
}

fn series_path(dir: &Path, f: Formulation) -> PathBuf {
    dir.join(format!("series_{f}.csv"))
}

/// Runs every formulation of `config`. Series go to
/// `<output_dir>/series_<formulation>.csv`, also after a failure.
pub fn run_simulation(config: &RunConfig) -> std::result::Result<RunOutput, RunFailure> {
    let setup = |error: Error| RunFailure {
        label: config.formulation.to_string(),
        error,
        series: Vec::new(),
    };
    config.validate().map_err(setup)?;
    let grid = Grid::new(config.n, config.length).map_err(setup)?;
    let states = initial_states(&grid, &config.init).map_err(setup)?;
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| setup(e.into()))?;
    }
    let steps = config.steps().map_err(setup)?;
    let mut runs = Vec::new();
    for f in config.formulation.members() {
        let spec = TrajectorySpec {
            scheme: config.scheme,
            mu: config.mu,
            steps,
            record_every: config.record_every,
            snapshots: config
                .output_dir
                .clone()
                .filter(|_| config.snapshot_every > 0)
                .map(|d| (d, config.snapshot_every)),
            label: f.to_string(),
        };
        let mu = config.mu;
        let result = match f {
            Formulation::Oldroyd => run_trajectory(OldroydModel { mu }, states.oldroyd.clone(), &spec, |_, _, _, _| Ok(()))
                .map(|t| (t.series, FinalState::Oldroyd(t.final_state))),
            Formulation::Strain => run_trajectory(StrainModel { mu }, states.strain.clone(), &spec, |_, _, _, _| Ok(()))
                .map(|t| (t.series, FinalState::Strain(t.final_state))),
            Formulation::RotStrain => run_trajectory(RotStrainModel { mu }, states.rotstrain.clone(), &spec, |_, _, _, _| Ok(()))
                .map(|t| (t.series, FinalState::RotStrain(t.final_state))),
            Formulation::Both => unreachable!("members() expands both"),
        };
        let written = |series: &[DiagnosticsRecord]| match &config.output_dir {
            Some(dir) => write_series(&series_path(dir, f), series),
            None => Ok(()),
        };
        match result {
            Ok((series, final_state)) => {
                written(&series).map_err(|e| RunFailure {
                    label: f.to_string(),
                    error: e,
                    series: series.clone(),
                })?;
                runs.push(FormulationRun {
                    formulation: f,
                    series,
                    final_state,
                });
            }
            Err(failure) => {
                let _ = written(&failure.series);
                return Err(failure);
            }
        }
    }
    Ok(RunOutput { runs })
}
