use std::f64::consts::PI;

use visco2d::diagnostics::cumulative_simpson;
use visco2d::init::{initial_states, InitRecipe};
use visco2d::integrator::SchemeSpec;
use visco2d::models::{RotStrainModel, StrainModel};
use visco2d::simulation::{run_trajectory, TrajectorySpec};
use visco2d::spectral::divergence;
use visco2d::Grid;

fn spec(dt: f64, steps: usize) -> TrajectorySpec {
    TrajectorySpec {
        scheme: SchemeSpec {
            dt,
            ..SchemeSpec::default()
        },
        mu: 1.0,
        steps,
        record_every: 1,
        snapshots: None,
        label: "invariants".into(),
    }
}

#[test]
fn velocity_stays_solenoidal_after_every_step() {
    let g = Grid::new(32, 2.0 * PI).unwrap();
    let states = initial_states(&g, &InitRecipe::default()).unwrap();
    let mut worst = 0.0f64;
    run_trajectory(RotStrainModel { mu: 1.0 }, states.rotstrain, &spec(0.01, 60), |_, _, y, _| {
        worst = worst.max(divergence(&y.u).max_abs());
        Ok(())
    })
    .unwrap();
    assert!(worst <= 1e-11, "{worst:e}");
}

#[test]
fn energy_forms_agree_within_the_constraint_gap() {
    let g = Grid::new(32, 2.0 * PI).unwrap();
    let states = initial_states(&g, &InitRecipe::default()).unwrap();
    let volume = g.length() * g.length();
    let tr = run_trajectory(StrainModel { mu: 1.0 }, states.strain, &spec(0.02, 50), |_, _, _, _| Ok(())).unwrap();
    for r in &tr.series {
        // |V|² + 2 tr V − E_alt density = 2 (tr V + det V) pointwise.
        let gap = (r.e_basic - r.e_alt).abs();
        assert!(gap <= 2.0 * r.residuals.trdet * volume + 1e-15, "t = {}: {gap:e}", r.t);
        assert!(r.residuals.trdet <= 1e-10);
        assert!(r.e_basic >= 0.0);
    }
}

#[test]
fn velocity_dissipation_is_bounded_by_initial_energy() {
    // The energy law gives ∫‖∇u‖² = ½(E(0) − E(t)) ≤ ½E(0), and since
    // tr V ≥ 0 under det(I + V) = 1 that bound exceeds ½(‖u₀‖² + ‖V₀‖²).
    let g = Grid::new(32, 2.0 * PI).unwrap();
    let states = initial_states(&g, &InitRecipe::default()).unwrap();
    let tr = run_trajectory(StrainModel { mu: 1.0 }, states.strain, &spec(0.02, 200), |_, _, _, _| Ok(())).unwrap();
    let grads: Vec<f64> = tr.series.iter().map(|r| r.gradu_l2sq).collect();
    let integral = cumulative_simpson(&grads, 0.02);
    let half_e0 = 0.5 * tr.series[0].e_basic;
    assert!(integral.windows(2).all(|w| w[1] >= w[0]));
    assert!(integral.iter().all(|i| *i <= half_e0 * (1.0 + 1e-6)));
    // Most of the energy has been dissipated by t = 4.
    assert!(*integral.last().unwrap() > 0.9 * half_e0);
}
