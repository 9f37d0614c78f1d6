use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use visco2d::config::{parse_config, Formulation, RunConfig};
use visco2d::init::{random_band_limited, InitKind, StreamSpec};
use visco2d::integrator::{cfl_dt, SchemeKind};
use visco2d::models::StrainState;
use visco2d::spectral::{dealias, divergence, inv_laplacian, laplacian, leray_project};
use visco2d::tensor::{compose_from_strain_angle, polar_decompose_left, sqrt_spd2};
use visco2d::{Grid, Mat2, ScalarField, SymTensorField, VectorField};

fn deformation() -> impl Strategy<Value = Mat2> {
    (-PI..PI, -PI..PI, 0.3f64..3.0, 0.3f64..3.0)
        .prop_map(|(a, b, s1, s2)| Mat2::rotation(a) * Mat2::diag(s1, s2) * Mat2::rotation(b))
}

fn grid(n: usize) -> Arc<Grid> {
    Grid::new(n, 2.0 * PI).unwrap()
}

fn field(g: &Arc<Grid>, seed: u64, kmax: i64) -> ScalarField {
    random_band_limited(g, kmax, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #[test]
    fn polar_parts_recompose(f in deformation()) {
        let p = polar_decompose_left(&f).unwrap();
        let back = compose_from_strain_angle(&p.v, p.theta).unwrap();
        prop_assert!((back - f).max_abs() <= 1e-12 * f.max_abs().max(1.0));
        prop_assert!((p.v.a12 - p.v.a21).abs() == 0.0);
        prop_assert!(p.theta > -PI && p.theta <= PI);
        prop_assert!((Mat2::identity() + p.v).det() > 0.0);
    }

    #[test]
    fn unit_determinant_ties_trace_to_determinant(f in deformation()) {
        let g = f.scale(1.0 / f.det().sqrt());
        let v = polar_decompose_left(&g).unwrap().v;
        prop_assert!((v.trace() + v.det()).abs() <= 1e-12 * (1.0 + v.max_abs()).powi(2));
    }

    #[test]
    fn square_root_squares_back(f in deformation()) {
        let m = f * f.transpose();
        let s = sqrt_spd2(&m).unwrap();
        prop_assert!((s * s - m).max_abs() <= 1e-12 * m.max_abs());
        prop_assert!(s.det() > 0.0 && s.trace() > 0.0);
    }

    #[test]
    fn config_round_trips(
        n in (4usize..64).prop_map(|h| 2 * h),
        mu in 0.01f64..10.0,
        dt_exp in 1i32..5,
        steps in 0usize..500,
        record_every in 1usize..50,
        snapshot_every in 0usize..50,
        formulation in prop::sample::select(vec![Formulation::Oldroyd, Formulation::Strain, Formulation::RotStrain, Formulation::Both]),
        kind in prop::sample::select(vec![InitKind::Trivial, InitKind::TaylorGreen, InitKind::WarmStart]),
        explicit in any::<bool>(),
        amplitude in 0.0f64..1.0,
        seed in any::<u64>(),
        random_stream in any::<bool>(),
    ) {
        let mut c = RunConfig::with_formulation(formulation);
        c.n = n;
        c.mu = mu;
        c.scheme.dt = 10f64.powi(-dt_exp);
        c.scheme.kind = if explicit { SchemeKind::Rk4Explicit } else { SchemeKind::IfRk4 };
        c.t_final = steps as f64 * c.scheme.dt;
        c.record_every = record_every;
        c.snapshot_every = snapshot_every;
        c.init.kind = kind;
        c.init.amplitude = amplitude;
        c.init.seed = seed;
        if random_stream {
            c.init.warm_stream = StreamSpec::Random { amplitude: amplitude + 0.01, kmax: 3 };
        }
        prop_assume!(c.validate().is_ok());
        let text = c.to_config_string();
        prop_assert_eq!(parse_config(&text).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_solenoidal_and_idempotent(seed in any::<u64>()) {
        let g = grid(32);
        let v = VectorField::new(field(&g, seed, 10), field(&g, seed ^ 1, 10));
        let p = leray_project(&v);
        prop_assert!(divergence(&p).max_abs() <= 1e-11);
        let pp = leray_project(&p);
        prop_assert!(pp.v1.sub(&p.v1).max_abs() <= 1e-14 && pp.v2.sub(&p.v2).max_abs() <= 1e-14);
    }

    #[test]
    fn laplacian_inverts_on_mean_free_fields(seed in any::<u64>()) {
        let g = grid(32);
        let f = field(&g, seed, 8);
        let back = inv_laplacian(&laplacian(&f)).field;
        let shifted = f.map(|x| x - f.mean());
        prop_assert!(back.sub(&shifted).max_abs() <= 1e-12);
    }

    #[test]
    fn dealiasing_is_idempotent(seed in any::<u64>()) {
        let g = grid(32);
        let f = field(&g, seed, 15);
        let once = dealias(&f);
        prop_assert!(dealias(&once).sub(&once).max_abs() <= 1e-14);
        let band_limited = field(&g, seed, 10);
        prop_assert!(dealias(&band_limited).sub(&band_limited).max_abs() <= 1e-14);
    }

    #[test]
    fn cfl_is_linear_in_spacing(amp in 0.1f64..5.0) {
        let state = |n: usize| {
            let g = grid(n);
            let u = VectorField::from_fn(&g, |x, y| [amp * x.sin() * y.cos(), 0.0]);
            (StrainState { u, v: SymTensorField::zeros(&g) }, g)
        };
        let (s1, g1) = state(32);
        let (s2, g2) = state(64);
        let d1 = cfl_dt(&s1, &g1, 0.5, 10.0);
        let d2 = cfl_dt(&s2, &g2, 0.5, 10.0);
        // Both grids sample the peak, so the speeds agree.
        prop_assert!((d1 / d2 - 2.0).abs() <= 1e-12);
        prop_assert!(d1 <= 0.5 * g1.dx() / amp.max(1.0) * (1.0 + 1e-12));
    }
}

#[test]
fn dealiased_products_are_band_limited() {
    let g = grid(32);
    let a = field(&g, 3, 10);
    let b = field(&g, 4, 10);
    let p = dealias(&a.mul(&b));
    let s = p.spectrum();
    for (idx, c) in s.coeffs().iter().enumerate() {
        let (m1, m2) = g.mode(idx);
        if m1.abs().max(m2.abs()) > 32 / 3 {
            assert!(c.norm() <= 1e-15, "mode ({m1}, {m2}): {c}");
        }
    }
    assert!(p.data().iter().all(|x| x.is_finite()));
}
