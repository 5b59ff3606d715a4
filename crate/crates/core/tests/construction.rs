use modscat_core::evolver::{evolve_v, wave_operator_endpoint};
use modscat_core::experiments::Scenario;
use modscat_core::fixedpoint::{solve_fixed_point, InitialIterate, SolverOptions, Trajectory};
use modscat_core::{ComplexField, Grid, ModelParams, C64};
use proptest::prelude::*;

fn small() -> Scenario {
    Scenario { intervals: 60, ..Scenario::small_data() }
}

#[test]
fn vanishing_datum_has_vanishing_correction() {
    let sc = small().with_amplitude(0.0).unwrap();
    let (traj, report) = solve_fixed_point(&sc.model().unwrap(), &sc.mesh().unwrap(), sc.solver_options()).unwrap();
    assert!(traj.fields().iter().all(|f| f.l2_norm() == 0.0));
    assert_eq!(report.residual, 0.0);
}

#[test]
fn fixed_point_is_independent_of_the_start() {
    let sc = small();
    let (model, mesh) = (sc.model().unwrap(), sc.mesh().unwrap());
    let (a, ra) = solve_fixed_point(&model, &mesh, sc.solver_options()).unwrap();
    let opts = SolverOptions { initial: InitialIterate::Zero, ..sc.solver_options() };
    let (b, _) = solve_fixed_point(&model, &mesh, opts).unwrap();
    let gap = a.difference(&b).unwrap();
    let worst = gap.fields().iter().map(ComplexField::l2_norm).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    assert!(ra.contraction_factor < 1.0 && ra.residual < 1e-9);
}

#[test]
fn correction_is_small_next_to_the_profile() {
    let sc = small();
    let (model, mesh) = (sc.model().unwrap(), sc.mesh().unwrap());
    let (traj, _) = solve_fixed_point(&model, &mesh, sc.solver_options()).unwrap();
    let full = traj.full_solution(&model).unwrap();
    for (&t, (v, c)) in mesh.nodes().iter().zip(full.iter().zip(traj.fields())) {
        let vp = model.profile_vp(t).unwrap();
        assert!(c.l2_norm() < 0.05 * vp.l2_norm(), "t = {t}");
        assert!((v.l2_norm() - vp.l2_norm()).abs() < 0.05 * vp.l2_norm());
    }
}

#[test]
fn trajectory_rejects_wrong_length() {
    let sc = small();
    let mesh = sc.mesh().unwrap();
    let model = sc.model().unwrap();
    let z = Trajectory::zeros(&mesh, &model);
    assert!(Trajectory::new(mesh, z.fields()[1..].to_vec()).is_err());
}

#[test]
fn endpoint_mass_matches_the_datum() {
    let sc = small();
    let (model, mesh) = (sc.model().unwrap(), sc.mesh().unwrap());
    let (traj, _) = solve_fixed_point(&model, &mesh, sc.solver_options()).unwrap();
    let v_t = traj.full_solution(&model).unwrap().pop().unwrap();
    let phi = model.datum().phi().l2_norm();
    let (u0, rep) = wave_operator_endpoint(&v_t, sc.t_max, phi, None, 400, &sc.params).unwrap();
    assert!(u0.is_finite());
    assert!(rep.mass_defect < 1e-3 * phi, "{}", rep.mass_defect);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn v_flow_conserves_mass(amp in 0.05f64..1.5, width in 0.5f64..3.0, shift in -3.0f64..3.0) {
        let grid = Grid::with_size(256, 20.0).unwrap();
        let v = ComplexField::from_fn(&grid, |x| C64::new(amp * (-(x - shift).powi(2) / (width * width)).exp(), 0.3 * amp * x.sin()));
        let out = evolve_v(&v, 1e-3, 0.1, 100, &ModelParams::defocusing()).unwrap();
        prop_assert!((out.l2_norm() - v.l2_norm()).abs() < 1e-10 * v.l2_norm());
    }

    #[test]
    fn parseval_holds(seed in any::<u64>()) {
        use rand::SeedableRng;
        let grid = Grid::with_size(128, 10.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = ComplexField::random_band_limited(&grid, &mut rng, 1.0, 4.0);
        prop_assert!((f.l2_norm() - f.spectral_l2_norm()).abs() < 1e-12 * f.l2_norm().max(1e-300));
    }
}
