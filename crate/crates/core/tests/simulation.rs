use std::sync::Arc;

use pic_core::simulator::chain_rule_residual;
use pic_core::{
    builtin_system, check_feasibility, monitor, simulate, BoundFamily, CascadeConfig, EventKind,
    FunnelParams, ReferenceSpec, Scenario, StageControllerParams, SystemSpec,
};

fn builtin_scenario(name: &str, step: f64, substeps: usize, horizon: f64) -> Scenario {
    let b = builtin_system(name).unwrap();
    let mut s = Scenario::new(b.system, b.reference, b.controller, b.x0, horizon, step);
    s.bounds = Some(b.bounds);
    s.substeps = substeps;
    s
}

fn final_error(a: &Scenario, reference: &[f64]) -> f64 {
    let traj = simulate(a).unwrap();
    let x = &traj.last().xi;
    x.iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn example_one_stays_inside_every_bound() {
    let s = builtin_scenario("pendulum_ex1", 1e-3, 10, 20.0);
    let traj = simulate(&s).unwrap();
    assert_eq!(traj.len(), 20_001);
    for sample in &traj.samples {
        assert!(sample.z[0].abs() < sample.psi[0]);
        assert!(sample.u[1].abs() < 8.0);
        if sample.t >= 10.0 {
            assert!(sample.z[0].abs() < 0.0502);
        }
    }
    let report = monitor(&traj, &s.controller, s.bounds.as_ref().unwrap()).unwrap();
    assert_eq!(report.total_violations(), 0, "{report:?}");
    assert!(report.all_strictly_positive());
    assert_eq!(traj.events_of(EventKind::Saturation).count(), 0);
}

#[test]
fn example_two_stays_inside_every_bound() {
    let s = builtin_scenario("nonlinear_ex2", 1e-3, 10, 20.0);
    let traj = simulate(&s).unwrap();
    for sample in &traj.samples {
        let psi = (1.0 - 0.08) * (-0.9 * sample.t).exp() + 0.08;
        assert!(sample.z[0].abs() < psi);
        assert!(sample.u[1].abs() < 16.0);
    }
    let report = monitor(&traj, &s.controller, s.bounds.as_ref().unwrap()).unwrap();
    assert_eq!(report.total_violations(), 0, "{report:?}");
}

#[test]
fn certified_scenarios_have_positive_margins() {
    for name in ["pendulum_ex1", "nonlinear_ex2"] {
        let s = builtin_scenario(name, 1e-3, 10, 5.0);
        let traj = simulate(&s).unwrap();
        let z0 = &traj.samples[0].z;
        let bounds = s.bounds.as_ref().unwrap();
        assert!(
            check_feasibility(&s.controller, bounds, z0)
                .unwrap()
                .feasible
        );
        assert!(monitor(&traj, &s.controller, bounds)
            .unwrap()
            .all_strictly_positive());
    }
}

#[test]
fn stiff_stage_two_needs_substeps_at_millisecond_recording() {
    // At one RK4 step per millisecond the inner pendulum loop (gain ~ 800 / psi_2)
    // leaves the RK4 stability region once psi_2 has decayed.
    let s = builtin_scenario("pendulum_ex1", 1e-3, 1, 20.0);
    let traj = simulate(&s).unwrap();
    let report = monitor(&traj, &s.controller, s.bounds.as_ref().unwrap()).unwrap();
    assert!(report.violations(BoundFamily::Performance) > 0);
    assert!(traj.events_of(EventKind::Saturation).any(|e| e.stage == 2));
}

#[test]
fn identical_scenarios_give_identical_trajectories() {
    let s = builtin_scenario("pendulum_ex1", 1e-3, 4, 2.0);
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!(x
            .xi
            .iter()
            .zip(&y.xi)
            .all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(x
            .u
            .iter()
            .zip(&y.u)
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn step_halving_shows_fourth_order() {
    let reference = simulate(&builtin_scenario("pendulum_ex1", 1e-5, 1, 2.0))
        .unwrap()
        .last()
        .xi
        .clone();
    let coarse = final_error(&builtin_scenario("pendulum_ex1", 2e-4, 1, 2.0), &reference);
    let fine = final_error(&builtin_scenario("pendulum_ex1", 1e-4, 1, 2.0), &reference);
    assert!(coarse / fine >= 12.0, "ratio {}", coarse / fine);
}

#[test]
fn substeps_match_a_finer_recording_step() {
    let a = simulate(&builtin_scenario("pendulum_ex1", 1e-3, 10, 1.0)).unwrap();
    let b = simulate(&builtin_scenario("pendulum_ex1", 1e-4, 1, 1.0)).unwrap();
    let (xa, xb) = (&a.last().xi, &b.last().xi);
    assert!(xa.iter().zip(xb).all(|(p, q)| (p - q).abs() < 1e-10));
}

/// Example 1 with a curved first-stage law (`c_1 = 1`), so the chain rule
/// check is not trivially exact.
fn curved_example_one(step: f64, substeps: usize) -> Scenario {
    let mut s = builtin_scenario("pendulum_ex1", step, substeps, 10.0);
    let stages = s.controller.stages();
    s.controller = CascadeConfig::new(vec![
        StageControllerParams::new(4.5, 1.0, *stages[0].funnel()).unwrap(),
        stages[1],
    ])
    .unwrap();
    // keeps |z_2(0)| below p_2 with the steeper first stage
    s.x0 = vec![-0.5, 2.0];
    s
}

#[test]
fn input_rate_follows_chain_rule() {
    let coarse = curved_example_one(1e-3, 10);
    let coarse_residual =
        chain_rule_residual(&simulate(&coarse).unwrap(), &coarse.controller).unwrap();
    let fine = curved_example_one(5e-4, 5);
    let fine_residual = chain_rule_residual(&simulate(&fine).unwrap(), &fine.controller).unwrap();
    assert!(fine_residual[0] > 1e-9, "{fine_residual:?}");
    assert!(fine_residual[0] < 1e-2, "{fine_residual:?}");
    // second-order in the recording step
    let ratio = coarse_residual[0] / fine_residual[0];
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_dynamics_hold_exactly() {
    let system = SystemSpec::new(
        vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
        vec![Arc::new(|_| 1.0), Arc::new(|_| 1.0)],
        vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
    )
    .unwrap();
    let controller = CascadeConfig::new(vec![
        StageControllerParams::with_default_shape(1.0, FunnelParams::new(1.0, 0.1, 1.0).unwrap())
            .unwrap(),
        StageControllerParams::with_default_shape(2.0, FunnelParams::new(1.0, 0.1, 1.0).unwrap())
            .unwrap(),
    ])
    .unwrap();
    let s = Scenario::new(
        system,
        ReferenceSpec::constant(0.0),
        controller,
        vec![0.0, 0.0],
        20.0,
        1e-3,
    );
    let traj = simulate(&s).unwrap();
    assert!(traj
        .samples
        .iter()
        .all(|s| s.xi.iter().chain(&s.u).all(|v| *v == 0.0)));
}
