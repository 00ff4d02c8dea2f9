use super::*;
use crate::controller::FirstOrderFilter;
use crate::numerics::{CompanionForm, ResidualSystem};
use nalgebra::DMatrix;

fn short(t_end: f64) -> SimConfig {
    SimConfig { t_end, ..Default::default() }
}

fn solved_states(sim: &Simulator, steps: usize) -> Vec<SimState> {
    let mut out = Vec::new();
    sim.run_observed(|s| {
        if out.len() <= steps {
            out.push(*s)
        }
    })
    .unwrap();
    out
}

#[test]
fn initial_operating_point_values() {
    let sim = Simulator::new(Scenario::default(), SimConfig::default()).unwrap();
    let s = sim.initial_states();
    assert_eq!(s[THETA_PLL], 0.0);
    assert!((s[IG_D] - 0.6).abs() < 1e-15);
    assert!((s[INT_P] - 0.6).abs() < 1e-15 && (s[IFIL_D] - 0.6).abs() < 1e-15);
    assert!((s[VCC_D] - 0.01 * 0.6).abs() < 1e-15);
    for k in [VQ_FIL, I_PLL, INT_Q, IFIL_Q, VCC_Q, IG_Q, Q_FIL] {
        assert_eq!(s[k], 0.0, "index {k}");
    }
}

#[test]
fn residual_dimension_matches_unknowns() {
    let sim = Simulator::new(Scenario::default(), short(0.01)).unwrap();
    let s = sim.initialize().unwrap();
    assert_eq!(sim.step_system(&s).dimension(), N);
    assert_eq!(s.x.len(), N);
}

fn algebraic_locality(topology: Topology, frame: NetworkFrame) {
    let (mut scenario, mut config) = match topology {
        Topology::Rl => (Scenario::default(), short(0.01)),
        Topology::Resistive => resistive_divider(),
    };
    scenario.freq_support.enabled = true;
    scenario.volt_var.enabled = true;
    config.network_frame = frame;
    config.t_end = 0.01;
    let sim = Simulator::new(scenario, config).unwrap();
    let states = solved_states(&sim, 5);
    let prev = &states[4];
    let sys = sim.step_system(prev);
    let x = states[5].x;
    let mut r0 = vec![0.0; N];
    sys.residual(&x, &mut r0);
    let mut jac = DMatrix::zeros(N, N);
    assert!(sys.jacobian(&x, &mut jac));
    let delta = 1e-7;
    for k in sim.model.n_states()..N {
        let mut xp = x;
        xp[k] += delta;
        let mut r1 = vec![0.0; N];
        sys.residual(&xp, &mut r1);
        let change = r1[k] - r0[k];
        assert!((change - delta).abs() < 1e-9 * delta.max(1.0) + 1e-12, "row {k}: {change}");
        for i in 0..N {
            if jac[(i, k)] == 0.0 {
                assert!((r1[i] - r0[i]).abs() <= 1e-15 * (1.0 + r0[i].abs()), "row {i} moved with unknown {k}");
            }
        }
    }
}

#[test]
fn algebraic_rows_are_local() {
    algebraic_locality(Topology::Rl, NetworkFrame::Abc);
    algebraic_locality(Topology::Resistive, NetworkFrame::Abc);
    algebraic_locality(Topology::Resistive, NetworkFrame::Dq);
}

#[test]
fn equilibrium_is_a_fixed_point_of_the_residual() {
    let (scenario, config) = stiff_grid_rl();
    let sim = Simulator::new(scenario, config).unwrap();
    let s = sim.initialize().unwrap();
    let sys = sim.step_system(&s);
    let held = sim.model.complete(&s.x, &sys.inputs);
    let mut r = vec![0.0; N];
    sys.residual(&held, &mut r);
    let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= config.solver.tol, "{worst:e}");
}

#[test]
fn record_count_and_times() {
    for (dt, t_end) in [(50e-6, 0.01), (1e-4, 0.0123), (2e-4, 0.05)] {
        let config = SimConfig { dt, t_end, ..Default::default() };
        let recs = run_scenario(&Scenario::default(), &config).unwrap();
        assert_eq!(recs.len(), (t_end / dt + 1e-9).floor() as usize + 1);
        for (k, r) in recs.iter().enumerate() {
            assert_eq!(r.t(), k as f64 * dt);
        }
    }
}

#[test]
fn omega_hat_identity_holds_in_records() {
    let case = &default_scenarios()[0];
    let sim = Simulator::new(case.scenario.clone(), SimConfig { t_end: 0.08, ..case.config }).unwrap();
    let w = sim.model.omega;
    for r in sim.run().unwrap() {
        let (d, wh) = (r.get("delta_pll_pu").unwrap(), r.get("omega_hat_rad_s").unwrap());
        assert!((wh - w * (1.0 + d)).abs() <= 1e-9 * w);
    }
}

#[test]
fn resistive_power_balance() {
    let (mut scenario, mut config) = resistive_divider();
    scenario.grid.theta_dist = 0.1;
    scenario.grid.t_dist = 0.01;
    config.t_end = 0.03;
    let sim = Simulator::new(scenario, config).unwrap();
    let r = sim.model.z.rf + sim.model.z.rg;
    let mut checked = 0;
    sim.run_observed(|s| {
        let inp = sim.schedule.at(s.step, Side::Right);
        let th = sim.model.theta_hat(&s.x, &inp);
        let vs = crate::frames::inverse_park(sim.model.vslack_dq(th, &inp), th);
        let i = s.abc(IG_A);
        let lhs = crate::frames::inverse_park(s.dq(EINV_D), th).dot(i) - vs.dot(i);
        let rhs = i.dot(i) * r;
        assert!((lhs - rhs).abs() <= 1e-8, "t = {}: {lhs} vs {rhs}", s.t);
        checked += 1;
    })
    .unwrap();
    assert_eq!(checked, config.steps() as usize + 1);
}

#[test]
fn runs_are_deterministic() {
    let case = &default_scenarios()[1];
    let config = SimConfig { t_end: 0.06, ..case.config };
    let a = run_scenario(&case.scenario, &config).unwrap();
    let b = run_scenario(&case.scenario, &config).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.values.map(f64::to_bits) == y.values.map(f64::to_bits)));
}

#[test]
fn batch_matches_sequential() {
    let jobs: Vec<_> = default_scenarios().into_iter().map(|c| (c.scenario, SimConfig { t_end: 0.06, ..c.config })).collect();
    assert_eq!(run_batch(&jobs), run_batch_sequential(&jobs));
}

#[test]
fn solver_failure_keeps_partial_records() {
    let config = SimConfig {
        t_end: 0.02,
        solver: crate::numerics::NewtonSettings { max_iter: 1, ..Default::default() },
        ..Default::default()
    };
    let scenario = Scenario {
        events: vec![ScheduledEvent { time: 0.01, event: Event::PhaseJump(1.0) }],
        ..Default::default()
    };
    let err = run_scenario(&scenario, &config).unwrap_err();
    assert!(matches!(err.error, SimError::Solver { .. }), "{err}");
    assert!(!err.partial.is_empty());
    assert!(err.partial.len() < config.steps() as usize + 1);
}

#[test]
fn inconsistent_start_is_rejected() {
    let (mut scenario, config) = resistive_divider();
    scenario.network = crate::network::NetworkParams::balanced(1e-4, 0.0, 1e-4, 0.0);
    let err = run_scenario(&scenario, &config).unwrap_err();
    assert!(matches!(err.error, SimError::InitResidualTooLarge { .. }), "{err}");
}

#[test]
fn stability_guard() {
    let config = SimConfig { dt: 1e-2, t_end: 0.1, ..Default::default() };
    let scenario = Scenario { pll: crate::controller::PllGains { tf: 1e-3, ..Default::default() }, ..Default::default() };
    let err = validate(&scenario, &config).unwrap_err();
    assert_eq!(err.path, "simulation.dt");
}

#[test]
fn events_must_be_ordered() {
    let scenario = Scenario {
        events: vec![
            ScheduledEvent { time: 0.2, event: Event::PStep(0.1) },
            ScheduledEvent { time: 0.1, event: Event::QStep(0.1) },
        ],
        ..Default::default()
    };
    let err = validate(&scenario, &SimConfig::default()).unwrap_err();
    assert_eq!(err.path, "events[1].time");
}

#[test]
fn euler_filter_matches_trapezoid_and_exponential() {
    let (tf, dt, steps) = (5e-3, 50e-6, 400);
    let filter = FirstOrderFilter::new(tf, CompanionForm::Norton);
    let c = filter.companion();
    let (mut trap, mut euler) = (0.0f64, 0.0f64);
    let h = dt / 1000.0;
    for n in 1..=steps {
        let f_prev = filter.rate(1.0, trap);
        // linear in the new state: solve the companion row directly
        let (dx, df) = c.sensitivities(dt);
        let r0 = c.residual(trap, trap, f_prev, f_prev, dt);
        let slope = dx + df * (-1.0 / tf);
        trap -= r0 / slope;
        for _ in 0..1000 {
            euler += h * filter.rate(1.0, euler);
        }
        let exact = 1.0 - (-(n as f64) * dt / tf).exp();
        assert!((euler - trap).abs() < 1e-4, "step {n}");
        assert!((trap - exact).abs() < 1e-5);
    }
}

#[test]
fn sequential_explicit_mode_runs_euler() {
    let case = &default_scenarios()[1];
    let config = SimConfig { t_end: 0.06, dt: 10e-6, integrator: Integrator::SequentialExplicit, ..case.config };
    let sim = Simulator::new(case.scenario.clone(), config).unwrap();
    let a = sim.run().unwrap();
    let b = sim.euler_run(1).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.get("newton_iters") == Some(0.0)));
}
