//! Simultaneous trapezoidal simulation of the controller, plant and support
//! functions, plus an explicit reference integrator.

pub mod layout;
pub mod model;
pub mod residual;
pub mod scenario;

pub use layout::{series, SimState, TimeSeriesRecord, N, SIGNALS};
pub use model::Model;
pub use scenario::{Event, Inputs, Integrator, NetworkFrame, Scenario, ScheduledEvent, Schedule, Side, SimConfig};

use crate::controller::Topology;
use crate::numerics::{newton_solve, SolveError};
use crate::parallel;
use layout::*;
use residual::StepSystem;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ValidationError {
    /// Dotted location of the offending value, e.g. `simulation.dt`.
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("initial residual {residual:.3e} exceeds bound {bound:.3e}")]
    InitResidualTooLarge { residual: f64, bound: f64 },
    #[error("solver failed at t = {t:.6} s: {source}")]
    Solver { t: f64, source: SolveError },
}

/// A failed run keeps everything logged before the failure.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{error}")]
pub struct RunError {
    pub partial: Vec<TimeSeriesRecord>,
    pub error: SimError,
}

pub type RunResult = Result<Vec<TimeSeriesRecord>, RunError>;

pub fn validate(scenario: &Scenario, config: &SimConfig) -> Result<(), ValidationError> {
    let err = |p: &str, m: String| Err(ValidationError::new(p, m));
    let sim = |k: &str| format!("simulation.{k}");
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return err(&sim("dt"), format!("must be positive, got {}", config.dt));
    }
    if !(config.t_end > config.dt && config.t_end.is_finite()) {
        return err(&sim("t_end"), format!("must exceed dt = {}, got {}", config.dt, config.t_end));
    }
    for (path, tf) in [("pll.tf", scenario.pll.tf), ("power_control.tf", scenario.power.tf), ("current_control.tf", scenario.current.tf)] {
        if !(tf > 0.0) {
            return err(path, format!("filter time constant must be positive, got {tf}"));
        }
        if config.dt >= 2.0 * tf {
            return err(&sim("dt"), format!("dt = {} must be below twice {path} = {tf}", config.dt));
        }
    }
    let solver = &config.solver;
    if !(solver.tol > 0.0) {
        return err(&sim("tol"), format!("must be positive, got {}", solver.tol));
    }
    if solver.max_iter == 0 {
        return err(&sim("max_iter"), "must be at least 1".into());
    }
    if !(solver.damping > 0.0 && solver.damping <= 1.0) {
        return err(&sim("damping"), format!("must lie in (0, 1], got {}", solver.damping));
    }
    if !(config.epsilon.epsilon > 0.0 && config.epsilon.epsilon.is_finite()) {
        return err(&sim("epsilon"), format!("must be positive, got {}", config.epsilon.epsilon));
    }
    if !(config.init_residual_bound > 0.0) {
        return err(&sim("init_residual_bound"), "must be positive".into());
    }
    if !(scenario.grid.vm > 0.0) {
        return err("grid.vm", format!("must be positive, got {}", scenario.grid.vm));
    }
    if !(scenario.grid.f > 0.0) {
        return err("grid.f", format!("must be positive, got {}", scenario.grid.f));
    }
    if !(scenario.grid.t_dist >= 0.0 && scenario.grid.t_dist <= config.t_end) {
        return err("grid.t_dist", format!("must lie in [0, t_end], got {}", scenario.grid.t_dist));
    }
    let net = &scenario.network;
    for (name, v) in [("filter.rf", net.rf), ("filter.xf", net.lf), ("network.rg", net.rg), ("network.xg", net.lg)] {
        if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return err(name, "must be finite and non-negative".into());
        }
        if v.iter().any(|x| *x != v[0]) {
            return err(name, "per-phase values must be balanced".into());
        }
    }
    match config.topology {
        Topology::Resistive => {
            if let Err(e) = net.check_resistive() {
                return err("network.rg", e.to_string());
            }
        }
        Topology::Rl => {
            if !(net.lf[0] > 0.0) {
                return err("filter.xf", "R-L topology needs a positive filter reactance".into());
            }
        }
    }
    let fs = &scenario.freq_support;
    let vv = &scenario.volt_var;
    for (name, v) in [
        ("frequency_support.kf", fs.kf),
        ("frequency_support.fdb", fs.fdb),
        ("volt_var.kv", vv.kv),
        ("volt_var.vdb", vv.vdb),
        ("volt_var.qmax", vv.qmax),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return err(name, format!("must be finite and non-negative, got {v}"));
        }
    }
    let mut last = f64::NEG_INFINITY;
    for (k, e) in scenario.events.iter().enumerate() {
        if !(e.time >= 0.0 && e.time <= config.t_end) {
            return err(&format!("events[{k}].time"), format!("must lie in [0, t_end], got {}", e.time));
        }
        if e.time <= last {
            return err(&format!("events[{k}].time"), "event times must be strictly increasing".into());
        }
        last = e.time;
    }
    Ok(())
}

pub struct Simulator {
    pub scenario: Scenario,
    pub config: SimConfig,
    pub model: Model,
    pub schedule: Schedule,
}

impl Simulator {
    pub fn new(scenario: Scenario, config: SimConfig) -> Result<Self, SimError> {
        validate(&scenario, &config)?;
        let model = Model::new(&scenario, &config);
        let schedule = Schedule::new(&scenario, config.dt);
        Ok(Self { scenario, config, model, schedule })
    }

    fn time(&self, step: u64) -> f64 {
        step as f64 * self.config.dt
    }

    /// Dynamic states from the operating point `(P_ref, Q_ref)` at nominal voltage.
    pub fn initial_states(&self) -> [f64; N] {
        let sc = &self.scenario;
        let inp = self.schedule.at(0, Side::Right);
        let (vm, p0, q0) = (sc.grid.vm, sc.p_ref, sc.q_ref);
        let id = 2.0 / 3.0 * p0 / vm;
        let iq = 2.0 / 3.0 * q0 / vm;
        let rg = self.model.z.rg;
        let mut s = [0.0; N];
        s[THETA_PLL] = inp.slack_angle - self.model.omega * inp.t;
        s[P_FIL] = p0;
        s[Q_FIL] = q0;
        s[INT_P] = id;
        s[INT_Q] = iq;
        s[IFIL_D] = id;
        s[IFIL_Q] = iq;
        s[VCC_D] = rg * id;
        s[VCC_Q] = rg * iq;
        s[IG_D] = id;
        s[IG_Q] = iq;
        s
    }

    /// Consistent state at `t = 0`. Fails if the operating point is too far
    /// from equilibrium for the configured bound.
    pub fn initialize(&self) -> Result<SimState, SimError> {
        let inp = self.schedule.at(0, Side::Right);
        let guess = self.model.complete(&self.initial_states(), &inp);
        let sys = StepSystem::pinned(&self.model, &guess, inp);
        let rep = newton_solve(&sys, &guess, &self.config.solver).map_err(|source| SimError::Solver { t: 0.0, source })?;
        let x: [f64; N] = rep.x.try_into().expect("dimension");
        let residual = self.init_residual(&x, &inp);
        if !(residual <= self.config.init_residual_bound) {
            return Err(SimError::InitResidualTooLarge { residual, bound: self.config.init_residual_bound });
        }
        Ok(SimState { step: 0, t: 0.0, x, newton_iters: rep.iterations })
    }

    /// `max(dt |dx/dt|)` over the dynamic states: how far a held state is from
    /// satisfying one step.
    pub fn init_residual(&self, x: &[f64; N], inp: &Inputs) -> f64 {
        let f = self.model.rates(x, inp, |_, _, _| {});
        f[..self.model.n_states()].iter().fold(0.0, |m, v| m.max((v * self.config.dt).abs()))
    }

    /// The nonlinear system solved when stepping from `prev`.
    pub fn step_system(&self, prev: &SimState) -> StepSystem<'_> {
        let n = prev.step + 1;
        let prev_inp = self.schedule.at(prev.step, Side::Right);
        let inp = self.schedule.at(n, Side::Left);
        StepSystem::new(&self.model, &prev.x, &prev_inp, inp, self.config.dt)
    }

    /// One trapezoidal step; events landing on the new boundary are applied
    /// after the solve, followed by an algebraic re-solve.
    pub fn step(&self, prev: &SimState) -> Result<SimState, SimError> {
        let n = prev.step + 1;
        let t = self.time(n);
        let fail = |source| SimError::Solver { t, source };
        let sys = self.step_system(prev);
        let rep = newton_solve(&sys, &prev.x, &self.config.solver).map_err(fail)?;
        let mut x: [f64; N] = rep.x.try_into().expect("dimension");
        if self.schedule.has_events_at(n) {
            let sys = StepSystem::pinned(&self.model, &x, self.schedule.at(n, Side::Right));
            let after = newton_solve(&sys, &x, &self.config.solver).map_err(fail)?;
            x = after.x.try_into().expect("dimension");
        }
        Ok(SimState { step: n, t, x, newton_iters: rep.iterations })
    }

    /// Full run; `observe` sees every solved state including the initial one.
    pub fn run_observed<F: FnMut(&SimState)>(&self, mut observe: F) -> RunResult {
        if self.config.integrator == Integrator::SequentialExplicit {
            return self.euler_run_observed(1, observe);
        }
        let mut records = Vec::with_capacity(self.config.steps() as usize + 1);
        let mut state = match self.initialize() {
            Ok(s) => s,
            Err(error) => return Err(RunError { partial: records, error }),
        };
        observe(&state);
        records.push(state.record());
        for _ in 0..self.config.steps() {
            state = match self.step(&state) {
                Ok(s) => s,
                Err(error) => return Err(RunError { partial: records, error }),
            };
            observe(&state);
            records.push(state.record());
        }
        Ok(records)
    }

    pub fn run(&self) -> RunResult {
        self.run_observed(|_| {})
    }

    /// Forward Euler with `refinement` sub-steps per `dt`, evaluating the
    /// blocks one after another from the current states. Logged on the `dt` grid.
    pub fn euler_run(&self, refinement: u32) -> RunResult {
        self.euler_run_observed(refinement, |_| {})
    }

    fn euler_run_observed<F: FnMut(&SimState)>(&self, refinement: u32, mut observe: F) -> RunResult {
        let mut records = Vec::with_capacity(self.config.steps() as usize + 1);
        let init = match self.initialize() {
            Ok(s) => s,
            Err(error) => return Err(RunError { partial: records, error }),
        };
        observe(&init);
        records.push(init.record());
        let ns = self.model.n_states();
        let h = self.config.dt / refinement as f64;
        let mut s = init.x;
        for n in 0..self.config.steps() {
            for sub in 0..refinement {
                let inp = self.schedule.inputs(n, sub, refinement, Side::Right);
                let x = self.model.complete(&s, &inp);
                let f = self.model.rates(&x, &inp, |_, _, _| {});
                for i in 0..ns {
                    s[i] += h * f[i];
                }
            }
            let t = self.time(n + 1);
            let x = self.model.complete(&s, &self.schedule.at(n + 1, Side::Right));
            if x.iter().any(|v| !v.is_finite()) {
                let error = SimError::Solver { t, source: SolveError::NonFinite };
                return Err(RunError { partial: records, error });
            }
            let state = SimState { step: n + 1, t, x, newton_iters: 0 };
            observe(&state);
            records.push(state.record());
        }
        Ok(records)
    }
}

/// Runs one scenario under one configuration.
pub fn run_scenario(scenario: &Scenario, config: &SimConfig) -> RunResult {
    match Simulator::new(scenario.clone(), *config) {
        Ok(sim) => sim.run(),
        Err(error) => Err(RunError { partial: Vec::new(), error }),
    }
}

/// Independent runs, in parallel when the `parallel` feature is on.
pub fn run_batch(jobs: &[(Scenario, SimConfig)]) -> Vec<RunResult> {
    parallel::map(jobs, |(s, c)| run_scenario(s, c))
}

/// Same as [`run_batch`] but always on the calling thread.
pub fn run_batch_sequential(jobs: &[(Scenario, SimConfig)]) -> Vec<RunResult> {
    parallel::map_sequential(jobs, |(s, c)| run_scenario(s, c))
}

/// A scenario paired with the configuration it is meant to run under.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub name: &'static str,
    pub scenario: Scenario,
    pub config: SimConfig,
}

/// Stiff grid with a lossless R-L filter; the initial operating point is an
/// exact equilibrium.
pub fn stiff_grid_rl() -> (Scenario, SimConfig) {
    let omega = std::f64::consts::TAU * 60.0;
    let scenario = Scenario {
        network: crate::network::NetworkParams::balanced(0.0, 0.1 / omega, 0.0, 0.0),
        ..Default::default()
    };
    let config = SimConfig { topology: Topology::Rl, ..Default::default() };
    (scenario, config)
}

/// Resistive divider network with `R_f = 0.05` and `R_g = 0.1`.
pub fn resistive_divider() -> (Scenario, SimConfig) {
    let scenario = Scenario {
        network: crate::network::NetworkParams::balanced(0.05, 0.0, 0.1, 0.0),
        ..Default::default()
    };
    let config = SimConfig { topology: Topology::Resistive, ..Default::default() };
    (scenario, config)
}

/// Representative disturbances on the default R-L network, plus the
/// stiff-grid equilibrium. Disturbances land at 50 ms of a 200 ms run.
pub fn default_scenarios() -> Vec<Case> {
    use crate::grid_support::{FreqSupportParams, VoltVarParams};
    let base = Scenario::default();
    let config = SimConfig { t_end: 0.2, ..Default::default() };
    let at = |event| vec![ScheduledEvent { time: 0.05, event }];
    let (stiff, stiff_cfg) = stiff_grid_rl();
    vec![
        Case {
            name: "phase_jump",
            scenario: Scenario {
                grid: crate::frames::GridSourceParams { theta_dist: 0.2, t_dist: 0.05, ..Default::default() },
                ..base.clone()
            },
            config,
        },
        Case { name: "p_step", scenario: Scenario { events: at(Event::PStep(0.1)), ..base.clone() }, config },
        Case { name: "q_step", scenario: Scenario { events: at(Event::QStep(0.1)), ..base.clone() }, config },
        Case {
            name: "frequency_support",
            scenario: Scenario {
                freq_support: FreqSupportParams { enabled: true, ..Default::default() },
                events: at(Event::FreqOffset(0.005)),
                ..base.clone()
            },
            config,
        },
        Case {
            name: "volt_var",
            scenario: Scenario {
                volt_var: VoltVarParams { vtarget: 0.99, ..Default::default() },
                events: at(Event::SupportToggle { frequency: false, volt_var: true }),
                ..base
            },
            config,
        },
        Case { name: "stiff_quiescent", scenario: stiff, config: SimConfig { t_end: 0.2, ..stiff_cfg } },
    ]
}

#[cfg(test)]
mod tests;
