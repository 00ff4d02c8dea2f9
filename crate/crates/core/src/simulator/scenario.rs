use crate::controller::{CurrentCtrlGains, PllGains, PowerCtrlGains, Topology};
use crate::frames::{balanced, AbcTriple, GridSourceParams};
use crate::grid_support::{FreqSupportParams, VoltVarParams};
use crate::network::NetworkParams;
use crate::numerics::{CompanionForm, NewtonSettings, SmoothingParams};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// Step in the slack-source angle (rad).
    PhaseJump(f64),
    /// Step in the base active-power reference (pu).
    PStep(f64),
    /// Step in the base reactive-power reference (pu).
    QStep(f64),
    /// Flip the enable flags of the selected support functions.
    SupportToggle { frequency: bool, volt_var: bool },
    /// Sustained slack-frequency offset (pu of nominal), realized as an angle ramp.
    FreqOffset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledEvent {
    pub time: f64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridSourceParams,
    pub network: NetworkParams,
    pub pll: PllGains,
    pub power: PowerCtrlGains,
    pub current: CurrentCtrlGains,
    pub freq_support: FreqSupportParams,
    pub volt_var: VoltVarParams,
    /// Base active-power reference (pu); also `P_g(0)` for initialization.
    pub p_ref: f64,
    /// Base reactive-power reference (pu); also `Q_g(0)` for initialization.
    pub q_ref: f64,
    pub events: Vec<ScheduledEvent>,
}

impl Default for Scenario {
    fn default() -> Self {
        let omega = TAU * 60.0;
        Self {
            grid: GridSourceParams::default(),
            network: NetworkParams::balanced(0.01, 0.1 / omega, 0.01, 0.05 / omega),
            pll: PllGains::default(),
            power: PowerCtrlGains::default(),
            current: CurrentCtrlGains::default(),
            freq_support: FreqSupportParams::default(),
            volt_var: VoltVarParams::default(),
            p_ref: 0.9,
            q_ref: 0.0,
            events: Vec::new(),
        }
    }
}

/// How the resistive network equations are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NetworkFrame {
    /// Per-phase KCL/Ohm's law, then Park transform of the results.
    #[default]
    Abc,
    /// Same equations written directly in the PLL frame.
    Dq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// One simultaneous trapezoidal/Newton solve per step.
    #[default]
    Trapezoidal,
    /// Block-by-block forward Euler at `dt`. Debug aid only.
    SequentialExplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub topology: Topology,
    pub network_frame: NetworkFrame,
    pub companion_form: CompanionForm,
    pub integrator: Integrator,
    pub solver: NewtonSettings,
    pub epsilon: SmoothingParams,
    /// Largest accepted `dt * |dx/dt|` (and algebraic mismatch) at `t = 0`.
    pub init_residual_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 50e-6,
            t_end: 0.5,
            topology: Topology::Rl,
            network_frame: NetworkFrame::Abc,
            companion_form: CompanionForm::Norton,
            integrator: Integrator::Trapezoidal,
            solver: NewtonSettings::default(),
            epsilon: SmoothingParams::default(),
            init_residual_bound: 1.0,
        }
    }
}

impl SimConfig {
    /// Number of steps after `t = 0`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt + 1e-9).floor() as u64
    }
}

/// Time-varying inputs at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inputs {
    pub t: f64,
    /// Slack electrical angle (rad).
    pub slack_angle: f64,
    pub vm: f64,
    pub p_ref: f64,
    pub q_ref: f64,
    pub freq_support: bool,
    pub volt_var: bool,
}

impl Inputs {
    pub fn vslack(&self) -> AbcTriple {
        balanced(self.vm, self.slack_angle)
    }
}

/// Events snapped to step boundaries: an event takes effect at the first
/// boundary at or after its time.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    dt: f64,
    omega: f64,
    vm: f64,
    p_ref: f64,
    q_ref: f64,
    freq_support: bool,
    volt_var: bool,
    events: Vec<(u64, Event)>,
}

/// Which side of a boundary to evaluate at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Before events that land on the boundary.
    Left,
    /// After them.
    Right,
}

pub fn boundary_index(time: f64, dt: f64) -> u64 {
    (time / dt - 1e-9).ceil().max(0.0) as u64
}

impl Schedule {
    pub fn new(scenario: &Scenario, dt: f64) -> Self {
        let mut events: Vec<(u64, Event)> = scenario
            .events
            .iter()
            .map(|e| (boundary_index(e.time, dt), e.event))
            .collect();
        if scenario.grid.theta_dist != 0.0 {
            events.push((boundary_index(scenario.grid.t_dist, dt), Event::PhaseJump(scenario.grid.theta_dist)));
        }
        events.sort_by_key(|(b, _)| *b);
        Self {
            dt,
            omega: scenario.grid.omega(),
            vm: scenario.grid.vm,
            p_ref: scenario.p_ref,
            q_ref: scenario.q_ref,
            freq_support: scenario.freq_support.enabled,
            volt_var: scenario.volt_var.enabled,
            events,
        }
    }

    pub fn has_events_at(&self, step: u64) -> bool {
        self.events.iter().any(|(b, _)| *b == step)
    }

    /// Inputs at `t = (step + sub / refinement) dt`. With `sub > 0` the
    /// evaluation is strictly inside a step and `side` is irrelevant.
    pub fn inputs(&self, step: u64, sub: u32, refinement: u32, side: Side) -> Inputs {
        let t = (step as f64 + sub as f64 / refinement as f64) * self.dt;
        let mut out = Inputs {
            t,
            slack_angle: self.omega * t,
            vm: self.vm,
            p_ref: self.p_ref,
            q_ref: self.q_ref,
            freq_support: self.freq_support,
            volt_var: self.volt_var,
        };
        for &(b, event) in &self.events {
            let active = b < step || (b == step && (sub > 0 || side == Side::Right));
            if !active {
                continue;
            }
            match event {
                Event::PhaseJump(dth) => out.slack_angle += dth,
                Event::PStep(dp) => out.p_ref += dp,
                Event::QStep(dq) => out.q_ref += dq,
                Event::SupportToggle { frequency, volt_var } => {
                    out.freq_support ^= frequency;
                    out.volt_var ^= volt_var;
                }
                Event::FreqOffset(df) => out.slack_angle += self.omega * df * (t - b as f64 * self.dt),
            }
        }
        out
    }

    pub fn at(&self, step: u64, side: Side) -> Inputs {
        self.inputs(step, 0, 1, side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_snap_to_next_boundary() {
        let dt = 1e-3;
        assert_eq!(boundary_index(0.0, dt), 0);
        assert_eq!(boundary_index(0.1, dt), 100);
        assert_eq!(boundary_index(0.1005, dt), 101);
    }

    #[test]
    fn left_and_right_limits() {
        let sc = Scenario {
            events: vec![ScheduledEvent { time: 0.01, event: Event::PStep(0.1) }],
            ..Default::default()
        };
        let s = Schedule::new(&sc, 1e-3);
        assert_eq!(s.at(10, Side::Left).p_ref, 0.9);
        assert!((s.at(10, Side::Right).p_ref - 1.0).abs() < 1e-15);
        assert!((s.inputs(9, 1, 10, Side::Left).p_ref - 0.9).abs() < 1e-15);
        assert!((s.inputs(10, 1, 10, Side::Left).p_ref - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_phase_jump_and_freq_ramp() {
        let sc = Scenario {
            grid: GridSourceParams { theta_dist: 0.2, t_dist: 0.002, ..Default::default() },
            events: vec![ScheduledEvent { time: 0.004, event: Event::FreqOffset(0.01) }],
            ..Default::default()
        };
        let s = Schedule::new(&sc, 1e-3);
        let w = sc.grid.omega();
        assert!((s.at(2, Side::Left).slack_angle - w * 0.002).abs() < 1e-12);
        assert!((s.at(2, Side::Right).slack_angle - (w * 0.002 + 0.2)).abs() < 1e-12);
        let a = s.at(6, Side::Right).slack_angle;
        assert!((a - (w * 0.006 + 0.2 + w * 0.01 * 0.002)).abs() < 1e-12);
    }

    #[test]
    fn toggle_flips_flags() {
        let sc = Scenario {
            events: vec![ScheduledEvent {
                time: 0.0,
                event: Event::SupportToggle { frequency: true, volt_var: false },
            }],
            ..Default::default()
        };
        let s = Schedule::new(&sc, 1e-3);
        assert!(!s.at(0, Side::Left).freq_support);
        assert!(s.at(0, Side::Right).freq_support);
        assert!(!s.at(0, Side::Right).volt_var);
    }
}
