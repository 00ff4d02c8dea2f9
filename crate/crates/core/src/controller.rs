//! Grid-following control stack: PLL, power controller and current controller.
//!
//! Every block is written as continuous-time rate and output functions. The
//! simulator discretizes the rates with trapezoidal companion models and solves
//! all blocks together in one Newton system per step.

use crate::frames::DqPair;
use crate::numerics::{Companion, CompanionForm, Storage};

/// First-order low-pass `1 / (1 + s T)`, realized as an RC branch with unit
/// capacitance and `R = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderFilter {
    pub time_constant: f64,
    pub form: CompanionForm,
}

impl FirstOrderFilter {
    pub fn new(time_constant: f64, form: CompanionForm) -> Self {
        Self { time_constant, form }
    }

    pub fn rate(&self, input: f64, state: f64) -> f64 {
        filter_rate(input, state, self.time_constant)
    }

    pub fn companion(&self) -> Companion {
        Companion::new(self.form, Storage::Capacitor { c: 1.0 })
    }

    /// Equivalent resistance of the RC realization.
    pub fn resistance(&self) -> f64 {
        self.time_constant
    }
}

/// `(input - state) / T`.
#[inline]
pub fn filter_rate(input: f64, state: f64, time_constant: f64) -> f64 {
    (input - state) / time_constant
}

/// Continuous PI controller `u = kp e + I`, `dI/dt = ki e`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiBlock {
    pub kp: f64,
    pub ki: f64,
    pub integral_state: f64,
}

impl PiBlock {
    pub fn new(kp: f64, ki: f64) -> Self {
        Self { kp, ki, integral_state: 0.0 }
    }

    pub fn with_state(self, integral_state: f64) -> Self {
        Self { integral_state, ..self }
    }
}

#[inline]
pub fn pi_output(error: f64, block: &PiBlock) -> f64 {
    block.kp * error + block.integral_state
}

#[inline]
pub fn pi_rate(error: f64, block: &PiBlock) -> f64 {
    block.ki * error
}

/// Integrators (PI integral states, PLL angle) use a unit capacitor fed by a
/// current source.
pub fn integrator_companion(form: CompanionForm) -> Companion {
    Companion::new(form, Storage::Capacitor { c: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllGains {
    pub kp: f64,
    pub ki: f64,
    /// Input filter time constant (s).
    pub tf: f64,
}

impl Default for PllGains {
    fn default() -> Self {
        Self { kp: 0.25, ki: 4.0, tf: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PllState {
    /// Filtered q-axis PCC voltage (pu).
    pub vq_fil: f64,
    /// PI integral state.
    pub i_pll: f64,
    /// Per-unit frequency deviation.
    pub delta_pll: f64,
    /// Angle deviation from `omega t` (rad).
    pub theta_pll: f64,
    /// Estimated angular frequency (rad/s).
    pub omega_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllOutputs {
    pub delta_pll: f64,
    pub omega_hat: f64,
    /// `d theta_pll / dt` (rad/s).
    pub theta_rate: f64,
}

pub fn pll_outputs(state: &PllState, gains: &PllGains, omega_nom: f64) -> PllOutputs {
    let block = PiBlock::new(gains.kp, gains.ki).with_state(state.i_pll);
    let delta_pll = pi_output(state.vq_fil, &block);
    PllOutputs {
        delta_pll,
        omega_hat: omega_nom * (1.0 + delta_pll),
        theta_rate: omega_nom * delta_pll,
    }
}

/// Instantaneous power from dq quantities with the 3/2 factor matching the
/// amplitude-invariant Park transform. Returns `(P, Q)`.
#[inline]
pub fn power_compute(v: DqPair, i: DqPair) -> (f64, f64) {
    (1.5 * (v.d * i.d + v.q * i.q), 1.5 * (v.d * i.q - v.q * i.d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCtrlGains {
    pub kp: f64,
    pub ki: f64,
    pub tf: f64,
}

impl Default for PowerCtrlGains {
    fn default() -> Self {
        Self { kp: 0.1, ki: 10.0, tf: 5e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerCtrlState {
    pub p_g: f64,
    pub q_g: f64,
    pub p_fil: f64,
    pub q_fil: f64,
    pub int_p: f64,
    pub int_q: f64,
    pub iref: DqPair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCtrlOutputs {
    pub iref: DqPair,
    /// `(dI_P/dt, dI_Q/dt)`.
    pub integral_rates: (f64, f64),
}

/// Current references from the filtered-power tracking errors.
pub fn power_ctrl_outputs(p_ref: f64, q_ref: f64, state: &PowerCtrlState, gains: &PowerCtrlGains) -> PowerCtrlOutputs {
    let d = PiBlock::new(gains.kp, gains.ki).with_state(state.int_p);
    let q = PiBlock::new(gains.kp, gains.ki).with_state(state.int_q);
    let ep = p_ref - state.p_fil;
    let eq = q_ref - state.q_fil;
    PowerCtrlOutputs {
        iref: DqPair::new(pi_output(ep, &d), pi_output(eq, &q)),
        integral_rates: (pi_rate(ep, &d), pi_rate(eq, &q)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentCtrlGains {
    pub kp: f64,
    pub ki: f64,
    pub tf: f64,
}

impl Default for CurrentCtrlGains {
    fn default() -> Self {
        Self { kp: 0.3, ki: 20.0, tf: 5e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentCtrlState {
    /// Filtered grid current.
    pub ifil: DqPair,
    /// PI integral states `V_cc`.
    pub vcc: DqPair,
    /// PI outputs.
    pub eps: DqPair,
    /// Inverter voltage command.
    pub einv: DqPair,
}

/// Network representation seen by the controller and the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    /// Purely resistive filter and line; the inverter command is the PI output.
    Resistive,
    /// Series R-L filter and line with decoupling feedforward.
    #[default]
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentCtrlOutputs {
    pub eps: DqPair,
    pub einv: DqPair,
    /// `dV_cc/dt` per axis.
    pub integral_rates: DqPair,
}

/// PI on the filtered-current error plus, in R-L mode, the cross-coupling and
/// PCC-voltage feedforward. The feedforward uses the raw grid current and the
/// PLL frequency estimate.
#[allow(clippy::too_many_arguments)]
pub fn current_ctrl_outputs(
    iref: DqPair,
    state: &CurrentCtrlState,
    gains: &CurrentCtrlGains,
    omega_hat: f64,
    ig: DqPair,
    vg: DqPair,
    lf: f64,
    topology: Topology,
) -> CurrentCtrlOutputs {
    let err = iref - state.ifil;
    let bd = PiBlock::new(gains.kp, gains.ki).with_state(state.vcc.d);
    let bq = PiBlock::new(gains.kp, gains.ki).with_state(state.vcc.q);
    let eps = DqPair::new(pi_output(err.d, &bd), pi_output(err.q, &bq));
    let einv = match topology {
        Topology::Resistive => eps,
        Topology::Rl => decoupled_command(eps, omega_hat, ig, vg, lf),
    };
    CurrentCtrlOutputs {
        eps,
        einv,
        integral_rates: DqPair::new(pi_rate(err.d, &bd), pi_rate(err.q, &bq)),
    }
}

/// `e_inv = eps + omega_hat L_f J i_g + v_g`.
#[inline]
pub fn decoupled_command(eps: DqPair, omega_hat: f64, ig: DqPair, vg: DqPair, lf: f64) -> DqPair {
    DqPair::new(eps.d - omega_hat * lf * ig.q + vg.d, eps.q + omega_hat * lf * ig.d + vg.q)
}
