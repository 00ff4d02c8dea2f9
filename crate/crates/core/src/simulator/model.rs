//! Flattened model parameters, state derivatives and the explicit
//! evaluation chain used by the reference integrators.

use super::layout::*;
use super::scenario::{Inputs, NetworkFrame, Scenario, SimConfig};
use crate::controller::{
    filter_rate, integrator_companion, power_compute, CurrentCtrlGains, FirstOrderFilter, PllGains, PowerCtrlGains,
    Topology,
};
use crate::frames::{inverse_park, park, DqPair};
use crate::grid_support::{freq_deviation, psup_smooth_with_slope, qsup_smooth_with_slope, FreqSupportParams, VoltVarParams};
use crate::network::{DqImpedance, NetworkParams};
use crate::numerics::{Companion, CompanionForm, SmoothingParams, Storage};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub omega: f64,
    pub pll: PllGains,
    pub power: PowerCtrlGains,
    pub current: CurrentCtrlGains,
    pub freq_support: FreqSupportParams,
    pub volt_var: VoltVarParams,
    pub eps: SmoothingParams,
    pub network: NetworkParams,
    pub z: DqImpedance,
    pub topology: Topology,
    pub frame: NetworkFrame,
    pub companions: [Companion; MAX_STATES],
}

impl Model {
    pub fn new(scenario: &Scenario, config: &SimConfig) -> Self {
        let form = config.companion_form;
        let filter = |tf: f64| FirstOrderFilter::new(tf, form).companion();
        let int = integrator_companion(form);
        let z = scenario.network.dq();
        let line = Companion::new(form, Storage::Inductor { l: z.lf + z.lg });
        let companions = [
            filter(scenario.pll.tf),
            int,
            int,
            filter(scenario.power.tf),
            filter(scenario.power.tf),
            int,
            int,
            filter(scenario.current.tf),
            filter(scenario.current.tf),
            int,
            int,
            line,
            line,
        ];
        Self {
            omega: scenario.grid.omega(),
            pll: scenario.pll,
            power: scenario.power,
            current: scenario.current,
            freq_support: scenario.freq_support,
            volt_var: scenario.volt_var,
            eps: config.epsilon,
            network: scenario.network,
            z,
            topology: config.topology,
            frame: config.network_frame,
            companions,
        }
    }

    pub fn form(&self) -> CompanionForm {
        self.companions[0].form
    }

    /// Number of leading unknowns integrated by companion models.
    pub fn n_states(&self) -> usize {
        match self.topology {
            Topology::Resistive => CONTROL_STATES,
            Topology::Rl => MAX_STATES,
        }
    }

    pub fn theta_hat(&self, x: &[f64], inp: &Inputs) -> f64 {
        self.omega * inp.t + x[THETA_PLL]
    }

    /// Slack voltage in the PLL frame.
    pub fn vslack_dq(&self, theta_hat: f64, inp: &Inputs) -> DqPair {
        park(inp.vslack(), theta_hat)
    }

    pub fn psup(&self, omega_hat: f64, inp: &Inputs) -> (f64, f64) {
        let p = FreqSupportParams { enabled: inp.freq_support, ..self.freq_support };
        let (v, slope) = psup_smooth_with_slope(freq_deviation(omega_hat, self.omega), &p, &self.eps);
        (v, slope / self.omega)
    }

    pub fn qsup(&self, vgd: f64, inp: &Inputs) -> (f64, f64) {
        let p = VoltVarParams { enabled: inp.volt_var, ..self.volt_var };
        qsup_smooth_with_slope(vgd, &p, &self.eps)
    }

    /// Derivatives of the dynamic states at `x`. `d(row, col, value)` receives
    /// every nonzero partial `d f_row / d x_col`.
    pub fn rates<F: FnMut(usize, usize, f64)>(&self, x: &[f64], inp: &Inputs, mut d: F) -> [f64; MAX_STATES] {
        let mut f = [0.0; MAX_STATES];
        let (tp, tpq, tig) = (self.pll.tf, self.power.tf, self.current.tf);

        f[VQ_FIL] = filter_rate(x[VG_Q], x[VQ_FIL], tp);
        d(VQ_FIL, VG_Q, 1.0 / tp);
        d(VQ_FIL, VQ_FIL, -1.0 / tp);

        f[I_PLL] = self.pll.ki * x[VQ_FIL];
        d(I_PLL, VQ_FIL, self.pll.ki);

        f[THETA_PLL] = self.omega * x[DELTA_PLL];
        d(THETA_PLL, DELTA_PLL, self.omega);

        for (row, src) in [(P_FIL, P_G), (Q_FIL, Q_G)] {
            f[row] = filter_rate(x[src], x[row], tpq);
            d(row, src, 1.0 / tpq);
            d(row, row, -1.0 / tpq);
        }

        let ki = self.power.ki;
        f[INT_P] = ki * (inp.p_ref + x[P_SUP] - x[P_FIL]);
        d(INT_P, P_SUP, ki);
        d(INT_P, P_FIL, -ki);
        f[INT_Q] = ki * (inp.q_ref + x[Q_SUP] - x[Q_FIL]);
        d(INT_Q, Q_SUP, ki);
        d(INT_Q, Q_FIL, -ki);

        for (row, src) in [(IFIL_D, IG_D), (IFIL_Q, IG_Q)] {
            f[row] = filter_rate(x[src], x[row], tig);
            d(row, src, 1.0 / tig);
            d(row, row, -1.0 / tig);
        }

        let ki = self.current.ki;
        for (row, iref, ifil) in [(VCC_D, IREF_D, IFIL_D), (VCC_Q, IREF_Q, IFIL_Q)] {
            f[row] = ki * (x[iref] - x[ifil]);
            d(row, iref, ki);
            d(row, ifil, -ki);
        }

        if self.topology == Topology::Rl {
            let th = self.theta_hat(x, inp);
            let vs = self.vslack_dq(th, inp);
            let (r, l) = self.z.series();
            let w = x[OMEGA_HAT];
            let (id, iq) = (x[IG_D], x[IG_Q]);
            f[IG_D] = (-r * id + w * l * iq + x[EINV_D] - vs.d) / l;
            d(IG_D, IG_D, -r / l);
            d(IG_D, IG_Q, w);
            d(IG_D, OMEGA_HAT, iq);
            d(IG_D, EINV_D, 1.0 / l);
            d(IG_D, THETA_PLL, -vs.q / l);
            f[IG_Q] = (-r * iq - w * l * id + x[EINV_Q] - vs.q) / l;
            d(IG_Q, IG_Q, -r / l);
            d(IG_Q, IG_D, -w);
            d(IG_Q, OMEGA_HAT, -id);
            d(IG_Q, EINV_Q, 1.0 / l);
            d(IG_Q, THETA_PLL, vs.d / l);
        }
        f
    }

    /// Evaluates every algebraic unknown in dependency order from the dynamic
    /// states `s` (only the first [`Model::n_states`] entries are read).
    pub fn complete(&self, s: &[f64], inp: &Inputs) -> [f64; N] {
        let mut x = [0.0; N];
        let n = self.n_states();
        x[..n].copy_from_slice(&s[..n]);

        let th = self.theta_hat(&x, inp);
        let vs = self.vslack_dq(th, inp);
        x[DELTA_PLL] = self.pll.kp * x[VQ_FIL] + x[I_PLL];
        let w = self.omega * (1.0 + x[DELTA_PLL]);
        x[OMEGA_HAT] = w;
        x[P_SUP] = self.psup(w, inp).0;
        x[IREF_D] = self.power.kp * (inp.p_ref + x[P_SUP] - x[P_FIL]) + x[INT_P];
        x[EPS_D] = self.current.kp * (x[IREF_D] - x[IFIL_D]) + x[VCC_D];

        let z = self.z;
        match self.topology {
            Topology::Resistive => {
                let r = z.rf + z.rg;
                x[VG_D] = (x[EPS_D] * z.rg + vs.d * z.rf) / r;
                x[Q_SUP] = self.qsup(x[VG_D], inp).0;
                x[IREF_Q] = self.power.kp * (inp.q_ref + x[Q_SUP] - x[Q_FIL]) + x[INT_Q];
                x[EPS_Q] = self.current.kp * (x[IREF_Q] - x[IFIL_Q]) + x[VCC_Q];
                x[VG_Q] = (x[EPS_Q] * z.rg + vs.q * z.rf) / r;
                x[EINV_D] = x[EPS_D];
                x[EINV_Q] = x[EPS_Q];
                x[IG_D] = (x[EPS_D] - vs.d) / r;
                x[IG_Q] = (x[EPS_Q] - vs.q) / r;
            }
            Topology::Rl => {
                let (id, iq) = (x[IG_D], x[IG_Q]);
                let did = (x[EPS_D] - z.rf * id) / z.lf;
                x[VG_D] = vs.d + z.rg * id + z.lg * did - w * z.lg * iq;
                x[Q_SUP] = self.qsup(x[VG_D], inp).0;
                x[IREF_Q] = self.power.kp * (inp.q_ref + x[Q_SUP] - x[Q_FIL]) + x[INT_Q];
                x[EPS_Q] = self.current.kp * (x[IREF_Q] - x[IFIL_Q]) + x[VCC_Q];
                let diq = (x[EPS_Q] - z.rf * iq) / z.lf;
                x[VG_Q] = vs.q + z.rg * iq + z.lg * diq + w * z.lg * id;
                x[EINV_D] = x[EPS_D] - w * z.lf * iq + x[VG_D];
                x[EINV_Q] = x[EPS_Q] + w * z.lf * id + x[VG_Q];
            }
        }
        let vg = DqPair::new(x[VG_D], x[VG_Q]);
        let ig = DqPair::new(x[IG_D], x[IG_Q]);
        (x[P_G], x[Q_G]) = power_compute(vg, ig);
        x[VG_A..VG_A + 3].copy_from_slice(&inverse_park(vg, th).to_array());
        x[IG_A..IG_A + 3].copy_from_slice(&inverse_park(ig, th).to_array());
        x
    }
}
