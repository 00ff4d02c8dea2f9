//! Per-step nonlinear system: companion rows for the dynamic states and the
//! algebraic equations of every block, with a hand-derived Jacobian.

use super::layout::*;
use super::model::Model;
use super::scenario::{Inputs, NetworkFrame};
use crate::controller::Topology;
use crate::frames::{inverse_park, park, park_rows, AbcTriple, DqPair};
use crate::numerics::ResidualSystem;
use nalgebra::DMatrix;

struct Jac<'a>(Option<&'a mut DMatrix<f64>>);

impl Jac<'_> {
    #[inline]
    fn add(&mut self, row: usize, col: usize, v: f64) {
        if let Some(j) = self.0.as_deref_mut() {
            j[(row, col)] += v;
        }
    }
}

/// How the dynamic rows are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Trapezoidal companion rows from `prev` to the new point.
    Step,
    /// Dynamic states held at `prev`; only the algebraic unknowns move.
    Pinned,
}

pub struct StepSystem<'a> {
    pub model: &'a Model,
    pub prev: [f64; N],
    /// Derivatives at `prev`, evaluated with the inputs `prev` was solved for.
    pub f_prev: [f64; MAX_STATES],
    /// Inputs at the new point.
    pub inputs: Inputs,
    pub dt: f64,
    pub mode: Mode,
    weights: [f64; N],
}

impl<'a> StepSystem<'a> {
    pub fn new(model: &'a Model, prev: &[f64; N], prev_inputs: &Inputs, inputs: Inputs, dt: f64) -> Self {
        let f_prev = model.rates(prev, prev_inputs, |_, _, _| {});
        let mut weights = [1.0; N];
        for (i, w) in weights.iter_mut().enumerate().take(model.n_states()) {
            *w = 1.0 / model.companions[i].sensitivities(dt).0;
        }
        Self { model, prev: *prev, f_prev, inputs, dt, mode: Mode::Step, weights }
    }

    pub fn pinned(model: &'a Model, states: &[f64; N], inputs: Inputs) -> Self {
        Self {
            model,
            prev: *states,
            f_prev: [0.0; MAX_STATES],
            inputs,
            dt: 0.0,
            mode: Mode::Pinned,
            weights: [1.0; N],
        }
    }

    fn eval(&self, x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>) {
        let m = self.model;
        let inp = &self.inputs;
        let mut j = Jac(jac);
        let ns = m.n_states();

        match self.mode {
            Mode::Step => {
                let mut sens = [(0.0, 0.0); MAX_STATES];
                for (i, s) in sens.iter_mut().enumerate().take(ns) {
                    *s = m.companions[i].sensitivities(self.dt);
                }
                let f = m.rates(x, inp, |row, col, v| {
                    if row < ns {
                        j.add(row, col, sens[row].1 * v)
                    }
                });
                for i in 0..ns {
                    r[i] = m.companions[i].residual(x[i], self.prev[i], f[i], self.f_prev[i], self.dt);
                    j.add(i, i, sens[i].0);
                }
            }
            Mode::Pinned => {
                for i in 0..ns {
                    r[i] = x[i] - self.prev[i];
                    j.add(i, i, 1.0);
                }
            }
        }

        // PLL
        r[DELTA_PLL] = x[DELTA_PLL] - m.pll.kp * x[VQ_FIL] - x[I_PLL];
        j.add(DELTA_PLL, DELTA_PLL, 1.0);
        j.add(DELTA_PLL, VQ_FIL, -m.pll.kp);
        j.add(DELTA_PLL, I_PLL, -1.0);
        r[OMEGA_HAT] = x[OMEGA_HAT] - m.omega * (1.0 + x[DELTA_PLL]);
        j.add(OMEGA_HAT, OMEGA_HAT, 1.0);
        j.add(OMEGA_HAT, DELTA_PLL, -m.omega);

        // power measurement
        let (vd, vq, id, iq) = (x[VG_D], x[VG_Q], x[IG_D], x[IG_Q]);
        r[P_G] = x[P_G] - 1.5 * (vd * id + vq * iq);
        j.add(P_G, P_G, 1.0);
        j.add(P_G, VG_D, -1.5 * id);
        j.add(P_G, IG_D, -1.5 * vd);
        j.add(P_G, VG_Q, -1.5 * iq);
        j.add(P_G, IG_Q, -1.5 * vq);
        r[Q_G] = x[Q_G] - 1.5 * (vd * iq - vq * id);
        j.add(Q_G, Q_G, 1.0);
        j.add(Q_G, VG_D, -1.5 * iq);
        j.add(Q_G, IG_Q, -1.5 * vd);
        j.add(Q_G, VG_Q, 1.5 * id);
        j.add(Q_G, IG_D, 1.5 * vq);

        // grid support
        let (ps, dps) = m.psup(x[OMEGA_HAT], inp);
        r[P_SUP] = x[P_SUP] - ps;
        j.add(P_SUP, P_SUP, 1.0);
        j.add(P_SUP, OMEGA_HAT, -dps);
        let (qs, dqs) = m.qsup(x[VG_D], inp);
        r[Q_SUP] = x[Q_SUP] - qs;
        j.add(Q_SUP, Q_SUP, 1.0);
        j.add(Q_SUP, VG_D, -dqs);

        // power controller
        let kp = m.power.kp;
        for (row, reference, sup, fil, int) in [
            (IREF_D, inp.p_ref, P_SUP, P_FIL, INT_P),
            (IREF_Q, inp.q_ref, Q_SUP, Q_FIL, INT_Q),
        ] {
            r[row] = x[row] - kp * (reference + x[sup] - x[fil]) - x[int];
            j.add(row, row, 1.0);
            j.add(row, sup, -kp);
            j.add(row, fil, kp);
            j.add(row, int, -1.0);
        }

        // current controller
        let kp = m.current.kp;
        for (row, iref, ifil, vcc) in [(EPS_D, IREF_D, IFIL_D, VCC_D), (EPS_Q, IREF_Q, IFIL_Q, VCC_Q)] {
            r[row] = x[row] - kp * (x[iref] - x[ifil]) - x[vcc];
            j.add(row, row, 1.0);
            j.add(row, iref, -kp);
            j.add(row, ifil, kp);
            j.add(row, vcc, -1.0);
        }

        let w = x[OMEGA_HAT];
        let lf = m.z.lf;
        match m.topology {
            Topology::Resistive => {
                r[EINV_D] = x[EINV_D] - x[EPS_D];
                j.add(EINV_D, EINV_D, 1.0);
                j.add(EINV_D, EPS_D, -1.0);
                r[EINV_Q] = x[EINV_Q] - x[EPS_Q];
                j.add(EINV_Q, EINV_Q, 1.0);
                j.add(EINV_Q, EPS_Q, -1.0);
            }
            Topology::Rl => {
                r[EINV_D] = x[EINV_D] - (x[EPS_D] - w * lf * iq + vd);
                j.add(EINV_D, EINV_D, 1.0);
                j.add(EINV_D, EPS_D, -1.0);
                j.add(EINV_D, OMEGA_HAT, lf * iq);
                j.add(EINV_D, IG_Q, w * lf);
                j.add(EINV_D, VG_D, -1.0);
                r[EINV_Q] = x[EINV_Q] - (x[EPS_Q] + w * lf * id + vq);
                j.add(EINV_Q, EINV_Q, 1.0);
                j.add(EINV_Q, EPS_Q, -1.0);
                j.add(EINV_Q, OMEGA_HAT, -lf * id);
                j.add(EINV_Q, IG_D, -w * lf);
                j.add(EINV_Q, VG_Q, -1.0);
            }
        }

        self.network_rows(x, r, &mut j);
    }

    fn network_rows(&self, x: &[f64], r: &mut [f64], j: &mut Jac<'_>) {
        let m = self.model;
        let inp = &self.inputs;
        let th = m.theta_hat(x, inp);
        let vs = m.vslack_dq(th, inp);

        match (m.topology, m.frame) {
            (Topology::Resistive, NetworkFrame::Abc) => {
                let einv = DqPair::new(x[EINV_D], x[EINV_Q]);
                let e = inverse_park(einv, th).to_array();
                let de = inverse_park(einv.rotate_quarter(), th).to_array();
                let (rd, rq) = park_rows(th);
                // d inverse_park / d e_d and d e_q per phase
                let (cd, cq) = (rd.map(|v| 1.5 * v), rq.map(|v| 1.5 * v));
                let s = inp.vslack().to_array();
                let net = &m.network;
                for k in 0..3 {
                    let (rf, rg) = (net.rf[k], net.rg[k]);
                    let rt = rf + rg;
                    let (va, ia) = (VG_A + k, IG_A + k);
                    r[va] = x[va] - (e[k] * rg + s[k] * rf) / rt;
                    j.add(va, va, 1.0);
                    j.add(va, EINV_D, -rg / rt * cd[k]);
                    j.add(va, EINV_Q, -rg / rt * cq[k]);
                    j.add(va, THETA_PLL, -rg / rt * de[k]);
                    r[ia] = x[ia] - (e[k] - s[k]) / rt;
                    j.add(ia, ia, 1.0);
                    j.add(ia, EINV_D, -cd[k] / rt);
                    j.add(ia, EINV_Q, -cq[k] / rt);
                    j.add(ia, THETA_PLL, -de[k] / rt);
                }
                for (dq_d, abc) in [(VG_D, VG_A), (IG_D, IG_A)] {
                    let v = AbcTriple::new(x[abc], x[abc + 1], x[abc + 2]);
                    let p = park(v, th);
                    r[dq_d] = x[dq_d] - p.d;
                    r[dq_d + 1] = x[dq_d + 1] - p.q;
                    j.add(dq_d, dq_d, 1.0);
                    j.add(dq_d + 1, dq_d + 1, 1.0);
                    for k in 0..3 {
                        j.add(dq_d, abc + k, -rd[k]);
                        j.add(dq_d + 1, abc + k, -rq[k]);
                    }
                    j.add(dq_d, THETA_PLL, -p.q);
                    j.add(dq_d + 1, THETA_PLL, p.d);
                }
            }
            (Topology::Resistive, NetworkFrame::Dq) => {
                let z = m.z;
                let rt = z.rf + z.rg;
                r[VG_D] = x[VG_D] - (x[EINV_D] * z.rg + vs.d * z.rf) / rt;
                j.add(VG_D, VG_D, 1.0);
                j.add(VG_D, EINV_D, -z.rg / rt);
                j.add(VG_D, THETA_PLL, -z.rf / rt * vs.q);
                r[VG_Q] = x[VG_Q] - (x[EINV_Q] * z.rg + vs.q * z.rf) / rt;
                j.add(VG_Q, VG_Q, 1.0);
                j.add(VG_Q, EINV_Q, -z.rg / rt);
                j.add(VG_Q, THETA_PLL, z.rf / rt * vs.d);
                r[IG_D] = x[IG_D] - (x[EINV_D] - vs.d) / rt;
                j.add(IG_D, IG_D, 1.0);
                j.add(IG_D, EINV_D, -1.0 / rt);
                j.add(IG_D, THETA_PLL, vs.q / rt);
                r[IG_Q] = x[IG_Q] - (x[EINV_Q] - vs.q) / rt;
                j.add(IG_Q, IG_Q, 1.0);
                j.add(IG_Q, EINV_Q, -1.0 / rt);
                j.add(IG_Q, THETA_PLL, -vs.d / rt);
                self.abc_images(x, th, r, j);
            }
            (Topology::Rl, _) => {
                let z = m.z;
                let (rt, l) = z.series();
                let w = x[OMEGA_HAT];
                let (id, iq) = (x[IG_D], x[IG_Q]);
                let fd = (-rt * id + w * l * iq + x[EINV_D] - vs.d) / l;
                let fq = (-rt * iq - w * l * id + x[EINV_Q] - vs.q) / l;
                let lg = z.lg;
                // v_g = v_s + R_g i + L_g di/dt + omega_hat L_g J i; the rotation
                // terms cancel against those inside di/dt
                r[VG_D] = x[VG_D] - (vs.d + z.rg * id + lg * fd - w * lg * iq);
                j.add(VG_D, VG_D, 1.0);
                j.add(VG_D, THETA_PLL, -(vs.q + lg * (-vs.q / l)));
                j.add(VG_D, IG_D, -(z.rg + lg * (-rt / l)));
                j.add(VG_D, EINV_D, -lg / l);
                r[VG_Q] = x[VG_Q] - (vs.q + z.rg * iq + lg * fq + w * lg * id);
                j.add(VG_Q, VG_Q, 1.0);
                j.add(VG_Q, THETA_PLL, -(-vs.d + lg * (vs.d / l)));
                j.add(VG_Q, IG_Q, -(z.rg + lg * (-rt / l)));
                j.add(VG_Q, EINV_Q, -lg / l);
                self.abc_images(x, th, r, j);
            }
        }
    }

    /// Phase quantities reconstructed from the dq unknowns.
    fn abc_images(&self, x: &[f64], th: f64, r: &mut [f64], j: &mut Jac<'_>) {
        let (rd, rq) = park_rows(th);
        for (abc, dq_d) in [(VG_A, VG_D), (IG_A, IG_D)] {
            let v = DqPair::new(x[dq_d], x[dq_d + 1]);
            let e = inverse_park(v, th).to_array();
            let de = inverse_park(v.rotate_quarter(), th).to_array();
            for k in 0..3 {
                let row = abc + k;
                r[row] = x[row] - e[k];
                j.add(row, row, 1.0);
                j.add(row, dq_d, -1.5 * rd[k]);
                j.add(row, dq_d + 1, -1.5 * rq[k]);
                j.add(row, THETA_PLL, -de[k]);
            }
        }
    }
}

impl ResidualSystem for StepSystem<'_> {
    fn dimension(&self) -> usize {
        N
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        self.eval(x, out, None);
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let mut r = [0.0; N];
        self.eval(x, &mut r, Some(jac));
        true
    }

    fn norm_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }
}
