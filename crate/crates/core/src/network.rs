//! PCC voltage and line current for the resistive network, and the dq-frame
//! series R-L plant.

use crate::frames::{AbcTriple, DqPair};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum NetworkError {
    #[error("phase {phase}: filter plus grid resistance must be positive")]
    DegenerateNetwork { phase: char },
}

/// Filter and grid impedances per phase. Inductances are in pu·s (`X / omega`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    pub rf: [f64; 3],
    pub lf: [f64; 3],
    pub rg: [f64; 3],
    pub lg: [f64; 3],
}

impl NetworkParams {
    pub fn balanced(rf: f64, lf: f64, rg: f64, lg: f64) -> Self {
        Self {
            rf: [rf; 3],
            lf: [lf; 3],
            rg: [rg; 3],
            lg: [lg; 3],
        }
    }

    pub fn is_balanced(&self) -> bool {
        [self.rf, self.lf, self.rg, self.lg]
            .iter()
            .all(|v| v[0] == v[1] && v[1] == v[2])
    }

    /// Single-axis values. Equal to the per-phase values for balanced phases.
    pub fn dq(&self) -> DqImpedance {
        DqImpedance {
            rf: self.rf[0],
            lf: self.lf[0],
            rg: self.rg[0],
            lg: self.lg[0],
        }
    }

    pub fn check_resistive(&self) -> Result<(), NetworkError> {
        for (k, phase) in ['a', 'b', 'c'].into_iter().enumerate() {
            if !(self.rf[k] + self.rg[k] > 0.0) {
                return Err(NetworkError::DegenerateNetwork { phase });
            }
        }
        Ok(())
    }
}

/// Per-axis filter and grid impedance of a balanced network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqImpedance {
    pub rf: f64,
    pub lf: f64,
    pub rg: f64,
    pub lg: f64,
}

impl DqImpedance {
    /// Series totals `(R_f + R_g, L_f + L_g)`.
    pub fn series(&self) -> (f64, f64) {
        (self.rf + self.rg, self.lf + self.lg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub ig: DqPair,
    pub vg_dq: DqPair,
    pub vg_abc: AbcTriple,
}

fn per_phase(
    einv: AbcTriple,
    vslack: AbcTriple,
    params: &NetworkParams,
    f: impl Fn(f64, f64, f64, f64) -> f64,
) -> Result<AbcTriple, NetworkError> {
    params.check_resistive()?;
    let e = einv.to_array();
    let s = vslack.to_array();
    Ok(AbcTriple::from_array(std::array::from_fn(|k| f(e[k], s[k], params.rf[k], params.rg[k]))))
}

/// KCL at the PCC of the resistive network.
pub fn pcc_voltage_resistive(einv: AbcTriple, vslack: AbcTriple, params: &NetworkParams) -> Result<AbcTriple, NetworkError> {
    per_phase(einv, vslack, params, |e, s, rf, rg| (e * rg + s * rf) / (rg + rf))
}

/// Ohm's law across the series filter and line resistance.
pub fn line_current_resistive(einv: AbcTriple, vslack: AbcTriple, params: &NetworkParams) -> Result<AbcTriple, NetworkError> {
    per_phase(einv, vslack, params, |e, s, rf, rg| (e - s) / (rg + rf))
}

/// `di/dt` of a series R-L branch driven by `einv - v` in a frame rotating at
/// `omega_hat`: `L di/dt = -R i - omega_hat L J i + einv - v`.
#[inline]
pub fn plant_rate(ig: DqPair, einv: DqPair, v: DqPair, omega_hat: f64, r: f64, l: f64) -> DqPair {
    DqPair::new(
        (-r * ig.d + omega_hat * l * ig.q + einv.d - v.d) / l,
        (-r * ig.q - omega_hat * l * ig.d + einv.q - v.q) / l,
    )
}

/// Series-node plant rate: filter and line in series between the inverter
/// and the slack source (pass the slack voltage as `v`).
pub fn plant_rate_dq(ig: DqPair, einv: DqPair, v: DqPair, omega_hat: f64, params: &NetworkParams) -> DqPair {
    let (r, l) = params.dq().series();
    plant_rate(ig, einv, v, omega_hat, r, l)
}

/// PCC voltage recovered from the grid-side branch:
/// `v_g = v_slack + R_g i + L_g di/dt + omega_hat L_g J i`.
pub fn pcc_voltage_rl(ig: DqPair, di_dt: DqPair, vslack_dq: DqPair, omega_hat: f64, params: &NetworkParams) -> DqPair {
    let z = params.dq();
    vslack_dq + ig * z.rg + di_dt * z.lg + ig.rotate_quarter() * (omega_hat * z.lg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{inverse_park, park};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn params(rf: f64, rg: f64) -> NetworkParams {
        NetworkParams::balanced(rf, 0.0, rg, 0.0)
    }

    #[test]
    fn resistive_examples() {
        let e = AbcTriple::new(1.02, -0.4, 0.3);
        let p = params(0.05, 0.1);
        let vg = pcc_voltage_resistive(e, e, &p).unwrap();
        assert!(close(vg.a, e.a, 1e-15) && close(vg.b, e.b, 1e-15) && close(vg.c, e.c, 1e-15));
        assert_eq!(line_current_resistive(e, e, &p).unwrap(), AbcTriple::ZERO);

        let vg = pcc_voltage_resistive(AbcTriple::new(1.0, 0.0, 0.0), AbcTriple::ZERO, &params(0.2, 0.2)).unwrap();
        assert!(close(vg.a, 0.5, 1e-15));
        let vg = pcc_voltage_resistive(AbcTriple::new(1.02, 0.0, 0.0), AbcTriple::new(1.0, 0.0, 0.0), &p).unwrap();
        assert!(close(vg.a, 1.013_333_3, 1e-7));
        let i = line_current_resistive(AbcTriple::new(1.0, 0.0, 0.0), AbcTriple::ZERO, &params(1.5, 0.5)).unwrap();
        assert!(close(i.a, 0.5, 1e-15));
    }

    #[test]
    fn degenerate_network_rejected() {
        let mut p = params(0.1, 0.1);
        p.rf[1] = 0.0;
        p.rg[1] = 0.0;
        let err = pcc_voltage_resistive(AbcTriple::ZERO, AbcTriple::ZERO, &p).unwrap_err();
        assert_eq!(err, NetworkError::DegenerateNetwork { phase: 'b' });
        assert!(line_current_resistive(AbcTriple::ZERO, AbcTriple::ZERO, &p).is_err());
    }

    #[test]
    fn plant_rate_examples() {
        let p = NetworkParams::balanced(0.02, 1e-4, 0.03, 2e-4);
        let w = 377.0;
        // steady state with i_q = 0: einv_d - v_d = R i_d
        let id = 0.6;
        let (r, _) = p.dq().series();
        let v = DqPair::new(1.0, 0.0);
        let i = DqPair::new(id, 0.0);
        let e = DqPair::new(1.0 + r * id, w * p.dq().series().1 * id);
        let rate = plant_rate_dq(i, e, v, w, &p);
        assert!(close(rate.d, 0.0, 1e-12) && close(rate.q, 0.0, 1e-9));
        assert_eq!(plant_rate_dq(DqPair::ZERO, v, v, w, &p), DqPair::ZERO);
    }

    #[test]
    fn pcc_voltage_rl_examples() {
        let p = NetworkParams::balanced(0.02, 1e-4, 0.03, 2e-4);
        let vs = DqPair::new(0.97, 0.05);
        assert_eq!(pcc_voltage_rl(DqPair::ZERO, DqPair::ZERO, vs, 377.0, &p), vs);
        let p0 = NetworkParams::balanced(0.02, 1e-4, 0.03, 0.0);
        let i = DqPair::new(0.4, -0.3);
        let vg = pcc_voltage_rl(i, DqPair::new(5.0, 7.0), vs, 377.0, &p0);
        assert!(close(vg.d, vs.d + 0.03 * 0.4, 1e-15) && close(vg.q, vs.q - 0.03 * 0.3, 1e-15));
    }

    #[test]
    fn coupling_does_no_work() {
        for (d, q) in [(0.3, -0.7), (1.0, 0.0), (-2.0, 5.0)] {
            let i = DqPair::new(d, q);
            assert!(i.dot(i.rotate_quarter()).abs() <= 1e-14);
        }
    }

    #[test]
    fn balanced_reduction() {
        let p = NetworkParams::balanced(0.01, 2e-4, 0.02, 3e-4);
        assert!(p.is_balanced());
        let z = p.dq();
        assert_eq!((z.rf, z.lf, z.rg, z.lg), (0.01, 2e-4, 0.02, 3e-4));
        let mut q = p;
        q.lf[2] = 1e-4;
        assert!(!q.is_balanced());
    }

    proptest! {
        /// The PCC voltage and line current agree on both sides of the PCC.
        #[test]
        fn kcl_consistency(e in -2.0..2.0f64, s in -2.0..2.0f64, rf in 0.01..1.0f64, rg in 0.01..1.0f64) {
            let p = params(rf, rg);
            let vg = pcc_voltage_resistive(AbcTriple::new(e, e, e), AbcTriple::new(s, s, s), &p).unwrap().a;
            let i = line_current_resistive(AbcTriple::new(e, e, e), AbcTriple::new(s, s, s), &p).unwrap().a;
            prop_assert!(close((e - vg) / rf, i, 1e-12));
            prop_assert!(close((vg - s) / rg, i, 1e-12));
        }

        /// With zero inductances the R-L recovery reproduces the resistive PCC voltage.
        #[test]
        fn rl_reduces_to_resistive(ed in -2.0..2.0f64, eq in -2.0..2.0f64, th in -10.0..10.0f64,
                                   ts in -10.0..10.0f64, rf in 0.01..1.0f64, rg in 0.01..1.0f64,
                                   didt_d in -1e3..1e3f64, didt_q in -1e3..1e3f64) {
            let p = params(rf, rg);
            let einv = DqPair::new(ed, eq);
            let vs_abc = crate::frames::balanced(1.0, ts);
            let e_abc = inverse_park(einv, th);
            let i_abc = line_current_resistive(e_abc, vs_abc, &p).unwrap();
            let vg_abc = pcc_voltage_resistive(e_abc, vs_abc, &p).unwrap();
            let vg = pcc_voltage_rl(park(i_abc, th), DqPair::new(didt_d, didt_q), park(vs_abc, th), 377.0, &p);
            let expect = park(vg_abc, th);
            prop_assert!(close(vg.d, expect.d, 1e-12) && close(vg.q, expect.q, 1e-12));
        }
    }
}
