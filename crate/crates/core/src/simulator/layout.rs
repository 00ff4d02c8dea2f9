//! Unknown-vector layout and the logged record.

use crate::frames::{AbcTriple, DqPair};

pub const VQ_FIL: usize = 0;
pub const I_PLL: usize = 1;
pub const THETA_PLL: usize = 2;
pub const P_FIL: usize = 3;
pub const Q_FIL: usize = 4;
pub const INT_P: usize = 5;
pub const INT_Q: usize = 6;
pub const IFIL_D: usize = 7;
pub const IFIL_Q: usize = 8;
pub const VCC_D: usize = 9;
pub const VCC_Q: usize = 10;
/// Grid current; dynamic in R-L mode, algebraic otherwise.
pub const IG_D: usize = 11;
pub const IG_Q: usize = 12;
pub const DELTA_PLL: usize = 13;
pub const OMEGA_HAT: usize = 14;
pub const VG_D: usize = 15;
pub const VG_Q: usize = 16;
pub const P_G: usize = 17;
pub const Q_G: usize = 18;
pub const P_SUP: usize = 19;
pub const Q_SUP: usize = 20;
pub const IREF_D: usize = 21;
pub const IREF_Q: usize = 22;
pub const EPS_D: usize = 23;
pub const EPS_Q: usize = 24;
pub const EINV_D: usize = 25;
pub const EINV_Q: usize = 26;
pub const VG_A: usize = 27;
pub const IG_A: usize = 30;

/// Number of unknowns.
pub const N: usize = 33;
/// States that always carry a storage element.
pub const CONTROL_STATES: usize = 11;
/// Upper bound on dynamic states (R-L mode adds the two grid currents).
pub const MAX_STATES: usize = 13;

/// Solved unknowns at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub t: f64,
    pub x: [f64; N],
    pub newton_iters: usize,
}

impl SimState {
    pub fn dq(&self, d: usize) -> DqPair {
        DqPair::new(self.x[d], self.x[d + 1])
    }

    pub fn abc(&self, a: usize) -> AbcTriple {
        AbcTriple::new(self.x[a], self.x[a + 1], self.x[a + 2])
    }

    pub fn record(&self) -> TimeSeriesRecord {
        let x = &self.x;
        TimeSeriesRecord {
            values: [
                self.t,
                x[VG_A],
                x[VG_A + 1],
                x[VG_A + 2],
                x[VG_D],
                x[VG_Q],
                x[VQ_FIL],
                x[THETA_PLL],
                x[DELTA_PLL],
                x[OMEGA_HAT],
                x[P_G],
                x[Q_G],
                x[P_FIL],
                x[Q_FIL],
                x[IREF_D],
                x[IREF_Q],
                x[IG_D],
                x[IG_Q],
                x[IFIL_D],
                x[IFIL_Q],
                x[EINV_D],
                x[EINV_Q],
                x[P_SUP],
                x[Q_SUP],
                self.newton_iters as f64,
            ],
        }
    }
}

/// Column names in output order.
pub const SIGNALS: [&str; 25] = [
    "time_s",
    "v_g_a",
    "v_g_b",
    "v_g_c",
    "v_gd",
    "v_gq",
    "v_gq_fil",
    "theta_pll_rad",
    "delta_pll_pu",
    "omega_hat_rad_s",
    "p_g",
    "q_g",
    "p_g_fil",
    "q_g_fil",
    "i_ref_d",
    "i_ref_q",
    "i_g_d",
    "i_g_q",
    "i_g_fil_d",
    "i_g_fil_q",
    "e_inv_d",
    "e_inv_q",
    "p_sup",
    "q_sup",
    "newton_iters",
];

/// One logged row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub values: [f64; 25],
}

impl TimeSeriesRecord {
    pub fn column(name: &str) -> Option<usize> {
        SIGNALS.iter().position(|s| *s == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::column(name).map(|k| self.values[k])
    }

    pub fn t(&self) -> f64 {
        self.values[0]
    }
}

/// Extracts one column from a run.
pub fn series(records: &[TimeSeriesRecord], name: &str) -> Option<Vec<f64>> {
    let k = TimeSeriesRecord::column(name)?;
    Some(records.iter().map(|r| r.values[k]).collect())
}
