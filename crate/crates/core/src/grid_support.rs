//! Frequency-watt and volt-var supplementary references.
//!
//! The piecewise characteristics are reference implementations; the solved
//! system only ever uses the smooth forms built from [`smax`]/[`smin`].

use crate::numerics::{smax, smax_grad, smin, smin_grad, SmoothingParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqSupportParams {
    /// Droop coefficient (pu power per pu frequency).
    pub kf: f64,
    /// Deadband half-width (pu frequency).
    pub fdb: f64,
    pub enabled: bool,
}

impl Default for FreqSupportParams {
    fn default() -> Self {
        Self { kf: 20.0, fdb: 0.0006, enabled: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltVarParams {
    pub kv: f64,
    pub vdb: f64,
    pub vtarget: f64,
    /// Support limit `Q_max,sup` (pu).
    pub qmax: f64,
    pub enabled: bool,
}

impl Default for VoltVarParams {
    fn default() -> Self {
        Self {
            kv: 10.0,
            vdb: 0.01,
            vtarget: 1.0,
            qmax: 0.3,
            enabled: false,
        }
    }
}

/// `(omega_hat - omega) / omega`.
#[inline]
pub fn freq_deviation(omega_hat: f64, omega_nom: f64) -> f64 {
    (omega_hat - omega_nom) / omega_nom
}

fn deadband(x: f64, k: f64, db: f64) -> f64 {
    if x > db {
        -k * (x - db)
    } else if x < -db {
        -k * (x + db)
    } else {
        0.0
    }
}

pub fn psup_piecewise(df: f64, params: &FreqSupportParams) -> f64 {
    if !params.enabled {
        return 0.0;
    }
    deadband(df, params.kf, params.fdb)
}

/// Smooth deadband `smin(0, -k (x - db)) + smax(0, -k (x + db))` and its slope.
fn smooth_deadband(x: f64, k: f64, db: f64, eps: f64) -> (f64, f64) {
    let upper = -k * (x - db);
    let lower = -k * (x + db);
    let value = smin(0.0, upper, eps) + smax(0.0, lower, eps);
    let slope = smin_grad(0.0, upper, eps).1 * -k + smax_grad(0.0, lower, eps).1 * -k;
    (value, slope)
}

pub fn psup_smooth(df: f64, params: &FreqSupportParams, eps: &SmoothingParams) -> f64 {
    psup_smooth_with_slope(df, params, eps).0
}

/// Value and `d P_sup / d df`.
pub fn psup_smooth_with_slope(df: f64, params: &FreqSupportParams, eps: &SmoothingParams) -> (f64, f64) {
    if !params.enabled {
        return (0.0, 0.0);
    }
    smooth_deadband(df, params.kf, params.fdb, eps.epsilon)
}

pub fn qsup_piecewise(vgd: f64, params: &VoltVarParams) -> f64 {
    if !params.enabled {
        return 0.0;
    }
    let q_val = deadband(vgd - params.vtarget, params.kv, params.vdb);
    q_val.min(params.qmax).max(-params.qmax)
}

pub fn qsup_smooth(vgd: f64, params: &VoltVarParams, eps: &SmoothingParams) -> f64 {
    qsup_smooth_with_slope(vgd, params, eps).0
}

/// Value and `d Q_sup / d v_g^d`.
pub fn qsup_smooth_with_slope(vgd: f64, params: &VoltVarParams, eps: &SmoothingParams) -> (f64, f64) {
    if !params.enabled {
        return (0.0, 0.0);
    }
    let e = eps.epsilon;
    let (q_val, dval) = smooth_deadband(vgd - params.vtarget, params.kv, params.vdb, e);
    let q_temp = smin(q_val, params.qmax, e);
    let dtemp = smin_grad(q_val, params.qmax, e).0 * dval;
    let q_sup = smax(q_temp, -params.qmax, e);
    (q_sup, smax_grad(q_temp, -params.qmax, e).0 * dtemp)
}
