//! Smooth max/min operators, the trapezoidal update residual and a damped
//! Newton-Raphson solver with dense LU and a finite-difference fallback.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Smoothing constant for [`smax`] / [`smin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub epsilon: f64,
}

impl SmoothingParams {
    pub fn new(epsilon: f64) -> Option<Self> {
        (epsilon > 0.0 && epsilon.is_finite()).then_some(Self { epsilon })
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self { epsilon: 1e-5 }
    }
}

/// `(a + b + sqrt((a-b)^2 + eps)) / 2`. Exact max at `eps = 0`.
#[inline]
pub fn smax(a: f64, b: f64, eps: f64) -> f64 {
    0.5 * (a + b + ((a - b) * (a - b) + eps).sqrt())
}

/// `(a + b - sqrt((a-b)^2 + eps)) / 2`. Exact min at `eps = 0`.
#[inline]
pub fn smin(a: f64, b: f64, eps: f64) -> f64 {
    0.5 * (a + b - ((a - b) * (a - b) + eps).sqrt())
}

/// Partial derivatives `(d/da, d/db)` of [`smax`]. Requires `eps > 0` or `a != b`.
#[inline]
pub fn smax_grad(a: f64, b: f64, eps: f64) -> (f64, f64) {
    let s = (a - b) / ((a - b) * (a - b) + eps).sqrt();
    (0.5 * (1.0 + s), 0.5 * (1.0 - s))
}

/// Partial derivatives `(d/da, d/db)` of [`smin`].
#[inline]
pub fn smin_grad(a: f64, b: f64, eps: f64) -> (f64, f64) {
    let s = (a - b) / ((a - b) * (a - b) + eps).sqrt();
    (0.5 * (1.0 - s), 0.5 * (1.0 + s))
}

/// Residual of one trapezoidal step of `dx/dt = f`.
#[inline]
pub fn trapezoidal_residual(x_next: f64, x_prev: f64, f_next: f64, f_prev: f64, dt: f64) -> f64 {
    x_next - x_prev - 0.5 * dt * (f_next + f_prev)
}

/// Which equivalent circuit replaces a storage element over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompanionForm {
    /// Conductance in parallel with a history current source (KCL).
    #[default]
    Norton,
    /// Resistance in series with a history voltage source (KVL).
    Thevenin,
}

/// Energy-storage element whose state obeys `dx/dt = f`.
///
/// For a capacitor the state is its voltage and `C f` its current; for an
/// inductor the state is its current and `L f` its voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Storage {
    Capacitor { c: f64 },
    Inductor { l: f64 },
}

/// Trapezoidal companion model of a [`Storage`] element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Companion {
    pub form: CompanionForm,
    pub storage: Storage,
}

impl Companion {
    pub fn new(form: CompanionForm, storage: Storage) -> Self {
        Self { form, storage }
    }

    /// Branch equation of the companion circuit at the new time point; zero
    /// exactly when the trapezoidal update holds.
    pub fn residual(&self, x_next: f64, x_prev: f64, f_next: f64, f_prev: f64, dt: f64) -> f64 {
        match (self.storage, self.form) {
            (Storage::Capacitor { c }, CompanionForm::Norton) => {
                let g = 2.0 * c / dt;
                let i_hist = -g * x_prev - c * f_prev;
                g * x_next + i_hist - c * f_next
            }
            (Storage::Capacitor { c }, CompanionForm::Thevenin) => {
                let r = dt / (2.0 * c);
                let v_hist = x_prev + r * c * f_prev;
                x_next - v_hist - r * c * f_next
            }
            (Storage::Inductor { l }, CompanionForm::Norton) => {
                let g = dt / (2.0 * l);
                let i_hist = x_prev + g * l * f_prev;
                x_next - g * l * f_next - i_hist
            }
            (Storage::Inductor { l }, CompanionForm::Thevenin) => {
                let r = 2.0 * l / dt;
                let v_hist = -r * x_prev - l * f_prev;
                r * x_next + v_hist - l * f_next
            }
        }
    }

    /// `(d residual / d x_next, d residual / d f_next)`.
    pub fn sensitivities(&self, dt: f64) -> (f64, f64) {
        match (self.storage, self.form) {
            (Storage::Capacitor { c }, CompanionForm::Norton) => (2.0 * c / dt, -c),
            (Storage::Capacitor { .. }, CompanionForm::Thevenin) => (1.0, -0.5 * dt),
            (Storage::Inductor { .. }, CompanionForm::Norton) => (1.0, -0.5 * dt),
            (Storage::Inductor { l }, CompanionForm::Thevenin) => (2.0 * l / dt, -l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Infinity-norm residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step scaling in (0, 1]; halved on residual increase down to 1/16.
    pub damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            damping: 1.0,
        }
    }
}

impl NewtonSettings {
    pub fn is_valid(&self) -> bool {
        self.tol > 0.0 && self.max_iter >= 1 && self.damping > 0.0 && self.damping <= 1.0
    }
}

const DAMPING_FLOOR: f64 = 1.0 / 16.0;
const PIVOT_THRESHOLD: f64 = 1e-13;
const STAGNATION: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("Newton did not converge after {iterations} iterations (residual {residual_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        last: Vec<f64>,
    },
    #[error("singular Jacobian (pivot {pivot:.3e} in column {column})")]
    SingularJacobian { column: usize, pivot: f64 },
    #[error("residual is not finite")]
    NonFinite,
}

/// A square nonlinear system `F(x) = 0`.
pub trait ResidualSystem {
    fn dimension(&self) -> usize;

    /// Writes `F(x)` into `out` (`out.len() == dimension()`).
    fn residual(&self, x: &[f64], out: &mut [f64]);

    /// Writes the analytic Jacobian into `jac` and returns `true`, or returns
    /// `false` when no analytic Jacobian is available.
    fn jacobian(&self, _x: &[f64], _jac: &mut DMatrix<f64>) -> bool {
        false
    }

    /// Per-row weights applied before taking the convergence norm, so rows
    /// scaled by large companion conductances are judged in units of the
    /// unknowns. `None` means unit weights.
    fn norm_weights(&self) -> Option<&[f64]> {
        None
    }
}

/// Perturbation for [`finite_diff_jacobian`]: `h_j = max(relative * |x_j|, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdStep {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for FdStep {
    fn default() -> Self {
        Self {
            relative: 1e-7,
            absolute: 1e-9,
        }
    }
}

impl FdStep {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        (self.relative * x.abs()).max(self.absolute)
    }
}

/// Central-difference Jacobian estimate.
pub fn finite_diff_jacobian<S: ResidualSystem + ?Sized>(system: &S, x: &[f64], h: FdStep) -> DMatrix<f64> {
    let n = system.dimension();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let step = h.at(x[j]);
        xp[j] = x[j] + step;
        let up = xp[j];
        system.residual(&xp, &mut fp);
        xp[j] = x[j] - step;
        let down = xp[j];
        system.residual(&xp, &mut fm);
        xp[j] = x[j];
        // divide by the representable step, not the requested one
        let width = up - down;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / width;
        }
    }
    jac
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, r| if r.is_nan() { f64::NAN } else { m.max(r.abs()) })
}

fn weighted_norm(v: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => inf_norm(v),
        Some(w) => v
            .iter()
            .zip(w)
            .fold(0.0_f64, |m, (r, w)| if r.is_nan() { f64::NAN } else { m.max((r * w).abs()) }),
    }
}

/// Solves `J dx = rhs` by LU with partial pivoting, rejecting tiny pivots
/// relative to the largest Jacobian entry.
pub fn lu_solve(jac: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let scale = jac.amax().max(1.0);
    let lu = jac.lu();
    let u = lu.u();
    for k in 0..u.nrows() {
        let pivot = u[(k, k)];
        if !(pivot.abs() > PIVOT_THRESHOLD * scale) {
            return Err(SolveError::SingularJacobian { column: k, pivot });
        }
    }
    let b = DVector::from_column_slice(rhs);
    lu.solve(&b)
        .map(|v| v.as_slice().to_vec())
        .ok_or(SolveError::SingularJacobian { column: 0, pivot: 0.0 })
}

/// Damped Newton-Raphson on `system` from `x0`. Converged when the weighted
/// residual infinity norm is at or below `settings.tol`, or when the Newton update has
/// shrunk to rounding level; `iterations` counts linear solves.
pub fn newton_solve<S: ResidualSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    settings: &NewtonSettings,
) -> Result<NewtonReport, SolveError> {
    let n = system.dimension();
    assert_eq!(x0.len(), n, "initial guess has wrong dimension");

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    system.residual(&x, &mut r);
    let weights = system.norm_weights();
    let mut norm = weighted_norm(&r, weights);
    if !norm.is_finite() {
        return Err(SolveError::NonFinite);
    }

    let mut jac = DMatrix::zeros(n, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];

    for iter in 0..=settings.max_iter {
        if norm <= settings.tol {
            return Ok(NewtonReport {
                x,
                iterations: iter,
                residual_norm: norm,
            });
        }
        if iter == settings.max_iter {
            break;
        }

        jac.fill(0.0);
        if !system.jacobian(&x, &mut jac) {
            jac = finite_diff_jacobian(system, &x, FdStep::default());
        }
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu_solve(jac.clone(), &neg_r)?;
        // update already at rounding level: the residual cannot get smaller
        let scale = inf_norm(&x).max(1.0);
        if inf_norm(&dx) <= STAGNATION * scale {
            return Ok(NewtonReport {
                x,
                iterations: iter + 1,
                residual_norm: norm,
            });
        }

        let mut lambda = settings.damping;
        loop {
            for i in 0..n {
                trial[i] = x[i] + lambda * dx[i];
            }
            system.residual(&trial, &mut r_trial);
            let trial_norm = weighted_norm(&r_trial, weights);
            if (trial_norm.is_finite() && trial_norm < norm) || lambda <= DAMPING_FLOOR {
                break;
            }
            lambda *= 0.5;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        norm = weighted_norm(&r, weights);
        if !norm.is_finite() {
            return Err(SolveError::NonFinite);
        }
    }

    Err(SolveError::NonConvergence {
        iterations: settings.max_iter,
        residual_norm: norm,
        last: x,
    })
}
