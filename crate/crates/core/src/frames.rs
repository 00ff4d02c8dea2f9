//! Three-phase source synthesis and the amplitude-invariant Park transform.

use std::f64::consts::{PI, TAU};

const SHIFT: f64 = 2.0 * PI / 3.0;

/// Instantaneous phase quantities (per-unit).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AbcTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcTriple {
    pub const ZERO: Self = Self { a: 0.0, b: 0.0, c: 0.0 };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn sum(self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn dot(self, other: Self) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c
    }
}

/// Synchronous-frame quantities (per-unit).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqPair {
    pub d: f64,
    pub q: f64,
}

impl DqPair {
    pub const ZERO: Self = Self { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn norm(self) -> f64 {
        self.d.hypot(self.q)
    }

    /// Quarter-turn rotation `J x` with `J = [[0, -1], [1, 0]]`.
    pub fn rotate_quarter(self) -> Self {
        Self::new(-self.q, self.d)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.d * other.d + self.q * other.q
    }
}

impl std::ops::Add for DqPair {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.d + rhs.d, self.q + rhs.q)
    }
}

impl std::ops::Sub for DqPair {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.d - rhs.d, self.q - rhs.q)
    }
}

impl std::ops::Mul<f64> for DqPair {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.d * k, self.q * k)
    }
}

/// Slack/grid source description. `theta_dist` is applied as a step at `t_dist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSourceParams {
    /// Peak phase voltage (pu).
    pub vm: f64,
    /// Nominal frequency (Hz).
    pub f: f64,
    /// Phase-jump magnitude (rad).
    pub theta_dist: f64,
    /// Phase-jump time (s).
    pub t_dist: f64,
}

impl GridSourceParams {
    pub fn omega(&self) -> f64 {
        TAU * self.f
    }

    /// Angle offset `theta_grid(t)`: zero before the disturbance, `theta_dist` from it on.
    pub fn theta_grid(&self, t: f64) -> f64 {
        if t >= self.t_dist {
            self.theta_dist
        } else {
            0.0
        }
    }
}

impl Default for GridSourceParams {
    fn default() -> Self {
        Self {
            vm: 1.0,
            f: 60.0,
            theta_dist: 0.0,
            t_dist: 0.0,
        }
    }
}

pub fn grid_angle(t: f64, params: &GridSourceParams) -> f64 {
    params.omega() * t + params.theta_grid(t)
}

/// Balanced set of peak `vm` at electrical angle `theta`.
pub fn balanced(vm: f64, theta: f64) -> AbcTriple {
    AbcTriple::new(vm * theta.cos(), vm * (theta - SHIFT).cos(), vm * (theta + SHIFT).cos())
}

pub fn grid_voltage(t: f64, params: &GridSourceParams) -> AbcTriple {
    balanced(params.vm, grid_angle(t, params))
}

/// abc to dq with the 2/3 (amplitude-invariant) scaling, d-axis at `theta`.
pub fn park(v: AbcTriple, theta: f64) -> DqPair {
    let (sa, ca) = theta.sin_cos();
    let (sb, cb) = (theta - SHIFT).sin_cos();
    let (sc, cc) = (theta + SHIFT).sin_cos();
    DqPair::new(
        2.0 / 3.0 * (v.a * ca + v.b * cb + v.c * cc),
        -2.0 / 3.0 * (v.a * sa + v.b * sb + v.c * sc),
    )
}

pub fn inverse_park(x: DqPair, theta: f64) -> AbcTriple {
    let (sa, ca) = theta.sin_cos();
    let (sb, cb) = (theta - SHIFT).sin_cos();
    let (sc, cc) = (theta + SHIFT).sin_cos();
    AbcTriple::new(x.d * ca - x.q * sa, x.d * cb - x.q * sb, x.d * cc - x.q * sc)
}

/// Rows of the Park matrix: `park(v, theta) = (row_d . v, row_q . v)`.
pub fn park_rows(theta: f64) -> ([f64; 3], [f64; 3]) {
    let k = 2.0 / 3.0;
    let angles = [theta, theta - SHIFT, theta + SHIFT];
    (angles.map(|a| k * a.cos()), angles.map(|a| -k * a.sin()))
}
