//! Magnetic Agmon weight, path length functional and distance to the
//! classically allowed region.

mod betabar;
mod bounds;
mod optimize;
mod region;

pub use betabar::{beta_bar, beta_bar_mc, BetaBar, DEFAULT_GH_ORDER, DEFAULT_GL_ORDER};
pub use bounds::{
    carmona_bound, concave_bound, confine_bound, confine_exponent, tube_inf, CarmonaReport, ConcaveWeight, CorollaryReport,
};
pub use optimize::{agmon_distance, minimize_path, AgmonResult, OptimizerSpec};
pub use region::{classically_allowed, AllowedRegion, Contour, RegionConvention};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{Point, Polyline};

/// First zero of `J_0`.
pub const J01: f64 = 2.404_825_557_695_773;
/// `J_1(j_{0,1})`.
pub const J1_AT_J01: f64 = 0.519_147_497_289_466;
/// Ground energy of `-½Δ` on the unit disc, `j_{0,1}^2 / 2`.
pub const NU1_DISC: f64 = J01 * J01 / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgmonParams {
    pub lambda: f64,
    /// Tube radius.
    pub a: f64,
    pub nu1: f64,
    pub convention: RegionConvention,
}

impl AgmonParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        Self::with_nu1(lambda, a, NU1_DISC)
    }

    pub fn with_nu1(lambda: f64, a: f64, nu1: f64) -> Result<Self> {
        if !(a > 0.0) {
            return invalid(format!("tube radius a must be positive (got {a})"));
        }
        if !(nu1 > 0.0) {
            return invalid(format!("nu1 must be positive (got {nu1})"));
        }
        if !lambda.is_finite() {
            return invalid("lambda must be finite");
        }
        Ok(AgmonParams { lambda, a, nu1, convention: RegionConvention::HalfSquared })
    }

    pub fn with_convention(mut self, convention: RegionConvention) -> Self {
        self.convention = convention;
        self
    }

    /// `2 (lambda - nu1 / a^2)`
    pub fn clamp_level(&self) -> f64 {
        2.0 * (self.lambda - self.nu1 / (self.a * self.a))
    }
}

/// `sqrt(max(beta_bar - 2(lambda - nu1/a^2), 0))`
pub fn agmon_weight(beta_bar: f64, params: &AgmonParams) -> f64 {
    (beta_bar - params.clamp_level()).max(0.0).sqrt()
}

/// A nonnegative weight `w(p, t)` along paths parametrized over `[0, 1]`.
pub trait PathWeight: Sync {
    fn weight(&self, p: Point, t: f64) -> Result<f64>;
}

/// The magnetic Agmon weight for paths from a fixed start.
#[derive(Debug, Clone)]
pub struct AgmonWeight {
    pub beta_bar: BetaBar,
    pub params: AgmonParams,
}

impl PathWeight for AgmonWeight {
    fn weight(&self, p: Point, t: f64) -> Result<f64> {
        Ok(agmon_weight(self.beta_bar.eval(p, t)?, &self.params))
    }
}

impl<F: Fn(Point, f64) -> f64 + Sync> PathWeight for F {
    fn weight(&self, p: Point, t: f64) -> Result<f64> {
        Ok(self(p, t))
    }
}

/// Midpoint-rule value of `int_0^1 w(gamma(t), t) |gamma'(t)| dt` with every
/// segment split into `subdivisions` equal pieces.
pub fn path_length(gamma: &Polyline, w: &dyn PathWeight, subdivisions: usize) -> Result<f64> {
    let m = subdivisions.max(1);
    let (times, verts) = (gamma.times(), gamma.vertices());
    let mut acc = 0.0;
    for k in 0..gamma.segments() {
        let (p, q) = (verts[k], verts[k + 1]);
        let len = p.dist(q);
        if len == 0.0 {
            continue;
        }
        let (t0, t1) = (times[k], times[k + 1]);
        let mut seg = 0.0;
        for i in 0..m {
            let s = (i as f64 + 0.5) / m as f64;
            seg += w.weight(p.lerp(q, s), t0 + s * (t1 - t0))?;
        }
        acc += seg * len / m as f64;
    }
    Ok(acc)
}

pub const LENGTH_REFINE_TOL: f64 = 1e-3;
const MAX_SUBDIVISIONS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthValue {
    pub value: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

/// Doubles the per-segment subdivision from `start` until the value changes
/// by less than `1e-3` relative.
pub fn path_length_refined(gamma: &Polyline, w: &dyn PathWeight, start: usize) -> Result<LengthValue> {
    let mut m = start.max(1);
    let mut cur = path_length(gamma, w, m)?;
    while m < MAX_SUBDIVISIONS {
        let next = path_length(gamma, w, 2 * m)?;
        let done = (next - cur).abs() <= LENGTH_REFINE_TOL * next.abs().max(1e-300) || next == cur;
        m *= 2;
        cur = next;
        if done {
            return Ok(LengthValue { value: cur, subdivisions: m, converged: true });
        }
    }
    Ok(LengthValue { value: cur, subdivisions: m, converged: false })
}

/// The Agmon length functional of `gamma` started at `gamma(0)`.
pub fn path_length_functional(gamma: &Polyline, beta_bar: &BetaBar, params: &AgmonParams) -> Result<LengthValue> {
    if gamma.start() != beta_bar.start() {
        return invalid("path must start at the beta_bar start point");
    }
    let w = AgmonWeight { beta_bar: beta_bar.clone(), params: *params };
    path_length_refined(gamma, &w, 1)
}
