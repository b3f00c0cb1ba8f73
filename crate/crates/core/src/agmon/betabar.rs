//! The averaged flux weight
//! `beta_bar(p, t) = E |w - p|^2 (int_0^1 s beta(s w + (1 - s) p) ds)^2`,
//! `w ~ N(x, t I)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fields::ScalarField2D;
use crate::geometry::Point;
use crate::quadrature::{StdNormalHermite, UnitLegendre};
use crate::stochastic::MCEstimate;

pub const DEFAULT_GH_ORDER: usize = 20;
pub const DEFAULT_GL_ORDER: usize = 16;
const MAX_GH_ORDER: usize = 160;
const REFINE_TOL: f64 = 1e-3;

/// `int_0^1 s beta(s w + (1 - s) p) ds`, in closed form for polynomial
/// catalog fields.
fn moment(beta: &ScalarField2D, w: Point, p: Point, gl: &UnitLegendre) -> f64 {
    // int s^3 = 1/4, int 2 s^2 (1 - s) = 1/6, int s (1 - s)^2 = 1/12
    let quad = || w.norm_sq() / 4.0 + w.dot(p) / 6.0 + p.norm_sq() / 12.0;
    match beta {
        ScalarField2D::Constant { beta0 } => 0.5 * beta0,
        ScalarField2D::RadialQuadratic { beta0 } => beta0 * quad(),
        ScalarField2D::Concave { peak, kappa } => 0.5 * peak - kappa * quad(),
        ScalarField2D::Split { w: wf, u } => moment(wf, w, p, gl) - moment(u, w, p, gl),
        _ => gl.integrate(|s| s * beta.eval(w * s + p * (1.0 - s))),
    }
}

fn integrand(beta: &ScalarField2D, w: Point, p: Point, gl: &UnitLegendre) -> Result<f64> {
    let m = moment(beta, w, p, gl);
    let v = (w - p).norm_sq() * m * m;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: format!("beta on segment ({}, {}) -> ({}, {})", w.x, w.y, p.x, p.y),
            at: w,
        });
    }
    Ok(v)
}

/// Deterministic tensor Gauss–Hermite evaluator for a fixed field and start.
#[derive(Debug, Clone)]
pub struct BetaBar {
    beta: ScalarField2D,
    x: Point,
    gh: StdNormalHermite,
    gl: UnitLegendre,
}

impl BetaBar {
    pub fn new(beta: ScalarField2D, x: Point, n_gh: usize, n_s: usize) -> Result<Self> {
        Ok(BetaBar { beta, x, gh: StdNormalHermite::new(n_gh)?, gl: UnitLegendre::new(n_s)? })
    }

    /// Starts at the default orders and doubles both until the values at the
    /// probe points change by less than `1e-3` relative.
    pub fn resolved(beta: ScalarField2D, x: Point, probes: &[(Point, f64)]) -> Result<Self> {
        let mut cur = BetaBar::new(beta.clone(), x, DEFAULT_GH_ORDER, DEFAULT_GL_ORDER)?;
        if matches!(beta, ScalarField2D::Constant { .. }) {
            return Ok(cur);
        }
        loop {
            let (n_gh, n_s) = cur.orders();
            if n_gh >= MAX_GH_ORDER {
                return Ok(cur);
            }
            let next = BetaBar::new(beta.clone(), x, 2 * n_gh, 2 * n_s)?;
            let mut worst: f64 = 0.0;
            for &(p, t) in probes {
                let (a, b) = (cur.eval(p, t)?, next.eval(p, t)?);
                worst = worst.max((a - b).abs() / b.abs().max(1e-300));
            }
            if worst < REFINE_TOL {
                return Ok(cur);
            }
            cur = next;
        }
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.gh.order(), self.gl.order())
    }

    pub fn beta(&self) -> &ScalarField2D {
        &self.beta
    }

    pub fn start(&self) -> Point {
        self.x
    }

    pub fn eval(&self, p: Point, t: f64) -> Result<f64> {
        if let ScalarField2D::Constant { beta0 } = self.beta {
            if !(t >= 0.0) {
                return invalid(format!("beta_bar time must be nonnegative (got {t})"));
            }
            // E|w - p|^2 = |x - p|^2 + 2t
            return Ok(0.25 * beta0 * beta0 * ((self.x - p).norm_sq() + 2.0 * t));
        }
        self.eval_quadrature(p, t)
    }

    /// Tensor Gauss–Hermite evaluation without closed-form shortcuts.
    pub fn eval_quadrature(&self, p: Point, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return invalid(format!("beta_bar time must be nonnegative (got {t})"));
        }
        if t == 0.0 {
            return integrand(&self.beta, self.x, p, &self.gl);
        }
        let sd = t.sqrt();
        let mut acc = 0.0;
        for (u, wu) in self.gh.pairs() {
            for (v, wv) in self.gh.pairs() {
                let w = self.x + Point::new(u, v) * sd;
                acc += wu * wv * integrand(&self.beta, w, p, &self.gl)?;
            }
        }
        Ok(acc)
    }
}

/// One-shot Gauss–Hermite evaluation at explicit orders.
pub fn beta_bar(beta: &ScalarField2D, x: Point, p: Point, t: f64, n_gh: usize, n_s: usize) -> Result<f64> {
    BetaBar::new(beta.clone(), x, n_gh, n_s)?.eval_quadrature(p, t)
}

/// Monte Carlo estimate drawing `w ~ N(x, t I)` from a seeded stream per
/// sample; the `s`-integral uses a Gauss–Legendre rule of order `n_s`.
pub fn beta_bar_mc(
    beta: &ScalarField2D,
    x: Point,
    p: Point,
    t: f64,
    samples: usize,
    seed: u64,
    n_s: usize,
) -> Result<MCEstimate> {
    if samples == 0 {
        return invalid("Monte Carlo beta_bar needs at least one sample");
    }
    if !(t >= 0.0) {
        return invalid(format!("beta_bar time must be nonnegative (got {t})"));
    }
    let gl = UnitLegendre::new(n_s)?;
    let sd = t.sqrt();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let vals: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            (0..n)
                .map(|_| {
                    let zx: f64 = StandardNormal.sample(&mut rng);
                    let zy: f64 = StandardNormal.sample(&mut rng);
                    integrand(beta, x + Point::new(zx, zy) * sd, p, &gl)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = vals.into_iter().flatten().collect();
    Ok(MCEstimate::from_real(&flat, seed))
}
