//! Seeded Brownian paths and bridges, stochastic line integrals and Lévy
//! areas.
//!
//! Path `k` of a bundle is generated from ChaCha8 stream `k` under the bundle
//! seed, so every path is a pure function of `(seed, k)` and reductions give
//! the same bits for any thread count.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fields::VectorField2D;
use crate::geometry::{Domain, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    Free,
    Bridge { end: Point },
}

/// Lazily generated ensemble of `paths` discretized trajectories.
#[derive(Debug, Clone)]
pub struct PathBundle {
    start: Point,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    kind: PathKind,
    domain: Domain,
}

/// One realized path: `steps + 1` positions at times `j T / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub points: Vec<Point>,
    /// First index whose position has negative boundary distance.
    pub killed_at: Option<usize>,
    pub dt: f64,
}

impl SamplePath {
    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().unwrap()
    }

    pub fn survived(&self) -> bool {
        self.killed_at.is_none()
    }

    /// Number of increments that count toward path functionals.
    pub fn live_steps(&self) -> usize {
        self.killed_at.unwrap_or(self.points.len() - 1)
    }

    pub fn increment(&self, j: usize) -> Point {
        self.points[j + 1] - self.points[j]
    }
}

fn check_sampling(horizon: f64, steps: usize, paths: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return invalid(format!("time horizon must be positive (got {horizon})"));
    }
    if steps == 0 || paths == 0 {
        return invalid("need at least one step and one path");
    }
    Ok(())
}

/// Free Brownian motion from `x` with Gaussian increments `N(0, (T/N) I)`.
pub fn sample_brownian(
    x: Point,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    domain: Domain,
) -> Result<PathBundle> {
    check_sampling(horizon, steps, paths)?;
    Ok(PathBundle { start: x, horizon, steps, paths, seed, kind: PathKind::Free, domain })
}

/// Brownian bridges from `x` to `y` on `[0, T]`, pinned construction.
pub fn sample_bridge(
    x: Point,
    y: Point,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    check_sampling(horizon, steps, paths)?;
    Ok(PathBundle {
        start: x,
        horizon,
        steps,
        paths,
        seed,
        kind: PathKind::Bridge { end: y },
        domain: Domain::whole_plane(),
    })
}

impl PathBundle {
    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn start(&self) -> Point {
        self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    /// Generates path `k`.
    pub fn path(&self, k: usize) -> SamplePath {
        let n = self.steps;
        let dt = self.dt();
        let sd = dt.sqrt();
        let mut rng = self.rng(k);
        let mut points = Vec::with_capacity(n + 1);
        points.push(self.start);
        let mut w = Point::ORIGIN;
        for _ in 0..n {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            w += Point::new(zx, zy) * sd;
            points.push(self.start + w);
        }
        if let PathKind::Bridge { end } = self.kind {
            // B_j = x + W_j - (t_j / T)(W_T - (y - x))
            let gap = w - (end - self.start);
            for (j, p) in points.iter_mut().enumerate().skip(1) {
                *p = *p - gap * (j as f64 / n as f64);
            }
            points[n] = end;
        }
        let killed_at = if self.domain.boundary == crate::geometry::Boundary::Dirichlet {
            points.iter().position(|p| self.domain.kills(*p))
        } else {
            None
        };
        SamplePath { points, killed_at, dt }
    }

    /// Applies `f` to every path in parallel and returns the results in path
    /// order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&SamplePath) -> T + Sync + Send,
    {
        (0..self.paths).into_par_iter().map(|k| f(&self.path(k))).collect()
    }

    pub fn killed_fraction(&self) -> f64 {
        let killed = self.map(|p| !p.survived()).into_iter().filter(|&k| k).count();
        killed as f64 / self.paths as f64
    }

    /// Writes CSV `path_id,step,t,x,y` for the first `max_paths` paths.
    pub fn write_csv<W: Write>(&self, max_paths: usize, w: W) -> Result<DumpSummary> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "step", "t", "x", "y"])?;
        let dt = self.dt();
        let mut rows = 0usize;
        for k in 0..self.paths.min(max_paths) {
            let path = self.path(k);
            for (j, p) in path.points.iter().enumerate() {
                wr.write_record([
                    k.to_string(),
                    j.to_string(),
                    (j as f64 * dt).to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                ])?;
                rows += 1;
            }
        }
        wr.flush()?;
        Ok(DumpSummary { rows, oversized: rows > DUMP_WARN_ROWS })
    }
}

pub const DUMP_WARN_ROWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpSummary {
    pub rows: usize,
    pub oversized: bool,
}

/// Monte Carlo estimate with componentwise standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: Complex64,
    /// Max of the real and imaginary standard errors.
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// Set when no sample carried weight (every path killed).
    pub degenerate: bool,
}

impl MCEstimate {
    pub fn from_samples(samples: &[Complex64], seed: u64) -> Self {
        let n = samples.len();
        if n == 0 {
            return MCEstimate { value: Complex64::new(0.0, 0.0), stderr: 0.0, samples: 0, seed, degenerate: true };
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<Complex64>() / nf;
        let (mut vr, mut vi) = (0.0, 0.0);
        for s in samples {
            vr += (s.re - mean.re).powi(2);
            vi += (s.im - mean.im).powi(2);
        }
        let denom = if n > 1 { nf - 1.0 } else { 1.0 };
        let se_re = (vr / denom / nf).sqrt();
        let se_im = (vi / denom / nf).sqrt();
        MCEstimate { value: mean, stderr: se_re.max(se_im), samples: n, seed, degenerate: false }
    }

    pub fn from_real(samples: &[f64], seed: u64) -> Self {
        let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_samples(&c, seed)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.value *= s;
        self.stderr *= s.abs();
        self
    }
}

/// Left-point (Itô) and midpoint (Stratonovich) sums of `A . d omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub ito: f64,
    pub stratonovich: f64,
}

/// Line integrals of `a` along the live part of `path`.
pub fn path_line_integral(path: &SamplePath, a: &VectorField2D) -> LineIntegral {
    let mut ito = 0.0;
    let mut strat = 0.0;
    for j in 0..path.live_steps() {
        let (p, q) = (path.points[j], path.points[j + 1]);
        let d = q - p;
        ito += a.eval(p).dot(d);
        strat += a.eval(p.lerp(q, 0.5)).dot(d);
    }
    LineIntegral { ito, stratonovich: strat }
}

pub fn ito_line_integral(bundle: &PathBundle, a: &VectorField2D) -> Vec<LineIntegral> {
    bundle.map(|p| path_line_integral(p, a))
}

/// Discrete Lévy area `sum (w2 dw1 - w1 dw2)` with `w` relative to the first
/// point, for any sequence of points.
pub fn levy_area_points(points: &[Point]) -> f64 {
    let x = points[0];
    points
        .windows(2)
        .map(|w| {
            let r = w[0] - x;
            let d = w[1] - w[0];
            r.y * d.x - r.x * d.y
        })
        .sum()
}

pub fn path_levy_area(path: &SamplePath) -> f64 {
    levy_area_points(&path.points[..=path.live_steps()])
}

pub fn levy_area(bundle: &PathBundle) -> Vec<f64> {
    bundle.map(path_levy_area)
}

/// Itô integral of the Landau potential `(b/2)(-y, x)` expressed through the
/// relative Lévy area `area` of a path from `x` to `end`.
pub fn landau_ito_from_levy(beta0: f64, x: Point, end: Point, area: f64) -> f64 {
    let d = end - x;
    0.5 * beta0 * (x.cross(d) - area)
}

/// Signed (counterclockwise positive) area of the polygon closed by the chord.
pub fn shoelace_area(points: &[Point]) -> f64 {
    let n = points.len();
    0.5 * (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum::<f64>()
}
