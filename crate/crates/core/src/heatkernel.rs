//! Feynman–Kac–Itô estimates of `e^{-tH(A)} psi` and the uniform-field
//! (Mehler) kernel.
//!
//! The path weight is `exp(-i int A . d omega - (i/2) int div A dt)` with the
//! Itô integral, which is the representation of `e^{-tH}` for
//! `H = ½(−i∇ − A)²`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fields::{GaugeFunction, GridSamples, VectorField2D};
use crate::geometry::{Domain, Point};
use crate::stochastic::{
    path_line_integral, sample_brownian, sample_bridge, MCEstimate, SamplePath,
};

/// Initial data `psi`.
#[derive(Debug, Clone)]
pub enum Psi {
    One,
    /// Density of `N(center, sigma2 I)`.
    GaussianDensity { center: Point, sigma2: f64 },
    /// `amplitude exp(-alpha |p|^2)`
    RadialGaussian { amplitude: f64, alpha: f64 },
    Grid(GridSamples),
    /// `e^{i phi} psi`
    Phased { base: Box<Psi>, phi: GaugeFunction },
}

impl Psi {
    pub fn eval(&self, p: Point) -> Complex64 {
        match self {
            Psi::One => Complex64::new(1.0, 0.0),
            Psi::GaussianDensity { center, sigma2 } => Complex64::new(
                (-(p - *center).norm_sq() / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2),
                0.0,
            ),
            Psi::RadialGaussian { amplitude, alpha } => {
                Complex64::new(amplitude * (-alpha * p.norm_sq()).exp(), 0.0)
            }
            Psi::Grid(g) => Complex64::new(g.eval(p), 0.0),
            Psi::Phased { base, phi } => base.eval(p) * Complex64::from_polar(1.0, phi.value(p)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sampling {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FkiQuery {
    pub x: Point,
    pub t: f64,
    pub a: VectorField2D,
    pub domain: Domain,
    pub psi: Psi,
    pub sampling: Sampling,
}

/// Path weight `psi(omega_t) exp(-i int A.d omega - (i/2) int div A)`, zero for
/// killed paths.
pub fn fki_weight(path: &SamplePath, a: &VectorField2D, psi: &Psi) -> Complex64 {
    if !path.survived() {
        return Complex64::new(0.0, 0.0);
    }
    let ito = path_line_integral(path, a).ito;
    let div = if a.is_divergence_free() {
        0.0
    } else {
        let n = path.points.len() - 1;
        let mut acc = 0.5 * (a.divergence(path.points[0]) + a.divergence(path.points[n]));
        for p in &path.points[1..n] {
            acc += a.divergence(*p);
        }
        acc * path.dt
    };
    psi.eval(path.end()) * Complex64::from_polar(1.0, -ito - 0.5 * div)
}

pub fn fki_apply(q: &FkiQuery) -> Result<MCEstimate> {
    if !(q.t > 0.0) {
        return invalid(format!("fki time must be positive (got {})", q.t));
    }
    let s = &q.sampling;
    let bundle = sample_brownian(q.x, q.t, s.steps, s.paths, s.seed, q.domain)?;
    let samples = bundle.map(|p| (fki_weight(p, &q.a, &q.psi), p.survived()));
    let survivors = samples.iter().filter(|(_, alive)| *alive).count();
    let vals: Vec<Complex64> = samples.into_iter().map(|(v, _)| v).collect();
    let mut est = MCEstimate::from_samples(&vals, s.seed);
    if survivors == 0 {
        est.value = Complex64::new(0.0, 0.0);
        est.stderr = 0.0;
        est.degenerate = true;
    }
    Ok(est)
}

/// Free heat kernel `(2 pi t)^{-1} exp(-|x - y|^2 / 2t)`.
pub fn free_kernel(x: Point, y: Point, t: f64) -> f64 {
    (-(x - y).norm_sq() / (2.0 * t)).exp() / (2.0 * PI * t)
}

/// Heat kernel of `½(−i∇ − A)²` for the uniform field `beta0` in the
/// symmetric gauge.
pub fn mehler_kernel(x: Point, y: Point, t: f64, beta0: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return invalid(format!("kernel time must be positive (got {t})"));
    }
    if !(beta0 >= 0.0) {
        return invalid(format!("field strength must be nonnegative (got {beta0})"));
    }
    let z = 0.5 * beta0 * t;
    let z2 = z * z;
    // z / sinh z and z coth z
    let (ratio, zcoth) = if z < 1e-4 {
        (1.0 - z2 / 6.0 + 7.0 * z2 * z2 / 360.0, 1.0 + z2 / 3.0 - z2 * z2 / 45.0)
    } else {
        (z / z.sinh(), z / z.tanh())
    };
    let modulus = ratio / (2.0 * PI * t) * (-(x - y).norm_sq() / (2.0 * t) * zcoth).exp();
    let phase = 0.5 * beta0 * (x.y * y.x - x.x * y.y);
    Ok(Complex64::from_polar(modulus, phase))
}

/// Bridge Monte Carlo estimate of the uniform-field kernel: the free density
/// times the mean bridge weight `exp(-i int A . d omega)` in the symmetric
/// gauge.
pub fn fki_kernel_estimate(x: Point, y: Point, t: f64, beta0: f64, s: &Sampling) -> Result<MCEstimate> {
    if !(t > 0.0) {
        return invalid(format!("kernel time must be positive (got {t})"));
    }
    let bundle = sample_bridge(x, y, t, s.steps, s.paths, s.seed)?;
    let a = VectorField2D::landau(beta0);
    let vals = bundle.map(|p| Complex64::from_polar(1.0, -path_line_integral(p, &a).ito));
    Ok(MCEstimate::from_samples(&vals, s.seed).scaled(free_kernel(x, y, t)))
}
