//! Checks of the magnetic Agmon decay bound against computed eigenfunctions
//! and of the constant-field lower-bound chain.

use std::io::Write;

use serde::Serialize;

use crate::agmon::{
    agmon_distance, classically_allowed, confine_exponent, path_length_refined, AgmonParams, AgmonWeight,
    AllowedRegion, BetaBar, OptimizerSpec, RegionConvention, J01, J1_AT_J01, NU1_DISC,
};
use crate::error::{invalid, Error, Result};
use crate::fields::{ScalarField2D, VectorField2D};
use crate::geometry::{Domain, Grid2D, Point, Polyline, Rect};
use crate::spectral::{build_peierls, lowest_eigenpairs, EigenSpec, SpectralResult};

/// The alternative value of `nu1` implied by `2 nu1 ≈ 4.8`.
pub const NU1_ALT: f64 = 2.4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub x: Point,
    pub absf: f64,
    pub rho: f64,
    /// Euclidean distance to the allowed region.
    pub dist: f64,
    /// `log ||f||_inf − log|f(x)| − rho`
    pub slack: f64,
    /// Closed-form comparison exponent where one applies.
    pub comparison: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub lambda: f64,
    pub params: AgmonParams,
    pub sup_f: f64,
    pub rows: Vec<BoundRow>,
    /// `max_rows(log|f(x)| + rho − log ||f||_inf)`
    pub fitted_log_c: f64,
    pub violations: usize,
    pub equality_rows: usize,
    /// Pearson correlation of `−log|f|` with `rho`.
    pub correlation: f64,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Points on `angles` rays through `center`, at `radii` equally spaced radii
/// between the exit from the allowed region and 80% of the inscribed radius
/// of `domain`.
pub fn default_samples(region: &AllowedRegion, domain: &Domain, center: Point, angles: usize, radii: usize) -> Vec<Point> {
    let r_max = 0.8 * domain.boundary_distance(center).min(1e6);
    let step = r_max / 2000.0;
    let mut out = Vec::new();
    for k in 0..angles {
        let th = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
        let dir = Point::new(th.cos(), th.sin());
        let r_in = (0..=2000).map(|s| s as f64 * step).filter(|&r| region.contains(center + dir * r)).fold(0.0, f64::max);
        if r_in >= r_max {
            continue;
        }
        for j in 0..radii {
            let r = r_in + (r_max - r_in) * (j + 1) as f64 / radii as f64;
            out.push(center + dir * r);
        }
    }
    out
}

/// Fits `c_a` in `|f(x)| <= c_a e^{−rho(x, E_lambda)} ||f||_inf` over the sample
/// points, with `lambda` taken from eigenpair `index`.
pub fn verify_decay(
    res: &SpectralResult,
    index: usize,
    a: &VectorField2D,
    beta: &ScalarField2D,
    params: &AgmonParams,
    samples: &[Point],
    spec: &OptimizerSpec,
) -> Result<BoundReport> {
    if index >= res.len() {
        return invalid(format!("eigenpair {index} not computed"));
    }
    let lambda = res.eigenvalues[index];
    let params = AgmonParams { lambda, ..*params };
    let region = classically_allowed(a, lambda, res.grid(), params.convention)?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let outside: Vec<Point> = samples.iter().copied().filter(|&p| !region.contains(p)).collect();
    if outside.is_empty() {
        return invalid("all sample points lie inside the allowed region");
    }
    let field = res.abs_field(index);
    let sup_f = res.sup_abs(index);
    let domain = *res.grid().domain();
    let mut rows = Vec::with_capacity(outside.len());
    for x in outside {
        let absf = field.eval(x);
        if !(absf > 0.0) {
            return Err(Error::NonFinite { context: "log|f| at sample".into(), at: x });
        }
        let r = agmon_distance(x, &region, beta, &params, Some(&domain), spec)?;
        let comparison = match *beta {
            ScalarField2D::Constant { beta0 } => Some(beta0 * r.euclidean_distance.powi(2) / 8.0),
            ScalarField2D::RadialQuadratic { beta0 } => Some(confine_exponent(beta0, x, r.endpoint)),
            _ => None,
        };
        rows.push(BoundRow {
            x,
            absf,
            rho: r.distance,
            dist: r.euclidean_distance,
            slack: sup_f.ln() - absf.ln() - r.distance,
            comparison,
            converged: r.converged,
        });
    }
    let fitted_log_c = rows.iter().map(|r| -r.slack).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows.iter().filter(|r| -r.slack > fitted_log_c).count();
    let equality_rows = rows.iter().filter(|r| -r.slack == fitted_log_c).count();
    let neg_log: Vec<f64> = rows.iter().map(|r| -r.absf.ln()).collect();
    let rho: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    Ok(BoundReport {
        lambda,
        params,
        sup_f,
        correlation: pearson(&neg_log, &rho),
        rows,
        fitted_log_c,
        violations,
        equality_rows,
    })
}

impl BoundReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<usize> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "absf", "rho", "dist", "slack", "comparison"])?;
        for r in &self.rows {
            wr.write_record([
                format!("{:.12e}", r.x.x),
                format!("{:.12e}", r.x.y),
                format!("{:.12e}", r.absf),
                format!("{:.12e}", r.rho),
                format!("{:.12e}", r.dist),
                format!("{:.12e}", r.slack),
                r.comparison.map(|c| format!("{c:.12e}")).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(self.rows.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub target_dist: f64,
    pub x: Point,
    pub dist: f64,
    pub threshold: f64,
    pub straight: f64,
    pub optimized: f64,
    pub straight_ok: bool,
    pub optimized_ok: bool,
    pub t_f: f64,
    pub tau: f64,
    /// Integrand `(b0²/4)((|x|−|γ(t)|)² + 2t) − (b0 − 2nu1)` is positive on `[tau, 1]`.
    pub positivity_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauRow {
    pub nu1: f64,
    /// `2(b0 − 2nu1)/b0²`
    pub t0_raw: f64,
    pub t0: f64,
    /// Whether `2(b0 − 2nu1)/b0² < 0.12`.
    pub below_012: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub beta0: f64,
    pub a: f64,
    pub lambda: f64,
    pub nu1: f64,
    pub rows: Vec<SuiteRow>,
    pub tau_rows: Vec<TauRow>,
    pub passed: bool,
}

pub const SUITE_TOL: f64 = 0.01;

pub fn t0_raw(beta0: f64, nu1: f64) -> f64 {
    2.0 * (beta0 - 2.0 * nu1) / (beta0 * beta0)
}

/// Last sampled time at which `||x| − |γ(t)|| <= d / 2`.
fn t_f(gamma: &Polyline, d: f64) -> f64 {
    let x = gamma.start().norm();
    (0..=4000)
        .map(|k| k as f64 / 4000.0)
        .filter(|&t| (x - gamma.point_at(t).norm()).abs() <= 0.5 * d)
        .fold(0.0, f64::max)
}

/// Constant field `beta0` in the Landau gauge at `lambda = beta0 / 2`: the
/// straight and optimized Agmon lengths against `beta0 d² / 8` for
/// `d in {1, 2, 3}`, plus the exit-time construction.
pub fn constant_field_suite(beta0: f64, a: f64, nu1: f64, half_width: f64, n: usize, spec: &OptimizerSpec) -> Result<SuiteReport> {
    if !(beta0 > 0.0) {
        return invalid(format!("beta0 must be positive (got {beta0})"));
    }
    let lambda = beta0 / 2.0;
    let params = AgmonParams::with_nu1(lambda, a, nu1)?;
    let field = VectorField2D::landau(beta0);
    let grid = Grid2D::over_box(Rect::centered_square(half_width)?, n, n)?;
    let region = classically_allowed(&field, lambda, &grid, RegionConvention::HalfSquared)?;
    let beta = ScalarField2D::constant(beta0);
    let r_e = 2.0 / beta0.sqrt();
    let t0 = t0_raw(beta0, nu1).max(0.0);
    let mut rows = Vec::new();
    for d in [1.0, 2.0, 3.0] {
        let x = Point::new(r_e + d, 0.0);
        if x.x >= half_width {
            return invalid(format!("box half-width {half_width} too small for distance {d}"));
        }
        let res = agmon_distance(x, &region, &beta, &params, None, spec)?;
        let dist = res.euclidean_distance;
        let threshold = beta0 * dist * dist / 8.0;
        let (y, _, _) = region.nearest_boundary(x).ok_or(Error::EmptyRegion)?;
        let line = Polyline::straight(x, y, spec.segments.max(2));
        let w = AgmonWeight { beta_bar: BetaBar::new(beta.clone(), x, 20, 16)?, params };
        let straight = path_length_refined(&line, &w, 1)?.value;
        let tf = t_f(&line, dist);
        let tau = t0.max(tf).min(1.0);
        let xn = x.norm();
        let positivity_ok = (0..=1000).map(|k| tau + (1.0 - tau) * k as f64 / 1000.0).all(|t| {
            let r = xn - line.point_at(t).norm();
            t >= t0 && 0.25 * beta0 * beta0 * (r * r + 2.0 * t) - (beta0 - 2.0 * nu1) > 0.0
        });
        rows.push(SuiteRow {
            target_dist: d,
            x,
            dist,
            threshold,
            straight,
            optimized: res.distance,
            straight_ok: straight >= threshold,
            optimized_ok: res.distance >= threshold * (1.0 - SUITE_TOL),
            t_f: tf,
            tau,
            positivity_ok,
        });
    }
    let tau_rows = [NU1_ALT, NU1_DISC]
        .iter()
        .map(|&v| {
            let raw = t0_raw(beta0, v);
            TauRow { nu1: v, t0_raw: raw, t0: raw.max(0.0), below_012: raw < 0.12 }
        })
        .collect();
    let passed = rows.iter().all(|r| r.straight_ok && r.optimized_ok && r.positivity_ok);
    Ok(SuiteReport { beta0, a, lambda, nu1, rows, tau_rows, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FujitaReport {
    pub n: usize,
    pub nu1: f64,
    pub f1_at_center: f64,
    pub integral: f64,
    pub c2: f64,
    /// `2 / (j01 J1(j01))`
    pub c2_exact: f64,
}

/// `C2 = f1(0) ∫_D f1` for the normalized Dirichlet ground state of the unit
/// disc on an `n × n` box grid.
pub fn fujita_c2(n: usize) -> Result<FujitaReport> {
    let grid = Grid2D::new(Domain::disc(Point::ORIGIN, 1.0)?, n, n)?;
    let op = build_peierls(&grid, &VectorField2D::Zero)?;
    let res = lowest_eigenpairs(&op, &EigenSpec::lowest(1))?;
    let f = res.abs_field(0);
    let f0 = f.eval(Point::ORIGIN);
    let integral: f64 = res.abs_on_grid(0).iter().sum::<f64>() * grid.hx() * grid.hy();
    Ok(FujitaReport {
        n,
        nu1: res.eigenvalues[0],
        f1_at_center: f0,
        integral,
        c2: f0 * integral,
        c2_exact: 2.0 / (J01 * J1_AT_J01),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizerSpec {
        OptimizerSpec { segments: 12, restarts: 2, max_iter: 1000, ..OptimizerSpec::default() }
    }

    #[test]
    fn pearson_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &[8.0, 6.0, 4.0, 2.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn suite_passes_for_unit_field() {
        let rep = constant_field_suite(1.0, 1.0, NU1_DISC, 6.0, 120, &quick()).unwrap();
        assert!(rep.passed, "{rep:?}");
        let row = &rep.rows[1];
        assert!((row.dist - 2.0).abs() < 0.02 && (row.threshold - 0.5).abs() < 0.01);
        assert!((row.t_f - 0.5).abs() < 1e-3);
        assert!(rep.tau_rows[0].t0_raw != rep.tau_rows[1].t0_raw);
    }

    #[test]
    fn suite_small_field_thresholds_shrink() {
        let rep = constant_field_suite(0.05, 1.0, NU1_DISC, 14.0, 112, &quick()).unwrap();
        assert!(rep.passed);
        assert!(rep.rows.iter().all(|r| r.threshold < 0.06));
    }

    #[test]
    fn t0_values() {
        assert!((t0_raw(10.0, NU1_ALT) - 0.104).abs() < 1e-12);
        // the maximum over beta0 of 2(beta0 - c)/beta0² is 1/(2c) at beta0 = 2c
        let c = 2.0 * NU1_DISC;
        assert!((t0_raw(2.0 * c, NU1_DISC) - 1.0 / (2.0 * c)).abs() < 1e-12);
    }

    #[test]
    fn fujita_constant() {
        let rep = fujita_c2(96).unwrap();
        assert!((rep.c2 - rep.c2_exact).abs() < 0.02 * rep.c2_exact, "{rep:?}");
        assert!((rep.c2_exact - 1.602).abs() < 1e-3);
    }

    #[test]
    fn decay_report_for_landau_ground_state() {
        let grid = Grid2D::over_box(Rect::centered_square(6.0).unwrap(), 64, 64).unwrap();
        let a = VectorField2D::landau(1.0);
        let res = lowest_eigenpairs(&build_peierls(&grid, &a).unwrap(), &EigenSpec::lowest(1)).unwrap();
        let params = AgmonParams::new(0.0, 1.0).unwrap();
        let region = classically_allowed(&a, res.eigenvalues[0], &grid, params.convention).unwrap();
        let samples = default_samples(&region, grid.domain(), Point::ORIGIN, 4, 3);
        let rep = verify_decay(&res, 0, &a, &ScalarField2D::constant(1.0), &params, &samples, &quick()).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.equality_rows >= 1);
        assert!(rep.fitted_log_c.is_finite());
        assert!(rep.rows.iter().all(|r| r.slack.is_finite()));
        assert!(rep.correlation > 0.9, "{}", rep.correlation);
        for r in &rep.rows {
            assert!(r.rho >= r.comparison.unwrap() * 0.99);
        }
    }

    #[test]
    fn larger_lambda_never_increases_rho() {
        let grid = Grid2D::over_box(Rect::centered_square(6.0).unwrap(), 96, 96).unwrap();
        let a = VectorField2D::landau(1.0);
        let beta = ScalarField2D::constant(1.0);
        let x = Point::new(3.5, 1.0);
        let mut last = f64::INFINITY;
        for lambda in [0.3, 0.5, 0.9] {
            let region = classically_allowed(&a, lambda, &grid, RegionConvention::HalfSquared).unwrap();
            let params = AgmonParams::new(lambda, 1.0).unwrap();
            let rho = agmon_distance(x, &region, &beta, &params, None, &quick()).unwrap().distance;
            assert!(rho <= last * (1.0 + 1e-3), "lambda {lambda}: {rho} > {last}");
            last = rho;
        }
    }

    #[test]
    fn all_inside_samples_rejected() {
        let grid = Grid2D::over_box(Rect::centered_square(4.0).unwrap(), 24, 24).unwrap();
        let a = VectorField2D::landau(1.0);
        let res = lowest_eigenpairs(&build_peierls(&grid, &a).unwrap(), &EigenSpec::lowest(1)).unwrap();
        let params = AgmonParams::new(0.0, 1.0).unwrap();
        let err = verify_decay(&res, 0, &a, &ScalarField2D::constant(1.0), &params, &[Point::ORIGIN], &quick());
        assert!(err.is_err());
    }
}
