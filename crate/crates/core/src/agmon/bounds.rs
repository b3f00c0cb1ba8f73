//! Closed-form decay exponents for confining and concave fields, and the
//! two-term Carmona-type bound for a split field `beta = W - U`.

use serde::Serialize;

use super::optimize::{minimize_path, AgmonResult, OptimizerSpec};
use super::region::AllowedRegion;
use super::{agmon_distance, AgmonParams, PathWeight};
use crate::error::{invalid, Error, Result};
use crate::fields::ScalarField2D;
use crate::geometry::{Grid2D, Point, Polyline};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub kind: String,
    pub x: Point,
    /// The bound reads `|f(x)| <= c_a exp(-exponent) ||f||_inf`.
    pub exponent: f64,
    pub endpoint: Point,
    pub path: AgmonResult,
}

/// `(beta0 / 6)(|x + y|^2 - 2)` with `y` the endpoint of an optimal Agmon path
/// from `x` to the allowed region.
///
/// The screen checks `beta(p) >= beta0 |p|^2` at every node of `screen` with
/// `|p| > compact_radius`.
#[allow(clippy::too_many_arguments)]
pub fn confine_bound(
    x: Point,
    beta0: f64,
    beta: &ScalarField2D,
    compact_radius: f64,
    screen: &Grid2D,
    region: &AllowedRegion,
    params: &AgmonParams,
    spec: &OptimizerSpec,
) -> Result<CorollaryReport> {
    if !(beta0 > 0.0) {
        return invalid(format!("confining constant must be positive (got {beta0})"));
    }
    for (_, _, p) in screen.all_nodes() {
        let r2 = p.norm_sq();
        if r2.sqrt() > compact_radius {
            let b = beta.eval(p);
            if b < beta0 * r2 * (1.0 - 1e-12) {
                return Err(Error::HypothesisViolated {
                    what: format!("beta = {b} < beta0 |p|^2 = {} outside radius {compact_radius}", beta0 * r2),
                    witness: p,
                });
            }
        }
    }
    let path = agmon_distance(x, region, beta, params, None, spec)?;
    let y = path.endpoint;
    Ok(CorollaryReport {
        kind: "confine".into(),
        x,
        exponent: confine_exponent(beta0, x, y),
        endpoint: y,
        path,
    })
}

pub fn confine_exponent(beta0: f64, x: Point, y: Point) -> f64 {
    beta0 / 6.0 * ((x + y).norm_sq() - 2.0)
}

/// `sqrt(max((beta(p) - inf beta)^2 / 36 (2t + (|x| - |p|)^2) - 2(lambda - nu1/a^2), 0))`
#[derive(Debug, Clone)]
pub struct ConcaveWeight {
    pub beta: ScalarField2D,
    pub inf_beta: f64,
    pub x: Point,
    pub params: AgmonParams,
}

impl PathWeight for ConcaveWeight {
    fn weight(&self, p: Point, t: f64) -> Result<f64> {
        let b = self.beta.eval(p);
        if !b.is_finite() {
            return Err(Error::NonFinite { context: "concave field".into(), at: p });
        }
        let d = b - self.inf_beta;
        let r = self.x.norm() - p.norm();
        let v = d * d / 36.0 * (2.0 * t + r * r) - self.params.clamp_level();
        Ok(v.max(0.0).sqrt())
    }
}

/// Screens `beta` for midpoint concavity along grid rows, columns and
/// diagonals and for `beta >= inf_beta`, then minimizes the concave-field
/// length from `x` to the allowed region.
pub fn concave_bound(
    x: Point,
    beta: &ScalarField2D,
    inf_beta: f64,
    screen: &Grid2D,
    region: &AllowedRegion,
    params: &AgmonParams,
    spec: &OptimizerSpec,
) -> Result<CorollaryReport> {
    let (nx, ny) = (screen.nx(), screen.ny());
    let val = |i: usize, j: usize| beta.eval(screen.node(i, j));
    for j in 0..ny {
        for i in 0..nx {
            let b = val(i, j);
            let scale = 1e-10 * (1.0 + b.abs());
            if b < inf_beta - scale {
                return Err(Error::HypothesisViolated {
                    what: format!("beta = {b} below declared inf {inf_beta}"),
                    witness: screen.node(i, j),
                });
            }
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                continue;
            }
            for (di, dj) in [(1usize, 0usize), (0, 1), (1, 1)] {
                let (a, c) = (val(i - di, j - dj), val(i + di, j + dj));
                if b < 0.5 * (a + c) - scale * (1.0 + a.abs() + c.abs()) {
                    return Err(Error::HypothesisViolated {
                        what: format!("beta not concave: midpoint {b} below chord {}", 0.5 * (a + c)),
                        witness: screen.node(i, j),
                    });
                }
            }
            let (a, c) = (val(i - 1, j + 1), val(i + 1, j - 1));
            if b < 0.5 * (a + c) - scale * (1.0 + a.abs() + c.abs()) {
                return Err(Error::HypothesisViolated {
                    what: format!("beta not concave: midpoint {b} below chord {}", 0.5 * (a + c)),
                    witness: screen.node(i, j),
                });
            }
        }
    }
    let w = ConcaveWeight { beta: beta.clone(), inf_beta, x, params: *params };
    let path = minimize_path(x, region, &w, None, spec)?;
    Ok(CorollaryReport { kind: "concave".into(), x, exponent: path.distance, endpoint: path.endpoint, path })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarmonaReport {
    pub x: Point,
    pub y: Point,
    pub horizon: f64,
    pub w_inf: f64,
    pub u_sup: f64,
    /// Sampled infimum of `W` over the `a`-tube around the path.
    pub w_tube: f64,
    pub path_length: f64,
    pub dist: f64,
    pub c1: f64,
    /// Unnormalized constant `C_{2,a}`, fixed to 1.
    pub c2: f64,
    pub first_term: f64,
    pub second_term: f64,
    pub bound: f64,
    /// Whether `W(y) < W_inf + a` holds at the endpoint.
    pub endpoint_near_inf: bool,
    /// Horizon beyond which both terms decrease, when they eventually do.
    pub crossover: Option<f64>,
}

fn segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let l2 = d.norm_sq();
    let s = if l2 == 0.0 { 0.0 } else { ((p - a).dot(d) / l2).clamp(0.0, 1.0) };
    p.dist(a.lerp(b, s))
}

/// Minimum of `w` over grid nodes within distance `a` of `gamma` and over
/// the vertices of `gamma`.
pub fn tube_inf(w: &ScalarField2D, gamma: &Polyline, a: f64, grid: &Grid2D) -> f64 {
    let verts = gamma.vertices();
    let mut m = verts.iter().map(|&p| w.eval(p)).fold(f64::INFINITY, f64::min);
    for (_, _, p) in grid.all_nodes() {
        let near = verts.windows(2).any(|s| segment_dist(p, s[0], s[1]) <= a)
            || (verts.len() == 1 && p.dist(verts[0]) <= a);
        if near {
            m = m.min(w.eval(p));
        }
    }
    m
}

/// `e^{lambda T}(C2 e^{-(a^2 T/2)(W_inf - |U|)^2} e^{-nu1 T/a^2 - dist(x,y)^2/2T} + e^{-(T/2) W_a^gamma})`
/// with `C1 = C2 = 1`.
pub fn carmona_bound(
    gamma: &Polyline,
    horizon: f64,
    split: &ScalarField2D,
    params: &AgmonParams,
    grid: &Grid2D,
) -> Result<CarmonaReport> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!("horizon T must be positive (got {horizon})"));
    }
    let (w_inf, u_sup) = split.split_bounds(grid)?;
    let ScalarField2D::Split { w, .. } = split else {
        return invalid("carmona bound needs a W - U split field");
    };
    let (x, y) = (gamma.start(), gamma.end());
    let (a, lambda, nu1) = (params.a, params.lambda, params.nu1);
    let w_tube = tube_inf(w, gamma, a, grid);
    let dist = x.dist(y);
    let gap = w_inf - u_sup;
    let t = horizon;
    let decay = 0.5 * a * a * gap * gap + nu1 / (a * a);
    let first_term = ((lambda - decay) * t - dist * dist / (2.0 * t)).exp();
    let second_term = ((lambda - 0.5 * w_tube) * t).exp();
    let crossover = (gap > 0.0 && w_tube > 0.0 && lambda < decay && lambda < 0.5 * w_tube)
        .then(|| dist / (2.0 * (decay - lambda)).sqrt());
    Ok(CarmonaReport {
        x,
        y,
        horizon,
        w_inf,
        u_sup,
        w_tube,
        path_length: gamma.length(),
        dist,
        c1: 1.0,
        c2: 1.0,
        first_term,
        second_term,
        bound: first_term + second_term,
        endpoint_near_inf: w.eval(y) < w_inf + a,
        crossover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agmon::{agmon_weight, classically_allowed, RegionConvention, NU1_DISC};
    use crate::fields::{transversal_gauge, VectorField2D};
    use crate::geometry::Rect;

    fn grid(half: f64, n: usize) -> Grid2D {
        Grid2D::over_box(Rect::centered_square(half).unwrap(), n, n).unwrap()
    }

    fn quick() -> OptimizerSpec {
        OptimizerSpec { segments: 10, restarts: 2, max_iter: 800, ..OptimizerSpec::default() }
    }

    #[test]
    fn concave_weight_collapses_at_infimum() {
        let params = AgmonParams::new(1.0, 1.0).unwrap();
        let w = ConcaveWeight { beta: ScalarField2D::constant(3.0), inf_beta: 3.0, x: Point::new(2.0, 1.0), params };
        for (p, t) in [(Point::ORIGIN, 0.0), (Point::new(-1.0, 4.0), 0.7)] {
            assert_eq!(w.weight(p, t).unwrap(), agmon_weight(0.0, &params));
        }
    }

    #[test]
    fn confine_exponent_vanishes_on_unit_sphere() {
        let x = Point::new(0.3, 0.2);
        let y = Point::new(2f64.sqrt(), 0.0) - x;
        assert!(confine_exponent(1.7, x, y).abs() < 1e-14);
    }

    #[test]
    fn confine_exponent_monotone_along_ray() {
        let beta = ScalarField2D::radial_quadratic(1.0);
        let a = transversal_gauge(&beta, 16).unwrap();
        let g = grid(6.0, 160);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let region = classically_allowed(&a, 0.5, &g, RegionConvention::HalfSquared).unwrap();
        let dir = Point::new(0.6, 0.8);
        let mut last = f64::NEG_INFINITY;
        for r in [2.0, 2.5, 3.0, 3.5] {
            let rep = confine_bound(dir * r, 1.0, &beta, 0.0, &g, &region, &params, &quick()).unwrap();
            assert!(rep.exponent >= last, "r = {r}: {} < {last}", rep.exponent);
            last = rep.exponent;
        }
    }

    #[test]
    fn confine_screen_names_witness() {
        let beta = ScalarField2D::constant(1.0);
        let g = grid(3.0, 12);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let region = classically_allowed(&VectorField2D::landau(1.0), 0.5, &g, RegionConvention::HalfSquared).unwrap();
        let err = confine_bound(Point::new(2.5, 0.0), 1.0, &beta, 1.5, &g, &region, &params, &quick()).unwrap_err();
        match err {
            Error::HypothesisViolated { witness, .. } => assert!(witness.norm() > 1.5),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn concave_screen_rejects_convex_field() {
        let g = grid(2.0, 16);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let region = classically_allowed(&VectorField2D::landau(1.0), 0.5, &g, RegionConvention::HalfSquared).unwrap();
        let convex = ScalarField2D::radial_quadratic(1.0);
        assert!(matches!(
            concave_bound(Point::new(1.9, 0.0), &convex, 0.0, &g, &region, &params, &quick()),
            Err(Error::HypothesisViolated { .. })
        ));
        let concave = ScalarField2D::concave(4.0, 0.5).unwrap();
        assert!(matches!(
            concave_bound(Point::new(1.9, 0.0), &concave, 10.0, &g, &region, &params, &quick()),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn concave_bound_runs() {
        let g = grid(3.0, 48);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let region = classically_allowed(&VectorField2D::landau(1.0), 0.5, &g, RegionConvention::HalfSquared).unwrap();
        let beta = ScalarField2D::concave(4.0, 0.2).unwrap();
        let inf = g.all_nodes().map(|(_, _, p)| beta.eval(p)).fold(f64::INFINITY, f64::min);
        let rep = concave_bound(Point::new(2.8, 0.0), &beta, inf, &g, &region, &params, &quick()).unwrap();
        let clamp = (2.0 * (NU1_DISC - 0.5)).sqrt();
        assert!(rep.exponent >= clamp * rep.path.euclidean_distance * (1.0 - 1e-9));
    }

    #[test]
    fn carmona_constant_split() {
        let g = grid(3.0, 30);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let split = ScalarField2D::split(ScalarField2D::constant(2.0), ScalarField2D::zero());
        let gamma = Polyline::straight(Point::ORIGIN, Point::new(1.5, 2.0), 8);
        let t = 3.0;
        let rep = carmona_bound(&gamma, t, &split, &params, &g).unwrap();
        assert_eq!(rep.w_tube, 2.0);
        assert!((rep.second_term - ((0.5 - 1.0) * t).exp()).abs() < 1e-15);
        // straight path: dist equals length
        assert!((rep.dist - 2.5).abs() < 1e-14 && (rep.path_length - 2.5).abs() < 1e-14);
        let decay = 0.5 * 4.0 + NU1_DISC;
        let expected = ((0.5 - decay) * t - 6.25 / (2.0 * t)).exp();
        assert!((rep.first_term - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn carmona_decreases_beyond_crossover() {
        let g = grid(3.0, 30);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        // W = 3 - bump has its infimum near (1, 0)
        let w = ScalarField2D::split(
            ScalarField2D::constant(3.0),
            ScalarField2D::gaussian_bump(1.0, Point::new(1.0, 0.0), 0.7).unwrap(),
        );
        let split = ScalarField2D::split(w, ScalarField2D::constant(0.2));
        let gamma = Polyline::straight(Point::new(-2.0, 0.0), Point::new(1.0, 0.0), 6);
        let t0 = carmona_bound(&gamma, 1.0, &split, &params, &g).unwrap().crossover.unwrap();
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let t = t0 * (1.0 + k as f64);
            let b = carmona_bound(&gamma, t, &split, &params, &g).unwrap().bound;
            assert!(b <= last, "T = {t}");
            last = b;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn carmona_rejects_negative_u() {
        let g = grid(1.0, 4);
        let params = AgmonParams::new(0.5, 1.0).unwrap();
        let split = ScalarField2D::split(ScalarField2D::constant(1.0), ScalarField2D::constant(-0.1));
        let gamma = Polyline::straight(Point::ORIGIN, Point::new(0.5, 0.0), 2);
        assert!(matches!(carmona_bound(&gamma, 1.0, &split, &params, &g), Err(Error::HypothesisViolated { .. })));
    }
}
