//! Magnetic fields `beta`, vector potentials `A`, gauge functions and the
//! deterministic admissibility screens.

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Grid2D, Point};
use crate::quadrature::UnitLegendre;

/// Tensor-product samples with bilinear interpolation, clamped to the
/// sample box outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl GridSamples {
    /// `values[j * xs.len() + i]` is the sample at `(xs[i], ys[j])`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return invalid("grid samples need at least 2 nodes per axis");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("grid sample coordinates must be strictly increasing");
        }
        if values.len() != xs.len() * ys.len() {
            return invalid(format!(
                "expected {} grid values, got {}",
                xs.len() * ys.len(),
                values.len()
            ));
        }
        Ok(GridSamples { xs, ys, values })
    }

    /// Samples `f` at the nodes of `grid` (all nodes, masked or not).
    pub fn from_fn(grid: &Grid2D, f: impl Fn(Point) -> f64) -> Self {
        let xs = (0..grid.nx()).map(|i| grid.node(i, 0).x).collect();
        let ys = (0..grid.ny()).map(|j| grid.node(0, j).y).collect();
        let values = grid.all_nodes().map(|(_, _, p)| f(p)).collect();
        GridSamples { xs, ys, values }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nx = self.xs.len();
        self.values[j * nx + i] = v;
    }

    fn locate(axis: &[f64], v: f64) -> (usize, f64) {
        let n = axis.len();
        let v = v.clamp(axis[0], axis[n - 1]);
        let k = match axis.binary_search_by(|a| a.partial_cmp(&v).unwrap()) {
            Ok(k) => return (k.min(n - 2), if k == n - 1 { 1.0 } else { 0.0 }),
            Err(k) => k - 1,
        };
        (k, (v - axis[k]) / (axis[k + 1] - axis[k]))
    }

    pub fn eval(&self, p: Point) -> f64 {
        let (i, fx) = Self::locate(&self.xs, p.x);
        let (j, fy) = Self::locate(&self.ys, p.y);
        let nx = self.xs.len();
        // zero-weight corners are skipped so node values are reproduced exactly
        let mut acc = 0.0;
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                let w = wx * wy;
                if w != 0.0 {
                    acc += w * self.values[(j + dj) * nx + i + di];
                }
            }
        }
        acc
    }

    /// Reads CSV with header `x,y,value` describing a full tensor grid.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
            return Err(Error::Parse(format!("grid CSV header must be x,y,value (got {headers:?})")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let mut vals = [0.0; 3];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = rec[k]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("{e}: {:?} (line {:?})", &rec[k], rec.position().map(|p| p.line()))))?;
            }
            rows.push(vals);
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        if xs.len() * ys.len() != rows.len() {
            return Err(Error::Parse("grid CSV is not a full tensor grid".into()));
        }
        let mut values = vec![f64::NAN; rows.len()];
        let mut seen = vec![false; rows.len()];
        for r in &rows {
            let i = xs.binary_search_by(|a| a.total_cmp(&r[0])).unwrap();
            let j = ys.binary_search_by(|a| a.total_cmp(&r[1])).unwrap();
            let k = j * xs.len() + i;
            if seen[k] {
                return Err(Error::Parse(format!("duplicate grid node ({}, {})", r[0], r[1])));
            }
            seen[k] = true;
            values[k] = r[2];
        }
        GridSamples::new(xs, ys, values)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "value"])?;
        for (j, y) in self.ys.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                let v = self.values[j * self.xs.len() + i];
                wr.write_record([x.to_string(), y.to_string(), v.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Magnetic field strength `beta: R^2 -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField2D {
    Constant { beta0: f64 },
    /// `beta0 |p|^2`
    RadialQuadratic { beta0: f64 },
    /// Concave paraboloid `peak - kappa |p|^2`, `kappa >= 0`.
    Concave { peak: f64, kappa: f64 },
    /// `amplitude exp(-|p - center|^2 / (2 width^2))`
    GaussianBump { amplitude: f64, center: Point, width: f64 },
    /// `W - U`
    Split { w: Box<ScalarField2D>, u: Box<ScalarField2D> },
    Grid(GridSamples),
}

impl ScalarField2D {
    pub fn constant(beta0: f64) -> Self {
        ScalarField2D::Constant { beta0 }
    }

    pub fn zero() -> Self {
        ScalarField2D::Constant { beta0: 0.0 }
    }

    pub fn radial_quadratic(beta0: f64) -> Self {
        ScalarField2D::RadialQuadratic { beta0 }
    }

    pub fn concave(peak: f64, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return invalid(format!("concave field needs kappa >= 0 (got {kappa})"));
        }
        Ok(ScalarField2D::Concave { peak, kappa })
    }

    pub fn gaussian_bump(amplitude: f64, center: Point, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return invalid(format!("bump width must be positive (got {width})"));
        }
        Ok(ScalarField2D::GaussianBump { amplitude, center, width })
    }

    pub fn split(w: ScalarField2D, u: ScalarField2D) -> Self {
        ScalarField2D::Split { w: Box::new(w), u: Box::new(u) }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            ScalarField2D::Constant { beta0 } => *beta0,
            ScalarField2D::RadialQuadratic { beta0 } => beta0 * p.norm_sq(),
            ScalarField2D::Concave { peak, kappa } => peak - kappa * p.norm_sq(),
            ScalarField2D::GaussianBump { amplitude, center, width } => {
                amplitude * (-(p - *center).norm_sq() / (2.0 * width * width)).exp()
            }
            ScalarField2D::Split { w, u } => w.eval(p) - u.eval(p),
            ScalarField2D::Grid(g) => g.eval(p),
        }
    }

    /// True when the field depends on `|p|` only.
    pub fn is_radial(&self) -> bool {
        match self {
            ScalarField2D::Constant { .. }
            | ScalarField2D::RadialQuadratic { .. }
            | ScalarField2D::Concave { .. } => true,
            ScalarField2D::GaussianBump { center, .. } => *center == Point::ORIGIN,
            ScalarField2D::Split { w, u } => w.is_radial() && u.is_radial(),
            ScalarField2D::Grid(_) => false,
        }
    }

    /// For a split field, checks `U >= 0` on every node of `grid` and returns
    /// the sampled `(min W, max U)`.
    pub fn split_bounds(&self, grid: &Grid2D) -> Result<(f64, f64)> {
        let ScalarField2D::Split { w, u } = self else {
            return invalid("split_bounds needs a W - U split field");
        };
        let mut w_inf = f64::INFINITY;
        let mut u_sup: f64 = 0.0;
        for (_, _, p) in grid.all_nodes() {
            let (wv, uv) = (w.eval(p), u.eval(p));
            if !wv.is_finite() || !uv.is_finite() {
                return Err(Error::NonFinite { context: "split field".into(), at: p });
            }
            if uv < 0.0 {
                return Err(Error::HypothesisViolated { what: format!("U = {uv} < 0"), witness: p });
            }
            w_inf = w_inf.min(wv);
            u_sup = u_sup.max(uv);
        }
        Ok((w_inf, u_sup))
    }
}

/// Scalar gauge function `phi` with analytic gradient and Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeFunction {
    /// `a x^2 + b x y + c y^2 + d x + e y`
    Quadratic { a: f64, b: f64, c: f64, d: f64, e: f64 },
    /// `amp sin(kx x) cos(ky y)`
    Trig { amp: f64, kx: f64, ky: f64 },
}

impl GaugeFunction {
    pub fn value(&self, p: Point) -> f64 {
        match *self {
            GaugeFunction::Quadratic { a, b, c, d, e } => {
                a * p.x * p.x + b * p.x * p.y + c * p.y * p.y + d * p.x + e * p.y
            }
            GaugeFunction::Trig { amp, kx, ky } => amp * (kx * p.x).sin() * (ky * p.y).cos(),
        }
    }

    pub fn gradient(&self, p: Point) -> Point {
        match *self {
            GaugeFunction::Quadratic { a, b, c, d, e } => {
                Point::new(2.0 * a * p.x + b * p.y + d, b * p.x + 2.0 * c * p.y + e)
            }
            GaugeFunction::Trig { amp, kx, ky } => Point::new(
                amp * kx * (kx * p.x).cos() * (ky * p.y).cos(),
                -amp * ky * (kx * p.x).sin() * (ky * p.y).sin(),
            ),
        }
    }

    pub fn laplacian(&self, p: Point) -> f64 {
        match *self {
            GaugeFunction::Quadratic { a, c, .. } => 2.0 * (a + c),
            GaugeFunction::Trig { kx, ky, .. } => -(kx * kx + ky * ky) * self.value(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeTag {
    Landau,
    Transversal,
    Custom,
}

/// Vector potential `A: R^2 -> R^2`.
#[derive(Debug, Clone)]
pub enum VectorField2D {
    Zero,
    Constant { c: Point },
    /// `(beta0 / 2)(-y, x)`
    Landau { beta0: f64 },
    /// `(int_0^1 t beta(t p) dt)(-y, x)`
    Transversal { beta: ScalarField2D, quad: UnitLegendre },
    /// `M p + b` with `M = [[m11, m12], [m21, m22]]`
    Affine { m: [[f64; 2]; 2], b: Point },
    /// `A + grad phi`
    GaugeShifted { base: Box<VectorField2D>, phi: GaugeFunction },
    Grid { ax: GridSamples, ay: GridSamples },
}

const FD_STEP: f64 = 1e-5;

impl VectorField2D {
    pub fn landau(beta0: f64) -> Self {
        VectorField2D::Landau { beta0 }
    }

    pub fn gauge_shifted(self, phi: GaugeFunction) -> Self {
        VectorField2D::GaugeShifted { base: Box::new(self), phi }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> Point {
        match self {
            VectorField2D::Zero => Point::ORIGIN,
            VectorField2D::Constant { c } => *c,
            VectorField2D::Landau { beta0 } => p.perp() * (0.5 * beta0),
            VectorField2D::Transversal { beta, quad } => {
                p.perp() * quad.integrate(|t| t * beta.eval(p * t))
            }
            VectorField2D::Affine { m, b } => {
                Point::new(m[0][0] * p.x + m[0][1] * p.y + b.x, m[1][0] * p.x + m[1][1] * p.y + b.y)
            }
            VectorField2D::GaugeShifted { base, phi } => base.eval(p) + phi.gradient(p),
            VectorField2D::Grid { ax, ay } => Point::new(ax.eval(p), ay.eval(p)),
        }
    }

    /// Analytic divergence where one is known.
    pub fn declared_divergence(&self, p: Point) -> Option<f64> {
        match self {
            VectorField2D::Zero | VectorField2D::Constant { .. } | VectorField2D::Landau { .. } => {
                Some(0.0)
            }
            VectorField2D::Transversal { beta, .. } => beta.is_radial().then_some(0.0),
            VectorField2D::Affine { m, .. } => Some(m[0][0] + m[1][1]),
            VectorField2D::GaugeShifted { base, phi } => {
                base.declared_divergence(p).map(|d| d + phi.laplacian(p))
            }
            VectorField2D::Grid { .. } => None,
        }
    }

    /// True when the divergence is identically zero by construction.
    pub fn is_divergence_free(&self) -> bool {
        match self {
            VectorField2D::Zero | VectorField2D::Constant { .. } | VectorField2D::Landau { .. } => {
                true
            }
            VectorField2D::Transversal { beta, .. } => beta.is_radial(),
            VectorField2D::Affine { m, .. } => m[0][0] + m[1][1] == 0.0,
            VectorField2D::GaugeShifted { .. } | VectorField2D::Grid { .. } => false,
        }
    }

    /// Declared divergence, or a central-difference estimate.
    pub fn divergence(&self, p: Point) -> f64 {
        if let Some(d) = self.declared_divergence(p) {
            return d;
        }
        let h = FD_STEP * (1.0 + p.norm());
        let ex = Point::new(h, 0.0);
        let ey = Point::new(0.0, h);
        (self.eval(p + ex).x - self.eval(p - ex).x + self.eval(p + ey).y - self.eval(p - ey).y)
            / (2.0 * h)
    }

    pub fn gauge_tag(&self) -> GaugeTag {
        match self {
            VectorField2D::Landau { .. } => GaugeTag::Landau,
            VectorField2D::Transversal { .. } => GaugeTag::Transversal,
            _ => GaugeTag::Custom,
        }
    }

    /// Central-difference curl with step `h`.
    pub fn curl_fd(&self, p: Point, h: f64) -> f64 {
        let ex = Point::new(h, 0.0);
        let ey = Point::new(0.0, h);
        (self.eval(p + ex).y - self.eval(p - ex).y - self.eval(p + ey).x + self.eval(p - ey).x)
            / (2.0 * h)
    }
}

/// Transversal (Poincare) gauge of `beta` with a Gauss–Legendre rule of
/// order `quad_n`.
pub fn transversal_gauge(beta: &ScalarField2D, quad_n: usize) -> Result<VectorField2D> {
    Ok(VectorField2D::Transversal { beta: beta.clone(), quad: UnitLegendre::new(quad_n)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurlReport {
    pub max_deviation: f64,
    pub worst_node: Point,
    /// First node where `A` or `beta` was not finite.
    pub failed_at: Option<Point>,
}

/// Max over interior nodes of `|curl_h A - beta|`.
pub fn curl_check(a: &VectorField2D, beta: &ScalarField2D, region: &Grid2D, h: f64) -> Result<CurlReport> {
    if !(h > 0.0) {
        return invalid(format!("curl step must be positive (got {h})"));
    }
    let mut report = CurlReport { max_deviation: 0.0, worst_node: Point::ORIGIN, failed_at: None };
    for (_, _, p) in region.interior_nodes() {
        let dev = (a.curl_fd(p, h) - beta.eval(p)).abs();
        if !dev.is_finite() {
            report.failed_at = Some(p);
            report.max_deviation = f64::INFINITY;
            report.worst_node = p;
            break;
        }
        if dev > report.max_deviation {
            report.max_deviation = dev;
            report.worst_node = p;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KatoVerdict {
    Finite,
    FailsScreen,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KatoReport {
    pub verdict: KatoVerdict,
    /// `sup_c (int_{B_1(c)} |A|^{2p})^{1/p}` over sampled centers.
    pub sup_estimate: f64,
    pub argsup: Point,
    pub witness: Option<Point>,
    pub exponent: f64,
}

/// Riemann-sum estimate of `(int_{B_1(c)} |A|^{2p})^{1/p}` on a lattice of
/// spacing `(hx, hy)` centered at `c`.
pub fn local_lp_norm(a: &VectorField2D, c: Point, p: f64, hx: f64, hy: f64) -> std::result::Result<f64, Point> {
    let kx = (1.0 / hx).floor() as i64;
    let ky = (1.0 / hy).floor() as i64;
    let mut acc = 0.0;
    for j in -ky..=ky {
        for i in -kx..=kx {
            let off = Point::new(i as f64 * hx, j as f64 * hy);
            if off.norm_sq() >= 1.0 {
                continue;
            }
            let q = c + off;
            let v = a.eval(q).norm_sq().powf(p);
            if !v.is_finite() {
                return Err(q);
            }
            acc += v;
        }
    }
    let total = acc * hx * hy;
    if !total.is_finite() {
        return Err(c);
    }
    Ok(total.powf(1.0 / p))
}

/// Sufficient-condition screen for local Kato membership: `|A|^2` in
/// `L^p_unif,loc` with `p > 1`, sampled over unit balls centered at the
/// interior nodes of `grid` that lie in `bx`.
pub fn kato_lp_check(a: &VectorField2D, bx: &Domain, p: f64, grid: &Grid2D) -> Result<KatoReport> {
    if !(p > 1.0) {
        return invalid(format!("Kato screen needs p > 1 in two dimensions (got {p})"));
    }
    let mut report = KatoReport {
        verdict: KatoVerdict::Finite,
        sup_estimate: 0.0,
        argsup: Point::ORIGIN,
        witness: None,
        exponent: p,
    };
    for (_, _, c) in grid.interior_nodes() {
        if !(bx.boundary_distance(c) >= 0.0) {
            continue;
        }
        match local_lp_norm(a, c, p, grid.hx(), grid.hy()) {
            Ok(v) => {
                if v > report.sup_estimate {
                    report.sup_estimate = v;
                    report.argsup = c;
                }
            }
            Err(q) => {
                report.verdict = KatoVerdict::FailsScreen;
                report.sup_estimate = f64::INFINITY;
                report.witness = Some(q);
                return Ok(report);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn unit_grid(n: usize) -> Grid2D {
        Grid2D::over_box(Rect::centered_square(1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn landau_curl_exact() {
        let g = Grid2D::over_box(Rect::centered_square(3.0).unwrap(), 31, 31).unwrap();
        let r = curl_check(&VectorField2D::landau(2.0), &ScalarField2D::constant(2.0), &g, 1e-3)
            .unwrap();
        assert!(r.max_deviation <= 1e-10, "{r:?}");
        let r = curl_check(&VectorField2D::Zero, &ScalarField2D::zero(), &g, 1e-3).unwrap();
        assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn transversal_gauge_values() {
        let a = transversal_gauge(&ScalarField2D::constant(3.0), 4).unwrap();
        let v = a.eval(Point::new(1.0, 0.0));
        assert!(v.x.abs() < 1e-15 && (v.y - 1.5).abs() < 1e-14);
        let a0 = transversal_gauge(&ScalarField2D::zero(), 4).unwrap();
        assert_eq!(a0.eval(Point::new(0.3, -2.0)), Point::ORIGIN);
        // int_0^1 t * b t^2 r^2 dt = b r^2 / 4
        let aq = transversal_gauge(&ScalarField2D::radial_quadratic(2.0), 4).unwrap();
        let v = aq.eval(Point::new(1.5, 0.0));
        assert!((v.y - 2.0 * 1.5f64.powi(3) / 4.0).abs() < 1e-13);
        assert!(transversal_gauge(&ScalarField2D::zero(), 0).is_err());
    }

    #[test]
    fn transversal_curl_reproduces_field() {
        let g = unit_grid(21);
        for beta in [
            ScalarField2D::constant(1.3),
            ScalarField2D::radial_quadratic(1.0),
            ScalarField2D::concave(2.0, 0.5).unwrap(),
            ScalarField2D::gaussian_bump(1.0, Point::new(0.3, -0.2), 0.7).unwrap(),
        ] {
            let a = transversal_gauge(&beta, 16).unwrap();
            let r = curl_check(&a, &beta, &g, 1e-3).unwrap();
            assert!(r.max_deviation <= 1e-4, "{beta:?}: {r:?}");
        }
    }

    #[test]
    fn curl_error_is_second_order() {
        let beta = ScalarField2D::gaussian_bump(1.0, Point::new(0.3, -0.2), 0.7).unwrap();
        let a = transversal_gauge(&beta, 24).unwrap();
        let g = unit_grid(9);
        let e1 = curl_check(&a, &beta, &g, 0.04).unwrap().max_deviation;
        let e2 = curl_check(&a, &beta, &g, 0.02).unwrap().max_deviation;
        let rate = (e1 / e2).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn transversal_divergence_matches_angular_derivative() {
        // div A = int_0^1 t^2 (p1 d2 beta - p2 d1 beta)(t p) dt for the
        // off-center bump; zero for radial fields
        let c = Point::new(0.3, -0.2);
        let w = 0.7;
        let beta = ScalarField2D::gaussian_bump(1.0, c, w).unwrap();
        let a = transversal_gauge(&beta, 24).unwrap();
        let p = Point::new(0.8, 0.5);
        let q = UnitLegendre::new(40).unwrap();
        let exact = q.integrate(|t| {
            let r = p * t;
            let b = beta.eval(r);
            let grad = (r - c) * (-b / (w * w));
            t * t * (p.x * grad.y - p.y * grad.x)
        });
        assert!((a.divergence(p) - exact).abs() < 1e-7, "{} vs {exact}", a.divergence(p));
        let ar = transversal_gauge(&ScalarField2D::radial_quadratic(1.0), 8).unwrap();
        assert_eq!(ar.divergence(p), 0.0);
    }

    #[test]
    fn gauge_shift_preserves_curl() {
        let g = unit_grid(15);
        let beta = ScalarField2D::constant(1.0);
        for phi in [
            GaugeFunction::Quadratic { a: 0.3, b: -0.7, c: 0.2, d: 1.0, e: -0.5 },
            GaugeFunction::Trig { amp: 0.8, kx: 1.3, ky: 0.9 },
        ] {
            let a = VectorField2D::landau(1.0).gauge_shifted(phi);
            let r = curl_check(&a, &beta, &g, 1e-3).unwrap();
            assert!(r.max_deviation <= 1e-6, "{phi:?}: {r:?}");
            assert_eq!(a.gauge_tag(), GaugeTag::Custom);
        }
    }

    #[test]
    fn gauge_function_derivatives() {
        let p = Point::new(0.4, -1.1);
        let h = 1e-5;
        for phi in [
            GaugeFunction::Quadratic { a: 0.3, b: -0.7, c: 0.2, d: 1.0, e: -0.5 },
            GaugeFunction::Trig { amp: 0.8, kx: 1.3, ky: 0.9 },
        ] {
            let gx = (phi.value(p + Point::new(h, 0.0)) - phi.value(p - Point::new(h, 0.0))) / (2.0 * h);
            let gy = (phi.value(p + Point::new(0.0, h)) - phi.value(p - Point::new(0.0, h))) / (2.0 * h);
            assert!((phi.gradient(p) - Point::new(gx, gy)).norm() < 1e-8);
            let hh = 1e-3;
            let lap = (phi.value(p + Point::new(hh, 0.0)) + phi.value(p - Point::new(hh, 0.0))
                + phi.value(p + Point::new(0.0, hh))
                + phi.value(p - Point::new(0.0, hh))
                - 4.0 * phi.value(p))
                / (hh * hh);
            assert!((phi.laplacian(p) - lap).abs() < 1e-5);
        }
    }

    #[test]
    fn grid_samples_exact_at_nodes_and_clamped() {
        let g = unit_grid(7);
        let f = |p: Point| p.x * p.x - 3.0 * p.y + 0.5;
        let s = GridSamples::from_fn(&g, f);
        for (_, _, p) in g.all_nodes() {
            assert_eq!(s.eval(p), f(p));
        }
        let corner = g.node(6, 6);
        assert_eq!(s.eval(Point::new(10.0, 10.0)), f(corner));
        let mid = Point::new(0.5 * (g.node(2, 3).x + g.node(3, 3).x), g.node(2, 3).y);
        assert!((s.eval(mid) - 0.5 * (f(g.node(2, 3)) + f(g.node(3, 3)))).abs() < 1e-14);
    }

    #[test]
    fn grid_samples_csv_roundtrip() {
        let g = unit_grid(4);
        let s = GridSamples::from_fn(&g, |p| p.x - 2.0 * p.y);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let t = GridSamples::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, t);
        assert!(GridSamples::read_csv("x,y,value\n0,0,1\n1,0,2\n0,1,3\n".as_bytes()).is_err());
    }

    #[test]
    fn split_is_pointwise_difference_and_checked() {
        let w = ScalarField2D::radial_quadratic(1.0);
        let u = ScalarField2D::gaussian_bump(0.5, Point::ORIGIN, 1.0).unwrap();
        let s = ScalarField2D::split(w.clone(), u.clone());
        let p = Point::new(0.7, -0.1);
        assert_eq!(s.eval(p), w.eval(p) - u.eval(p));
        let g = unit_grid(5);
        let (w_inf, u_sup) = s.split_bounds(&g).unwrap();
        assert!(w_inf >= 0.0 && u_sup <= 0.5);
        let bad = ScalarField2D::split(w, ScalarField2D::constant(-1.0));
        assert!(matches!(bad.split_bounds(&g), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn kato_screen_landau_zero_and_singular() {
        let bx = Domain::rectangle(-5.0, 5.0, -5.0, 5.0).unwrap();
        let g = Grid2D::over_box(Rect::centered_square(5.0).unwrap(), 40, 40).unwrap();
        let r = kato_lp_check(&VectorField2D::landau(1.0), &bx, 2.0, &g).unwrap();
        assert_eq!(r.verdict, KatoVerdict::Finite);
        assert!(r.argsup.norm() > 6.0, "sup should sit near a corner: {:?}", r.argsup);
        let z = kato_lp_check(&VectorField2D::Zero, &bx, 2.0, &g).unwrap();
        assert_eq!(z.sup_estimate, 0.0);

        let mut ax = GridSamples::from_fn(&g, |_| 0.0);
        ax.set(10, 12, 1e300);
        let ay = GridSamples::from_fn(&g, |_| 0.0);
        let sing = VectorField2D::Grid { ax, ay };
        let r = kato_lp_check(&sing, &bx, 2.0, &g).unwrap();
        assert_eq!(r.verdict, KatoVerdict::FailsScreen);
        assert!(r.witness.is_some());
        assert!(kato_lp_check(&VectorField2D::Zero, &bx, 1.0, &g).is_err());
    }

    #[test]
    fn kato_local_norm_matches_analytic_ball_integral() {
        // int_{B_1(0)} (r/2)^{2p} = 2 pi / (4^p (2p + 2))
        let p = 2.0;
        let exact = (2.0 * std::f64::consts::PI / (4f64.powf(p) * (2.0 * p + 2.0))).powf(1.0 / p);
        let v = local_lp_norm(&VectorField2D::landau(1.0), Point::ORIGIN, p, 0.005, 0.005).unwrap();
        assert!((v - exact).abs() / exact < 1e-3, "{v} vs {exact}");
    }

    #[test]
    fn kato_value_grows_toward_corner() {
        let a = VectorField2D::landau(1.0);
        let vals: Vec<f64> = [0.0, 1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&s| local_lp_norm(&a, Point::new(s, s), 2.0, 0.05, 0.05).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_difference_exact(x in -3.0f64..3.0, y in -3.0f64..3.0, b in 0.0f64..2.0, amp in 0.0f64..2.0) {
                let w = ScalarField2D::radial_quadratic(b);
                let u = ScalarField2D::gaussian_bump(amp, Point::new(0.5, 0.5), 0.8).unwrap();
                let s = ScalarField2D::split(w.clone(), u.clone());
                let p = Point::new(x, y);
                prop_assert_eq!(s.eval(p), w.eval(p) - u.eval(p));
            }

            #[test]
            fn gauge_shift_curl_invariant(x in -2.0f64..2.0, y in -2.0f64..2.0,
                                          a in -1.0f64..1.0, b in -1.0f64..1.0, k in 0.1f64..2.0) {
                let p = Point::new(x, y);
                let base = VectorField2D::landau(1.3);
                let shifted = base.clone()
                    .gauge_shifted(GaugeFunction::Quadratic { a, b, c: -a, d: b, e: a })
                    .gauge_shifted(GaugeFunction::Trig { amp: b, kx: k, ky: 1.0 });
                prop_assert!((shifted.curl_fd(p, 1e-3) - base.curl_fd(p, 1e-3)).abs() < 1e-6);
            }
        }
    }
}
