//! Planar points, domains, cell-centered grids and discretized paths.
//!
//! Paths are always parametrized over `[0, 1]`; physical time horizons are
//! carried separately by the stochastic estimators.

use std::io::{Read, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Planar cross product `v1 w2 - v2 w1`.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotation by +90 degrees: `(x, y) -> (-y, x)`.
    #[inline]
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    #[inline]
    pub fn lerp(self, other: Point, s: f64) -> Point {
        self + (other - self) * s
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned box `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite())
        {
            return invalid(format!(
                "rectangle needs xmin<xmax, ymin<ymax (got [{xmin},{xmax}]x[{ymin},{ymax}])"
            ));
        }
        Ok(Rect { xmin, xmax, ymin, ymax })
    }

    /// Square `[-h, h]^2` centered at the origin.
    pub fn centered_square(half_width: f64) -> Result<Self> {
        Rect::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn contains_closed(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Rectangle(Rect),
    Disc { center: Point, radius: f64 },
    WholePlane,
}

/// What happens to a stochastic path when it leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Paths are killed on exit (Dirichlet conditions).
    Dirichlet,
    /// Exit is ignored.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub boundary: Boundary,
}

impl Domain {
    pub fn rectangle(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        Ok(Domain {
            shape: Shape::Rectangle(Rect::new(xmin, xmax, ymin, ymax)?),
            boundary: Boundary::Dirichlet,
        })
    }

    pub fn from_rect(rect: Rect) -> Self {
        Domain { shape: Shape::Rectangle(rect), boundary: Boundary::Dirichlet }
    }

    pub fn disc(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return invalid(format!("disc radius must be positive and finite (got {radius})"));
        }
        Ok(Domain { shape: Shape::Disc { center, radius }, boundary: Boundary::Dirichlet })
    }

    pub fn whole_plane() -> Self {
        Domain { shape: Shape::WholePlane, boundary: Boundary::Free }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Signed distance to the boundary: positive inside, negative outside,
    /// zero on the boundary and `+inf` for the whole plane.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self.shape {
            Shape::WholePlane => f64::INFINITY,
            Shape::Disc { center, radius } => radius - p.dist(center),
            Shape::Rectangle(r) => {
                let dx = (r.xmin - p.x).max(p.x - r.xmax);
                let dy = (r.ymin - p.y).max(p.y - r.ymax);
                if dx <= 0.0 && dy <= 0.0 {
                    // inside or on the boundary
                    -dx.max(dy)
                } else {
                    -Point::new(dx.max(0.0), dy.max(0.0)).norm()
                }
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.boundary_distance(p) > 0.0
    }

    /// True when a path at `p` must be killed.
    pub fn kills(&self, p: Point) -> bool {
        self.boundary == Boundary::Dirichlet && self.boundary_distance(p) < 0.0
    }

    pub fn bounding_box(&self) -> Option<Rect> {
        match self.shape {
            Shape::WholePlane => None,
            Shape::Rectangle(r) => Some(r),
            Shape::Disc { center, radius } => Some(Rect {
                xmin: center.x - radius,
                xmax: center.x + radius,
                ymin: center.y - radius,
                ymax: center.y + radius,
            }),
        }
    }

    /// Fraction `theta in (0, 1]` of the segment `p -> q` at which the
    /// boundary is crossed, for `p` inside and `q` outside.
    pub fn crossing_fraction(&self, p: Point, q: Point) -> f64 {
        match self.shape {
            Shape::WholePlane => 1.0,
            Shape::Rectangle(r) => {
                let d = q - p;
                let mut theta: f64 = 1.0;
                if d.x > 0.0 && q.x > r.xmax {
                    theta = theta.min((r.xmax - p.x) / d.x);
                }
                if d.x < 0.0 && q.x < r.xmin {
                    theta = theta.min((r.xmin - p.x) / d.x);
                }
                if d.y > 0.0 && q.y > r.ymax {
                    theta = theta.min((r.ymax - p.y) / d.y);
                }
                if d.y < 0.0 && q.y < r.ymin {
                    theta = theta.min((r.ymin - p.y) / d.y);
                }
                theta.clamp(0.0, 1.0)
            }
            Shape::Disc { center, radius } => {
                // |p - c + s d|^2 = R^2, take the root in (0, 1]
                let d = q - p;
                let f = p - center;
                let a = d.norm_sq();
                let b = 2.0 * f.dot(d);
                let c = f.norm_sq() - radius * radius;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                let s = (-b + disc.sqrt()) / (2.0 * a);
                s.clamp(0.0, 1.0)
            }
        }
    }
}

/// Cell-centered lattice over the bounding box of a domain.
///
/// Node `(i, j)` sits at `(xmin + (i + 1/2) hx, ymin + (j + 1/2) hy)`; nodes
/// inside the domain are interior, the rest are masked out.
#[derive(Debug, Clone)]
pub struct Grid2D {
    domain: Domain,
    bbox: Rect,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    interior: Vec<bool>,
}

impl Grid2D {
    pub fn new(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        let bbox = domain
            .bounding_box()
            .ok_or_else(|| Error::InvalidInput("a grid needs a bounded domain".into()))?;
        Self::build(domain, bbox, nx, ny)
    }

    /// Grid over an explicit box; the box itself is the (Dirichlet) domain.
    pub fn over_box(bbox: Rect, nx: usize, ny: usize) -> Result<Self> {
        Self::build(Domain::from_rect(bbox), bbox, nx, ny)
    }

    fn build(domain: Domain, bbox: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return invalid("grid needs nx, ny >= 1");
        }
        let hx = bbox.width() / nx as f64;
        let hy = bbox.height() / ny as f64;
        let mut grid = Grid2D { domain, bbox, nx, ny, hx, hy, interior: Vec::new() };
        grid.interior =
            (0..nx * ny).map(|k| domain.contains(grid.node(k % nx, k / nx))).collect();
        Ok(grid)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.bbox.xmin + (i as f64 + 0.5) * self.hx,
            self.bbox.ymin + (j as f64 + 0.5) * self.hy,
        )
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.interior[self.index(i, j)]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    /// Iterator over `(i, j, point)` of interior nodes in row-major order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize, Point)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).filter(move |&i| self.is_interior(i, j)).map(move |i| (i, j, self.node(i, j)))
        })
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = (usize, usize, Point)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j, self.node(i, j))))
    }
}

/// Piecewise-linear path `gamma: [0, 1] -> R^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    times: Vec<f64>,
    vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(times: Vec<f64>, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return invalid("a polyline needs at least two vertices");
        }
        if times.len() != vertices.len() {
            return invalid("polyline times and vertices differ in length");
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return invalid("polyline times must run from 0 to 1");
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("polyline times must be strictly increasing");
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite { context: "polyline vertex".into(), at: *p });
        }
        Ok(Polyline { times, vertices })
    }

    /// Polyline with uniform times `j / M`.
    pub fn uniform(vertices: Vec<Point>) -> Result<Self> {
        let m = vertices.len().saturating_sub(1).max(1);
        let times = (0..vertices.len()).map(|j| j as f64 / m as f64).collect();
        Self::new(times, vertices)
    }

    /// Straight segment from `a` to `b` with `segments` equal pieces.
    pub fn straight(a: Point, b: Point, segments: usize) -> Self {
        let m = segments.max(1);
        let vertices = (0..=m).map(|j| a.lerp(b, j as f64 / m as f64)).collect();
        Self::uniform(vertices).expect("straight polyline is valid")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Same curve traversed backwards, times mapped by `t -> 1 - t`.
    pub fn reversed(&self) -> Self {
        let mut times: Vec<f64> = self.times.iter().rev().map(|t| 1.0 - t).collect();
        times[0] = 0.0;
        *times.last_mut().unwrap() = 1.0;
        let vertices = self.vertices.iter().rev().copied().collect();
        Polyline { times, vertices }
    }

    /// Position at parameter `t`, linear between vertices.
    pub fn point_at(&self, t: f64) -> Point {
        let t = t.clamp(0.0, 1.0);
        let seg = match self.times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.vertices[k],
            Err(k) => k - 1,
        };
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        self.vertices[seg].lerp(self.vertices[seg + 1], (t - t0) / (t1 - t0))
    }

    /// Resample at `m` arclength-uniform pieces with uniform times.
    ///
    /// Corners of the input that do not fall on the new vertices are cut, so
    /// the length is preserved exactly only when they do (straight paths and
    /// refinements of arclength-uniform paths).
    pub fn resample(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("resample needs at least one segment");
        }
        let mut cumulative = Vec::with_capacity(self.vertices.len());
        cumulative.push(0.0);
        for w in self.vertices.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].dist(w[1]));
        }
        let total = *cumulative.last().unwrap();
        if total == 0.0 {
            return Ok(Polyline::straight(self.start(), self.start(), m));
        }
        let mut out = Vec::with_capacity(m + 1);
        out.push(self.start());
        let mut seg = 0;
        for j in 1..m {
            let target = total * j as f64 / m as f64;
            while seg + 1 < self.vertices.len() - 1 && cumulative[seg + 1] < target {
                seg += 1;
            }
            let len = cumulative[seg + 1] - cumulative[seg];
            let s = if len > 0.0 { (target - cumulative[seg]) / len } else { 0.0 };
            out.push(self.vertices[seg].lerp(self.vertices[seg + 1], s.clamp(0.0, 1.0)));
        }
        out.push(self.end());
        Polyline::uniform(out)
    }

    /// Write as CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "y"])?;
        for (t, p) in self.times.iter().zip(&self.vertices) {
            wr.write_record([t.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y"] {
            return Err(Error::Parse(format!("polyline CSV header must be t,x,y (got {headers:?})")));
        }
        let mut times = Vec::new();
        let mut vertices = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {:?}", &rec[k])))
            };
            times.push(num(0)?);
            vertices.push(Point::new(num(1)?, num(2)?));
        }
        Polyline::new(times, vertices)
    }
}
