//! Classically allowed region `E_lambda` and its boundary contours.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fields::VectorField2D;
use crate::geometry::{Grid2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionConvention {
    /// `{½|A|² <= lambda}`
    HalfSquared,
    /// `{½|A| <= lambda}`
    HalfNorm,
}

/// Boundary polyline extracted by marching squares, parametrized by
/// arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<Point>,
    pub closed: bool,
    cumulative: Vec<f64>,
}

impl Contour {
    fn new(mut points: Vec<Point>, closed: bool) -> Self {
        if closed && points.first() != points.last() {
            points.push(points[0]);
        }
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().unwrap() + w[0].dist(w[1]));
        }
        Contour { points, closed, cumulative }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.length());
        let k = match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => return self.points[k],
            Err(k) => k - 1,
        };
        let len = self.cumulative[k + 1] - self.cumulative[k];
        self.points[k].lerp(self.points[k + 1], (s - self.cumulative[k]) / len)
    }

    /// Closest point, its arclength parameter and distance.
    pub fn nearest(&self, x: Point) -> (Point, f64, f64) {
        let mut best = (self.points[0], 0.0, x.dist(self.points[0]));
        for k in 0..self.points.len().saturating_sub(1) {
            let (a, b) = (self.points[k], self.points[k + 1]);
            let d = b - a;
            let l2 = d.norm_sq();
            let s = if l2 > 0.0 { ((x - a).dot(d) / l2).clamp(0.0, 1.0) } else { 0.0 };
            let q = a.lerp(b, s);
            let dist = x.dist(q);
            if dist < best.2 {
                best = (q, self.cumulative[k] + s * l2.sqrt(), dist);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct AllowedRegion {
    a: VectorField2D,
    lambda: f64,
    convention: RegionConvention,
    pub grid: Grid2D,
    /// Node mask in grid order.
    pub mask: Vec<bool>,
    pub contours: Vec<Contour>,
}

impl AllowedRegion {
    /// Signed level: nonpositive inside the region.
    pub fn level(&self, p: Point) -> f64 {
        level(&self.a, self.lambda, self.convention, p)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.level(p) <= 0.0
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn boundary_length(&self) -> f64 {
        self.contours.iter().map(Contour::length).sum()
    }

    /// Point at arclength `s` along the concatenated contours. Closed
    /// contours wrap; the total parameter range wraps as a whole.
    pub fn boundary_point(&self, s: f64) -> Point {
        let total = self.boundary_length();
        let mut s = s.rem_euclid(total);
        for c in &self.contours {
            if s <= c.length() {
                return c.point_at(s);
            }
            s -= c.length();
        }
        self.contours.last().unwrap().points.last().copied().unwrap()
    }

    /// Closest boundary point to `x` as `(point, arclength, distance)`.
    pub fn nearest_boundary(&self, x: Point) -> Option<(Point, f64, f64)> {
        let mut offset = 0.0;
        let mut best: Option<(Point, f64, f64)> = None;
        for c in &self.contours {
            let (q, s, d) = c.nearest(x);
            if best.is_none_or(|b| d < b.2) {
                best = Some((q, offset + s, d));
            }
            offset += c.length();
        }
        best
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn convention(&self) -> RegionConvention {
        self.convention
    }
}

fn level(a: &VectorField2D, lambda: f64, convention: RegionConvention, p: Point) -> f64 {
    let v = a.eval(p);
    match convention {
        RegionConvention::HalfSquared => 0.5 * v.norm_sq() - lambda,
        RegionConvention::HalfNorm => 0.5 * v.norm() - lambda,
    }
}

/// Node mask of `E_lambda` on `grid` and its boundary from sign changes along
/// grid edges with linear interpolation.
pub fn classically_allowed(
    a: &VectorField2D,
    lambda: f64,
    grid: &Grid2D,
    convention: RegionConvention,
) -> Result<AllowedRegion> {
    if !lambda.is_finite() || lambda < 0.0 {
        return invalid(format!("lambda must be finite and nonnegative (got {lambda})"));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut values = Vec::with_capacity(nx * ny);
    for (_, _, p) in grid.all_nodes() {
        let v = level(a, lambda, convention, p);
        if !v.is_finite() {
            return Err(Error::NonFinite { context: "vector potential".into(), at: p });
        }
        values.push(v);
    }
    let mask: Vec<bool> = values.iter().map(|&v| v <= 0.0).collect();
    let contours = march(grid, &values, &mask);
    Ok(AllowedRegion { a: a.clone(), lambda, convention, grid: grid.clone(), mask, contours })
}

fn march(grid: &Grid2D, values: &[f64], mask: &[bool]) -> Vec<Contour> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let idx = |i: usize, j: usize| j * nx + i;
    let h_edge = |i: usize, j: usize| 2 * idx(i, j) as u64;
    let v_edge = |i: usize, j: usize| 2 * idx(i, j) as u64 + 1;
    let mut edge_points: HashMap<u64, Point> = HashMap::new();
    let mut segments: Vec<(u64, u64)> = Vec::new();

    let mut crossing = |id: u64, a: (usize, usize), b: (usize, usize)| -> u64 {
        edge_points.entry(id).or_insert_with(|| {
            let (va, vb) = (values[idx(a.0, a.1)], values[idx(b.0, b.1)]);
            let s = va / (va - vb);
            grid.node(a.0, a.1).lerp(grid.node(b.0, b.1), s)
        });
        id
    };

    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let inside = c.map(|(a, b)| mask[idx(a, b)]);
            // edges: bottom, right, top, left
            let edges = [
                (h_edge(i, j), c[0], c[1]),
                (v_edge(i + 1, j), c[1], c[2]),
                (h_edge(i, j + 1), c[3], c[2]),
                (v_edge(i, j), c[0], c[3]),
            ];
            let cut = [
                inside[0] != inside[1],
                inside[1] != inside[2],
                inside[3] != inside[2],
                inside[0] != inside[3],
            ];
            let crossed: Vec<usize> = (0..4).filter(|&e| cut[e]).collect();
            match crossed.len() {
                2 => {
                    let (e0, e1) = (edges[crossed[0]], edges[crossed[1]]);
                    let a = crossing(e0.0, e0.1, e0.2);
                    let b = crossing(e1.0, e1.1, e1.2);
                    segments.push((a, b));
                }
                4 => {
                    let center = c.iter().map(|&(a, b)| values[idx(a, b)]).sum::<f64>() / 4.0;
                    let pairs = if (center <= 0.0) == inside[0] { [(0, 1), (2, 3)] } else { [(3, 0), (1, 2)] };
                    for (p, q) in pairs {
                        let a = crossing(edges[p].0, edges[p].1, edges[p].2);
                        let b = crossing(edges[q].0, edges[q].1, edges[q].2);
                        segments.push((a, b));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<u64, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut contours = Vec::new();
    let trace = |start_seg: usize, start_edge: u64, used: &mut Vec<bool>| -> Contour {
        let mut ids = vec![start_edge];
        let mut seg = start_seg;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            ids.push(next);
            at = next;
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        let closed = ids.len() > 2 && ids.first() == ids.last();
        let points = ids.iter().map(|id| edge_points[id]).collect();
        Contour::new(points, closed)
    };
    // open chains first, starting from their loose ends
    for k in 0..segments.len() {
        if used[k] {
            continue;
        }
        for end in [segments[k].0, segments[k].1] {
            if by_edge[&end].len() == 1 && !used[k] {
                contours.push(trace(k, end, &mut used));
            }
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            contours.push(trace(k, segments[k].0, &mut used));
        }
    }
    contours
}
