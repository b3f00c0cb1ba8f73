//! Peierls lattice discretization of `½(−i∇ − A)²` and its lowest
//! eigenpairs.

mod banded;
mod lobpcg;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fields::{GaugeTag, GridSamples, VectorField2D};
use crate::geometry::{Boundary, Grid2D, Point};
use banded::BandCholesky;
use lobpcg::{dense_lowest, lobpcg, norm};

/// Operators up to this dimension are diagonalized densely.
pub const DENSE_MAX: usize = 400;
/// Smallest boundary fraction used by the Dirichlet ghost-node closure.
pub const MIN_BOUNDARY_FRACTION: f64 = 0.05;
const NONE: usize = usize::MAX;

/// `∫_p^q A·dl`; midpoint rule, with gradient shifts integrated exactly.
pub fn link_phase(a: &VectorField2D, p: Point, q: Point) -> Result<f64> {
    if let VectorField2D::GaugeShifted { base, phi } = a {
        return Ok(link_phase(base, p, q)? + phi.value(q) - phi.value(p));
    }
    let mid = p.lerp(q, 0.5);
    let v = a.eval(mid).dot(q - p);
    if !v.is_finite() {
        return Err(Error::NonFinite { context: "vector potential on edge midpoint".into(), at: mid });
    }
    Ok(v)
}

/// `(Hu)_p = ½ Σ_q (u_p − e^{−iθ_pq} u_q) / h²` over interior nodes, with a
/// ghost-node Dirichlet closure `u_p / (θ h²)` for each missing neighbor at
/// boundary fraction `θ`.
#[derive(Debug, Clone)]
pub struct PeierlsOperator {
    grid: Grid2D,
    gauge: GaugeTag,
    nodes: Vec<usize>,
    diag: Vec<f64>,
    links: Vec<[(usize, Complex64); 4]>,
}

pub fn build_peierls(grid: &Grid2D, a: &VectorField2D) -> Result<PeierlsOperator> {
    let mut slot = vec![NONE; grid.len()];
    let mut nodes = Vec::new();
    for (i, j, _) in grid.interior_nodes() {
        slot[grid.index(i, j)] = nodes.len();
        nodes.push(grid.index(i, j));
    }
    if nodes.is_empty() {
        return invalid("grid has no interior nodes");
    }
    let dirichlet = grid.domain().boundary == Boundary::Dirichlet;
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let mut diag = Vec::with_capacity(nodes.len());
    let mut links = Vec::with_capacity(nodes.len());
    for &g in &nodes {
        let (i, j) = ((g % grid.nx()) as i64, (g / grid.nx()) as i64);
        let p = grid.node(i as usize, j as usize);
        let mut d = 0.0;
        let mut row = [(NONE, Complex64::new(0.0, 0.0)); 4];
        for (k, (di, dj)) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].into_iter().enumerate() {
            let h = if di != 0 { grid.hx() } else { grid.hy() };
            let c = 0.5 / (h * h);
            let (qi, qj) = (i + di, j + dj);
            let q = Point::new(p.x + di as f64 * grid.hx(), p.y + dj as f64 * grid.hy());
            let inside = qi >= 0 && qj >= 0 && qi < nx && qj < ny && grid.is_interior(qi as usize, qj as usize);
            if inside {
                let theta = link_phase(a, p, q)?;
                row[k] = (slot[grid.index(qi as usize, qj as usize)], -c * Complex64::from_polar(1.0, -theta));
                d += c;
            } else if dirichlet {
                let frac = grid.domain().crossing_fraction(p, q).max(MIN_BOUNDARY_FRACTION);
                d += c / frac;
            }
        }
        diag.push(d);
        links.push(row);
    }
    Ok(PeierlsOperator { grid: grid.clone(), gauge: a.gauge_tag(), nodes, diag, links })
}

impl PeierlsOperator {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn gauge(&self) -> GaugeTag {
        self.gauge
    }

    /// Grid indices of the unknowns.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .into_par_iter()
            .with_min_len(1024)
            .map(|r| {
                let mut acc = u[r] * self.diag[r];
                for &(q, c) in &self.links[r] {
                    if q != NONE {
                        acc += c * u[q];
                    }
                }
                acc
            })
            .collect()
    }

    fn entry(&self, r: usize, q: usize) -> Complex64 {
        if r == q {
            return Complex64::new(self.diag[r], 0.0);
        }
        self.links[r].iter().filter(|l| l.0 == q).map(|l| l.1).sum()
    }

    fn bandwidth(&self) -> usize {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().filter(|l| l.0 != NONE).map(move |l| r.abs_diff(l.0)))
            .max()
            .unwrap_or(0)
    }

    /// Banded Cholesky factor of `H + shift I`.
    fn factor(&self, shift: f64) -> Option<BandCholesky> {
        BandCholesky::factor(self.dim(), self.bandwidth(), |i, j| {
            let e = self.entry(i, j);
            if i == j { e + shift } else { e }
        })
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = Complex64::new(self.diag[r], 0.0);
            for &(q, c) in &self.links[r] {
                if q != NONE {
                    m[(r, q)] += c;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSpec {
    pub k: usize,
    /// Extra block vectors beyond `k`.
    pub guard: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenSpec {
    fn default() -> Self {
        EigenSpec { k: 6, guard: 8, tol: 1e-8, max_iter: 2000, seed: 0 }
    }
}

impl EigenSpec {
    pub fn lowest(k: usize) -> Self {
        EigenSpec { k, ..EigenSpec::default() }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Grid-L²-normalized eigenvectors over the interior nodes.
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub gauge: GaugeTag,
    pub converged: bool,
    pub iterations: usize,
    grid: Grid2D,
    nodes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub gauge: GaugeTag,
    pub converged: bool,
    pub iterations: usize,
    pub nx: usize,
    pub ny: usize,
    pub dim: usize,
}

const CLUSTER_TOL: f64 = 1e-10;

/// Lowest `spec.k` eigenpairs. Exactly or nearly degenerate clusters are
/// rotated to diagonalize `|p − c|²` about the box center, so the most
/// central state comes first.
pub fn lowest_eigenpairs(op: &PeierlsOperator, spec: &EigenSpec) -> Result<SpectralResult> {
    let n = op.dim();
    if spec.k == 0 || spec.k >= n {
        return invalid(format!("need 1 <= k < dim = {n} (got k = {})", spec.k));
    }
    let solved = if n <= DENSE_MAX {
        dense_lowest(op.to_dense(), spec.k)
    } else {
        let apply = |u: &[Complex64]| op.apply(u);
        let scale = op.diag.iter().fold(0.0, |m: f64, d| m.max(*d));
        let chol = op.factor(0.0).or_else(|| op.factor(1e-6 * scale));
        let solve = chol.as_ref().map(|c| move |r: &[Complex64]| c.solve(r));
        let precond = solve.as_ref().map(|f| f as &dyn Fn(&[Complex64]) -> Vec<Complex64>);
        lobpcg(n, &apply, precond, spec.k, spec.k + spec.guard, 0.5 * spec.tol, spec.max_iter, spec.seed)
    };
    let mut values = solved.values;
    let mut vectors = solved.vectors;

    let center = op.grid.bbox().center();
    let weight: Vec<f64> = op
        .nodes
        .iter()
        .map(|&g| (op.grid.node(g % op.grid.nx(), g / op.grid.nx()) - center).norm_sq())
        .collect();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] <= CLUSTER_TOL * values[end].abs().max(1.0) {
            end += 1;
        }
        if end - start > 1 {
            rotate_cluster(&mut values[start..end], &mut vectors[start..end], &weight, op);
        }
        start = end;
    }

    let cell = op.grid.hx() * op.grid.hy();
    let mut residuals = Vec::with_capacity(values.len());
    for (v, lam) in vectors.iter_mut().zip(&values) {
        let s = 1.0 / (norm(v) * cell.sqrt());
        let imax = first_max(v);
        let phase = v[imax].conj() / v[imax].norm();
        v.iter_mut().for_each(|z| *z *= phase * s);
        let hv = op.apply(v);
        let r: f64 = hv.iter().zip(v.iter()).map(|(a, b)| (a - b * lam).norm_sqr()).sum::<f64>().sqrt();
        residuals.push(r / norm(v));
    }
    let converged = solved.converged && residuals.iter().all(|&r| r <= spec.tol);
    Ok(SpectralResult {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        gauge: op.gauge,
        converged,
        iterations: solved.iterations,
        grid: op.grid.clone(),
        nodes: op.nodes.clone(),
    })
}

/// First index whose modulus is within `1e-9` relative of the maximum, so
/// symmetric ties resolve the same way in every gauge.
fn first_max(v: &[Complex64]) -> usize {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter().position(|z| z.norm() >= m * (1.0 - 1e-9)).unwrap_or(0)
}

fn rotate_cluster(values: &mut [f64], vectors: &mut [Vec<Complex64>], weight: &[f64], op: &PeierlsOperator) {
    let m = vectors.len();
    let mut g = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v: Complex64 = vectors[i].iter().zip(&vectors[j]).zip(weight).map(|((a, b), w)| a.conj() * b * w).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = vectors[0].len();
    let rotated: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&c| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (i, v) in vectors.iter().enumerate() {
                let cij = eig.eigenvectors[(i, c)];
                for (o, x) in out.iter_mut().zip(v) {
                    *o += cij * x;
                }
            }
            out
        })
        .collect();
    for (k, v) in rotated.into_iter().enumerate() {
        let hv = op.apply(&v);
        values[k] = lobpcg::dot(&v, &hv).re / lobpcg::dot(&v, &v).re;
        vectors[k] = v;
    }
}

impl SpectralResult {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `|f_k|` on every grid node, zero outside the domain.
    pub fn abs_on_grid(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (&g, z) in self.nodes.iter().zip(&self.eigenvectors[k]) {
            out[g] = z.norm();
        }
        out
    }

    /// Bilinear interpolant of `|f_k|` through the grid nodes.
    pub fn abs_field(&self, k: usize) -> GridSamples {
        let xs: Vec<f64> = (0..self.grid.nx()).map(|i| self.grid.node(i, 0).x).collect();
        let ys: Vec<f64> = (0..self.grid.ny()).map(|j| self.grid.node(0, j).y).collect();
        GridSamples::new(xs, ys, self.abs_on_grid(k)).expect("grid node coordinates are increasing")
    }

    pub fn sup_abs(&self, k: usize) -> f64 {
        self.eigenvectors[k].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Grid node of the largest `|f_k|`.
    pub fn argmax(&self, k: usize) -> (usize, usize) {
        let g = self.nodes[first_max(&self.eigenvectors[k])];
        (g % self.grid.nx(), g / self.grid.nx())
    }

    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            eigenvalues: self.eigenvalues.clone(),
            residuals: self.residuals.clone(),
            gauge: self.gauge,
            converged: self.converged,
            iterations: self.iterations,
            nx: self.grid.nx(),
            ny: self.grid.ny(),
            dim: self.nodes.len(),
        }
    }

    pub fn write_eigenvalues_csv<W: Write>(&self, w: W) -> Result<usize> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "eigenvalue", "residual"])?;
        for (k, (v, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            wr.write_record([k.to_string(), format!("{v:.15e}"), format!("{r:.6e}")])?;
        }
        wr.flush()?;
        Ok(self.eigenvalues.len())
    }

    /// Writes `i,j,x,y,absf` for every grid node.
    pub fn write_abs_csv<W: Write>(&self, k: usize, w: W) -> Result<usize> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "x", "y", "absf"])?;
        let abs = self.abs_on_grid(k);
        for (i, j, p) in self.grid.all_nodes() {
            wr.write_record([
                i.to_string(),
                j.to_string(),
                format!("{:.12e}", p.x),
                format!("{:.12e}", p.y),
                format!("{:.12e}", abs[self.grid.index(i, j)]),
            ])?;
        }
        wr.flush()?;
        Ok(self.grid.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub mean_absf: f64,
    pub max_absf: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub center: Point,
    pub rows: Vec<ProfileRow>,
    /// Least-squares slope of `log|f|` against `|p − center|²`.
    pub slope: f64,
    pub intercept: f64,
    pub fit_points: usize,
}

/// Nodes with `|f| >= PROFILE_FLOOR · max|f|` enter the log fit.
pub const PROFILE_FLOOR: f64 = 1e-3;

pub fn ground_state_profile(res: &SpectralResult) -> Result<RadialProfile> {
    let bins = (res.grid.nx().max(res.grid.ny()) / 2).max(1);
    radial_profile(res, 0, res.grid.bbox().center(), bins, PROFILE_FLOOR)
}

pub fn radial_profile(res: &SpectralResult, k: usize, center: Point, bins: usize, floor: f64) -> Result<RadialProfile> {
    if k >= res.len() {
        return invalid(format!("eigenvector {k} not computed"));
    }
    let grid = &res.grid;
    let b = grid.bbox();
    let rmax = [Point::new(b.xmin, b.ymin), Point::new(b.xmax, b.ymin), Point::new(b.xmin, b.ymax), Point::new(b.xmax, b.ymax)]
        .iter()
        .map(|c| c.dist(center))
        .fold(0.0, f64::max);
    let width = rmax / bins as f64;
    let mut sum = vec![0.0; bins];
    let mut max = vec![0.0f64; bins];
    let mut count = vec![0usize; bins];
    let sup = res.sup_abs(k);
    let (mut sx, mut sy, mut sxx, mut sxy, mut npts) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (&g, z) in res.nodes.iter().zip(&res.eigenvectors[k]) {
        let p = grid.node(g % grid.nx(), g / grid.nx());
        let r2 = (p - center).norm_sq();
        let bin = ((r2.sqrt() / width) as usize).min(bins - 1);
        let a = z.norm();
        sum[bin] += a;
        max[bin] = max[bin].max(a);
        count[bin] += 1;
        if a >= floor * sup && a > 0.0 {
            let l = a.ln();
            sx += r2;
            sy += l;
            sxx += r2 * r2;
            sxy += r2 * l;
            npts += 1;
        }
    }
    let nf = npts as f64;
    let den = nf * sxx - sx * sx;
    let (slope, intercept) = if npts >= 2 && den > 0.0 {
        let s = (nf * sxy - sx * sy) / den;
        (s, (sy - s * sx) / nf)
    } else {
        (f64::NAN, f64::NAN)
    };
    let rows = (0..bins)
        .filter(|&i| count[i] > 0)
        .map(|i| ProfileRow { r: (i as f64 + 0.5) * width, mean_absf: sum[i] / count[i] as f64, max_absf: max[i], count: count[i] })
        .collect();
    Ok(RadialProfile { center, rows, slope, intercept, fit_points: npts })
}

impl RadialProfile {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<usize> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "mean_absf", "max_absf", "count"])?;
        for row in &self.rows {
            wr.write_record([
                format!("{:.12e}", row.r),
                format!("{:.12e}", row.mean_absf),
                format!("{:.12e}", row.max_absf),
                row.count.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(self.rows.len())
    }
}
