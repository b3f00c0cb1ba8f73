//! Derivative-free minimization of weighted path length from a point to the
//! boundary of the allowed region.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::region::AllowedRegion;
use super::{path_length, path_length_refined, AgmonParams, AgmonWeight, BetaBar, PathWeight};
use crate::error::{invalid, Error, Result};
use crate::fields::ScalarField2D;
use crate::geometry::{Domain, Point, Polyline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerSpec {
    /// Number of path segments `M`.
    pub segments: usize,
    /// Jittered restarts in addition to the straight-line seed.
    pub restarts: usize,
    /// Jitter scale relative to the distance to the region.
    pub jitter: f64,
    pub max_iter: usize,
    pub reparam_every: usize,
    /// Relative spread of simplex values at which a run stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            segments: 24,
            restarts: 8,
            jitter: 0.2,
            max_iter: 4000,
            reparam_every: 20,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgmonResult {
    pub distance: f64,
    pub polyline: Polyline,
    /// Weight at each vertex `(gamma(t_j), t_j)`.
    pub weights: Vec<f64>,
    pub endpoint: Point,
    /// Euclidean distance from the start to the region boundary.
    pub euclidean_distance: f64,
    /// Value of the straight path to the nearest boundary point.
    pub straight_line: f64,
    /// Per-segment midpoint subdivisions used for `distance`.
    pub subdivisions: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl AgmonResult {
    fn trivial(x: Point, distance: f64, euclidean: f64) -> Self {
        AgmonResult {
            distance,
            polyline: Polyline::straight(x, x, 1),
            weights: vec![],
            endpoint: x,
            euclidean_distance: euclidean,
            straight_line: distance,
            subdivisions: 1,
            restarts: 0,
            iterations: 0,
            converged: true,
        }
    }
}

struct Problem<'a> {
    x: Point,
    region: &'a AllowedRegion,
    weight: &'a dyn PathWeight,
    domain: Option<&'a Domain>,
    segments: usize,
    subdivisions: usize,
}

impl Problem<'_> {
    fn decode(&self, v: &[f64]) -> Polyline {
        let m = self.segments;
        let mut verts = Vec::with_capacity(m + 1);
        verts.push(self.x);
        for k in 0..m - 1 {
            verts.push(Point::new(v[2 * k], v[2 * k + 1]));
        }
        verts.push(self.region.boundary_point(v[2 * (m - 1)]));
        Polyline::uniform(verts).expect("decoded path is valid")
    }

    fn encode(&self, gamma: &Polyline, s: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.segments - 1) + 1);
        for p in &gamma.vertices()[1..self.segments] {
            v.push(p.x);
            v.push(p.y);
        }
        v.push(s);
        v
    }

    fn objective(&self, v: &[f64]) -> f64 {
        if v.iter().any(|c| !c.is_finite()) {
            return f64::INFINITY;
        }
        let gamma = self.decode(v);
        if let Some(d) = self.domain {
            if gamma.vertices().iter().any(|p| d.boundary_distance(*p) < 0.0) {
                return f64::INFINITY;
            }
        }
        path_length(&gamma, self.weight, self.subdivisions).unwrap_or(f64::INFINITY)
    }

    /// Resamples the interior vertices to uniform arclength.
    fn reparametrize(&self, v: &[f64]) -> Vec<f64> {
        let s = v[2 * (self.segments - 1)];
        match self.decode(v).resample(self.segments) {
            Ok(r) => self.encode(&r, s),
            Err(_) => v.to_vec(),
        }
    }

    fn nelder_mead(&self, start: Vec<f64>, scale: f64, max_iter: usize, reparam: usize, tol: f64) -> (Vec<f64>, f64, usize, bool) {
        let n = start.len();
        let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
        for i in 0..n {
            let mut v = start.clone();
            v[i] += scale;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| self.objective(v)).collect();
        let order = |simplex: &mut Vec<Vec<f64>>, vals: &mut Vec<f64>| {
            let mut idx: Vec<usize> = (0..simplex.len()).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            *vals = idx.iter().map(|&i| vals[i]).collect();
        };
        order(&mut simplex, &mut vals);
        let mut iters = 0;
        let mut converged = false;
        while iters < max_iter {
            iters += 1;
            if reparam > 0 && iters % reparam == 0 {
                for k in 0..=n {
                    simplex[k] = self.reparametrize(&simplex[k]);
                    vals[k] = self.objective(&simplex[k]);
                }
                order(&mut simplex, &mut vals);
            }
            let (best, worst) = (vals[0], vals[n]);
            if best.is_finite() && (worst - best).abs() <= tol * best.abs().max(1e-12) {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(1.0);
            let fr = self.objective(&xr);
            if fr < vals[0] {
                let xe = along(2.0);
                let fe = self.objective(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    vals[n] = fe;
                } else {
                    simplex[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = xr;
                vals[n] = fr;
            } else {
                let (xc, fc) = if fr < vals[n] {
                    let xc = along(0.5);
                    let fc = self.objective(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = self.objective(&xc);
                    (xc, fc)
                };
                if fc < vals[n].min(fr) {
                    simplex[n] = xc;
                    vals[n] = fc;
                } else {
                    let best = simplex[0].clone();
                    for k in 1..=n {
                        simplex[k] = best.iter().zip(&simplex[k]).map(|(b, v)| b + 0.5 * (v - b)).collect();
                        vals[k] = self.objective(&simplex[k]);
                    }
                }
            }
            order(&mut simplex, &mut vals);
        }
        (simplex[0].clone(), vals[0], iters, converged)
    }
}

/// Minimizes `int w(gamma, t)|gamma'|` over polylines from `x` to the
/// boundary of `region`.
pub fn minimize_path(
    x: Point,
    region: &AllowedRegion,
    weight: &dyn PathWeight,
    domain: Option<&Domain>,
    spec: &OptimizerSpec,
) -> Result<AgmonResult> {
    if spec.segments < 2 {
        return invalid("optimizer needs at least 2 segments");
    }
    if region.contains(x) {
        let e = region.nearest_boundary(x).map(|b| b.2).unwrap_or(0.0);
        return Ok(AgmonResult::trivial(x, 0.0, e));
    }
    if region.is_empty() {
        return Ok(AgmonResult::trivial(x, f64::INFINITY, f64::INFINITY));
    }
    let (y0, s0, dist) = region.nearest_boundary(x).ok_or(Error::EmptyRegion)?;
    let m = spec.segments;
    let straight = Polyline::straight(x, y0, m);
    let refined = path_length_refined(&straight, weight, 1)?;
    let problem = Problem { x, region, weight, domain, segments: m, subdivisions: refined.subdivisions };

    let scale = 0.05 * dist.max(1e-3);
    let seeds: Vec<Vec<f64>> = (0..=spec.restarts)
        .map(|r| {
            let mut v = problem.encode(&straight, s0);
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(r as u64);
                let sd = spec.jitter * dist;
                for c in v.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c += sd * z;
                }
            }
            v
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64, usize, bool)> = seeds
        .into_par_iter()
        .map(|v| problem.nelder_mead(v, scale, spec.max_iter, spec.reparam_every, spec.tol))
        .collect();

    let mut candidates: Vec<Polyline> = vec![straight.clone()];
    candidates.extend(runs.iter().map(|r| problem.decode(&r.0)));
    let admissible = |c: &Polyline| match domain {
        Some(d) => c.vertices().iter().all(|p| d.boundary_distance(*p) >= 0.0),
        None => true,
    };
    let mut sub = refined.subdivisions;
    for c in &candidates[1..] {
        if admissible(c) {
            sub = sub.max(path_length_refined(c, weight, 1)?.subdivisions);
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for (k, c) in candidates.iter().enumerate() {
        if !admissible(c) {
            continue;
        }
        let v = path_length(c, weight, sub)?;
        if best.is_none_or(|b| v < b.0) {
            best = Some((v, k));
        }
    }
    let (distance, k) = best.ok_or_else(|| Error::InvalidInput("no admissible path candidate".into()))?;
    let polyline = candidates[k].clone();
    let weights = polyline
        .times()
        .iter()
        .zip(polyline.vertices())
        .map(|(&t, &p)| weight.weight(p, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AgmonResult {
        distance,
        endpoint: polyline.end(),
        polyline,
        weights,
        euclidean_distance: dist,
        straight_line: path_length(&straight, weight, sub)?,
        subdivisions: sub,
        restarts: spec.restarts,
        iterations: runs.iter().map(|r| r.2).sum(),
        converged: runs.iter().all(|r| r.3),
    })
}

/// Magnetic Agmon distance from `x` to the allowed region.
pub fn agmon_distance(
    x: Point,
    region: &AllowedRegion,
    beta: &ScalarField2D,
    params: &AgmonParams,
    domain: Option<&Domain>,
    spec: &OptimizerSpec,
) -> Result<AgmonResult> {
    if region.lambda() != params.lambda || region.convention() != params.convention {
        return invalid("allowed region was built for a different lambda or convention");
    }
    let probes: Vec<(Point, f64)> = match region.nearest_boundary(x) {
        Some((y, _, _)) => (0..=4).map(|k| (x.lerp(y, k as f64 / 4.0), k as f64 / 4.0)).collect(),
        None => vec![(x, 0.5)],
    };
    let bb = BetaBar::resolved(beta.clone(), x, &probes)?;
    let w = AgmonWeight { beta_bar: bb, params: *params };
    minimize_path(x, region, &w, domain, spec)
}
