use serde::Serialize;

use super::config::{self, Keys};
use super::{numeric, Artifact, RunError};
use crate::agmon::{
    agmon_distance, beta_bar_mc, carmona_bound, classically_allowed, concave_bound, confine_bound, BetaBar,
    DEFAULT_GH_ORDER, DEFAULT_GL_ORDER,
};
use crate::fields::{kato_lp_check, ScalarField2D};
use crate::geometry::{Point, Polyline};
use crate::heatkernel::{fki_apply, fki_kernel_estimate, mehler_kernel, FkiQuery, Psi};
use crate::spectral::{build_peierls, ground_state_profile, lowest_eigenpairs};
use crate::stochastic::{
    landau_ito_from_levy, path_levy_area, path_line_integral, sample_bridge, sample_brownian, MCEstimate,
};
use crate::verify::{constant_field_suite, default_samples, fujita_c2, verify_decay};

fn constant_beta(beta: &ScalarField2D, key: &str) -> Result<f64, RunError> {
    match beta {
        ScalarField2D::Constant { beta0 } => Ok(*beta0),
        _ => Err(RunError::Config { key: key.into(), message: "requires field.kind = \"constant\"".into() }),
    }
}

fn csv_rows<F>(name: &str, header: &[&str], fill: F) -> Result<Artifact, RunError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| numeric("cli-runner", e.into()))?;
        fill(&mut w).map_err(|e| numeric("cli-runner", e.into()))?;
        w.flush().map_err(|e| numeric("cli-runner", e.into()))?;
    }
    Ok(Artifact::new(name, buf))
}

fn lib_csv(
    name: &str,
    module: &'static str,
    write: impl FnOnce(&mut Vec<u8>) -> crate::Result<usize>,
) -> Result<Artifact, RunError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| numeric(module, e))?;
    Ok(Artifact::new(name, buf))
}

#[derive(Serialize)]
struct KernelRow {
    x: Point,
    y: Point,
    t: f64,
    estimate: MCEstimate,
    exact: Option<f64>,
    modulus_rel_error: Option<f64>,
}

pub fn heatkernel(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let s = config::sampling(k)?;
    let method = k.str_or("heatkernel.method", "bridge")?;
    let times = k.f64s("heatkernel.t")?.ok_or_else(|| RunError::missing("heatkernel.t"))?;
    let source = k.point_or("heatkernel.source", Point::ORIGIN)?;
    let targets = k.points("heatkernel.targets")?.unwrap_or_else(|| vec![source]);
    let dump = k.usize_or("heatkernel.dump_paths", 0)?;
    let mut rows: Vec<(Point, f64, MCEstimate, &'static str)> = Vec::new();
    let mut summary = Vec::new();
    match method.as_str() {
        "bridge" => {
            let beta0 = constant_beta(&beta, "heatkernel.method")?;
            if !matches!(a, crate::fields::VectorField2D::Landau { .. }) {
                return Err(RunError::Config {
                    key: "gauge.kind".into(),
                    message: "bridge validation runs in the unshifted landau gauge".into(),
                });
            }
            for &t in &times {
                for &y in &targets {
                    let est = fki_kernel_estimate(source, y, t, beta0, &s).map_err(|e| numeric("fki-heatkernel", e))?;
                    let exact = mehler_kernel(source, y, t, beta0).map_err(|e| numeric("fki-heatkernel", e))?;
                    rows.push((y, t, est, "bridge-mc"));
                    rows.push((
                        y,
                        t,
                        MCEstimate { value: exact, stderr: 0.0, samples: 0, seed: s.seed, degenerate: false },
                        "mehler",
                    ));
                    summary.push(KernelRow {
                        x: source,
                        y,
                        t,
                        estimate: est,
                        exact: Some(exact.norm()),
                        modulus_rel_error: Some((est.value.norm() - exact.norm()).abs() / exact.norm()),
                    });
                }
            }
        }
        "fki" => {
            let psi = psi(k)?;
            for &t in &times {
                for &x in &targets {
                    let q = FkiQuery { x, t, a: a.clone(), domain, psi: psi.clone(), sampling: s.clone() };
                    let est = fki_apply(&q).map_err(|e| numeric("fki-heatkernel", e))?;
                    rows.push((x, t, est, "fki-mc"));
                    summary.push(KernelRow { x, y: x, t, estimate: est, exact: None, modulus_rel_error: None });
                }
            }
        }
        other => {
            return Err(RunError::Config { key: "heatkernel.method".into(), message: format!("unknown method {other:?}") })
        }
    }
    let mut out = vec![csv_rows("kernel.csv", &["x", "y", "t", "re", "im", "stderr", "method"], |w| {
        for (p, t, e, m) in &rows {
            w.write_record([
                p.x.to_string(),
                p.y.to_string(),
                t.to_string(),
                e.value.re.to_string(),
                e.value.im.to_string(),
                e.stderr.to_string(),
                m.to_string(),
            ])?;
        }
        Ok(())
    })?];
    out.push(Artifact::json("kernel.json", &summary)?);
    if dump > 0 {
        let bundle = match method.as_str() {
            "bridge" => sample_bridge(source, targets[0], times[0], s.steps, s.paths, s.seed),
            _ => sample_brownian(targets[0], times[0], s.steps, s.paths, s.seed, domain),
        }
        .map_err(|e| numeric("stochastic-paths", e))?;
        out.push(lib_csv("paths.csv", "stochastic-paths", |b| bundle.write_csv(dump, b).map(|d| d.rows))?);
    }
    Ok(out)
}

fn psi(k: &Keys) -> Result<Psi, RunError> {
    Ok(match k.str_or("heatkernel.psi.kind", "one")?.as_str() {
        "one" => Psi::One,
        "gaussian-density" => Psi::GaussianDensity {
            center: k.point_or("heatkernel.psi.center", Point::ORIGIN)?,
            sigma2: k.req_f64("heatkernel.psi.sigma2")?,
        },
        "radial-gaussian" => Psi::RadialGaussian {
            amplitude: k.f64_or("heatkernel.psi.amplitude", 1.0)?,
            alpha: k.req_f64("heatkernel.psi.alpha")?,
        },
        other => {
            return Err(RunError::Config { key: "heatkernel.psi.kind".into(), message: format!("unknown initial data {other:?}") })
        }
    })
}

#[derive(Serialize)]
struct LevySummary {
    paths: usize,
    mean_area: f64,
    var_area: f64,
    max_landau_residual: Option<f64>,
}

pub fn levy_area(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let s = config::sampling(k)?;
    let t = k.f64_or("levy.t", 1.0)?;
    let start = k.point_or("levy.start", Point::ORIGIN)?;
    let dump = k.usize_or("levy.dump_paths", 0)?;
    let bundle = match k.point("levy.end")? {
        Some(end) => sample_bridge(start, end, t, s.steps, s.paths, s.seed).map(|b| b.with_domain(domain)),
        None => sample_brownian(start, t, s.steps, s.paths, s.seed, domain),
    }
    .map_err(|e| numeric("stochastic-paths", e))?;
    let landau = match a {
        crate::fields::VectorField2D::Landau { beta0 } => Some(beta0),
        _ => None,
    };
    let rows = bundle.map(|p| {
        let area = path_levy_area(p);
        let li = path_line_integral(p, &a);
        let end = p.points[p.live_steps()];
        let ident = landau.map(|b| landau_ito_from_levy(b, p.start(), end, area));
        (area, li.ito, li.stratonovich, ident, p.survived())
    });
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let resid = landau.map(|_| rows.iter().map(|r| (r.3.unwrap() - r.1).abs()).fold(0.0, f64::max));
    let mut out = vec![csv_rows("levy.csv", &["path_id", "levy_area", "ito", "stratonovich", "landau_from_area", "survived"], |w| {
        for (i, r) in rows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.0.to_string(),
                r.1.to_string(),
                r.2.to_string(),
                r.3.map(|v| v.to_string()).unwrap_or_default(),
                r.4.to_string(),
            ])?;
        }
        Ok(())
    })?];
    out.push(Artifact::json(
        "levy.json",
        &LevySummary { paths: rows.len(), mean_area: mean, var_area: var, max_landau_residual: resid },
    )?);
    if dump > 0 {
        out.push(lib_csv("paths.csv", "stochastic-paths", |b| bundle.write_csv(dump, b).map(|d| d.rows))?);
    }
    Ok(out)
}

pub fn betabar(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let s = config::sampling(k)?;
    let n_gh = k.usize_or("quadrature.gh", DEFAULT_GH_ORDER)?;
    let n_s = k.usize_or("quadrature.gl", DEFAULT_GL_ORDER)?;
    let x = k.point_or("betabar.x", Point::ORIGIN)?;
    let points = k.points("betabar.points")?.ok_or_else(|| RunError::missing("betabar.points"))?;
    let times = k.f64s("betabar.t")?.ok_or_else(|| RunError::missing("betabar.t"))?;
    let bb = BetaBar::new(beta.clone(), x, n_gh, n_s).map_err(|e| numeric("agmon-metric", e))?;
    let mut rows = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            let gh = bb.eval_quadrature(p, t).map_err(|e| numeric("agmon-metric", e))?;
            let stream = s.seed.wrapping_add((i * times.len() + j) as u64);
            let mc = beta_bar_mc(&beta, x, p, t, s.paths, stream, n_s).map_err(|e| numeric("agmon-metric", e))?;
            let closed = match beta {
                ScalarField2D::Constant { beta0 } => Some(0.25 * beta0 * beta0 * ((x - p).norm_sq() + 2.0 * t)),
                _ => None,
            };
            rows.push((p, t, gh, mc.value.re, mc.stderr, closed));
        }
    }
    Ok(vec![csv_rows("betabar.csv", &["px", "py", "t", "gh", "mc", "mc_stderr", "closed_form"], |w| {
        for (p, t, gh, mc, se, closed) in &rows {
            w.write_record([
                p.x.to_string(),
                p.y.to_string(),
                t.to_string(),
                gh.to_string(),
                mc.to_string(),
                se.to_string(),
                closed.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(())
    })?])
}

fn polyline_csv(name: &str, p: &Polyline) -> Result<Artifact, RunError> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf).map_err(|e| numeric("domain-geometry", e))?;
    Ok(Artifact::new(name, buf))
}

#[derive(Serialize)]
struct AgmonOut<'a> {
    params: crate::agmon::AgmonParams,
    optimizer: crate::agmon::OptimizerSpec,
    x: Point,
    result: &'a crate::agmon::AgmonResult,
}

pub fn agmon_dist(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let spec = config::optimizer(k)?;
    if k.bool_or("agmon.suite", false)? {
        let beta0 = constant_beta(&beta, "agmon.suite")?;
        let a = k.f64_or("agmon.a", 1.0)?;
        let nu1 = k.f64_or("agmon.nu1", crate::agmon::NU1_DISC)?;
        let half = k.f64_or("agmon.half_width", 8.0)?;
        let n = k.usize_or("grid.nx", 161)?;
        let rep = constant_field_suite(beta0, a, nu1, half, n, &spec).map_err(|e| numeric("agmon-metric", e))?;
        let table = csv_rows(
            "threshold_table.csv",
            &["target_dist", "x", "y", "dist", "threshold", "straight", "optimized", "straight_ok", "optimized_ok", "t_f", "tau", "positivity_ok"],
            |w| {
                for r in &rep.rows {
                    w.write_record([
                        r.target_dist.to_string(),
                        r.x.x.to_string(),
                        r.x.y.to_string(),
                        r.dist.to_string(),
                        r.threshold.to_string(),
                        r.straight.to_string(),
                        r.optimized.to_string(),
                        r.straight_ok.to_string(),
                        r.optimized_ok.to_string(),
                        r.t_f.to_string(),
                        r.tau.to_string(),
                        r.positivity_ok.to_string(),
                    ])?;
                }
                Ok(())
            },
        )?;
        return Ok(vec![table, Artifact::json("suite.json", &rep)?]);
    }
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let grid = config::grid(k, &domain)?;
    let params = config::agmon_params(k, None)?;
    let xs = k.points("agmon.x")?.ok_or_else(|| RunError::missing("agmon.x"))?;
    let region = classically_allowed(&a, params.lambda, &grid, params.convention).map_err(|e| numeric("agmon-metric", e))?;
    let dom = (!matches!(domain.shape, crate::geometry::Shape::WholePlane)).then_some(&domain);
    let mut out = Vec::new();
    let mut results = Vec::new();
    for &x in &xs {
        results.push(agmon_distance(x, &region, &beta, &params, dom, &spec).map_err(|e| numeric("agmon-metric", e))?);
    }
    for (i, r) in results.iter().enumerate() {
        out.push(polyline_csv(&format!("polyline_{i}.csv"), &r.polyline)?);
    }
    let rows: Vec<AgmonOut> =
        xs.iter().zip(&results).map(|(&x, r)| AgmonOut { params, optimizer: spec, x, result: r }).collect();
    out.insert(0, Artifact::json("agmon.json", &rows)?);
    Ok(out)
}

pub fn eigs(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let grid = config::grid(k, &domain)?;
    let spec = config::eigen_spec(k)?;
    let vectors = k.usize_or("eigs.vectors", 1)?;
    let profile = k.bool_or("eigs.profile", false)?;
    let fujita = k.u64("eigs.fujita_n")?;
    let op = build_peierls(&grid, &a).map_err(|e| numeric("spectral", e))?;
    let res = lowest_eigenpairs(&op, &spec).map_err(|e| numeric("spectral", e))?;
    let mut out = vec![lib_csv("eigenvalues.csv", "spectral", |b| res.write_eigenvalues_csv(b))?];
    for i in 0..vectors.min(res.len()) {
        out.push(lib_csv(&format!("eigenvector_{i}.csv"), "spectral", |b| res.write_abs_csv(i, b))?);
    }
    out.push(Artifact::json("eigs.json", &res.summary())?);
    if profile {
        let p = ground_state_profile(&res).map_err(|e| numeric("spectral", e))?;
        out.push(lib_csv("profile.csv", "spectral", |b| p.write_csv(b))?);
        out.push(Artifact::json("profile.json", &p)?);
    }
    if let Some(n) = fujita {
        let rep = fujita_c2(n as usize).map_err(|e| numeric("bounds-verify", e))?;
        out.push(Artifact::json("fujita.json", &rep)?);
    }
    Ok(out)
}

pub fn verify_bound(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let grid = config::grid(k, &domain)?;
    let espec = config::eigen_spec(k)?;
    let ospec = config::optimizer(k)?;
    let index = k.usize_or("verify.index", 0)?;
    let angles = k.usize_or("verify.angles", 4)?;
    let radii = k.usize_or("verify.radii", 5)?;
    let center = k.point_or("verify.center", grid.bbox().center())?;
    let op = build_peierls(&grid, &a).map_err(|e| numeric("spectral", e))?;
    let res = lowest_eigenpairs(&op, &crate::spectral::EigenSpec { k: espec.k.max(index + 1), ..espec })
        .map_err(|e| numeric("spectral", e))?;
    let lambda = res.eigenvalues[index];
    let params = config::agmon_params(k, Some(lambda))?;
    let region = classically_allowed(&a, lambda, &grid, params.convention).map_err(|e| numeric("agmon-metric", e))?;
    let samples = match k.points("verify.points")? {
        Some(p) => p,
        None => default_samples(&region, grid.domain(), center, angles, radii),
    };
    let rep = verify_decay(&res, index, &a, &beta, &params, &samples, &ospec).map_err(|e| numeric("bounds-verify", e))?;
    Ok(vec![lib_csv("bound.csv", "bounds-verify", |b| rep.write_csv(b))?, Artifact::json("bound.json", &rep)?])
}

pub fn bounds(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let domain = config::domain(k)?;
    let grid = config::grid(k, &domain)?;
    let spec = config::optimizer(k)?;
    let kind = k.str("bounds.kind")?.ok_or_else(|| RunError::missing("bounds.kind"))?;
    match kind.as_str() {
        "confine" | "concave" => {
            let a = config::vector_potential(k, &beta)?;
            let params = config::agmon_params(k, None)?;
            let region =
                classically_allowed(&a, params.lambda, &grid, params.convention).map_err(|e| numeric("agmon-metric", e))?;
            let xs = k.points("bounds.x")?.ok_or_else(|| RunError::missing("bounds.x"))?;
            let mut reps = Vec::new();
            if kind == "confine" {
                let beta0 = k.req_f64("bounds.beta0")?;
                let radius = k.f64_or("bounds.compact_radius", 0.0)?;
                for &x in &xs {
                    reps.push(
                        confine_bound(x, beta0, &beta, radius, &grid, &region, &params, &spec)
                            .map_err(|e| numeric("agmon-metric", e))?,
                    );
                }
            } else {
                let inf_beta = k.req_f64("bounds.inf_beta")?;
                for &x in &xs {
                    reps.push(
                        concave_bound(x, &beta, inf_beta, &grid, &region, &params, &spec)
                            .map_err(|e| numeric("agmon-metric", e))?,
                    );
                }
            }
            let mut out = vec![Artifact::json("bounds.json", &reps)?];
            for (i, r) in reps.iter().enumerate() {
                out.push(polyline_csv(&format!("polyline_{i}.csv"), &r.path.polyline)?);
            }
            Ok(out)
        }
        "carmona" => {
            let params = config::agmon_params(k, None)?;
            let verts = k.points("bounds.path")?.ok_or_else(|| RunError::missing("bounds.path"))?;
            let gamma = Polyline::uniform(verts).map_err(|e| RunError::Config { key: "bounds.path".into(), message: e.to_string() })?;
            let horizons = k.f64s("bounds.horizon")?.ok_or_else(|| RunError::missing("bounds.horizon"))?;
            let reps = horizons
                .iter()
                .map(|&t| carmona_bound(&gamma, t, &beta, &params, &grid))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| numeric("agmon-metric", e))?;
            let table = csv_rows("carmona.csv", &["horizon", "first_term", "second_term", "bound"], |w| {
                for r in &reps {
                    w.write_record([
                        r.horizon.to_string(),
                        r.first_term.to_string(),
                        r.second_term.to_string(),
                        r.bound.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            Ok(vec![table, Artifact::json("carmona.json", &reps)?])
        }
        other => Err(RunError::Config { key: "bounds.kind".into(), message: format!("unknown bound {other:?}") }),
    }
}

pub fn kato_check(k: &Keys) -> Result<Vec<Artifact>, RunError> {
    let beta = config::scalar_field(k, "field")?;
    let a = config::vector_potential(k, &beta)?;
    let domain = config::domain(k)?;
    let grid = config::grid(k, &domain)?;
    let p = k.f64_or("kato.p", 2.0)?;
    let rep = kato_lp_check(&a, grid.domain(), p, &grid).map_err(|e| numeric("magnetic-fields", e))?;
    Ok(vec![Artifact::json("kato.json", &rep)?])
}
