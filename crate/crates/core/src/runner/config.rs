//! Flat dotted-key view of a TOML run configuration.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use toml::Value;

use super::RunError;
use crate::agmon::{AgmonParams, OptimizerSpec, RegionConvention, NU1_DISC};
use crate::fields::{transversal_gauge, GaugeFunction, GridSamples, ScalarField2D, VectorField2D};
use crate::geometry::{Boundary, Domain, Grid2D, Point, Rect};
use crate::heatkernel::Sampling;
use crate::spectral::EigenSpec;

/// Keys of a parsed config. Every lookup marks the key as used; keys never
/// looked up are rejected by [`Keys::finish`].
#[derive(Debug)]
pub struct Keys {
    map: BTreeMap<String, Value>,
    used: RefCell<BTreeSet<String>>,
    base_dir: PathBuf,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn bad(key: &str, msg: impl Into<String>) -> RunError {
    RunError::Config { key: key.to_string(), message: msg.into() }
}

impl Keys {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e.message().to_string();
            RunError::Config { key: "<document>".into(), message: key }
        })?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        Ok(Keys { map, used: RefCell::new(BTreeSet::new()), base_dir: base_dir.to_path_buf() })
    }

    pub fn set(&mut self, key: &str, v: Value) {
        self.map.insert(key.to_string(), v);
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn finish(&self) -> Result<(), RunError> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(bad(k, "unknown key")),
            None => Ok(()),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(bad(key, format!("expected a number, found {}", v.type_str()))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, RunError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, RunError> {
        self.f64(key)?.ok_or_else(|| bad(key, "missing required key"))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(bad(key, format!("expected a nonnegative integer, found {v}"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, RunError> {
        Ok(self.u64(key)?.map(|v| v as usize).unwrap_or(default))
    }

    pub fn req_u64(&self, key: &str) -> Result<u64, RunError> {
        self.u64(key)?.ok_or_else(|| bad(key, "missing required key"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(bad(key, format!("expected a boolean, found {}", v.type_str()))),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<String>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(bad(key, format!("expected a string, found {}", v.type_str()))),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, RunError> {
        Ok(self.str(key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn path(&self, key: &str) -> Result<Option<PathBuf>, RunError> {
        Ok(self.str(key)?.map(|s| self.base_dir.join(s)))
    }

    fn numbers(key: &str, v: &Value) -> Result<Vec<f64>, RunError> {
        let Value::Array(items) = v else {
            return Err(bad(key, format!("expected an array of numbers, found {}", v.type_str())));
        };
        items
            .iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(bad(key, format!("expected a number, found {}", other.type_str()))),
            })
            .collect()
    }

    /// A number or an array of numbers.
    pub fn f64s(&self, key: &str) -> Result<Option<Vec<f64>>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(vec![*f])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(v) => Self::numbers(key, v).map(Some),
        }
    }

    pub fn point(&self, key: &str) -> Result<Option<Point>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let xs = Self::numbers(key, v)?;
                if xs.len() != 2 {
                    return Err(bad(key, format!("expected [x, y], found {} numbers", xs.len())));
                }
                Ok(Some(Point::new(xs[0], xs[1])))
            }
        }
    }

    pub fn point_or(&self, key: &str, default: Point) -> Result<Point, RunError> {
        Ok(self.point(key)?.unwrap_or(default))
    }

    /// A single `[x, y]` or an array of them.
    pub fn points(&self, key: &str) -> Result<Option<Vec<Point>>, RunError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let Value::Array(items) = v else {
            return Err(bad(key, format!("expected points, found {}", v.type_str())));
        };
        if items.iter().all(|x| !matches!(x, Value::Array(_))) {
            let xs = Self::numbers(key, v)?;
            if xs.len() != 2 {
                return Err(bad(key, "expected [x, y] or [[x, y], ...]"));
            }
            return Ok(Some(vec![Point::new(xs[0], xs[1])]));
        }
        items
            .iter()
            .map(|item| {
                let xs = Self::numbers(key, item)?;
                if xs.len() != 2 {
                    return Err(bad(key, "every point must be [x, y]"));
                }
                Ok(Point::new(xs[0], xs[1]))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

fn positive(key: &str, v: f64) -> Result<f64, RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be positive and finite (got {v})")))
    }
}

pub fn scalar_field(k: &Keys, prefix: &str) -> Result<ScalarField2D, RunError> {
    let key = |s: &str| format!("{prefix}.{s}");
    let kind = k.str(&key("kind"))?.ok_or_else(|| bad(&key("kind"), "missing required key"))?;
    let lib = |r: crate::Result<ScalarField2D>, at: &str| r.map_err(|e| bad(&key(at), e.to_string()));
    Ok(match kind.as_str() {
        "constant" => ScalarField2D::constant(k.req_f64(&key("beta0"))?),
        "zero" => ScalarField2D::zero(),
        "radial-quadratic" => ScalarField2D::radial_quadratic(k.req_f64(&key("beta0"))?),
        "concave" => lib(ScalarField2D::concave(k.req_f64(&key("peak"))?, k.req_f64(&key("kappa"))?), "kappa")?,
        "gaussian-bump" => lib(
            ScalarField2D::gaussian_bump(
                k.req_f64(&key("amplitude"))?,
                k.point_or(&key("center"), Point::ORIGIN)?,
                k.req_f64(&key("width"))?,
            ),
            "width",
        )?,
        "split" => ScalarField2D::split(scalar_field(k, &key("w"))?, scalar_field(k, &key("u"))?),
        "grid" => {
            let path = k.path(&key("file"))?.ok_or_else(|| bad(&key("file"), "missing required key"))?;
            ScalarField2D::Grid(read_grid(&path, &key("file"))?)
        }
        other => return Err(bad(&key("kind"), format!("unknown field kind {other:?}"))),
    })
}

fn read_grid(path: &Path, key: &str) -> Result<GridSamples, RunError> {
    let f = std::fs::File::open(path).map_err(|e| bad(key, format!("{}: {e}", path.display())))?;
    GridSamples::read_csv(f).map_err(|e| bad(key, e.to_string()))
}

fn gauge_shift(k: &Keys) -> Result<Option<GaugeFunction>, RunError> {
    let kind = k.str_or("gauge.shift.kind", "none")?;
    Ok(match kind.as_str() {
        "none" => None,
        "quadratic" => Some(GaugeFunction::Quadratic {
            a: k.f64_or("gauge.shift.a", 0.0)?,
            b: k.f64_or("gauge.shift.b", 0.0)?,
            c: k.f64_or("gauge.shift.c", 0.0)?,
            d: k.f64_or("gauge.shift.d", 0.0)?,
            e: k.f64_or("gauge.shift.e", 0.0)?,
        }),
        "trig" => Some(GaugeFunction::Trig {
            amp: k.req_f64("gauge.shift.amp")?,
            kx: k.req_f64("gauge.shift.kx")?,
            ky: k.req_f64("gauge.shift.ky")?,
        }),
        other => return Err(bad("gauge.shift.kind", format!("unknown gauge shift {other:?}"))),
    })
}

pub fn vector_potential(k: &Keys, beta: &ScalarField2D) -> Result<VectorField2D, RunError> {
    let default = if matches!(beta, ScalarField2D::Constant { .. }) { "landau" } else { "transversal" };
    let kind = k.str_or("gauge.kind", default)?;
    let base = match kind.as_str() {
        "landau" => match beta {
            ScalarField2D::Constant { beta0 } => VectorField2D::landau(*beta0),
            _ => return Err(bad("gauge.kind", "the landau gauge needs field.kind = \"constant\"")),
        },
        "transversal" => transversal_gauge(beta, k.usize_or("gauge.quad", 32)?)
            .map_err(|e| bad("gauge.quad", e.to_string()))?,
        "zero" => VectorField2D::Zero,
        "grid" => {
            let fx = k.path("gauge.ax_file")?.ok_or_else(|| bad("gauge.ax_file", "missing required key"))?;
            let fy = k.path("gauge.ay_file")?.ok_or_else(|| bad("gauge.ay_file", "missing required key"))?;
            VectorField2D::Grid { ax: read_grid(&fx, "gauge.ax_file")?, ay: read_grid(&fy, "gauge.ay_file")? }
        }
        other => return Err(bad("gauge.kind", format!("unknown gauge {other:?}"))),
    };
    Ok(match gauge_shift(k)? {
        Some(phi) => base.gauge_shifted(phi),
        None => base,
    })
}

pub fn domain(k: &Keys) -> Result<Domain, RunError> {
    let kind = k.str_or("domain.kind", "plane")?;
    let d = match kind.as_str() {
        "plane" => Domain::whole_plane(),
        "rectangle" => {
            let b = k.f64s("domain.bounds")?.ok_or_else(|| bad("domain.bounds", "missing required key"))?;
            if b.len() != 4 {
                return Err(bad("domain.bounds", "expected [xmin, xmax, ymin, ymax]"));
            }
            Domain::rectangle(b[0], b[1], b[2], b[3]).map_err(|e| bad("domain.bounds", e.to_string()))?
        }
        "disc" => Domain::disc(k.point_or("domain.center", Point::ORIGIN)?, k.req_f64("domain.radius")?)
            .map_err(|e| bad("domain.radius", e.to_string()))?,
        other => return Err(bad("domain.kind", format!("unknown domain {other:?}"))),
    };
    Ok(match k.str("domain.boundary")?.as_deref() {
        None => d,
        Some("dirichlet") => d.with_boundary(Boundary::Dirichlet),
        Some("free") => d.with_boundary(Boundary::Free),
        Some(other) => return Err(bad("domain.boundary", format!("unknown boundary {other:?}"))),
    })
}

/// Grid over the domain, or over `grid.bounds` when the domain is unbounded.
pub fn grid(k: &Keys, domain: &Domain) -> Result<Grid2D, RunError> {
    let nx = k.usize_or("grid.nx", 64)?;
    let ny = k.usize_or("grid.ny", nx)?;
    match k.f64s("grid.bounds")? {
        Some(b) => {
            if b.len() != 4 {
                return Err(bad("grid.bounds", "expected [xmin, xmax, ymin, ymax]"));
            }
            let r = Rect::new(b[0], b[1], b[2], b[3]).map_err(|e| bad("grid.bounds", e.to_string()))?;
            Grid2D::over_box(r, nx, ny).map_err(|e| bad("grid.nx", e.to_string()))
        }
        None => Grid2D::new(*domain, nx, ny).map_err(|_| bad("grid.bounds", "required when the domain is unbounded")),
    }
}

pub fn sampling(k: &Keys) -> Result<Sampling, RunError> {
    Ok(Sampling {
        steps: k.usize_or("sampling.steps", 1000)?,
        paths: k.usize_or("sampling.paths", 10_000)?,
        seed: k.req_u64("sampling.seed")?,
    })
}

pub fn agmon_params(k: &Keys, lambda: Option<f64>) -> Result<AgmonParams, RunError> {
    let lambda = match lambda {
        Some(l) => l,
        None => k.req_f64("agmon.lambda")?,
    };
    let a = positive("agmon.a", k.f64_or("agmon.a", 1.0)?)?;
    let nu1 = k.f64_or("agmon.nu1", NU1_DISC)?;
    let convention = match k.str_or("agmon.convention", "half-squared")?.as_str() {
        "half-squared" => RegionConvention::HalfSquared,
        "half-norm" => RegionConvention::HalfNorm,
        other => return Err(bad("agmon.convention", format!("unknown convention {other:?}"))),
    };
    AgmonParams::with_nu1(lambda, a, nu1)
        .map(|p| p.with_convention(convention))
        .map_err(|e| bad("agmon.lambda", e.to_string()))
}

pub fn optimizer(k: &Keys) -> Result<OptimizerSpec, RunError> {
    let d = OptimizerSpec::default();
    Ok(OptimizerSpec {
        segments: k.usize_or("optimizer.segments", d.segments)?,
        restarts: k.usize_or("optimizer.restarts", d.restarts)?,
        jitter: k.f64_or("optimizer.jitter", d.jitter)?,
        max_iter: k.usize_or("optimizer.max_iter", d.max_iter)?,
        reparam_every: k.usize_or("optimizer.reparam_every", d.reparam_every)?,
        tol: k.f64_or("optimizer.tol", d.tol)?,
        seed: k.u64("optimizer.seed")?.unwrap_or(d.seed),
    })
}

pub fn eigen_spec(k: &Keys) -> Result<EigenSpec, RunError> {
    let d = EigenSpec::default();
    Ok(EigenSpec {
        k: k.usize_or("eigs.k", d.k)?,
        guard: k.usize_or("eigs.guard", d.guard)?,
        tol: k.f64_or("eigs.tol", d.tol)?,
        max_iter: k.usize_or("eigs.max_iter", d.max_iter)?,
        seed: k.u64("eigs.seed")?.unwrap_or(d.seed),
    })
}
