//! Run configuration: flat `key = value` text with optional `[section]`
//! headers.
//!
//! ```text
//! # comment
//! [kernel]
//! dimension = 1
//! rho = 1.0
//! ell = constant        # constant | logpow | invloglog
//! tail = power_decay    # zero | power_decay | piecewise_power
//! alpha2 = 0.5
//!
//! [domain]
//! shape = interval      # interval | box | ball
//! a = -1
//! b = 1
//! h = 0.0625
//! ```
//!
//! A key may also be written fully qualified (`kernel.rho = 1.0`) outside
//! any section. Inside `[kernel]` the nested spellings `ell.variant`,
//! `ell.beta`, `ell.c`, `tail.variant`, `tail.alpha`, `tail.alpha1` and
//! `tail.alpha2` are accepted as well.

use std::collections::BTreeMap;

use crate::domain::{default_r_ext, Domain, Shape};
use crate::error::{Error, Result};
use crate::kernels::{EllSpec, EllVariant, KernelSpec, Tail};
use crate::solve::{PowerSource, SolverOptions};

const KNOWN: &[&str] = &[
    "kernel.dimension",
    "kernel.rho",
    "kernel.ell",
    "kernel.c",
    "kernel.beta",
    "kernel.tail",
    "kernel.alpha",
    "kernel.alpha1",
    "kernel.alpha2",
    "domain.shape",
    "domain.a",
    "domain.b",
    "domain.min",
    "domain.max",
    "domain.radius",
    "domain.h",
    "domain.r_ext",
    "solver.tolerance",
    "solver.max_iterations",
    "solver.exponent",
    "solver.scale",
    "verify.checks",
    "verify.seeds",
    "verify.seed",
    "verify.p",
    "output.dir",
];

const SECTIONS: &[&str] = &["kernel", "domain", "solver", "verify", "output"];

const ALIASES: &[(&str, &str)] = &[
    ("kernel.ell.variant", "kernel.ell"),
    ("kernel.ell.beta", "kernel.beta"),
    ("kernel.ell.c", "kernel.c"),
    ("kernel.tail.variant", "kernel.tail"),
    ("kernel.tail.alpha", "kernel.alpha"),
    ("kernel.tail.alpha1", "kernel.alpha1"),
    ("kernel.tail.alpha2", "kernel.alpha2"),
];

fn canonical_key(section: &str, k: &str) -> String {
    let head = k.split('.').next().unwrap_or("");
    let full = if section.is_empty() || SECTIONS.contains(&head) {
        k.to_string()
    } else {
        format!("{section}.{k}")
    };
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == full)
        .map(|(_, key)| key.to_string())
        .unwrap_or(full)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub checks: Vec<String>,
    pub seeds: usize,
    pub seed: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub shape: Shape,
    pub h: f64,
    pub r_ext: f64,
    pub solver: SolverOptions,
    pub source: PowerSource,
    pub verify: VerifySettings,
    pub output_dir: String,
}

struct Entry {
    value: String,
    line: usize,
}

struct Table(BTreeMap<String, Entry>);

impl Table {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).map(|e| e.value.as_str()).unwrap_or(default)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => parse_f64(&e.value, e.line, key),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            None => Err(Error::Config {
                line: 0,
                message: format!("missing required key '{key}'"),
            }),
            Some(e) => parse_f64(&e.value, e.line, key),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| Error::Config {
                line: e.line,
                message: format!("'{key}' must be a nonnegative integer, got '{}'", e.value),
            }),
        }
    }

    fn pair(&self, key: &str) -> Result<[f64; 2]> {
        let e = self.get(key).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key '{key}'"),
        })?;
        let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Config {
                line: e.line,
                message: format!("'{key}' must be two comma-separated numbers"),
            });
        }
        Ok([parse_f64(parts[0], e.line, key)?, parse_f64(parts[1], e.line, key)?])
    }

    fn line(&self, key: &str) -> usize {
        self.get(key).map(|e| e.line).unwrap_or(0)
    }
}

fn parse_f64(s: &str, line: usize, key: &str) -> Result<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Config {
        line,
        message: format!("'{key}' must be a finite number, got '{s}'"),
    })
}

fn tokenize(text: &str) -> Result<Table> {
    let mut section = String::new();
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                line,
                message: format!("unterminated section header '{body}'"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected 'key = value', got '{body}'"),
        })?;
        let key = canonical_key(&section, k.trim());
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::Config {
                line,
                message: format!("unknown key '{key}'"),
            });
        }
        let value = v.trim().trim_matches('"').to_string();
        if map.insert(key.clone(), Entry { value, line }).is_some() {
            return Err(Error::Config {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(Table(map))
}

fn kernel_from(t: &Table) -> Result<KernelSpec> {
    let dim = t.usize_or("kernel.dimension", 1)?;
    let rho = t.f64_or("kernel.rho", 1.0)?;
    let at = |key: &str, e: Error| match e {
        Error::Config { .. } => e,
        other => Error::Config {
            line: t.line(key),
            message: other.to_string(),
        },
    };
    let variant = match t.str_or("kernel.ell", "constant") {
        "constant" => EllVariant::Constant(t.f64_or("kernel.c", 1.0)?),
        "logpow" => EllVariant::LogPow(t.f64_or("kernel.beta", 1.0)?),
        "invloglog" => EllVariant::InvLogLog,
        other => {
            return Err(Error::Config {
                line: t.line("kernel.ell"),
                message: format!("unknown profile '{other}' (constant, logpow, invloglog)"),
            })
        }
    };
    let tail = match t.str_or("kernel.tail", "zero") {
        "zero" => Tail::Zero,
        "power_decay" => Tail::PowerDecay {
            alpha2: t.f64_req("kernel.alpha2")?,
        },
        "piecewise_power" => Tail::PiecewisePower {
            alpha1: t.f64_req("kernel.alpha1")?,
            alpha2: t.f64_req("kernel.alpha2")?,
        },
        "pure_power" => {
            let a = t.f64_req("kernel.alpha")?;
            Tail::PiecewisePower { alpha1: a, alpha2: a }
        }
        other => {
            return Err(Error::Config {
                line: t.line("kernel.tail"),
                message: format!("unknown tail '{other}' (zero, power_decay, piecewise_power, pure_power)"),
            })
        }
    };
    let ell_key = ["kernel.beta", "kernel.c", "kernel.ell"]
        .into_iter()
        .find(|k| t.get(k).is_some())
        .unwrap_or("kernel.rho");
    if !(rho > 0.0) {
        return Err(Error::Config {
            line: t.line("kernel.rho"),
            message: format!("singular range rho must be positive, got {rho}"),
        });
    }
    let ell = EllSpec::new(variant, rho).map_err(|e| at(ell_key, e))?;
    KernelSpec::new(dim, ell, tail).map_err(|e| at("kernel.tail", e))
}

fn shape_from(t: &Table, dim: usize) -> Result<Shape> {
    let shape = match t.str_or("domain.shape", "interval") {
        "interval" => Shape::Interval {
            a: t.f64_or("domain.a", -1.0)?,
            b: t.f64_or("domain.b", 1.0)?,
        },
        "box" => Shape::Box {
            min: t.pair("domain.min")?,
            max: t.pair("domain.max")?,
        },
        "ball" => Shape::Ball {
            dimension: dim,
            radius: t.f64_or("domain.radius", 1.0)?,
        },
        other => {
            return Err(Error::Config {
                line: t.line("domain.shape"),
                message: format!("unknown shape '{other}' (interval, box, ball)"),
            })
        }
    };
    if shape.dimension() != dim {
        return Err(Error::Config {
            line: t.line("domain.shape"),
            message: format!("shape is {}-dimensional, kernel is {dim}-dimensional", shape.dimension()),
        });
    }
    Ok(shape)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let t = tokenize(text)?;
        let kernel = kernel_from(&t)?;
        let shape = shape_from(&t, kernel.dimension)?;
        let h = t.f64_or("domain.h", 1.0 / 16.0)?;
        if !(h > 0.0) {
            return Err(Error::Config {
                line: t.line("domain.h"),
                message: "cell size must be positive".into(),
            });
        }
        let r_ext = t.f64_or("domain.r_ext", default_r_ext(kernel.rho(), h, kernel.dimension))?;
        let solver = SolverOptions {
            tolerance: t.f64_or("solver.tolerance", 1e-10)?,
            max_iterations: t.usize_or("solver.max_iterations", 20_000)?,
        };
        if !(solver.tolerance > 0.0) {
            return Err(Error::Config {
                line: t.line("solver.tolerance"),
                message: "tolerance must be positive".into(),
            });
        }
        let source = PowerSource {
            exponent: t.f64_or("solver.exponent", 0.5)?,
            scale: t.f64_or("solver.scale", 1.0)?,
        };
        let checks = t
            .str_or("verify.checks", "")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let seed = match t.get("verify.seed") {
            None => 42,
            Some(e) => e.value.parse().map_err(|_| Error::Config {
                line: e.line,
                message: format!("'verify.seed' must be an unsigned integer, got '{}'", e.value),
            })?,
        };
        let verify = VerifySettings {
            checks,
            seeds: t.usize_or("verify.seeds", 20)?,
            seed,
            p: t.f64_or("verify.p", 2.0)?,
        };
        Ok(Self {
            kernel,
            shape,
            h,
            r_ext,
            solver,
            source,
            verify,
            output_dir: t.str_or("output.dir", ".").to_string(),
        })
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::build(self.shape.clone(), self.h, self.r_ext)
    }

    /// Same configuration at another cell size, shell width rescaled to the
    /// default for that size unless it was set explicitly larger.
    pub fn with_h(&self, h: f64) -> Self {
        let mut c = self.clone();
        c.h = h;
        c.r_ext = self.r_ext.max(default_r_ext(self.kernel.rho(), h, self.kernel.dimension));
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_dotted_keys() {
        let c = RunConfig::parse(
            "# demo\n[kernel]\nrho = 0.5\ntail = power_decay\nalpha2 = 0.25\n\ndomain.h = 0.125\n[verify]\nchecks = poincare, hardy_origin\n",
        )
        .unwrap();
        assert_eq!(c.kernel.rho(), 0.5);
        assert_eq!(c.kernel.tail, Tail::PowerDecay { alpha2: 0.25 });
        assert_eq!(c.h, 0.125);
        assert_eq!(c.verify.checks, vec!["poincare", "hardy_origin"]);
        assert_eq!(c.verify.seed, 42);
        assert_eq!(c.shape, Shape::Interval { a: -1.0, b: 1.0 });
    }

    #[test]
    fn nested_kernel_keys() {
        let c = RunConfig::parse("[kernel]
ell.variant = logpow
ell.beta = 2
tail.variant = piecewise_power
tail.alpha1 = 0.3
tail.alpha2 = 0.7
").unwrap();
        assert_eq!(c.kernel.ell.variant, EllVariant::LogPow(2.0));
        assert_eq!(c.kernel.tail, Tail::PiecewisePower { alpha1: 0.3, alpha2: 0.7 });
        let e = RunConfig::parse("[kernel]
beta = 1
ell.beta = 2
").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RunConfig::parse("[kernel]\nrho = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(
            e,
            Error::Config {
                line: 3,
                message: "unknown key 'kernel.bogus'".into()
            }
        );
        let e = RunConfig::parse("[domain]\nh = abc\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = RunConfig::parse("kernel.rho 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
        let e = RunConfig::parse("[kernel]\nrho = -1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e:?}");
    }

    #[test]
    fn two_dimensional_box() {
        let c = RunConfig::parse("kernel.dimension = 2\ndomain.shape = box\ndomain.min = -1, -0.5\ndomain.max = 1, 0.5\n").unwrap();
        assert_eq!(
            c.shape,
            Shape::Box {
                min: [-1.0, -0.5],
                max: [1.0, 0.5]
            }
        );
        assert!(RunConfig::parse("domain.shape = box\ndomain.min = 0,0\ndomain.max = 1,1\n").is_err());
    }
}
