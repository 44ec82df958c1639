//! Scenario configuration: a flat `key = value` format with `#` comments and
//! dotted section prefixes, plus the bundled scenario suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{make_profile, Field, Grid, ProfileKind, ProfileSpec};
use crate::functionals::{DiagnosticMode, PhysicalParams};
use crate::nonlinearity::Nonlinearity;
use crate::scale_factor::ScaleFactor;

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "name",
    "mode",
    "scale.family",
    "scale.sigma",
    "scale.H",
    "scale.a0",
    "scale.table_path",
    "phys.m",
    "phys.c",
    "nonlin.family",
    "nonlin.p",
    "nonlin.lambda",
    "nonlin.sign",
    "nonlin.eps",
    "grid.n",
    "grid.N",
    "grid.half_width",
    "data0.kind",
    "data0.amplitude",
    "data0.width",
    "data0.center",
    "data0.mode",
    "data0.phase",
    "data1.kind",
    "data1.amplitude",
    "data1.width",
    "data1.center",
    "data1.mode",
    "data1.phase",
    "run.t0",
    "run.t_end",
    "run.dt",
    "run.record_every",
    "run.blowup_threshold",
    "run.dt_min",
    "run.cfl",
    "run.diagnostic_mode",
    "run.seed",
    "oracle.kappa",
    "oracle.A",
    "oracle.B",
    "oracle.T",
    "oracle.y0",
    "oracle.y1",
    "oracle.t0",
    "oracle.random_count",
    "oracle.seed",
];

const REQUIRED_KEYS: &[&str] = &[
    "scale.family",
    "nonlin.family",
    "nonlin.p",
    "grid.N",
    "grid.half_width",
    "data0.kind",
    "data0.amplitude",
];

const BUNDLED: &[(&str, &str)] = &[
    ("minkowski-m0-u2-A3", include_str!("../scenarios/minkowski-m0-u2-A3.cfg")),
    ("desitter-thm2-A6", include_str!("../scenarios/desitter-thm2-A6.cfg")),
    ("minkowski-m1-gauss", include_str!("../scenarios/minkowski-m1-gauss.cfg")),
    ("desitter-thm1-gauss", include_str!("../scenarios/desitter-thm1-gauss.cfg")),
    ("powerlaw-thm2-t0shift", include_str!("../scenarios/powerlaw-thm2-t0shift.cfg")),
    ("small-data-A0.1", include_str!("../scenarios/small-data-A0.1.cfg")),
    ("bigrip", include_str!("../scenarios/bigrip.cfg")),
    ("linear-desitter", include_str!("../scenarios/linear-desitter.cfg")),
    ("linear-minkowski", include_str!("../scenarios/linear-minkowski.cfg")),
    ("oracle-concavity-worked", include_str!("../scenarios/oracle-concavity-worked.cfg")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Simulate,
    Oracle,
    Sweep,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "check" => Some(Mode::Check),
            "simulate" => Some(Mode::Simulate),
            "oracle" => Some(Mode::Oracle),
            "sweep" => Some(Mode::Sweep),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Check => "check",
            Mode::Simulate => "simulate",
            Mode::Oracle => "oracle",
            Mode::Sweep => "sweep",
        }
    }
}

/// Requested diagnostic mode; `Auto` follows the hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeRequest {
    Auto,
    Fixed(DiagnosticMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Blow-up is declared once `‖u‖²` exceeds this multiple of `‖u₀‖²`.
    pub blowup_threshold: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub diagnostic_mode: ModeRequest,
    pub seed: u64,
}

/// Optional explicit concavity problem for the `oracle` mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleSpec {
    pub kappa: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub t_end: Option<f64>,
    pub y0: Option<f64>,
    pub y1: Option<f64>,
    pub t0: Option<f64>,
    pub random_count: usize,
    pub seed: u64,
}

impl OracleSpec {
    pub fn is_explicit(&self) -> bool {
        self.kappa.is_some() || self.a.is_some()
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub scale_factor: ScaleFactor,
    pub params: PhysicalParams,
    pub nonlinearity: Nonlinearity,
    pub grid: Grid,
    pub data0: ProfileSpec,
    pub data1: ProfileSpec,
    pub run: RunSpec,
    pub oracle: OracleSpec,
    entries: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

/// Parses a configuration file.
pub fn parse_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut scenario = parse_str(&text, path.parent().map(Path::to_path_buf))?;
    if !scenario.entries.contains_key("name") {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            scenario.name = stem.to_string();
        }
    }
    Ok(scenario)
}

/// Parses configuration text; relative table paths resolve against `base_dir`.
pub fn parse_str(text: &str, base_dir: Option<PathBuf>) -> Result<Scenario> {
    let mut entries = BTreeMap::new();
    let mut lines = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::UnknownKey { line: line_no, key: key.to_string() });
        }
        if value.is_empty() {
            return Err(Error::parse(line_no, format!("empty value for `{key}`")));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
        }
        lines.insert(key.to_string(), line_no);
    }
    Scenario::build(entries, &lines, base_dir)
}

/// Names of the bundled scenarios.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let src = bundled_source(name)
        .ok_or_else(|| Error::parse(None, format!("no bundled scenario named `{name}`")))?;
    let mut s = parse_str(src, None)?;
    s.name = name.to_string();
    Ok(s)
}

/// Loads a config path, falling back to a bundled scenario name.
pub fn load(name_or_path: &str) -> Result<Scenario> {
    let path = Path::new(name_or_path);
    if path.exists() {
        parse_config(path)
    } else if bundled_source(name_or_path).is_some() {
        bundled(name_or_path)
    } else {
        Err(Error::parse(
            None,
            format!("`{name_or_path}` is neither a file nor a bundled scenario"),
        ))
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, String>,
    lines: &'a BTreeMap<String, usize>,
}

impl Reader<'_> {
    fn line(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(self.line(key), format!("`{key}`: expected a number, got `{v}`")))
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::parse(None, format!("missing required key `{key}`")))
    }

    fn uint_opt(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| {
                    Error::parse(self.line(key), format!("`{key}`: expected an integer, got `{v}`"))
                })?;
                if x < 0.0 || x.fract() != 0.0 || x > 9.0e15 {
                    return Err(Error::parse(
                        self.line(key),
                        format!("`{key}`: expected a non-negative integer, got `{v}`"),
                    ));
                }
                Ok(x as u64)
            })
            .transpose()
    }

    fn int_or(&self, key: &str, default: i64) -> Result<i64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => {
                let x: f64 = v.parse().map_err(|_| {
                    Error::parse(self.line(key), format!("`{key}`: expected an integer, got `{v}`"))
                })?;
                if x.fract() != 0.0 {
                    return Err(Error::parse(self.line(key), format!("`{key}`: expected an integer")));
                }
                Ok(x as i64)
            }
        }
    }

    fn str_req(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::parse(None, format!("missing required key `{key}`")))
    }
}

fn invariant(module: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse { .. } | Error::UnknownKey { .. } | Error::InvariantViolation { .. } => e,
        other => Error::InvariantViolation { module, msg: other.to_string() },
    }
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let mut parts = s.split(',').map(str::trim);
    let re: f64 = parts.next()?.parse().ok()?;
    let im: f64 = match parts.next() {
        Some(v) => v.parse().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return None;
    }
    Some(Complex64::new(re, im))
}

fn read_profile(r: &Reader, prefix: &str, required: bool) -> Result<ProfileSpec> {
    let key = |k: &str| format!("{prefix}.{k}");
    let kind = match r.raw(&key("kind")) {
        Some(k) => ProfileKind::parse(k)
            .ok_or_else(|| Error::parse(r.line(&key("kind")), format!("unknown profile kind `{k}`")))?,
        None if required => return Err(Error::parse(None, format!("missing required key `{}`", key("kind")))),
        None => ProfileKind::Homogeneous,
    };
    let amplitude = if required { r.f64_req(&key("amplitude"))? } else { r.f64_or(&key("amplitude"), 0.0)? };
    let center = match r.raw(&key("center")) {
        None => vec![0.0],
        Some(v) => v
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(r.line(&key("center")), format!("bad center `{v}`")))?,
    };
    Ok(ProfileSpec {
        kind,
        amplitude,
        width: r.f64_or(&key("width"), 1.0)?,
        center,
        mode: r.int_or(&key("mode"), 1)?,
        phase: r.f64_or(&key("phase"), 0.0)?,
    })
}

impl Scenario {
    fn build(
        entries: BTreeMap<String, String>,
        lines: &BTreeMap<String, usize>,
        base_dir: Option<PathBuf>,
    ) -> Result<Self> {
        for key in REQUIRED_KEYS {
            if !entries.contains_key(*key) {
                return Err(Error::parse(None, format!("missing required key `{key}`")));
            }
        }
        let r = Reader { entries: &entries, lines };

        let mode = match r.raw("mode") {
            None => Mode::Simulate,
            Some(m) => Mode::parse(m).ok_or_else(|| Error::parse(r.line("mode"), format!("unknown mode `{m}`")))?,
        };

        let n_u = r.uint_opt("grid.n")?.unwrap_or(1);
        let n = n_u as usize;
        let n_points = r.uint_opt("grid.N")?.unwrap_or(0) as usize;
        let grid = Grid::new(n, n_points, r.f64_req("grid.half_width")?).map_err(invariant("field"))?;

        let scale_factor = match r.str_req("scale.family")? {
            "powerlaw" => {
                let sigma = r.f64_or("scale.sigma", 0.0)?;
                let hubble = r.f64_or("scale.H", 0.0)?;
                let a0 = r.f64_or("scale.a0", 1.0)?;
                if sigma == -1.0 {
                    ScaleFactor::de_sitter(hubble, a0, n)
                } else {
                    ScaleFactor::power_law(sigma, hubble, a0, n)
                }
            }
            "desitter" => ScaleFactor::de_sitter(r.f64_or("scale.H", 0.0)?, r.f64_or("scale.a0", 1.0)?, n),
            "tabulated" => {
                let rel = PathBuf::from(r.str_req("scale.table_path")?);
                let path = match (&base_dir, rel.is_relative()) {
                    (Some(dir), true) => dir.join(rel),
                    _ => rel,
                };
                ScaleFactor::from_table_file(&path, n)
            }
            other => {
                return Err(Error::parse(
                    r.line("scale.family"),
                    format!("unknown scale family `{other}`"),
                ))
            }
        }
        .map_err(invariant("scale_factor"))?;

        let p = r.f64_req("nonlin.p")?;
        let eps = r.f64_or("nonlin.eps", p - 1.0)?;
        let nonlinearity = match r.str_req("nonlin.family")? {
            "gauge" => {
                let lambda_raw = r.raw("nonlin.lambda").unwrap_or("1");
                let lambda = parse_complex(lambda_raw).ok_or_else(|| {
                    Error::parse(r.line("nonlin.lambda"), format!("bad lambda `{lambda_raw}`"))
                })?;
                Nonlinearity::gauge_invariant(p, lambda, eps)
            }
            "realabs" => Nonlinearity::real_abs(p, r.f64_or("nonlin.sign", 1.0)?, eps),
            other => {
                return Err(Error::parse(
                    r.line("nonlin.family"),
                    format!("unknown nonlinearity family `{other}`"),
                ))
            }
        }
        .map_err(invariant("nonlinearity"))?;

        let params = PhysicalParams::new(r.f64_or("phys.m", 0.0)?, r.f64_or("phys.c", 1.0)?, eps, n)
            .map_err(invariant("functionals"))?;

        let data0 = read_profile(&r, "data0", true)?;
        let data1 = read_profile(&r, "data1", false)?;
        make_profile(&grid, &data0).map_err(invariant("field"))?;
        make_profile(&grid, &data1).map_err(invariant("field"))?;

        let diagnostic_mode = match r.raw("run.diagnostic_mode").unwrap_or("auto") {
            "auto" => ModeRequest::Auto,
            "thm1" => ModeRequest::Fixed(DiagnosticMode::TheoremOne),
            "thm2" => ModeRequest::Fixed(DiagnosticMode::TheoremTwo),
            "unanchored" => ModeRequest::Fixed(DiagnosticMode::Unanchored),
            other => {
                return Err(Error::parse(
                    r.line("run.diagnostic_mode"),
                    format!("unknown diagnostic mode `{other}`"),
                ))
            }
        };
        let run = RunSpec {
            t0: r.f64_or("run.t0", 0.0)?,
            t_end: r.f64_or("run.t_end", 10.0)?,
            dt: r.f64_or("run.dt", 1e-3)?,
            record_every: r.uint_opt("run.record_every")?.unwrap_or(10) as usize,
            blowup_threshold: r.f64_or("run.blowup_threshold", 1e12)?,
            dt_min: r.f64_or("run.dt_min", 1e-12)?,
            cfl: r.f64_or("run.cfl", 0.4)?,
            diagnostic_mode,
            seed: r.uint_opt("run.seed")?.unwrap_or(0),
        };
        validate_run(&run, &scale_factor)?;

        let oracle = OracleSpec {
            kappa: r.f64_opt("oracle.kappa")?,
            a: r.f64_opt("oracle.A")?,
            b: r.f64_opt("oracle.B")?,
            t_end: r.f64_opt("oracle.T")?,
            y0: r.f64_opt("oracle.y0")?,
            y1: r.f64_opt("oracle.y1")?,
            t0: r.f64_opt("oracle.t0")?,
            random_count: r.uint_opt("oracle.random_count")?.unwrap_or(0) as usize,
            seed: r.uint_opt("oracle.seed")?.unwrap_or(0),
        };

        Ok(Scenario {
            name: entries.get("name").cloned().unwrap_or_else(|| "scenario".to_string()),
            mode,
            scale_factor,
            params,
            nonlinearity,
            grid,
            data0,
            data1,
            run,
            oracle,
            entries,
            base_dir,
        })
    }

    /// Copy with one key replaced, revalidated from scratch.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Scenario> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::UnknownKey { line: 0, key: key.to_string() });
        }
        let mut entries = self.entries.clone();
        entries.insert(key.to_string(), value.to_string());
        let mut s = Scenario::build(entries, &BTreeMap::new(), self.base_dir.clone())?;
        if !s.entries.contains_key("name") {
            s.name = self.name.clone();
        }
        Ok(s)
    }

    /// Raw configured value of `key`, if set.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Sorted `key = value` lines of every explicitly set key.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Scenario::canonical`], hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn initial_data(&self) -> Result<(Field, Field)> {
        Ok((make_profile(&self.grid, &self.data0)?, make_profile(&self.grid, &self.data1)?))
    }

    /// Whether both data are spatially constant.
    pub fn is_homogeneous(&self) -> bool {
        self.data0.kind == ProfileKind::Homogeneous && self.data1.kind == ProfileKind::Homogeneous
    }
}

fn validate_run(run: &RunSpec, sf: &ScaleFactor) -> Result<()> {
    let fail = |msg: String| Error::InvariantViolation { module: "dynamics", msg };
    if !(run.t0 >= 0.0 && run.t0 < sf.horizon()) {
        return Err(fail(format!("t0 = {} must lie in [0, {})", run.t0, sf.horizon())));
    }
    if run.t_end.partial_cmp(&run.t0) != Some(std::cmp::Ordering::Greater) {
        return Err(fail(format!("t_end = {} must exceed t0 = {}", run.t_end, run.t0)));
    }
    if !(run.dt > 0.0 && run.dt.is_finite()) {
        return Err(fail(format!("dt must be positive, got {}", run.dt)));
    }
    if !(run.dt_min > 0.0 && run.dt_min <= run.dt) {
        return Err(fail(format!("dt_min must lie in (0, dt], got {}", run.dt_min)));
    }
    if run.record_every == 0 {
        return Err(fail("record_every must be at least 1".into()));
    }
    if run.blowup_threshold.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(fail(format!("blowup_threshold must exceed 1, got {}", run.blowup_threshold)));
    }
    if !(run.cfl > 0.0 && run.cfl.is_finite()) {
        return Err(fail(format!("cfl must be positive, got {}", run.cfl)));
    }
    Ok(())
}

/// One sweep axis `key=lo:hi:steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::parse(None, format!("axis must look like key=lo:hi:steps, got `{spec}`"));
        let (key, range) = spec.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::UnknownKey { line: 0, key });
        }
        if steps == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        Ok(SweepAxis { key, lo, hi, steps })
    }

    /// Evenly spaced values including both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        (0..self.steps)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}
