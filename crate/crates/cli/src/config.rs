//! Plain-text experiment configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Every key is declared in [`SCHEMA`] with a type, a range and a default. Parsing
//! collects all problems (unknown keys, bad values, duplicates, missing sections)
//! before failing. The resolved configuration keeps every value, defaults
//! included, so [`ExperimentConfig::to_ini`] re-parses to an identical config.

use fraclap_core::{DomainKind, DomainSpec, PhiSpec, SolveOptions};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    Floats(Vec<f64>),
    Names(Vec<String>),
}

impl Value {
    fn render(&self) -> String {
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        match self {
            Value::Float(x) => format!("{x:?}"),
            Value::Int(n) => n.to_string(),
            Value::Text(s) => s.clone(),
            Value::Floats(v) => floats(v),
            Value::Names(v) => v.join(", "),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Bounds with openness flags.
    Float(f64, f64, bool, bool),
    Int(u64, u64),
    Text,
    Choice(&'static [&'static str]),
    Floats,
    Names(&'static [&'static str]),
}

struct Key {
    section: &'static str,
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
}

const INF: f64 = f64::INFINITY;

const fn key(section: &'static str, name: &'static str, kind: Kind, default: Option<&'static str>) -> Key {
    Key { section, name, kind, default }
}

pub const SCENARIO_KINDS: &[&str] = &["semilinear", "cone-exponent", "barrier", "chain", "maxprin", "sliding"];

pub const CHECK_NAMES: &[&str] = &[
    "hypotheses",
    "upper-bound",
    "uniform-convergence",
    "monotonicity",
    "symmetry",
    "uniqueness",
    "ball-bifurcation",
    "moving-planes",
    "boundary-decay",
    "lower-growth",
    "s-normal",
];

const SCHEMA: &[Key] = &[
    key("scenario", "name", Kind::Text, None),
    key("scenario", "kind", Kind::Choice(SCENARIO_KINDS), None),
    key("scenario", "description", Kind::Text, Some("")),
    key("domain", "kind", Kind::Choice(&["half-space", "epigraph", "coercive", "cone", "ball", "box"]), Some("half-space")),
    key("domain", "dim", Kind::Int(1, 3), Some("2")),
    key("domain", "level", Kind::Float(-INF, INF, true, true), Some("0.0")),
    key("domain", "phi", Kind::Choice(&["constant", "affine", "corner", "cosine", "parabola"]), Some("constant")),
    key("domain", "slope", Kind::Floats, Some("0.0")),
    key("domain", "k", Kind::Float(0.0, INF, false, true), Some("1.0")),
    key("domain", "amplitude", Kind::Float(-INF, INF, true, true), Some("0.5")),
    key("domain", "omega", Kind::Float(-INF, INF, true, true), Some("1.0")),
    key("domain", "q", Kind::Float(0.0, INF, true, true), Some("0.5")),
    key("domain", "theta", Kind::Float(0.0, PI, true, true), Some("1.5707963267948966")),
    key("domain", "center", Kind::Floats, Some("0.0, 0.0")),
    key("domain", "radius", Kind::Float(0.0, INF, true, true), Some("1.0")),
    key("domain", "lo", Kind::Floats, Some("0.0, 0.0")),
    key("domain", "hi", Kind::Floats, Some("1.0, 1.0")),
    key("grid", "lo", Kind::Floats, Some("-1.0, -1.0")),
    key("grid", "hi", Kind::Floats, Some("1.0, 1.0")),
    key("grid", "h", Kind::Float(0.0, INF, true, true), Some("0.0625")),
    key("grid", "window", Kind::Int(2, 1 << 16), Some("32")),
    key("operator", "s", Kind::Float(0.0, 1.0, true, true), Some("0.5")),
    key("nonlinearity", "kind", Kind::Choice(&["allen-cahn", "logistic", "zero"]), Some("allen-cahn")),
    key("nonlinearity", "t1", Kind::Float(0.0, 1.0, true, false), Some("0.5")),
    key("solver", "linear_tol", Kind::Float(0.0, 1.0, true, true), Some("1e-10")),
    key("solver", "outer_tol", Kind::Float(0.0, 1.0, true, true), Some("1e-8")),
    key("solver", "linear_cap", Kind::Int(1, 10_000_000), Some("100000")),
    key("solver", "outer_cap", Kind::Int(1, 1_000_000), Some("500")),
    key("solver", "monotone_slack", Kind::Float(0.0, 1.0, false, true), Some("1e-8")),
    key("solver", "eigen_tol", Kind::Float(0.0, 1.0, true, true), Some("1e-8")),
    key("checks", "list", Kind::Names(CHECK_NAMES), Some("")),
    key("checks", "upper_margin", Kind::Float(0.0, 1.0, false, true), Some("1e-6")),
    key("checks", "monotone_threshold", Kind::Float(-INF, INF, true, true), Some("-1e-8")),
    key("checks", "direction", Kind::Floats, Some("")),
    key("checks", "symmetry_threshold", Kind::Float(0.0, INF, false, true), Some("1e-3")),
    key("checks", "uniqueness_threshold", Kind::Float(0.0, INF, true, true), Some("1e-7")),
    key("checks", "planes_tol", Kind::Float(0.0, INF, false, true), Some("1e-6")),
    key("checks", "planes_levels", Kind::Int(1, 10_000), Some("12")),
    key("checks", "eps1", Kind::Float(0.0, 1.0, true, true), Some("0.1")),
    key("checks", "deepest_inf", Kind::Float(0.0, 1.0, false, false), Some("0.0")),
    key("checks", "fit_min", Kind::Float(0.0, INF, true, true), Some("0.03125")),
    key("checks", "fit_max", Kind::Float(0.0, INF, true, true), Some("1.0")),
    key("checks", "r_squared", Kind::Float(0.0, 1.0, false, false), Some("0.95")),
    key("checks", "normal_points", Kind::Floats, Some("")),
    key("checks", "normal_spread", Kind::Float(0.0, INF, true, true), Some("0.03")),
    key("checks", "ball_radii", Kind::Floats, Some("")),
    key("checks", "seed_radius", Kind::Float(0.0, INF, true, true), Some("2.0")),
    key("checks", "seed_amplitude", Kind::Float(0.0, 1.0, true, true), Some("0.05")),
    key("checks", "fit_margin", Kind::Float(0.0, INF, false, true), Some("0.25")),
    key("params", "thetas", Kind::Floats, Some("")),
    key("params", "calibration", Kind::Float(0.0, PI, true, true), Some("1.5707963267948966")),
    key("params", "strict_from", Kind::Float(0.0, PI, true, true), Some("1.7278759594743862")),
    key("params", "theta1", Kind::Float(0.0, PI, true, true), Some("0.7853981633974483")),
    key("params", "resolutions", Kind::Floats, Some("")),
    key("params", "radius", Kind::Float(0.0, 1.0, true, false), Some("0.25")),
    key("params", "r_lo", Kind::Float(0.0, 1.0, true, false), Some("0.03125")),
    key("params", "r_hi", Kind::Float(0.0, 1.0, true, false), Some("1.0")),
    key("params", "steps", Kind::Int(1, 64), Some("6")),
    key("params", "samples", Kind::Int(1, 1_000_000), Some("64")),
    key("params", "x0n", Kind::Floats, Some("0.05, 0.1, 0.2")),
    key("params", "beta", Kind::Float(0.0, PI / 4.0, true, true), Some("0.5235987755982988")),
    key("params", "h1", Kind::Float(0.0, INF, true, true), Some("1.0")),
    key("params", "h2", Kind::Float(0.0, INF, true, true), Some("10.0")),
    key("params", "instances", Kind::Int(1, 100_000), Some("200")),
    key("params", "pad", Kind::Int(0, 1024), Some("4")),
    key("params", "tol", Kind::Float(0.0, INF, false, true), Some("1e-8")),
    key("run", "out", Kind::Text, Some("")),
    key("run", "threads", Kind::Int(1, 1024), Some("1")),
    key("run", "seed", Kind::Int(0, u64::MAX), Some("0")),
];

/// Sections a scenario kind cannot run without.
fn required_sections(kind: &str) -> &'static [&'static str] {
    match kind {
        "semilinear" => &["domain", "grid", "operator"],
        "maxprin" | "sliding" => &["domain", "grid", "operator"],
        "cone-exponent" | "barrier" => &["grid", "operator", "params"],
        "chain" => &["params"],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{} configuration error(s):\n  {}", self.0.len(), lines.join("\n  "))
    }
}

fn parse_value(k: &Key, raw: &str) -> Result<Value, String> {
    let what = format!("{}.{}", k.section, k.name);
    let float = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{what}: '{t}' is not a number"));
    match k.kind {
        Kind::Float(lo, hi, lo_open, hi_open) => {
            let x = float(raw)?;
            let above = if lo_open { x > lo } else { x >= lo };
            let below = if hi_open { x < hi } else { x <= hi };
            if !(above && below && x.is_finite()) {
                let (l, r) = (if lo_open { "(" } else { "[" }, if hi_open { ")" } else { "]" });
                let fmt_b = |b: f64| if b == PI { "π".to_string() } else if b == PI / 4.0 { "π/4".into() } else { format!("{b}") };
                return Err(format!("{} must lie in {l}{},{}{r}, got {x}", k.name, fmt_b(lo), fmt_b(hi)));
            }
            Ok(Value::Float(x))
        }
        Kind::Int(lo, hi) => {
            let n: u64 = raw.trim().parse().map_err(|_| format!("{what}: '{raw}' is not a non-negative integer"))?;
            if n < lo || n > hi {
                return Err(format!("{} must lie in [{lo}, {hi}], got {n}", k.name));
            }
            Ok(Value::Int(n))
        }
        Kind::Text => Ok(Value::Text(raw.trim().to_string())),
        Kind::Choice(options) => {
            let t = raw.trim();
            if options.contains(&t) {
                Ok(Value::Text(t.to_string()))
            } else {
                Err(format!("{what}: '{t}' is not one of {}", options.join(", ")))
            }
        }
        Kind::Floats => {
            if raw.trim().is_empty() {
                return Ok(Value::Floats(Vec::new()));
            }
            raw.split(',').map(float).collect::<Result<Vec<_>, _>>().map(Value::Floats)
        }
        Kind::Names(options) => {
            let names: Vec<String> =
                raw.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
            if let Some(bad) = names.iter().find(|n| !options.contains(&n.as_str())) {
                return Err(format!("{what}: unknown name '{bad}'"));
            }
            Ok(Value::Names(names))
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<(String, String), Value>,
    present: Vec<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let mut section: Option<String> = None;
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut values = BTreeMap::new();
        let mut present: Vec<String> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let no = no + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if SCHEMA.iter().any(|k| k.section == name.trim()) => {
                        let name = name.trim().to_string();
                        if !present.contains(&name) {
                            present.push(name.clone());
                        }
                        section = Some(name);
                    }
                    Some(name) => {
                        errors.push(ConfigError { line: Some(no), message: format!("unknown section [{}]", name.trim()) });
                        section = None;
                    }
                    None => errors.push(ConfigError { line: Some(no), message: format!("malformed section header '{line}'") }),
                }
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(ConfigError { line: Some(no), message: format!("expected 'key = value', got '{line}'") });
                continue;
            };
            let k = k.trim();
            let Some(sec) = section.clone() else {
                errors.push(ConfigError { line: Some(no), message: format!("key '{k}' outside a known section") });
                continue;
            };
            let Some(spec) = SCHEMA.iter().find(|s| s.section == sec && s.name == k) else {
                errors.push(ConfigError { line: Some(no), message: format!("unknown key '{k}' in [{sec}]") });
                continue;
            };
            let id = (sec.clone(), k.to_string());
            if let Some(first) = seen.get(&id) {
                errors.push(ConfigError {
                    line: Some(no),
                    message: format!("duplicate key '{k}' in [{sec}] (first set on line {first})"),
                });
                continue;
            }
            seen.insert(id.clone(), no);
            match parse_value(spec, v) {
                Ok(val) => {
                    values.insert(id, val);
                }
                Err(message) => errors.push(ConfigError { line: Some(no), message }),
            }
        }
        for spec in SCHEMA {
            let id = (spec.section.to_string(), spec.name.to_string());
            if values.contains_key(&id) || seen.contains_key(&id) {
                continue;
            }
            match spec.default {
                Some(d) => {
                    values.insert(id, parse_value(spec, d).expect("schema defaults parse"));
                }
                None => errors.push(ConfigError {
                    line: None,
                    message: format!("missing required key '{}' in [{}]", spec.name, spec.section),
                }),
            }
        }
        if let Some(Value::Text(kind)) = values.get(&("scenario".to_string(), "kind".to_string())) {
            for sec in required_sections(kind) {
                if !present.iter().any(|p| p == sec) {
                    errors.push(ConfigError { line: None, message: format!("missing required section [{sec}] for kind {kind}") });
                }
            }
        }
        let cfg = Self { values, present };
        if errors.is_empty() {
            if let Err(e) = cfg.domain() {
                errors.push(ConfigError { line: None, message: e });
            }
            if let Err(e) = cfg.grid_bounds() {
                errors.push(ConfigError { line: None, message: e });
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigErrors(vec![ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) }])
        })?;
        Self::parse(&text)
    }

    /// Canonical rendering of every resolved value.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for ((sec, key), v) in &self.values {
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{key} = {}\n", v.render()));
        }
        out
    }

    fn get(&self, sec: &str, key: &str) -> &Value {
        self.values.get(&(sec.to_string(), key.to_string())).unwrap_or_else(|| panic!("schema key {sec}.{key}"))
    }

    pub fn float(&self, sec: &str, key: &str) -> f64 {
        match self.get(sec, key) {
            Value::Float(x) => *x,
            v => panic!("{sec}.{key} is {v:?}"),
        }
    }

    pub fn int(&self, sec: &str, key: &str) -> u64 {
        match self.get(sec, key) {
            Value::Int(n) => *n,
            v => panic!("{sec}.{key} is {v:?}"),
        }
    }

    pub fn text(&self, sec: &str, key: &str) -> &str {
        match self.get(sec, key) {
            Value::Text(t) => t,
            v => panic!("{sec}.{key} is {v:?}"),
        }
    }

    pub fn floats(&self, sec: &str, key: &str) -> &[f64] {
        match self.get(sec, key) {
            Value::Floats(v) => v,
            v => panic!("{sec}.{key} is {v:?}"),
        }
    }

    pub fn names(&self, sec: &str, key: &str) -> &[String] {
        match self.get(sec, key) {
            Value::Names(v) => v,
            v => panic!("{sec}.{key} is {v:?}"),
        }
    }

    /// Overrides one value, re-validating it against the schema.
    pub fn set(&mut self, sec: &str, key: &str, raw: &str) -> Result<(), String> {
        let spec = SCHEMA
            .iter()
            .find(|s| s.section == sec && s.name == key)
            .ok_or_else(|| format!("unknown key {sec}.{key}"))?;
        let v = parse_value(spec, raw)?;
        self.values.insert((sec.to_string(), key.to_string()), v);
        Ok(())
    }

    pub fn name(&self) -> &str {
        self.text("scenario", "name")
    }

    pub fn kind(&self) -> &str {
        self.text("scenario", "kind")
    }

    pub fn has_section(&self, sec: &str) -> bool {
        self.present.iter().any(|p| p == sec)
    }

    pub fn dim(&self) -> usize {
        self.int("domain", "dim") as usize
    }

    pub fn s(&self) -> f64 {
        self.float("operator", "s")
    }

    pub fn seed(&self) -> u64 {
        self.int("run", "seed")
    }

    pub fn threads(&self) -> usize {
        self.int("run", "threads") as usize
    }

    pub fn checks(&self) -> &[String] {
        self.names("checks", "list")
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            linear_tol: self.float("solver", "linear_tol"),
            outer_tol: self.float("solver", "outer_tol"),
            linear_cap: self.int("solver", "linear_cap") as usize,
            outer_cap: self.int("solver", "outer_cap") as usize,
            monotone_slack: self.float("solver", "monotone_slack"),
            eigen_tol: self.float("solver", "eigen_tol"),
        }
    }

    pub fn grid_bounds(&self) -> Result<(Vec<f64>, Vec<f64>), String> {
        let lo = self.floats("grid", "lo").to_vec();
        let hi = self.floats("grid", "hi").to_vec();
        let n = self.dim();
        if lo.len() != n || hi.len() != n {
            return Err(format!("grid.lo and grid.hi need {n} coordinates"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err("grid.lo must lie below grid.hi on every axis".into());
        }
        Ok((lo, hi))
    }

    pub fn phi(&self) -> Result<PhiSpec, String> {
        let n = self.dim();
        Ok(match self.text("domain", "phi") {
            "constant" => PhiSpec::Constant(self.float("domain", "level")),
            "affine" => {
                let a = self.floats("domain", "slope").to_vec();
                if a.len() + 1 != n {
                    return Err(format!("domain.slope needs {} entries", n - 1));
                }
                PhiSpec::Affine(a)
            }
            "corner" => PhiSpec::Corner(self.float("domain", "k")),
            "cosine" => PhiSpec::Cosine { amplitude: self.float("domain", "amplitude"), omega: self.float("domain", "omega") },
            _ => PhiSpec::Parabola(self.float("domain", "q")),
        })
    }

    pub fn domain(&self) -> Result<DomainSpec, String> {
        let n = self.dim();
        let point = |key: &str| -> Result<Vec<f64>, String> {
            let v = self.floats("domain", key).to_vec();
            if v.len() != n {
                return Err(format!("domain.{key} needs {n} coordinates"));
            }
            Ok(v)
        };
        let kind = match self.text("domain", "kind") {
            "half-space" => DomainKind::HalfSpace { level: self.float("domain", "level") },
            "epigraph" => DomainKind::LipschitzEpigraph(self.phi()?),
            "coercive" => DomainKind::CoerciveEpigraph(self.phi()?),
            "cone" => {
                let mut axis = vec![0.0; n];
                axis[n - 1] = 1.0;
                DomainKind::Cone { axis, theta: self.float("domain", "theta") }
            }
            "ball" => DomainKind::Ball { center: point("center")?, radius: self.float("domain", "radius") },
            _ => DomainKind::Box { lo: point("lo")?, hi: point("hi")? },
        };
        DomainSpec::new(n, kind).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[scenario]
name = demo
kind = semilinear
[domain]
kind = half-space
dim = 1
[grid]
lo = 0
hi = 4
h = 0.0625
[operator]
s = 0.5
";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.solve_options(), SolveOptions::default());
        assert_eq!(c.float("checks", "eps1"), 0.1);
        assert_eq!(c.domain().unwrap(), DomainSpec::half_space(1, 0.0).unwrap());
    }

    #[test]
    fn echo_is_lossless() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&c.to_ini()).unwrap();
        assert_eq!(c.values, again.values);
        assert_eq!(c.to_ini(), again.to_ini());
    }

    #[test]
    fn all_errors_are_reported() {
        let text = MINIMAL.replace("s = 0.5", "s = 1.3\nbogus = 1\ns = 0.4") + "[grid]\nwindow = 1\n";
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let msgs: Vec<String> = err.0.iter().map(|e| e.to_string()).collect();
        assert!(msgs.iter().any(|m| m.contains("s must lie in (0,1)")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("unknown key 'bogus'")));
        assert!(msgs.iter().any(|m| m.contains("duplicate key 's'") && m.starts_with("line 15")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("window must lie in")));
        assert!(err.0.len() >= 4);
    }

    #[test]
    fn missing_sections_and_keys() {
        let err = ExperimentConfig::parse("[scenario]\nkind = semilinear\n").unwrap_err();
        let msgs: Vec<String> = err.0.iter().map(|e| e.to_string()).collect();
        assert!(msgs.iter().any(|m| m.contains("missing required key 'name'")));
        assert!(msgs.iter().any(|m| m.contains("missing required section [domain]")));
    }

    #[test]
    fn bad_geometry_is_caught() {
        let text = MINIMAL.replace("hi = 4", "hi = -4");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("dim = 1", "dim = 2");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
