//! Line-oriented run configuration: `key = value` pairs under `[section]`
//! headers, `#` comments, strict validation with line-numbered errors.
//! Stages of the pipeline are gated by section presence: `[problem]` and
//! `[solver]` drive the solve, `[diagnostics]` enables the excess/Hölder/
//! rate reports, `[duality]` the transport check, `[lemmas]` the inequality
//! sweep.

use std::fmt;

use degenlab_core::lemma_oracle::LemmaId;
use degenlab_core::metric::MetricField;
use degenlab_core::solver::{Datum, Method};

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub n: usize,
    pub res: usize,
    pub metric: String,
    pub p: f64,
    pub big_n: usize,
    pub datum: String,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            n: 2,
            res: 17,
            metric: "identity".into(),
            p: 2.0,
            big_n: 1,
            datum: "linear:2,0".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub eps_schedule: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_schedule: vec![1e-1, 1e-2, 1e-3],
            tol: 1e-8,
            max_iter: 50_000,
            seed: 42,
            method: Method::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    pub deltas: Vec<f64>,
    pub nu: f64,
    /// (center, radius) probes.
    pub balls: Vec<(Vec<f64>, f64)>,
    pub holder_alphas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            deltas: vec![0.1],
            nu: 0.25,
            balls: vec![(vec![0.5, 0.5], 0.3)],
            holder_alphas: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LemmasConfig {
    pub ids: Vec<LemmaId>,
    pub budget: usize,
    pub seed: u64,
}

impl Default for LemmasConfig {
    fn default() -> Self {
        LemmasConfig {
            ids: LemmaId::ALL.to_vec(),
            budget: 20_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            formats: "csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub lemmas: LemmasConfig,
    pub output: OutputConfig,
    pub has_problem: bool,
    pub has_solver: bool,
    pub has_diagnostics: bool,
    pub has_duality: bool,
    pub has_lemmas: bool,
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| ConfigError {
            line,
            msg: format!("key '{key}': expected a number, got '{v}'"),
        })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>().map_err(|_| ConfigError {
        line,
        msg: format!("key '{key}': expected a non-negative integer, got '{v}'"),
    })
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>().map_err(|_| ConfigError {
        line,
        msg: format!("key '{key}': expected an unsigned integer, got '{v}'"),
    })
}

fn parse_f64_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| parse_f64(line, key, s.trim()))
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    let mut seen: Vec<(String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if !content.ends_with(']') {
                return err(line, "unterminated section header");
            }
            section = content[1..content.len() - 1].trim().to_string();
            match section.as_str() {
                "problem" => cfg.has_problem = true,
                "solver" => cfg.has_solver = true,
                "diagnostics" => cfg.has_diagnostics = true,
                "duality" => cfg.has_duality = true,
                "lemmas" => cfg.has_lemmas = true,
                "output" => {}
                other => return err(line, format!("unknown section '[{other}]'")),
            }
            continue;
        }
        let Some(eq) = content.find('=') else {
            return err(line, "expected 'key = value'");
        };
        let key = content[..eq].trim().to_string();
        let value = content[eq + 1..].trim().to_string();
        if key.is_empty() {
            return err(line, "empty key");
        }
        if section.is_empty() {
            return err(line, "key outside any [section]");
        }
        if seen.iter().any(|(s, k)| *s == section && *k == key) {
            return err(line, format!("duplicate key '{key}' in section '[{section}]'"));
        }
        seen.push((section.clone(), key.clone()));

        match (section.as_str(), key.as_str()) {
            ("problem", "n") => cfg.problem.n = parse_usize(line, &key, &value)?,
            ("problem", "res") => cfg.problem.res = parse_usize(line, &key, &value)?,
            ("problem", "metric") => cfg.problem.metric = value,
            ("problem", "p") => cfg.problem.p = parse_f64(line, &key, &value)?,
            ("problem", "big_n") => cfg.problem.big_n = parse_usize(line, &key, &value)?,
            ("problem", "datum") => cfg.problem.datum = value,
            ("solver", "eps_schedule") => {
                cfg.solver.eps_schedule = parse_f64_list(line, &key, &value)?
            }
            ("solver", "tol") => cfg.solver.tol = parse_f64(line, &key, &value)?,
            ("solver", "max_iter") => cfg.solver.max_iter = parse_usize(line, &key, &value)?,
            ("solver", "seed") => cfg.solver.seed = parse_u64(line, &key, &value)?,
            ("solver", "method") => {
                cfg.solver.method = match value.as_str() {
                    "auto" => Method::Auto,
                    "ncg" => Method::Ncg,
                    "newton" => Method::NewtonCg,
                    other => return err(line, format!("unknown method '{other}'")),
                }
            }
            ("diagnostics", "delta") => {
                cfg.diagnostics.deltas = parse_f64_list(line, &key, &value)?
            }
            ("diagnostics", "nu") => cfg.diagnostics.nu = parse_f64(line, &key, &value)?,
            ("diagnostics", "balls") => {
                let mut balls = Vec::new();
                for group in value.split(';') {
                    let nums = parse_f64_list(line, &key, group)?;
                    if nums.len() < 2 {
                        return err(line, "each ball needs center coordinates and a radius");
                    }
                    let (center, rho) = nums.split_at(nums.len() - 1);
                    balls.push((center.to_vec(), rho[0]));
                }
                cfg.diagnostics.balls = balls;
            }
            ("diagnostics", "holder_alphas") => {
                cfg.diagnostics.holder_alphas = parse_f64_list(line, &key, &value)?
            }
            ("lemmas", "ids") => {
                if value == "all" {
                    cfg.lemmas.ids = LemmaId::ALL.to_vec();
                } else {
                    let mut ids = Vec::new();
                    for part in value.split(',') {
                        let part = part.trim();
                        match LemmaId::parse(part) {
                            Some(id) => ids.push(id),
                            None => return err(line, format!("unknown lemma id '{part}'")),
                        }
                    }
                    cfg.lemmas.ids = ids;
                }
            }
            ("lemmas", "budget") => cfg.lemmas.budget = parse_usize(line, &key, &value)?,
            ("lemmas", "seed") => cfg.lemmas.seed = parse_u64(line, &key, &value)?,
            ("output", "directory") => cfg.output.directory = value,
            ("output", "formats") => {
                if value != "csv" {
                    return err(line, format!("unsupported format '{value}'"));
                }
                cfg.output.formats = value;
            }
            (s, k) => return err(line, format!("unknown key '{k}' in section '[{s}]'")),
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let v = |msg: String| ConfigError { line: 0, msg };
    if !(1.1..=10.0).contains(&cfg.problem.p) {
        return Err(v(format!("p must lie in [1.1, 10], got {}", cfg.problem.p)));
    }
    if !(cfg.problem.n == 1 || cfg.problem.n == 2) {
        return Err(v(format!("n must be 1 or 2, got {}", cfg.problem.n)));
    }
    if cfg.problem.res < 3 {
        return Err(v(format!("res must be at least 3, got {}", cfg.problem.res)));
    }
    if cfg.problem.big_n == 0 || cfg.problem.big_n > 2 {
        return Err(v(format!("big_n must be 1 or 2, got {}", cfg.problem.big_n)));
    }
    for w in cfg.solver.eps_schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(v("eps_schedule must decrease strictly".into()));
        }
    }
    if cfg
        .solver
        .eps_schedule
        .iter()
        .any(|&e| !(e > 0.0 && e <= 1.0))
    {
        return Err(v("eps_schedule entries must lie in (0, 1]".into()));
    }
    if !(cfg.diagnostics.nu > 0.0 && cfg.diagnostics.nu < 1.0) {
        return Err(v("nu must lie in (0, 1)".into()));
    }
    if cfg.has_lemmas && cfg.lemmas.budget < 1000 {
        return Err(v("lemma budget must be at least 1000".into()));
    }
    build_metric(cfg).map_err(|m| v(m))?;
    build_datum(cfg).map_err(|m| v(m))?;
    Ok(())
}

/// Builds the metric field described by the `metric` string:
/// `identity`, `diag:d1,d2`, `affine:b1,b2;s1,s2`, `rotation:t0,rate,e1,e2`.
pub fn build_metric(cfg: &RunConfig) -> Result<MetricField, String> {
    let n = cfg.problem.n;
    let spec = cfg.problem.metric.as_str();
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("metric: bad number '{x}'"))
            })
            .collect()
    };
    if spec == "identity" {
        return Ok(MetricField::identity(n));
    }
    if let Some(rest) = spec.strip_prefix("diag:") {
        let d = nums(rest)?;
        if d.len() != n {
            return Err(format!("metric diag needs {n} entries"));
        }
        let mut diag = [1.0; 2];
        diag[..n].copy_from_slice(&d);
        return MetricField::constant_diagonal(n, diag).map_err(|e| e.to_string());
    }
    if let Some(rest) = spec.strip_prefix("affine:") {
        let parts: Vec<&str> = rest.split(';').collect();
        if parts.len() != 2 {
            return Err("metric affine needs 'base;slope'".into());
        }
        let (b, s) = (nums(parts[0])?, nums(parts[1])?);
        if b.len() != n || s.len() != n {
            return Err(format!("metric affine needs {n}+{n} entries"));
        }
        let mut base = [1.0; 2];
        let mut slope = [0.0; 2];
        base[..n].copy_from_slice(&b);
        slope[..n].copy_from_slice(&s);
        return MetricField::affine_diagonal(n, base, slope).map_err(|e| e.to_string());
    }
    if let Some(rest) = spec.strip_prefix("rotation:") {
        if n != 2 {
            return Err("rotation metric requires n = 2".into());
        }
        let v = nums(rest)?;
        if v.len() != 4 {
            return Err("metric rotation needs 'angle0,rate,eig1,eig2'".into());
        }
        return MetricField::rotation(v[0], v[1], [v[2], v[3]]).map_err(|e| e.to_string());
    }
    Err(format!("unknown metric spec '{spec}'"))
}

/// Builds the Dirichlet datum described by the `datum` string:
/// `linear:a1[,a2,...]` (big_n × n coefficients) or `bilinear:c1[,c2]`.
pub fn build_datum(cfg: &RunConfig) -> Result<Datum, String> {
    let spec = cfg.problem.datum.as_str();
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("datum: bad number '{x}'"))
            })
            .collect()
    };
    if let Some(rest) = spec.strip_prefix("linear:") {
        let grad = nums(rest)?;
        if grad.len() != cfg.problem.n * cfg.problem.big_n {
            return Err(format!(
                "linear datum needs {} coefficients",
                cfg.problem.n * cfg.problem.big_n
            ));
        }
        return Ok(Datum::Linear {
            n: cfg.problem.n,
            grad,
        });
    }
    if let Some(rest) = spec.strip_prefix("bilinear:") {
        if cfg.problem.n != 2 {
            return Err("bilinear datum requires n = 2".into());
        }
        let coef = nums(rest)?;
        if coef.len() != cfg.problem.big_n {
            return Err(format!("bilinear datum needs {} coefficients", cfg.problem.big_n));
        }
        return Ok(Datum::Bilinear { coef });
    }
    Err(format!("unknown datum spec '{spec}'"))
}
