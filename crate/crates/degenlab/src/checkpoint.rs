//! Solution checkpoint files: a small header (problem hash, ε, iteration
//! count, energy, residual) followed by a nodal CSV block. A checkpoint can
//! be reloaded as a warm start for a further solve as long as the problem
//! hash matches.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use degenlab_core::grid::{Grid, NodalField};
use degenlab_core::solver::{Datum, ProblemSpec, SolutionState};
use sha2::{Digest, Sha256};

use crate::csvout::fmt_f64;

#[derive(Debug)]
pub enum CheckpointError {
    Io(io::Error),
    Malformed { line: usize, msg: String },
    HashMismatch { expected: String, found: String },
    ShapeMismatch,
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io: {e}"),
            CheckpointError::Malformed { line, msg } => {
                write!(f, "checkpoint line {line}: {msg}")
            }
            CheckpointError::HashMismatch { expected, found } => write!(
                f,
                "checkpoint belongs to a different problem (expected {expected}, found {found})"
            ),
            CheckpointError::ShapeMismatch => {
                write!(f, "checkpoint nodal block does not match the grid")
            }
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<io::Error> for CheckpointError {
    fn from(e: io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

fn datum_desc(d: &Datum) -> String {
    match d {
        Datum::Linear { n, grad } => format!(
            "linear:n={n};grad={}",
            grad.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
        ),
        Datum::Bilinear { coef } => format!(
            "bilinear:coef={}",
            coef.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
        ),
        Datum::Custom(_) => "custom".to_string(),
    }
}

/// Content hash of the problem description; metric fields built from config
/// strings carry the string, so the original config text is hashed alongside
/// the structured pieces.
pub fn problem_hash(spec: &ProblemSpec, metric_desc: &str) -> String {
    let mut hasher = Sha256::new();
    let text = format!(
        "n={};res={};metric={};p={};big_n={};datum={};schedule={}",
        spec.grid.n,
        spec.grid.res,
        metric_desc,
        fmt_f64(spec.p),
        spec.big_n,
        datum_desc(&spec.datum),
        spec.eps_schedule
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(",")
    );
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_checkpoint(
    path: &Path,
    hash: &str,
    state: &SolutionState,
) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("spec_hash = {hash}\n"));
    out.push_str(&format!("eps = {}\n", fmt_f64(state.eps)));
    out.push_str(&format!("iterations = {}\n", state.iterations));
    out.push_str(&format!("energy = {}\n", fmt_f64(state.energy)));
    out.push_str(&format!("residual = {}\n", fmt_f64(state.residual_norm)));
    out.push_str("node,component,value\n");
    for node in 0..state.u.grid.num_nodes() {
        for i in 0..state.u.big_n {
            out.push_str(&format!("{node},{i},{}\n", fmt_f64(state.u.get(node, i))));
        }
    }
    fs::write(path, out)
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec_hash: String,
    pub eps: f64,
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
    values: Vec<f64>,
}

impl Checkpoint {
    /// Reassembles the nodal field for use as a warm start.
    pub fn into_field(self, grid: Grid, big_n: usize) -> Result<NodalField, CheckpointError> {
        if self.values.len() != grid.num_nodes() * big_n {
            return Err(CheckpointError::ShapeMismatch);
        }
        let mut u = NodalField::zeros(grid, big_n);
        u.values.copy_from_slice(&self.values);
        Ok(u)
    }
}

pub fn read_checkpoint(path: &Path, expected_hash: &str) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let mal = |line: usize, msg: &str| CheckpointError::Malformed {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<(usize, String), CheckpointError> {
        let (idx, raw) = lines
            .next()
            .ok_or_else(|| mal(0, "truncated header"))?;
        let line = idx + 1;
        let Some(eq) = raw.find('=') else {
            return Err(mal(line, "expected 'key = value'"));
        };
        if raw[..eq].trim() != key {
            return Err(mal(line, &format!("expected key '{key}'")));
        }
        Ok((line, raw[eq + 1..].trim().to_string()))
    };
    let (_, spec_hash) = header("spec_hash")?;
    if spec_hash != expected_hash {
        return Err(CheckpointError::HashMismatch {
            expected: expected_hash.to_string(),
            found: spec_hash,
        });
    }
    let (l, eps_s) = header("eps")?;
    let eps: f64 = eps_s.parse().map_err(|_| mal(l, "bad eps"))?;
    let (l, it_s) = header("iterations")?;
    let iterations: usize = it_s.parse().map_err(|_| mal(l, "bad iterations"))?;
    let (l, en_s) = header("energy")?;
    let energy: f64 = en_s.parse().map_err(|_| mal(l, "bad energy"))?;
    let (l, re_s) = header("residual")?;
    let residual: f64 = re_s.parse().map_err(|_| mal(l, "bad residual"))?;

    let (idx, cols) = lines.next().ok_or_else(|| mal(0, "missing nodal block"))?;
    if cols.trim() != "node,component,value" {
        return Err(mal(idx + 1, "expected 'node,component,value' header"));
    }
    let mut values = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 3 {
            return Err(mal(line, "expected three columns"));
        }
        let v: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| mal(line, "bad nodal value"))?;
        values.push(v);
    }
    Ok(Checkpoint {
        spec_hash,
        eps,
        iterations,
        energy,
        residual,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use degenlab_core::metric::MetricField;
    use degenlab_core::solver::{solve_regularized, SolveOptions};

    fn spec() -> ProblemSpec {
        ProblemSpec {
            grid: Grid::new(2, 9).unwrap(),
            metric: MetricField::identity(2),
            p: 2.0,
            big_n: 1,
            datum: Datum::Linear {
                n: 2,
                grad: vec![2.0, 0.0],
            },
            eps_schedule: vec![1e-2],
        }
    }

    #[test]
    fn checkpoint_round_trip_warm_start() {
        let spec = spec();
        let sol = solve_regularized(&spec, 1e-2, &SolveOptions::default(), None).unwrap();
        let hash = problem_hash(&spec, "identity");
        let dir = std::env::temp_dir().join("degenlab-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.csv");
        write_checkpoint(&path, &hash, &sol).unwrap();

        let ck = read_checkpoint(&path, &hash).unwrap();
        assert_eq!(ck.iterations, sol.iterations);
        assert_eq!(ck.eps, sol.eps);
        assert_eq!(ck.energy, sol.energy);
        let warm = ck.into_field(spec.grid, 1).unwrap();
        assert_eq!(warm.values, sol.u.values);

        // warm-started solve converges immediately
        let again = solve_regularized(&spec, 1e-2, &SolveOptions::default(), Some(&warm)).unwrap();
        assert!(again.converged);
        assert!(again.iterations <= sol.iterations);
    }

    #[test]
    fn checkpoint_rejects_wrong_hash() {
        let spec = spec();
        let sol = solve_regularized(&spec, 1e-2, &SolveOptions::default(), None).unwrap();
        let dir = std::env::temp_dir().join("degenlab-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state2.csv");
        write_checkpoint(&path, "aaaa", &sol).unwrap();
        assert!(matches!(
            read_checkpoint(&path, "bbbb"),
            Err(CheckpointError::HashMismatch { .. })
        ));
    }

    #[test]
    fn hash_depends_on_problem() {
        let a = spec();
        let mut b = spec();
        b.p = 3.0;
        assert_ne!(problem_hash(&a, "identity"), problem_hash(&b, "identity"));
        assert_ne!(
            problem_hash(&a, "identity"),
            problem_hash(&a, "diag:1.5,0.5")
        );
    }
}
