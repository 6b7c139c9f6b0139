//! Orchestration of a full run: solve → diagnose → duality → lemma sweep,
//! each stage gated by the corresponding config section, with CSV artifacts
//! and a hash manifest written to the output directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use degenlab_core::diagnostics::{convergence_rate, excess, g_delta_field, holder_estimate};
use degenlab_core::grid::Grid;
use degenlab_core::lemma_oracle::{run_lemma, LemmaCase};
use degenlab_core::solver::{eps_continuation, ProblemSpec, SolutionState, SolveOptions};
use degenlab_core::transport::{duality_report, traffic_flow};

use crate::checkpoint::{problem_hash, write_checkpoint};
use crate::config::{build_datum, build_metric, RunConfig};
use crate::csvout::{fmt_f64, write_csv};
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Solve,
    Diagnose,
    Duality,
    Lemmas,
    Io,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Solve => "solve",
            Stage::Diagnose => "diagnose",
            Stage::Duality => "duality",
            Stage::Lemmas => "verify-lemmas",
            Stage::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub msg: String,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config => 2,
            Stage::Solve => 3,
            Stage::Io => 1,
            _ => 4,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage.as_str(), self.msg)
    }
}

impl std::error::Error for PipelineError {}

fn stage_err(stage: Stage, msg: impl ToString) -> PipelineError {
    PipelineError {
        stage,
        msg: msg.to_string(),
    }
}

fn io_err(e: std::io::Error) -> PipelineError {
    stage_err(Stage::Io, e)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageSelect {
    pub solve: bool,
    pub diagnose: bool,
    pub duality: bool,
    pub lemmas: bool,
}

impl StageSelect {
    /// `run` gating: every stage whose config section is present.
    pub fn from_sections(cfg: &RunConfig) -> Self {
        StageSelect {
            solve: cfg.has_problem || cfg.has_solver,
            diagnose: cfg.has_diagnostics,
            duality: cfg.has_duality,
            lemmas: cfg.has_lemmas,
        }
    }

    fn needs_solution(&self) -> bool {
        self.solve || self.diagnose || self.duality
    }
}

pub fn build_spec(cfg: &RunConfig) -> Result<ProblemSpec, PipelineError> {
    let grid = Grid::new(cfg.problem.n, cfg.problem.res)
        .map_err(|e| stage_err(Stage::Config, e))?;
    let metric = build_metric(cfg).map_err(|m| stage_err(Stage::Config, m))?;
    let datum = build_datum(cfg).map_err(|m| stage_err(Stage::Config, m))?;
    Ok(ProblemSpec {
        grid,
        metric,
        p: cfg.problem.p,
        big_n: cfg.problem.big_n,
        datum,
        eps_schedule: cfg.solver.eps_schedule.clone(),
    })
}

fn solve_stage(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<Vec<SolutionState>, PipelineError> {
    let opts = SolveOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        method: cfg.solver.method,
    };
    let states = eps_continuation(spec, &opts).map_err(|e| stage_err(Stage::Solve, e))?;
    let rows: Vec<Vec<String>> = states
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.eps),
                fmt_f64(s.energy),
                fmt_f64(s.residual_norm),
                s.iterations.to_string(),
                fmt_f64(s.sup_slope),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("solution.csv"),
        "eps,energy,residual,iterations,sup_slope",
        &rows,
    )
    .map_err(io_err)?;
    files.push("solution.csv".into());

    let hash = problem_hash(spec, &cfg.problem.metric);
    let last = states.last().expect("non-empty schedule produced no state");
    write_checkpoint(&out_dir.join("checkpoint.csv"), &hash, last).map_err(io_err)?;
    files.push("checkpoint.csv".into());
    Ok(states)
}

fn diagnose_stage(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    states: &[SolutionState],
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let last = states.last().expect("solve stage returned no states");
    let d = &cfg.diagnostics;

    let mut excess_rows = Vec::new();
    for &delta in &d.deltas {
        for (center, rho) in &d.balls {
            let rep = excess(last, &spec.metric, center, *rho, delta, d.nu)
                .map_err(|e| stage_err(Stage::Diagnose, e))?;
            let mut row: Vec<String> = rep.x0.iter().map(|v| fmt_f64(*v)).collect();
            while row.len() < 2 {
                row.push(fmt_f64(0.0));
            }
            row.extend([
                fmt_f64(rep.rho),
                fmt_f64(delta),
                fmt_f64(rep.phi),
                fmt_f64(rep.psi_delta),
                fmt_f64(rep.superlevel_fraction),
                rep.regime.as_str().to_string(),
            ]);
            excess_rows.push(row);
        }
    }
    write_csv(
        &out_dir.join("excess.csv"),
        "x0_1,x0_2,rho,delta,phi,psi_delta,fraction,regime",
        &excess_rows,
    )
    .map_err(io_err)?;
    files.push("excess.csv".into());

    let delta0 = d.deltas.first().copied().unwrap_or(0.1);
    let field = g_delta_field(last, &spec.metric, delta0)
        .map_err(|e| stage_err(Stage::Diagnose, e))?;
    let holder = holder_estimate(&field, &d.holder_alphas, 0.5);
    let holder_rows: Vec<Vec<String>> = holder
        .iter()
        .map(|row| {
            vec![
                fmt_f64(row.alpha),
                fmt_f64(row.seminorm),
                spec.grid.res.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("holder.csv"),
        "alpha,seminorm,resolution",
        &holder_rows,
    )
    .map_err(io_err)?;
    files.push("holder.csv".into());

    if states.len() >= 4 {
        let (head, tail) = states.split_at(states.len() - 1);
        let rate = convergence_rate(head, &tail[0], &spec.metric, delta0, spec.p)
            .map_err(|e| stage_err(Stage::Diagnose, e))?;
        let rate_rows: Vec<Vec<String>> = rate
            .errors
            .iter()
            .map(|(eps, err)| vec![fmt_f64(*eps), fmt_f64(*err), fmt_f64(rate.slope)])
            .collect();
        write_csv(&out_dir.join("rate.csv"), "eps,error,slope", &rate_rows).map_err(io_err)?;
        files.push("rate.csv".into());
    }
    Ok(())
}

fn duality_stage(
    spec: &ProblemSpec,
    states: &[SolutionState],
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let last = states.last().expect("solve stage returned no states");
    let flow =
        traffic_flow(last, &spec.metric, spec.p).map_err(|e| stage_err(Stage::Duality, e))?;
    let n = spec.grid.n;
    let mut rows = Vec::new();
    let mut center = [0.0; 2];
    for cell in 0..spec.grid.num_cells() {
        spec.grid.cell_center(cell, &mut center[..n]);
        let s = &flow.sigma[cell * n..(cell + 1) * n];
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut row = vec![fmt_f64(center[0]), fmt_f64(if n == 2 { center[1] } else { 0.0 })];
        row.push(fmt_f64(s[0]));
        row.push(fmt_f64(if n == 2 { s[1] } else { 0.0 }));
        row.extend([
            fmt_f64(s_norm),
            fmt_f64(flow.congestion_cost[cell]),
            fmt_f64(flow.fy_residual[cell]),
        ]);
        rows.push(row);
    }
    write_csv(
        &out_dir.join("flow.csv"),
        "cx,cy,sigma_1,sigma_2,sigma_norm,congestion,fy_residual",
        &rows,
    )
    .map_err(io_err)?;
    files.push("flow.csv".into());

    let report = duality_report(&flow, last);
    let summary = format!(
        "primal_energy = {}\ndual_energy = {}\npairing = {}\ndiv_norm = {}\nmax_fy_residual = {}\n",
        fmt_f64(report.primal_energy),
        fmt_f64(report.dual_energy),
        fmt_f64(report.pairing),
        fmt_f64(report.div_norm),
        fmt_f64(report.max_fy_residual),
    );
    fs::write(out_dir.join("duality.txt"), summary).map_err(io_err)?;
    files.push("duality.txt".into());
    Ok(())
}

fn lemmas_stage(
    cfg: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<Vec<String>, PipelineError> {
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for &id in &cfg.lemmas.ids {
        let case = LemmaCase::default_for(id);
        let report = run_lemma(&case, cfg.lemmas.budget, cfg.lemmas.seed)
            .map_err(|e| stage_err(Stage::Lemmas, e))?;
        if !report.passed() {
            failed.push(id.as_str().to_string());
        }
        rows.push(vec![
            report.id.as_str().to_string(),
            report.mode.as_str().to_string(),
            report.samples.to_string(),
            report.violations.to_string(),
            fmt_f64(report.c_emp),
            report.stable.to_string(),
        ]);
    }
    write_csv(
        &out_dir.join("lemmas.csv"),
        "id,mode,samples,violations,c_emp,stable",
        &rows,
    )
    .map_err(io_err)?;
    files.push("lemmas.csv".into());
    Ok(failed)
}

/// Runs the selected stages and writes all artifacts plus `manifest.txt`
/// under the configured output directory. Returns the artifact names.
pub fn run_pipeline(cfg: &RunConfig, select: StageSelect) -> Result<Vec<String>, PipelineError> {
    let out_dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&out_dir).map_err(io_err)?;
    let mut files: Vec<String> = Vec::new();

    let mut failed_lemmas = Vec::new();
    if select.needs_solution() {
        let spec = build_spec(cfg)?;
        let states = solve_stage(cfg, &spec, &out_dir, &mut files)?;
        if select.diagnose {
            diagnose_stage(cfg, &spec, &states, &out_dir, &mut files)?;
        }
        if select.duality {
            duality_stage(&spec, &states, &out_dir, &mut files)?;
        }
    }
    if select.lemmas {
        failed_lemmas = lemmas_stage(cfg, &out_dir, &mut files)?;
    }

    write_manifest(&out_dir, &files).map_err(io_err)?;
    if !failed_lemmas.is_empty() {
        return Err(stage_err(
            Stage::Lemmas,
            format!("failed checks: {}", failed_lemmas.join(", ")),
        ));
    }
    Ok(files)
}
