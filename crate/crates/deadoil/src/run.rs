//! Subcommand drivers. Each run writes its artifacts plus `summary.json`
//! into the output directory; failures are recorded in the summary too.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use deadoil_core::{
    assemble_linearized, optimize, solve_state, solve_state_newton, solve_state_picard,
    ControlProblem, Field, OptimizeOutcome, SolveLog, StateSolution, Termination,
};
use serde::Serialize;

use crate::config::{parse_config, RunConfig, StateMethod, Targets};
use crate::error::{AppError, ExitCode};
use crate::io::{
    history_jsonl, iteration_log_jsonl, matrix_to_coordinate, write_field_csv, write_text,
};
use crate::verify::{run_case, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Optimize,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Optimize => "optimize",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorInfo {
    kind: &'static str,
    message: String,
}

#[derive(Debug, Serialize)]
struct GridInfo {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

#[derive(Debug, Serialize)]
struct SolveInfo {
    method: &'static str,
    iterations: usize,
    final_residual: Option<f64>,
    max_abs_u: f64,
    max_abs_p: f64,
}

#[derive(Debug, Serialize)]
struct OptimizeInfo {
    iterations: usize,
    termination: &'static str,
    #[serde(rename = "J")]
    cost: f64,
    stationarity_norm: f64,
    initial_stationarity_norm: f64,
    beta1: f64,
    q0: f64,
    adjoint: &'static str,
}

#[derive(Debug, Serialize)]
struct CaseInfo {
    case: String,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Top-level summary; field order here is the key order on disk.
#[derive(Debug, Serialize)]
struct Summary {
    command: &'static str,
    status: &'static str,
    exit_code: i32,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve: Option<SolveInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimize: Option<OptimizeInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<Vec<CaseInfo>>,
}

impl Summary {
    fn new(cmd: Command, seed: Option<u64>) -> Self {
        Summary {
            command: cmd.name(),
            status: "ok",
            exit_code: 0,
            seed,
            error: None,
            grid: None,
            model: None,
            solve: None,
            optimize: None,
            verify: None,
        }
    }

    fn describe(&mut self, cfg: &RunConfig) {
        let g = cfg.grid;
        self.grid = Some(GridInfo {
            nx: g.nx(),
            ny: g.ny(),
            lx: g.lx(),
            ly: g.ly(),
        });
        self.model = Some(cfg.model.name.clone());
    }

    fn fail(&mut self, e: &AppError) {
        let code = e.exit_code();
        self.status = if code == ExitCode::VerificationFailed {
            "failed"
        } else {
            "error"
        };
        self.exit_code = code as i32;
        self.error = Some(ErrorInfo {
            kind: e.kind(),
            message: e.to_string(),
        });
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Where a run writes: `--output` if given, else the config's directory
/// setting, else `out` beside the config file.
fn output_dir(cfg: Option<&RunConfig>, config: &Path, output: Option<&Path>) -> PathBuf {
    match (output, cfg) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(c)) => c.output_dir.clone(),
        (None, None) => config.parent().unwrap_or(Path::new(".")).join("out"),
    }
}

/// Runs one subcommand end to end and returns the process exit status.
///
/// `seed` overrides the verification seed; the other subcommands draw no
/// random numbers and only record it.
pub fn run(cmd: Command, config: &Path, output: Option<&Path>, seed: Option<u64>) -> ExitCode {
    let mut summary = Summary::new(cmd, seed);
    let parsed = parse_config(config);
    let dir = output_dir(parsed.as_ref().ok(), config, output);
    let result = parsed.and_then(|mut cfg| {
        if let Some(s) = seed {
            cfg.verify.seed = s;
        }
        if cmd == Command::Verify {
            summary.seed = Some(cfg.verify.seed);
        }
        summary.describe(&cfg);
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        match cmd {
            Command::Solve => run_solve(&cfg, &dir, &mut summary),
            Command::Optimize => run_optimize(&cfg, &dir, &mut summary),
            Command::Verify => run_verify(&cfg, &dir, &mut summary),
        }
    });
    let code = match &result {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            eprintln!("deadoil {}: {e}", cmd.name());
            summary.fail(e);
            e.exit_code()
        }
    };
    let path = dir.join("summary.json");
    let written = fs::create_dir_all(&dir).and_then(|_| fs::write(&path, to_json(&summary)));
    if let Err(e) = written {
        eprintln!("deadoil: cannot write {}: {e}", path.display());
    }
    code
}

pub fn solve_with(cfg: &RunConfig, f: &Field) -> Result<(StateSolution, SolveLog), AppError> {
    let (m, st) = (&cfg.model, &cfg.solver);
    Ok(match cfg.method {
        StateMethod::Auto => solve_state(m, f, st)?,
        StateMethod::Newton => solve_state_newton(m, f, &StateSolution::zeros(cfg.grid), st)?,
        StateMethod::Picard => solve_state_picard(m, f, st)?,
    })
}

fn run_solve(cfg: &RunConfig, dir: &Path, summary: &mut Summary) -> Result<(), AppError> {
    let f = cfg.control.source.realize(cfg.grid)?;
    let (s, log) = solve_with(cfg, &f)?;
    write_field_csv(&dir.join("u.csv"), &s.u)?;
    write_field_csv(&dir.join("p.csv"), &s.p)?;
    write_text(
        &dir.join("residuals.jsonl"),
        &iteration_log_jsonl(&log.records),
    )?;
    if cfg.dump_jacobian {
        let op = assemble_linearized(&cfg.model, &s);
        write_text(&dir.join("jacobian.txt"), &matrix_to_coordinate(&op.matrix))?;
    }
    summary.solve = Some(SolveInfo {
        method: match cfg.method {
            StateMethod::Auto => "auto",
            StateMethod::Newton => "newton",
            StateMethod::Picard => "picard",
        },
        iterations: log.iterations(),
        final_residual: log.final_residual(),
        max_abs_u: s.u.max_abs(),
        max_abs_p: s.p.max_abs(),
    });
    Ok(())
}

/// Builds the control problem, solving for the targets when they are
/// manufactured from a source.
pub fn control_problem(cfg: &RunConfig) -> Result<ControlProblem, AppError> {
    let c = &cfg.control;
    let (tu, tp) = match &c.targets {
        Targets::Profiles { u, p } => (u.realize(cfg.grid)?, p.realize(cfg.grid)?),
        Targets::FromSource(src) => {
            let (s, _) = solve_state(&cfg.model, &src.realize(cfg.grid)?, &cfg.solver)?;
            (s.u, s.p)
        }
    };
    Ok(ControlProblem::with_smoothing(
        c.beta1,
        c.q0,
        tu,
        tp,
        c.eps_smooth,
    )?)
}

pub fn optimize_with(cfg: &RunConfig) -> Result<OptimizeOutcome, AppError> {
    let cp = control_problem(cfg)?;
    let f0 = cfg.control.initial.realize(cfg.grid)?;
    Ok(optimize(&cp, &cfg.model, &f0, &cfg.solver, &cfg.optimize)?)
}

fn run_optimize(cfg: &RunConfig, dir: &Path, summary: &mut Summary) -> Result<(), AppError> {
    let out = optimize_with(cfg)?;
    for (name, field) in [
        ("f.csv", &out.control),
        ("u.csv", &out.state.u),
        ("p.csv", &out.state.p),
        ("e1.csv", &out.adjoint.e1),
        ("p1.csv", &out.adjoint.p1),
    ] {
        write_field_csv(&dir.join(name), field)?;
    }
    write_text(&dir.join("history.jsonl"), &history_jsonl(&out.history))?;
    summary.optimize = Some(OptimizeInfo {
        iterations: out.iterations(),
        termination: match out.termination {
            Termination::Tolerance => "tolerance",
            Termination::MaxOuter => "max_outer",
            Termination::Stagnated => "stagnated",
        },
        cost: out.final_cost(),
        stationarity_norm: out.stationarity_norm(),
        initial_stationarity_norm: out.history[0].stationarity_norm,
        beta1: cfg.control.beta1,
        q0: cfg.control.q0,
        adjoint: match cfg.optimize.adjoint_mode {
            deadoil_core::AdjointMode::Discrete => "discrete",
            deadoil_core::AdjointMode::Continuous => "continuous",
        },
    });
    Ok(())
}

/// Runs the configured cases concurrently; results keep the configured order.
pub fn verify_cases(cfg: &RunConfig) -> Vec<(String, Result<VerificationReport, AppError>)> {
    thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .cases
            .iter()
            .map(|case| scope.spawn(move || run_case(case, &cfg.verify).map_err(AppError::from)))
            .collect();
        cfg.cases
            .iter()
            .cloned()
            .zip(handles)
            .map(|(case, h)| (case, h.join().expect("verification case panicked")))
            .collect()
    })
}

fn run_verify(cfg: &RunConfig, dir: &Path, summary: &mut Summary) -> Result<(), AppError> {
    let mut infos = Vec::new();
    let mut first_error = None;
    let mut failed = Vec::new();
    for (case, result) in verify_cases(cfg) {
        match result {
            Ok(report) => {
                write_text(&dir.join(format!("report_{case}.json")), &to_json(&report))?;
                if !report.pass {
                    failed.push(case.clone());
                }
                infos.push(CaseInfo {
                    case,
                    pass: report.pass,
                    error: None,
                });
            }
            Err(e) => {
                infos.push(CaseInfo {
                    case,
                    pass: false,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    summary.verify = Some(infos);
    if let Some(e) = first_error {
        return Err(e);
    }
    if !failed.is_empty() {
        return Err(AppError::Verification(format!(
            "failing cases: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
