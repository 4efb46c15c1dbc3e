//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! nx = 16
//! ny = 16
//! [control]
//! q0 = 1.5
//! target_source = gaussian_bump 0.5 0.5 0.15 1
//! ```
//!
//! Parsing is strict: unknown sections or keys and repeated keys are
//! errors carrying the line number. Relative file paths resolve against
//! the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use deadoil_core::adjoint::{AdjointMode, OptimizeOptions};
use deadoil_core::{
    builtin_model, create_grid, CoefficientModel, DeclaredBounds, Grid, SolverSettings,
};

use crate::error::AppError;
use crate::profile::Profile;
use crate::verify::{VerifyOptions, CASES};

/// Every section, key and default, as shown by `--help`.
pub const CONFIG_HELP: &str = "\
Config file: sectioned key = value text, '#' starts a comment.

[grid]      nx, ny (required, interior nodes per axis)
            lx = 1, ly = 1 (domain lengths)
[model]     name = smooth_bounded
              (smooth_bounded | verification_constant | verification_linear_phi)
            or phi, g, d = polynomial coefficients, lowest degree first (degree <= 6)
            half_width = validity interval half-width (default: model's own, 2)
            c1, c2, c3, c4, c_h3 = declared bounds (polynomial models; default sampled)
[control]   beta1 = 0.1, q0 = 1.5 (1 < q0 < 2), eps_smooth = 1e-8
            source = zero        (control for `solve`)
            initial = zero       (starting control for `optimize`)
            target_u = zero, target_p = zero
            target_source = none (targets = forward solve of this control;
                                  excludes target_u/target_p)
            profiles: zero | constant C | gaussian_bump CX CY RADIUS AMP
                      | sinusoid KX KY AMP | file PATH.csv
[solver]    method = auto (auto = Picard warm start then Newton | newton | picard)
            tol_nonlinear = 1e-10, maxit_nonlinear = 100
            tol_linear = 1e-12, maxit_linear = 20000
            armijo_c = 1e-4, armijo_shrink = 0.5, min_step = 1e-8
            warm_start_sweeps = 3
[optimize]  max_outer = 200, tol_stationarity = 1e-6, step0 = 1
            adjoint = discrete (discrete | continuous)
[verify]    cases = hypotheses mms_pressure mms_coupled taylor gradient_check
                    adjoint_consistency
            pressure_grids = 32 64, coupled_grids = 16 32, adjoint_grids = 8 16 32
            taylor_samples = 5, gradient_samples = 3, gradient_grid = 8
            bounds_samples = 10000, seed = 24301 (0x5EED)
[output]    directory = out, jacobian = false (also dump the final Jacobian)
";

const SECTIONS: [(&str, &[&str]); 7] = [
    ("grid", &["nx", "ny", "lx", "ly"]),
    (
        "model",
        &[
            "name",
            "phi",
            "g",
            "d",
            "half_width",
            "c1",
            "c2",
            "c3",
            "c4",
            "c_h3",
        ],
    ),
    (
        "control",
        &[
            "beta1",
            "q0",
            "eps_smooth",
            "source",
            "initial",
            "target_u",
            "target_p",
            "target_source",
        ],
    ),
    (
        "solver",
        &[
            "method",
            "tol_nonlinear",
            "maxit_nonlinear",
            "tol_linear",
            "maxit_linear",
            "armijo_c",
            "armijo_shrink",
            "min_step",
            "warm_start_sweeps",
        ],
    ),
    (
        "optimize",
        &["max_outer", "tol_stationarity", "step0", "adjoint"],
    ),
    (
        "verify",
        &[
            "cases",
            "pressure_grids",
            "coupled_grids",
            "adjoint_grids",
            "taylor_samples",
            "gradient_samples",
            "gradient_grid",
            "bounds_samples",
            "seed",
        ],
    ),
    ("output", &["directory", "jacobian"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMethod {
    Auto,
    Newton,
    Picard,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Profiles {
        u: Profile,
        p: Profile,
    },
    /// Forward solve of this control.
    FromSource(Profile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub beta1: f64,
    pub q0: f64,
    pub eps_smooth: f64,
    pub source: Profile,
    pub initial: Profile,
    pub targets: Targets,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    pub model: CoefficientModel,
    pub control: ControlConfig,
    pub method: StateMethod,
    pub solver: SolverSettings,
    pub optimize: OptimizeOptions,
    pub cases: Vec<String>,
    pub verify: VerifyOptions,
    pub output_dir: PathBuf,
    pub dump_jacobian: bool,
}

struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn lex(text: &str) -> Result<Sections, AppError> {
    let mut out = Sections::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let err = |message: String| AppError::Parse { line, message };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header '{body}'")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            if out.contains_key(name) {
                return Err(err(format!("section [{name}] repeated")));
            }
            out.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{body}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_deref()
            .ok_or_else(|| err(format!("key '{key}' outside any section")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).unwrap().1;
        if !allowed.contains(&key) {
            return Err(err(format!("unknown key '{key}' in [{section}]")));
        }
        if value.is_empty() {
            return Err(err(format!("key '{key}' has no value")));
        }
        let table = out.get_mut(section).unwrap();
        if table.contains_key(key) {
            return Err(err(format!("key '{section}.{key}' repeated")));
        }
        table.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(out)
}

struct Reader<'a> {
    sections: &'a Sections,
    base: &'a Path,
}

impl Reader<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|t| t.get(key))
    }

    fn parsed<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, AppError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|_| AppError::Parse {
            line: e.line,
            message: format!("{section}.{key}: cannot parse '{}'", e.value),
        })
    }

    fn float(&self, section: &str, key: &str, default: f64) -> Result<f64, AppError> {
        let v = self.parsed::<f64>(section, key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(AppError::constraint(
                &format!("{section}.{key}"),
                "must be finite",
            ));
        }
        Ok(v)
    }

    fn positive(&self, section: &str, key: &str, default: f64) -> Result<f64, AppError> {
        let v = self.float(section, key, default)?;
        if v <= 0.0 {
            return Err(AppError::constraint(
                &format!("{section}.{key}"),
                "must be positive",
            ));
        }
        Ok(v)
    }

    fn count(&self, section: &str, key: &str, default: usize) -> Result<usize, AppError> {
        Ok(self.parsed::<usize>(section, key)?.unwrap_or(default))
    }

    fn floats(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, AppError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        words(&e.value)
            .map(|w| w.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .map(Some)
            .ok_or_else(|| AppError::Parse {
                line: e.line,
                message: format!("{section}.{key}: expected finite numbers"),
            })
    }

    fn counts(&self, section: &str, key: &str, default: &[usize]) -> Result<Vec<usize>, AppError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(default.to_vec());
        };
        words(&e.value)
            .map(|w| w.parse::<usize>().ok())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| AppError::Parse {
                line: e.line,
                message: format!("{section}.{key}: expected nonnegative integers"),
            })
    }

    fn profile(&self, key: &str) -> Result<Option<Profile>, AppError> {
        let Some(e) = self.entry("control", key) else {
            return Ok(None);
        };
        Profile::parse(&e.value, self.base)
            .map(Some)
            .map_err(|m| AppError::constraint(&format!("control.{key}"), m))
    }

    fn choice<'v>(
        &self,
        section: &str,
        key: &str,
        options: &[&'v str],
        default: &'v str,
    ) -> Result<&'v str, AppError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(default);
        };
        options
            .iter()
            .find(|o| **o == e.value)
            .copied()
            .ok_or_else(|| {
                AppError::constraint(
                    &format!("{section}.{key}"),
                    format!("'{}' is not one of {options:?}", e.value),
                )
            })
    }
}

/// Whitespace- or comma-separated list items.
fn words(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
}

fn solver_error(key: &str) -> impl Fn(deadoil_core::Error) -> AppError + '_ {
    move |e| AppError::constraint(key, e.to_string())
}

fn read_model(r: &Reader) -> Result<CoefficientModel, AppError> {
    let poly = [
        r.floats("model", "phi")?,
        r.floats("model", "g")?,
        r.floats("model", "d")?,
    ];
    let half = r.parsed::<f64>("model", "half_width")?;
    let bound_keys = ["c1", "c2", "c3", "c4", "c_h3"];
    let bounds: Vec<Option<f64>> = bound_keys
        .iter()
        .map(|k| r.parsed::<f64>("model", k))
        .collect::<Result<_, _>>()?;
    let any_poly = poly.iter().any(Option::is_some);
    let any_bound = bounds.iter().any(Option::is_some);

    let mut model = if any_poly {
        if r.entry("model", "name").is_some() {
            return Err(AppError::constraint(
                "model.name",
                "give either a built-in name or polynomial coefficients, not both",
            ));
        }
        let [Some(phi), Some(g), Some(d)] = poly else {
            return Err(AppError::constraint(
                "model.phi",
                "polynomial models need phi, g and d",
            ));
        };
        let declared = if any_bound {
            match bounds[..] {
                [Some(c1), Some(c2), Some(c3), Some(c4), Some(c_h3)] => Some(DeclaredBounds {
                    c1,
                    c2,
                    c3,
                    c4,
                    c_h3,
                }),
                _ => {
                    return Err(AppError::constraint(
                        "model.c1",
                        "declare all of c1, c2, c3, c4, c_h3 or none",
                    ))
                }
            }
        } else {
            None
        };
        CoefficientModel::polynomial("custom", &phi, &g, &d, half.unwrap_or(2.0), declared)
            .map_err(solver_error("model.phi"))?
    } else {
        if any_bound {
            return Err(AppError::constraint(
                "model.c1",
                "declared bounds apply only to polynomial models",
            ));
        }
        let name = r
            .entry("model", "name")
            .map_or("smooth_bounded", |e| e.value.as_str());
        builtin_model(name).map_err(solver_error("model.name"))?
    };
    if let Some(h) = half {
        if !(h > 0.0 && h.is_finite()) {
            return Err(AppError::constraint("model.half_width", "must be positive"));
        }
        model.validity = (-h, h);
    }
    Ok(model)
}

fn read_control(r: &Reader) -> Result<ControlConfig, AppError> {
    let beta1 = r.positive("control", "beta1", 0.1)?;
    let q0 = r.float("control", "q0", 1.5)?;
    if !(q0 > 1.0 && q0 < 2.0) {
        return Err(AppError::constraint(
            "control.q0",
            format!("{q0} is outside the open interval (1,2)"),
        ));
    }
    let eps_smooth = r.float("control", "eps_smooth", 1e-8)?;
    if eps_smooth < 0.0 {
        return Err(AppError::constraint(
            "control.eps_smooth",
            "must be nonnegative",
        ));
    }
    let target_u = r.profile("target_u")?;
    let target_p = r.profile("target_p")?;
    let targets = match r.profile("target_source")? {
        Some(src) => {
            if target_u.is_some() || target_p.is_some() {
                return Err(AppError::constraint(
                    "control.target_source",
                    "cannot be combined with target_u or target_p",
                ));
            }
            Targets::FromSource(src)
        }
        None => Targets::Profiles {
            u: target_u.unwrap_or(Profile::Zero),
            p: target_p.unwrap_or(Profile::Zero),
        },
    };
    Ok(ControlConfig {
        beta1,
        q0,
        eps_smooth,
        source: r.profile("source")?.unwrap_or(Profile::Zero),
        initial: r.profile("initial")?.unwrap_or(Profile::Zero),
        targets,
    })
}

fn read_solver(r: &Reader) -> Result<(StateMethod, SolverSettings), AppError> {
    let method = match r.choice("solver", "method", &["auto", "newton", "picard"], "auto")? {
        "newton" => StateMethod::Newton,
        "picard" => StateMethod::Picard,
        _ => StateMethod::Auto,
    };
    let d = SolverSettings::default();
    let st = SolverSettings {
        tol_nonlinear: r.float("solver", "tol_nonlinear", d.tol_nonlinear)?,
        maxit_nonlinear: r.count("solver", "maxit_nonlinear", d.maxit_nonlinear)?,
        tol_linear: r.float("solver", "tol_linear", d.tol_linear)?,
        maxit_linear: r.count("solver", "maxit_linear", d.maxit_linear)?,
        armijo_c: r.float("solver", "armijo_c", d.armijo_c)?,
        armijo_shrink: r.float("solver", "armijo_shrink", d.armijo_shrink)?,
        min_step: r.float("solver", "min_step", d.min_step)?,
        warm_start_sweeps: r.count("solver", "warm_start_sweeps", d.warm_start_sweeps)?,
    };
    st.validate().map_err(solver_error("solver"))?;
    Ok((method, st))
}

fn read_optimize(r: &Reader) -> Result<OptimizeOptions, AppError> {
    let d = OptimizeOptions::default();
    let tol = r.float("optimize", "tol_stationarity", d.tol_stationarity)?;
    if tol < 0.0 {
        return Err(AppError::constraint(
            "optimize.tol_stationarity",
            "must be nonnegative",
        ));
    }
    let adjoint_mode = match r.choice(
        "optimize",
        "adjoint",
        &["discrete", "continuous"],
        "discrete",
    )? {
        "continuous" => AdjointMode::Continuous,
        _ => AdjointMode::Discrete,
    };
    Ok(OptimizeOptions {
        max_outer: r.count("optimize", "max_outer", d.max_outer)?,
        tol_stationarity: tol,
        step0: r.positive("optimize", "step0", d.step0)?,
        adjoint_mode,
    })
}

fn read_verify(
    r: &Reader,
    settings: SolverSettings,
) -> Result<(Vec<String>, VerifyOptions), AppError> {
    let cases: Vec<String> = match r.entry("verify", "cases") {
        None => CASES.iter().map(|c| c.to_string()).collect(),
        Some(e) => words(&e.value).map(str::to_string).collect(),
    };
    if cases.is_empty() {
        return Err(AppError::constraint(
            "verify.cases",
            "list at least one case",
        ));
    }
    if let Some(bad) = cases.iter().find(|c| !CASES.contains(&c.as_str())) {
        return Err(AppError::constraint(
            "verify.cases",
            format!("unknown case '{bad}' (expected one of {CASES:?})"),
        ));
    }
    let d = VerifyOptions::default();
    let opt = VerifyOptions {
        seed: r.parsed::<u64>("verify", "seed")?.unwrap_or(d.seed),
        pressure_grids: r.counts("verify", "pressure_grids", &d.pressure_grids)?,
        coupled_grids: r.counts("verify", "coupled_grids", &d.coupled_grids)?,
        adjoint_grids: r.counts("verify", "adjoint_grids", &d.adjoint_grids)?,
        taylor_samples: r.count("verify", "taylor_samples", d.taylor_samples)?,
        gradient_samples: r.count("verify", "gradient_samples", d.gradient_samples)?,
        gradient_grid: r.count("verify", "gradient_grid", d.gradient_grid)?,
        bounds_samples: r.count("verify", "bounds_samples", d.bounds_samples)?,
        settings,
    };
    for (key, grids) in [
        ("verify.pressure_grids", &opt.pressure_grids),
        ("verify.coupled_grids", &opt.coupled_grids),
        ("verify.adjoint_grids", &opt.adjoint_grids),
    ] {
        if grids.len() < 2 || grids[0] == 0 || grids.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AppError::constraint(
                key,
                "need at least 2 positive, strictly increasing grid sizes",
            ));
        }
    }
    if opt.gradient_grid == 0 || opt.gradient_grid > 32 {
        return Err(AppError::constraint(
            "verify.gradient_grid",
            "must lie in 1..=32",
        ));
    }
    if opt.taylor_samples == 0 {
        return Err(AppError::constraint(
            "verify.taylor_samples",
            "must be at least 1",
        ));
    }
    if opt.bounds_samples < 2 {
        return Err(AppError::constraint(
            "verify.bounds_samples",
            "must be at least 2",
        ));
    }
    Ok((cases, opt))
}

/// Parses and validates config text; relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, AppError> {
    let sections = lex(text)?;
    let r = Reader {
        sections: &sections,
        base,
    };
    let nx = r.parsed::<usize>("grid", "nx")?;
    let ny = r.parsed::<usize>("grid", "ny")?;
    let (Some(nx), Some(ny)) = (nx, ny) else {
        let key = if nx.is_none() { "grid.nx" } else { "grid.ny" };
        return Err(AppError::constraint(key, "required"));
    };
    let lx = r.positive("grid", "lx", 1.0)?;
    let ly = r.positive("grid", "ly", 1.0)?;
    let grid = create_grid(nx, ny, lx, ly).map_err(solver_error("grid.nx"))?;

    let model = read_model(&r)?;
    let control = read_control(&r)?;
    let (method, solver) = read_solver(&r)?;
    let optimize = read_optimize(&r)?;
    let (cases, verify) = read_verify(&r, solver)?;
    let dir = r
        .entry("output", "directory")
        .map_or("out", |e| e.value.as_str());
    let dump_jacobian = r.parsed::<bool>("output", "jacobian")?.unwrap_or(false);

    let cfg = RunConfig {
        grid,
        model,
        control,
        method,
        solver,
        optimize,
        cases,
        verify,
        output_dir: base.join(dir),
        dump_jacobian,
    };
    cfg.check_files()?;
    Ok(cfg)
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

impl RunConfig {
    /// Loads every file profile once so missing or malformed data fails at load.
    fn check_files(&self) -> Result<(), AppError> {
        let c = &self.control;
        let mut profiles = vec![
            ("control.source", &c.source),
            ("control.initial", &c.initial),
        ];
        match &c.targets {
            Targets::Profiles { u, p } => {
                profiles.push(("control.target_u", u));
                profiles.push(("control.target_p", p));
            }
            Targets::FromSource(s) => profiles.push(("control.target_source", s)),
        }
        for (key, p) in profiles {
            if let Profile::File(_) = p {
                p.realize(self.grid)
                    .map_err(|e| AppError::constraint(key, e.to_string()))?;
            }
        }
        Ok(())
    }
}
