//! Argument parsing and subcommand dispatch.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypervis_core::analytic::{
    alpha, critical_radius, h_of, janson_condition, janson_intensity, lambda_gv, line_joint, line_vacancy,
    t_theta, triangle_perimeter, vacancy_f,
};
use hypervis_core::experiments::{
    estimate_event, fit_inverse_r, fit_loglinear, janson_experiment, moment_ratio, near_critical_sweep,
    tail_curve, Estimate, Event, InverseRReport, LogFit, Model, MomentReport, Runner, SweepOptions,
    TailCurve,
};
use hypervis_core::sampler::{
    window_for_visibility, BallField, BooleanScene, RadiusLaw, StreamKey, DEFAULT_BUDGET,
};
use hypervis_core::visibility::{visible_set, VisibilityResult};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{parse_law, parse_list, parse_pair, parse_range, ModelKind, ModelSpec, RGrid, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "hypervis",
    version,
    about = "Visibility in hyperbolic Poisson obstacle fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a closed-form quantity.
    Analytic(AnalyticArgs),
    /// Tail curve of P[Y_r ≠ ∅] with slope fits.
    Tail(TailArgs),
    /// Second-moment sandwich check.
    Moments(MomentsArgs),
    /// Exact laws and tail rate of the line process.
    Lines(LinesArgs),
    /// Near-critical table over a list of decay rates.
    Sweep(SweepArgs),
    /// Coverage probability under shrinking radii.
    Janson(JansonArgs),
    /// Dump one Boolean scene with its visible arcs, or reload a dump.
    Scene(SceneArgs),
}

/// Flags shared by all simulation subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, env = "HYPERVIS_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "HYPERVIS_SEED")]
    pub seed: Option<u64>,
    /// Replicates.
    #[arg(long, env = "HYPERVIS_N")]
    pub n: Option<u64>,
    /// Probe lengths as a:b:step.
    #[arg(long = "r-grid", env = "HYPERVIS_R_GRID")]
    pub r_grid: Option<String>,
    #[arg(long, env = "HYPERVIS_EPS")]
    pub eps: Option<f64>,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, env = "HYPERVIS_THREADS")]
    pub threads: Option<usize>,
    /// Exit with status 3 if the run's acceptance check fails.
    #[arg(long, env = "HYPERVIS_CHECK")]
    pub check: bool,
    /// Output file for the main table; standard output otherwise.
    #[arg(long, env = "HYPERVIS_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Boolean,
    Lines,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long = "model", value_enum, env = "HYPERVIS_MODEL")]
    pub kind: Option<ModelArg>,
    #[arg(long, env = "HYPERVIS_LAMBDA")]
    pub lambda: Option<f64>,
    /// Target decay rate instead of an intensity.
    #[arg(long, env = "HYPERVIS_ALPHA")]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub law: LawArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LawArgs {
    /// Constant ball radius.
    #[arg(long, env = "HYPERVIS_RADIUS")]
    pub radius: Option<f64>,
    /// Radius law as JSON or value:weight,value:weight.
    #[arg(long, env = "HYPERVIS_LAW")]
    pub law: Option<String>,
}

impl LawArgs {
    fn resolve(&self) -> Result<RadiusLaw, CliError> {
        let spec = self.spec()?;
        ModelSpec {
            law: spec.0,
            radius: spec.1,
            ..Default::default()
        }
        .law()
    }

    fn spec(&self) -> Result<(Option<RadiusLaw>, Option<f64>), CliError> {
        Ok((self.law.as_deref().map(parse_law).transpose()?, self.radius))
    }
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, CliError> {
        let (law, radius) = self.law.spec()?;
        Ok(ModelSpec {
            kind: self.kind.map(|k| match k {
                ModelArg::Boolean => ModelKind::Boolean,
                ModelArg::Lines => ModelKind::Lines,
            }),
            lambda: self.lambda,
            alpha: self.alpha,
            law,
            radius,
            seed: None,
        })
    }
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(subcommand)]
    pub func: AnalyticFn,
    /// Digits after the decimal point.
    #[arg(long, default_value_t = 6, global = true)]
    pub digits: usize,
}

#[derive(Debug, Subcommand)]
pub enum AnalyticFn {
    /// Segment vacancy probability P[L_r(0) ⊂ 𝒲].
    F {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        law: LawArgs,
    },
    /// Vacancy decay rate 2λE[sinh R].
    Alpha {
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        law: LawArgs,
    },
    /// Critical intensity 1/(2E[sinh R]).
    LambdaGv {
        #[command(flatten)]
        law: LawArgs,
    },
    /// Radius whose critical intensity is λ.
    CriticalRadius {
        #[arg(long)]
        lambda: f64,
    },
    /// Distance past which direction θ escapes every radius-C ball shadowing direction 0.
    TTheta {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        c: f64,
    },
    /// Angular half-width h(C, r).
    H {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        r: f64,
    },
    /// Perimeter of the triangle spanned by two length-r segments at angle θ.
    Per {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        theta: f64,
    },
    /// Intensity λ(R) for the shrinking-radius limit.
    JansonLambda {
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fit range a:b; defaults to the whole grid.
    #[arg(long = "fit-range")]
    pub fit_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct LinesArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, env = "HYPERVIS_LAMBDA")]
    pub lambda: Option<f64>,
    /// Segment length for the exact-law checks.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "fit-range")]
    pub fit_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub law: LawArgs,
    /// Comma-separated decay rates.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long = "r-max")]
    pub r_max: Option<f64>,
    /// Directions in the star-area quadrature.
    #[arg(long = "n-grid")]
    pub n_grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct JansonArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated decreasing radii.
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub r: Option<f64>,
    /// Replicate index of the scene.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    /// Recompute visibility for a previously dumped scene.
    #[arg(long)]
    pub load: Option<PathBuf>,
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Main table: CSV or JSON.
    pub table: String,
    /// Summary JSON, if separate from the table.
    pub report: Option<String>,
    /// `Some(Err(reason))` when the run's check failed.
    pub check: Option<Result<(), String>>,
}

/// Merged settings of one run.
struct Settings {
    command: &'static str,
    config: RunConfig,
    check: bool,
    out: Option<PathBuf>,
}

impl Settings {
    fn new(command: &'static str, common: &Common, model: Option<ModelSpec>) -> Result<Self, CliError> {
        let mut config = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &config.command {
            if c != command {
                return Err(CliError::config(format!("config is for `{c}`, not `{command}`")));
            }
        }
        if let Some(m) = model {
            config.model.overlay(m)?;
        }
        if common.seed.is_some() {
            config.model.seed = common.seed;
        }
        let e = &mut config.experiment;
        if let Some(n) = common.n {
            e.n = Some(n);
        }
        if let Some(g) = &common.r_grid {
            e.r_grid = Some(RGrid::Range(g.clone()));
        }
        if common.eps.is_some() {
            e.eps = common.eps;
        }
        if common.threads.is_some() {
            e.threads = common.threads;
        }
        let out = common
            .out
            .clone()
            .or_else(|| config.output.path.as_ref().map(PathBuf::from));
        Ok(Settings {
            command,
            config,
            check: common.check,
            out,
        })
    }

    fn seed(&self) -> u64 {
        self.config.model.seed.unwrap_or(0)
    }

    fn n(&self, default: u64) -> Result<u64, CliError> {
        match self.config.experiment.n.unwrap_or(default) {
            0 => Err(CliError::config("n must be at least 1")),
            n => Ok(n),
        }
    }

    fn runner(&self) -> Runner {
        Runner::new(self.config.experiment.threads)
    }

    fn grid(&self, default: Option<&str>) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.config.experiment.r_grid, default) {
            (Some(g), _) => g.values()?,
            (None, Some(d)) => parse_range(d)?,
            (None, None) => return Err(CliError::config("an r grid is required (--r-grid a:b:step)")),
        };
        if grid.is_empty() {
            return Err(CliError::config("the r grid is empty"));
        }
        Ok(grid)
    }

    /// Hash of everything that determines the output, thread count excluded.
    fn hash(&self, resolved: &Value) -> String {
        let mut exp = self.config.experiment.clone();
        exp.threads = None;
        let identity = json!({
            "command": self.command,
            "resolved": resolved,
            "experiment": exp,
            "seed": self.seed(),
            "version": VERSION,
        });
        let digest = Sha256::digest(identity.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse the process arguments, run, and return the exit status.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match execute(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Run `cli`, writing results to `out` or to the `--out` file and summaries to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (outcome, target) = match cli.command {
        Command::Analytic(a) => (analytic(a)?, None),
        Command::Tail(a) => with_target(a.common.clone(), |s| tail(s, &a), "tail", Some(a.model.spec()?))?,
        Command::Moments(a) => with_target(a.common.clone(), moments, "moments", Some(a.model.spec()?))?,
        Command::Lines(a) => {
            let spec = ModelSpec {
                kind: Some(ModelKind::Lines),
                lambda: a.lambda,
                ..Default::default()
            };
            with_target(a.common.clone(), |s| lines(s, &a), "lines", Some(spec))?
        }
        Command::Sweep(a) => with_target(a.common.clone(), |s| sweep(s, &a), "sweep", None)?,
        Command::Janson(a) => with_target(a.common.clone(), |s| janson(s, &a), "janson", None)?,
        Command::Scene(a) => with_target(a.common.clone(), |s| scene(s, &a), "scene", Some(a.model.spec()?))?,
    };
    match &target {
        Some(path) => {
            std::fs::write(path, &outcome.table)
                .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
            if let Some(r) = &outcome.report {
                writeln!(out, "{r}")?;
            }
        }
        None => {
            write!(out, "{}", outcome.table)?;
            if let Some(r) = &outcome.report {
                writeln!(err, "{r}")?;
            }
        }
    }
    if let Some(Err(reason)) = outcome.check {
        return Err(CliError::check(reason));
    }
    Ok(())
}

fn with_target(
    common: Common,
    f: impl FnOnce(&Settings) -> Result<Outcome, CliError>,
    command: &'static str,
    model: Option<ModelSpec>,
) -> Result<(Outcome, Option<PathBuf>), CliError> {
    let settings = Settings::new(command, &common, model)?;
    let mut outcome = f(&settings)?;
    if !settings.check {
        outcome.check = None;
    }
    Ok((outcome, settings.out))
}

fn fmt(x: f64, digits: usize) -> String {
    format!("{x:.digits$}")
}

fn analytic(a: AnalyticArgs) -> Result<Outcome, CliError> {
    let value = match a.func {
        AnalyticFn::F { r, lambda, law } => vacancy_f(r, lambda, &law.resolve()?),
        AnalyticFn::Alpha { lambda, law } => alpha(lambda, &law.resolve()?),
        AnalyticFn::LambdaGv { law } => lambda_gv(&law.resolve()?),
        AnalyticFn::CriticalRadius { lambda } => critical_radius(lambda),
        AnalyticFn::TTheta { theta, c } => t_theta(theta, c)?,
        AnalyticFn::H { c, r } => h_of(c, r),
        AnalyticFn::Per { r, theta } => triangle_perimeter(r, theta),
        AnalyticFn::JansonLambda { radius, r, p } => janson_intensity(radius, r, p)?,
    };
    if !value.is_finite() {
        return Err(CliError::config(format!("value {value} is outside the domain")));
    }
    Ok(Outcome {
        table: format!("{}\n", fmt(value, a.digits)),
        ..Default::default()
    })
}

/// CSV of a tail curve: r, p_hat, stderr, n, model_hash, seed, version.
pub fn tail_csv(curve: &TailCurve, hash: &str) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["r", "p_hat", "stderr", "n", "model_hash", "seed", "version"])?;
    for row in &curve.rows {
        w.write_record([
            row.r.to_string(),
            row.p_hat.to_string(),
            row.stderr.to_string(),
            row.n.to_string(),
            hash.to_string(),
            curve.seed.to_string(),
            VERSION.to_string(),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::io(e.to_string()))
}

fn model_alpha(model: &Model) -> f64 {
    match model {
        Model::Boolean { lambda, law } => alpha(*lambda, law),
        Model::Lines { lambda } => 2.0 * lambda,
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    range: (f64, f64),
    loglinear: Result<LogFit, String>,
    inverse_r: Result<InverseRReport, String>,
}

fn fits(curve: &TailCurve, range: (f64, f64)) -> FitSummary {
    FitSummary {
        range,
        loglinear: fit_loglinear(curve, range).map_err(|e| e.to_string()),
        inverse_r: fit_inverse_r(curve, range).map_err(|e| e.to_string()),
    }
}

/// Check a fit against decay rate `rate` (`α − 1` or `2λ − 1`).
fn rate_check(fit: &FitSummary, rate: f64, tol: f64, inverse_bound: f64) -> Result<(), String> {
    let slope = fit.loglinear.as_ref().map_err(|e| e.clone())?.slope;
    if rate.abs() < 1e-9 {
        let ratio = fit.inverse_r.as_ref().map_err(|e| e.clone())?.ratio;
        if ratio > inverse_bound {
            return Err(format!("max/min of r·p̂ is {ratio}, above {inverse_bound}"));
        }
        if slope <= -0.1 {
            return Err(format!("log-slope {slope} is not shallower than -0.1"));
        }
        Ok(())
    } else if rate > 0.0 {
        if (slope + rate).abs() > tol * rate {
            return Err(format!("log-slope {slope} is not within {tol} of {}", -rate));
        }
        Ok(())
    } else {
        Err(format!(
            "no tail-rate check for a subcritical model (rate {rate})"
        ))
    }
}

fn fit_range(s: &Settings, flag: &Option<String>, grid: &[f64]) -> Result<(f64, f64), CliError> {
    match flag {
        Some(f) => parse_pair(f),
        None => Ok(s
            .config
            .experiment
            .fit_range
            .unwrap_or((grid[0], grid[grid.len() - 1]))),
    }
}

fn tail(s: &Settings, a: &TailArgs) -> Result<Outcome, CliError> {
    let model = s.config.model.resolve()?;
    let grid = s.grid(None)?;
    let range = fit_range(s, &a.fit_range, &grid)?;
    let curve = tail_curve(&model, &grid, s.n(10_000)?, s.seed(), s.runner())?;
    let hash = s.hash(&json!({ "model": model, "fit_range": range }));
    let alpha = model_alpha(&model);
    let rate = alpha - 1.0;
    let summary = fits(&curve, range);
    let e = &s.config.experiment;
    let check = rate_check(
        &summary,
        rate,
        e.slope_tolerance.unwrap_or(0.15),
        e.inverse_r_bound.unwrap_or(3.0),
    );
    let report = json!({
        "command": "tail",
        "version": VERSION,
        "seed": s.seed(),
        "config_hash": hash,
        "model": model,
        "alpha": alpha,
        "predicted_slope": -rate,
        "fit": summary,
        "check": check_json(&check),
    });
    Ok(Outcome {
        table: tail_csv(&curve, &hash)?,
        report: Some(report.to_string()),
        check: Some(check),
    })
}

fn check_json(c: &Result<(), String>) -> Value {
    match c {
        Ok(()) => json!({ "pass": true }),
        Err(reason) => json!({ "pass": false, "reason": reason }),
    }
}

fn moments(s: &Settings) -> Result<Outcome, CliError> {
    let model = s.config.model.resolve()?;
    let rs = match (&s.config.experiment.r_grid, s.config.experiment.r) {
        (None, Some(r)) => vec![r],
        _ => s.grid(Some("2:6:2"))?,
    };
    let eps = s.config.experiment.eps.unwrap_or(0.5);
    let n = s.n(10_000)?;
    let reports: Vec<MomentReport> = rs
        .iter()
        .map(|&r| moment_ratio(&model, r, eps, n, s.seed(), s.runner()))
        .collect::<Result<_, _>>()?;
    let failed: Vec<f64> = reports.iter().filter(|r| !r.pass).map(|r| r.r).collect();
    let check = if failed.is_empty() {
        Ok(())
    } else {
        Err(format!("sandwich fails at r = {failed:?}"))
    };
    let hash = s.hash(&json!({ "model": model, "r": rs, "eps": eps }));
    let table = json!({
        "command": "moments",
        "version": VERSION,
        "seed": s.seed(),
        "config_hash": hash,
        "model": model,
        "alpha": model_alpha(&model),
        "rows": reports,
        "check": check_json(&check),
    });
    Ok(Outcome {
        table: format!("{table:#}\n"),
        report: None,
        check: Some(check),
    })
}

fn lines(s: &Settings, a: &LinesArgs) -> Result<Outcome, CliError> {
    let model = s.config.model.resolve()?;
    let lambda = model.lambda();
    let e = &s.config.experiment;
    let r = a.r.or(e.r).unwrap_or(2.0);
    let theta = a.theta.or(e.theta).unwrap_or(FRAC_PI_2);
    let n = s.n(100_000)?;
    let grid = s.grid(Some("2:6:0.5"))?;
    let range = fit_range(s, &a.fit_range, &grid)?;
    let vac = estimate_event(&model, Event::SegmentVacancy { r }, n, s.seed(), s.runner())?;
    let joint = estimate_event(&model, Event::Joint { r, theta }, n, s.seed(), s.runner())?;
    let curve = tail_curve(&model, &grid, n, s.seed(), s.runner())?;
    let summary = fits(&curve, range);
    let (vac_exact, joint_exact) = (line_vacancy(lambda, r), line_joint(lambda, r, theta));
    let rate = 2.0 * lambda - 1.0;
    let mut problems = vec![];
    if !vac.covers(vac_exact, 3.0) {
        problems.push(format!(
            "vacancy {} is not within 3 stderr of {vac_exact}",
            vac.mean
        ));
    }
    if !joint.covers(joint_exact, 3.0) {
        problems.push(format!(
            "joint {} is not within 3 stderr of {joint_exact}",
            joint.mean
        ));
    }
    if let Err(reason) = rate_check(
        &summary,
        rate,
        e.slope_tolerance.unwrap_or(0.15),
        e.inverse_r_bound.unwrap_or(3.0),
    ) {
        problems.push(reason);
    }
    let check = if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    };
    let hash = s.hash(&json!({ "model": model, "r": r, "theta": theta, "fit_range": range }));
    let report = json!({
        "command": "lines",
        "version": VERSION,
        "seed": s.seed(),
        "config_hash": hash,
        "lambda": lambda,
        "vacancy": { "r": r, "estimate": vac, "exact": vac_exact },
        "joint": { "r": r, "theta": theta, "estimate": joint, "exact": joint_exact },
        "predicted_slope": -rate,
        "fit": summary,
        "check": check_json(&check),
    });
    Ok(Outcome {
        table: tail_csv(&curve, &hash)?,
        report: Some(report.to_string()),
        check: Some(check),
    })
}

fn opt_cols(e: Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [e.mean.to_string(), e.stderr.to_string()],
        None => [String::new(), String::new()],
    }
}

fn sweep(s: &Settings, a: &SweepArgs) -> Result<Outcome, CliError> {
    let e = &s.config.experiment;
    let (law, radius) = a.law.spec()?;
    let mut spec = s.config.model.clone();
    if law.is_some() || radius.is_some() {
        spec.law = law;
        spec.radius = radius;
    }
    let law = spec.law()?;
    let alphas = match (&a.alphas, &e.alphas) {
        (Some(list), _) => parse_list(list)?,
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::config("a list of decay rates is required (--alphas)")),
    };
    let defaults = SweepOptions::default();
    let opts = SweepOptions {
        tol: e.tol.unwrap_or(defaults.tol),
        n_grid: a.n_grid.or(e.n_grid).unwrap_or(defaults.n_grid),
        r_cap: e.r_cap.unwrap_or(defaults.r_cap),
    };
    let r_max = a.r_max.or(e.r_max).unwrap_or(40.0);
    let rows = near_critical_sweep(&law, &alphas, r_max, s.n(1000)?, s.seed(), opts, s.runner())?;
    let hash = s.hash(&json!({ "law": law, "alphas": alphas, "r_max": r_max, "options": opts }));
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "alpha",
        "lambda",
        "mean_visibility",
        "mean_visibility_stderr",
        "mean_star_area",
        "mean_star_area_stderr",
        "p_visible",
        "p_visible_stderr",
        "r_used",
        "stabilized",
        "n",
        "config_hash",
        "seed",
        "version",
    ])?;
    for row in &rows {
        let [vm, vs] = opt_cols(row.mean_visibility);
        let [am, as_] = opt_cols(row.mean_star_area);
        w.write_record([
            row.alpha.to_string(),
            row.lambda.to_string(),
            vm,
            vs,
            am,
            as_,
            row.p_visible.mean.to_string(),
            row.p_visible.stderr.to_string(),
            row.r_used.to_string(),
            row.stabilized.to_string(),
            row.p_visible.n.to_string(),
            hash.clone(),
            s.seed().to_string(),
            VERSION.to_string(),
        ])?;
    }
    let unstable: Vec<f64> = rows
        .iter()
        .filter(|r| r.alpha < 1.0 && !r.stabilized)
        .map(|r| r.alpha)
        .collect();
    let check = if unstable.is_empty() {
        Ok(())
    } else {
        Err(format!("proxy not stabilized for alpha = {unstable:?}"))
    };
    Ok(Outcome {
        table: finish_csv(w)?,
        report: Some(
            json!({ "command": "sweep", "config_hash": hash, "check": check_json(&check) }).to_string(),
        ),
        check: Some(check),
    })
}

fn janson(s: &Settings, a: &JansonArgs) -> Result<Outcome, CliError> {
    let e = &s.config.experiment;
    let radii = match (&a.radii, &e.radii) {
        (Some(list), _) => parse_list(list)?,
        (None, Some(v)) => v.clone(),
        (None, None) => vec![0.2, 0.1, 0.05],
    };
    if radii.is_empty() {
        return Err(CliError::config("the radius list is empty"));
    }
    let r = a.r.or(e.r).unwrap_or(1.0);
    let p = a.p.or(e.p).unwrap_or(0.5);
    let rows = janson_experiment(&radii, r, p, s.n(10_000)?, s.seed(), s.runner())?;
    let hash = s.hash(&json!({ "radii": radii, "r": r, "p": p }));
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "radius",
        "lambda",
        "condition",
        "mean_count",
        "p_hat",
        "stderr",
        "n",
        "config_hash",
        "seed",
        "version",
    ])?;
    for row in &rows {
        w.write_record([
            row.radius.to_string(),
            row.lambda.to_string(),
            janson_condition(row.lambda, row.radius, r)?.to_string(),
            row.mean_count.to_string(),
            row.p_hat.mean.to_string(),
            row.p_hat.stderr.to_string(),
            row.p_hat.n.to_string(),
            hash.clone(),
            s.seed().to_string(),
            VERSION.to_string(),
        ])?;
    }
    let tol = e.tolerance.unwrap_or(0.15);
    let last = rows.last().expect("radius list is non-empty");
    let gap = (last.p_hat.mean - p).abs();
    let check = if gap <= tol {
        Ok(())
    } else {
        Err(format!("|P̂ − p| = {gap} at R = {} exceeds {tol}", last.radius))
    };
    Ok(Outcome {
        table: finish_csv(w)?,
        report: Some(
            json!({ "command": "janson", "config_hash": hash, "check": check_json(&check) }).to_string(),
        ),
        check: Some(check),
    })
}

/// A dumped scene with the visibility computed from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDump {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicate: u64,
    pub r: f64,
    pub scene: BooleanScene,
    pub visibility: VisibilityResult,
}

pub fn load_scene(path: &Path) -> Result<SceneDump, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid scene file: {e}")))
}

fn scene(s: &Settings, a: &SceneArgs) -> Result<Outcome, CliError> {
    if let Some(path) = &a.load {
        let dump = load_scene(path)?;
        let visibility = visible_set(&dump.scene, dump.r)?;
        let check = if visibility == dump.visibility {
            Ok(())
        } else {
            Err("reloaded scene gives different visibility".to_string())
        };
        let again = SceneDump { visibility, ..dump };
        return Ok(Outcome {
            table: scene_json(&again)?,
            report: None,
            check: Some(check),
        });
    }
    let spec = &s.config.model;
    if spec.kind() != ModelKind::Boolean {
        return Err(CliError::config("scene dumps need the Boolean model"));
    }
    let Model::Boolean { lambda, law } = spec.resolve()? else {
        unreachable!("kind checked above")
    };
    let r = a.r.or(s.config.experiment.r).unwrap_or(4.0);
    let field = BallField::new(lambda, law.clone(), StreamKey::new(s.seed(), a.replicate))?;
    let scene = field.materialize(window_for_visibility(r, &law), DEFAULT_BUDGET)?;
    let visibility = visible_set(&scene, r)?;
    let dump = SceneDump {
        version: VERSION.to_string(),
        config_hash: s.hash(&json!({ "lambda": lambda, "law": law, "r": r, "replicate": a.replicate })),
        seed: s.seed(),
        replicate: a.replicate,
        r,
        scene,
        visibility,
    };
    Ok(Outcome {
        table: scene_json(&dump)?,
        report: None,
        check: None,
    })
}

fn scene_json(dump: &SceneDump) -> Result<String, CliError> {
    serde_json::to_string_pretty(dump)
        .map(|s| s + "\n")
        .map_err(|e| CliError::io(e.to_string()))
}
