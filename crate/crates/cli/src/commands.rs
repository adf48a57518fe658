//! The four workflows behind the CLI subcommands.
//!
//! All tabular output is UTF-8 CSV with a `#`-prefixed comment carrying the
//! manifest content hash; single records are JSON on stdout. Column names and
//! order are fixed (pinned by golden tests). Trials dispatch onto the rayon
//! worker pool but results are collected and emitted in deterministic trial
//! order, so thread count never changes the bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use boxen::model::{empirical_mse, empirical_support, generate_instance, EmpiricalSummary};
use boxen::solver::{solve_box_en, solve_box_en_warm, SolveReport, SolverOptions};
use boxen::theory;
use boxen::tuning::{self, TuneGrid, TuneObjective};
use boxen::{Config64, Prior64};

use crate::config::{apply_overrides, build_config, load_config, render_config, FileConfig};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_N: usize = 500;
pub const DEFAULT_TRIALS: usize = 100;
pub const QUICK_N: usize = 200;
pub const QUICK_TRIALS: usize = 50;

pub const SIMULATE_HEADER: &str =
    "row,trial,mse,phi_on,phi_off,iters,kkt_residual,converged,se_mse,se_phi_on,se_phi_off";
pub const SWEEP_HEADER: &str = "axis,value,estimator,theory_mse,theory_phi_on,theory_phi_off,\
emp_mse,emp_phi_on,emp_phi_off,se_mse,se_phi_on,se_phi_off,status";
pub const TUNE_TRACE_HEADER: &str = "lambda1,lambda2,objective,status";
pub const PREDICT_HEADER: &str = "tau,beta,theta,mse,phi_on,phi_off";

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn resolve_config(path: &Path, sets: &[(String, String)]) -> CliResult<(FileConfig, String)> {
    let mut map = load_config(path)?;
    apply_overrides(&mut map, sets)?;
    let fc = build_config(&map)?;
    let canonical = render_config(&fc.cfg, &fc.prior);
    Ok((fc, canonical))
}

fn manifest_sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// CSV to `--out` (manifest sidecar next to it) or to stdout (manifest JSON
/// on stderr so stdout stays clean CSV).
fn emit_csv(out: Option<&Path>, csv: &str, manifest: &RunManifest) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)?;
            std::fs::write(manifest_sidecar(path), manifest.to_json())?;
        }
        None => {
            print!("{csv}");
            eprintln!("{}", manifest.to_json());
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn default_dims(n: Option<usize>, trials: Option<usize>, quick: bool) -> (usize, usize) {
    let (dn, dt) = if quick {
        (QUICK_N, QUICK_TRIALS)
    } else {
        (DEFAULT_N, DEFAULT_TRIALS)
    };
    (n.unwrap_or(dn), trials.unwrap_or(dt))
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct PredictArgs {
    pub config: PathBuf,
    pub sets: Vec<(String, String)>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PredictRecord {
    tau: f64,
    beta: f64,
    theta: f64,
    mse: f64,
    phi_on: f64,
    phi_off: f64,
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let (fc, canonical) = resolve_config(&args.config, &args.sets)?;
    if theory::xi_unreachable(&fc.cfg) {
        eprintln!(
            "note: xi = {} exceeds both box magnitudes; phi_on is identically zero",
            fc.cfg.xi
        );
    }
    let p = theory::predict(&fc.cfg, &fc.prior)?;
    let record = PredictRecord {
        tau: p.saddle.tau,
        beta: p.saddle.beta,
        theta: p.saddle.theta,
        mse: p.mse,
        phi_on: p.phi_on,
        phi_off: p.phi_off,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("record serialization cannot fail")
    );
    if let Some(out) = &args.out {
        let manifest = RunManifest::new("predict", canonical, 0, 0, 0);
        let mut csv = String::new();
        let _ = writeln!(csv, "# manifest-hash: {}", manifest.content_hash());
        let _ = writeln!(csv, "{PREDICT_HEADER}");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            record.tau, record.beta, record.theta, record.mse, record.phi_on, record.phi_off
        );
        emit_csv(Some(out), &csv, &manifest)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub sets: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub quick: bool,
}

struct TrialRow {
    mse: f64,
    phi_on: f64,
    phi_off: f64,
    iters: usize,
    kkt: f64,
    converged: bool,
}

fn run_trials(
    cfg: &Config64,
    prior: &Prior64,
    n: usize,
    trials: usize,
    seed: u64,
) -> CliResult<Vec<TrialRow>> {
    let opts = SolverOptions::default();
    (0..trials)
        .into_par_iter()
        .map(|t| -> CliResult<TrialRow> {
            let inst = generate_instance(cfg, prior, n, seed.wrapping_add(t as u64))?;
            let rep = solve_box_en(&inst.a, &inst.y, cfg, &opts)?;
            let mse = empirical_mse(&rep.xhat, &inst.x0)?;
            let (phi_on, phi_off) = empirical_support(&rep.xhat, &inst.x0, cfg.xi)?;
            Ok(TrialRow {
                mse,
                phi_on,
                phi_off,
                iters: rep.iters,
                kkt: rep.kkt_residual,
                converged: rep.converged,
            })
        })
        .collect()
}

fn simulate_csv(rows: &[TrialRow], manifest: &RunManifest) -> CliResult<(String, usize)> {
    let mses: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let ons: Vec<f64> = rows.iter().map(|r| r.phi_on).collect();
    let offs: Vec<f64> = rows.iter().map(|r| r.phi_off).collect();
    let summary = EmpiricalSummary::from_trials(&mses, &ons, &offs)?;
    let mean_iters = rows.iter().map(|r| r.iters as f64).sum::<f64>() / rows.len() as f64;
    let max_kkt = rows.iter().map(|r| r.kkt).fold(0.0f64, f64::max);
    let converged = rows.iter().filter(|r| r.converged).count();

    let mut csv = String::new();
    let _ = writeln!(csv, "# manifest-hash: {}", manifest.content_hash());
    let _ = writeln!(csv, "{SIMULATE_HEADER}");
    for (t, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "trial,{t},{},{},{},{},{},{},,,",
            r.mse, r.phi_on, r.phi_off, r.iters, r.kkt, r.converged
        );
    }
    let _ = writeln!(
        csv,
        "summary,{},{},{},{},{},{},{},{},{},{}",
        rows.len(),
        summary.mse,
        summary.phi_on,
        summary.phi_off,
        mean_iters,
        max_kkt,
        converged,
        summary.std_err_mse,
        summary.std_err_on,
        summary.std_err_off
    );
    Ok((csv, rows.len() - converged))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let (fc, canonical, seed, n, trials) = match (&args.manifest, &args.config) {
        (Some(mpath), None) => {
            if !args.sets.is_empty()
                || args.seed.is_some()
                || args.n.is_some()
                || args.trials.is_some()
            {
                return Err(CliError::Validation(
                    "--manifest reproduces a previous run; it cannot be combined with \
                     --set/--seed/--n/--trials"
                        .into(),
                ));
            }
            let m = RunManifest::load(mpath)?;
            if m.command != "simulate" {
                return Err(CliError::Validation(format!(
                    "manifest records command `{}`, not `simulate`",
                    m.command
                )));
            }
            let map = crate::config::parse_kv(&m.config)?;
            let fc = build_config(&map)?;
            let canonical = render_config(&fc.cfg, &fc.prior);
            (fc, canonical, m.seed, m.n, m.trials)
        }
        (None, Some(cpath)) => {
            let (fc, canonical) = resolve_config(cpath, &args.sets)?;
            let (n, trials) = default_dims(args.n, args.trials, args.quick);
            (fc, canonical, args.seed.unwrap_or(DEFAULT_SEED), n, trials)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either --config or --manifest, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "simulate needs --config (or --manifest)".into(),
            ))
        }
    };
    if n < 10 {
        return Err(CliError::Validation(format!("need n >= 10, got {n}")));
    }
    if trials < 1 {
        return Err(CliError::Validation("need at least one trial".into()));
    }

    let rows = run_trials(&fc.cfg, &fc.prior, n, trials, seed)?;
    let manifest = RunManifest::new("simulate", canonical, seed, n, trials);
    let (csv, nonconverged) = simulate_csv(&rows, &manifest)?;
    if nonconverged > 0 {
        eprintln!("warning: {nonconverged} of {trials} trials did not converge");
    }
    emit_csv(args.out.as_deref(), &csv, &manifest)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lambda1,
    Lambda2,
    Eps2,
    Delta,
    Snr,
}

impl Axis {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "lambda1" => Ok(Axis::Lambda1),
            "lambda2" => Ok(Axis::Lambda2),
            "eps2" => Ok(Axis::Eps2),
            "delta" => Ok(Axis::Delta),
            "snr" => Ok(Axis::Snr),
            other => Err(CliError::Validation(format!(
                "unknown axis `{other}`; expected lambda1|lambda2|eps2|delta|snr"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Lambda1 => "lambda1",
            Axis::Lambda2 => "lambda2",
            Axis::Eps2 => "eps2",
            Axis::Delta => "delta",
            Axis::Snr => "snr",
        }
    }

    fn apply(&self, mut cfg: Config64, v: f64) -> Config64 {
        match self {
            Axis::Lambda1 => cfg.lambda1 = v,
            Axis::Lambda2 => cfg.lambda2 = v,
            Axis::Eps2 => cfg.eps2 = v,
            Axis::Delta => cfg.delta = v,
            Axis::Snr => cfg.sigma_z2 = cfg.kappa / v,
        }
        cfg
    }

    /// Regularizer axes leave the random instance unchanged, enabling
    /// warm-started continuation along the sweep.
    fn affects_instance(&self) -> bool {
        !matches!(self, Axis::Lambda1 | Axis::Lambda2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    BoxEn,
    StandardEn,
}

impl Estimator {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "box_en" => Ok(Estimator::BoxEn),
            "standard_en" => Ok(Estimator::StandardEn),
            other => Err(CliError::Validation(format!(
                "unknown estimator `{other}`; expected box_en|standard_en"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::BoxEn => "box_en",
            Estimator::StandardEn => "standard_en",
        }
    }

    fn effective_config(&self, cfg: &Config64) -> Config64 {
        match self {
            Estimator::BoxEn => *cfg,
            Estimator::StandardEn => cfg.without_box(),
        }
    }
}

#[derive(Debug)]
pub struct SweepArgs {
    pub config: PathBuf,
    pub sets: Vec<(String, String)>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub quick: bool,
}

#[derive(Clone, Copy, Default)]
struct PointMetrics {
    mse: f64,
    phi_on: f64,
    phi_off: f64,
    converged: bool,
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    if args.values.is_empty() {
        return Err(CliError::Validation("sweep needs a nonempty --values list".into()));
    }
    if args.estimators.is_empty() {
        return Err(CliError::Validation("sweep needs at least one estimator".into()));
    }
    let (fc, canonical) = resolve_config(&args.config, &args.sets)?;
    let (n, trials) = default_dims(args.n, args.trials, args.quick);
    let seed = args.seed.unwrap_or(DEFAULT_SEED);

    // per-value configs; invalid points stay in the output with a status
    let point_cfgs: Vec<Result<Config64, String>> = args
        .values
        .iter()
        .map(|&v| {
            let cfg = args.axis.apply(fc.cfg, v);
            cfg.validate().map(|_| cfg).map_err(|e| e.to_string())
        })
        .collect();

    // theory predictions per (value, estimator)
    type TheoryCell = Result<(f64, f64, f64), String>;
    let theory_results: Vec<Vec<TheoryCell>> = point_cfgs
        .iter()
        .map(|cfg_v| {
            args.estimators
                .iter()
                .map(|est| match cfg_v {
                    Ok(cfg) => theory::predict(&est.effective_config(cfg), &fc.prior)
                        .map(|p| (p.mse, p.phi_on, p.phi_off))
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                })
                .collect()
        })
        .collect();

    // empirical runs: parallel over trials, sequential over values within a
    // trial so regularizer sweeps can warm start from the previous solution
    let opts = SolverOptions::default();
    let per_trial: Vec<CliResult<Vec<Vec<Option<PointMetrics>>>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.wrapping_add(t as u64);
            let mut shared_inst = None;
            let mut warm: Vec<Option<Vec<f64>>> = vec![None; args.estimators.len()];
            let mut out = Vec::with_capacity(args.values.len());
            for cfg_v in &point_cfgs {
                let cfg = match cfg_v {
                    Ok(c) => c,
                    Err(_) => {
                        out.push(vec![None; args.estimators.len()]);
                        continue;
                    }
                };
                let inst = if args.axis.affects_instance() {
                    generate_instance(cfg, &fc.prior, n, trial_seed)?
                } else {
                    if shared_inst.is_none() {
                        shared_inst = Some(generate_instance(cfg, &fc.prior, n, trial_seed)?);
                    }
                    shared_inst.clone().unwrap()
                };
                let mut row = Vec::with_capacity(args.estimators.len());
                for (e_idx, est) in args.estimators.iter().enumerate() {
                    let ecfg = est.effective_config(cfg);
                    let rep: SolveReport<f64> = match (&warm[e_idx], args.axis.affects_instance())
                    {
                        (Some(x0), false) => {
                            solve_box_en_warm(&inst.a, &inst.y, &ecfg, &opts, x0)?
                        }
                        _ => solve_box_en(&inst.a, &inst.y, &ecfg, &opts)?,
                    };
                    let mse = empirical_mse(&rep.xhat, &inst.x0)?;
                    let (phi_on, phi_off) = empirical_support(&rep.xhat, &inst.x0, cfg.xi)?;
                    if !args.axis.affects_instance() {
                        warm[e_idx] = Some(rep.xhat.clone());
                    }
                    row.push(Some(PointMetrics {
                        mse,
                        phi_on,
                        phi_off,
                        converged: rep.converged,
                    }));
                }
                out.push(row);
            }
            Ok(out)
        })
        .collect();
    let per_trial: Vec<Vec<Vec<Option<PointMetrics>>>> =
        per_trial.into_iter().collect::<CliResult<_>>()?;

    let manifest = RunManifest::new("sweep", canonical, seed, n, trials);
    let mut csv = String::new();
    let _ = writeln!(csv, "# manifest-hash: {}", manifest.content_hash());
    let _ = writeln!(csv, "{SWEEP_HEADER}");
    for (v_idx, &value) in args.values.iter().enumerate() {
        for (e_idx, est) in args.estimators.iter().enumerate() {
            let theory_cell = &theory_results[v_idx][e_idx];
            let samples: Vec<PointMetrics> = per_trial
                .iter()
                .filter_map(|t| t[v_idx][e_idx])
                .collect();
            let mut status = Vec::new();
            let (t_mse, t_on, t_off) = match theory_cell {
                Ok((m, on, off)) => (Some(*m), Some(*on), Some(*off)),
                Err(e) => {
                    status.push(format!("theory_failed: {}", e.replace(',', ";")));
                    (None, None, None)
                }
            };
            let emp = if samples.is_empty() {
                if let Err(e) = &point_cfgs[v_idx] {
                    status.push(format!("invalid_point: {}", e.replace(',', ";")));
                }
                None
            } else {
                let mses: Vec<f64> = samples.iter().map(|s| s.mse).collect();
                let ons: Vec<f64> = samples.iter().map(|s| s.phi_on).collect();
                let offs: Vec<f64> = samples.iter().map(|s| s.phi_off).collect();
                let nonconv = samples.iter().filter(|s| !s.converged).count();
                if nonconv > 0 {
                    status.push(format!("nonconverged:{nonconv}"));
                }
                Some(EmpiricalSummary::from_trials(&mses, &ons, &offs)?)
            };
            let status = if status.is_empty() {
                "ok".to_string()
            } else {
                status.join(";")
            };
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                args.axis.name(),
                value,
                est.name(),
                fmt_opt(t_mse),
                fmt_opt(t_on),
                fmt_opt(t_off),
                fmt_opt(emp.map(|s| s.mse)),
                fmt_opt(emp.map(|s| s.phi_on)),
                fmt_opt(emp.map(|s| s.phi_off)),
                fmt_opt(emp.map(|s| s.std_err_mse)),
                fmt_opt(emp.map(|s| s.std_err_on)),
                fmt_opt(emp.map(|s| s.std_err_off)),
                status
            );
        }
    }
    emit_csv(args.out.as_deref(), &csv, &manifest)
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    MinMse,
    SupportScore,
}

impl ObjectiveKind {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "min-mse" => Ok(ObjectiveKind::MinMse),
            "support-score" => Ok(ObjectiveKind::SupportScore),
            other => Err(CliError::Validation(format!(
                "unknown objective `{other}`; expected min-mse|support-score"
            ))),
        }
    }
}

/// `lo:hi:count`, expanded log-spaced.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub const DEFAULT: GridSpec = GridSpec {
        lo: 1e-2,
        hi: 10.0,
        count: 12,
    };

    pub fn parse(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Validation(format!(
                "grid spec `{s}` must look like lo:hi:count"
            )));
        }
        let lo = parts[0]
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("grid spec `{s}`: bad lower bound")))?;
        let hi = parts[1]
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("grid spec `{s}`: bad upper bound")))?;
        let count = parts[2]
            .parse::<usize>()
            .map_err(|_| CliError::Validation(format!("grid spec `{s}`: bad count")))?;
        Ok(GridSpec { lo, hi, count })
    }

    fn expand(&self) -> CliResult<Vec<f64>> {
        TuneGrid::log_spaced(self.lo, self.hi, self.count).map_err(CliError::from)
    }
}

#[derive(Debug)]
pub struct TuneArgs {
    pub config: PathBuf,
    pub sets: Vec<(String, String)>,
    pub objective: ObjectiveKind,
    pub omega: Option<f64>,
    pub grid_l1: GridSpec,
    pub grid_l2: GridSpec,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TuneRecord {
    objective: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    lambda1_star: f64,
    lambda2_star: f64,
    objective_value: f64,
    evaluations: usize,
}

pub fn cmd_tune(args: &TuneArgs) -> CliResult<()> {
    let (fc, canonical) = resolve_config(&args.config, &args.sets)?;
    // omega defaults to an even trade-off; a tool default, not a modeling one
    let (objective, obj_name, omega) = match args.objective {
        ObjectiveKind::MinMse => (TuneObjective::MinMse, "min_mse", None),
        ObjectiveKind::SupportScore => {
            let omega = args.omega.unwrap_or(0.5);
            (
                TuneObjective::SupportScore { omega },
                "support_score",
                Some(omega),
            )
        }
    };
    let grid = TuneGrid {
        lambda1: args.grid_l1.expand()?,
        lambda2: args.grid_l2.expand()?,
    };
    let res = tuning::tune(&fc.cfg, &fc.prior, objective, &grid)?;
    let record = TuneRecord {
        objective: obj_name,
        omega,
        lambda1_star: res.lambda1_star,
        lambda2_star: res.lambda2_star,
        objective_value: res.objective_value,
        evaluations: res.grid_trace.len(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("record serialization cannot fail")
    );
    if let Some(out) = &args.out {
        let manifest = RunManifest::new("tune", canonical, 0, 0, 0);
        let mut csv = String::new();
        let _ = writeln!(csv, "# manifest-hash: {}", manifest.content_hash());
        let _ = writeln!(csv, "{TUNE_TRACE_HEADER}");
        for p in &res.grid_trace {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                p.lambda1,
                p.lambda2,
                fmt_opt(p.objective),
                if p.objective.is_some() { "ok" } else { "failed" }
            );
        }
        emit_csv(Some(out), &csv, &manifest)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub enum CommandArgs {
    Predict(PredictArgs),
    Simulate(SimulateArgs),
    Sweep(SweepArgs),
    Tune(TuneArgs),
}

pub fn run(cmd: CommandArgs) -> CliResult<()> {
    match cmd {
        CommandArgs::Predict(a) => cmd_predict(&a),
        CommandArgs::Simulate(a) => cmd_simulate(&a),
        CommandArgs::Sweep(a) => cmd_sweep(&a),
        CommandArgs::Tune(a) => cmd_tune(&a),
    }
}
