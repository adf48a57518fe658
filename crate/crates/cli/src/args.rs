//! Flag parsing for the `boxen` binary.

use std::path::PathBuf;

use crate::commands::{
    Axis, CommandArgs, Estimator, GridSpec, ObjectiveKind, PredictArgs, SimulateArgs, SweepArgs,
    TuneArgs,
};
use crate::{CliError, CliResult};

pub const USAGE: &str = "\
boxen - box-constrained elastic net: solver, asymptotic theory, Monte-Carlo validation

USAGE:
  boxen <COMMAND> [FLAGS]

COMMANDS:
  predict    Print the theory prediction (tau*, beta*, theta*, MSE, phi_on, phi_off) as JSON
  simulate   Monte-Carlo trials of the solver; per-trial CSV plus a summary row
  sweep      Theory and simulation along one parameter axis; long-format CSV
  tune       Optimize (lambda1, lambda2) against a theory objective

FLAGS:
  --config PATH         flat key-value config file (see README)
  --manifest PATH       (simulate) reproduce a previous run from its manifest
  --set KEY=VALUE       override a config key (repeatable)
  --seed U64            base seed; trial t uses seed+t        [default: 1]
  --n N                 signal dimension                      [default: 500]
  --trials N            Monte-Carlo trials                    [default: 100]
  --quick               desk-scale preset: n=200, trials=50
  --axis NAME           (sweep) lambda1|lambda2|eps2|delta|snr
  --values a,b,c        (sweep) axis values
  --estimators LIST     (sweep) box_en,standard_en            [default: box_en]
  --objective NAME      (tune) min-mse|support-score          [default: min-mse]
  --omega W             (tune) support-score weight in [0,1]  [default: 0.5]
  --grid-l1 lo:hi:count (tune) log-spaced lambda1 grid        [default: 1e-2:10:12]
  --grid-l2 lo:hi:count (tune) log-spaced lambda2 grid        [default: 1e-2:10:12]
  --out PATH            write CSV here (manifest goes to PATH.manifest.json);
                        default is CSV on stdout, manifest on stderr
  --help                show this text

ENVIRONMENT:
  BOXEN_MAX_THREADS     cap the worker pool (default: all cores)

EXIT CODES:
  0 success, 1 validation error, 2 numerical failure (saddle/solver)
";

pub enum Parsed {
    Help,
    Run(Box<CommandArgs>),
}

struct FlagReader {
    tokens: std::vec::IntoIter<String>,
}

impl FlagReader {
    fn value(&mut self, flag: &str) -> CliResult<String> {
        self.tokens
            .next()
            .ok_or_else(|| CliError::Validation(format!("missing value for {flag}")))
    }
}

#[derive(Default)]
struct RawFlags {
    config: Option<PathBuf>,
    manifest: Option<PathBuf>,
    sets: Vec<(String, String)>,
    seed: Option<u64>,
    n: Option<usize>,
    trials: Option<usize>,
    quick: bool,
    axis: Option<String>,
    values: Option<String>,
    estimators: Option<String>,
    objective: Option<String>,
    omega: Option<f64>,
    grid_l1: Option<String>,
    grid_l2: Option<String>,
    out: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(flag: &str, raw: &str) -> CliResult<T> {
    raw.parse::<T>()
        .map_err(|_| CliError::Validation(format!("cannot parse value `{raw}` for {flag}")))
}

fn collect_flags(args: Vec<String>) -> CliResult<(RawFlags, bool)> {
    let mut raw = RawFlags::default();
    let mut help = false;
    let mut reader = FlagReader {
        tokens: args.into_iter(),
    };
    while let Some(tok) = reader.tokens.next() {
        match tok.as_str() {
            "--help" | "-h" => help = true,
            "--config" => raw.config = Some(PathBuf::from(reader.value("--config")?)),
            "--manifest" => raw.manifest = Some(PathBuf::from(reader.value("--manifest")?)),
            "--set" => {
                let kv = reader.value("--set")?;
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    CliError::Validation(format!("--set expects KEY=VALUE, got `{kv}`"))
                })?;
                raw.sets.push((k.trim().to_string(), v.trim().to_string()));
            }
            "--seed" => raw.seed = Some(parse_num("--seed", &reader.value("--seed")?)?),
            "--n" => raw.n = Some(parse_num("--n", &reader.value("--n")?)?),
            "--trials" => raw.trials = Some(parse_num("--trials", &reader.value("--trials")?)?),
            "--quick" => raw.quick = true,
            "--axis" => raw.axis = Some(reader.value("--axis")?),
            "--values" => raw.values = Some(reader.value("--values")?),
            "--estimators" => raw.estimators = Some(reader.value("--estimators")?),
            "--objective" => raw.objective = Some(reader.value("--objective")?),
            "--omega" => raw.omega = Some(parse_num("--omega", &reader.value("--omega")?)?),
            "--grid-l1" => raw.grid_l1 = Some(reader.value("--grid-l1")?),
            "--grid-l2" => raw.grid_l2 = Some(reader.value("--grid-l2")?),
            "--out" => raw.out = Some(PathBuf::from(reader.value("--out")?)),
            other => {
                return Err(CliError::Validation(format!("unknown flag `{other}`")));
            }
        }
    }
    Ok((raw, help))
}

fn require_config(raw: &RawFlags, command: &str) -> CliResult<PathBuf> {
    raw.config
        .clone()
        .ok_or_else(|| CliError::Validation(format!("{command} needs --config")))
}

pub fn parse(args: Vec<String>) -> CliResult<Parsed> {
    let mut it = args.into_iter();
    let command = match it.next() {
        Some(c) => c,
        None => return Ok(Parsed::Help),
    };
    if command == "--help" || command == "-h" || command == "help" {
        return Ok(Parsed::Help);
    }
    let (raw, help) = collect_flags(it.collect())?;
    if help {
        return Ok(Parsed::Help);
    }

    let cmd = match command.as_str() {
        "predict" => CommandArgs::Predict(PredictArgs {
            config: require_config(&raw, "predict")?,
            sets: raw.sets,
            out: raw.out,
        }),
        "simulate" => CommandArgs::Simulate(SimulateArgs {
            config: raw.config,
            manifest: raw.manifest,
            sets: raw.sets,
            seed: raw.seed,
            n: raw.n,
            trials: raw.trials,
            out: raw.out,
            quick: raw.quick,
        }),
        "sweep" => {
            let axis = Axis::parse(
                raw.axis
                    .as_deref()
                    .ok_or_else(|| CliError::Validation("sweep needs --axis".into()))?,
            )?;
            let values = raw
                .values
                .as_deref()
                .ok_or_else(|| CliError::Validation("sweep needs --values".into()))?
                .split(',')
                .map(|v| parse_num::<f64>("--values", v.trim()))
                .collect::<CliResult<Vec<f64>>>()?;
            let estimators = match raw.estimators.as_deref() {
                None => vec![Estimator::BoxEn],
                Some(list) => list
                    .split(',')
                    .map(|e| Estimator::parse(e.trim()))
                    .collect::<CliResult<Vec<_>>>()?,
            };
            CommandArgs::Sweep(SweepArgs {
                config: require_config(&raw, "sweep")?,
                sets: raw.sets,
                axis,
                values,
                estimators,
                seed: raw.seed,
                n: raw.n,
                trials: raw.trials,
                out: raw.out,
                quick: raw.quick,
            })
        }
        "tune" => CommandArgs::Tune(TuneArgs {
            config: require_config(&raw, "tune")?,
            sets: raw.sets,
            objective: match raw.objective.as_deref() {
                None => ObjectiveKind::MinMse,
                Some(o) => ObjectiveKind::parse(o)?,
            },
            omega: raw.omega,
            grid_l1: match raw.grid_l1.as_deref() {
                None => GridSpec::DEFAULT,
                Some(g) => GridSpec::parse(g)?,
            },
            grid_l2: match raw.grid_l2.as_deref() {
                None => GridSpec::DEFAULT,
                Some(g) => GridSpec::parse(g)?,
            },
            out: raw.out,
        }),
        other => {
            return Err(CliError::Validation(format!(
                "unknown command `{other}`; expected predict|simulate|sweep|tune"
            )))
        }
    };
    Ok(Parsed::Run(Box::new(cmd)))
}
