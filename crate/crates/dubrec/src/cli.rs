//! Command-line interface. Settings resolve in order: built-in defaults, the
//! `--config` file, subcommand flags, then `--set key=value` pairs.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentConfig, OUT_ENV};
use crate::error::{CliError, Result};
use crate::output::ResultRow;
use crate::run::{self, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "dubrec", version, about = "Debiased recommendation experiments")]
pub struct Cli {
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,

    /// Extra `section.key=value` override; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and its logged and uniform feedback logs.
    Generate(RunArgs),
    /// Train the selected methods and report test metrics.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Save each trained `M_c` under this directory.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Grid search over ranks, regularization and alignment weights.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        ranks: Option<String>,
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long)]
        gammas: Option<String>,
    },
    /// Train objective variants with terms removed.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated terms to drop, e.g. `a,e2`.
        #[arg(long)]
        drop: Option<String>,
    },
    /// Retrain at several levels of one data factor.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "positive-ratio")]
        axis: Axis,
        #[arg(long)]
        levels: Option<String>,
    },
    /// Check the probabilistic upper bound on fresh synthetic worlds.
    VerifyBounds {
        #[arg(long)]
        trials: Option<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        eta: Option<String>,
        /// Hypothesis count, or `auto`.
        #[arg(long)]
        hypotheses: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a saved model on the test split.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train and evaluate using only splits of the biased log.
    GeneralEval(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    PositiveRatio,
    StFraction,
}

/// Flags shared by the training subcommands; each maps to one config key.
#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// Comma-separated methods.
    #[arg(long, alias = "methods")]
    pub method: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, alias = "seeds")]
    pub seed: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub rank: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long = "train-loss")]
    pub train_loss: Option<String>,
    #[arg(long)]
    pub users: Option<String>,
    #[arg(long)]
    pub items: Option<String>,
    #[arg(long)]
    pub logged_file: Option<PathBuf>,
    #[arg(long)]
    pub uniform_file: Option<PathBuf>,
    /// Rating threshold for explicit logs, or `binary`.
    #[arg(long)]
    pub threshold: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        push("method.methods", &self.method);
        push("run.seeds", &self.seed);
        push("method.gamma", &self.gamma);
        push("method.lambda", &self.lambda);
        push("train.rank", &self.rank);
        push("train.lr", &self.lr);
        push("train.epochs", &self.epochs);
        push("train.batch", &self.batch);
        push("method.loss", &self.train_loss);
        push("data.users", &self.users);
        push("data.items", &self.items);
        push("data.threshold", &self.threshold);
        let files = [
            ("data.logged_file", &self.logged_file),
            ("data.uniform_file", &self.uniform_file),
        ];
        for (k, p) in files {
            if let Some(p) = p {
                out.push((k, p.display().to_string()));
            }
        }
        if self.logged_file.is_some() || self.uniform_file.is_some() {
            out.push(("data.source", "files".into()));
        }
        out
    }
}

fn flag(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key, v.clone()));
    }
}

/// Resolves the configuration for a parsed command line.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let mut overrides = Vec::new();
    match &cli.command {
        Command::Generate(r) | Command::GeneralEval(r) => overrides = r.overrides(),
        Command::Train { run, .. } | Command::Evaluate { run, .. } => overrides = run.overrides(),
        Command::Grid {
            run,
            ranks,
            lambdas,
            gammas,
        } => {
            overrides = run.overrides();
            flag(&mut overrides, "grid.ranks", ranks);
            flag(&mut overrides, "grid.lambdas", lambdas);
            flag(&mut overrides, "grid.gammas", gammas);
        }
        Command::Ablate { run, drop } => {
            overrides = run.overrides();
            flag(&mut overrides, "method.drop", drop);
        }
        Command::Sweep { run, axis, levels } => {
            overrides = run.overrides();
            let key = match axis {
                Axis::PositiveRatio => "sweep.positive_ratios",
                Axis::StFraction => "sweep.st_fractions",
            };
            flag(&mut overrides, key, levels);
        }
        Command::VerifyBounds {
            trials,
            variant,
            loss,
            eta,
            hypotheses,
            run,
        } => {
            flag(&mut overrides, "bounds.trials", trials);
            flag(&mut overrides, "bounds.variant", variant);
            flag(&mut overrides, "bounds.loss", loss);
            flag(&mut overrides, "bounds.eta", eta);
            flag(&mut overrides, "bounds.hypotheses", hypotheses);
            flag(&mut overrides, "bounds.users", &run.users);
            flag(&mut overrides, "bounds.items", &run.items);
            let rest = RunArgs {
                users: None,
                items: None,
                ..run.clone()
            };
            overrides.extend(rest.overrides());
        }
    }
    for (k, v) in overrides {
        cfg.set(k, &v)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_rows(rows: &[ResultRow]) {
    println!("method\tseed\tvariant\tselected\ttest_auc\ttest_ndcg");
    for r in rows {
        println!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
            r.method,
            r.seed,
            if r.variant.is_empty() { "-" } else { &r.variant },
            u8::from(r.selected),
            r.metrics.auc,
            r.metrics.ndcg
        );
    }
}

/// Parses `args` and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string().trim_end().to_owned())),
    };
    let cfg = resolve(&cli)?;
    match &cli.command {
        Command::Generate(_) => {
            let dir = run::generate(&cfg, cfg.seeds[0])?;
            println!("world written to {}", dir.display());
        }
        Command::Train { save_model, .. } => print_rows(&run::train_all(&cfg, save_model.as_deref())?),
        Command::Grid { .. } => print_rows(&run::grid(&cfg)?),
        Command::Ablate { .. } => print_rows(&run::ablate(&cfg)?),
        Command::Sweep { axis, .. } => {
            let axis = match axis {
                Axis::PositiveRatio => SweepAxis::PositiveRatio,
                Axis::StFraction => SweepAxis::RandomizedFraction,
            };
            print_rows(&run::sweep(&cfg, axis)?)
        }
        Command::VerifyBounds { .. } => {
            let (_, cov) = run::verify_bounds(&cfg)?;
            println!(
                "coverage {}/{} = {:.4} (eta = {})",
                cov.held,
                cov.trials,
                cov.fraction(),
                cfg.bounds.eta
            );
        }
        Command::Evaluate { model, .. } => {
            println!("seed\ttest_auc\ttest_ndcg\tp_at_5\tr_at_5");
            for (seed, m) in run::evaluate_checkpoint(&cfg, model)? {
                println!(
                    "{seed}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                    m.auc,
                    m.ndcg,
                    m.precision(5).unwrap_or(f64::NAN),
                    m.recall(5).unwrap_or(f64::NAN)
                );
            }
        }
        Command::GeneralEval(_) => print_rows(&run::general_eval(&cfg)?),
    }
    Ok(())
}
