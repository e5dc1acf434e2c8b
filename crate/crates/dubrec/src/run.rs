//! Experiment pipelines behind the subcommands.

use std::path::Path;

use dubrec_core::bounds::{theorem_report, BoundConfig, DEFAULT_RESAMPLES};
use dubrec_core::data::{
    remove_overlap, split_general, split_randomized, subsample_fraction, subsample_positive_ratio,
};
use dubrec_core::metrics::{evaluate, EvalOptions};
use dubrec_core::rng::derive_seed;
use dubrec_core::scenario::{build, BenchmarkSpec};
use dubrec_core::train::{grid_cells, pretrain, pretrain_models, refine, select_best, train, Phase};
use dubrec_core::world::{generate_world, log_feedback, Policy, WorldSpec};
use dubrec_core::{
    BoundReport, Dataset, FactorModel, Method, MethodConfig, MetricsReport, SyntheticWorld, Term, TrainConfig,
    TrainResult,
};
use rayon::prelude::*;

use crate::checkpoint::{load_model, save_model};
use crate::config::{config_hash, run_key, ExperimentConfig, Source};
use crate::error::{CliError, Result};
use crate::load::{load_logs, LoadedLogs};
use crate::output::{write_bounds, write_history, BoundRow, ResultRow, ResultsWriter};
use crate::world_io::save_world;

/// The four datasets of one seeded run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub s_c: Dataset,
    pub s_t: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub world: Option<SyntheticWorld>,
}

/// Synthetic benchmark spec for `seed`, built from the configured template.
pub fn benchmark_spec(cfg: &ExperimentConfig, seed: u64) -> BenchmarkSpec {
    cfg.data.benchmark(seed)
}

/// Produces per-seed datasets; file logs are read once.
#[derive(Debug)]
pub struct DataSource {
    files: Option<LoadedLogs>,
}

impl DataSource {
    pub fn open(cfg: &ExperimentConfig) -> Result<Self> {
        let files = match cfg.data.source {
            Source::Synthetic => None,
            Source::Files => {
                let (Some(c), Some(t)) = (&cfg.data.logged_file, &cfg.data.uniform_file) else {
                    return Err(CliError::Config("file data needs data.logged_file and data.uniform_file".into()));
                };
                Some(load_logs(c, t, cfg.data.label_rule)?)
            }
        };
        Ok(Self { files })
    }

    pub fn logs(&self) -> Option<&LoadedLogs> {
        self.files.as_ref()
    }

    pub fn prepare(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
        match &self.files {
            None => {
                let b = build(&benchmark_spec(cfg, seed))?;
                Ok(Prepared {
                    s_c: b.s_c,
                    s_t: b.s_t,
                    validation: b.validation,
                    test: b.test,
                    world: Some(b.world),
                })
            }
            Some(logs) => {
                let (s_t, validation, test) = split_randomized(&logs.uniform, cfg.data.split, seed)?;
                Ok(Prepared {
                    s_c: remove_overlap(&logs.logged, &logs.uniform)?,
                    s_t,
                    validation,
                    test,
                    world: None,
                })
            }
        }
    }
}

pub fn eval_report(model: &FactorModel, data: &Prepared) -> Result<MetricsReport> {
    Ok(evaluate(
        model,
        &data.test,
        &[&data.s_c, &data.s_t, &data.validation],
        &EvalOptions::default(),
    )?)
}

/// Static description of one job.
#[derive(Debug, Clone)]
pub struct Job<'a> {
    pub command: &'a str,
    pub variant: String,
    pub method: MethodConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Job<'_> {
    fn hash(&self, cfg: &ExperimentConfig) -> String {
        config_hash(&run_key(&cfg.data_key(), &self.train, &self.method, &self.variant))
    }

    fn row(&self, cfg: &ExperimentConfig, r: &TrainResult, metrics: MetricsReport, selected: bool) -> ResultRow {
        ResultRow {
            command: self.command.to_owned(),
            method: self.method.method.name().to_owned(),
            seed: self.seed,
            config_hash: self.hash(cfg),
            variant: self.variant.clone(),
            rank: self.train.rank,
            gamma: if self.method.method == Method::CausE { self.method.gamma_tc } else { self.method.gamma },
            lambda_c: self.method.lambda_c,
            lambda_t: self.method.lambda_t,
            selected,
            best_epoch: r.best_epoch,
            best_validation: r.best_validation,
            metrics,
        }
    }

    fn history_name(&self, cfg: &ExperimentConfig) -> String {
        format!("{}_{}_{}_s{}", self.command, self.method.method.name(), self.hash(cfg), self.seed)
    }
}

fn method_config(cfg: &ExperimentConfig, method: Method) -> MethodConfig {
    MethodConfig {
        method,
        ..cfg.method.clone()
    }
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone()
    }
}

/// Trains, evaluates and records one job.
fn record(
    cfg: &ExperimentConfig,
    out: &mut ResultsWriter,
    job: &Job<'_>,
    result: &TrainResult,
    data: &Prepared,
    selected: bool,
) -> Result<ResultRow> {
    let row = job.row(cfg, result, eval_report(&result.model_c, data)?, selected);
    write_history(&cfg.out, &job.history_name(cfg), &result.history)?;
    out.write(&row)?;
    Ok(row)
}

/// `generate`: writes the seeded world plus its logged and uniform logs.
pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<std::path::PathBuf> {
    let spec = benchmark_spec(cfg, seed);
    let b = build(&spec)?;
    let dir = cfg.out.join("world");
    save_world(&dir, &b.world)?;
    let uniform = b.s_t.union(&b.validation, dubrec_core::Regime::Randomized)?;
    let uniform = uniform.union(&b.test, dubrec_core::Regime::Randomized)?;
    write_tsv(&dir.join("logged.tsv"), &b.s_c)?;
    write_tsv(&dir.join("uniform.tsv"), &uniform)?;
    Ok(dir)
}

fn write_tsv(path: &Path, d: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .from_path(path)?;
    for x in d.interactions() {
        w.write_record([x.user.to_string(), x.item.to_string(), x.label.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `train`: every configured method on every seed.
pub fn train_all(cfg: &ExperimentConfig, save_models: Option<&Path>) -> Result<Vec<ResultRow>> {
    let source = DataSource::open(cfg)?;
    let mut out = ResultsWriter::open(&cfg.out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let data = source.prepare(cfg, seed)?;
        for &method in &cfg.methods {
            let job = Job {
                command: "train",
                variant: String::new(),
                method: method_config(cfg, method),
                train: train_config(cfg, seed),
                seed,
            };
            let r = train(&job.method, &job.train, &data.s_c, &data.s_t, &data.validation)?;
            if let Some(dir) = save_models {
                save_model(&dir.join(format!("{}_s{seed}", method.name())), &r.model_c, seed)?;
            }
            rows.push(record(cfg, &mut out, &job, &r, &data, true)?);
        }
    }
    Ok(rows)
}

/// `grid`: every cell of the grid per method and seed, cells in parallel; the
/// best validation cell is flagged `selected`.
pub fn grid(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let source = DataSource::open(cfg)?;
    let mut out = ResultsWriter::open(&cfg.out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let data = source.prepare(cfg, seed)?;
        for &method in &cfg.methods {
            let cells = grid_cells(&method_config(cfg, method), &train_config(cfg, seed), &cfg.grid)?;
            let results: Vec<TrainResult> = cells
                .par_iter()
                .map(|c| train(&c.method, &c.train, &data.s_c, &data.s_t, &data.validation))
                .collect::<dubrec_core::Result<_>>()?;
            let scores: Vec<f64> = results.iter().map(|r| r.best_validation).collect();
            let best = select_best(&scores).expect("grid is non-empty");
            for (c, r) in cells.iter().zip(&results) {
                let job = Job {
                    command: "grid",
                    variant: format!("cell{}", c.index),
                    method: c.method.clone(),
                    train: c.train.clone(),
                    seed,
                };
                rows.push(record(cfg, &mut out, &job, r, &data, c.index == best)?);
            }
        }
    }
    Ok(rows)
}

/// The S_t-side term each two-model objective uses.
fn e_term(method: Method) -> Term {
    if method == Method::DubSeparability {
        Term::E2
    } else {
        Term::E1
    }
}

/// Ablation variants: the full objective, then without the `S_t`-side term,
/// then without it and term (a). An explicit drop list replaces the last two.
pub fn ablation_variants(method: Method, drop: &[Term]) -> Vec<(String, Vec<Term>)> {
    let name = |ts: &[Term]| format!("w/o {}", ts.iter().map(|t| t.name()).collect::<Vec<_>>().join("+"));
    if !drop.is_empty() {
        return vec![("full".into(), Vec::new()), (name(drop), drop.to_vec())];
    }
    let e = e_term(method);
    vec![
        ("full".into(), Vec::new()),
        (name(&[e]), vec![e]),
        (name(&[Term::A, e]), vec![Term::A, e]),
    ]
}

/// `ablate`: refines one pretrained pair per seed under every variant.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let source = DataSource::open(cfg)?;
    let mut out = ResultsWriter::open(&cfg.out)?;
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        if !method.needs_model_t() {
            return Err(CliError::Config(format!("{method} has no terms to ablate")));
        }
    }
    for &seed in &cfg.seeds {
        let data = source.prepare(cfg, seed)?;
        for &method in &cfg.methods {
            let base = method_config(cfg, method);
            let tc = train_config(cfg, seed);
            let pre = pretrain_models(&base, &tc, &data.s_c, &data.s_t, &data.validation)?;
            for (variant, dropped) in ablation_variants(method, &cfg.method.dropped) {
                let m = MethodConfig {
                    dropped,
                    ..base.clone()
                };
                let r = refine(&m, &tc, &data.s_c, &data.s_t, &data.validation, &pre)?;
                let job = Job {
                    command: "ablate",
                    variant,
                    method: m,
                    train: tc.clone(),
                    seed,
                };
                rows.push(record(cfg, &mut out, &job, &r, &data, true)?);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PositiveRatio,
    RandomizedFraction,
}

/// Largest `S_c` size every positive-ratio level can be drawn at.
pub fn common_sweep_size(s_c: &Dataset, ratios: &[f64]) -> usize {
    let (pos, neg) = (s_c.positives() as f64, s_c.negatives() as f64);
    ratios
        .iter()
        .map(|&r| {
            let by_pos = if r > 0.0 { pos / r } else { f64::INFINITY };
            let by_neg = if r < 1.0 { neg / (1.0 - r) } else { f64::INFINITY };
            by_pos.min(by_neg).floor() as usize
        })
        .min()
        .unwrap_or(0)
        .min(s_c.len())
}

/// `sweep`: retrains every method at each level of one data factor.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis) -> Result<Vec<ResultRow>> {
    let source = DataSource::open(cfg)?;
    let mut out = ResultsWriter::open(&cfg.out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let data = source.prepare(cfg, seed)?;
        let levels = match axis {
            SweepAxis::PositiveRatio => &cfg.sweep.positive_ratios,
            SweepAxis::RandomizedFraction => &cfg.sweep.st_fractions,
        };
        let total = common_sweep_size(&data.s_c, &cfg.sweep.positive_ratios);
        for &level in levels {
            let mut d = data.clone();
            let variant = match axis {
                SweepAxis::PositiveRatio => {
                    d.s_c = subsample_positive_ratio(&data.s_c, level, total, derive_seed(seed, 21))?;
                    format!("positive_ratio={level}")
                }
                SweepAxis::RandomizedFraction => {
                    d.s_t = subsample_fraction(&data.s_t, level, derive_seed(seed, 22))?;
                    format!("st_fraction={level}")
                }
            };
            for &method in &cfg.methods {
                let job = Job {
                    command: "sweep",
                    variant: variant.clone(),
                    method: method_config(cfg, method),
                    train: train_config(cfg, seed),
                    seed,
                };
                let r = train(&job.method, &job.train, &d.s_c, &d.s_t, &d.validation)?;
                rows.push(record(cfg, &mut out, &job, &r, &d, true)?);
            }
        }
    }
    Ok(rows)
}

/// `evaluate`: scores a saved model on each seed's test split.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, model_dir: &Path) -> Result<Vec<(u64, MetricsReport)>> {
    let (model, _) = load_model(model_dir)?;
    let source = DataSource::open(cfg)?;
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let data = source.prepare(cfg, seed)?;
        if model.n_users() != data.test.n_users() || model.n_items() != data.test.n_items() {
            return Err(CliError::Data(format!(
                "model is {}x{} but the data grid is {}x{}",
                model.n_users(),
                model.n_items(),
                data.test.n_users(),
                data.test.n_items()
            )));
        }
        out.push((seed, eval_report(&model, &data)?));
    }
    Ok(out)
}

/// `general-eval`: splits `S_c` 5:2:3 and validates and tests on the biased log.
pub fn general_eval(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let source = DataSource::open(cfg)?;
    let mut out = ResultsWriter::open(&cfg.out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let full = source.prepare(cfg, seed)?;
        let (c_train, c_val, c_test) = split_general(&full.s_c, derive_seed(seed, 31))?;
        let data = Prepared {
            s_c: c_train,
            s_t: full.s_t,
            validation: c_val,
            test: c_test,
            world: None,
        };
        for &method in &cfg.methods {
            let job = Job {
                command: "general-eval",
                variant: "general".into(),
                method: method_config(cfg, method),
                train: train_config(cfg, seed),
                seed,
            };
            let r = train(&job.method, &job.train, &data.s_c, &data.s_t, &data.validation)?;
            rows.push(record(cfg, &mut out, &job, &r, &data, true)?);
        }
    }
    Ok(rows)
}

/// One bound-verification trial: a fresh world, logs, and models pretrained
/// on `S_c` and `S_t`. `|H|` defaults to the number of `M_c` snapshots evaluated.
pub fn bound_trial(cfg: &ExperimentConfig, trial: u64) -> Result<(usize, BoundReport)> {
    let b = &cfg.bounds;
    let seed = derive_seed(cfg.seeds[0], trial);
    let spec = WorldSpec::new(b.users, b.items, derive_seed(seed, 0));
    let world = generate_world(&spec)?;
    let logged = log_feedback(&world, Policy::Stochastic, spec.impressions_c, derive_seed(seed, 1))?;
    let uniform = log_feedback(&world, Policy::Uniform, spec.impressions_t, derive_seed(seed, 2))?;
    let (s_t, validation, _) = split_randomized(&uniform, (0.6, 0.4, 0.0), derive_seed(seed, 3))?;
    let s_c = remove_overlap(&logged, &s_t)?;
    let s_c = remove_overlap(&s_c, &validation)?;
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let m = &cfg.method;
    let (mc, hist_c, _) = pretrain(&s_c, &validation, &tc, m.loss, m.lambda_c, Phase::PretrainC, derive_seed(seed, 4))?;
    let (mt, _, _) = pretrain(&s_t, &validation, &tc, m.loss, m.lambda_t, Phase::PretrainT, derive_seed(seed, 5))?;
    let h = b.hypotheses.unwrap_or(hist_c.len());
    let bc = BoundConfig::for_loss(&b.loss, h, b.eta)?;
    let resamples = if b.resamples == 0 { DEFAULT_RESAMPLES } else { b.resamples };
    let report = theorem_report(b.variant, &world, &mc, &mt, &s_c, &s_t, &b.loss, &bc, resamples, derive_seed(seed, 6))?;
    Ok((h, report))
}

/// Coverage summary of a bound run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub held: usize,
    pub trials: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.held as f64 / self.trials.max(1) as f64
    }
}

/// `verify-bounds`: runs every trial and writes `bounds.csv`.
pub fn verify_bounds(cfg: &ExperimentConfig) -> Result<(Vec<BoundRow>, Coverage)> {
    let rows: Vec<BoundRow> = (0..cfg.bounds.trials as u64)
        .into_par_iter()
        .map(|t| bound_trial(cfg, t).map(|(h, r)| (t, h, r)))
        .collect::<Result<_>>()?;
    write_bounds(&cfg.out, &rows)?;
    let held = rows.iter().filter(|(_, _, r)| r.holds).count();
    Ok((
        rows,
        Coverage {
            held,
            trials: cfg.bounds.trials,
        },
    ))
}
