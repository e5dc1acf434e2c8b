//! Experiment configuration: built-in defaults, then a key=value file with
//! `[section]` headers, then command-line overrides, all through
//! [`ExperimentConfig::set`] with `section.key` names.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dubrec_core::objective::AlignmentScaling;
use dubrec_core::rng::derive_seed;
use dubrec_core::scenario::BenchmarkSpec;
use dubrec_core::train::{Grid, Selection};
use dubrec_core::{BoundVariant, LossKind, Method, MethodConfig, Term, TrainConfig};
use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::load::LabelRule;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "DUBREC_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: Source,
    /// Template for synthetic benchmarks; the seed and log sizes are filled
    /// in by [`DataConfig::benchmark`].
    pub benchmark: BenchmarkSpec,
    /// Biased impressions; `None` means 40% of the grid.
    pub logged: Option<usize>,
    /// Uniform impressions; `None` means 20% of the grid.
    pub uniform: Option<usize>,
    pub logged_file: Option<PathBuf>,
    pub uniform_file: Option<PathBuf>,
    pub label_rule: LabelRule,
    /// `S_t` / validation / test shares of the uniform log (file source).
    pub split: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub positive_ratios: Vec<f64>,
    pub st_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRun {
    pub trials: usize,
    pub users: u32,
    pub items: u32,
    pub eta: f64,
    pub resamples: usize,
    /// `|H|`; `None` counts the snapshots each trial's training evaluated.
    pub hypotheses: Option<usize>,
    pub variant: BoundVariant,
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
    /// Hyperparameters shared by every method; `method` is overwritten per run.
    pub method: MethodConfig,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub grid: Grid,
    pub sweep: SweepConfig,
    pub bounds: BoundsRun,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                source: Source::Synthetic,
                benchmark: BenchmarkSpec::standard(0),
                logged: None,
                uniform: None,
                logged_file: None,
                uniform_file: None,
                label_rule: LabelRule::Binary,
                split: (0.1, 0.1, 0.8),
            },
            train: TrainConfig {
                batch_size: 128,
                pretrain_epochs: 300,
                ..TrainConfig::default()
            },
            method: MethodConfig::new(Method::DubSeparability),
            methods: vec![Method::DubSeparability],
            seeds: vec![0],
            grid: Grid::default(),
            sweep: SweepConfig {
                positive_ratios: vec![0.1, 0.3, 0.5, 0.7],
                st_fractions: vec![0.25, 0.5, 0.75, 1.0],
            },
            bounds: BoundsRun {
                trials: 200,
                users: 100,
                items: 60,
                eta: 0.05,
                resamples: 100,
                hypotheses: None,
                variant: BoundVariant::Triangle,
                loss: LossKind::l1(),
            },
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad value {value:?} for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let out: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(CliError::Config(format!("`{key}` needs at least one value")));
    }
    Ok(out)
}

pub fn parse_loss(value: &str) -> Result<LossKind> {
    Ok(match value.trim() {
        "bce" => LossKind::bce(),
        "l1" => LossKind::l1(),
        "mse" => LossKind::mse(),
        "zero-one" | "01" => LossKind::zero_one(),
        other => return Err(CliError::Config(format!("unknown loss {other:?}"))),
    })
}

pub fn loss_name(loss: &LossKind) -> &'static str {
    use dubrec_core::LossVariant as V;
    match loss.variant {
        V::BinaryCrossEntropy => "bce",
        V::L1 => "l1",
        V::Mse => "mse",
        V::ZeroOne => "zero-one",
    }
}

fn parse_split(key: &str, value: &str) -> Result<(f64, f64, f64)> {
    let v: Vec<f64> = parse_list(key, value)?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::Config(format!("`{key}` needs three shares"))),
    }
}

impl DataConfig {
    /// The synthetic benchmark for one seed.
    pub fn benchmark(&self, seed: u64) -> BenchmarkSpec {
        let mut b = self.benchmark.clone();
        let d = b.world.d_size();
        b.n_logged_c = self.logged.unwrap_or(d * 2 / 5);
        b.n_uniform = self.uniform.unwrap_or(d / 5);
        b.world.impressions_c = b.n_logged_c;
        b.world.impressions_t = b.n_uniform;
        b.seed = seed;
        b.world.seed = derive_seed(seed, 0);
        b
    }
}

impl ExperimentConfig {
    /// Sets one `section.key` value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let b = &mut self.data.benchmark;
        match key {
            "data.source" => {
                self.data.source = match value.trim() {
                    "synthetic" => Source::Synthetic,
                    "files" => Source::Files,
                    other => return Err(CliError::Config(format!("unknown data source {other:?}"))),
                }
            }
            "data.users" => b.world.n_users = parse(key, value)?,
            "data.items" => b.world.n_items = parse(key, value)?,
            "data.rank_true" => b.world.rank_true = parse(key, value)?,
            "data.skew" => b.world.popularity_skew = parse(key, value)?,
            "data.boost" => b.world.positivity_boost = parse(key, value)?,
            "data.factor_scale" => b.world.factor_scale = parse(key, value)?,
            "data.item_bias_scale" => b.world.item_bias_scale = parse(key, value)?,
            "data.preference_offset" => b.world.preference_offset = parse(key, value)?,
            "data.label_shift" => b.world.label_shift = parse(key, value)?,
            "data.logged" => self.data.logged = Some(parse(key, value)?),
            "data.uniform" => self.data.uniform = Some(parse(key, value)?),
            "data.split" => {
                let s = parse_split(key, value)?;
                b.split = s;
                self.data.split = s;
            }
            "data.logged_file" => self.data.logged_file = Some(PathBuf::from(value.trim())),
            "data.uniform_file" => self.data.uniform_file = Some(PathBuf::from(value.trim())),
            "data.threshold" => {
                self.data.label_rule = match value.trim() {
                    "none" | "binary" => LabelRule::Binary,
                    v => LabelRule::Threshold(parse(key, v)?),
                }
            }
            "train.rank" => self.train.rank = parse(key, value)?,
            "train.lr" => self.train.learning_rate = parse(key, value)?,
            "train.epochs" => self.train.max_epochs = parse(key, value)?,
            "train.pretrain_epochs" => self.train.pretrain_epochs = parse(key, value)?,
            "train.patience" => self.train.patience = parse(key, value)?,
            "train.batch" => self.train.batch_size = parse(key, value)?,
            "train.selection" => {
                self.train.selection = match value.trim() {
                    "auc" => Selection::Auc,
                    "ndcg" => Selection::Ndcg,
                    other => return Err(CliError::Config(format!("unknown selection {other:?}"))),
                }
            }
            "method.methods" => {
                self.methods = parse_list::<String>(key, value)?
                    .iter()
                    .map(|m| m.parse::<Method>().map_err(|e| CliError::Config(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "method.gamma" => self.method.gamma = parse(key, value)?,
            "method.gamma_tc" => self.method.gamma_tc = parse(key, value)?,
            "method.lambda" => {
                self.method.lambda_c = parse(key, value)?;
                self.method.lambda_t = self.method.lambda_c;
            }
            "method.lambda_c" => self.method.lambda_c = parse(key, value)?,
            "method.lambda_t" => self.method.lambda_t = parse(key, value)?,
            "method.loss" => self.method.loss = parse_loss(value)?,
            "method.propensity_floor" => self.method.propensity_floor = parse(key, value)?,
            "method.alignment" => {
                self.method.alignment = match value.trim() {
                    "unobserved" => AlignmentScaling::UnobservedFraction,
                    "mean" => AlignmentScaling::PlainMean,
                    other => return Err(CliError::Config(format!("unknown alignment scaling {other:?}"))),
                }
            }
            "method.drop" => {
                self.method.dropped = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    parse_list::<String>(key, value)?
                        .iter()
                        .map(|t| t.parse::<Term>().map_err(|e| CliError::Config(e.to_string())))
                        .collect::<Result<_>>()?
                }
            }
            "run.seeds" => self.seeds = parse_list(key, value)?,
            "run.out" => self.out = PathBuf::from(value.trim()),
            "grid.ranks" => self.grid.ranks = parse_list(key, value)?,
            "grid.lambdas" => self.grid.lambdas = parse_list(key, value)?,
            "grid.gammas" => self.grid.gammas = parse_list(key, value)?,
            "sweep.positive_ratios" => self.sweep.positive_ratios = parse_list(key, value)?,
            "sweep.st_fractions" => self.sweep.st_fractions = parse_list(key, value)?,
            "bounds.trials" => self.bounds.trials = parse(key, value)?,
            "bounds.users" => self.bounds.users = parse(key, value)?,
            "bounds.items" => self.bounds.items = parse(key, value)?,
            "bounds.eta" => self.bounds.eta = parse(key, value)?,
            "bounds.resamples" => self.bounds.resamples = parse(key, value)?,
            "bounds.hypotheses" => {
                self.bounds.hypotheses = match value.trim() {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "bounds.variant" => {
                self.bounds.variant = match value.trim() {
                    "triangle" => BoundVariant::Triangle,
                    "separability" => BoundVariant::Separability,
                    other => return Err(CliError::Config(format!("unknown bound variant {other:?}"))),
                }
            }
            "bounds.loss" => self.bounds.loss = parse_loss(value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every entry of a config file. Keys outside any section belong
    /// to `[run]`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let ini = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(io) => CliError::io(path, io),
            ini::Error::Parse(p) => CliError::Config(format!("{}: {p}", path.display())),
        })?;
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("run");
            for (k, v) in props.iter() {
                self.set(&format!("{section}.{k}"), v)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        self.train.validate()?;
        let mut m = self.method.clone();
        for &method in &self.methods {
            m.method = method;
            m.validate()?;
        }
        if self.data.source == Source::Files {
            for (name, p) in [("data.logged_file", &self.data.logged_file), ("data.uniform_file", &self.data.uniform_file)] {
                match p {
                    None => return Err(CliError::Config(format!("`{name}` is required for file data"))),
                    Some(p) if !p.is_file() => {
                        return Err(CliError::Config(format!("{name} {} does not exist", p.display())))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Everything that determines a run's data, as canonical text.
    pub fn data_key(&self) -> String {
        let mut s = String::new();
        match self.data.source {
            Source::Synthetic => {
                let b = self.data.benchmark(0);
                let w = &b.world;
                let _ = write!(
                    s,
                    "synthetic users={} items={} rank_true={} skew={} boost={} factor_scale={} item_bias_scale={} offset={} label_shift={} logged={} uniform={} split={:?}",
                    w.n_users, w.n_items, w.rank_true, w.popularity_skew, w.positivity_boost, w.factor_scale,
                    w.item_bias_scale, w.preference_offset, w.label_shift, b.n_logged_c, b.n_uniform, b.split
                );
            }
            Source::Files => {
                let _ = write!(
                    s,
                    "files logged={:?} uniform={:?} rule={:?} split={:?}",
                    self.data.logged_file, self.data.uniform_file, self.data.label_rule, self.data.split
                );
            }
        }
        s
    }
}

/// Canonical description of one training run, excluding its seed.
pub fn run_key(data_key: &str, tc: &TrainConfig, m: &MethodConfig, extra: &str) -> String {
    let dropped: Vec<&str> = m.dropped.iter().map(|t| t.name()).collect();
    format!(
        "{data_key}\nrank={} lr={} epochs={} pretrain_epochs={} patience={} batch={} selection={:?}\n\
         method={} loss={} gamma={} gamma_tc={} lambda_c={} lambda_t={} alignment={:?} floor={} drop={}\n{extra}",
        tc.rank,
        tc.learning_rate,
        tc.max_epochs,
        tc.pretrain_epochs,
        tc.patience,
        tc.batch_size,
        tc.selection,
        m.method,
        loss_name(&m.loss),
        m.gamma,
        m.gamma_tc,
        m.lambda_c,
        m.lambda_t,
        m.alignment,
        m.propensity_floor,
        dropped.join("+"),
    )
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().fold(String::with_capacity(16), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
