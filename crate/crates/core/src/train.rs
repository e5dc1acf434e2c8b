//! Pretraining, the two-phase refinement loop with early stopping, and grid search.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{sample_complement, Dataset, Interaction, PairSet, Regime};
use crate::metrics::{auc_of, topk_metrics, InteractedIndex};
use crate::model::{FactorModel, OptimizerState};
use crate::objective::{
    naive_bayes_propensity, objective_terms, Batch, Gradients, Method, MethodConfig, Scale, Term,
    TermValues,
};
use crate::rng::{self, derive_seed};
use crate::{Error, Result};

/// Validation metric used for early stopping and model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Selection {
    Auc,
    /// Full-list nDCG over candidates not seen in training.
    Ndcg,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub rank: usize,
    pub learning_rate: f64,
    /// Epoch cap of the refinement phase (and of single-phase methods).
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Epoch cap of each pretraining run of a two-phase method.
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rank: 50,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 5,
            batch_size: 1024,
            pretrain_epochs: 100,
            seed: 0,
            selection: Selection::Auc,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Phase {
    PretrainC,
    PretrainT,
    /// The method's own objective (refinement for two-phase methods).
    Main,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::PretrainC => "pretrain_c",
            Phase::PretrainT => "pretrain_t",
            Phase::Main => "main",
        }
    }
}

/// One logged epoch. Epoch 0 holds the state before any update of that phase.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Batch-averaged term values over the epoch.
    pub terms: TermValues,
    pub objective: f64,
    pub validation: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model_c: FactorModel,
    pub model_t: Option<FactorModel>,
    /// Records of every phase in execution order.
    pub history: Vec<EpochRecord>,
    /// Index into `history` of the returned snapshot.
    pub best_epoch: usize,
    pub best_validation: f64,
    /// Distinct model snapshots evaluated on validation data.
    pub snapshots_evaluated: usize,
}

impl TrainResult {
    /// Records of one phase.
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &EpochRecord> {
        self.history.iter().filter(move |r| r.phase == phase)
    }
}

struct Validator<'a> {
    val: &'a Dataset,
    selection: Selection,
    index: Option<InteractedIndex>,
}

impl<'a> Validator<'a> {
    fn new(val: &'a Dataset, selection: Selection, train_sets: &[&Dataset]) -> Result<Self> {
        if val.is_empty() {
            return Err(Error::Insufficient {
                what: "validation interactions",
                needed: 1,
                available: 0,
            });
        }
        let index = match selection {
            Selection::Auc => None,
            Selection::Ndcg => Some(InteractedIndex::new(val.n_users(), val.n_items(), train_sets)?),
        };
        Ok(Self {
            val,
            selection,
            index,
        })
    }

    fn score(&self, m: &FactorModel) -> Result<f64> {
        match (&self.index, self.selection) {
            (Some(index), Selection::Ndcg) => Ok(topk_metrics(m, self.val, index, &[], None).2),
            _ => auc_of(m, self.val.interactions()),
        }
    }
}

/// Everything the loop needs besides the models.
struct LoopSpec<'a> {
    cfg: &'a MethodConfig,
    observed: &'a Dataset,
    randomized: Option<&'a Dataset>,
    /// Pairs excluded from alignment sampling; `None` disables sampling.
    excluded: Option<&'a PairSet>,
    scale: Scale,
    propensities: Option<(f64, f64)>,
    phase: Phase,
    max_epochs: usize,
}

struct LoopOutcome {
    model_c: FactorModel,
    model_t: Option<FactorModel>,
    history: Vec<EpochRecord>,
    best: usize,
}

fn run_loop(
    spec: &LoopSpec<'_>,
    tc: &TrainConfig,
    validator: &Validator<'_>,
    mut mc: FactorModel,
    mut mt: Option<FactorModel>,
    seed: u64,
) -> Result<LoopOutcome> {
    let cfg = spec.cfg;
    let updates_t = cfg.method.updates_model_t();
    let mut opt_c = OptimizerState::new(&mc, tc.learning_rate)?;
    let mut opt_t = match (&mt, updates_t) {
        (Some(m), true) => Some(OptimizerState::new(m, tc.learning_rate)?),
        _ => None,
    };
    let mut rng = rng::seeded(seed);
    let mut obs: Vec<Interaction> = spec.observed.interactions().to_vec();
    let mut rnd: Vec<Interaction> = spec.randomized.map(|d| d.interactions().to_vec()).unwrap_or_default();
    let n_obs = obs.len();
    let bs = tc.batch_size.min(n_obs.max(1));
    let n_batches = n_obs.div_ceil(bs).max(1);
    let bt = tc.batch_size.min(rnd.len());
    let n_users = spec.observed.n_users();
    let n_items = spec.observed.n_items();

    let aux_size = |excluded: &PairSet| n_obs.min(spec.scale.d_size - excluded.len());
    let draw_aux = |epoch: usize| -> Result<Vec<(u32, u32)>> {
        match spec.excluded {
            Some(ex) if cfg.is_active(Term::D) => {
                let d = sample_complement(ex, n_users, n_items, aux_size(ex), derive_seed(seed, epoch as u64))?;
                Ok(d.interactions().iter().map(|x| (x.user, x.item)).collect())
            }
            _ => Ok(Vec::new()),
        }
    };

    let mut history = Vec::new();
    // Epoch 0: evaluate terms without updating.
    {
        let aux = draw_aux(0)?;
        let mut acc = TermValues::default();
        for b in 0..n_batches {
            let batch = make_batch(&obs, &rnd, &aux, b, bs, bt);
            let tv = objective_terms(cfg, &mc, mt.as_ref(), &batch, &spec.scale, spec.propensities, None)?;
            acc.add_scaled(&tv, 1.0 / n_batches as f64);
        }
        history.push(EpochRecord {
            phase: spec.phase,
            epoch: 0,
            objective: acc.total(),
            terms: acc,
            validation: validator.score(&mc)?,
        });
    }
    let mut best = 0usize;
    let mut best_c = mc.clone();
    let mut best_t = mt.clone();
    let mut since = 0usize;
    let mut gc = mc.new_gradient();
    let mut gt = mt.as_ref().map(|m| m.new_gradient());
    for epoch in 1..=spec.max_epochs {
        obs.shuffle(&mut rng);
        rnd.shuffle(&mut rng);
        let aux = draw_aux(epoch)?;
        let mut acc = TermValues::default();
        for b in 0..n_batches {
            let batch = make_batch(&obs, &rnd, &aux, b, bs, bt);
            gc.clear();
            if let Some(g) = gt.as_mut() {
                g.clear();
            }
            let tv = objective_terms(
                cfg,
                &mc,
                mt.as_ref(),
                &batch,
                &spec.scale,
                spec.propensities,
                Some(Gradients {
                    c: &mut gc,
                    t: gt.as_mut(),
                }),
            )?;
            acc.add_scaled(&tv, 1.0 / n_batches as f64);
            opt_c.step(&mut mc, &gc)?;
            if let (Some(opt), Some(m), Some(g)) = (opt_t.as_mut(), mt.as_mut(), gt.as_ref()) {
                opt.step(m, g)?;
            }
        }
        let v = validator.score(&mc)?;
        history.push(EpochRecord {
            phase: spec.phase,
            epoch,
            objective: acc.total(),
            terms: acc,
            validation: v,
        });
        if v > history[best].validation {
            best = history.len() - 1;
            best_c = mc.clone();
            best_t = mt.clone();
            since = 0;
        } else {
            since += 1;
            if since >= tc.patience {
                break;
            }
        }
    }
    Ok(LoopOutcome {
        model_c: best_c,
        model_t: best_t,
        history,
        best,
    })
}

fn make_batch<'a>(
    obs: &'a [Interaction],
    rnd: &'a [Interaction],
    aux: &'a [(u32, u32)],
    b: usize,
    bs: usize,
    bt: usize,
) -> Batch<'a> {
    let lo = (b * bs).min(obs.len());
    let hi = ((b + 1) * bs).min(obs.len());
    // S_t is cycled: window `b` of width `bt`, wrapped to stay contiguous.
    let randomized = if bt == 0 {
        &rnd[..0]
    } else {
        let start = (b * bt) % rnd.len();
        let start = if start + bt > rnd.len() { rnd.len() - bt } else { start };
        &rnd[start..start + bt]
    };
    let alo = lo.min(aux.len());
    let ahi = hi.min(aux.len());
    Batch {
        observed: &obs[lo..hi],
        randomized,
        auxiliary: &aux[alo..ahi],
    }
}

fn single_set_scale(d: &Dataset) -> Scale {
    Scale {
        d_size: d.d_size(),
        observed_total: d.len(),
        randomized_total: 0,
        unobserved_total: d.d_size() - d.len(),
    }
}

/// Fits a model to the plain mean loss on `dataset` plus `lambda ||W||^2`,
/// early-stopped on the validation metric. Returns the best snapshot and the
/// pretraining records (tagged with `phase`).
pub fn pretrain(
    dataset: &Dataset,
    val: &Dataset,
    tc: &TrainConfig,
    loss: crate::LossKind,
    lambda: f64,
    phase: Phase,
    seed: u64,
) -> Result<(FactorModel, Vec<EpochRecord>, usize)> {
    tc.validate()?;
    if dataset.is_empty() {
        return Err(Error::Insufficient {
            what: "training interactions",
            needed: 1,
            available: 0,
        });
    }
    let mut cfg = MethodConfig::new(Method::Naive);
    cfg.loss = loss;
    cfg.lambda_c = lambda;
    let validator = Validator::new(val, tc.selection, &[dataset])?;
    let spec = LoopSpec {
        cfg: &cfg,
        observed: dataset,
        randomized: None,
        excluded: None,
        scale: single_set_scale(dataset),
        propensities: None,
        phase,
        max_epochs: if phase == Phase::Main { tc.max_epochs } else { tc.pretrain_epochs },
    };
    let m = FactorModel::init(dataset.n_users(), dataset.n_items(), tc.rank, derive_seed(seed, 1))?;
    let out = run_loop(&spec, tc, &validator, m, None, derive_seed(seed, 2))?;
    Ok((out.model_c, out.history, out.best))
}

/// Pretrained pair for the two-model methods: `M_c` on `S_c` with `lambda_c`
/// and `M_t` on `S_t` with `lambda_t`.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model_c: FactorModel,
    pub model_t: FactorModel,
    pub history: Vec<EpochRecord>,
}

const SEED_MODEL_C: u64 = 11;
const SEED_MODEL_T: u64 = 12;
const SEED_REFINE: u64 = 13;

/// Runs both pretraining phases. Depends only on the loss, `lambda_c`,
/// `lambda_t` and `tc`, so one result can seed several refinement runs.
pub fn pretrain_models(
    cfg: &MethodConfig,
    tc: &TrainConfig,
    s_c: &Dataset,
    s_t: &Dataset,
    s_va: &Dataset,
) -> Result<Pretrained> {
    let seed = tc.seed;
    let (model_c, mut history, _) =
        pretrain(s_c, s_va, tc, cfg.loss, cfg.lambda_c, Phase::PretrainC, derive_seed(seed, SEED_MODEL_C))?;
    let (model_t, hist_t, _) =
        pretrain(s_t, s_va, tc, cfg.loss, cfg.lambda_t, Phase::PretrainT, derive_seed(seed, SEED_MODEL_T))?;
    history.extend(hist_t);
    Ok(Pretrained {
        model_c,
        model_t,
        history,
    })
}

fn check_grids(s_c: &Dataset, s_t: &Dataset, s_va: &Dataset) -> Result<()> {
    if !s_c.same_grid(s_t) || !s_c.same_grid(s_va) {
        return Err(Error::ShapeMismatch("S_c, S_t and validation grids differ".into()));
    }
    Ok(())
}

/// Trains `cfg.method` on `S_c` and `S_t` with early stopping on `s_va`.
///
/// Naive, Unif and Combine pretrain one model on `S_c`, `S_t` or their union;
/// Naive's model is exactly the `M_c` that [`pretrain_models`] produces. IPS
/// trains one model from initialization. The two-model methods pretrain both
/// models and then [`refine`] them.
pub fn train(
    cfg: &MethodConfig,
    tc: &TrainConfig,
    s_c: &Dataset,
    s_t: &Dataset,
    s_va: &Dataset,
) -> Result<TrainResult> {
    cfg.validate()?;
    tc.validate()?;
    check_grids(s_c, s_t, s_va)?;
    let seed = derive_seed(tc.seed, SEED_MODEL_C);
    let single = |d: &Dataset| -> Result<TrainResult> {
        let (m, history, best) = pretrain(d, s_va, tc, cfg.loss, cfg.lambda_c, Phase::Main, seed)?;
        Ok(finish(m, None, history, best))
    };
    match cfg.method {
        Method::Naive => single(s_c),
        Method::Unif => single(s_t),
        Method::Combine => single(&s_c.union(s_t, Regime::NonRandomized)?),
        Method::Ips => {
            let scale = Scale::from_sets(s_c, s_t);
            let validator = Validator::new(s_va, tc.selection, &[s_c, s_t])?;
            let props = naive_bayes_propensity(s_c, s_t, s_c.d_size(), cfg.propensity_floor)?;
            let spec = LoopSpec {
                cfg,
                observed: s_c,
                randomized: None,
                excluded: None,
                scale,
                propensities: Some(props),
                phase: Phase::Main,
                max_epochs: tc.max_epochs,
            };
            let m = FactorModel::init(s_c.n_users(), s_c.n_items(), tc.rank, derive_seed(seed, 1))?;
            let out = run_loop(&spec, tc, &validator, m, None, derive_seed(seed, 2))?;
            Ok(finish(out.model_c, None, out.history, out.best))
        }
        _ => {
            let pre = pretrain_models(cfg, tc, s_c, s_t, s_va)?;
            refine(cfg, tc, s_c, s_t, s_va, &pre)
        }
    }
}

/// Minimizes a two-model objective starting from `pre`, drawing a fresh
/// unobserved sample `S_a` of size `|S_c|` every epoch.
pub fn refine(
    cfg: &MethodConfig,
    tc: &TrainConfig,
    s_c: &Dataset,
    s_t: &Dataset,
    s_va: &Dataset,
    pre: &Pretrained,
) -> Result<TrainResult> {
    cfg.validate()?;
    tc.validate()?;
    check_grids(s_c, s_t, s_va)?;
    if !cfg.method.needs_model_t() {
        return Err(Error::InvalidArgument(format!("{} has no refinement phase", cfg.method)));
    }
    let validator = Validator::new(s_va, tc.selection, &[s_c, s_t])?;
    let excluded = PairSet::from_datasets(&[s_c, s_t])?;
    let spec = LoopSpec {
        cfg,
        observed: s_c,
        randomized: Some(s_t),
        excluded: Some(&excluded),
        scale: Scale::from_sets(s_c, s_t),
        propensities: None,
        phase: Phase::Main,
        max_epochs: tc.max_epochs,
    };
    let mut history = pre.history.clone();
    let offset = history.len();
    let out = run_loop(
        &spec,
        tc,
        &validator,
        pre.model_c.clone(),
        Some(pre.model_t.clone()),
        derive_seed(tc.seed, SEED_REFINE),
    )?;
    history.extend(out.history);
    Ok(finish(out.model_c, out.model_t, history, offset + out.best))
}

fn finish(model_c: FactorModel, model_t: Option<FactorModel>, history: Vec<EpochRecord>, best: usize) -> TrainResult {
    TrainResult {
        best_validation: history[best].validation,
        snapshots_evaluated: history.len(),
        model_c,
        model_t,
        history,
        best_epoch: best,
    }
}

/// Hyper-parameter ranges; `lambdas` set both `lambda_c` and `lambda_t`, and
/// `gammas` set `gamma` (or `gamma_tc` for CausE).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub ranks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        let decades = vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
        Self {
            ranks: vec![50, 100, 200],
            lambdas: decades.clone(),
            gammas: decades,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub index: usize,
    pub method: MethodConfig,
    pub train: TrainConfig,
}

/// Enumerates cells in rank, lambda, gamma order. Methods without an alignment
/// weight skip the gamma axis. Each cell's seed derives from the template seed
/// and the cell index.
pub fn grid_cells(template: &MethodConfig, tc: &TrainConfig, grid: &Grid) -> Result<Vec<GridCell>> {
    if grid.ranks.is_empty() || grid.lambdas.is_empty() || grid.gammas.is_empty() {
        return Err(Error::InvalidArgument("every grid axis needs at least one value".into()));
    }
    let gammas: &[f64] = if template.method.uses_gamma() {
        &grid.gammas
    } else {
        &grid.gammas[..1]
    };
    let mut cells = Vec::new();
    for &rank in &grid.ranks {
        for &lambda in &grid.lambdas {
            for &gamma in gammas {
                let mut m = template.clone();
                m.lambda_c = lambda;
                m.lambda_t = lambda;
                if template.method == Method::CausE {
                    m.gamma_tc = gamma;
                } else if template.method.uses_gamma() {
                    m.gamma = gamma;
                }
                let index = cells.len();
                let mut t = tc.clone();
                t.rank = rank;
                t.seed = derive_seed(tc.seed, index as u64);
                cells.push(GridCell {
                    index,
                    method: m,
                    train: t,
                });
            }
        }
    }
    Ok(cells)
}

/// Index of the best validation score; the first cell wins ties.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

#[derive(Debug)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub results: Vec<TrainResult>,
    pub best: usize,
}

/// Trains every cell sequentially and picks the best validation score.
pub fn grid_search(
    template: &MethodConfig,
    tc: &TrainConfig,
    grid: &Grid,
    s_c: &Dataset,
    s_t: &Dataset,
    s_va: &Dataset,
) -> Result<GridOutcome> {
    let cells = grid_cells(template, tc, grid)?;
    let mut results = Vec::with_capacity(cells.len());
    for c in &cells {
        results.push(train(&c.method, &c.train, s_c, s_t, s_va)?);
    }
    let scores: Vec<f64> = results.iter().map(|r| r.best_validation).collect();
    let best = select_best(&scores).expect("grid is non-empty");
    Ok(GridOutcome {
        cells,
        results,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, log_feedback, Policy, WorldSpec};
    use crate::data::{remove_overlap, split_randomized};

    fn small_data() -> (Dataset, Dataset, Dataset, Dataset) {
        let spec = WorldSpec::new(60, 40, 5);
        let w = generate_world(&spec).unwrap();
        let s_c = log_feedback(&w, Policy::Stochastic, 900, 1).unwrap();
        let uni = log_feedback(&w, Policy::Uniform, 1200, 2).unwrap();
        let (s_t, va, te) = split_randomized(&uni, (0.2, 0.3, 0.5), 3).unwrap();
        let s_c = remove_overlap(&s_c, &uni).unwrap();
        (s_c, s_t, va, te)
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            rank: 4,
            learning_rate: 0.01,
            max_epochs: 8,
            patience: 3,
            batch_size: 128,
            pretrain_epochs: 8,
            seed: 9,
            selection: Selection::Auc,
        }
    }

    #[test]
    fn every_method_trains_and_keeps_best_snapshot() {
        let (s_c, s_t, va, _) = small_data();
        for m in Method::ALL {
            let cfg = MethodConfig::new(m);
            let r = train(&cfg, &quick(), &s_c, &s_t, &va).unwrap();
            let main: Vec<&EpochRecord> = r.phase(Phase::Main).collect();
            assert!(!main.is_empty());
            let first_main = r.history.iter().position(|h| h.phase == Phase::Main).unwrap();
            assert!(r.best_epoch >= first_main);
            assert!(r.best_validation >= main[0].validation);
            let max = main.iter().map(|h| h.validation).fold(f64::MIN, f64::max);
            assert_eq!(r.best_validation, max);
            assert_eq!(r.model_t.is_some(), m.needs_model_t());
            for h in &r.history {
                assert!((h.objective - h.terms.total()).abs() <= 1e-10);
            }
            assert_eq!(
                crate::metrics::auc_of(&r.model_c, va.interactions()).unwrap(),
                r.best_validation
            );
        }
    }

    #[test]
    fn naive_equals_pretraining_on_s_c() {
        let (s_c, s_t, va, _) = small_data();
        let tc = quick();
        let r = train(&MethodConfig::new(Method::Naive), &tc, &s_c, &s_t, &va).unwrap();
        let cfg = MethodConfig::new(Method::Naive);
        let pre = pretrain_models(&MethodConfig::new(Method::DubSeparability), &tc, &s_c, &s_t, &va).unwrap();
        assert_eq!(r.model_c, pre.model_c);
        let _ = cfg;
    }

    #[test]
    fn dub_sep_keeps_model_t_frozen() {
        let (s_c, s_t, va, _) = small_data();
        let tc = quick();
        let cfg = MethodConfig::new(Method::DubSeparability);
        let r = train(&cfg, &tc, &s_c, &s_t, &va).unwrap();
        let pre = pretrain_models(&cfg, &tc, &s_c, &s_t, &va).unwrap();
        assert_eq!(r.model_t.as_ref().unwrap(), &pre.model_t);
        assert!(r.phase(Phase::Main).skip(1).all(|h| h.terms.get(Term::E2) != 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let (s_c, s_t, va, _) = small_data();
        let cfg = MethodConfig::new(Method::DubTriangle);
        let a = train(&cfg, &quick(), &s_c, &s_t, &va).unwrap();
        let b = train(&cfg, &quick(), &s_c, &s_t, &va).unwrap();
        assert_eq!(a.model_c, b.model_c);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn grid_shapes_and_ties() {
        let tc = TrainConfig::default();
        let dub = grid_cells(&MethodConfig::new(Method::DubSeparability), &tc, &Grid::default()).unwrap();
        assert_eq!(dub.len(), 75);
        let naive = grid_cells(&MethodConfig::new(Method::Naive), &tc, &Grid::default()).unwrap();
        assert_eq!(naive.len(), 15);
        assert_ne!(dub[0].train.seed, dub[1].train.seed);
        assert_eq!(select_best(&[0.7, 0.8, 0.8, 0.1]), Some(1));
        assert_eq!(select_best(&[0.5]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn single_cell_grid() {
        let (s_c, s_t, va, _) = small_data();
        let grid = Grid {
            ranks: vec![3],
            lambdas: vec![1e-3],
            gammas: vec![1e-2],
        };
        let out = grid_search(&MethodConfig::new(Method::Bridge), &quick(), &grid, &s_c, &s_t, &va).unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.cells[0].method.gamma, 1e-2);
        assert_eq!(out.results[0].model_c.rank(), 3);
    }

    #[test]
    fn validation_required() {
        let (s_c, s_t, _, _) = small_data();
        let empty = Dataset::empty(s_c.n_users(), s_c.n_items(), Regime::Validation);
        assert!(train(&MethodConfig::new(Method::Naive), &quick(), &s_c, &s_t, &empty).is_err());
    }
}
