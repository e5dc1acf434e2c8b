//! The standard synthetic benchmark: a biased log from the stochastic policy,
//! a uniform log split into `S_t`, validation and test, and overlap removal.

use crate::data::{remove_overlap, split_randomized, Dataset};
use crate::rng::derive_seed;
use crate::world::{generate_world, log_feedback, Policy, SyntheticWorld, WorldSpec};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkSpec {
    pub world: WorldSpec,
    /// Impressions logged by the stochastic policy before overlap removal.
    pub n_logged_c: usize,
    /// Impressions logged by the uniform policy.
    pub n_uniform: usize,
    /// `S_t` / validation / test shares of the uniform log.
    pub split: (f64, f64, f64),
    pub seed: u64,
}

impl BenchmarkSpec {
    /// 500 users x 200 items, popularity skew 1.5, boost 3, 40k biased and 20k
    /// uniform impressions split 10/10/80 (so `|S_t| = 2000`). Preferences
    /// carry no item offsets and the `r_c` label coupling is doubled; see
    /// `CALIBRATION.md` in the repository root.
    pub fn standard(seed: u64) -> Self {
        let mut world = WorldSpec::new(500, 200, derive_seed(seed, 0));
        world.popularity_skew = 1.5;
        world.positivity_boost = 3.0;
        world.item_bias_scale = 0.0;
        world.label_shift = 2.0;
        world.impressions_c = 40_000;
        world.impressions_t = 20_000;
        Self {
            world,
            n_logged_c: 40_000,
            n_uniform: 20_000,
            split: (0.1, 0.1, 0.8),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub world: SyntheticWorld,
    pub s_c: Dataset,
    pub s_t: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Generates the world and all four datasets. `S_c` loses every pair that
/// also appears in the uniform log.
pub fn build(spec: &BenchmarkSpec) -> Result<Benchmark> {
    let world = generate_world(&spec.world)?;
    let logged = log_feedback(&world, Policy::Stochastic, spec.n_logged_c, derive_seed(spec.seed, 1))?;
    let uniform = log_feedback(&world, Policy::Uniform, spec.n_uniform, derive_seed(spec.seed, 2))?;
    let (s_t, validation, test) = split_randomized(&uniform, spec.split, derive_seed(spec.seed, 3))?;
    let s_c = remove_overlap(&logged, &uniform)?;
    Ok(Benchmark {
        world,
        s_c,
        s_t,
        validation,
        test,
    })
}
