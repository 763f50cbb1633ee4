//! Synthetic world: hidden parameter, per-round contexts, Bernoulli
//! attraction draws with first-click stopping, and baseline reward samples.
//!
//! Randomness is drawn from ChaCha streams keyed by `(seed, purpose, round)`,
//! so the trajectory of one purpose never depends on how many numbers another
//! purpose consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_model::dot;
use crate::reward::{DiscountProfile, SuperArm};

#[derive(Debug, Clone, Copy)]
enum Stream {
    Theta = 1,
    Contexts = 2,
    Clicks = 3,
    Baseline = 4,
    BaselineContexts = 5,
}

fn stream_rng(seed: u64, stream: Stream, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(round) << 40);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Context dimension before the constant coordinate is appended.
    pub dim_raw: usize,
    pub num_items: usize,
    pub k_max: usize,
    pub discounts: DiscountProfile,
    /// Expected baseline reward.
    pub u0: f64,
    pub baseline_noise_sd: f64,
    /// Baseline rewards are sampled (unknown-baseline experiments).
    pub unknown_baseline: bool,
    /// Keep `x = (x′, 1)` with norm √2 instead of rescaling to unit norm.
    pub paper_literal_contexts: bool,
    pub seed: u64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim_raw < 1 {
            return Err(Error::InvalidConfig("dim_raw must be at least 1".into()));
        }
        if self.k_max < 1 || self.num_items < self.k_max {
            return Err(Error::InvalidConfig(format!(
                "need num_items >= k_max >= 1, got num_items {} and k_max {}",
                self.num_items, self.k_max
            )));
        }
        if self.discounts.k_max() != self.k_max {
            return Err(Error::InvalidConfig(format!(
                "{} discounts given for k_max {}",
                self.discounts.k_max(),
                self.k_max
            )));
        }
        if !(0.0..=1.0).contains(&self.u0) {
            return Err(Error::InvalidConfig(format!("u0 must lie in [0, 1], got {}", self.u0)));
        }
        if !(self.baseline_noise_sd.is_finite() && self.baseline_noise_sd >= 0.0) {
            return Err(Error::InvalidConfig("baseline_noise_sd must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Contexts and true expected weights of every item in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundContexts {
    round: u64,
    dim: usize,
    contexts: Vec<f64>,
    true_weights: Vec<f64>,
}

impl RoundContexts {
    /// `contexts` is row-major, one row of length `dim` per item.
    pub fn new(round: u64, dim: usize, contexts: Vec<f64>, true_weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || contexts.len() != dim * true_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * true_weights.len(),
                got: contexts.len(),
            });
        }
        for (index, &value) in true_weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::WeightOutOfRange { index, value });
            }
        }
        Ok(Self {
            round,
            dim,
            contexts,
            true_weights,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_items(&self) -> usize {
        self.true_weights.len()
    }

    pub fn context(&self, item: usize) -> &[f64] {
        &self.contexts[item * self.dim..(item + 1) * self.dim]
    }

    pub fn contexts(&self) -> &[f64] {
        &self.contexts
    }

    pub fn true_weights(&self) -> &[f64] {
        &self.true_weights
    }

    /// Contexts of the arm's items, concatenated in list order.
    pub fn arm_contexts(&self, arm: &SuperArm) -> Vec<f64> {
        let mut out = Vec::with_capacity(arm.len() * self.dim);
        for &a in arm.items() {
            out.extend_from_slice(self.context(a));
        }
        out
    }
}

/// What the learner sees after recommending a list.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeFeedback {
    /// Position (0-based) of the first click, if any.
    pub click: Option<usize>,
    /// Realised weights of the observed prefix, all 0 except possibly the last.
    pub observed_weights: Vec<f64>,
}

impl CascadeFeedback {
    /// `O_t`: number of observed positions.
    pub fn stop_pos(&self) -> usize {
        self.observed_weights.len()
    }
}

/// Probability that all positions of a list are observed under first-click
/// stopping: no click on any position before the last.
pub fn full_observation_probability(position_weights: &[f64]) -> f64 {
    match position_weights.split_last() {
        Some((_, head)) => head.iter().map(|w| 1.0 - w).product(),
        None => 1.0,
    }
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    theta_star: Vec<f64>,
    baseline_contexts: Vec<f64>,
}

impl World {
    /// Draw `θ* = (θ′/2, 1/2)` with `θ′` uniform on the unit sphere.
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, Stream::Theta, 0);
        let raw = unit_gaussian(&mut rng, config.dim_raw);
        let mut theta_star: Vec<f64> = raw.iter().map(|v| v / 2.0).collect();
        theta_star.push(0.5);

        let mut world = Self {
            config,
            theta_star,
            baseline_contexts: Vec::new(),
        };
        let mut rng = stream_rng(world.config.seed, Stream::BaselineContexts, 0);
        let mut baseline = Vec::with_capacity(world.config.k_max * world.dim());
        for _ in 0..world.config.k_max {
            baseline.extend(world.augment(unit_gaussian(&mut rng, world.config.dim_raw)));
        }
        world.baseline_contexts = baseline;
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// Full context dimension `d = dim_raw + 1`.
    pub fn dim(&self) -> usize {
        self.config.dim_raw + 1
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    /// Fixed contexts of the `k_max` baseline items (row-major).
    pub fn baseline_contexts(&self) -> &[f64] {
        &self.baseline_contexts
    }

    /// `θ*ᵀx`, clamped to `[0, 1]` against rounding.
    pub fn true_weight(&self, context: &[f64]) -> f64 {
        dot(&self.theta_star, context).clamp(0.0, 1.0)
    }

    fn augment(&self, mut raw: Vec<f64>) -> Vec<f64> {
        raw.push(1.0);
        if !self.config.paper_literal_contexts {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            raw.iter_mut().for_each(|v| *v *= s);
        }
        raw
    }

    pub fn draw_contexts(&self, round: u64) -> Result<RoundContexts> {
        if round < 1 {
            return Err(Error::InvalidConfig("rounds are numbered from 1".into()));
        }
        let mut rng = stream_rng(self.config.seed, Stream::Contexts, round);
        let d = self.dim();
        let mut contexts = Vec::with_capacity(self.config.num_items * d);
        let mut true_weights = Vec::with_capacity(self.config.num_items);
        for _ in 0..self.config.num_items {
            let x = self.augment(unit_gaussian(&mut rng, self.config.dim_raw));
            true_weights.push(self.true_weight(&x));
            contexts.extend(x);
        }
        RoundContexts::new(round, d, contexts, true_weights)
    }

    /// Scan the list top-down with independent Bernoulli draws, stopping at
    /// the first click. Without a click every position is observed.
    pub fn play(&self, contexts: &RoundContexts, arm: &SuperArm) -> Result<CascadeFeedback> {
        if let Some(&bad) = arm.items().iter().find(|&&a| a >= contexts.num_items()) {
            return Err(Error::InvalidArm(format!(
                "item {bad} out of range for {} items",
                contexts.num_items()
            )));
        }
        let mut rng = stream_rng(self.config.seed, Stream::Clicks, contexts.round());
        let mut observed = Vec::with_capacity(arm.len());
        let mut click = None;
        for (pos, &a) in arm.items().iter().enumerate() {
            let hit = rng.random::<f64>() < contexts.true_weights()[a];
            observed.push(if hit { 1.0 } else { 0.0 });
            if hit {
                click = Some(pos);
                break;
            }
        }
        Ok(CascadeFeedback {
            click,
            observed_weights: observed,
        })
    }

    /// Baseline reward draw `N(u0, sd)` clipped to `[0, 1]`.
    pub fn baseline_reward_sample(&self, round: u64) -> Result<f64> {
        if !self.config.unknown_baseline {
            return Err(Error::ModeMismatch(
                "baseline rewards are only sampled in unknown-baseline mode".into(),
            ));
        }
        Ok(self.baseline_reward_unclipped(round).clamp(0.0, 1.0))
    }

    fn baseline_reward_unclipped(&self, round: u64) -> f64 {
        let sd = self.config.baseline_noise_sd;
        if sd == 0.0 {
            return self.config.u0;
        }
        let mut rng = stream_rng(self.config.seed, Stream::Baseline, round);
        Normal::new(self.config.u0, sd)
            .expect("sd validated finite and non-negative")
            .sample(&mut rng)
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
