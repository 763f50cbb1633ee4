//! Seeded experiment runs.
//!
//! A run draws contexts, lets the policy decide, plays the chosen list (or
//! the baseline), updates the model and ledger and logs one [`RoundRecord`]
//! per round. Regret is measured against expected rewards under the true
//! weights. When `λ ≥ C_γ` and contexts have unit norm, the design-matrix
//! envelopes are asserted every round and a violation fails the run.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::environment::{full_observation_probability, World, WorldConfig};
use crate::error::{Error, Result};
use crate::linear_model::EllipsoidState;
use crate::policies::{
    Agent, BaselineEstimator, ConservativeLedger, LedgerMode, PolicyKind, RefreshMode, StepType,
};
use crate::reward::{greedy_oracle, DiscountProfile, RewardSpec, SuperArm};

/// Relative slack allowed on the per-round invariant checks.
const CHECK_TOL: f64 = 1e-9;

/// Flat key-value experiment description; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim_raw: usize,
    pub num_items: usize,
    pub k_max: usize,
    /// Position discounts; all ones when absent.
    pub discounts: Option<Vec<f64>>,
    pub u0: f64,
    pub baseline_noise_sd: f64,
    pub paper_literal_contexts: bool,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda_reg: f64,
    pub noise_r: f64,
    pub refresh_mode: RefreshMode,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub output_path: Option<PathBuf>,
    /// Force the design-matrix envelope checks on or off. By default they run
    /// whenever `λ ≥ C_γ` and contexts are unit-norm.
    pub check_envelopes: Option<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim_raw: 19,
            num_items: 200,
            k_max: 4,
            discounts: None,
            u0: 0.7,
            baseline_noise_sd: 0.1,
            paper_literal_contexts: false,
            policy: PolicyKind::C4Known,
            horizon: 10_000,
            epsilon: 0.5,
            delta: 0.1,
            lambda_reg: 0.1,
            noise_r: 0.5,
            refresh_mode: RefreshMode::Refresh,
            seeds: (0..20).collect(),
            alpha: 1.0,
            output_path: None,
            check_envelopes: None,
        }
    }
}

impl ExperimentConfig {
    /// Full-length preset: `T = 4·10⁴` with stale lower bounds.
    pub fn full_scale(mut self) -> Self {
        self.horizon = 40_000;
        self.refresh_mode = RefreshMode::Stale;
        self
    }

    pub fn discount_profile(&self) -> Result<DiscountProfile> {
        match &self.discounts {
            Some(g) => DiscountProfile::new(g.clone()),
            None => DiscountProfile::uniform(self.k_max),
        }
    }

    pub fn world_config(&self, seed: u64) -> Result<WorldConfig> {
        Ok(WorldConfig {
            dim_raw: self.dim_raw,
            num_items: self.num_items,
            k_max: self.k_max,
            discounts: self.discount_profile()?,
            u0: self.u0,
            baseline_noise_sd: self.baseline_noise_sd,
            unknown_baseline: self.policy == PolicyKind::C4UnknownScalar,
            paper_literal_contexts: self.paper_literal_contexts,
            seed,
        })
    }

    pub fn envelopes_enabled(&self) -> Result<bool> {
        let c_gamma = self.discount_profile()?.c_gamma();
        Ok(self
            .check_envelopes
            .unwrap_or(self.lambda_reg >= c_gamma && !self.paper_literal_contexts))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg > 0.0) {
            return bad(format!("lambda_reg must be positive, got {}", self.lambda_reg));
        }
        if !(self.noise_r.is_finite() && self.noise_r > 0.0) {
            return bad(format!("noise_r must be positive, got {}", self.noise_r));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        let profile = self.discount_profile()?;
        if self.check_envelopes == Some(true) && self.lambda_reg < profile.c_gamma() {
            return bad(format!(
                "envelope checks need lambda_reg >= C_gamma = {}, got {}",
                profile.c_gamma(),
                self.lambda_reg
            ));
        }
        self.world_config(0)?.validate()
    }

    /// Parse a JSON document, applying defaults for missing keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Interpret a command-line value as JSON when possible, else as a string.
pub fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Cartesian product of grid values over a base config. Each point gets a
/// label `<policy>[_key=value...]` used to name its run files.
pub fn expand_grid(base: &Value, grid: &[(String, Vec<Value>)]) -> Result<Vec<(String, ExperimentConfig)>> {
    let Value::Object(base_map) = base else {
        return Err(Error::InvalidConfig("config must be a JSON object".into()));
    };
    let mut points: Vec<(Vec<(String, Value)>, serde_json::Map<String, Value>)> =
        vec![(Vec::new(), base_map.clone())];
    for (key, values) in grid {
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("grid key {key} has no values")));
        }
        let mut next = Vec::with_capacity(points.len() * values.len());
        for (tags, map) in &points {
            for v in values {
                let mut m = map.clone();
                m.insert(key.clone(), v.clone());
                let mut t = tags.clone();
                t.push((key.clone(), v.clone()));
                next.push((t, m));
            }
        }
        points = next;
    }
    points
        .into_iter()
        .map(|(tags, map)| {
            let config = ExperimentConfig::from_value(Value::Object(map))?;
            config.validate()?;
            let mut label = config.policy.name().to_string();
            for (k, v) in tags.iter().filter(|(k, _)| k != "policy") {
                let shown = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                label.push_str(&format!("_{k}={shown}"));
            }
            Ok((label, config))
        })
        .collect()
}

/// One logged round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub step_type: StepType,
    /// Played list; empty for a baseline round.
    pub arm: Vec<usize>,
    /// Expected reward of the played action.
    pub f_expected: f64,
    pub f_star: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    /// Cumulative expected reward.
    pub cum_reward: f64,
    pub budget_lhs: f64,
    pub budget_rhs: f64,
    pub beta: f64,
    pub log_det: f64,
    pub n_ucb: u64,
    pub n_cons: u64,
    /// Not serialised to CSV.
    pub diagnostics: RoundDiagnostics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundDiagnostics {
    /// Probability of observing the whole played list (UCB rounds).
    pub p_full: Option<f64>,
    /// Whether `θ*` was inside the confidence ellipsoid used this round.
    pub theta_covered: Option<bool>,
    pub realized_reward: Option<f64>,
    /// `Σ ‖γ_k x‖²_{V⁻¹}` accumulated over observed positions so far.
    pub norm_sum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: u64,
    pub n_ucb: u64,
    pub n_cons: u64,
    pub cum_regret: f64,
    pub cum_reward: f64,
    /// Expected reward of one baseline round.
    pub baseline_reward: f64,
    /// Fraction of rounds with `θ*` inside the confidence ellipsoid.
    pub coverage: f64,
    /// Rounds where `Σ f(A_s, w̄_s) < (1−ε)·u0·t`.
    pub budget_violations: u64,
    pub envelopes_checked: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
}

fn violation(seed: u64, t: u64, what: String) -> Error {
    Error::InvariantViolation(format!("seed {seed}, round {t}: {what}"))
}

/// Run one seed of an experiment.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let world = World::new(config.world_config(seed)?)?;
    let d = world.dim();
    let profile = config.discount_profile()?;
    let c_gamma = profile.c_gamma();
    let gammas = profile.gammas().to_vec();
    let spec = RewardSpec::disjunctive(profile);
    let k_max = config.k_max;

    let model = EllipsoidState::new(d, config.lambda_reg, config.noise_r, config.delta)?;
    let ledger_mode = match config.policy {
        PolicyKind::C3 => None,
        PolicyKind::C4Known => Some(LedgerMode::Known { u0: config.u0 }),
        PolicyKind::C4UnknownScalar => Some(LedgerMode::UnknownScalar),
        PolicyKind::C4UnknownLinear => Some(LedgerMode::UnknownLinear {
            baseline_contexts: world.baseline_contexts().to_vec(),
        }),
    };
    let ledger = ledger_mode
        .map(|mode| ConservativeLedger::new(d, config.epsilon, mode, config.refresh_mode))
        .transpose()?;
    let mut agent = Agent::new(
        config.policy,
        model,
        spec.clone(),
        ledger,
        BaselineEstimator::new(config.horizon, config.delta),
    )?;

    let baseline_reward = match config.policy {
        PolicyKind::C4UnknownLinear => {
            let w: Vec<f64> = world
                .baseline_contexts()
                .chunks_exact(d)
                .map(|x| world.true_weight(x))
                .collect();
            spec.reward_of_positions(&w)
        }
        _ => config.u0,
    };
    let envelopes = config.envelopes_enabled()?;
    let lambda = config.lambda_reg;

    let mut records = Vec::with_capacity(config.horizon as usize);
    let (mut cum_regret, mut cum_reward) = (0.0, 0.0);
    let (mut n_ucb, mut n_cons) = (0u64, 0u64);
    let (mut covered, mut budget_violations) = (0u64, 0u64);
    let mut norm_sum = 0.0;

    for t in 1..=config.horizon {
        let contexts = world.draw_contexts(t)?;
        let weights = contexts.true_weights();
        let best_list = greedy_oracle(&spec, weights, k_max)?;
        let f_star = spec.reward(&best_list, weights)?.max(baseline_reward);
        let theta_covered = agent.model().confidence_contains(world.theta_star());
        covered += u64::from(theta_covered);

        let decision = agent.decide(&contexts)?;
        let (f_expected, arm, p_full, realized) = match decision.step {
            StepType::Ucb => {
                let arm: &SuperArm = &decision.candidate;
                let arm_weights: Vec<f64> = arm.items().iter().map(|&a| weights[a]).collect();
                let f = spec.reward_of_positions(&arm_weights);

                // UCB–LCB gap: f(A,U) − f(A,L) ≤ 4B Σ γ_k β‖x_k‖_{V⁻¹}.
                let gap = decision.candidate_ucb - decision.candidate_lcb;
                let gap_bound: f64 = 4.0
                    * spec.lipschitz_b
                    * decision
                        .candidate_bounds
                        .iter()
                        .zip(&gammas)
                        .map(|(b, g)| g * b.radius)
                        .sum::<f64>();
                if gap > gap_bound * (1.0 + CHECK_TOL) + CHECK_TOL {
                    return Err(violation(seed, t, format!("UCB-LCB gap {gap} exceeds {gap_bound}")));
                }

                let feedback = world.play(&contexts, arm)?;
                let update = agent.observe_ucb(t, &decision, &contexts, &feedback)?;
                n_ucb += 1;
                norm_sum += update.norm_sq_sum;
                if update.log_det_after < update.log_det_before {
                    return Err(violation(
                        seed,
                        t,
                        format!(
                            "ln det V decreased from {} to {}",
                            update.log_det_before, update.log_det_after
                        ),
                    ));
                }
                if envelopes {
                    let n = n_ucb as f64;
                    let norm_env = 2.0 * d as f64 * (c_gamma * n / (lambda * d as f64)).ln_1p();
                    if norm_sum > norm_env * (1.0 + CHECK_TOL) {
                        return Err(violation(seed, t, format!("norm sum {norm_sum} exceeds {norm_env}")));
                    }
                    let det_env = d as f64 * (lambda + c_gamma * n / d as f64).ln();
                    let log_det = agent.model().log_det();
                    if log_det > det_env + CHECK_TOL * det_env.abs().max(1.0) {
                        return Err(violation(seed, t, format!("ln det V {log_det} exceeds {det_env}")));
                    }
                }
                let realized = feedback.click.map_or(0.0, |k| gammas[k]);
                (
                    f,
                    arm.items().to_vec(),
                    Some(full_observation_probability(&arm_weights)),
                    realized,
                )
            }
            StepType::Conservative => {
                let sample = if config.policy == PolicyKind::C4UnknownScalar {
                    Some(world.baseline_reward_sample(t)?)
                } else {
                    None
                };
                agent.observe_conservative(t, sample)?;
                n_cons += 1;
                (baseline_reward, Vec::new(), None, sample.unwrap_or(baseline_reward))
            }
        };

        let inst_regret = config.alpha * f_star - f_expected;
        cum_regret += inst_regret;
        cum_reward += f_expected;
        let floor = (1.0 - config.epsilon) * baseline_reward * t as f64;
        if cum_reward < floor {
            budget_violations += 1;
        }
        let budget_rhs = if decision.budget_rhs.is_nan() {
            floor
        } else {
            decision.budget_rhs
        };
        records.push(RoundRecord {
            t,
            step_type: decision.step,
            arm,
            f_expected,
            f_star,
            inst_regret,
            cum_regret,
            cum_reward,
            budget_lhs: decision.budget_lhs,
            budget_rhs,
            beta: agent.model().beta(),
            log_det: agent.model().log_det(),
            n_ucb,
            n_cons,
            diagnostics: RoundDiagnostics {
                p_full,
                theta_covered: Some(theta_covered),
                realized_reward: Some(realized),
                norm_sum: Some(norm_sum),
            },
        });
    }

    let summary = RunSummary {
        seed,
        horizon: config.horizon,
        n_ucb,
        n_cons,
        cum_regret,
        cum_reward,
        baseline_reward,
        coverage: covered as f64 / config.horizon as f64,
        budget_violations,
        envelopes_checked: envelopes,
    };
    Ok(RunOutcome {
        seed,
        records,
        summary,
    })
}

/// Run every configured seed in parallel; results are ordered by seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    seeds.par_iter().map(|&s| run_single(config, s)).collect()
}

/// Run every (grid point, seed) pair in parallel. The output is sorted by
/// label and seed.
pub fn run_grid(points: &[(String, ExperimentConfig)]) -> Result<Vec<(String, RunOutcome)>> {
    let jobs: Vec<(&str, &ExperimentConfig, u64)> = points
        .iter()
        .flat_map(|(label, cfg)| cfg.seeds.iter().map(move |&s| (label.as_str(), cfg, s)))
        .collect();
    let mut out: Vec<(String, RunOutcome)> = jobs
        .par_iter()
        .map(|&(label, cfg, seed)| run_single(cfg, seed).map(|r| (label.to_string(), r)))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.seed.cmp(&b.1.seed)));
    Ok(out)
}
