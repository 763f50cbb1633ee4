//! C³-UCB and the conservative C⁴-UCB policies.
//!
//! Every policy builds the optimistic candidate `B_t` by running the greedy
//! oracle on the per-item upper bounds. The conservative policies then play
//! `B_t` only if a lower bound on the cumulative reward, counting `B_t` at
//! its lower bounds, stays above `(1 − ε)` times the baseline's cumulative
//! reward (or an upper bound on it when the baseline reward is unknown).
//! Otherwise the baseline is played and the model is left untouched.

mod baseline;
mod ledger;

pub use baseline::BaselineEstimator;
pub use ledger::{ConservativeLedger, LedgerMode, RefreshMode, UcbRound};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::{CascadeFeedback, RoundContexts};
use crate::error::{Error, Result};
use crate::linear_model::{ArmBounds, EllipsoidState, Observation};
use crate::reward::{greedy_oracle, RewardSpec, SuperArm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "c3")]
    C3,
    #[serde(rename = "c4-known")]
    C4Known,
    #[serde(rename = "c4-unknown-scalar")]
    C4UnknownScalar,
    #[serde(rename = "c4-unknown-linear")]
    C4UnknownLinear,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::C3 => "c3",
            PolicyKind::C4Known => "c4-known",
            PolicyKind::C4UnknownScalar => "c4-unknown-scalar",
            PolicyKind::C4UnknownLinear => "c4-unknown-linear",
        }
    }

    pub fn is_conservative(self) -> bool {
        self != PolicyKind::C3
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c3" => Ok(PolicyKind::C3),
            "c4-known" => Ok(PolicyKind::C4Known),
            "c4-unknown" | "c4-unknown-scalar" => Ok(PolicyKind::C4UnknownScalar),
            "c4-unknown-linear" => Ok(PolicyKind::C4UnknownLinear),
            other => Err(Error::InvalidConfig(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepType {
    Ucb,
    Conservative,
}

impl StepType {
    pub fn name(self) -> &'static str {
        match self {
            StepType::Ucb => "ucb",
            StepType::Conservative => "conservative",
        }
    }
}

impl FromStr for StepType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucb" => Ok(StepType::Ucb),
            "conservative" => Ok(StepType::Conservative),
            other => Err(Error::InvalidConfig(format!("unknown step type {other:?}"))),
        }
    }
}

/// Outcome of one policy decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub step: StepType,
    /// Optimistic list `B_t`; played only on a UCB step.
    pub candidate: SuperArm,
    /// Confidence bounds of `B_t`'s items in list order.
    pub candidate_bounds: Vec<ArmBounds>,
    /// `f(B_t, U_t)`.
    pub candidate_ucb: f64,
    /// `f(B_t, L_t)`.
    pub candidate_lcb: f64,
    /// Left-hand side of the budget check (NaN for C³-UCB).
    pub budget_lhs: f64,
    /// Right-hand side of the budget check (NaN for C³-UCB).
    pub budget_rhs: f64,
    /// Baseline value entering the check: `u0` or its upper bound.
    pub baseline_value: f64,
}

/// Confidence bounds of every item under the current model.
pub fn item_bounds(model: &EllipsoidState, contexts: &RoundContexts) -> Result<Vec<ArmBounds>> {
    if model.dim() != contexts.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: contexts.dim(),
        });
    }
    Ok((0..contexts.num_items())
        .map(|a| model.bounds_unchecked(contexts.context(a)))
        .collect())
}

struct Candidate {
    arm: SuperArm,
    bounds: Vec<ArmBounds>,
    ucb: f64,
    lcb: f64,
}

fn optimistic_candidate(model: &EllipsoidState, contexts: &RoundContexts, spec: &RewardSpec) -> Result<Candidate> {
    let bounds = item_bounds(model, contexts)?;
    let upper: Vec<f64> = bounds.iter().map(|b| b.upper).collect();
    let arm = greedy_oracle(spec, &upper, spec.k_max())?;
    let arm_bounds: Vec<ArmBounds> = arm.items().iter().map(|&a| bounds[a]).collect();
    let u: Vec<f64> = arm_bounds.iter().map(|b| b.upper).collect();
    let l: Vec<f64> = arm_bounds.iter().map(|b| b.lower).collect();
    Ok(Candidate {
        ucb: spec.reward_of_positions(&u),
        lcb: spec.reward_of_positions(&l),
        arm,
        bounds: arm_bounds,
    })
}

/// C³-UCB: the greedy list over upper confidence bounds.
pub fn c3_select(model: &EllipsoidState, contexts: &RoundContexts, spec: &RewardSpec) -> Result<SuperArm> {
    Ok(optimistic_candidate(model, contexts, spec)?.arm)
}

fn conservative_decision(
    model: &EllipsoidState,
    contexts: &RoundContexts,
    spec: &RewardSpec,
    ledger: &mut ConservativeLedger,
    baseline_value: f64,
) -> Result<Decision> {
    let candidate = optimistic_candidate(model, contexts, spec)?;
    let t = (ledger.rounds() + 1) as f64;
    let past = ledger.lower_bound_sum(model, spec)?;
    let lhs = past + candidate.lcb + ledger.cons_count() as f64 * baseline_value;
    let rhs = (1.0 - ledger.epsilon()) * t * baseline_value;
    let step = if lhs >= rhs {
        StepType::Ucb
    } else {
        StepType::Conservative
    };
    Ok(Decision {
        step,
        candidate: candidate.arm,
        candidate_bounds: candidate.bounds,
        candidate_ucb: candidate.ucb,
        candidate_lcb: candidate.lcb,
        budget_lhs: lhs,
        budget_rhs: rhs,
        baseline_value,
    })
}

/// C⁴-UCB with known baseline reward `u0`.
pub fn c4_known_step(
    model: &EllipsoidState,
    contexts: &RoundContexts,
    spec: &RewardSpec,
    ledger: &mut ConservativeLedger,
) -> Result<Decision> {
    let u0 = match ledger.mode() {
        LedgerMode::Known { u0 } => *u0,
        other => {
            return Err(Error::ModeMismatch(format!(
                "known-baseline step on a ledger in {other:?} mode"
            )))
        }
    };
    conservative_decision(model, contexts, spec, ledger, u0)
}

/// `f(A0, U_t)` for a baseline list given by fixed contexts.
pub fn baseline_upper_linear(model: &EllipsoidState, spec: &RewardSpec, baseline_contexts: &[f64]) -> Result<f64> {
    let d = model.dim();
    if baseline_contexts.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: baseline_contexts.len(),
        });
    }
    let mut upper = Vec::with_capacity(baseline_contexts.len() / d);
    for x in baseline_contexts.chunks_exact(d) {
        upper.push(model.bounds_for(x)?.upper);
    }
    Ok(spec.reward_of_positions(&upper))
}

/// C⁴-UCB with unknown baseline reward: `u0` is replaced by an upper bound
/// on the baseline reward.
pub fn c4_unknown_step(
    model: &EllipsoidState,
    contexts: &RoundContexts,
    spec: &RewardSpec,
    ledger: &mut ConservativeLedger,
    baseline: &BaselineEstimator,
) -> Result<Decision> {
    let value = match ledger.mode() {
        LedgerMode::UnknownScalar => baseline.upper(),
        LedgerMode::UnknownLinear { baseline_contexts } => baseline_upper_linear(model, spec, baseline_contexts)?,
        LedgerMode::Known { .. } => {
            return Err(Error::ModeMismatch(
                "unknown-baseline step on a known-baseline ledger".into(),
            ))
        }
    };
    conservative_decision(model, contexts, spec, ledger, value)
}

/// Per-run policy state: the model plus, for conservative policies, the
/// ledger and baseline estimator.
#[derive(Debug, Clone)]
pub struct Agent {
    kind: PolicyKind,
    model: EllipsoidState,
    spec: RewardSpec,
    ledger: Option<ConservativeLedger>,
    baseline: BaselineEstimator,
}

/// Quantities produced while folding a UCB round into the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbUpdate {
    /// `Σ_{k≤O_t} ‖γ_k x_k‖²_{V_{t-1}⁻¹}` over observed positions.
    pub norm_sq_sum: f64,
    pub log_det_before: f64,
    pub log_det_after: f64,
}

impl Agent {
    pub fn new(
        kind: PolicyKind,
        model: EllipsoidState,
        spec: RewardSpec,
        ledger: Option<ConservativeLedger>,
        baseline: BaselineEstimator,
    ) -> Result<Self> {
        let expected_mode_ok = match (&kind, ledger.as_ref().map(|l| l.mode())) {
            (PolicyKind::C3, _) => true,
            (PolicyKind::C4Known, Some(LedgerMode::Known { .. })) => true,
            (PolicyKind::C4UnknownScalar, Some(LedgerMode::UnknownScalar)) => true,
            (PolicyKind::C4UnknownLinear, Some(LedgerMode::UnknownLinear { .. })) => true,
            _ => false,
        };
        if !expected_mode_ok {
            return Err(Error::ModeMismatch(format!("policy {kind} needs a matching ledger")));
        }
        Ok(Self {
            kind,
            model,
            spec,
            ledger,
            baseline,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn model(&self) -> &EllipsoidState {
        &self.model
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn ledger(&self) -> Option<&ConservativeLedger> {
        self.ledger.as_ref()
    }

    pub fn baseline(&self) -> &BaselineEstimator {
        &self.baseline
    }

    pub fn decide(&mut self, contexts: &RoundContexts) -> Result<Decision> {
        match (self.kind, self.ledger.as_mut()) {
            (PolicyKind::C3, _) | (_, None) => {
                let c = optimistic_candidate(&self.model, contexts, &self.spec)?;
                Ok(Decision {
                    step: StepType::Ucb,
                    candidate: c.arm,
                    candidate_bounds: c.bounds,
                    candidate_ucb: c.ucb,
                    candidate_lcb: c.lcb,
                    budget_lhs: f64::NAN,
                    budget_rhs: f64::NAN,
                    baseline_value: f64::NAN,
                })
            }
            (PolicyKind::C4Known, Some(ledger)) => c4_known_step(&self.model, contexts, &self.spec, ledger),
            (_, Some(ledger)) => c4_unknown_step(&self.model, contexts, &self.spec, ledger, &self.baseline),
        }
    }

    /// Update the model from the cascade feedback of a played list and record
    /// the round in the ledger.
    pub fn observe_ucb(
        &mut self,
        round: u64,
        decision: &Decision,
        contexts: &RoundContexts,
        feedback: &CascadeFeedback,
    ) -> Result<UcbUpdate> {
        let gammas = self.spec.discounts.gammas();
        let items = decision.candidate.items();
        if feedback.stop_pos() > items.len() {
            return Err(Error::InvalidArm("feedback longer than the played list".into()));
        }
        let mut norm_sq_sum = 0.0;
        let mut observations = Vec::with_capacity(feedback.stop_pos());
        for (k, &w) in feedback.observed_weights.iter().enumerate() {
            let x = contexts.context(items[k]);
            norm_sq_sum += gammas[k] * gammas[k] * self.model.norm_inv_sq(x);
            observations.push(Observation {
                context: x,
                discount: gammas[k],
                weight: w,
            });
        }
        let log_det_before = self.model.log_det();
        self.model.update(&observations)?;
        if let Some(ledger) = self.ledger.as_mut() {
            let arm_contexts = contexts.arm_contexts(&decision.candidate);
            ledger.record_ucb(
                round,
                decision.candidate.clone(),
                &arm_contexts,
                decision.candidate_lcb,
                &self.model,
            )?;
        }
        Ok(UcbUpdate {
            norm_sq_sum,
            log_det_before,
            log_det_after: self.model.log_det(),
        })
    }

    /// Record a conservative round; `baseline_sample` feeds the scalar
    /// baseline estimator.
    pub fn observe_conservative(&mut self, round: u64, baseline_sample: Option<f64>) -> Result<()> {
        let ledger = self
            .ledger
            .as_mut()
            .ok_or_else(|| Error::ModeMismatch("C3-UCB never plays the baseline".into()))?;
        ledger.record_conservative(round)?;
        if let Some(sample) = baseline_sample {
            self.baseline.observe(sample);
        }
        Ok(())
    }
}
