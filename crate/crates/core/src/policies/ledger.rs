use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_model::{dot, ArmBounds, EllipsoidState};
use crate::reward::{RewardSpec, SuperArm};

/// How the baseline's contribution to the budget is valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LedgerMode {
    /// Baseline reward `u0` is known.
    Known { u0: f64 },
    /// Baseline reward estimated from its own samples.
    UnknownScalar,
    /// Baseline list with fixed contexts, valued by the linear model's upper bounds.
    UnknownLinear { baseline_contexts: Vec<f64> },
}

impl LedgerMode {
    pub fn is_known(&self) -> bool {
        matches!(self, LedgerMode::Known { .. })
    }
}

/// Whether past lower bounds are re-evaluated under the current model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefreshMode {
    /// Re-evaluate `f(A_n, L_n)` for every stored UCB round each round.
    #[default]
    Refresh,
    /// Keep the value computed when round `n` was played.
    Stale,
}

/// A round in which the optimistic list was played.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbRound {
    pub round: u64,
    pub arm: SuperArm,
    /// `f(A_n, L_n)` as computed when the round was played.
    pub lcb_at_play: f64,
    start: usize,
}

/// Stored item contexts together with cached `xᵀV⁻¹x` that follow the model
/// through its rank-one step log.
#[derive(Debug, Clone)]
struct LowerBoundStore {
    dim: usize,
    contexts: Vec<f64>,
    quad: Vec<f64>,
    version: u64,
    epoch: u64,
}

impl LowerBoundStore {
    fn sync(&mut self, model: &EllipsoidState) {
        if self.epoch == model.epoch() && self.version == model.version() {
            return;
        }
        let d = self.dim;
        match model.steps_since(self.version).filter(|_| self.epoch == model.epoch()) {
            Some(steps) => {
                for (x, q) in self.contexts.chunks_exact(d).zip(self.quad.iter_mut()) {
                    for step in steps {
                        let p = dot(x, &step.direction);
                        *q -= step.scale * p * p;
                    }
                    *q = q.max(0.0);
                }
            }
            None => {
                for (x, q) in self.contexts.chunks_exact(d).zip(self.quad.iter_mut()) {
                    *q = model.norm_inv_sq(x);
                }
            }
        }
        self.version = model.version();
        self.epoch = model.epoch();
    }

    fn push(&mut self, model: &EllipsoidState, contexts: &[f64]) {
        self.sync(model);
        for x in contexts.chunks_exact(self.dim) {
            self.contexts.extend_from_slice(x);
            self.quad.push(model.norm_inv_sq(x));
        }
    }
}

/// Bookkeeping over `N_t` (UCB rounds) and `D_t` (conservative rounds).
#[derive(Debug, Clone)]
pub struct ConservativeLedger {
    epsilon: f64,
    mode: LedgerMode,
    refresh: RefreshMode,
    ucb_rounds: Vec<UcbRound>,
    cons_count: u64,
    stale_sum: f64,
    store: LowerBoundStore,
}

impl ConservativeLedger {
    pub fn new(dim: usize, epsilon: f64, mode: LedgerMode, refresh: RefreshMode) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        match &mode {
            LedgerMode::Known { u0 } if !(0.0..=1.0).contains(u0) => {
                return Err(Error::InvalidConfig(format!("u0 must lie in [0, 1], got {u0}")));
            }
            LedgerMode::UnknownLinear { baseline_contexts }
                if baseline_contexts.is_empty() || baseline_contexts.len() % dim != 0 =>
            {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: baseline_contexts.len(),
                });
            }
            _ => {}
        }
        Ok(Self {
            epsilon,
            mode,
            refresh,
            ucb_rounds: Vec::new(),
            cons_count: 0,
            stale_sum: 0.0,
            store: LowerBoundStore {
                dim,
                contexts: Vec::new(),
                quad: Vec::new(),
                version: 0,
                epoch: 0,
            },
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> &LedgerMode {
        &self.mode
    }

    pub fn refresh(&self) -> RefreshMode {
        self.refresh
    }

    pub fn ucb_rounds(&self) -> &[UcbRound] {
        &self.ucb_rounds
    }

    /// Stored contexts of the `i`-th UCB round, concatenated in list order.
    pub fn ucb_round_contexts(&self, i: usize) -> &[f64] {
        let r = &self.ucb_rounds[i];
        let d = self.store.dim;
        &self.store.contexts[r.start * d..(r.start + r.arm.len()) * d]
    }

    /// `|N_t|`.
    pub fn ucb_count(&self) -> u64 {
        self.ucb_rounds.len() as u64
    }

    /// `d_t = |D_t|`.
    pub fn cons_count(&self) -> u64 {
        self.cons_count
    }

    /// Rounds recorded so far, `|N_t| + d_t`.
    pub fn rounds(&self) -> u64 {
        self.ucb_count() + self.cons_count
    }

    fn check_round(&self, round: u64) -> Result<()> {
        if round != self.rounds() + 1 {
            return Err(Error::InvariantViolation(format!(
                "ledger expected round {}, got {round}",
                self.rounds() + 1
            )));
        }
        Ok(())
    }

    /// Append a UCB round. `arm_contexts` holds the arm's item contexts in
    /// list order; `lcb_at_play` is `f(B_t, L_t)` from the decision.
    pub fn record_ucb(
        &mut self,
        round: u64,
        arm: SuperArm,
        arm_contexts: &[f64],
        lcb_at_play: f64,
        model: &EllipsoidState,
    ) -> Result<()> {
        self.check_round(round)?;
        if arm_contexts.len() != arm.len() * self.store.dim {
            return Err(Error::DimensionMismatch {
                expected: arm.len() * self.store.dim,
                got: arm_contexts.len(),
            });
        }
        let start = self.store.quad.len();
        if self.refresh == RefreshMode::Refresh {
            self.store.push(model, arm_contexts);
        } else {
            self.store.contexts.extend_from_slice(arm_contexts);
            self.store.quad.extend(std::iter::repeat_n(0.0, arm.len()));
        }
        self.stale_sum += lcb_at_play;
        self.ucb_rounds.push(UcbRound {
            round,
            arm,
            lcb_at_play,
            start,
        });
        Ok(())
    }

    pub fn record_conservative(&mut self, round: u64) -> Result<()> {
        self.check_round(round)?;
        self.cons_count += 1;
        Ok(())
    }

    /// `Σ_{n∈N} f(A_n, L_n)` under the current model (refresh mode) or the
    /// values cached at play time (stale mode).
    pub fn lower_bound_sum(&mut self, model: &EllipsoidState, spec: &RewardSpec) -> Result<f64> {
        if model.dim() != self.store.dim {
            return Err(Error::DimensionMismatch {
                expected: self.store.dim,
                got: model.dim(),
            });
        }
        if self.refresh == RefreshMode::Stale {
            return Ok(self.stale_sum);
        }
        self.store.sync(model);
        let d = self.store.dim;
        let theta = model.theta_hat();
        let beta = model.beta();
        let mut lower = Vec::with_capacity(spec.k_max());
        let mut total = 0.0;
        for r in &self.ucb_rounds {
            lower.clear();
            for i in r.start..r.start + r.arm.len() {
                let x = &self.store.contexts[i * d..(i + 1) * d];
                let b = ArmBounds::from_mean_radius(dot(theta, x), beta * self.store.quad[i].sqrt());
                lower.push(b.lower);
            }
            total += spec.reward_of_positions(&lower);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::Observation;
    use crate::reward::DiscountProfile;

    fn model() -> EllipsoidState {
        EllipsoidState::new(2, 1.0, 0.5, 0.1).unwrap()
    }

    #[test]
    fn counts_add_up() {
        let m = model();
        let mut l = ConservativeLedger::new(2, 0.5, LedgerMode::Known { u0: 0.7 }, RefreshMode::Refresh).unwrap();
        let arm = SuperArm::new(vec![0], 2).unwrap();
        let mut t = 0;
        for step in [true, true, false, true, false, true, false, true] {
            t += 1;
            if step {
                l.record_ucb(t, arm.clone(), &[0.6, 0.8], 0.0, &m).unwrap();
            } else {
                l.record_conservative(t).unwrap();
            }
        }
        assert_eq!((l.ucb_count(), l.cons_count(), l.rounds()), (5, 3, 8));
        assert!(l.record_conservative(10).is_err());
    }

    #[test]
    fn stale_mode_uses_cached_values() {
        let mut m = model();
        let spec = RewardSpec::disjunctive(DiscountProfile::uniform(2).unwrap());
        let mut l = ConservativeLedger::new(2, 0.5, LedgerMode::Known { u0: 0.7 }, RefreshMode::Stale).unwrap();
        let arm = SuperArm::new(vec![0, 1], 2).unwrap();
        l.record_ucb(1, arm.clone(), &[0.6, 0.8, 0.8, 0.6], 0.25, &m).unwrap();
        m.update(&[Observation {
            context: &[0.6, 0.8],
            discount: 1.0,
            weight: 1.0,
        }])
        .unwrap();
        l.record_ucb(2, arm, &[0.6, 0.8, 0.8, 0.6], 0.5, &m).unwrap();
        assert_eq!(l.ucb_rounds()[0].lcb_at_play, 0.25);
        assert_eq!(l.lower_bound_sum(&m, &spec).unwrap(), 0.75);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(ConservativeLedger::new(2, 0.0, LedgerMode::UnknownScalar, RefreshMode::Refresh).is_err());
        assert!(ConservativeLedger::new(2, 1.5, LedgerMode::UnknownScalar, RefreshMode::Refresh).is_err());
        assert!(ConservativeLedger::new(2, 0.5, LedgerMode::Known { u0: 2.0 }, RefreshMode::Refresh).is_err());
        let bad = LedgerMode::UnknownLinear {
            baseline_contexts: vec![0.1, 0.2, 0.3],
        };
        assert!(ConservativeLedger::new(2, 0.5, bad, RefreshMode::Refresh).is_err());
    }
}
