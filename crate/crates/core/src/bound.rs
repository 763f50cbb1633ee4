//! High-probability regret bounds for the conservative policies and the
//! empirical problem constants they depend on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, RoundRecord};

/// Numerator constant shared by both `Ω` expressions.
const OMEGA_NUMERATOR: f64 = 442_368.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Lipschitz constant of the reward.
    pub b: f64,
    /// Sub-Gaussian constant of the weight noise.
    pub r: f64,
    pub k: f64,
    pub d: f64,
    pub c_gamma: f64,
    pub lambda: f64,
    /// Minimum full-observation probability.
    pub p_star: f64,
    pub epsilon: f64,
    pub u0: f64,
    pub delta_l: f64,
    pub delta_h: f64,
    pub alpha: f64,
    /// First position discount; only the unknown-baseline constant uses it.
    pub gamma1: f64,
}

impl BoundParams {
    /// Parameters implied by an experiment configuration plus the measured
    /// problem constants.
    pub fn from_config(config: &ExperimentConfig, p_star: f64, delta_l: f64, delta_h: f64) -> Result<Self> {
        let profile = config.discount_profile()?;
        Ok(Self {
            b: 1.0,
            r: config.noise_r,
            k: config.k_max as f64,
            d: (config.dim_raw + 1) as f64,
            c_gamma: profile.c_gamma(),
            lambda: config.lambda_reg,
            p_star,
            epsilon: config.epsilon,
            u0: config.u0,
            delta_l,
            delta_h,
            alpha: config.alpha,
            gamma1: profile.gammas()[0],
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.p_star > 0.0 && self.p_star <= 1.0) {
            return Err(Error::UndefinedBound(format!("p_star must lie in (0, 1], got {}", self.p_star)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::UndefinedBound(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.u0 > 0.0) {
            return Err(Error::UndefinedBound(format!("u0 must be positive, got {}", self.u0)));
        }
        if self.delta_l > self.delta_h {
            return Err(Error::InvalidConfig(format!(
                "delta_l {} exceeds delta_h {}",
                self.delta_l, self.delta_h
            )));
        }
        let positive = [self.b, self.r, self.k, self.d, self.c_gamma, self.lambda];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("B, R, K, d, C_gamma and lambda must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKnowledge {
    Known,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub regret_bound: f64,
    pub omega: f64,
    /// Bound on the number of conservative rounds, `Ω/(εu0) + 1`.
    pub d_t_bound: f64,
}

/// Evaluate the horizon-`T` regret bound and its conservative constant.
pub fn theoretical_bound(params: &BoundParams, horizon: u64, mode: BaselineKnowledge) -> Result<BoundValue> {
    params.validate()?;
    if horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let p = params;
    let t = horizon as f64;
    let growth = (p.c_gamma * t / (p.lambda * p.d)).ln_1p();

    // ln[(1 + C_γT/(λd))^d · T] expanded to avoid overflow.
    let radius = p.r * (p.d * growth + t.ln()).sqrt() + p.lambda.sqrt();
    let optimistic = 2.0 * std::f64::consts::SQRT_2 * p.b / p.p_star * radius * (t * p.k * p.d * growth).sqrt();

    let core = OMEGA_NUMERATOR
        * p.b.powi(4)
        * p.r.powi(4)
        * p.k.powi(2)
        * p.d.powi(4)
        * (1.0 + p.c_gamma / (p.lambda * p.d)).sqrt()
        / p.p_star.powi(4);
    let omega = match mode {
        BaselineKnowledge::Known => core / (p.epsilon * p.u0 + p.delta_l).powi(3) + (1.0 - p.epsilon) * p.u0,
        BaselineKnowledge::Unknown => {
            let shifted = p.u0 + p.b * p.k * p.gamma1;
            let first = core / (p.epsilon.powi(3) * shifted.powi(3)) + (1.0 - p.epsilon) * shifted;
            let second = core / p.epsilon.powi(3) + (1.0 - p.epsilon);
            first.max(second)
        }
    };
    let d_t_bound = omega / (p.epsilon * p.u0) + 1.0;
    Ok(BoundValue {
        regret_bound: optimistic + p.alpha * t.sqrt() + d_t_bound * p.delta_h,
        omega,
        d_t_bound,
    })
}

/// Estimate `p*`, `Δ_l` and `Δ_h` from logged rounds.
///
/// `p*` is the smallest full-observation probability of any played list
/// (1 when no list was played); the gaps are the extremes of `α f*_t − u0`.
pub fn empirical_pstar_delta<'a>(
    records: impl IntoIterator<Item = &'a RoundRecord>,
    alpha: f64,
    u0: f64,
) -> (f64, f64, f64) {
    let mut p_star: f64 = 1.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        if let Some(p) = r.diagnostics.p_full {
            p_star = p_star.min(p);
        }
        let gap = alpha * r.f_star - u0;
        lo = lo.min(gap);
        hi = hi.max(gap);
    }
    if lo > hi {
        return (p_star, 0.0, 0.0);
    }
    (p_star, lo, hi)
}
