//! Super arms, position discounts, the disjunctive cascading reward and the
//! selection oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_ITEMS: usize = 12;
/// Largest list length the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_K: usize = 4;

/// Ordered list of distinct item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuperArm(Vec<usize>);

impl SuperArm {
    pub fn new(items: Vec<usize>, k_max: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArm("empty list".into()));
        }
        if items.len() > k_max {
            return Err(Error::InvalidArm(format!(
                "length {} exceeds k_max {k_max}",
                items.len()
            )));
        }
        for (i, a) in items.iter().enumerate() {
            if items[..i].contains(a) {
                return Err(Error::InvalidArm(format!("item {a} appears twice")));
            }
        }
        Ok(Self(items))
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Position discounts `γ_1 ≥ γ_2 ≥ … ≥ γ_K`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscountProfile(Vec<f64>);

impl DiscountProfile {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidConfig("discount profile needs at least one position".into()));
        }
        for &g in &gammas {
            if !g.is_finite() {
                return Err(Error::NonFinite("discount profile"));
            }
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidDiscount(g));
            }
        }
        if gammas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(format!(
                "discounts must be non-increasing, got {gammas:?}"
            )));
        }
        Ok(Self(gammas))
    }

    /// `γ_k = 1` for all `k ≤ K`.
    pub fn uniform(k_max: usize) -> Result<Self> {
        Self::new(vec![1.0; k_max])
    }

    pub fn gammas(&self) -> &[f64] {
        &self.0
    }

    pub fn k_max(&self) -> usize {
        self.0.len()
    }

    /// `C_γ = Σ γ_k²`.
    pub fn c_gamma(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum()
    }
}

impl TryFrom<Vec<f64>> for DiscountProfile {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DiscountProfile> for Vec<f64> {
    fn from(value: DiscountProfile) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// User stops at the first attractive item.
    Disjunctive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub lipschitz_b: f64,
    pub discounts: DiscountProfile,
}

impl RewardSpec {
    pub fn disjunctive(discounts: DiscountProfile) -> Self {
        Self {
            kind: RewardKind::Disjunctive,
            lipschitz_b: 1.0,
            discounts,
        }
    }

    pub fn k_max(&self) -> usize {
        self.discounts.k_max()
    }

    /// Reward of a list whose k-th position has weight `position_weights[k]`.
    /// Inputs are assumed to be in `[0, 1]`; no validation happens here.
    pub fn reward_of_positions(&self, position_weights: &[f64]) -> f64 {
        match self.kind {
            RewardKind::Disjunctive => {
                let mut total = 0.0;
                let mut survive = 1.0;
                for (&w, &g) in position_weights.iter().zip(self.discounts.gammas()) {
                    total += g * survive * w;
                    survive *= 1.0 - w;
                }
                total
            }
        }
    }

    /// `f(A, w)` for a super arm under an item-indexed weight vector.
    pub fn reward(&self, arm: &SuperArm, weights: &[f64]) -> Result<f64> {
        if arm.len() > self.k_max() {
            return Err(Error::InvalidArm(format!(
                "length {} exceeds k_max {}",
                arm.len(),
                self.k_max()
            )));
        }
        let mut position_weights = Vec::with_capacity(arm.len());
        for &a in arm.items() {
            let w = *weights.get(a).ok_or_else(|| {
                Error::InvalidArm(format!("item {a} out of range for {} weights", weights.len()))
            })?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::WeightOutOfRange { index: a, value: w });
            }
            position_weights.push(w);
        }
        Ok(self.reward_of_positions(&position_weights))
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArm("no items available".into()));
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::WeightOutOfRange { index, value });
        }
    }
    Ok(())
}

fn check_k(spec: &RewardSpec, k_max: usize) -> Result<()> {
    if k_max == 0 || k_max > spec.k_max() {
        return Err(Error::InvalidConfig(format!(
            "k_max must lie in 1..={}, got {k_max}",
            spec.k_max()
        )));
    }
    Ok(())
}

/// Top-`k_max` items by weight, highest first, ties to the lower index.
///
/// Exact for the disjunctive reward with non-increasing discounts.
pub fn greedy_oracle(spec: &RewardSpec, weights: &[f64], k_max: usize) -> Result<SuperArm> {
    check_k(spec, k_max)?;
    check_weights(weights)?;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let by_weight = |a: &usize, b: &usize| weights[*b].total_cmp(&weights[*a]).then(a.cmp(b));
    let k = k_max.min(weights.len());
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_weight);
        order.truncate(k);
    }
    order.sort_unstable_by(by_weight);
    Ok(SuperArm(order))
}

/// Exhaustive maximiser over all ordered lists of length `1..=k_max`.
///
/// Lists are visited in lexicographic order of their index sequences and a
/// later list replaces the incumbent only when strictly better.
pub fn brute_force_oracle(spec: &RewardSpec, weights: &[f64], k_max: usize) -> Result<SuperArm> {
    if weights.len() > BRUTE_FORCE_MAX_ITEMS || k_max > BRUTE_FORCE_MAX_K {
        return Err(Error::SizeGuard {
            items: weights.len(),
            k_max,
        });
    }
    check_k(spec, k_max)?;
    check_weights(weights)?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(k_max);
    let mut used = vec![false; weights.len()];
    enumerate(spec, weights, k_max, &mut current, &mut used, &mut best);
    let (_, items) = best.expect("at least one item is available");
    Ok(SuperArm(items))
}

fn enumerate(
    spec: &RewardSpec,
    weights: &[f64],
    k_max: usize,
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if !current.is_empty() {
        let pw: Vec<f64> = current.iter().map(|&a| weights[a]).collect();
        let value = spec.reward_of_positions(&pw);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            *best = Some((value, current.clone()));
        }
    }
    if current.len() == k_max {
        return;
    }
    for a in 0..weights.len() {
        if used[a] {
            continue;
        }
        used[a] = true;
        current.push(a);
        enumerate(spec, weights, k_max, current, used, best);
        current.pop();
        used[a] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(g: Vec<f64>) -> RewardSpec {
        RewardSpec::disjunctive(DiscountProfile::new(g).unwrap())
    }

    fn arm(items: &[usize]) -> SuperArm {
        SuperArm::new(items.to_vec(), 4).unwrap()
    }

    #[test]
    fn reward_examples() {
        let s = spec(vec![1.0, 1.0, 1.0]);
        assert_eq!(s.reward(&arm(&[0, 1, 2]), &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(s.reward(&arm(&[0, 1, 2]), &[1.0, 0.3, 0.9]).unwrap(), 1.0);
        assert_eq!(s.reward(&arm(&[0, 1]), &[0.5, 0.5]).unwrap(), 0.75);
        assert!(matches!(
            s.reward(&arm(&[0]), &[1.5]),
            Err(Error::WeightOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn super_arm_validation() {
        assert!(SuperArm::new(vec![], 3).is_err());
        assert!(SuperArm::new(vec![1, 1], 3).is_err());
        assert!(SuperArm::new(vec![0, 1, 2, 3], 3).is_err());
        assert_eq!(SuperArm::new(vec![2, 0], 3).unwrap().items(), &[2, 0]);
    }

    #[test]
    fn discount_validation() {
        assert!(DiscountProfile::new(vec![]).is_err());
        assert!(DiscountProfile::new(vec![1.0, 1.2]).is_err());
        assert!(DiscountProfile::new(vec![0.5, 0.9]).is_err());
        let d = DiscountProfile::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(d.c_gamma(), 1.25);
        let parsed: DiscountProfile = serde_json::from_str("[1.0, 0.5]").unwrap();
        assert_eq!(parsed, d);
        assert!(serde_json::from_str::<DiscountProfile>("[0.5, 1.0]").is_err());
    }

    #[test]
    fn greedy_breaks_ties_to_lower_index() {
        let s = spec(vec![1.0, 1.0]);
        let a = greedy_oracle(&s, &[0.9, 0.1, 0.5, 0.5], 2).unwrap();
        assert_eq!(a.items(), &[0, 2]);
        let eq = greedy_oracle(&spec(vec![1.0; 3]), &[0.4; 6], 3).unwrap();
        assert_eq!(eq.items(), &[0, 1, 2]);
        let one = greedy_oracle(&s, &[0.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(one.items()[0], 1);
    }

    #[test]
    fn greedy_truncates_to_available_items() {
        let s = spec(vec![1.0; 4]);
        assert_eq!(greedy_oracle(&s, &[0.2, 0.7], 4).unwrap().items(), &[1, 0]);
        assert!(greedy_oracle(&s, &[], 4).is_err());
        assert!(greedy_oracle(&s, &[0.2], 5).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let single = brute_force_oracle(&spec(vec![1.0]), &[0.3], 1).unwrap();
        assert_eq!(single.items(), &[0]);

        let s = spec(vec![1.0, 0.5]);
        let best = brute_force_oracle(&s, &[0.2, 0.8], 2).unwrap();
        assert_eq!(best.items(), &[1, 0]);
        let f = s.reward(&best, &[0.2, 0.8]).unwrap();
        assert!((f - 0.82).abs() < 1e-15);

        // Ordered pairs over (0.9, 0.1, 0.5, 0.5): the greedy pick is optimal.
        let s = spec(vec![1.0, 1.0]);
        let w = [0.9, 0.1, 0.5, 0.5];
        let bf = brute_force_oracle(&s, &w, 2).unwrap();
        let g = greedy_oracle(&s, &w, 2).unwrap();
        assert_eq!(s.reward(&bf, &w).unwrap(), s.reward(&g, &w).unwrap());
    }

    #[test]
    fn brute_force_guard() {
        let s = spec(vec![1.0; 5]);
        assert!(matches!(
            brute_force_oracle(&s, &[0.1; 13], 2),
            Err(Error::SizeGuard { .. })
        ));
        assert!(matches!(
            brute_force_oracle(&s, &[0.1; 5], 5),
            Err(Error::SizeGuard { .. })
        ));
    }
}
