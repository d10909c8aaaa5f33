//! Domain types shared by every allocation mechanism.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of one round's selection weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Claim strengths `c_i ∈ [0, 1]` with a stable id per individual.
///
/// Positions (`0..len`) index every per-individual vector in the crate;
/// ids are only carried through to reported selection orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimProfile {
    claims: Vec<f64>,
    ids: Vec<usize>,
}

impl ClaimProfile {
    /// Profile with ids `0..claims.len()`.
    pub fn new(claims: Vec<f64>) -> Result<Self> {
        let ids = (0..claims.len()).collect();
        Self::with_ids(claims, ids)
    }

    pub fn with_ids(claims: Vec<f64>, ids: Vec<usize>) -> Result<Self> {
        if claims.len() != ids.len() {
            return Err(Error::structural(format!(
                "{} claims but {} ids",
                claims.len(),
                ids.len()
            )));
        }
        if let Some((i, c)) = claims
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::structural(format!(
                "claim at position {i} is {c}, outside [0, 1]"
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::structural(format!("duplicate id {dup}")));
        }
        Ok(Self { claims, ids })
    }

    /// Builds a profile by clamping arbitrary reals into `[0, 1]`. NaN maps to 0.
    pub fn clamped(raw: &[f64]) -> Self {
        let claims = raw
            .iter()
            .map(|c| if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) })
            .collect::<Vec<_>>();
        let ids = (0..claims.len()).collect();
        Self { claims, ids }
    }

    pub fn claims(&self) -> &[f64] {
        &self.claims
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn id(&self, position: usize) -> usize {
        self.ids[position]
    }
}

/// Descending by claim; ties broken by ascending id.
pub(crate) fn claim_order(claims: &[f64], ids: &[usize], a: usize, b: usize) -> Ordering {
    claims[b]
        .total_cmp(&claims[a])
        .then_with(|| ids[a].cmp(&ids[b]))
}

/// Positions sorted strongest claim first, ties by ascending id.
pub fn canonical_positions(profile: &ClaimProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_unstable_by(|&a, &b| claim_order(&profile.claims, &profile.ids, a, b));
    order
}

/// Ids sorted strongest claim first, ties by ascending id.
pub fn canonical_sort(profile: &ClaimProfile) -> Vec<usize> {
    canonical_positions(profile)
        .into_iter()
        .map(|p| profile.ids[p])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    TopK,
    Unweighted,
    #[serde(rename = "bf")]
    BF,
    #[serde(rename = "partial_bf")]
    PartialBF,
    Variance,
    Outlier,
    DecisionBoundary,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::TopK => "top_k",
            Mechanism::Unweighted => "unweighted",
            Mechanism::BF => "bf",
            Mechanism::PartialBF => "partial_bf",
            Mechanism::Variance => "variance",
            Mechanism::Outlier => "outlier",
            Mechanism::DecisionBoundary => "decision_boundary",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resource counts for one allocation.
///
/// `k_prime` resources are randomized over a pool of `n_prime` individuals.
/// For [`Mechanism::PartialBF`] and [`Mechanism::DecisionBoundary`] the pair
/// must satisfy `0 < k' ≤ k` and `k' < n' ≤ n - k + k'`; `k' = n' = 0` is also
/// accepted and means plain top-k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryConfig {
    pub k: usize,
    pub n: usize,
    pub k_prime: usize,
    pub n_prime: usize,
    pub mechanism: Mechanism,
}

impl LotteryConfig {
    pub fn new(mechanism: Mechanism, n: usize, k: usize) -> Result<Self> {
        let cfg = Self {
            k,
            n,
            k_prime: k,
            n_prime: n,
            mechanism,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn partial(n: usize, k: usize, k_prime: usize, n_prime: usize) -> Result<Self> {
        let cfg = Self {
            k,
            n,
            k_prime,
            n_prime,
            mechanism: Mechanism::PartialBF,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Partial configuration from rates, rounding `k'/k` and `n'/n` to counts.
    pub fn partial_from_rates(n: usize, k: usize, kprime_rate: f64, nprime_rate: f64) -> Result<Self> {
        let k_prime = (kprime_rate * k as f64).round() as usize;
        let n_prime = (nprime_rate * n as f64).round() as usize;
        Self::partial(n, k, k_prime, n_prime)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::config(format!(
                "need 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if matches!(self.mechanism, Mechanism::PartialBF | Mechanism::DecisionBoundary) {
            partial_bounds(self.n, self.k, self.k_prime, self.n_prime)?;
        }
        Ok(())
    }

    pub fn kprime_rate(&self) -> f64 {
        self.k_prime as f64 / self.k as f64
    }

    pub fn nprime_rate(&self) -> f64 {
        self.n_prime as f64 / self.n as f64
    }
}

pub(crate) fn partial_bounds(n: usize, k: usize, k_prime: usize, n_prime: usize) -> Result<()> {
    if k_prime == 0 && n_prime == 0 {
        return Ok(());
    }
    if k_prime == 0 || k_prime > k {
        return Err(Error::config(format!("k' = {k_prime} outside (0, {k}]")));
    }
    let upper = n - k + k_prime;
    if n_prime <= k_prime || n_prime > upper {
        return Err(Error::config(format!(
            "n' = {n_prime} outside ({k_prime}, {upper}]"
        )));
    }
    Ok(())
}

/// One round of an iterative weighted selection.
///
/// `members` are profile positions of the individuals still in the draw;
/// `weights[i]` is the selection probability of `members[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionWeights {
    pub round: usize,
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SelectionWeights {
    pub fn validate(&self) -> Result<()> {
        if self.round == 0 {
            return Err(Error::structural("rounds are numbered from 1"));
        }
        if self.members.len() != self.weights.len() {
            return Err(Error::structural(format!(
                "round {}: {} members but {} weights",
                self.round,
                self.members.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::structural(format!(
                "round {}: weights must be finite and non-negative",
                self.round
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::structural(format!(
                "round {}: weights sum to {sum}",
                self.round
            )));
        }
        Ok(())
    }
}

/// Binary outcomes plus the order in which individuals were selected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// `outcomes[p]` is 1 when position `p` was selected.
    pub outcomes: Vec<u8>,
    /// Selected ids, in selection order.
    pub selected_order: Vec<usize>,
    pub seed: u64,
    pub mechanism: String,
}

impl AllocationResult {
    pub(crate) fn from_positions(
        profile: &ClaimProfile,
        positions: &[usize],
        seed: u64,
        mechanism: String,
    ) -> Self {
        let mut outcomes = vec![0u8; profile.len()];
        for &p in positions {
            outcomes[p] = 1;
        }
        Self {
            outcomes,
            selected_order: positions.iter().map(|&p| profile.id(p)).collect(),
            seed,
            mechanism,
        }
    }

    pub fn k(&self) -> usize {
        self.selected_order.len()
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_selected(&self, position: usize) -> bool {
        self.outcomes[position] == 1
    }

    /// Checks the exactly-k and distinct-selection invariants.
    pub fn validate(&self, k: usize) -> Result<()> {
        let ones = self.outcomes.iter().filter(|&&o| o == 1).count();
        if self.outcomes.iter().any(|&o| o > 1) {
            return Err(Error::structural("outcomes must be 0 or 1"));
        }
        if ones != k || self.selected_order.len() != k {
            return Err(Error::structural(format!(
                "expected {k} selections, found {ones} outcomes and {} ordered ids",
                self.selected_order.len()
            )));
        }
        let unique: HashSet<_> = self.selected_order.iter().collect();
        if unique.len() != k {
            return Err(Error::structural("selected ids are not unique"));
        }
        Ok(())
    }
}

/// Realized outcomes `o*_i` and/or success probabilities `p_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityGroundTruth {
    pub realized: Option<Vec<u8>>,
    pub probabilities: Option<Vec<f64>>,
}

impl UtilityGroundTruth {
    pub fn new(realized: Option<Vec<u8>>, probabilities: Option<Vec<f64>>, n: usize) -> Result<Self> {
        if realized.is_none() && probabilities.is_none() {
            return Err(Error::structural("ground truth needs realized outcomes or probabilities"));
        }
        if let Some(r) = &realized {
            if r.len() != n || r.iter().any(|&o| o > 1) {
                return Err(Error::structural("realized outcomes must be n binary values"));
            }
        }
        if let Some(p) = &probabilities {
            if p.len() != n || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::structural("probabilities must be n values in [0, 1]"));
            }
        }
        Ok(Self {
            realized,
            probabilities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sort_examples() {
        let p = ClaimProfile::new(vec![0.2, 0.9, 0.5]).unwrap();
        assert_eq!(canonical_sort(&p), vec![1, 2, 0]);
        let p = ClaimProfile::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(canonical_sort(&p), vec![0, 1]);
        let p = ClaimProfile::new(vec![0.9, 0.7, 0.7, 0.1]).unwrap();
        assert_eq!(canonical_sort(&p), vec![0, 1, 2, 3]);
    }

    #[test]
    fn tie_break_uses_ids_not_positions() {
        let p = ClaimProfile::with_ids(vec![0.5, 0.5], vec![9, 4]).unwrap();
        assert_eq!(canonical_sort(&p), vec![4, 9]);
    }

    #[test]
    fn profile_rejects_bad_input() {
        assert!(ClaimProfile::new(vec![0.5, 1.2]).is_err());
        assert!(ClaimProfile::new(vec![f64::NAN]).is_err());
        assert!(ClaimProfile::with_ids(vec![0.1, 0.2], vec![1, 1]).is_err());
        assert!(ClaimProfile::with_ids(vec![0.1], vec![1, 2]).is_err());
    }

    #[test]
    fn partial_bounds_follow_definition() {
        // n = 8, k = 2: k' in (0, 2], n' in (k', 6 + k'].
        assert!(LotteryConfig::partial(8, 2, 1, 2).is_ok());
        assert!(LotteryConfig::partial(8, 2, 1, 7).is_ok());
        assert!(LotteryConfig::partial(8, 2, 1, 8).is_err());
        assert!(LotteryConfig::partial(8, 2, 2, 8).is_ok());
        assert!(LotteryConfig::partial(8, 2, 1, 1).is_err());
        assert!(LotteryConfig::partial(8, 2, 3, 5).is_err());
        assert!(LotteryConfig::partial(8, 2, 0, 0).is_ok());
        assert!(LotteryConfig::partial(8, 2, 0, 3).is_err());
        assert!(LotteryConfig::new(Mechanism::TopK, 3, 0).is_err());
        assert!(LotteryConfig::new(Mechanism::TopK, 3, 4).is_err());
    }

    #[test]
    fn selection_weights_sum_checked() {
        let ok = SelectionWeights {
            round: 1,
            members: vec![0, 1],
            weights: vec![0.25, 0.75],
        };
        assert!(ok.validate().is_ok());
        let bad = SelectionWeights {
            weights: vec![0.25, 0.7],
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let neg = SelectionWeights {
            weights: vec![-0.25, 1.25],
            ..ok
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn ground_truth_needs_something() {
        assert!(UtilityGroundTruth::new(None, None, 3).is_err());
        assert!(UtilityGroundTruth::new(Some(vec![0, 1, 2]), None, 3).is_err());
        assert!(UtilityGroundTruth::new(None, Some(vec![0.1, 0.2]), 3).is_err());
        assert!(UtilityGroundTruth::new(Some(vec![0, 1, 1]), None, 3).is_ok());
    }
}
