//! Broome-fairness audit of per-round selection weights.
//!
//! A weighting is Broome-fair when, in every round and for every pair of
//! individuals still in the draw, a strictly stronger claim gets a strictly
//! larger weight (condition 1) and every positive claim gets a positive
//! weight (condition 2).

use serde::Serialize;

use crate::claims::{ClaimProfile, SelectionWeights};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `stronger` has a larger claim than `weaker` but not a larger weight.
    StrongerNotFavoured {
        round: usize,
        stronger: usize,
        weaker: usize,
    },
    /// `position` has a positive claim and zero weight.
    PositiveClaimExcluded { round: usize, position: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub bf1_ok: bool,
    pub bf2_ok: bool,
    pub violations: Vec<Violation>,
}

impl ComplianceReport {
    pub fn is_fair(&self) -> bool {
        self.bf1_ok && self.bf2_ok
    }
}

pub fn check_bf_compliance(
    profile: &ClaimProfile,
    rounds: &[SelectionWeights],
) -> Result<ComplianceReport> {
    let claims = profile.claims();
    let mut report = ComplianceReport {
        bf1_ok: true,
        bf2_ok: true,
        violations: Vec::new(),
    };
    for sw in rounds {
        if sw.members.len() != sw.weights.len() {
            return Err(Error::structural(format!(
                "round {}: {} members but {} weights",
                sw.round,
                sw.members.len(),
                sw.weights.len()
            )));
        }
        if let Some(&p) = sw.members.iter().find(|&&p| p >= claims.len()) {
            return Err(Error::structural(format!(
                "round {}: member {p} outside a profile of {}",
                sw.round,
                claims.len()
            )));
        }

        for (&p, &w) in sw.members.iter().zip(&sw.weights) {
            if claims[p] > 0.0 && w <= 0.0 {
                report.bf2_ok = false;
                report.violations.push(Violation::PositiveClaimExcluded {
                    round: sw.round,
                    position: p,
                });
            }
        }

        if !strictly_monotone(claims, sw) {
            report.bf1_ok = false;
            for (a, (&pa, &wa)) in sw.members.iter().zip(&sw.weights).enumerate() {
                for (&pb, &wb) in sw.members.iter().zip(&sw.weights).skip(a + 1) {
                    let (stronger, weaker, ws, ww) = if claims[pa] >= claims[pb] {
                        (pa, pb, wa, wb)
                    } else {
                        (pb, pa, wb, wa)
                    };
                    if claims[stronger] > claims[weaker] && ws <= ww {
                        report.violations.push(Violation::StrongerNotFavoured {
                            round: sw.round,
                            stronger,
                            weaker,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// O(n log n) check of condition 1: walking claim levels from weakest up,
/// the smallest weight at each level must exceed every weight below it.
fn strictly_monotone(claims: &[f64], sw: &SelectionWeights) -> bool {
    let mut pairs: Vec<(f64, f64)> = sw
        .members
        .iter()
        .zip(&sw.weights)
        .map(|(&p, &w)| (claims[p], w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_below = f64::NEG_INFINITY;
    let mut i = 0;
    while i < pairs.len() {
        let level = pairs[i].0;
        let mut j = i;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        while j < pairs.len() && pairs[j].0 == level {
            lo = lo.min(pairs[j].1);
            hi = hi.max(pairs[j].1);
            j += 1;
        }
        if lo <= max_below {
            return false;
        }
        max_below = max_below.max(hi);
        i = j;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round1(weights: Vec<f64>) -> SelectionWeights {
        SelectionWeights {
            round: 1,
            members: (0..weights.len()).collect(),
            weights,
        }
    }

    #[test]
    fn proportional_weights_pass() {
        let p = ClaimProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r = check_bf_compliance(&p, &[round1(vec![0.5, 0.3, 0.2])]).unwrap();
        assert!(r.bf1_ok && r.bf2_ok);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn deterministic_weights_violate_bf2() {
        let p = ClaimProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r = check_bf_compliance(&p, &[round1(vec![1.0, 0.0, 0.0])]).unwrap();
        assert!(!r.bf2_ok);
        assert!(r.violations.contains(&Violation::PositiveClaimExcluded {
            round: 1,
            position: 1
        }));
        // 0.3 > 0.2 but both weigh 0.
        assert!(!r.bf1_ok);
        assert!(r.violations.contains(&Violation::StrongerNotFavoured {
            round: 1,
            stronger: 1,
            weaker: 2
        }));
    }

    #[test]
    fn uniform_weights_violate_bf1() {
        let p = ClaimProfile::new(vec![0.5, 0.5, 0.2]).unwrap();
        let third = 1.0 / 3.0;
        let r = check_bf_compliance(&p, &[round1(vec![third; 3])]).unwrap();
        assert!(!r.bf1_ok);
        assert!(r.bf2_ok);
        assert_eq!(r.violations.len(), 2);
        assert!(r.violations.contains(&Violation::StrongerNotFavoured {
            round: 1,
            stronger: 0,
            weaker: 2
        }));
    }

    #[test]
    fn equal_claims_may_share_weights() {
        let p = ClaimProfile::new(vec![0.4, 0.4]).unwrap();
        let r = check_bf_compliance(&p, &[round1(vec![0.5, 0.5])]).unwrap();
        assert!(r.is_fair());
    }

    #[test]
    fn later_round_checks_survivors_only() {
        let p = ClaimProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r2 = SelectionWeights {
            round: 2,
            members: vec![1, 2],
            weights: vec![0.6, 0.4],
        };
        let r = check_bf_compliance(&p, &[round1(vec![0.5, 0.3, 0.2]), r2]).unwrap();
        assert!(r.is_fair());
    }

    #[test]
    fn length_mismatch_is_structural() {
        let p = ClaimProfile::new(vec![0.5, 0.3]).unwrap();
        let bad = SelectionWeights {
            round: 1,
            members: vec![0, 1],
            weights: vec![1.0],
        };
        assert!(matches!(
            check_bf_compliance(&p, &[bad]),
            Err(Error::Structural(_))
        ));
        let out_of_range = round1(vec![0.2, 0.3, 0.5]);
        assert!(check_bf_compliance(&p, &[out_of_range]).is_err());
    }
}
