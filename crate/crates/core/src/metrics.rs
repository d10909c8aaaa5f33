//! Utility, expected utility, systemic exclusion rate (SER) and the
//! SER-vs-utility frontier.

use serde::Serialize;

use crate::claims::AllocationResult;
use crate::error::{Error, Result};

/// Width of the utility-delta buckets used by [`frontier`].
pub const FRONTIER_BUCKET: f64 = 0.005;

fn check_selection(result: &AllocationResult, k: usize, n: usize) -> Result<()> {
    if result.n() != n {
        return Err(Error::structural(format!(
            "allocation covers {} individuals, ground truth {n}",
            result.n()
        )));
    }
    if k == 0 || result.k() != k {
        return Err(Error::Precondition(format!(
            "expected {k} selections, allocation has {}",
            result.k()
        )));
    }
    Ok(())
}

/// Share of the `k` selected individuals whose realized outcome is 1.
pub fn utility(result: &AllocationResult, realized: Option<&[u8]>, k: usize) -> Result<f64> {
    let realized = realized
        .ok_or_else(|| Error::UnsupportedMetric("utility needs realized outcomes".into()))?;
    check_selection(result, k, realized.len())?;
    let hits = result
        .outcomes
        .iter()
        .zip(realized)
        .filter(|(&o, &r)| o == 1 && r == 1)
        .count();
    Ok(hits as f64 / k as f64)
}

/// Mean success probability over the `k` selected individuals.
pub fn expected_utility(
    result: &AllocationResult,
    probabilities: Option<&[f64]>,
    k: usize,
) -> Result<f64> {
    let p = probabilities
        .ok_or_else(|| Error::UnsupportedMetric("expected utility needs probabilities".into()))?;
    check_selection(result, k, p.len())?;
    Ok(mean_over_selected(&result.outcomes, p, k))
}

pub(crate) fn mean_over_selected(outcomes: &[u8], values: &[f64], k: usize) -> f64 {
    outcomes
        .iter()
        .zip(values)
        .filter(|(&o, _)| o == 1)
        .map(|(_, &v)| v)
        .sum::<f64>()
        / k as f64
}

/// Outcomes of `m` decision-makers over the same `n` individuals.
///
/// Rows may select different numbers of individuals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleOutcomes {
    rows: Vec<Vec<u8>>,
    n: usize,
}

impl EnsembleOutcomes {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::structural("need at least one decision-maker"))?;
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::structural(format!(
                    "row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&o| o > 1) {
                return Err(Error::structural(format!("row {j} has a non-binary outcome")));
            }
        }
        Ok(Self { rows, n })
    }

    pub fn from_results(results: &[AllocationResult]) -> Result<Self> {
        Self::new(results.iter().map(|r| r.outcomes.clone()).collect())
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// `true` for individuals rejected by every decision-maker.
    pub fn excluded(&self) -> Vec<bool> {
        excluded_flags(self.rows.iter().map(Vec::as_slice), self.n)
    }
}

pub(crate) fn excluded_flags<'a>(rows: impl Iterator<Item = &'a [u8]>, n: usize) -> Vec<bool> {
    let mut excluded = vec![true; n];
    for row in rows {
        for (e, &o) in excluded.iter_mut().zip(row) {
            *e &= o == 0;
        }
    }
    excluded
}

/// Fraction of individuals who receive a negative outcome from every
/// decision-maker. Requires `m > 1`.
pub fn ser(outcomes: &EnsembleOutcomes) -> Result<f64> {
    if outcomes.m() <= 1 {
        return Err(Error::Precondition(format!(
            "SER needs more than one decision-maker, got {}",
            outcomes.m()
        )));
    }
    Ok(exclusion_rate(outcomes))
}

/// Share of individuals excluded by every row; defined for any `m ≥ 1`.
pub fn exclusion_rate(outcomes: &EnsembleOutcomes) -> f64 {
    let excluded = outcomes.excluded();
    excluded.iter().filter(|&&e| e).count() as f64 / outcomes.n() as f64
}

/// `(1/n) Σ_i Π_j (1 - q_ij)` for independent decision-makers with inclusion
/// probabilities `q[j][i]`.
pub fn expected_ser(inclusion: &[Vec<f64>]) -> Result<f64> {
    let n = inclusion.first().map(Vec::len).unwrap_or(0);
    if n == 0 {
        return Err(Error::structural("empty inclusion matrix"));
    }
    if inclusion.iter().any(|row| row.len() != n) {
        return Err(Error::structural("ragged inclusion matrix"));
    }
    if inclusion.iter().flatten().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::structural("inclusion probabilities must lie in [0, 1]"));
    }
    let total: f64 = (0..n)
        .map(|i| inclusion.iter().map(|row| 1.0 - row[i]).product::<f64>())
        .sum();
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// `baseline - value`.
    #[default]
    Absolute,
    /// `(baseline - value) / baseline`.
    Relative,
}

/// Utility lost relative to a baseline (typically top-k).
pub fn utility_delta(baseline: f64, value: f64, mode: DeltaMode) -> f64 {
    match mode {
        DeltaMode::Absolute => baseline - value,
        DeltaMode::Relative if baseline != 0.0 => (baseline - value) / baseline,
        DeltaMode::Relative => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub utility_delta: f64,
    pub ser: f64,
    /// Which configuration produced the point, e.g. `partial_bf(k'=25,n'=100)`.
    pub config: String,
}

/// Lowest SER per 0.005-wide utility-delta bucket, with points that a
/// smaller delta already beats removed. Sorted by `utility_delta`.
pub fn frontier(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut sorted: Vec<&FrontierPoint> = points
        .iter()
        .filter(|p| p.utility_delta.is_finite() && p.ser.is_finite())
        .collect();
    sorted.sort_by(|a, b| {
        a.utility_delta
            .total_cmp(&b.utility_delta)
            .then(a.ser.total_cmp(&b.ser))
    });

    let bucket = |p: &FrontierPoint| (p.utility_delta / FRONTIER_BUCKET).floor() as i64;
    let mut best: Vec<&FrontierPoint> = Vec::new();
    for p in sorted {
        match best.last_mut() {
            Some(last) if bucket(last) == bucket(p) => {
                if p.ser < last.ser {
                    *last = p;
                }
            }
            _ => best.push(p),
        }
    }

    let mut out: Vec<FrontierPoint> = Vec::new();
    let mut lowest = f64::INFINITY;
    for p in best {
        if p.ser < lowest {
            lowest = p.ser;
            out.push(p.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(outcomes: Vec<u8>) -> AllocationResult {
        let selected_order = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == 1)
            .map(|(i, _)| i)
            .collect();
        AllocationResult {
            outcomes,
            selected_order,
            seed: 0,
            mechanism: "test".into(),
        }
    }

    #[test]
    fn utility_examples() {
        let r = alloc(vec![1, 1, 1, 1, 0, 0]);
        let truth = [1, 1, 1, 0, 1, 1];
        assert_eq!(utility(&r, Some(&truth), 4).unwrap(), 0.75);
        let truth = [1, 1, 1, 1, 0, 0];
        assert_eq!(utility(&r, Some(&truth), 4).unwrap(), 1.0);
        assert!(matches!(utility(&r, None, 4), Err(Error::UnsupportedMetric(_))));
        assert!(utility(&r, Some(&truth), 3).is_err());
    }

    #[test]
    fn expected_utility_examples() {
        let r = alloc(vec![1, 1, 0, 0]);
        assert_eq!(expected_utility(&r, Some(&[1.0, 1.0, 0.0, 0.0]), 2).unwrap(), 1.0);
        for outcomes in [vec![1, 1, 0, 0], vec![0, 1, 0, 1], vec![0, 0, 1, 1]] {
            let eu = expected_utility(&alloc(outcomes), Some(&[0.37; 4]), 2).unwrap();
            assert!((eu - 0.37).abs() < 1e-15);
        }
        assert!(matches!(
            expected_utility(&r, None, 2),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn ser_examples() {
        let top = vec![1, 1, 0, 0, 0];
        let e = EnsembleOutcomes::new(vec![top.clone(), top.clone(), top]).unwrap();
        assert_eq!(ser(&e).unwrap(), 3.0 / 5.0);
        let e = EnsembleOutcomes::new(vec![vec![1, 0, 0], vec![1, 1, 1]]).unwrap();
        assert_eq!(ser(&e).unwrap(), 0.0);
        let single = EnsembleOutcomes::new(vec![vec![1, 0]]).unwrap();
        assert!(matches!(ser(&single), Err(Error::Precondition(_))));
        assert_eq!(exclusion_rate(&single), 0.5);
        assert!(EnsembleOutcomes::new(vec![vec![1, 0], vec![1]]).is_err());
        assert!(EnsembleOutcomes::new(vec![vec![2, 0], vec![1, 0]]).is_err());
    }

    #[test]
    fn expected_ser_examples() {
        assert_eq!(expected_ser(&[vec![1.0; 3], vec![1.0; 3]]).unwrap(), 0.0);
        assert_eq!(expected_ser(&[vec![0.0; 3], vec![0.0; 3]]).unwrap(), 1.0);
        // (0.25 + 0.49 + 0.64) / 3
        let q = vec![vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2]];
        assert!((expected_ser(&q).unwrap() - 0.46).abs() < 1e-12);
        assert!(expected_ser(&[vec![1.5]]).is_err());
    }

    fn pt(d: f64, s: f64) -> FrontierPoint {
        FrontierPoint {
            utility_delta: d,
            ser: s,
            config: format!("{d}/{s}"),
        }
    }

    #[test]
    fn frontier_examples() {
        assert_eq!(frontier(&[pt(0.01, 0.5)]), vec![pt(0.01, 0.5)]);
        let f = frontier(&[pt(0.0, 0.7), pt(0.02, 0.5), pt(0.03, 0.6)]);
        assert_eq!(f, vec![pt(0.0, 0.7), pt(0.02, 0.5)]);
        // Same bucket keeps the lower SER.
        let f = frontier(&[pt(0.011, 0.5), pt(0.012, 0.4)]);
        assert_eq!(f, vec![pt(0.012, 0.4)]);
        assert!(frontier(&[]).is_empty());
    }

    #[test]
    fn frontier_is_monotone() {
        let pts: Vec<_> = (0..40)
            .map(|i| pt((i * 37 % 23) as f64 * 0.003, ((i * 11) % 17) as f64 / 17.0))
            .collect();
        let f = frontier(&pts);
        for w in f.windows(2) {
            assert!(w[0].utility_delta < w[1].utility_delta);
            assert!(w[0].ser > w[1].ser);
        }
    }
}
