//! Split-conformal outlier p-values from a distance-based novelty score.

use serde::Serialize;

use super::dataset::Matrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RandomSource;

/// Default cap on reference rows used by the novelty score.
pub const DEFAULT_REFERENCE_CAP: usize = 2000;

/// Mean Euclidean distance to a fixed set of reference rows.
#[derive(Clone, Debug, PartialEq)]
pub struct NoveltyScore {
    reference: Matrix,
    /// Rows available before subsampling.
    pub source_rows: usize,
}

impl NoveltyScore {
    /// Uses every row of `train`, or a seeded sample of `cap` rows when the
    /// fold is larger.
    pub fn new(train: &Matrix, cap: usize, rng: &mut RandomSource) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::Precondition("novelty reference set is empty".into()));
        }
        let reference = if cap > 0 && train.rows() > cap {
            let mut idx: Vec<usize> = (0..train.rows()).collect();
            rng.shuffle(&mut idx);
            idx.truncate(cap);
            idx.sort_unstable();
            train.select(&idx)
        } else {
            train.clone()
        };
        Ok(Self {
            reference,
            source_rows: train.rows(),
        })
    }

    pub fn reference_rows(&self) -> usize {
        self.reference.rows()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let total: f64 = self
            .reference
            .iter_rows()
            .map(|r| r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum();
        total / self.reference.rows() as f64
    }

    pub fn score_rows(&self, rows: &Matrix) -> Vec<f64> {
        par::map_indexed(rows.rows(), |i| self.score(rows.row(i)))
    }
}

/// `⌈(n + 1)(1 − α)⌉`-th smallest of `sorted`, or `+∞` past the end.
pub fn conformal_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let rank = ((n as f64 + 1.0) * (1.0 - alpha)).ceil() as usize;
    if rank == 0 {
        f64::NEG_INFINITY
    } else if rank > n {
        f64::INFINITY
    } else {
        sorted[rank - 1]
    }
}

/// Calibrated scorer plus the p-values of one allocation pool.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConformalScorer {
    /// Calibration scores, ascending.
    pub calibration_scores: Vec<f64>,
    pub q_hat: f64,
    pub alpha: f64,
    pub pool_scores: Vec<f64>,
    pub p_values: Vec<f64>,
    pub reference_rows: usize,
    pub reference_cap: usize,
}

impl ConformalScorer {
    pub fn n_cal(&self) -> usize {
        self.calibration_scores.len()
    }

    /// `(1 + #{calibration scores ≥ s}) / (n_cal + 1)`.
    pub fn p_value(&self, s: f64) -> f64 {
        let below = self.calibration_scores.partition_point(|&c| c < s);
        (1 + self.n_cal() - below) as f64 / (self.n_cal() + 1) as f64
    }

    /// `p ≤ α`.
    pub fn flagged(&self) -> Vec<bool> {
        self.p_values.iter().map(|&p| p <= self.alpha).collect()
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.flagged().iter().filter(|&&f| f).count() as f64 / self.p_values.len().max(1) as f64
    }

    /// Same scores and p-values at another level.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            q_hat: conformal_quantile(&self.calibration_scores, alpha),
            ..self.clone()
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Scores calibration and pool rows against the training fold and converts
/// the pool scores to conformal p-values.
pub fn conformal_pvalues(
    train: &Matrix,
    calibration: &Matrix,
    pool: &Matrix,
    alpha: f64,
    reference_cap: usize,
    rng: &mut RandomSource,
) -> Result<ConformalScorer> {
    check_alpha(alpha)?;
    if calibration.rows() == 0 {
        return Err(Error::Precondition("calibration fold is empty".into()));
    }
    if train.cols() != calibration.cols() || train.cols() != pool.cols() {
        return Err(Error::structural("train, calibration and pool widths differ"));
    }
    let novelty = NoveltyScore::new(train, reference_cap, rng)?;
    let mut calibration_scores = novelty.score_rows(calibration);
    calibration_scores.sort_by(f64::total_cmp);
    let pool_scores = novelty.score_rows(pool);
    let mut scorer = ConformalScorer {
        q_hat: conformal_quantile(&calibration_scores, alpha),
        calibration_scores,
        alpha,
        p_values: Vec::new(),
        pool_scores,
        reference_rows: novelty.reference_rows(),
        reference_cap,
    };
    scorer.p_values = scorer.pool_scores.iter().map(|&s| scorer.p_value(s)).collect();
    Ok(scorer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(points: &[f64]) -> Matrix {
        Matrix::from_rows(&points.iter().map(|&p| vec![p]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn quantile_rank() {
        let s = [1.0, 2.0, 3.0, 4.0];
        // ⌈5 · 0.8⌉ = 4
        assert_eq!(conformal_quantile(&s, 0.2), 4.0);
        // ⌈5 · 0.5⌉ = 3
        assert_eq!(conformal_quantile(&s, 0.5), 3.0);
        assert_eq!(conformal_quantile(&s, 0.1), f64::INFINITY);
    }

    #[test]
    fn p_values_count_scores_at_or_above() {
        let train = grid(&[0.0, 0.1, -0.1, 0.05, -0.05]);
        let cal = grid(&[0.2, -0.3, 0.5, 1.0]);
        let pool = grid(&[0.0, 1.0, 5.0]);
        let c = conformal_pvalues(&train, &cal, &pool, 0.2, 0, &mut RandomSource::new(0, 0)).unwrap();
        assert_eq!(c.p_values[0], 1.0);
        // Duplicates the largest calibration score.
        assert_eq!(c.p_values[1], 2.0 / 5.0);
        assert_eq!(c.p_values[2], 1.0 / 5.0);
        assert_eq!(c.flagged(), vec![false, false, true]);
    }

    #[test]
    fn empty_calibration_fails() {
        let train = grid(&[0.0]);
        let cal = Matrix::new(0, 1, vec![]).unwrap();
        let r = conformal_pvalues(&train, &cal, &train, 0.2, 0, &mut RandomSource::new(0, 0));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn reference_cap_subsamples() {
        let train = grid(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
        let n = NoveltyScore::new(&train, 10, &mut RandomSource::new(0, 0)).unwrap();
        assert_eq!(n.reference_rows(), 10);
        assert_eq!(n.source_rows, 50);
    }

    #[test]
    fn with_alpha_keeps_p_values() {
        let train = grid(&[0.0, 1.0]);
        let cal = grid(&[0.5, 2.0, 3.0]);
        let c = conformal_pvalues(&train, &cal, &cal, 0.2, 0, &mut RandomSource::new(0, 0)).unwrap();
        let d = c.with_alpha(0.5).unwrap();
        assert_eq!(c.p_values, d.p_values);
        assert!(c.with_alpha(1.0).is_err());
    }
}
