use log::warn;
use serde::{Deserialize, Serialize};

use super::dataset::Matrix;
use super::models::{train, ModelSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub b: usize,
    /// Share of the training fold each member sees.
    pub fraction: f64,
    pub sampling: SubsetSampling,
    /// Fresh subsets tried per member when one holds a single class.
    pub max_retries: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b: 11,
            fraction: 0.5,
            sampling: SubsetSampling::WithoutReplacement,
            max_retries: 20,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::config("ensemble size must be at least 1"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::config(format!(
                "subset fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        Ok(())
    }
}

/// `B × n` member predictions over an allocation pool.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapEnsemble {
    members: Vec<Vec<f64>>,
}

impl BootstrapEnsemble {
    pub fn from_members(members: Vec<Vec<f64>>) -> Result<Self> {
        let Some(n) = members.first().map(Vec::len) else {
            return Err(Error::structural("an ensemble needs at least one member"));
        };
        if members.iter().any(|m| m.len() != n) {
            return Err(Error::structural("ensemble members cover different pools"));
        }
        if members.iter().flatten().any(|s| !(s.is_finite() && (0.0..=1.0).contains(s))) {
            return Err(Error::structural("member predictions must be finite and in [0, 1]"));
        }
        Ok(Self { members })
    }

    pub fn b(&self) -> usize {
        self.members.len()
    }

    pub fn n(&self) -> usize {
        self.members[0].len()
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    /// Share of members whose prediction is strictly above `threshold`.
    pub fn vote_fractions_above(&self, threshold: f64) -> Vec<f64> {
        let b = self.b() as f64;
        (0..self.n())
            .map(|i| self.members.iter().filter(|m| m[i] > threshold).count() as f64 / b)
            .collect()
    }

    /// Share of members that rank each individual inside their own top `k`
    /// (descending score, ties by position).
    pub fn vote_fractions_top_k(&self, k: usize) -> Vec<f64> {
        let n = self.n();
        let mut votes = vec![0usize; n];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for m in &self.members {
            order.clear();
            order.extend(0..n);
            order.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
            for &i in &order[..k.min(n)] {
                votes[i] += 1;
            }
        }
        let b = self.b() as f64;
        votes.into_iter().map(|v| v as f64 / b).collect()
    }

    /// Population standard deviation of member predictions, per individual.
    pub fn per_row_std(&self) -> Vec<f64> {
        let b = self.b() as f64;
        (0..self.n())
            .map(|i| {
                let mean = self.members.iter().map(|m| m[i]).sum::<f64>() / b;
                (self.members.iter().map(|m| (m[i] - mean).powi(2)).sum::<f64>() / b).sqrt()
            })
            .collect()
    }
}

fn draw_subset(n: usize, size: usize, sampling: SubsetSampling, rng: &mut RandomSource) -> Vec<usize> {
    match sampling {
        SubsetSampling::WithReplacement => (0..size).map(|_| rng.index(n)).collect(),
        SubsetSampling::WithoutReplacement => {
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = i + rng.index(n - i);
                idx.swap(i, j);
            }
            idx.truncate(size);
            idx.sort_unstable();
            idx
        }
    }
}

/// Trains `cfg.b` members on random subsets of the training fold and records
/// their predictions for every pool row. Member `j` uses stream `rng.fork(j)`.
pub fn bootstrap_ensemble(
    spec: &ModelSpec,
    x_train: &Matrix,
    y_train: &[u8],
    cfg: &BootstrapConfig,
    pool: &Matrix,
    rng: &RandomSource,
) -> Result<BootstrapEnsemble> {
    cfg.validate()?;
    let n = x_train.rows();
    let size = ((cfg.fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let members = par::try_map_indexed(cfg.b, |j| {
        let mut member_rng = rng.fork(j as u64);
        for attempt in 0..=cfg.max_retries {
            let rows = draw_subset(n, size, cfg.sampling, &mut member_rng);
            let y: Vec<u8> = rows.iter().map(|&r| y_train[r]).collect();
            if y.iter().all(|&l| l == y[0]) {
                warn!("ensemble member {j}: subset {attempt} holds one class, redrawing");
                continue;
            }
            let model = train(spec, &x_train.select(&rows), &y, &member_rng.fork(u64::MAX))?;
            return Ok(model.predict_scores(pool));
        }
        Err(Error::Training(format!(
            "ensemble member {j}: no two-class subset after {} retries",
            cfg.max_retries
        )))
    })?;
    BootstrapEnsemble::from_members(members)
}
