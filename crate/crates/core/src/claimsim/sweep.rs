use serde::Serialize;

use super::distributions::DistributionSpec;
use super::engine::{simulate, MechanismSummary, SimMechanism, SimulationConfig, SimulationReport};
use crate::claims::partial_bounds;
use crate::error::Result;
use crate::metrics::{frontier, FrontierPoint};

/// `k'/k` and `n'/n` values to cross.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub kprime_rates: Vec<f64>,
    pub nprime_rates: Vec<f64>,
}

impl Default for SweepGrid {
    /// 0.1, 0.2, ..., 1.0 on both axes.
    fn default() -> Self {
        let tenths: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        Self {
            kprime_rates: tenths.clone(),
            nprime_rates: tenths,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub kprime_rate: f64,
    pub nprime_rate: f64,
    pub k_prime: usize,
    pub n_prime: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    /// Top-k, full BF and every valid grid point, in that order.
    pub report: SimulationReport,
    pub skipped: Vec<SkippedPoint>,
}

impl SweepReport {
    pub fn partial_points(&self) -> impl Iterator<Item = &MechanismSummary> {
        self.report
            .mechanisms
            .iter()
            .filter(|s| matches!(s.mechanism, SimMechanism::PartialBf { .. }))
    }

    pub fn top_k(&self) -> &MechanismSummary {
        self.report
            .summary(&SimMechanism::TopK)
            .expect("sweeps always include top-k")
    }

    /// Every mechanism as a (utility delta, SER at `m`) point.
    pub fn points(&self, m: usize) -> Vec<FrontierPoint> {
        self.report
            .mechanisms
            .iter()
            .filter_map(|s| {
                s.ser_at(m).map(|ser| FrontierPoint {
                    utility_delta: s.expected_utility_delta.mean,
                    ser: ser.mean,
                    config: s.mechanism.to_string(),
                })
            })
            .collect()
    }

    pub fn frontier(&self, m: usize) -> Vec<FrontierPoint> {
        frontier(&self.points(m))
    }
}

/// Splits the grid into runnable partial-BF mechanisms and skipped points.
pub fn grid_mechanisms(n: usize, k: usize, grid: &SweepGrid) -> (Vec<SimMechanism>, Vec<SkippedPoint>) {
    let mut valid = Vec::new();
    let mut skipped = Vec::new();
    for &kr in &grid.kprime_rates {
        for &nr in &grid.nprime_rates {
            let mech = SimMechanism::PartialBf {
                kprime_rate: kr,
                nprime_rate: nr,
            };
            let (kp, np) = mech.counts(n, k);
            let bounds = if kp == 0 {
                Err(crate::Error::Config(format!("k' rounds to 0 at k = {k}")))
            } else {
                partial_bounds(n, k, kp, np)
            };
            match bounds {
                Ok(()) => valid.push(mech),
                Err(e) => skipped.push(SkippedPoint {
                    kprime_rate: kr,
                    nprime_rate: nr,
                    k_prime: kp,
                    n_prime: np,
                    reason: e.to_string(),
                }),
            }
        }
    }
    (valid, skipped)
}

/// Runs top-k, full BF and every valid partial-BF grid point on shared
/// claim draws and noise. `cfg.mechanisms` is ignored.
pub fn sweep_partial_bf(
    cfg: &SimulationConfig,
    spec: &DistributionSpec,
    grid: &SweepGrid,
    seed: u64,
) -> Result<SweepReport> {
    let (partials, skipped) = grid_mechanisms(cfg.n, cfg.k(), grid);
    let mut mechanisms = vec![SimMechanism::TopK, SimMechanism::Bf];
    mechanisms.extend(partials);
    let run_cfg = SimulationConfig {
        mechanisms,
        ..cfg.clone()
    };
    let report = simulate(&run_cfg, spec, seed)?;
    Ok(SweepReport { report, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claimsim::{Family, Mode};

    #[test]
    fn invalid_grid_points_are_reported() {
        // n = 100, k = 25: n' must lie in (k', 75 + k'].
        let grid = SweepGrid {
            kprime_rates: vec![0.4],
            nprime_rates: vec![0.1, 0.5, 1.0],
        };
        let (valid, skipped) = grid_mechanisms(100, 25, &grid);
        assert_eq!(valid.len(), 1);
        assert_eq!(skipped.len(), 2);
        assert_eq!((skipped[0].k_prime, skipped[0].n_prime), (10, 10));
        assert_eq!((skipped[1].k_prime, skipped[1].n_prime), (10, 100));
    }

    #[test]
    fn default_grid_has_tenths() {
        let g = SweepGrid::default();
        assert_eq!(g.kprime_rates.len(), 10);
        assert_eq!(g.kprime_rates[2], 0.3);
        assert_eq!(g.nprime_rates[9], 1.0);
    }

    #[test]
    fn full_randomization_loses_most_utility() {
        let cfg = SimulationConfig {
            n: 200,
            selection_rate: 0.25,
            iterations: 100,
            m: 2,
            noise_sigma: 0.0,
            mode: Mode::Concurrent,
            benefit: 0.0,
            mechanisms: vec![],
        };
        let grid = SweepGrid {
            kprime_rates: vec![0.5, 1.0],
            nprime_rates: vec![0.5, 0.75],
        };
        let r = sweep_partial_bf(&cfg, &DistributionSpec::with_default_param(Family::Normal), &grid, 4).unwrap();
        let delta = |kr: f64, nr: f64| {
            r.report
                .summary(&SimMechanism::PartialBf {
                    kprime_rate: kr,
                    nprime_rate: nr,
                })
                .unwrap()
                .expected_utility_delta
                .mean
        };
        assert!(delta(1.0, 0.75) > delta(0.5, 0.75));
        assert!(delta(1.0, 0.75) > delta(1.0, 0.5));
        assert!(r.top_k().expected_utility_delta.mean == 0.0);
        let f = r.frontier(2);
        assert_eq!(f[0].config, "top_k");
    }
}
