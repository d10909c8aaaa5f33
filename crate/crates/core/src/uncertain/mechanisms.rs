use log::warn;
use serde::{Deserialize, Serialize};

use crate::claims::{canonical_positions, AllocationResult, ClaimProfile, LotteryConfig};
use crate::error::{Error, Result};
use crate::lottery::{draw_without_replacement, partial_bf_lottery, top_k, SelectionOptions};
use crate::metrics::utility;
use crate::predict::BootstrapEnsemble;
use crate::rng::RandomSource;

/// How ensemble members vote for an individual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Member score strictly above the main model's score at zero-based
    /// rank `k`.
    #[default]
    MainThreshold,
    /// Member ranks the individual inside its own top `k`.
    MemberTopK,
}

/// Lottery masses for the partially-voted pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolWeights {
    #[default]
    VoteFraction,
    MainScore,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Unweighted,
    /// Score-weighted iterative selection.
    Weighted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarianceOptions {
    pub vote_mode: VoteMode,
    pub weights: PoolWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub utility: f64,
    /// Partial BF at the same (clamped) `k'` and `n'`.
    pub utility_boundary_matched: f64,
    pub utility_topk: f64,
}

/// An allocation plus the randomization it actually used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UncertainAllocationReport {
    pub allocation: AllocationResult,
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub n_prime: usize,
    pub notes: Vec<String>,
    pub evaluation: Option<Evaluation>,
}

impl UncertainAllocationReport {
    pub fn kprime_rate(&self) -> f64 {
        self.k_prime as f64 / self.k as f64
    }

    pub fn nprime_rate(&self) -> f64 {
        self.n_prime as f64 / self.n as f64
    }

    /// Scores this allocation, top-k and a rate-matched partial BF draw
    /// (stream `rng`) against realized outcomes.
    pub fn evaluate(&mut self, profile: &ClaimProfile, labels: &[u8], rng: &mut RandomSource) -> Result<Evaluation> {
        let matched = matched_boundary_config(self.n, self.k, self.k_prime, self.n_prime)?;
        let (boundary, _) = partial_bf_lottery(profile, &matched, rng, SelectionOptions::untraced())?;
        let topk = top_k(profile, self.k)?;
        let e = Evaluation {
            utility: utility(&self.allocation, Some(labels), self.k)?,
            utility_boundary_matched: utility(&boundary, Some(labels), self.k)?,
            utility_topk: utility(&topk, Some(labels), self.k)?,
        };
        self.evaluation = Some(e);
        Ok(e)
    }
}

/// Partial BF config at `(k', n')` moved into the valid range: `k' = 0` or
/// `k = n` gives top-k, otherwise `n'` is clamped to `[k' + 1, n - k + k']`.
pub fn matched_boundary_config(n: usize, k: usize, k_prime: usize, n_prime: usize) -> Result<LotteryConfig> {
    if k_prime == 0 || k >= n {
        return LotteryConfig::partial(n, k, 0, 0);
    }
    let kp = k_prime.min(k);
    let np = n_prime.clamp(kp + 1, n - k + kp);
    LotteryConfig::partial(n, k, kp, np)
}

fn check(profile: &ClaimProfile, k: usize) -> Result<()> {
    if k == 0 || k > profile.len() {
        return Err(Error::config(format!(
            "need 1 <= k <= n, got k = {k}, n = {}",
            profile.len()
        )));
    }
    Ok(())
}

fn is_top_k(order: &[usize], chosen: &[usize], k: usize) -> bool {
    let mut top: Vec<usize> = order[..k].to_vec();
    let mut c = chosen.to_vec();
    top.sort_unstable();
    c.sort_unstable();
    top == c
}

/// Partial BF lottery over predicted scores.
pub fn boundary_randomize(
    profile: &ClaimProfile,
    cfg: &LotteryConfig,
    rng: &mut RandomSource,
) -> Result<UncertainAllocationReport> {
    let (allocation, _) = partial_bf_lottery(profile, cfg, rng, SelectionOptions::untraced())?;
    Ok(UncertainAllocationReport {
        allocation,
        n: cfg.n,
        k: cfg.k,
        k_prime: cfg.k_prime,
        n_prime: cfg.n_prime,
        notes: Vec::new(),
        evaluation: None,
    })
}

/// Unanimously voted individuals are selected outright; the remaining slots
/// go by lottery among those with a split vote.
pub fn variance_randomize(
    profile: &ClaimProfile,
    ensemble: &BootstrapEnsemble,
    k: usize,
    opts: VarianceOptions,
    rng: &mut RandomSource,
) -> Result<UncertainAllocationReport> {
    check(profile, k)?;
    let n = profile.len();
    if ensemble.n() != n {
        return Err(Error::structural(format!(
            "ensemble covers {} individuals, profile has {n}",
            ensemble.n()
        )));
    }
    let claims = profile.claims();
    let order = canonical_positions(profile);
    let mut votes = match opts.vote_mode {
        VoteMode::MainThreshold => {
            let threshold = if k < n { claims[order[k]] } else { f64::NEG_INFINITY };
            ensemble.vote_fractions_above(threshold)
        }
        VoteMode::MemberTopK => ensemble.vote_fractions_top_k(k),
    };
    let mut notes = Vec::new();

    let mut unanimous: Vec<usize> = order.iter().copied().filter(|&p| votes[p] == 1.0).collect();
    if unanimous.len() > k {
        let demoted = unanimous.split_off(k);
        let b = ensemble.b() as f64;
        for &p in &demoted {
            votes[p] = (b - 1.0) / b;
        }
        warn!(
            "{} unanimous votes for {k} slots; demoting {} to the lottery",
            demoted.len() + k,
            demoted.len()
        );
        notes.push(format!("unanimous overflow: demoted {}", demoted.len()));
    }
    let k_prime = k - unanimous.len();
    let pool: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&p| votes[p] > 0.0 && votes[p] < 1.0)
        .collect();

    let mut chosen = unanimous;
    let mut drew = false;
    if k_prime > 0 && pool.len() > k_prime {
        let masses: Vec<f64> = pool
            .iter()
            .map(|&p| match opts.weights {
                PoolWeights::VoteFraction => votes[p],
                PoolWeights::MainScore => claims[p],
            })
            .collect();
        let drawn = draw_without_replacement(&masses, k_prime, rng, true, None, 0)?;
        chosen.extend(drawn.picks.iter().map(|&i| pool[i]));
        drew = true;
    } else if k_prime > 0 {
        chosen.extend(&pool);
        let short = k_prime - pool.len();
        if short > 0 {
            let fill: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&p| votes[p] == 0.0)
                .take(short)
                .collect();
            notes.push(format!("filled {short} slot(s) from zero-vote individuals by score"));
            chosen.extend(fill);
        }
    }

    let allocation = if !drew && is_top_k(&order, &chosen, k) {
        top_k(profile, k)?
    } else {
        AllocationResult::from_positions(
            profile,
            &chosen,
            if drew { rng.seed() } else { 0 },
            format!("variance(k'={k_prime},n'={})", pool.len()),
        )
    };
    Ok(UncertainAllocationReport {
        allocation,
        n,
        k,
        k_prime,
        n_prime: pool.len(),
        notes,
        evaluation: None,
    })
}

/// Top-k slots held by flagged individuals are re-allocated by lottery over
/// every flagged individual; unflagged top-k members keep their slots.
pub fn outlier_randomize(
    profile: &ClaimProfile,
    flagged: &[bool],
    k: usize,
    mode: PoolMode,
    rng: &mut RandomSource,
) -> Result<UncertainAllocationReport> {
    check(profile, k)?;
    let n = profile.len();
    if flagged.len() != n {
        return Err(Error::structural(format!(
            "{} outlier flags for {n} individuals",
            flagged.len()
        )));
    }
    let order = canonical_positions(profile);
    let mut chosen: Vec<usize> = order[..k].iter().copied().filter(|&p| !flagged[p]).collect();
    let k_prime = k - chosen.len();
    let pool: Vec<usize> = (0..n).filter(|&p| flagged[p]).collect();
    if k_prime == 0 {
        return Ok(UncertainAllocationReport {
            allocation: top_k(profile, k)?,
            n,
            k,
            k_prime: 0,
            n_prime: pool.len(),
            notes: Vec::new(),
            evaluation: None,
        });
    }
    let masses: Vec<f64> = match mode {
        PoolMode::Unweighted => vec![1.0; pool.len()],
        PoolMode::Weighted => pool.iter().map(|&p| profile.claims()[p]).collect(),
    };
    let drawn = draw_without_replacement(&masses, k_prime, rng, true, None, 0)?;
    chosen.extend(drawn.picks.iter().map(|&i| pool[i]));
    let tag = match mode {
        PoolMode::Unweighted => "outlier",
        PoolMode::Weighted => "outlier_weighted",
    };
    Ok(UncertainAllocationReport {
        allocation: AllocationResult::from_positions(
            profile,
            &chosen,
            rng.seed(),
            format!("{tag}(k'={k_prime},n'={})", pool.len()),
        ),
        n,
        k,
        k_prime,
        n_prime: pool.len(),
        notes: Vec::new(),
        evaluation: None,
    })
}
