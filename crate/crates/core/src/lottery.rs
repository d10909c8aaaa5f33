//! Allocation mechanisms over known claims: top-k, unweighted lottery,
//! Broome-fair (BF) lottery and the partial BF lottery.
//!
//! All lotteries run the same sequential procedure: one individual is drawn
//! per round, without replacement, with probability equal to its weight
//! among those still in the draw. Each round draws a single uniform `u` and
//! inverts the cumulative weight sum at `u · total`; a Fenwick tree keeps that
//! inversion logarithmic without changing the per-round semantics.

use serde::Serialize;

use crate::claims::{
    canonical_positions, partial_bounds, AllocationResult, ClaimProfile, LotteryConfig, Mechanism,
    SelectionWeights,
};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Maps a member's claim to its unnormalized weight. Round-`t` weights are
/// these masses renormalized over the members still in the draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WeightRule {
    /// `w_{i,t} = c_i / C_t`.
    Proportional,
    /// `w_{i,t} = 1 / (n - t + 1)`.
    Uniform,
}

impl WeightRule {
    #[inline]
    pub fn mass(self, claim: f64) -> f64 {
        match self {
            WeightRule::Proportional => claim,
            WeightRule::Uniform => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelectionOptions {
    /// When every remaining member has zero weight but slots remain, finish
    /// with an unweighted draw over them instead of failing.
    pub zero_claim_fallback: bool,
    /// Record per-round weights. Costs O(n) per round.
    pub trace: bool,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            zero_claim_fallback: true,
            trace: true,
        }
    }
}

impl SelectionOptions {
    pub fn untraced() -> Self {
        Self {
            trace: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRound {
    pub weights: SelectionWeights,
    /// Profile position drawn in this round.
    pub chosen: usize,
}

/// Sorted-rank boundaries of a partial lottery: ranks `0..deterministic` are
/// selected outright and ranks `band_start..band_end` form the random pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Band {
    pub deterministic: usize,
    pub band_start: usize,
    pub band_end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub rounds: Vec<TraceRound>,
    pub band: Option<Band>,
    /// Rounds drawn by the zero-claim fallback.
    pub fallback_rounds: usize,
}

impl SelectionTrace {
    pub fn weights(&self) -> Vec<SelectionWeights> {
        self.rounds.iter().map(|r| r.weights.clone()).collect()
    }
}

/// Fenwick tree over non-negative masses.
struct MassTree {
    tree: Vec<f64>,
    top_bit: usize,
}

impl MassTree {
    fn new(masses: &[f64]) -> Self {
        let n = masses.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(masses);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self { tree, top_bit }
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut i = self.tree.len() - 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

pub(crate) struct Drawn {
    /// Indices into the pool, in draw order.
    pub picks: Vec<usize>,
    pub fallback_rounds: usize,
}

/// Draws `k` pool indices without replacement; `masses[i]` is the
/// unnormalized weight of pool entry `i`.
///
/// `members` (profile positions, aligned with `masses`) is only used for the
/// trace; `round_offset` numbers the first recorded round.
pub(crate) fn draw_without_replacement(
    masses: &[f64],
    k: usize,
    rng: &mut RandomSource,
    zero_claim_fallback: bool,
    mut trace: Option<(&[usize], &mut Vec<TraceRound>)>,
    round_offset: usize,
) -> Result<Drawn> {
    let n = masses.len();
    if k > n {
        return Err(Error::config(format!("cannot draw {k} from a pool of {n}")));
    }
    let mut mass: Vec<f64> = masses.to_vec();
    let mut alive = vec![true; n];
    let mut positive_left = mass.iter().filter(|&&m| m > 0.0).count();
    let mut tree = MassTree::new(&mass);
    let mut in_fallback = false;
    let mut fallback_rounds = 0;
    let mut picks = Vec::with_capacity(k);

    for round in 0..k {
        if positive_left == 0 && !in_fallback {
            if !zero_claim_fallback {
                return Err(Error::config(format!(
                    "all remaining weights are zero with {} slot(s) left",
                    k - round
                )));
            }
            in_fallback = true;
            for (i, m) in mass.iter_mut().enumerate() {
                *m = if alive[i] { 1.0 } else { 0.0 };
            }
            positive_left = alive.iter().filter(|&&a| a).count();
            tree = MassTree::new(&mass);
        }
        if in_fallback {
            fallback_rounds += 1;
        }

        if let Some((members, rounds)) = trace.as_mut() {
            let total: f64 = (0..n).filter(|&i| alive[i]).map(|i| mass[i]).sum();
            let (m, w): (Vec<usize>, Vec<f64>) = (0..n)
                .filter(|&i| alive[i])
                .map(|i| (members[i], mass[i] / total))
                .unzip();
            rounds.push(TraceRound {
                weights: SelectionWeights {
                    round: round_offset + round + 1,
                    members: m,
                    weights: w,
                },
                chosen: usize::MAX,
            });
        }

        let u = rng.unit();
        let total = tree.total();
        let mut idx = tree.find(u * total);
        if idx >= n || !alive[idx] || mass[idx] <= 0.0 {
            // Accumulated rounding in the tree; redo this draw exactly.
            idx = linear_pick(&mass, &alive, u);
        }

        alive[idx] = false;
        tree.add(idx, -mass[idx]);
        if mass[idx] > 0.0 {
            positive_left -= 1;
        }
        mass[idx] = 0.0;
        picks.push(idx);

        if let Some((members, rounds)) = trace.as_mut() {
            rounds.last_mut().expect("round pushed above").chosen = members[idx];
        }
    }
    Ok(Drawn {
        picks,
        fallback_rounds,
    })
}

fn linear_pick(mass: &[f64], alive: &[bool], u: f64) -> usize {
    let total: f64 = mass.iter().zip(alive).filter(|(_, &a)| a).map(|(m, _)| m).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = usize::MAX;
    for (i, (&m, &a)) in mass.iter().zip(alive).enumerate() {
        if !a || m <= 0.0 {
            continue;
        }
        acc += m;
        last = i;
        if acc > target {
            return i;
        }
    }
    last
}

/// BF weights over the survivors: `w_i = c_i / Σ_j c_j`.
///
/// Fails with [`Error::Precondition`] when no survivor has a positive claim;
/// callers treat that as the signal to fall back to an unweighted draw.
pub fn bf_weights(survivor_claims: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = survivor_claims.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition(
            "no survivor has a positive claim".into(),
        ));
    }
    Ok(survivor_claims.iter().map(|c| c / total).collect())
}

fn descriptor(base: &str, fallback_rounds: usize) -> String {
    if fallback_rounds > 0 {
        format!("{base}+zero-claim-fallback:{fallback_rounds}")
    } else {
        base.to_string()
    }
}

fn check_k(profile: &ClaimProfile, k: usize) -> Result<()> {
    if k == 0 || k > profile.len() {
        return Err(Error::config(format!(
            "need 1 <= k <= n, got k = {k}, n = {}",
            profile.len()
        )));
    }
    Ok(())
}

/// Iterative weighted selection of `k` individuals from the whole profile.
pub fn iterative_weighted_selection(
    profile: &ClaimProfile,
    k: usize,
    rule: WeightRule,
    rng: &mut RandomSource,
    opts: SelectionOptions,
) -> Result<(AllocationResult, SelectionTrace)> {
    check_k(profile, k)?;
    let masses: Vec<f64> = profile.claims().iter().map(|&c| rule.mass(c)).collect();
    let members: Vec<usize> = (0..profile.len()).collect();
    let mut rounds = Vec::new();
    let drawn = draw_without_replacement(
        &masses,
        k,
        rng,
        opts.zero_claim_fallback,
        opts.trace.then_some((members.as_slice(), &mut rounds)),
        0,
    )?;
    let base = match rule {
        WeightRule::Proportional => Mechanism::BF.as_str(),
        WeightRule::Uniform => Mechanism::Unweighted.as_str(),
    };
    let result = AllocationResult::from_positions(
        profile,
        &drawn.picks,
        rng.seed(),
        descriptor(base, drawn.fallback_rounds),
    );
    Ok((
        result,
        SelectionTrace {
            rounds,
            band: None,
            fallback_rounds: drawn.fallback_rounds,
        },
    ))
}

/// The `k` strongest claims, ties broken by ascending id.
pub fn top_k(profile: &ClaimProfile, k: usize) -> Result<AllocationResult> {
    check_k(profile, k)?;
    let order = canonical_positions(profile);
    Ok(AllocationResult::from_positions(
        profile,
        &order[..k],
        0,
        Mechanism::TopK.as_str().to_string(),
    ))
}

/// Per-round weights of [`top_k`] read as a selection process: all weight
/// on the strongest survivor.
pub fn top_k_rounds(profile: &ClaimProfile, k: usize) -> Result<Vec<SelectionWeights>> {
    check_k(profile, k)?;
    let order = canonical_positions(profile);
    Ok((0..k)
        .map(|t| {
            let mut members = order[t..].to_vec();
            members.sort_unstable();
            let weights = members.iter().map(|&p| if p == order[t] { 1.0 } else { 0.0 }).collect();
            SelectionWeights {
                round: t + 1,
                members,
                weights,
            }
        })
        .collect())
}

/// Uniformly random k-subset, drawn round by round.
pub fn unweighted_lottery(
    profile: &ClaimProfile,
    k: usize,
    rng: &mut RandomSource,
) -> Result<AllocationResult> {
    iterative_weighted_selection(profile, k, WeightRule::Uniform, rng, SelectionOptions::untraced())
        .map(|(r, _)| r)
}

/// Full BF lottery with the zero-claim fallback enabled.
pub fn bf_lottery(profile: &ClaimProfile, k: usize, rng: &mut RandomSource) -> Result<AllocationResult> {
    iterative_weighted_selection(
        profile,
        k,
        WeightRule::Proportional,
        rng,
        SelectionOptions::untraced(),
    )
    .map(|(r, _)| r)
}

/// Partial BF lottery on a pre-sorted order (strongest first).
///
/// Returns selected positions: the first `k - k'` of `order`, then `k'` BF
/// draws from `order[k-k' .. k-k'+n']`.
pub(crate) fn partial_bf_sorted(
    claims: &[f64],
    order: &[usize],
    k: usize,
    k_prime: usize,
    n_prime: usize,
    rng: &mut RandomSource,
    trace: Option<&mut Vec<TraceRound>>,
) -> Result<(Vec<usize>, usize)> {
    let fixed = k - k_prime;
    let mut chosen: Vec<usize> = order[..fixed].to_vec();
    if k_prime == 0 {
        return Ok((chosen, 0));
    }
    let pool = &order[fixed..fixed + n_prime];
    let masses: Vec<f64> = pool.iter().map(|&p| claims[p]).collect();
    let drawn = draw_without_replacement(&masses, k_prime, rng, true, trace.map(|t| (pool, t)), 0)?;
    chosen.extend(drawn.picks.iter().map(|&i| pool[i]));
    Ok((chosen, drawn.fallback_rounds))
}

/// Top `k - k'` claims outright, then a BF lottery for the remaining `k'`
/// slots over the next `n'` claims in canonical order.
///
/// `k' = n' = 0` reduces to [`top_k`] and consumes no randomness.
pub fn partial_bf_lottery(
    profile: &ClaimProfile,
    cfg: &LotteryConfig,
    rng: &mut RandomSource,
    opts: SelectionOptions,
) -> Result<(AllocationResult, SelectionTrace)> {
    if cfg.n != profile.len() {
        return Err(Error::structural(format!(
            "config is for n = {} but the profile has {}",
            cfg.n,
            profile.len()
        )));
    }
    check_k(profile, cfg.k)?;
    partial_bounds(cfg.n, cfg.k, cfg.k_prime, cfg.n_prime)?;
    let order = canonical_positions(profile);
    let mut rounds = Vec::new();
    let (chosen, fallback_rounds) = partial_bf_sorted(
        profile.claims(),
        &order,
        cfg.k,
        cfg.k_prime,
        cfg.n_prime,
        rng,
        opts.trace.then_some(&mut rounds),
    )?;
    let fixed = cfg.k - cfg.k_prime;
    let base = if cfg.k_prime == 0 {
        Mechanism::TopK.as_str().to_string()
    } else {
        format!("{}(k'={},n'={})", Mechanism::PartialBF, cfg.k_prime, cfg.n_prime)
    };
    let result = AllocationResult::from_positions(
        profile,
        &chosen,
        if cfg.k_prime == 0 { 0 } else { rng.seed() },
        descriptor(&base, fallback_rounds),
    );
    Ok((
        result,
        SelectionTrace {
            rounds,
            band: Some(Band {
                deterministic: fixed,
                band_start: fixed,
                band_end: fixed + cfg.n_prime,
            }),
            fallback_rounds,
        },
    ))
}
