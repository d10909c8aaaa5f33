use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::distributions::{perturb_into, sample_raw, DistributionSpec};
use crate::claims::partial_bounds;
use crate::error::{Error, Result};
use crate::lottery::{draw_without_replacement, partial_bf_sorted};
use crate::metrics::mean_over_selected;
use crate::par;
use crate::rng::RandomSource;

const STREAM_CLAIMS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_LOTTERY: u64 = 2;

/// Allocation rule run by every simulated decision-maker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimMechanism {
    TopK,
    Bf,
    Unweighted,
    /// Partial BF with `k' = round(kprime_rate·k)` and `n' = round(nprime_rate·n)`.
    PartialBf { kprime_rate: f64, nprime_rate: f64 },
}

impl SimMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            SimMechanism::TopK => "top_k",
            SimMechanism::Bf => "bf",
            SimMechanism::Unweighted => "unweighted",
            SimMechanism::PartialBf { .. } => "partial_bf",
        }
    }

    /// `(k', n')` for this mechanism at the given pool size.
    pub fn counts(&self, n: usize, k: usize) -> (usize, usize) {
        match *self {
            SimMechanism::TopK => (0, 0),
            SimMechanism::Bf | SimMechanism::Unweighted => (k, n),
            SimMechanism::PartialBf {
                kprime_rate,
                nprime_rate,
            } => (
                (kprime_rate * k as f64).round() as usize,
                (nprime_rate * n as f64).round() as usize,
            ),
        }
    }

    fn stream_label(&self) -> u64 {
        // FNV-1a over the display form, so a mechanism keeps its lottery
        // streams when others are added to or removed from a run.
        self.to_string()
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
                (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
            })
    }
}

impl fmt::Display for SimMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimMechanism::PartialBf {
                kprime_rate,
                nprime_rate,
            } => write!(f, "partial_bf:{kprime_rate}:{nprime_rate}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for SimMechanism {
    type Err = Error;

    /// `top_k`, `bf`, `unweighted` or `partial_bf:<k'/k>:<n'/n>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["top_k"] | ["topk"] => Ok(SimMechanism::TopK),
            ["bf"] => Ok(SimMechanism::Bf),
            ["unweighted"] => Ok(SimMechanism::Unweighted),
            ["partial_bf", kr, nr] => {
                let parse = |x: &str| {
                    x.parse::<f64>()
                        .map_err(|_| Error::config(format!("bad rate {x:?} in {s:?}")))
                };
                Ok(SimMechanism::PartialBf {
                    kprime_rate: parse(kr)?,
                    nprime_rate: parse(nr)?,
                })
            }
            _ => Err(Error::config(format!("unknown mechanism {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `m` decision-makers allocate the same pool at once.
    #[default]
    Concurrent,
    /// `m` allocations in series; winners' claims grow by `benefit`.
    Sequential,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Concurrent => "concurrent",
            Mode::Sequential => "sequential",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    /// `k / n`.
    pub selection_rate: f64,
    pub iterations: usize,
    /// Decision-makers (concurrent) or allocation steps (sequential).
    pub m: usize,
    /// Std of each decision-maker's independent claim noise.
    pub noise_sigma: f64,
    pub mode: Mode,
    /// Claim increment for winners in sequential mode.
    pub benefit: f64,
    pub mechanisms: Vec<SimMechanism>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            selection_rate: 0.25,
            iterations: 1000,
            m: 4,
            noise_sigma: 0.025,
            mode: Mode::Concurrent,
            benefit: 0.0,
            mechanisms: vec![SimMechanism::TopK, SimMechanism::Bf],
        }
    }
}

impl SimulationConfig {
    pub fn k(&self) -> usize {
        ((self.selection_rate * self.n as f64).round() as usize).clamp(1, self.n.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        if !(self.selection_rate > 0.0 && self.selection_rate <= 1.0) {
            return Err(Error::config(format!(
                "selection rate must lie in (0, 1], got {}",
                self.selection_rate
            )));
        }
        if self.iterations == 0 || self.m == 0 {
            return Err(Error::config("iterations and m must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise sigma must be >= 0"));
        }
        if !(self.benefit >= 0.0 && self.benefit.is_finite()) {
            return Err(Error::config("benefit must be >= 0"));
        }
        let (n, k) = (self.n, self.k());
        for mech in &self.mechanisms {
            if let SimMechanism::PartialBf { .. } = mech {
                let (kp, np) = mech.counts(n, k);
                partial_bounds(n, k, kp, np)
                    .map_err(|e| Error::config(format!("{mech}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Mean over iterations and its standard error (sample std / √iterations).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn from_samples(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let (count, sum) = xs.clone().fold((0usize, 0.0), |(c, s), x| (c + 1, s + x));
        if count == 0 {
            return Self::default();
        }
        let first = xs.clone().next().unwrap_or_default();
        if xs.clone().all(|x| x == first) {
            return Self {
                mean: first,
                stderr: 0.0,
            };
        }
        let mean = sum / count as f64;
        if count < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        Self {
            mean,
            stderr: (var / count as f64).sqrt(),
        }
    }
}

/// Exclusion across the first `m` decision-makers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SerStat {
    pub m: usize,
    pub stat: Stat,
    /// `false` for `m = 1`, where SER is undefined and the value is the
    /// single allocator's exclusion rate.
    pub is_ser: bool,
}

/// Population state after each sequential step, averaged over iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepStat {
    pub step: usize,
    pub mean_claim: Stat,
    /// Share of individuals selected at least once so far.
    pub coverage: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MechanismSummary {
    pub mechanism: SimMechanism,
    pub k_prime: usize,
    pub n_prime: usize,
    /// One entry per `m' = 1..=m`.
    pub ser: Vec<SerStat>,
    pub expected_utility: Stat,
    /// Top-k expected utility minus this mechanism's, paired per allocator.
    pub expected_utility_delta: Stat,
    pub trajectory: Option<Vec<StepStat>>,
}

impl MechanismSummary {
    pub fn ser_at(&self, m: usize) -> Option<Stat> {
        self.ser.iter().find(|s| s.m == m).map(|s| s.stat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub distribution: DistributionSpec,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub noise_sigma: f64,
    pub mode: Mode,
    pub iterations: usize,
    pub seed: u64,
    pub mechanisms: Vec<MechanismSummary>,
}

impl SimulationReport {
    pub fn summary(&self, mechanism: &SimMechanism) -> Option<&MechanismSummary> {
        self.mechanisms.iter().find(|s| &s.mechanism == mechanism)
    }
}

/// Per-iteration observations for one mechanism.
struct IterationOutcome {
    /// Exclusion rate over the first `m'` rows, index `m' - 1`.
    exclusion: Vec<f64>,
    eu: f64,
    eu_delta: f64,
    steps: Vec<(f64, f64)>,
}

/// Canonical order over raw claims: strongest first, ties by position.
fn sorted_positions(claims: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..claims.len()).collect();
    order.sort_unstable_by(|&a, &b| claims[b].total_cmp(&claims[a]).then(a.cmp(&b)));
    order
}

fn allocate(
    mech: &SimMechanism,
    claims: &[f64],
    order: &[usize],
    k: usize,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    match mech {
        SimMechanism::TopK => Ok(order[..k].to_vec()),
        SimMechanism::Bf => Ok(draw_without_replacement(claims, k, rng, true, None, 0)?.picks),
        SimMechanism::Unweighted => {
            let ones = vec![1.0; claims.len()];
            Ok(draw_without_replacement(&ones, k, rng, true, None, 0)?.picks)
        }
        SimMechanism::PartialBf { .. } => {
            let (kp, np) = mech.counts(claims.len(), k);
            Ok(partial_bf_sorted(claims, order, k, kp, np, rng, None)?.0)
        }
    }
}

fn to_outcomes(n: usize, chosen: &[usize]) -> Vec<u8> {
    let mut o = vec![0u8; n];
    for &p in chosen {
        o[p] = 1;
    }
    o
}

fn running_exclusion(rows: &[Vec<u8>], n: usize) -> Vec<f64> {
    let mut excluded = vec![true; n];
    rows.iter()
        .map(|row| {
            for (e, &o) in excluded.iter_mut().zip(row) {
                *e &= o == 0;
            }
            excluded.iter().filter(|&&e| e).count() as f64 / n as f64
        })
        .collect()
}

fn concurrent_iteration(
    cfg: &SimulationConfig,
    spec: &DistributionSpec,
    seed: u64,
    iter: u64,
) -> Result<Vec<IterationOutcome>> {
    let (n, k) = (cfg.n, cfg.k());
    let truth = sample_raw(spec, n, &mut RandomSource::derive(seed, &[iter, STREAM_CLAIMS]));
    let mut perceived = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m as u64 {
        let mut buf = Vec::with_capacity(n);
        perturb_into(
            &truth,
            cfg.noise_sigma,
            &mut RandomSource::derive(seed, &[iter, STREAM_NOISE, j]),
            &mut buf,
        );
        let order = sorted_positions(&buf);
        perceived.push((buf, order));
    }
    let baseline: Vec<f64> = perceived
        .iter()
        .map(|(_, order)| mean_over_selected(&to_outcomes(n, &order[..k]), &truth, k))
        .collect();

    cfg.mechanisms
        .iter()
        .map(|mech| {
            let mut rows = Vec::with_capacity(cfg.m);
            let (mut eu, mut delta) = (0.0, 0.0);
            for (j, (claims, order)) in perceived.iter().enumerate() {
                let mut rng =
                    RandomSource::derive(seed, &[iter, STREAM_LOTTERY, mech.stream_label(), j as u64]);
                let chosen = allocate(mech, claims, order, k, &mut rng)?;
                let row = to_outcomes(n, &chosen);
                let e = mean_over_selected(&row, &truth, k);
                eu += e;
                delta += baseline[j] - e;
                rows.push(row);
            }
            Ok(IterationOutcome {
                exclusion: running_exclusion(&rows, n),
                eu: eu / cfg.m as f64,
                eu_delta: delta / cfg.m as f64,
                steps: Vec::new(),
            })
        })
        .collect()
}

/// Runs `m` sequential steps for one mechanism; returns rows, per-step
/// expected utilities and per-step `(mean claim, coverage)`.
fn sequential_trajectory(
    mech: &SimMechanism,
    truth: &[f64],
    cfg: &SimulationConfig,
    seed: u64,
    iter: u64,
) -> Result<(Vec<Vec<u8>>, Vec<f64>, Vec<(f64, f64)>)> {
    let (n, k) = (cfg.n, cfg.k());
    let mut claims = truth.to_vec();
    let mut perceived = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(cfg.m);
    let mut eus = Vec::with_capacity(cfg.m);
    let mut steps = Vec::with_capacity(cfg.m);
    let mut ever = vec![false; n];
    for j in 0..cfg.m as u64 {
        perturb_into(
            &claims,
            cfg.noise_sigma,
            &mut RandomSource::derive(seed, &[iter, STREAM_NOISE, j]),
            &mut perceived,
        );
        let order = sorted_positions(&perceived);
        let mut rng = RandomSource::derive(seed, &[iter, STREAM_LOTTERY, mech.stream_label(), j]);
        let chosen = allocate(mech, &perceived, &order, k, &mut rng)?;
        let row = to_outcomes(n, &chosen);
        eus.push(mean_over_selected(&row, &claims, k));
        for &p in &chosen {
            claims[p] = (claims[p] + cfg.benefit).min(1.0);
            ever[p] = true;
        }
        let mean_claim = claims.iter().sum::<f64>() / n as f64;
        let coverage = ever.iter().filter(|&&e| e).count() as f64 / n as f64;
        steps.push((mean_claim, coverage));
        rows.push(row);
    }
    Ok((rows, eus, steps))
}

fn sequential_iteration(
    cfg: &SimulationConfig,
    spec: &DistributionSpec,
    seed: u64,
    iter: u64,
) -> Result<Vec<IterationOutcome>> {
    let n = cfg.n;
    let truth = sample_raw(spec, n, &mut RandomSource::derive(seed, &[iter, STREAM_CLAIMS]));
    let (_, baseline, _) = sequential_trajectory(&SimMechanism::TopK, &truth, cfg, seed, iter)?;
    cfg.mechanisms
        .iter()
        .map(|mech| {
            let (rows, eus, steps) = sequential_trajectory(mech, &truth, cfg, seed, iter)?;
            let m = cfg.m as f64;
            Ok(IterationOutcome {
                exclusion: running_exclusion(&rows, n),
                eu: eus.iter().sum::<f64>() / m,
                eu_delta: baseline.iter().zip(&eus).map(|(b, e)| b - e).sum::<f64>() / m,
                steps,
            })
        })
        .collect()
}

fn summarize(cfg: &SimulationConfig, spec: &DistributionSpec, seed: u64, per_iter: Vec<Vec<IterationOutcome>>) -> SimulationReport {
    let (n, k) = (cfg.n, cfg.k());
    let mechanisms = cfg
        .mechanisms
        .iter()
        .enumerate()
        .map(|(idx, mech)| {
            let outcomes = || per_iter.iter().map(move |it| &it[idx]);
            let ser = (1..=cfg.m)
                .map(|m| SerStat {
                    m,
                    stat: Stat::from_samples(outcomes().map(|o| o.exclusion[m - 1])),
                    is_ser: m > 1,
                })
                .collect();
            let trajectory = (cfg.mode == Mode::Sequential).then(|| {
                (0..cfg.m)
                    .map(|s| StepStat {
                        step: s + 1,
                        mean_claim: Stat::from_samples(outcomes().map(|o| o.steps[s].0)),
                        coverage: Stat::from_samples(outcomes().map(|o| o.steps[s].1)),
                    })
                    .collect()
            });
            let (k_prime, n_prime) = mech.counts(n, k);
            MechanismSummary {
                mechanism: *mech,
                k_prime,
                n_prime,
                ser,
                expected_utility: Stat::from_samples(outcomes().map(|o| o.eu)),
                expected_utility_delta: Stat::from_samples(outcomes().map(|o| o.eu_delta)),
                trajectory,
            }
        })
        .collect();
    SimulationReport {
        distribution: *spec,
        n,
        k,
        m: cfg.m,
        noise_sigma: cfg.noise_sigma,
        mode: cfg.mode,
        iterations: cfg.iterations,
        seed,
        mechanisms,
    }
}

fn run(cfg: &SimulationConfig, spec: &DistributionSpec, seed: u64, mode: Mode) -> Result<SimulationReport> {
    cfg.validate()?;
    spec.validate()?;
    if cfg.mode != mode {
        return Err(Error::config(format!(
            "config mode is {}, expected {}",
            cfg.mode.as_str(),
            mode.as_str()
        )));
    }
    let per_iter = par::try_map_indexed(cfg.iterations, |i| match mode {
        Mode::Concurrent => concurrent_iteration(cfg, spec, seed, i as u64),
        Mode::Sequential => sequential_iteration(cfg, spec, seed, i as u64),
    })?;
    Ok(summarize(cfg, spec, seed, per_iter))
}

/// `m` decision-makers allocate the same population at once, each from an
/// independently noised view of the true claims. Expected utility is scored
/// against the true claims.
pub fn run_concurrent(cfg: &SimulationConfig, spec: &DistributionSpec, seed: u64) -> Result<SimulationReport> {
    run(cfg, spec, seed, Mode::Concurrent)
}

/// `m` allocations in series; each step's winners gain `benefit` (capped at
/// 1) before the next step. Exclusion is measured across the steps.
pub fn run_sequential(cfg: &SimulationConfig, spec: &DistributionSpec, seed: u64) -> Result<SimulationReport> {
    run(cfg, spec, seed, Mode::Sequential)
}

/// Dispatches on `cfg.mode`.
pub fn simulate(cfg: &SimulationConfig, spec: &DistributionSpec, seed: u64) -> Result<SimulationReport> {
    run(cfg, spec, seed, cfg.mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claimsim::Family;

    fn small(mechanisms: Vec<SimMechanism>) -> SimulationConfig {
        SimulationConfig {
            n: 200,
            selection_rate: 0.25,
            iterations: 40,
            m: 3,
            noise_sigma: 0.025,
            mode: Mode::Concurrent,
            benefit: 0.0,
            mechanisms,
        }
    }

    #[test]
    fn mechanism_strings_round_trip() {
        for s in ["top_k", "bf", "unweighted", "partial_bf:0.5:0.25"] {
            assert_eq!(s.parse::<SimMechanism>().unwrap().to_string(), s);
        }
        assert!("partial_bf:x:1".parse::<SimMechanism>().is_err());
        assert!("lottery".parse::<SimMechanism>().is_err());
    }

    #[test]
    fn noiseless_top_k_excludes_the_same_people() {
        let mut cfg = small(vec![SimMechanism::TopK]);
        cfg.noise_sigma = 0.0;
        let spec = DistributionSpec::with_default_param(Family::Normal);
        let r = run_concurrent(&cfg, &spec, 1).unwrap();
        let s = &r.mechanisms[0];
        for st in &s.ser {
            assert_eq!(st.stat.mean, 1.0 - 50.0 / 200.0);
            assert_eq!(st.stat.stderr, 0.0);
        }
        assert!(!s.ser[0].is_ser && s.ser[1].is_ser);
        assert_eq!(s.expected_utility_delta.mean, 0.0);
    }

    #[test]
    fn single_decision_maker_reports_exclusion_rate() {
        let mut cfg = small(vec![SimMechanism::Bf]);
        cfg.m = 1;
        let r = run_concurrent(&cfg, &DistributionSpec::with_default_param(Family::Uniform), 2).unwrap();
        let s = &r.mechanisms[0].ser;
        assert_eq!(s.len(), 1);
        assert!(!s[0].is_ser);
        assert_eq!(s[0].stat.mean, 0.75);
    }

    #[test]
    fn ser_never_increases_with_more_decision_makers() {
        let cfg = small(vec![SimMechanism::TopK, SimMechanism::Bf]);
        let r = run_concurrent(&cfg, &DistributionSpec::with_default_param(Family::Normal), 3).unwrap();
        for s in &r.mechanisms {
            for w in s.ser.windows(2) {
                assert!(w[1].stat.mean <= w[0].stat.mean);
            }
        }
        let top = r.summary(&SimMechanism::TopK).unwrap();
        let bf = r.summary(&SimMechanism::Bf).unwrap();
        assert!(bf.ser_at(3).unwrap().mean < top.ser_at(3).unwrap().mean);
        assert!(bf.expected_utility.mean < top.expected_utility.mean);
    }

    #[test]
    fn adding_mechanisms_keeps_existing_streams() {
        let spec = DistributionSpec::with_default_param(Family::Uniform);
        let a = run_concurrent(&small(vec![SimMechanism::Bf]), &spec, 5).unwrap();
        let b = run_concurrent(&small(vec![SimMechanism::TopK, SimMechanism::Bf]), &spec, 5).unwrap();
        assert_eq!(a.mechanisms[0], b.mechanisms[1]);
    }

    #[test]
    fn invalid_partial_point_is_a_config_error() {
        let cfg = small(vec![SimMechanism::PartialBf {
            kprime_rate: 0.5,
            nprime_rate: 0.05,
        }]);
        assert!(matches!(
            run_concurrent(&cfg, &DistributionSpec::with_default_param(Family::Uniform), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let cfg = small(vec![SimMechanism::TopK]);
        let spec = DistributionSpec::with_default_param(Family::Uniform);
        assert!(run_sequential(&cfg, &spec, 1).is_err());
    }

    #[test]
    fn sequential_lock_in_under_top_k() {
        let mut cfg = small(vec![SimMechanism::TopK, SimMechanism::Bf]);
        cfg.mode = Mode::Sequential;
        cfg.noise_sigma = 0.0;
        cfg.benefit = 1.0;
        let spec = DistributionSpec::with_default_param(Family::Normal);
        let r = run_sequential(&cfg, &spec, 9).unwrap();
        let top = r.summary(&SimMechanism::TopK).unwrap();
        assert_eq!(top.ser_at(3).unwrap().mean, 0.75);
        let traj = top.trajectory.as_ref().unwrap();
        assert_eq!(traj.len(), 3);
        assert_eq!(traj[2].coverage.mean, 0.25);
        let bf = r.summary(&SimMechanism::Bf).unwrap();
        assert!(bf.ser_at(3).unwrap().mean < 0.75);
    }
}
