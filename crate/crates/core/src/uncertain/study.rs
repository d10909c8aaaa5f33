//! Repeated train/test experiments over a tabular dataset: table-style
//! utility summaries, per-individual selection frequencies, and SER versus
//! utility tradeoffs.

use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::mechanisms::{
    boundary_randomize, outlier_randomize, variance_randomize, PoolMode, UncertainAllocationReport,
    VarianceOptions,
};
use crate::claims::{ClaimProfile, LotteryConfig};
use crate::claimsim::{Stat, SweepGrid};
use crate::error::{Error, Result};
use crate::metrics::{frontier, ser, utility, EnsembleOutcomes, FrontierPoint};
use crate::par;
use crate::predict::{
    bootstrap_ensemble, conformal_pvalues, split, train, BootstrapConfig, BootstrapEnsemble, ConformalScorer,
    Matrix, ModelSpec, Standardizer, TabularDataset, DEFAULT_REFERENCE_CAP,
};
use crate::rng::RandomSource;

const CALIBRATION_STREAM: u64 = 0xca11;
const MODEL_STREAM: u64 = 0x30de1;
const ENSEMBLE_STREAM: u64 = 0xe45e;
const CONFORMAL_STREAM: u64 = 0xc0f0;
const LOTTERY_STREAM: u64 = 0x1077;
const BOUNDARY_STREAM: u64 = 0xb0d;
const SER_STREAM: u64 = 0x5e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TopK,
    Boundary,
    Variance,
    Outlier,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TopK, Method::Boundary, Method::Variance, Method::Outlier];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TopK => "top_k",
            Method::Boundary => "boundary",
            Method::Variance => "variance",
            Method::Outlier => "outlier",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub models: Vec<ModelSpec>,
    pub methods: Vec<Method>,
    pub selection_rates: Vec<f64>,
    /// Outlier levels; each one is a separate outlier row.
    pub alphas: Vec<f64>,
    /// Boundary method: `k'/k`.
    pub kprime_rate: f64,
    /// Boundary method: `n'/n`; unset means `n' = k`.
    pub nprime_rate: Option<f64>,
    pub repetitions: usize,
    pub iterations: usize,
    pub train_ratio: f64,
    /// Share of the training fold held out for conformal calibration.
    pub calibration_fraction: f64,
    pub bootstrap: BootstrapConfig,
    pub variance: VarianceOptions,
    pub pool_mode: PoolMode,
    pub reference_cap: usize,
    /// Retrain the ensemble for every iteration instead of once per repetition.
    pub retrain_ensemble: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelSpec::logistic(), ModelSpec::forest(), ModelSpec::tree()],
            methods: Method::ALL.to_vec(),
            selection_rates: vec![0.1, 0.25, 0.5],
            alphas: vec![0.2],
            kprime_rate: 0.5,
            nprime_rate: None,
            repetitions: 5,
            iterations: 100,
            train_ratio: 0.8,
            calibration_fraction: 0.25,
            bootstrap: BootstrapConfig::default(),
            variance: VarianceOptions::default(),
            pool_mode: PoolMode::Unweighted,
            reference_cap: DEFAULT_REFERENCE_CAP,
            retrain_ensemble: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.methods.is_empty() || self.selection_rates.is_empty() {
            return Err(Error::config("models, methods and selection rates must be non-empty"));
        }
        if self.selection_rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::config("selection rates must lie in (0, 1]"));
        }
        if self.methods.contains(&Method::Outlier) && self.alphas.is_empty() {
            return Err(Error::config("the outlier method needs at least one alpha"));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::config("alphas must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.kprime_rate) {
            return Err(Error::config("k' rate must lie in [0, 1]"));
        }
        if self.nprime_rate.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::config("n' rate must lie in [0, 1]"));
        }
        if self.repetitions == 0 || self.iterations == 0 {
            return Err(Error::config("repetitions and iterations must be positive"));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::config("calibration fraction must lie in (0, 1)"));
        }
        self.bootstrap.validate()
    }

    fn boundary_config(&self, n: usize, k: usize) -> Result<LotteryConfig> {
        let kp = (self.kprime_rate * k as f64).round() as usize;
        if kp == 0 {
            return LotteryConfig::partial(n, k, 0, 0);
        }
        let np = self.nprime_rate.map_or(k, |r| (r * n as f64).round() as usize);
        LotteryConfig::partial(n, k, kp, np)
    }
}

/// One repetition's folds, standardized on the training fold.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedFold {
    pub repetition: usize,
    pub x_train: Matrix,
    pub y_train: Vec<u8>,
    /// Training rows not held out for calibration.
    pub x_reference: Matrix,
    pub x_calibration: Matrix,
    pub x_pool: Matrix,
    pub y_pool: Vec<u8>,
    pub pool_ids: Vec<usize>,
}

pub fn prepare_fold(
    ds: &TabularDataset,
    train_ratio: f64,
    calibration_fraction: f64,
    repetition: usize,
    seed: u64,
) -> Result<PreparedFold> {
    let s = split(ds.len(), train_ratio, repetition as u64, seed)?;
    if s.train.len() < 2 || s.test.is_empty() {
        return Err(Error::config(format!("{} rows are too few to split", ds.len())));
    }
    let scaler = Standardizer::fit(&ds.features.select(&s.train), &ds.numeric_columns);
    let x = scaler.apply(&ds.features);

    let mut shuffled = s.train.clone();
    RandomSource::derive(seed, &[CALIBRATION_STREAM, repetition as u64]).shuffle(&mut shuffled);
    let n_cal = ((calibration_fraction * shuffled.len() as f64).round() as usize).clamp(1, shuffled.len() - 1);
    let mut cal = shuffled[..n_cal].to_vec();
    let mut reference = shuffled[n_cal..].to_vec();
    cal.sort_unstable();
    reference.sort_unstable();

    Ok(PreparedFold {
        repetition,
        x_train: x.select(&s.train),
        y_train: s.train.iter().map(|&i| ds.labels[i]).collect(),
        x_reference: x.select(&reference),
        x_calibration: x.select(&cal),
        x_pool: x.select(&s.test),
        y_pool: s.test.iter().map(|&i| ds.labels[i]).collect(),
        pool_ids: s.test.iter().map(|&i| ds.ids[i]).collect(),
    })
}

/// Per-model state shared by every iteration of a repetition.
struct ModelFold<'a> {
    fold: &'a PreparedFold,
    spec: ModelSpec,
    model_index: usize,
    profile: ClaimProfile,
    ensemble: Option<BootstrapEnsemble>,
}

/// One mechanism setting inside a (model, selection rate) cell.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Case {
    Fixed(Method, Option<usize>),
    Grid(LotteryConfig),
}

impl ModelFold<'_> {
    fn run(
        &self,
        cfg: &StudyConfig,
        case: Case,
        k: usize,
        conformal: Option<&ConformalScorer>,
        rng: &mut RandomSource,
        iteration: usize,
        seed: u64,
    ) -> Result<UncertainAllocationReport> {
        let n = self.profile.len();
        match case {
            Case::Fixed(Method::TopK, _) => boundary_randomize(&self.profile, &LotteryConfig::partial(n, k, 0, 0)?, rng),
            Case::Fixed(Method::Boundary, _) => boundary_randomize(&self.profile, &cfg.boundary_config(n, k)?, rng),
            Case::Grid(lc) => boundary_randomize(&self.profile, &lc, rng),
            Case::Fixed(Method::Variance, _) => {
                if cfg.retrain_ensemble {
                    let e = bootstrap_ensemble(
                        &self.spec,
                        &self.fold.x_train,
                        &self.fold.y_train,
                        &cfg.bootstrap,
                        &self.fold.x_pool,
                        &RandomSource::derive(
                            seed,
                            &[ENSEMBLE_STREAM, self.fold.repetition as u64, self.model_index as u64, iteration as u64 + 1],
                        ),
                    )?;
                    variance_randomize(&self.profile, &e, k, cfg.variance, rng)
                } else {
                    let e = self.ensemble.as_ref().expect("ensemble trained for the variance method");
                    variance_randomize(&self.profile, e, k, cfg.variance, rng)
                }
            }
            Case::Fixed(Method::Outlier, Some(a)) => {
                let scorer = conformal.expect("conformal scorer built for the outlier method");
                let flags = scorer.with_alpha(cfg.alphas[a])?.flagged();
                outlier_randomize(&self.profile, &flags, k, cfg.pool_mode, rng)
            }
            Case::Fixed(Method::Outlier, None) => unreachable!("outlier cases carry an alpha"),
        }
    }
}

fn cases(cfg: &StudyConfig) -> Vec<Case> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        if m == Method::Outlier {
            out.extend((0..cfg.alphas.len()).map(|a| Case::Fixed(m, Some(a))));
        } else {
            out.push(Case::Fixed(m, None));
        }
    }
    out
}

fn k_for(rate: f64, n: usize) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n)
}

struct RepetitionModels<'a> {
    models: Vec<ModelFold<'a>>,
    conformal: Option<ConformalScorer>,
}

fn fit_repetition<'a>(fold: &'a PreparedFold, cfg: &StudyConfig, seed: u64, need_ensemble: bool) -> Result<RepetitionModels<'a>> {
    let r = fold.repetition as u64;
    let conformal = if cfg.methods.contains(&Method::Outlier) {
        Some(conformal_pvalues(
            &fold.x_reference,
            &fold.x_calibration,
            &fold.x_pool,
            cfg.alphas[0],
            cfg.reference_cap,
            &mut RandomSource::derive(seed, &[CONFORMAL_STREAM, r]),
        )?)
    } else {
        None
    };
    let mut models = Vec::with_capacity(cfg.models.len());
    for (mi, spec) in cfg.models.iter().enumerate() {
        let main = train(spec, &fold.x_train, &fold.y_train, &RandomSource::derive(seed, &[MODEL_STREAM, r, mi as u64]))?;
        let profile = ClaimProfile::with_ids(main.predict_scores(&fold.x_pool), fold.pool_ids.clone())?;
        let ensemble = if need_ensemble && !cfg.retrain_ensemble {
            Some(bootstrap_ensemble(
                spec,
                &fold.x_train,
                &fold.y_train,
                &cfg.bootstrap,
                &fold.x_pool,
                &RandomSource::derive(seed, &[ENSEMBLE_STREAM, r, mi as u64, 0]),
            )?)
        } else {
            None
        };
        models.push(ModelFold {
            fold,
            spec: *spec,
            model_index: mi,
            profile,
            ensemble,
        });
    }
    Ok(RepetitionModels { models, conformal })
}

/// Mean outcomes of one (model, selection rate, method) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub model: String,
    pub method: Method,
    pub alpha: Option<f64>,
    pub k_over_n: f64,
    pub kprime_rate: f64,
    pub nprime_rate: f64,
    pub utility_method: f64,
    pub utility_boundary_matched: f64,
    pub utility_topk: f64,
    /// Runs that logged a fallback (overflow or shortfall).
    pub noted_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionFrequency {
    pub repetition: usize,
    pub model: String,
    pub k_over_n: f64,
    pub method: Method,
    pub alpha: Option<f64>,
    pub id: usize,
    pub score: f64,
    pub vote_fraction: Option<f64>,
    pub p_value: Option<f64>,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub rows: Vec<TableRow>,
    pub frequencies: Vec<SelectionFrequency>,
    pub positive_rate: f64,
    /// Novelty reference rows actually used, per repetition.
    pub reference_rows: Vec<usize>,
}

#[derive(Clone, Copy, Default)]
struct Sums {
    kprime_rate: f64,
    nprime_rate: f64,
    utility: f64,
    boundary: f64,
    topk: f64,
    noted: usize,
    runs: usize,
}

/// Repeated 80/20 protocol: per repetition, fit each model on the training
/// fold, then run every method `cfg.iterations` times on the test fold.
pub fn run_study(ds: &TabularDataset, cfg: &StudyConfig, seed: u64) -> Result<StudyReport> {
    cfg.validate()?;
    let cases = cases(cfg);
    let cells = cfg.models.len() * cfg.selection_rates.len() * cases.len();
    let need_ensemble = cfg.methods.contains(&Method::Variance);

    let per_rep = par::try_map_indexed(cfg.repetitions, |r| -> Result<_> {
        let fold = prepare_fold(ds, cfg.train_ratio, cfg.calibration_fraction, r, seed)?;
        let fitted = fit_repetition(&fold, cfg, seed, need_ensemble)?;
        let mut sums = vec![Sums::default(); cells];
        let mut freqs = Vec::new();
        for mf in &fitted.models {
            let n = mf.profile.len();
            for (ri, &rate) in cfg.selection_rates.iter().enumerate() {
                let k = k_for(rate, n);
                for (ci, &case) in cases.iter().enumerate() {
                    let path = |stream: u64, t: usize| {
                        RandomSource::derive(seed, &[stream, r as u64, mf.model_index as u64, ri as u64, ci as u64, t as u64])
                    };
                    let runs = par::try_map_indexed(cfg.iterations, |t| -> Result<_> {
                        let mut rep = mf.run(cfg, case, k, fitted.conformal.as_ref(), &mut path(LOTTERY_STREAM, t), t, seed)?;
                        rep.evaluate(&mf.profile, &fold.y_pool, &mut path(BOUNDARY_STREAM, t))?;
                        Ok(rep)
                    })?;
                    let cell = &mut sums[(mf.model_index * cfg.selection_rates.len() + ri) * cases.len() + ci];
                    let mut counts = vec![0usize; n];
                    for rep in &runs {
                        let e = rep.evaluation.expect("evaluated above");
                        cell.kprime_rate += rep.kprime_rate();
                        cell.nprime_rate += rep.nprime_rate();
                        cell.utility += e.utility;
                        cell.boundary += e.utility_boundary_matched;
                        cell.topk += e.utility_topk;
                        cell.noted += (!rep.notes.is_empty()) as usize;
                        cell.runs += 1;
                        for (c, &o) in counts.iter_mut().zip(&rep.allocation.outcomes) {
                            *c += o as usize;
                        }
                    }
                    let (method, alpha) = match case {
                        Case::Fixed(m, a) => (m, a.map(|a| cfg.alphas[a])),
                        Case::Grid(_) => (Method::Boundary, None),
                    };
                    let votes = match (method, &mf.ensemble) {
                        (Method::Variance, Some(e)) => Some(vote_fractions(&mf.profile, e, k, cfg)),
                        _ => None,
                    };
                    let p_values = match (method, &fitted.conformal) {
                        (Method::Outlier, Some(c)) => Some(&c.p_values),
                        _ => None,
                    };
                    for (i, &c) in counts.iter().enumerate() {
                        freqs.push(SelectionFrequency {
                            repetition: r,
                            model: mf.spec.short_name().to_string(),
                            k_over_n: rate,
                            method,
                            alpha,
                            id: mf.profile.id(i),
                            score: mf.profile.claims()[i],
                            vote_fraction: votes.as_ref().map(|v| v[i]),
                            p_value: p_values.map(|p| p[i]),
                            frequency: c as f64 / cfg.iterations as f64,
                        });
                    }
                }
            }
        }
        info!("repetition {r} done");
        let reference_rows = fitted.conformal.as_ref().map_or(fold.x_reference.rows(), |c| c.reference_rows);
        Ok((sums, freqs, reference_rows))
    })?;

    let mut total = vec![Sums::default(); cells];
    let mut frequencies = Vec::new();
    let mut reference_rows = Vec::new();
    for (sums, freqs, refs) in per_rep {
        for (t, s) in total.iter_mut().zip(sums) {
            t.kprime_rate += s.kprime_rate;
            t.nprime_rate += s.nprime_rate;
            t.utility += s.utility;
            t.boundary += s.boundary;
            t.topk += s.topk;
            t.noted += s.noted;
            t.runs += s.runs;
        }
        frequencies.extend(freqs);
        reference_rows.push(refs);
    }

    let mut rows = Vec::with_capacity(cells);
    for (mi, spec) in cfg.models.iter().enumerate() {
        for (ri, &rate) in cfg.selection_rates.iter().enumerate() {
            for (ci, &case) in cases.iter().enumerate() {
                let s = total[(mi * cfg.selection_rates.len() + ri) * cases.len() + ci];
                let d = s.runs as f64;
                let (method, alpha) = match case {
                    Case::Fixed(m, a) => (m, a.map(|a| cfg.alphas[a])),
                    Case::Grid(_) => (Method::Boundary, None),
                };
                rows.push(TableRow {
                    model: spec.short_name().to_string(),
                    method,
                    alpha,
                    k_over_n: rate,
                    kprime_rate: s.kprime_rate / d,
                    nprime_rate: s.nprime_rate / d,
                    utility_method: s.utility / d,
                    utility_boundary_matched: s.boundary / d,
                    utility_topk: s.topk / d,
                    noted_runs: s.noted,
                });
            }
        }
    }
    Ok(StudyReport {
        rows,
        frequencies,
        positive_rate: ds.positive_rate(),
        reference_rows,
    })
}

fn vote_fractions(profile: &ClaimProfile, e: &BootstrapEnsemble, k: usize, cfg: &StudyConfig) -> Vec<f64> {
    match cfg.variance.vote_mode {
        super::VoteMode::MainThreshold => {
            let order = crate::claims::canonical_positions(profile);
            let t = if k < profile.len() { profile.claims()[order[k]] } else { f64::NEG_INFINITY };
            e.vote_fractions_above(t)
        }
        super::VoteMode::MemberTopK => e.vote_fractions_top_k(k),
    }
}

/// Mean SER and utility of one mechanism setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub model: String,
    pub k_over_n: f64,
    pub method: Method,
    pub config: String,
    pub kprime_rate: f64,
    pub nprime_rate: f64,
    pub utility: Stat,
    /// Top-k utility minus this setting's utility.
    pub utility_loss: f64,
    pub ser: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffReport {
    pub m: usize,
    pub points: Vec<TradeoffPoint>,
}

impl TradeoffReport {
    /// Frontier of one method for one (model, selection rate) cell.
    pub fn frontier(&self, model: &str, k_over_n: f64, method: Method) -> Vec<FrontierPoint> {
        let pts: Vec<FrontierPoint> = self
            .points
            .iter()
            .filter(|p| p.model == model && p.k_over_n == k_over_n && (p.method == method || p.method == Method::TopK))
            .map(|p| FrontierPoint {
                utility_delta: p.utility_loss,
                ser: p.ser.mean,
                config: p.config.clone(),
            })
            .collect();
        frontier(&pts)
    }
}

/// Runs `m` independent allocations per iteration for every setting and
/// reports mean SER against mean utility loss. The boundary method is swept
/// over `grid`; the other methods contribute one point each (one per alpha
/// for outliers).
pub fn ser_tradeoff_study(
    ds: &TabularDataset,
    cfg: &StudyConfig,
    m: usize,
    grid: &SweepGrid,
    seed: u64,
) -> Result<TradeoffReport> {
    cfg.validate()?;
    if m < 2 {
        return Err(Error::Precondition(format!("SER needs m > 1, got {m}")));
    }
    let need_ensemble = cfg.methods.contains(&Method::Variance);
    let per_rep = par::try_map_indexed(cfg.repetitions, |r| -> Result<_> {
        let fold = prepare_fold(ds, cfg.train_ratio, cfg.calibration_fraction, r, seed)?;
        let fitted = fit_repetition(&fold, cfg, seed, need_ensemble)?;
        let mut out = Vec::new();
        for mf in &fitted.models {
            let n = mf.profile.len();
            for (ri, &rate) in cfg.selection_rates.iter().enumerate() {
                let k = k_for(rate, n);
                let mut settings: Vec<Case> = Vec::new();
                for c in cases(cfg) {
                    match c {
                        Case::Fixed(Method::Boundary, _) => {
                            for &kr in &grid.kprime_rates {
                                for &nr in &grid.nprime_rates {
                                    let kp = (kr * k as f64).round() as usize;
                                    let np = (nr * n as f64).round() as usize;
                                    if kp > 0 {
                                        if let Ok(lc) = LotteryConfig::partial(n, k, kp, np) {
                                            settings.push(Case::Grid(lc));
                                        }
                                    }
                                }
                            }
                        }
                        other => settings.push(other),
                    }
                }
                for (ci, &case) in settings.iter().enumerate() {
                    let samples = par::try_map_indexed(cfg.iterations, |t| -> Result<_> {
                        let mut rows = Vec::with_capacity(m);
                        let mut util = 0.0;
                        let mut kp = 0.0;
                        let mut np = 0.0;
                        let mut label = String::new();
                        for j in 0..m {
                            let mut rng = RandomSource::derive(
                                seed,
                                &[SER_STREAM, r as u64, mf.model_index as u64, ri as u64, ci as u64, t as u64, j as u64],
                            );
                            let rep = mf.run(cfg, case, k, fitted.conformal.as_ref(), &mut rng, t * m + j, seed)?;
                            util += utility(&rep.allocation, Some(&fold.y_pool), k)?;
                            kp += rep.kprime_rate();
                            np += rep.nprime_rate();
                            if j == 0 {
                                label = setting_label(case, cfg, &rep);
                            }
                            rows.push(rep.allocation.outcomes);
                        }
                        let s = ser(&EnsembleOutcomes::new(rows)?)?;
                        Ok((s, util / m as f64, kp / m as f64, np / m as f64, label))
                    })?;
                    out.push((mf.spec.short_name(), rate, ri, ci, case, samples));
                }
            }
        }
        Ok(out)
    })?;

    // Pool samples across repetitions, cell by cell.
    let mut points: Vec<TradeoffPoint> = Vec::new();
    let mut pooled: Vec<(Vec<f64>, Vec<f64>, f64, f64, usize)> = Vec::new();
    let cells = per_rep[0].len();
    for idx in 0..cells {
        let mut sers = Vec::new();
        let mut utils = Vec::new();
        let (mut kp, mut np) = (0.0, 0.0);
        for rep in &per_rep {
            for s in &rep[idx].5 {
                sers.push(s.0);
                utils.push(s.1);
                kp += s.2;
                np += s.3;
            }
        }
        pooled.push((sers, utils, kp, np, idx));
    }
    for (sers, utils, kp, np, idx) in pooled {
        let (model, rate, _, _, case, samples) = &per_rep[0][idx];
        let count = sers.len() as f64;
        let method = match case {
            Case::Fixed(m, _) => *m,
            Case::Grid(_) => Method::Boundary,
        };
        points.push(TradeoffPoint {
            model: model.to_string(),
            k_over_n: *rate,
            method,
            config: samples[0].4.clone(),
            kprime_rate: kp / count,
            nprime_rate: np / count,
            utility: Stat::from_samples(utils.iter().copied()),
            utility_loss: 0.0,
            ser: Stat::from_samples(sers.iter().copied()),
        });
    }
    // Utility loss against the top-k point of the same cell, when present.
    let baselines: Vec<(String, f64, f64)> = points
        .iter()
        .filter(|p| p.method == Method::TopK)
        .map(|p| (p.model.clone(), p.k_over_n, p.utility.mean))
        .collect();
    for p in &mut points {
        if let Some(b) = baselines.iter().find(|b| b.0 == p.model && b.1 == p.k_over_n) {
            p.utility_loss = if p.method == Method::TopK { 0.0 } else { b.2 - p.utility.mean };
        }
    }
    Ok(TradeoffReport { m, points })
}

fn setting_label(case: Case, cfg: &StudyConfig, rep: &UncertainAllocationReport) -> String {
    match case {
        Case::Fixed(Method::TopK, _) => "top_k".into(),
        Case::Fixed(Method::Boundary, _) | Case::Grid(_) => {
            format!("boundary(k'={},n'={})", rep.k_prime, rep.n_prime)
        }
        Case::Fixed(Method::Variance, _) => format!("variance(b={})", cfg.bootstrap.b),
        Case::Fixed(Method::Outlier, a) => format!("outlier(alpha={})", a.map_or(f64::NAN, |a| cfg.alphas[a])),
    }
}
