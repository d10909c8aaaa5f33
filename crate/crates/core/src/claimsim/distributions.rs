use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::claims::ClaimProfile;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// U[0, 1].
    Uniform,
    /// N(0.5, σ²) truncated to [0, 1]: mostly average claims.
    Normal,
    /// ½N(0, σ²) + ½N(1, σ²) truncated to [0, 1]: mostly strong and weak claims.
    InvertedNormal,
    /// `1 - 1/x` for x ~ Pareto(α, 1): mostly weak claims.
    Pareto,
    /// `1/x` for x ~ Pareto(α, 1): mostly strong claims.
    InvertedPareto,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Uniform,
        Family::Normal,
        Family::InvertedNormal,
        Family::Pareto,
        Family::InvertedPareto,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Normal => "normal",
            Family::InvertedNormal => "inverted_normal",
            Family::Pareto => "pareto",
            Family::InvertedPareto => "inverted_pareto",
        }
    }

    /// σ = 0.15 for the normal families, α = 2 for the Pareto families.
    pub fn default_param(self) -> f64 {
        match self {
            Family::Uniform => 0.0,
            Family::Normal | Family::InvertedNormal => 0.15,
            Family::Pareto | Family::InvertedPareto => 2.0,
        }
    }
}

/// A claim distribution: family plus σ (normal families) or α (Pareto).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    pub param: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, param: f64) -> Result<Self> {
        let spec = Self { family, param };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_default_param(family: Family) -> Self {
        Self {
            family,
            param: family.default_param(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != Family::Uniform && !(self.param > 0.0 && self.param.is_finite()) {
            return Err(Error::config(format!(
                "{} needs a positive parameter, got {}",
                self.family.as_str(),
                self.param
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Uniform => f.write_str("uniform"),
            family => write!(f, "{}:{}", family.as_str(), self.param),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// `uniform`, `normal`, `normal:0.1`, `inverted_pareto:3`, ...
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (
                n.trim(),
                Some(p.trim().parse::<f64>().map_err(|_| {
                    Error::config(format!("bad distribution parameter in {s:?}"))
                })?),
            ),
            None => (s.trim(), None),
        };
        let family = Family::ALL
            .into_iter()
            .find(|f| f.as_str() == name)
            .ok_or_else(|| Error::config(format!("unknown distribution {name:?}")))?;
        Self::new(family, param.unwrap_or(family.default_param()))
    }
}

fn truncated<F: FnMut(&mut RandomSource) -> f64>(rng: &mut RandomSource, mut draw: F) -> f64 {
    loop {
        let x = draw(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

pub(crate) fn sample_raw(spec: &DistributionSpec, n: usize, rng: &mut RandomSource) -> Vec<f64> {
    let sigma = spec.param;
    match spec.family {
        Family::Uniform => (0..n).map(|_| rng.unit()).collect(),
        Family::Normal => (0..n)
            .map(|_| {
                truncated(rng, |r| {
                    0.5 + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
                })
            })
            .collect(),
        Family::InvertedNormal => (0..n)
            .map(|_| {
                truncated(rng, |r| {
                    let centre = if r.random::<bool>() { 1.0 } else { 0.0 };
                    centre + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
                })
            })
            .collect(),
        Family::Pareto | Family::InvertedPareto => {
            let pareto = Pareto::new(1.0, spec.param).expect("validated");
            (0..n)
                .map(|_| {
                    let inv = 1.0 / pareto.sample(rng);
                    if spec.family == Family::Pareto {
                        1.0 - inv
                    } else {
                        inv
                    }
                })
                .collect()
        }
    }
}

/// `n` claims drawn from `spec`, all in `[0, 1]`.
pub fn sample_claims(spec: &DistributionSpec, n: usize, rng: &mut RandomSource) -> Result<ClaimProfile> {
    spec.validate()?;
    ClaimProfile::new(sample_raw(spec, n, rng))
}

pub(crate) fn perturb_into(claims: &[f64], sigma: f64, rng: &mut RandomSource, out: &mut Vec<f64>) {
    out.clear();
    if sigma == 0.0 {
        out.extend_from_slice(claims);
        return;
    }
    out.extend(claims.iter().map(|&c| {
        let eps: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        (c + sigma * eps).clamp(0.0, 1.0)
    }));
}

/// One decision-maker's view of the claims: `c_i + N(0, σ²)`, clipped to `[0, 1]`.
pub fn add_decision_maker_noise(
    profile: &ClaimProfile,
    sigma: f64,
    rng: &mut RandomSource,
) -> Result<ClaimProfile> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = Vec::with_capacity(profile.len());
    perturb_into(profile.claims(), sigma, rng, &mut out);
    ClaimProfile::with_ids(out, profile.ids().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(spec: &str, n: usize, seed: u64) -> Vec<f64> {
        let spec: DistributionSpec = spec.parse().unwrap();
        sample_claims(&spec, n, &mut RandomSource::new(seed, 0))
            .unwrap()
            .claims()
            .to_vec()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn median(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    }

    #[test]
    fn uniform_mean() {
        let n = 100_000;
        let v = draw("uniform", n, 1);
        // σ of the mean of U[0,1] is sqrt(1/12 / n).
        let se = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean(&v) - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn normal_is_centred_and_bounded() {
        let v = draw("normal:0.15", 50_000, 2);
        assert!(v.iter().all(|c| (0.0..=1.0).contains(c)));
        assert!((mean(&v) - 0.5).abs() < 0.005);
        let sd = (v.iter().map(|c| (c - 0.5).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!((sd - 0.15).abs() < 0.005, "sd {sd}");
    }

    #[test]
    fn inverted_normal_is_bimodal() {
        let v = draw("inverted_normal:0.15", 50_000, 3);
        let middle = v.iter().filter(|c| (0.35..0.65).contains(*c)).count() as f64 / v.len() as f64;
        let edges = v.iter().filter(|c| **c < 0.15 || **c > 0.85).count() as f64 / v.len() as f64;
        assert!(middle < 0.05 && edges > 0.6, "middle {middle}, edges {edges}");
    }

    #[test]
    fn pareto_skews_weak_and_inverted_skews_strong() {
        let weak = draw("pareto:2", 50_000, 4);
        let strong = draw("inverted_pareto:2", 50_000, 4);
        // 1 - 1/x has CDF 1 - (1-y)^α: mean 1/(α+1), median 1 - 2^(-1/α).
        assert!((mean(&weak) - 1.0 / 3.0).abs() < 0.005);
        assert!((median(&weak) - (1.0 - 0.5f64.sqrt())).abs() < 0.01);
        assert!(median(&weak) < mean(&weak));
        assert!(median(&strong) > mean(&strong));
        assert!(weak.iter().chain(&strong).all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "normal".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::with_default_param(Family::Normal)
        );
        assert!("normal:-1".parse::<DistributionSpec>().is_err());
        assert!("cauchy".parse::<DistributionSpec>().is_err());
        assert!(DistributionSpec::new(Family::Pareto, 0.0).is_err());
        assert_eq!("inverted_pareto:3".parse::<DistributionSpec>().unwrap().to_string(), "inverted_pareto:3");
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = ClaimProfile::new(vec![0.1, 0.5, 1.0]).unwrap();
        let q = add_decision_maker_noise(&p, 0.0, &mut RandomSource::new(1, 1)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn noise_is_clipped() {
        let p = ClaimProfile::new(vec![1.0; 1000]).unwrap();
        let q = add_decision_maker_noise(&p, 0.3, &mut RandomSource::new(1, 1)).unwrap();
        assert!(q.claims().iter().all(|&c| c <= 1.0));
        assert!(q.claims().iter().any(|&c| c < 1.0));
        assert!(add_decision_maker_noise(&p, -0.1, &mut RandomSource::new(1, 1)).is_err());
    }

    #[test]
    fn noise_std_matches_sigma() {
        let n = 20_000;
        let p = ClaimProfile::new(vec![0.5; n]).unwrap();
        let q = add_decision_maker_noise(&p, 0.025, &mut RandomSource::new(8, 2)).unwrap();
        let d: Vec<f64> = q.claims().iter().map(|c| c - 0.5).collect();
        let m = mean(&d);
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd / 0.025 - 1.0).abs() < 0.05, "sd {sd}");
    }
}
