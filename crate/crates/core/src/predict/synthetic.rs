//! Known-generator tabular classification data for tests and demos.
//!
//! Columns: `id`, numeric `age`, `income`, `tenure`, `noise`, categorical
//! `education` and `region`, binary `label`, and the generating probability
//! `p_true`. Values are rounded to four decimals before the label is drawn,
//! so the written file is self-consistent.

use std::io::Write;

use rand::Rng;
use rand_distr::{Exp, LogNormal, StandardNormal};

use super::dataset::Schema;
use crate::error::Result;
use crate::rng::RandomSource;

pub const SYNTHETIC_ROWS: usize = 5000;
pub const SYNTHETIC_SEED: u64 = 20_240_601;

const EDUCATION: [(&str, f64); 4] = [
    ("primary", 0.8),
    ("secondary", 0.2),
    ("tertiary", -0.7),
    ("vocational", 0.0),
];
const REGION: [(&str, f64); 4] = [("east", 0.1), ("north", -0.3), ("south", 0.3), ("west", -0.1)];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRow {
    pub id: usize,
    pub age: f64,
    pub income: f64,
    pub tenure: f64,
    pub noise: f64,
    pub education: &'static str,
    pub region: &'static str,
    pub label: u8,
    pub p_true: f64,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Generating probability for one row.
pub fn true_probability(age: f64, income: f64, tenure: f64, education: &str, region: &str) -> f64 {
    let za = (age - 41.5) / 13.6;
    let zi = (income.ln() - 10.5) / 0.5;
    let zt = (tenure - 4.0) / 4.0;
    let edu = EDUCATION.iter().find(|(e, _)| *e == education).map_or(0.0, |e| e.1);
    let reg = REGION.iter().find(|(r, _)| *r == region).map_or(0.0, |r| r.1);
    let older = if age > 55.0 { 0.9 } else { 0.0 };
    sigmoid(-1.0 + 0.9 * za - 1.0 * zi + 0.6 * zt + edu + reg + older)
}

pub fn generate(n: usize, seed: u64) -> Vec<SyntheticRow> {
    let mut rng = RandomSource::derive(seed, &[0x5e_7a_b1e]);
    let income = LogNormal::new(10.5, 0.5).expect("valid lognormal");
    let tenure = Exp::new(0.25).expect("valid rate");
    (0..n)
        .map(|id| {
            let age = round4(18.0 + 47.0 * rng.unit());
            let income = round4(rng.sample(income));
            let tenure = round4(rng.sample(tenure));
            let noise = round4(rng.sample::<f64, _>(StandardNormal));
            let education = EDUCATION[rng.index(EDUCATION.len())].0;
            let region = REGION[rng.index(REGION.len())].0;
            let p_true = true_probability(age, income, tenure, education, region);
            let label = (rng.unit() < p_true) as u8;
            SyntheticRow {
                id,
                age,
                income,
                tenure,
                noise,
                education,
                region,
                label,
                p_true: round4(p_true),
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SyntheticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id", "age", "income", "tenure", "noise", "education", "region", "label", "p_true",
    ])?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            format!("{:.4}", r.age),
            format!("{:.4}", r.income),
            format!("{:.4}", r.tenure),
            format!("{:.4}", r.noise),
            r.education.to_string(),
            r.region.to_string(),
            r.label.to_string(),
            format!("{:.4}", r.p_true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Schema that reads files produced by [`write_csv`].
pub fn schema() -> Schema {
    Schema {
        label: "label".into(),
        categorical: vec!["education".into(), "region".into()],
        numeric: vec!["age".into(), "income".into(), "tenure".into(), "noise".into()],
        id: Some("id".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::dataset::ingest_reader;

    #[test]
    fn generator_is_seeded() {
        assert_eq!(generate(50, 1), generate(50, 1));
        assert_ne!(generate(50, 1), generate(50, 2));
    }

    #[test]
    fn round_trips_through_ingestion() {
        let rows = generate(200, 3);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let ds = ingest_reader(buf.as_slice(), &schema()).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.features.cols(), 4 + 4 + 4);
        assert_eq!(ds.labels, rows.iter().map(|r| r.label).collect::<Vec<_>>());
    }

    #[test]
    fn base_rate_is_moderate() {
        let rows = generate(SYNTHETIC_ROWS, SYNTHETIC_SEED);
        let rate = rows.iter().map(|r| r.label as f64).sum::<f64>() / rows.len() as f64;
        assert!((0.2..0.5).contains(&rate), "{rate}");
    }
}
