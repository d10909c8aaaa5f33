use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use claimlot::claimsim::{simulate, sweep_partial_bf, write_frontier_csv, write_long_csv, SimulationReport};
use claimlot::metrics::{exclusion_rate, ser, EnsembleOutcomes, FrontierPoint};
use claimlot::predict::ingest_csv;
use claimlot::uncertain::{run_study, ser_tradeoff_study, Method, TradeoffReport};
use log::info;

use crate::config::Config;
use crate::manifest::{Outputs, RunManifest};
use crate::CliError;

fn csv_bytes<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> claimlot::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn cmd_simulate(cfg: &Config, out_dir: &Path) -> Result<RunManifest, CliError> {
    let sim = &cfg.simulate;
    let specs = sim.distributions()?;
    if sim.selection_rates.is_empty() {
        return Err(CliError::Usage("simulate.selection_rates is empty".into()));
    }
    let mut out = Outputs::new(out_dir, "simulate", cfg.seed, crate::config::render(cfg))?;
    let mut reports: Vec<SimulationReport> = Vec::new();
    let mut frontiers: Vec<(usize, usize, Vec<FrontierPoint>)> = Vec::new();
    let mut skipped = 0;
    for spec in &specs {
        for &rate in &sim.selection_rates {
            let run_cfg = sim.simulation_config(rate)?;
            let t = Instant::now();
            let report = if sim.sweep {
                let s = sweep_partial_bf(&run_cfg, spec, &sim.grid(), cfg.seed)?;
                skipped += s.skipped.len();
                for m in 2..=run_cfg.m {
                    frontiers.push((reports.len(), m, s.frontier(m)));
                }
                s.report
            } else {
                simulate(&run_cfg, spec, cfg.seed)?
            };
            out.timing(&format!("{spec}@{rate}"), t.elapsed());
            info!("{spec} at k/n = {rate}: {} mechanism(s)", report.mechanisms.len());
            reports.push(report);
        }
    }
    out.write("results.csv", &csv_bytes(|b| write_long_csv(&reports, b))?)?;
    if sim.sweep {
        let rows: Vec<_> = frontiers
            .into_iter()
            .map(|(i, m, pts)| (&reports[i], m, pts))
            .collect();
        out.write("frontier.csv", &csv_bytes(|b| write_frontier_csv(&rows, b))?)?;
        out.note("skipped_grid_points", skipped);
    }
    println!("wrote {} report(s) to {}", reports.len(), out_dir.display());
    out.finish()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_tradeoff(r: &TradeoffReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "k_over_n",
        "method",
        "config",
        "m",
        "kprime_rate",
        "nprime_rate",
        "utility",
        "utility_stderr",
        "utility_loss",
        "ser",
        "ser_stderr",
    ])?;
    for p in &r.points {
        w.write_record([
            p.model.clone(),
            p.k_over_n.to_string(),
            p.method.to_string(),
            p.config.clone(),
            r.m.to_string(),
            p.kprime_rate.to_string(),
            p.nprime_rate.to_string(),
            p.utility.mean.to_string(),
            p.utility.stderr.to_string(),
            p.utility_loss.to_string(),
            p.ser.mean.to_string(),
            p.ser.stderr.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_tradeoff_frontier(r: &TradeoffReport, models: &[String], rates: &[f64], methods: &[Method]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "k_over_n", "method", "utility_loss", "ser", "config"])?;
    for model in models {
        for &rate in rates {
            for &method in methods.iter().filter(|&&m| m != Method::TopK) {
                for p in r.frontier(model, rate, method) {
                    w.write_record([
                        model.clone(),
                        rate.to_string(),
                        method.to_string(),
                        p.utility_delta.to_string(),
                        p.ser.to_string(),
                        p.config,
                    ])?;
                }
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn cmd_allocate(cfg: &Config, out_dir: &Path) -> Result<RunManifest, CliError> {
    let alloc = &cfg.allocate;
    let Some(data) = alloc.data.as_deref() else {
        return Err(CliError::Usage("no dataset: set allocate.data or pass --data".into()));
    };
    let study = alloc.study_config()?;
    let mut out = Outputs::new(out_dir, "allocate", cfg.seed, crate::config::render(cfg))?;

    let t = Instant::now();
    let ds = ingest_csv(data, &cfg.schema)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", data.display())))?;
    out.timing("ingest", t.elapsed());
    out.note("rows", ds.len());
    out.note("features", ds.features.cols());
    out.note("positive_rate", ds.positive_rate());
    out.note("boundary_band", "lower-anchored at rank k - k'");

    let t = Instant::now();
    let report = run_study(&ds, &study, cfg.seed)?;
    out.timing("study", t.elapsed());
    out.note(
        "reference_rows",
        report.reference_rows.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"),
    );
    out.note("reference_cap", study.reference_cap);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "method",
        "alpha",
        "k_over_n",
        "kprime_rate",
        "nprime_rate",
        "utility_method",
        "utility_boundary_matched",
        "utility_topk",
        "noted_runs",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.model.clone(),
            r.method.to_string(),
            opt(r.alpha),
            r.k_over_n.to_string(),
            r.kprime_rate.to_string(),
            r.nprime_rate.to_string(),
            r.utility_method.to_string(),
            r.utility_boundary_matched.to_string(),
            r.utility_topk.to_string(),
            r.noted_runs.to_string(),
        ])?;
    }
    out.write("table.csv", &w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "repetition",
        "model",
        "k_over_n",
        "method",
        "alpha",
        "id",
        "score",
        "vote_fraction",
        "p_value",
        "selection_frequency",
    ])?;
    for f in &report.frequencies {
        w.write_record([
            f.repetition.to_string(),
            f.model.clone(),
            f.k_over_n.to_string(),
            f.method.to_string(),
            opt(f.alpha),
            f.id.to_string(),
            f.score.to_string(),
            opt(f.vote_fraction),
            opt(f.p_value),
            f.frequency.to_string(),
        ])?;
    }
    out.write("selections.csv", &w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?)?;

    if alloc.ser_m >= 2 {
        let t = Instant::now();
        let tr = ser_tradeoff_study(&ds, &study, alloc.ser_m, &alloc.ser_grid(), cfg.seed)?;
        out.timing("ser_tradeoff", t.elapsed());
        out.write("tradeoff.csv", &write_tradeoff(&tr)?)?;
        let models: Vec<String> = study.models.iter().map(|m| m.short_name().to_string()).collect();
        out.write(
            "tradeoff_frontier.csv",
            &write_tradeoff_frontier(&tr, &models, &study.selection_rates, &study.methods)?,
        )?;
    }

    for r in &report.rows {
        println!(
            "{:<3} {:<9} k/n={:<5} k'/k={:.3} n'/n={:.3} utility={:.4} boundary={:.4} top_k={:.4}",
            r.model,
            r.method.as_str(),
            r.k_over_n,
            r.kprime_rate,
            r.nprime_rate,
            r.utility_method,
            r.utility_boundary_matched,
            r.utility_topk
        );
    }
    out.finish()
}

/// Summary of an outcomes matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Audit {
    pub m: usize,
    pub n: usize,
    /// SER for `m > 1`, the plain exclusion rate for `m = 1`.
    pub rate: f64,
    pub excluded: Vec<bool>,
    pub ids: Vec<String>,
    pub groups: Option<Vec<String>>,
}

pub fn read_outcomes(path: &Path, group_by: Option<&str>) -> Result<Audit, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let group_col = match group_by {
        Some(g) => Some(
            headers
                .iter()
                .position(|h| h == g)
                .ok_or_else(|| CliError::Usage(format!("no column {g:?} to group by")))?,
        ),
        None => None,
    };
    let id_col = headers.iter().position(|h| h == "id");
    let decision_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != group_col && Some(c) != id_col)
        .collect();
    if decision_cols.is_empty() {
        return Err(CliError::Usage("no outcome columns".into()));
    }
    let mut columns: Vec<Vec<u8>> = vec![Vec::new(); decision_cols.len()];
    let mut ids = Vec::new();
    let mut groups = group_col.map(|_| Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (col, &c) in columns.iter_mut().zip(&decision_cols) {
            col.push(match rec.get(c).map(str::trim) {
                Some("0") => 0,
                Some("1") => 1,
                other => {
                    return Err(CliError::Usage(format!(
                        "row {}, column {:?}: {:?} is not 0 or 1",
                        r + 2,
                        &headers[c],
                        other.unwrap_or("")
                    )))
                }
            });
        }
        ids.push(id_col.and_then(|c| rec.get(c)).map_or_else(|| r.to_string(), str::to_string));
        if let (Some(g), Some(c)) = (groups.as_mut(), group_col) {
            g.push(rec.get(c).unwrap_or("").to_string());
        }
    }
    let outcomes = EnsembleOutcomes::new(columns).map_err(|e| CliError::Usage(e.to_string()))?;
    let rate = if outcomes.m() > 1 { ser(&outcomes)? } else { exclusion_rate(&outcomes) };
    Ok(Audit {
        m: outcomes.m(),
        n: outcomes.n(),
        rate,
        excluded: outcomes.excluded(),
        ids,
        groups,
    })
}

pub fn cmd_audit(cfg: &Config, input: &Path, group_by: Option<&str>, out_dir: &Path) -> Result<RunManifest, CliError> {
    let audit = read_outcomes(input, group_by)?;
    let mut out = Outputs::new(out_dir, "audit", cfg.seed, crate::config::render(cfg))?;
    out.note("input", input.display());
    let metric = if audit.m > 1 { "ser" } else { "exclusion_rate" };

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id", "excluded"];
    if audit.groups.is_some() {
        header.push("group");
    }
    w.write_record(&header)?;
    for (i, id) in audit.ids.iter().enumerate() {
        let mut rec = vec![id.clone(), (audit.excluded[i] as u8).to_string()];
        if let Some(g) = &audit.groups {
            rec.push(g[i].clone());
        }
        w.write_record(&rec)?;
    }
    out.write("exclusion.csv", &w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "n", "excluded", metric])?;
    w.write_record([
        "all".to_string(),
        audit.n.to_string(),
        audit.excluded.iter().filter(|&&e| e).count().to_string(),
        audit.rate.to_string(),
    ])?;
    println!("m={} n={} {metric}={}", audit.m, audit.n, audit.rate);
    if let Some(groups) = &audit.groups {
        let mut by: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (g, &e) in groups.iter().zip(&audit.excluded) {
            let entry = by.entry(g.as_str()).or_default();
            entry.0 += 1;
            entry.1 += e as usize;
        }
        for (g, (n, e)) in by {
            let rate = e as f64 / n as f64;
            w.write_record([g.to_string(), n.to_string(), e.to_string(), rate.to_string()])?;
            println!("  {g}: n={n} {metric}={rate}");
        }
    }
    out.write("summary.csv", &w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?)?;
    out.finish()
}
