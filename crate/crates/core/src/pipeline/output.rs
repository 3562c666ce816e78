//! Report writers: forecast panel, training-SSM membership raster,
//! structured run report, and the per-column summary table.
//!
//! All files are UTF-8 CSV/JSON. Floats are written with the shortest
//! round-trip representation, so outputs are byte-stable across runs and
//! worker counts whenever the underlying values are bit-identical.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::backtest::BacktestReport;
use crate::error::{Error, Result};
use crate::mcs::SuperiorSet;

use super::engine::{EvaluationReport, ForecastStore, RunConfig, SummaryCounts};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// `forecasts.csv`: one row per (tau, date, column) with the stored VaR/ES
/// pair. Taus iterate outermost, matching the panel order of the store.
pub fn write_forecasts_csv(path: &Path, store: &ForecastStore) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ));
    w.write_record(["date", "column", "tau", "var", "es"])
        .map_err(|e| csv_err(path, e))?;
    let mut buf = ryu::Buffer::new();
    for (ti, &tau) in store.taus.iter().enumerate() {
        let tau_str = buf.format(tau).to_string();
        let panel = &store.panels[ti];
        for d in 0..panel.n_days() {
            let date = panel.dates[d].format("%Y-%m-%d").to_string();
            for (c, col) in panel.columns.iter().enumerate() {
                let p = panel.get(d, c);
                let var = buf.format(p.var).to_string();
                let es = buf.format(p.es).to_string();
                w.write_record([date.as_str(), col.as_str(), &tau_str, &var, &es])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `ssm_membership.csv`: the training-SSM raster, one row per
/// (step, tau, loss kind, model). `loss_kind` is `unweighted` (plain FZ0)
/// or `weighted` (λ-smoothed); membership is written as `in`/`out`.
pub fn write_ssm_csv(path: &Path, store: &ForecastStore) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ));
    w.write_record(["step", "tau", "loss_kind", "model", "membership"])
        .map_err(|e| csv_err(path, e))?;
    let mut buf = ryu::Buffer::new();
    for entry in &store.memberships {
        let step = entry.step.to_string();
        let tau = buf.format(entry.tau).to_string();
        for (model, in_ssm) in &entry.members {
            w.write_record([
                step.as_str(),
                tau.as_str(),
                entry.loss_kind.as_str(),
                model.as_str(),
                if *in_ssm { "in" } else { "out" },
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a `forecasts.csv`-shaped file back into per-tau panels. Column
/// and date order follow first appearance in the file, so writer output
/// round-trips exactly.
pub fn read_forecasts_csv(path: &Path) -> Result<Vec<(f64, crate::data::ForecastPanel)>> {
    use crate::data::RiskForecastPair;
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in {}: {e}", path.display())))?;
    let expected = ["date", "column", "tau", "var", "es"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!(
            "{}: expected header {:?}, got {:?}",
            path.display(),
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    // tau (bits) -> (dates in order, columns in order, cell map)
    let mut taus: Vec<f64> = Vec::new();
    let mut per_tau: Vec<(
        Vec<chrono::NaiveDate>,
        Vec<String>,
        std::collections::BTreeMap<(usize, usize), RiskForecastPair>,
    )> = Vec::new();
    for (rownum, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), rownum + 2)))?;
        let parse_f = |i: usize, name: &str| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "{} row {}: bad {name} value '{}'",
                    path.display(),
                    rownum + 2,
                    &record[i]
                ))
            })
        };
        let date = chrono::NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|_| {
            Error::Data(format!(
                "{} row {}: bad date '{}'",
                path.display(),
                rownum + 2,
                &record[0]
            ))
        })?;
        let column = record[1].to_string();
        let tau = parse_f(2, "tau")?;
        let pair = RiskForecastPair::new(parse_f(3, "var")?, parse_f(4, "es")?);
        let ti = match taus.iter().position(|t| t.to_bits() == tau.to_bits()) {
            Some(i) => i,
            None => {
                taus.push(tau);
                per_tau.push((Vec::new(), Vec::new(), std::collections::BTreeMap::new()));
                taus.len() - 1
            }
        };
        let (dates, columns, cells) = &mut per_tau[ti];
        let di = match dates.iter().position(|d| *d == date) {
            Some(i) => i,
            None => {
                dates.push(date);
                dates.len() - 1
            }
        };
        let ci = match columns.iter().position(|c| *c == column) {
            Some(i) => i,
            None => {
                columns.push(column);
                columns.len() - 1
            }
        };
        if cells.insert((di, ci), pair).is_some() {
            return Err(Error::Data(format!(
                "{} row {}: duplicate (date, column, tau) cell",
                path.display(),
                rownum + 2
            )));
        }
    }
    if taus.is_empty() {
        return Err(Error::Data(format!("{}: no forecast rows", path.display())));
    }
    let mut out = Vec::with_capacity(taus.len());
    for (ti, &tau) in taus.iter().enumerate() {
        let (dates, columns, cells) = &per_tau[ti];
        let mut values = Vec::with_capacity(dates.len() * columns.len());
        for di in 0..dates.len() {
            for ci in 0..columns.len() {
                let pair = cells.get(&(di, ci)).ok_or_else(|| {
                    Error::Data(format!(
                        "{}: missing cell for date {}, column {}, tau {tau}",
                        path.display(),
                        dates[di],
                        columns[ci]
                    ))
                })?;
                values.push(*pair);
            }
        }
        out.push((
            tau,
            crate::data::ForecastPanel::new(dates.clone(), columns.clone(), values)?,
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct TauReport<'a> {
    tau: f64,
    backtests: &'a BacktestReport,
    eval_mcs: &'a SuperiorSet,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a RunConfig,
    n_steps: usize,
    burn_in: usize,
    eval_start: String,
    n_eval_days: usize,
    carry_forward: &'a [super::engine::CarryForwardEvent],
    results: Vec<TauReport<'a>>,
}

/// `report.json`: configuration echo, run shape, carry-forward log, and
/// per-tau backtest results with the evaluation-MCS outcome. Field order is
/// fixed by struct declaration, so the file is deterministic.
pub fn write_report_json(
    path: &Path,
    store: &ForecastStore,
    eval: &EvaluationReport,
    config: &RunConfig,
) -> Result<()> {
    let results = store
        .taus
        .iter()
        .enumerate()
        .map(|(ti, &tau)| TauReport {
            tau,
            backtests: &eval.reports[ti],
            eval_mcs: &eval.eval_ssms[ti].ssm,
        })
        .collect();
    let report = RunReport {
        config,
        n_steps: store.nstep(),
        burn_in: eval.burn_in,
        eval_start: eval.eval_start.format("%Y-%m-%d").to_string(),
        n_eval_days: store.nstep() - eval.burn_in,
        carry_forward: &store.carry_forward,
        results,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

const SUMMARY_TESTS: [&str; 6] = ["UC", "CC", "DQ", "BD-1", "BD-2", "BD-3"];

/// `summary_table.csv`: one row per (column, tau) with the six backtest
/// p-values, average FZ0 loss, and the two shading flags (all-tests pass,
/// evaluation-SSM membership). Failed tests leave their p-value cell empty.
pub fn write_summary_csv(path: &Path, store: &ForecastStore, eval: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ));
    let mut header = vec!["column".to_string(), "tau".to_string()];
    header.extend(SUMMARY_TESTS.iter().map(|t| format!("p_{}", t.to_lowercase().replace('-', ""))));
    header.push("avg_fz0".to_string());
    header.push("backtest_pass".to_string());
    header.push("in_eval_ssm".to_string());
    w.write_record(&header)
        .map_err(|e| csv_err(path, e))?;
    let mut buf = ryu::Buffer::new();
    for (ti, &tau) in store.taus.iter().enumerate() {
        let report = &eval.reports[ti];
        let tau_str = buf.format(tau).to_string();
        for col in &report.columns {
            let mut row = vec![col.column.clone(), tau_str.clone()];
            for name in SUMMARY_TESTS {
                let cell = col
                    .tests
                    .iter()
                    .find(|t| t.test == name)
                    .map(|t| buf.format(t.pvalue).to_string())
                    .unwrap_or_default();
                row.push(cell);
            }
            row.push(buf.format(col.avg_fz0).to_string());
            row.push(if col.pass { "1" } else { "0" }.to_string());
            row.push(match col.in_eval_ssm {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            }
            .to_string());
            w.write_record(&row)
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `summary_counts.csv`: Table-6-shaped aggregate over several evaluated
/// series — per (column, tau), how many series the column passed all six
/// backtests on, entered the evaluation SSM on, and both.
pub fn write_summary_counts_csv(path: &Path, counts: &[SummaryCounts]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ));
    w.write_record([
        "column",
        "tau",
        "n_series",
        "n_backtest_pass",
        "n_mcs_member",
        "n_both",
    ])
    .map_err(|e| csv_err(path, e))?;
    let mut buf = ryu::Buffer::new();
    for c in counts {
        w.write_record([
            c.column.as_str(),
            buf.format(c.tau),
            &c.n_series.to_string(),
            &c.n_backtest_pass.to_string(),
            &c.n_mcs_member.to_string(),
            &c.n_both.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the four standard run outputs (`forecasts.csv`,
/// `ssm_membership.csv`, `report.json`, `summary_table.csv`) into `dir`,
/// creating it if needed.
pub fn write_run_outputs(
    dir: &Path,
    store: &ForecastStore,
    eval: &EvaluationReport,
    config: &RunConfig,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_forecasts_csv(&dir.join("forecasts.csv"), store)?;
    write_ssm_csv(&dir.join("ssm_membership.csv"), store)?;
    write_report_json(&dir.join("report.json"), store, eval, config)?;
    write_summary_csv(&dir.join("summary_table.csv"), store, eval)?;
    Ok(())
}
