//! `riskcomb`: rolling tail-risk forecasting with MCS-based combination.
//!
//! Verbs: `run` (full rolling pipeline + evaluation), `evaluate`
//! (backtests + evaluation MCS on stored forecasts), `simulate` (oracle
//! dataset generation), `mcs` (Model Confidence Set on a loss matrix),
//! `backtest` (coverage and ES-regression tests on stored forecasts).
//!
//! All randomness derives from the configured seed; outputs are
//! byte-identical across runs and worker counts.

mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use riskcomb::backtest::{run_all_backtests, BacktestReport};
use riskcomb::data::{load_series, save_series, ReturnSeries};
use riskcomb::dist::TailSpec;
use riskcomb::error::{Error, Result};
use riskcomb::mcs::{run_mcs, McsConfig};
use riskcomb::pipeline::{
    evaluate as evaluate_store, read_forecasts_csv, run_rolling, simulate, summarize_across_series,
    write_run_outputs, write_summary_counts_csv, EvalSsm, EvaluationReport, ForecastStore,
    SimSpec,
};
use riskcomb::scoring::{build_loss_matrix, load_loss_matrix, FzPreset};
use riskcomb::{rng, ForecastPanel};

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "riskcomb",
    version,
    about = "One-step VaR/ES forecasting with Model-Confidence-Set forecast combination",
    after_help = config::CONFIG_KEY_HELP
)]
struct Cli {
    /// TOML config file; omitted means all defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable), e.g. --set combine.lambda=0.05
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Worker threads (default: all cores); results are identical at any count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory; overrides output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full rolling run: fit, combine, evaluate, and write all reports.
    Run,
    /// Backtests plus evaluation MCS on a stored forecasts file.
    Evaluate {
        /// forecasts.csv produced by `run` (or same-shaped).
        #[arg(long, value_name = "PATH")]
        forecasts: PathBuf,
    },
    /// Write a simulated GARCH(1,1) series and its true VaR/ES paths.
    Simulate {
        /// Series length in days.
        #[arg(long)]
        n: usize,
        /// Generator seed.
        #[arg(long)]
        seed: u64,
        /// GARCH intercept.
        #[arg(long, default_value_t = 0.05)]
        omega: f64,
        /// ARCH coefficient.
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        /// GARCH coefficient.
        #[arg(long, default_value_t = 0.85)]
        beta: f64,
        /// Innovation law: normal | t
        #[arg(long, default_value = "normal")]
        tail: String,
        /// Degrees of freedom when --tail t.
        #[arg(long, default_value_t = 7.0)]
        nu: f64,
        /// Tail levels for the emitted true paths.
        #[arg(long, value_delimiter = ',', default_value = "0.025,0.01")]
        taus: Vec<f64>,
        /// If set, also emit a synthetic realized measure with this relative
        /// measurement-noise standard deviation.
        #[arg(long, value_name = "SD")]
        noise_sd: Option<f64>,
    },
    /// Model Confidence Set on a loss-matrix CSV (date column + one loss
    /// column per model).
    Mcs {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
    /// Coverage and ES-regression backtests on a stored forecasts file.
    Backtest {
        #[arg(long, value_name = "PATH")]
        forecasts: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error[config]: cannot configure {workers} workers: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = dispatch(cli) {
        eprintln!("error[{}]: {e}", e.category());
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref(), &cli.set)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match cli.command {
        Command::Run => cmd_run(&cfg, &out_dir),
        Command::Evaluate { forecasts } => cmd_evaluate(&cfg, &out_dir, &forecasts),
        Command::Simulate {
            n,
            seed,
            omega,
            alpha,
            beta,
            tail,
            nu,
            taus,
            noise_sd,
        } => cmd_simulate(&out_dir, n, seed, omega, alpha, beta, &tail, nu, taus, noise_sd),
        Command::Mcs { input } => cmd_mcs(&cfg, &out_dir, &input),
        Command::Backtest { forecasts } => cmd_backtest(&cfg, &out_dir, &forecasts),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn print_eval_summary(eval: &EvaluationReport) {
    for (report, ssm) in eval.reports.iter().zip(&eval.eval_ssms) {
        let passed = report.columns.iter().filter(|c| c.pass).count();
        println!(
            "tau={}: {} columns, {} pass all six backtests, evaluation SSM keeps {} ({})",
            report.tau,
            report.columns.len(),
            passed,
            ssm.ssm.survivors.len(),
            ssm.ssm.survivors.join(", ")
        );
    }
}

fn cmd_run(cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let run_config = cfg.to_run_config()?;
    let files = cfg.input_files()?;
    let schema = cfg.schema();
    let multi = files.len() > 1;
    let mut evals = Vec::with_capacity(files.len());
    for file in &files {
        let series = load_series(file, &schema)?;
        log::info!("loaded {} ({} days)", file.display(), series.len());
        let store = run_rolling(&run_config, &series)?;
        let eval = evaluate_store(&store, &series, &run_config)?;
        let dir = if multi {
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".to_string());
            out_dir.join(stem)
        } else {
            out_dir.to_path_buf()
        };
        write_run_outputs(&dir, &store, &eval, &run_config)?;
        if multi {
            println!("== {} ==", file.display());
        }
        print_eval_summary(&eval);
        println!("outputs written to {}", dir.display());
        evals.push(eval);
    }
    if multi {
        ensure_dir(out_dir)?;
        let counts = summarize_across_series(&evals);
        let path = out_dir.join("summary_counts.csv");
        write_summary_counts_csv(&path, &counts)?;
        println!("aggregate counts written to {}", path.display());
    }
    Ok(())
}

/// Returns aligned to the panel's dates, looked up in the input series.
fn align_returns(series: &ReturnSeries, panel: &ForecastPanel) -> Result<Vec<f64>> {
    panel
        .dates
        .iter()
        .map(|date| {
            series
                .dates
                .binary_search(date)
                .map(|i| series.returns[i])
                .map_err(|_| {
                    Error::Data(format!(
                        "forecast date {date} not present in the input series"
                    ))
                })
        })
        .collect()
}

fn drop_leading_rows(panel: &ForecastPanel, burn: usize) -> Result<ForecastPanel> {
    if burn >= panel.n_days() {
        return Err(Error::Pipeline(format!(
            "empty evaluation window: burn-in {burn} consumes all {} forecast days",
            panel.n_days()
        )));
    }
    let ncol = panel.n_columns();
    let mut values = Vec::with_capacity((panel.n_days() - burn) * ncol);
    for d in burn..panel.n_days() {
        values.extend_from_slice(panel.row(d));
    }
    ForecastPanel::new(panel.dates[burn..].to_vec(), panel.columns.clone(), values)
}

/// Shared by `evaluate` and `backtest`: per-tau panels (burn-in applied)
/// with aligned returns.
fn load_forecast_panels(
    cfg: &FileConfig,
    forecasts: &Path,
) -> Result<Vec<(f64, ForecastPanel, Vec<f64>)>> {
    let files = cfg.input_files()?;
    if files.len() != 1 {
        return Err(Error::Config(
            "evaluate/backtest need exactly one data.file for the realized returns".to_string(),
        ));
    }
    let series = load_series(&files[0], &cfg.schema())?;
    let burn = cfg.backtest.burn_in.unwrap_or(0);
    read_forecasts_csv(forecasts)?
        .into_iter()
        .map(|(tau, panel)| {
            let panel = drop_leading_rows(&panel, burn)?;
            let returns = align_returns(&series, &panel)?;
            Ok((tau, panel, returns))
        })
        .collect()
}

fn cmd_evaluate(cfg: &FileConfig, out_dir: &Path, forecasts: &Path) -> Result<()> {
    let seed = cfg.require_seed()?;
    let panels = load_forecast_panels(cfg, forecasts)?;
    let mut taus = Vec::new();
    let mut out_panels = Vec::new();
    let mut reports = Vec::new();
    let mut eval_ssms = Vec::new();
    for (tau, panel, returns) in panels {
        let mut report = run_all_backtests(&returns, &panel, tau)?;
        let lm = build_loss_matrix(&panel, &returns, tau, FzPreset::Fz0, None)?;
        let ssm = run_mcs(
            &lm,
            &McsConfig {
                alpha: cfg.mcs.eval_alpha,
                b: cfg.mcs.eval_b,
                mean_block: cfg.mcs.mean_block,
                seed: rng::derive(seed, &[rng::label("eval-mcs"), tau.to_bits()]),
            },
        )?;
        for col in report.columns.iter_mut() {
            col.in_eval_ssm = Some(ssm.is_survivor(&col.column));
        }
        taus.push(tau);
        out_panels.push(panel);
        reports.push(report);
        eval_ssms.push(EvalSsm { tau, ssm });
    }
    // Synthesize a store so the standard writers apply.
    let dates = out_panels[0].dates.clone();
    let model_ids = out_panels[0].columns.clone();
    let store = ForecastStore {
        taus,
        t_in: 0,
        dates: dates.clone(),
        model_ids,
        predictor_ids: Vec::new(),
        panels: out_panels,
        memberships: Vec::new(),
        weight_records: Vec::new(),
        carry_forward: Vec::new(),
        step_seconds: Vec::new(),
    };
    let eval = EvaluationReport {
        burn_in: 0, // already applied when the panels were sliced
        eval_start: dates[0],
        reports,
        eval_ssms,
    };
    ensure_dir(out_dir)?;
    let run_config = cfg.to_run_config()?;
    riskcomb::pipeline::write_report_json(&out_dir.join("report.json"), &store, &eval, &run_config)?;
    riskcomb::pipeline::write_summary_csv(&out_dir.join("summary_table.csv"), &store, &eval)?;
    print_eval_summary(&eval);
    println!("outputs written to {}", out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    out_dir: &Path,
    n: usize,
    seed: u64,
    omega: f64,
    alpha: f64,
    beta: f64,
    tail: &str,
    nu: f64,
    taus: Vec<f64>,
    noise_sd: Option<f64>,
) -> Result<()> {
    let tail = match tail {
        "normal" => TailSpec::Normal,
        "t" => TailSpec::StudentT { nu },
        other => {
            return Err(Error::Config(format!(
                "unknown tail '{other}': expected normal | t"
            )))
        }
    };
    let spec = SimSpec {
        omega,
        alpha,
        beta,
        tail,
        taus,
        realized_noise_sd: noise_sd,
    };
    let sim = simulate(&spec, n, seed)?;
    ensure_dir(out_dir)?;
    let series_path = out_dir.join("simulated.csv");
    save_series(&series_path, &sim.series)?;
    let paths_path = out_dir.join("true_paths.csv");
    write_true_paths(&paths_path, &sim)?;
    println!(
        "wrote {} ({} days) and {}",
        series_path.display(),
        n,
        paths_path.display()
    );
    Ok(())
}

fn write_true_paths(path: &Path, sim: &riskcomb::pipeline::SimOutput) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?);
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    writeln!(out, "date,tau,var,es").map_err(io_err)?;
    for (tau, pairs) in &sim.true_paths {
        for (i, pair) in pairs.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                sim.series.dates[i], tau, pair.var, pair.es
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

fn cmd_mcs(cfg: &FileConfig, out_dir: &Path, input: &Path) -> Result<()> {
    let seed = cfg.require_seed()?;
    let lm = load_loss_matrix(input)?;
    let ssm = run_mcs(
        &lm,
        &McsConfig {
            alpha: cfg.mcs.eval_alpha,
            b: cfg.mcs.eval_b,
            mean_block: cfg.mcs.mean_block,
            seed: rng::derive(seed, &[rng::label("cli-mcs")]),
        },
    )?;
    ensure_dir(out_dir)?;
    let path = out_dir.join("mcs.json");
    let text = serde_json::to_string_pretty(&ssm).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    println!(
        "SSM at alpha={}: {} of {} models survive",
        ssm.alpha,
        ssm.survivors.len(),
        lm.models.len()
    );
    for (model, p) in &ssm.mcs_pvalues {
        println!(
            "  {model}: p={p} {}",
            if ssm.is_survivor(model) { "(in)" } else { "(out)" }
        );
    }
    println!("written to {}", path.display());
    Ok(())
}

fn cmd_backtest(cfg: &FileConfig, out_dir: &Path, forecasts: &Path) -> Result<()> {
    let panels = load_forecast_panels(cfg, forecasts)?;
    let mut reports: Vec<BacktestReport> = Vec::with_capacity(panels.len());
    for (tau, panel, returns) in panels {
        reports.push(run_all_backtests(&returns, &panel, tau)?);
    }
    ensure_dir(out_dir)?;
    let path = out_dir.join("backtests.json");
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    for report in &reports {
        for col in &report.columns {
            let ps: Vec<String> = col
                .tests
                .iter()
                .map(|t| format!("{}={:.4}", t.test, t.pvalue))
                .collect();
            println!(
                "tau={} {}: {} pass={}",
                report.tau,
                col.column,
                ps.join(" "),
                col.pass
            );
        }
    }
    println!("written to {}", path.display());
    Ok(())
}
