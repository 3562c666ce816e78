//! TOML configuration file model and `--set` override handling.
//!
//! The file has sections (data, models, mcs, combine, backtest, output)
//! plus a top-level `seed`. Unknown keys are rejected, both in the file and
//! in overrides; every override maps to exactly one config field.

use std::path::{Path, PathBuf};

use riskcomb::error::{Error, Result};
use riskcomb::pipeline::{full_universe, RunConfig};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Input series CSV. Exactly one of `file` / `files` for `run`.
    pub file: Option<PathBuf>,
    /// Several input series; `run` loops over them and aggregates counts.
    pub files: Vec<PathBuf>,
    pub date_column: String,
    pub return_column: String,
    /// Used to derive log returns when the return column is absent.
    pub price_column: String,
    /// Exogenous columns loaded when present in the header.
    pub exog: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        let schema = riskcomb::data::SeriesSchema::default();
        DataSection {
            file: None,
            files: Vec::new(),
            date_column: schema.date,
            return_column: schema.ret,
            price_column: schema.price,
            exog: schema.exog,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    /// Candidate-model ids, in column order.
    pub enabled: Vec<String>,
    /// Rolling estimation window length.
    pub t_in: usize,
    /// Tail levels.
    pub taus: Vec<f64>,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            enabled: full_universe().iter().map(|m| m.id()).collect(),
            t_in: 1000,
            taus: vec![0.025, 0.01],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McsSection {
    pub training_alpha: f64,
    pub eval_alpha: f64,
    pub training_b: usize,
    pub eval_b: usize,
    pub mean_block: f64,
}

impl Default for McsSection {
    fn default() -> Self {
        McsSection {
            training_alpha: 0.25,
            eval_alpha: 0.25,
            training_b: 1000,
            eval_b: 5000,
            mean_block: 10.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombineSection {
    /// Exponential smoothing parameter of the weighted training loss.
    pub lambda: f64,
}

impl Default for CombineSection {
    fn default() -> Self {
        CombineSection { lambda: 0.06 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    /// Out-of-sample days discarded before evaluation. `run` defaults to
    /// t_in/2; standalone `evaluate`/`backtest` default to 0.
    pub burn_in: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    /// Master seed; required (no wall-clock default) so every result is
    /// reproducible.
    pub seed: Option<u64>,
    pub data: DataSection,
    pub models: ModelsSection,
    pub mcs: McsSection,
    pub combine: CombineSection,
    pub backtest: BacktestSection,
    pub output: OutputSection,
}

impl FileConfig {
    /// Loads the file (empty/default when `path` is None) and applies the
    /// `--set key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<FileConfig> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.display().to_string(),
                    source: e,
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        for item in overrides {
            cfg.apply_override(item)?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override. Keys use dotted section paths;
    /// list values are comma-separated.
    pub fn apply_override(&mut self, item: &str) -> Result<()> {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("override '{item}' is not of the form key=value"))
        })?;
        let bad = |what: &str, range: &str| {
            Error::Config(format!(
                "invalid value '{value}' for {key}: expected {what} ({range})"
            ))
        };
        let parse_u64 =
            |value: &str| value.parse::<u64>().map_err(|_| bad("an integer", "u64"));
        let parse_usize = |value: &str| {
            value
                .parse::<usize>()
                .map_err(|_| bad("an integer", "usize"))
        };
        let parse_f64 = |value: &str| {
            value
                .parse::<f64>()
                .map_err(|_| bad("a number", "finite float"))
        };
        let parse_f64_list = |value: &str| -> Result<Vec<f64>> {
            value.split(',').map(|v| parse_f64(v.trim())).collect()
        };
        let parse_str_list = |value: &str| -> Vec<String> {
            value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect()
        };
        match key {
            "seed" => self.seed = Some(parse_u64(value)?),
            "data.file" => self.data.file = Some(PathBuf::from(value)),
            "data.files" => {
                self.data.files = parse_str_list(value).into_iter().map(PathBuf::from).collect()
            }
            "data.date_column" => self.data.date_column = value.to_string(),
            "data.return_column" => self.data.return_column = value.to_string(),
            "data.price_column" => self.data.price_column = value.to_string(),
            "data.exog" => self.data.exog = parse_str_list(value),
            "models.enabled" => self.models.enabled = parse_str_list(value),
            "models.t_in" => self.models.t_in = parse_usize(value)?,
            "models.taus" => self.models.taus = parse_f64_list(value)?,
            "mcs.training_alpha" => self.mcs.training_alpha = parse_f64(value)?,
            "mcs.eval_alpha" => self.mcs.eval_alpha = parse_f64(value)?,
            "mcs.training_b" => self.mcs.training_b = parse_usize(value)?,
            "mcs.eval_b" => self.mcs.eval_b = parse_usize(value)?,
            "mcs.mean_block" => self.mcs.mean_block = parse_f64(value)?,
            "combine.lambda" => self.combine.lambda = parse_f64(value)?,
            "backtest.burn_in" => self.backtest.burn_in = Some(parse_usize(value)?),
            "output.dir" => self.output.dir = PathBuf::from(value),
            other => {
                return Err(Error::Config(format!(
                    "unknown config key '{other}' (see --help for the key list)"
                )))
            }
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::Config(
                "seed is required (set `seed = <u64>` in the config or pass --set seed=N)"
                    .to_string(),
            )
        })
    }

    pub fn schema(&self) -> riskcomb::data::SeriesSchema {
        riskcomb::data::SeriesSchema {
            date: self.data.date_column.clone(),
            ret: self.data.return_column.clone(),
            price: self.data.price_column.clone(),
            exog: self.data.exog.clone(),
        }
    }

    /// Input files for `run`: `files` if nonempty, else the single `file`.
    pub fn input_files(&self) -> Result<Vec<PathBuf>> {
        if !self.data.files.is_empty() {
            if self.data.file.is_some() {
                return Err(Error::Config(
                    "set either data.file or data.files, not both".to_string(),
                ));
            }
            return Ok(self.data.files.clone());
        }
        match &self.data.file {
            Some(f) => Ok(vec![f.clone()]),
            None => Err(Error::Config(
                "no input series: set data.file (or data.files)".to_string(),
            )),
        }
    }

    /// Builds the validated engine configuration. The seed must be present.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let seed = self.require_seed()?;
        let config = RunConfig {
            taus: self.models.taus.clone(),
            t_in: self.models.t_in,
            lambda: self.combine.lambda,
            training_alpha: self.mcs.training_alpha,
            eval_alpha: self.mcs.eval_alpha,
            training_b: self.mcs.training_b,
            eval_b: self.mcs.eval_b,
            mean_block: self.mcs.mean_block,
            models: self.models.enabled.clone(),
            seed,
            burn_in: self.backtest.burn_in,
            out_dir: Some(self.output.dir.clone()),
            ..RunConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

/// Config-key reference shown by `--help`; every key with its default.
pub const CONFIG_KEY_HELP: &str = "\
Config keys (TOML file sections; override any with --set KEY=VALUE):
  seed                  (required, no default)  master RNG seed; all runs reproducible
  data.file             (no default)   input series CSV for run/evaluate/backtest
  data.files            (no default)   comma-separated list; run loops and aggregates
  data.date_column      [date]         date column name
  data.return_column    [ret]          return column; if absent, prices are used
  data.price_column     [price]        price column for derived log returns
  data.exog             [rvol5,rbss,rk] exogenous columns loaded when present
  models.enabled        [all 29 ids]   candidate models, in column order
  models.t_in           [1000]         rolling estimation window length
  models.taus           [0.025,0.01]   tail levels
  mcs.training_alpha    [0.25]         per-step training MCS level
  mcs.eval_alpha        [0.25]         final evaluation MCS level
  mcs.training_b        [1000]         training MCS bootstrap replicates
  mcs.eval_b            [5000]         evaluation MCS bootstrap replicates
  mcs.mean_block        [10]           stationary-bootstrap mean block length
  combine.lambda        [0.06]         training-loss smoothing parameter
  backtest.burn_in      [t_in/2]       OOS days discarded before evaluation
                                       (standalone evaluate/backtest default: 0)
  output.dir            [out]          output directory (--out overrides)";
