//! Rolling estimation/forecasting pipeline and the oracle simulator.

pub mod engine;
pub mod output;
pub mod simulate;
pub mod universe;

pub use engine::{
    evaluate, run_rolling, summarize_across_series, CarryForwardEvent, EvalSsm, EvaluationReport,
    ExogColumns, ForecastStore, RunConfig, StepMembership, StepWeightRecord, SummaryCounts,
};
pub use output::{
    read_forecasts_csv, write_forecasts_csv, write_report_json, write_run_outputs, write_ssm_csv,
    write_summary_counts_csv, write_summary_csv,
};
pub use simulate::{simulate, SimOutput, SimSpec};
pub use universe::{
    full_universe, CandidateModel, RealizedMeasure, MCS_PREDICTOR_IDS, PREDICTOR_IDS,
};
