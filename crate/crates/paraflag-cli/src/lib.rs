//! Batch experiment harness over the spectral library: Leibnitz-rule
//! ratio studies, operator norm sweeps, model-operator bound trials, and
//! coupled-system parameter scans, driven by JSON configs and emitting
//! CSV tables plus JSON summaries.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{
    load_config, AknsScanConfig, DecomposeConfig, Exponent, GrandLeibnitzConfig, GridSpec,
    KatoPonceConfig, ModelBoundConfig, NormSweepConfig, SweepOperator, HOLDER_TOLERANCE,
};
pub use experiments::{
    akns_csv, dilate, grand_leibnitz_ratio, kato_ponce_ratio, parallel_trials, run_akns_scan,
    run_decompose, run_grand_leibnitz, run_kato_ponce, run_model_bound, run_norm_sweep,
    self_test, tree_form_value, ModelReport, RatioReport, SweepReport, TrialOutcome,
    MODEL_THETAS, NORM_SWEEP_HEADER,
};
pub use report::{fmt_float, median, write_summary, Csv};
