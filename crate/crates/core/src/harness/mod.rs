//! Configuration, seeded experiment execution, sweeps and the verification
//! battery. Everything here is a pure function of its config text apart
//! from the output paths.

mod config;
mod run;
mod sweep;
mod verify;

pub use config::{
    AlgorithmConfig, ChecksConfig, DictionaryConfig, ExperimentConfig, OutputConfig, SpaceConfig,
    TargetConfig,
};
pub use run::{
    build_instance, check_trace, read_report, read_run, read_run_pair, run_algorithm,
    run_experiment, write_outputs, ExperimentOutput, RunReport, AVERAGING_CONTRACTION, CHECKS_CSV,
    CONFIG_TOML, REPORT_JSON, TRACE_CSV, TRACE_JSON,
};
pub use sweep::{run_sweep, run_sweep_with, Axis, SweepCell, SweepRow, SweepSpec, SweepSummary};
pub use verify::{
    criteria_wgafr_steps, criterion_barycentric, criterion_determinism, criterion_duality,
    criterion_gawr_rate, criterion_hull, criterion_iac_rate, criterion_ll0, criterion_ll1,
    criterion_ml3, criterion_mt2, criterion_orthonormal, criterion_sequences, determinism_configs,
    seeded_instance, synthetic_hl1, synthetic_ml4, verify_suite, Criterion, Profile, Sizes,
    VerifyOutcome,
};
