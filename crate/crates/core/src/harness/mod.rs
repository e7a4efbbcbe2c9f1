//! Experiment runner, metrics, replay evaluation and diagnostics.

pub mod contamination;
pub mod detection;
pub mod experiment;
pub mod replay;
pub mod report;

pub use contamination::{contamination_diagnostic, AssignmentLog, ContaminationReport};
pub use detection::{detection_report, CreationLog, DetectionReport};
pub use experiment::{
    mean_std, read_trace_csv, regret_increment, run_experiment, run_seed, trace_path,
    trajectory_path, write_outputs, write_trace_csv, AgentRun, AgentSummary, ExperimentOutput,
    RoundRecord, RunAgent, RunConfig, SeedResult, Summary, TRACE_HEADER,
};
pub use replay::{
    gen_log, replay_evaluate, GeneratedLog, LogReward, ReplayLog, ReplayResult, ReplayRow,
};
pub use report::{report_dir, DirReport};
