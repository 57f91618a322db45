//! Scenes, trial runner, aggregation and report emitters.

mod report;
mod scene;
mod svg;
mod trials;

pub use report::{
    aggregate, parse_markdown, BenchReport, MarkdownEntry, MethodSummary, ReportError, CSV_COLUMNS,
    CSV_TIME_COLUMNS,
};
pub use scene::{load_scene, Scene, SceneError, Workspace};
pub use svg::{plot_trajectory, render_svg};
pub use trials::{
    run_bench, run_method, run_trials, worker_count, MethodConfig, TrialRecord, WORKERS_ENV,
};
