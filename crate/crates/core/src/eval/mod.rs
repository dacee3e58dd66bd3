//! Truth matching, error metrics, modality comparison and plotting.

mod compare;
mod metrics;
mod plot;

pub use compare::{
    run_modality_comparison, run_tracker, ClassSummary, CompareMetadata, CompareReport, ComparisonSummary,
    ModalityComparison, ModalitySummary,
};
pub use metrics::{
    compute_errors, match_tracks_to_truth, AgentErrors, ClassErrors, ErrorReport, ErrorSeries, ErrorStats,
    MATCH_GATE_M,
};
pub use plot::{write_plots, PlotFiles};
