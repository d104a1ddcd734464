//! Statistical validators tying simulated runs to the closed forms.

mod density;
mod ecdf;
mod progress;
mod rate;
mod smoothness;

pub use density::{default_delta, density_profile, density_scan, DensityBounds, DensityProfile, IntervalVerdict, WindowScan};
pub use ecdf::{ks_distance, ks_sorted, Ecdf};
pub use progress::{check_progress_hypotheses, progress_start_group, quantile_progress_test, ProgressParams, ProgressReport, Side};
pub use rate::{convergence_rate_fit, RateFit, MIN_RATE_POINTS};
pub use smoothness::{
    estimate_interval_accept_prob, frozen_summary, smoothness_report, Estimate, IntervalCheck, SmoothnessCell, SmoothnessReport,
};
