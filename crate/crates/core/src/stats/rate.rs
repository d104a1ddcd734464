use serde::Serialize;

use crate::engine::Trajectory;
use crate::error::{Error, Result};

/// Fit of the model `t ≈ C · e^{1/g}` to a trajectory's checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// `C` with the slope of `log t` against `1/g` held at 1.
    pub c: f64,
    /// Root-mean-square residual of `log t` under that fit.
    pub residual: f64,
    /// Unconstrained least-squares slope of `log t` against `1/g`.
    pub free_slope: f64,
    pub free_intercept: f64,
    pub points: usize,
}

pub const MIN_RATE_POINTS: usize = 10;

/// Fits `log t = log C + 1/g` over checkpoints with `t > 0` raw steps and a positive gap.
pub fn convergence_rate_fit(trajectory: &Trajectory) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = trajectory
        .checkpoints
        .iter()
        .filter_map(|c| match c.gap {
            Some(g) if g > 0.0 && c.steps > 0 => Some((1.0 / g, (c.steps as f64).ln())),
            _ => None,
        })
        .collect();
    if pts.len() < MIN_RATE_POINTS {
        return Err(Error::state(format!(
            "rate fit needs {MIN_RATE_POINTS} checkpoints with positive gap, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let log_c = pts.iter().map(|&(x, y)| y - x).sum::<f64>() / n;
    let residual = (pts.iter().map(|&(x, y)| (y - x - log_c).powi(2)).sum::<f64>() / n).sqrt();

    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let free_slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };

    Ok(RateFit {
        c: log_c.exp(),
        residual,
        free_slope,
        free_intercept: mean_y - free_slope * mean_x,
        points: pts.len(),
    })
}
