use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Bounds, GroupState};

/// Partition width `δ(k) = k^(−1/10)`.
pub fn default_delta(k: usize) -> f64 {
    (k as f64).powf(-0.1)
}

/// Loose count bounds for an interval `I` inside `region`:
/// `count ≥ c1 · |I| · k` (times `δ` when `lower_scales_with_delta`) and `count ≤ c2 · |I| · k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBounds {
    pub c1: f64,
    pub c2: f64,
    pub lower_scales_with_delta: bool,
    pub region: (f64, f64),
}

impl DensityBounds {
    /// The majority-rule constants: `|I|k/120 ≤ count ≤ 7|I|k` on `[0.1, 0.9]`.
    pub fn majority() -> Self {
        Self {
            c1: 1.0 / 120.0,
            c2: 7.0,
            lower_scales_with_delta: false,
            region: (0.1, 0.9),
        }
    }

    fn lower(&self, width: f64, delta: f64, k: usize) -> f64 {
        let base = self.c1 * width * k as f64;
        if self.lower_scales_with_delta {
            base * delta
        } else {
            base
        }
    }

    fn upper(&self, width: f64, k: usize) -> f64 {
        self.c2 * width * k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalVerdict {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub k: usize,
    pub delta: f64,
    /// Members per segment `[iδ, (i+1)δ)`, the last segment closed at 1.
    pub counts: Vec<usize>,
    pub bounds: DensityBounds,
    /// Aligned intervals of width `δ`, `2δ`, `4δ` lying inside the bound region.
    pub verdicts: Vec<IntervalVerdict>,
}

impl DensityProfile {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.lower_ok && v.upper_ok)
    }

    pub fn upper_flagged(&self) -> bool {
        self.verdicts.iter().any(|v| !v.upper_ok)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("partition width δ = {delta} outside (0, 1]")))
    }
}

pub fn density_profile(group: &GroupState, delta: f64, bounds: DensityBounds) -> Result<DensityProfile> {
    check_delta(delta)?;
    let k = group.len();
    let segments = (1.0 / delta).ceil() as usize;
    let edge = |i: usize| (i as f64 * delta).min(1.0);
    let mut counts = Vec::with_capacity(segments);
    for i in 0..segments {
        let convention = if i + 1 == segments { Bounds::Closed } else { Bounds::HalfOpen };
        counts.push(group.count_interval(edge(i), edge(i + 1), convention)?);
    }

    let (region_lo, region_hi) = bounds.region;
    let eps = 1e-12;
    let mut verdicts = Vec::new();
    for span in [1usize, 2, 4] {
        for i in 0..segments.saturating_sub(span - 1) {
            let (lo, hi) = (i as f64 * delta, (i + span) as f64 * delta);
            if lo < region_lo - eps || hi > region_hi + eps {
                continue;
            }
            let count: usize = counts[i..i + span].iter().sum();
            let width = hi - lo;
            verdicts.push(IntervalVerdict {
                lo,
                hi,
                count,
                lower_ok: count as f64 >= bounds.lower(width, delta, k),
                upper_ok: count as f64 <= bounds.upper(width, k),
            });
        }
    }
    Ok(DensityProfile {
        k,
        delta,
        counts,
        bounds,
        verdicts,
    })
}

/// Extreme interval counts over sliding windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScan {
    pub width: f64,
    pub windows: usize,
    pub min_count: usize,
    pub max_count: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl WindowScan {
    pub fn passed(&self) -> bool {
        self.min_count as f64 >= self.lower_bound && self.max_count as f64 <= self.upper_bound
    }
}

/// Slides a closed window of each `width` across the bound region in steps of
/// `stride` (plus one window flush with the region's right end) and records the
/// smallest and largest member counts.
pub fn density_scan(group: &GroupState, widths: &[f64], stride: f64, bounds: DensityBounds) -> Result<Vec<WindowScan>> {
    if !(stride > 0.0) {
        return Err(Error::domain(format!("scan stride {stride} must be positive")));
    }
    let k = group.len();
    let (region_lo, region_hi) = bounds.region;
    widths
        .iter()
        .map(|&width| {
            check_delta(width)?;
            if width > region_hi - region_lo {
                return Err(Error::domain(format!("window width {width} exceeds the scan region")));
            }
            let last = region_hi - width;
            let mut starts: Vec<f64> = (0..)
                .map(|i| region_lo + i as f64 * stride)
                .take_while(|&a| a < last)
                .collect();
            starts.push(last);
            let mut min_count = usize::MAX;
            let mut max_count = 0;
            for &a in &starts {
                let c = group.count_interval(a, a + width, Bounds::Closed)?;
                min_count = min_count.min(c);
                max_count = max_count.max(c);
            }
            Ok(WindowScan {
                width,
                windows: starts.len(),
                min_count,
                max_count,
                lower_bound: bounds.lower(width, width, k),
                upper_bound: bounds.upper(width, k),
            })
        })
        .collect()
}
