use serde::Serialize;

use crate::engine::draw_pair;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::rules::{RuleKind, RuleSpec, Summary};

/// Proportion estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Steps that admitted someone (the conditioning event).
    pub accepted: u64,
    pub trials: u64,
}

impl Estimate {
    fn from_counts(hits: u64, accepted: u64, trials: u64) -> Self {
        let n = accepted as f64;
        let estimate = hits as f64 / n;
        Self {
            estimate,
            std_error: (estimate * (1.0 - estimate) / n).sqrt(),
            accepted,
            trials,
        }
    }
}

/// The summary a rule would read off a group whose driving quantile sits at `q`.
pub fn frozen_summary(rule: &RuleSpec, q: f64) -> Result<Summary> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("frozen summary {q} outside [0, 1]")));
    }
    match rule.kind() {
        RuleKind::Majority => Ok(Summary::Median(q)),
        RuleKind::Veto { .. } | RuleKind::QuantileDriven { .. } => Ok(Summary::Quantile(q)),
        RuleKind::Consensus => Err(Error::unsupported("consensus is not driven by a single quantile")),
    }
}

/// Probability that one step admits a candidate into `[lo, hi]`, given that
/// it admits anyone, with the rule's summary held fixed.
pub fn estimate_interval_accept_prob(
    rule: &RuleSpec,
    summary: Summary,
    interval: (f64, f64),
    trials: u64,
    rng: &mut SimRng,
) -> Result<Estimate> {
    let (lo, hi) = interval;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    if !(lo <= hi) {
        return Err(Error::range(format!("interval lower end {lo} exceeds upper end {hi}")));
    }
    let mut accepted = 0;
    let mut hits = 0;
    for _ in 0..trials {
        let pair = draw_pair(rng);
        if let Some(y) = pair.admitted(rule.decide_with(summary, pair)?) {
            accepted += 1;
            hits += u64::from(y >= lo && y <= hi);
        }
    }
    if accepted == 0 {
        return Err(Error::state(format!("no admissions in {trials} trials; the estimate is undefined")));
    }
    Ok(Estimate::from_counts(hits, accepted, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCheck {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessCell {
    pub q: f64,
    pub delta: f64,
    pub intervals: Vec<IntervalCheck>,
}

impl SmoothnessCell {
    pub fn passed(&self) -> bool {
        self.intervals.iter().all(|c| c.lower_ok && c.upper_ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub c1: f64,
    pub c2: f64,
    /// Margin, in standard errors, granted to every comparison.
    pub sigmas: f64,
    pub cells: Vec<SmoothnessCell>,
    /// Estimated `f(q)`: the fraction of admissions below `q`, per grid point.
    pub f_hat: Vec<(f64, Estimate)>,
    /// Every consecutive pair of `f_hat` values rises by more than the noise.
    pub increasing: bool,
    /// Every `f_hat` value is within the noise of `1/2`.
    pub flat_at_half: bool,
}

impl SmoothnessReport {
    pub fn intervals_ok(&self) -> bool {
        self.cells.iter().all(SmoothnessCell::passed)
    }

    pub fn passed(&self) -> bool {
        self.intervals_ok() && self.increasing
    }
}

/// Partitions `[0, 1]` into intervals of width `delta` (the last one possibly
/// shorter) and checks every interval's admission probability against
/// `c1 · δ²` from below and `c2 · δ` from above, granting `3σ` either way.
///
/// One Monte Carlo run of `trials` steps is made per summary value and shared
/// by all widths.
pub fn smoothness_report(
    rule: &RuleSpec,
    summary_grid: &[f64],
    delta_grid: &[f64],
    trials: u64,
    rng: &mut SimRng,
) -> Result<SmoothnessReport> {
    if summary_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::domain("smoothness grids must be non-empty"));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    for &d in delta_grid {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::domain(format!("interval width {d} outside (0, 1]")));
        }
    }
    let sigmas = 3.0;
    let (c1, c2) = (rule.c1(), rule.c2());
    let mut cells = Vec::new();
    let mut f_hat = Vec::new();

    for &q in summary_grid {
        let summary = frozen_summary(rule, q)?;
        let mut bins: Vec<Vec<u64>> = delta_grid.iter().map(|&d| vec![0; (1.0 / d).ceil() as usize]).collect();
        let mut accepted = 0u64;
        let mut below = 0u64;
        for _ in 0..trials {
            let pair = draw_pair(rng);
            let Some(y) = pair.admitted(rule.decide_with(summary, pair)?) else {
                continue;
            };
            accepted += 1;
            below += u64::from(y < q);
            for (hist, &d) in bins.iter_mut().zip(delta_grid) {
                let idx = ((y / d) as usize).min(hist.len() - 1);
                hist[idx] += 1;
            }
        }
        if accepted == 0 {
            return Err(Error::state(format!("no admissions at summary {q}")));
        }
        f_hat.push((q, Estimate::from_counts(below, accepted, trials)));
        for (hist, &delta) in bins.iter().zip(delta_grid) {
            let intervals = hist
                .iter()
                .enumerate()
                .map(|(i, &hits)| {
                    let e = Estimate::from_counts(hits, accepted, trials);
                    let lo = i as f64 * delta;
                    let hi = ((i + 1) as f64 * delta).min(1.0);
                    let width = hi - lo;
                    let (lower, upper) = (c1 * width * width, c2 * width);
                    // the binomial spread at the bound itself: the plug-in one
                    // shrinks with the estimate and flags edge intervals where
                    // the bound is attained exactly
                    let spread = |b: f64| {
                        let b = b.min(1.0);
                        (b * (1.0 - b) / accepted as f64).sqrt()
                    };
                    IntervalCheck {
                        lo,
                        hi,
                        estimate: e.estimate,
                        std_error: e.std_error,
                        lower_ok: e.estimate + sigmas * spread(lower) >= lower,
                        upper_ok: e.estimate - sigmas * spread(upper) <= upper,
                    }
                })
                .collect();
            cells.push(SmoothnessCell { q, delta, intervals });
        }
    }

    let mut sorted = f_hat.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let increasing = sorted.windows(2).all(|w| {
        let (a, b) = (w[0].1, w[1].1);
        b.estimate - a.estimate > sigmas * a.std_error.hypot(b.std_error)
    });
    let flat_at_half = f_hat
        .iter()
        .all(|(_, e)| (e.estimate - 0.5).abs() <= sigmas * e.std_error.max(f64::EPSILON));

    Ok(SmoothnessReport {
        c1,
        c2,
        sigmas,
        cells,
        f_hat,
        increasing,
        flat_at_half,
    })
}
