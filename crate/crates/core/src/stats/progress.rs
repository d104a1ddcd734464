use serde::Serialize;

use crate::engine::{RunOptions, Simulation, Target};
use crate::error::{Error, Result};
use crate::group::{ceil_scaled, Bounds, GroupState};
use crate::oracles::{gap_functions, OracleContext};
use crate::rng::{derive_seed, SimRng};
use crate::rules::RuleSpec;

/// Which side of the fixed point the quantile starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `q_p = τ − Δ`; the quantile should move right by `g_r`.
    Left,
    /// `q_p = τ + Δ`; the quantile should move left by `g_l`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressParams {
    pub start_gap: f64,
    pub sigma: f64,
    pub t: usize,
    pub trials: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressReport {
    pub start_quantile: f64,
    pub group_size: usize,
    /// `g(Δ)/4 · t`: members required between the old and the new quantile.
    pub required: f64,
    pub passes: usize,
    pub trials: usize,
    pub pass_fraction: f64,
}

/// The gap function on the side the test runs.
fn gap_on_side(ctx: &OracleContext, delta: f64, side: Side) -> Result<f64> {
    let g = gap_functions(ctx, delta)?;
    Ok(match side {
        Side::Left => g.g_r,
        Side::Right => g.g_l,
    })
}

/// Checks the hypotheses under which the quantile is claimed to advance.
pub fn check_progress_hypotheses(rule: &RuleSpec, ctx: &OracleContext, params: &ProgressParams) -> Result<()> {
    let ProgressParams {
        start_gap: delta,
        sigma,
        side,
        t,
        ..
    } = *params;
    if t == 0 {
        return Err(Error::precondition("t ≥ 1"));
    }
    if !(sigma > 0.0) {
        return Err(Error::precondition("σ > 0"));
    }
    if !(sigma < delta) {
        return Err(Error::precondition(format!("σ < Δ (σ = {sigma}, Δ = {delta})")));
    }
    let g_delta = gap_on_side(ctx, delta, side)?;
    let g_inner = gap_on_side(ctx, delta - sigma, side)?;
    if !(g_inner > g_delta / 2.0) {
        return Err(Error::precondition(format!(
            "g(Δ−σ) > g(Δ)/2 ({g_inner} ≤ {})",
            g_delta / 2.0
        )));
    }
    if !(g_delta / 2.0 > rule.c2() * sigma) {
        return Err(Error::precondition(format!(
            "g(Δ)/2 > c2·σ ({} ≤ {})",
            g_delta / 2.0,
            rule.c2() * sigma
        )));
    }
    let q = start_quantile(ctx, delta, side);
    if !(q - sigma >= 0.0 && q + sigma <= 1.0) {
        return Err(Error::precondition(format!(
            "[q−σ, q+σ] ⊂ [0, 1] (q = {q}, σ = {sigma})"
        )));
    }
    Ok(())
}

fn start_quantile(ctx: &OracleContext, delta: f64, side: Side) -> f64 {
    match side {
        Side::Left => ctx.tau - delta,
        Side::Right => ctx.tau + delta,
    }
}

/// A group of `6t + 1` members whose `p`-quantile sits at `q`, with exactly
/// `t` members on each side of it inside `[q − σ, q + σ]`.
///
/// The `2t + 1` central members are equally spaced over the σ-window; the
/// rest are spread evenly over `[0, q − σ)` and `(q + σ, 1]` so that the
/// central member has rank `⌈p·(6t+1)⌉`.
pub fn progress_start_group(p: f64, q: f64, sigma: f64, t: usize) -> Result<GroupState> {
    let n = 6 * t + 1;
    let rank = ceil_scaled(p, n as u64).max(1) as usize;
    let below = rank
        .checked_sub(t + 1)
        .ok_or_else(|| Error::precondition(format!("⌈p·N⌉ ≥ t + 1 (p = {p}, t = {t})")))?;
    let above = n - below - (2 * t + 1);
    let mut xs = Vec::with_capacity(n);
    let left_end = q - sigma;
    xs.extend((0..below).map(|i| left_end * i as f64 / below as f64));
    xs.extend((0..=2 * t).map(|i| q - sigma + sigma * i as f64 / t as f64));
    let right_start = q + sigma;
    xs.extend((1..=above).map(|i| right_start + (1.0 - right_start) * i as f64 / above as f64));
    GroupState::from_opinions(xs)
}

/// Starts the rule from a constructed group with its quantile `Δ` away from
/// `τ`, admits `t` members, and counts the trials where at least `g(Δ)/4 · t`
/// members lie between the old and the new quantile and the gap did not grow.
pub fn quantile_progress_test(
    rule: &RuleSpec,
    ctx: &OracleContext,
    params: &ProgressParams,
    master_seed: u64,
) -> Result<ProgressReport> {
    check_progress_hypotheses(rule, ctx, params)?;
    let ProgressParams {
        start_gap: delta,
        sigma,
        t,
        trials,
        side,
    } = *params;
    let q = start_quantile(ctx, delta, side);
    let template = progress_start_group(ctx.p, q, sigma, t)?;
    let q0 = template.quantile(ctx.p)?;
    let required = gap_on_side(ctx, delta, side)? / 4.0 * t as f64;

    let mut passes = 0;
    for trial in 0..trials {
        let rng = SimRng::new(derive_seed(master_seed, trial as u64));
        let mut sim = Simulation::new(template.clone(), rule.clone(), rng, RunOptions::default())?;
        sim.run_until(Target::Accepted(t as u64), |_, _| {})?;
        let q1 = sim.group().quantile(ctx.p)?;
        let (lo, hi) = match side {
            Side::Left => (q0, q1),
            Side::Right => (q1, q0),
        };
        let between = if lo <= hi {
            sim.group().count_interval(lo, hi, Bounds::Closed)?
        } else {
            0
        };
        let gap_held = (q1 - ctx.tau).abs() <= (q0 - ctx.tau).abs();
        if between as f64 >= required && gap_held {
            passes += 1;
        }
    }
    Ok(ProgressReport {
        start_quantile: q0,
        group_size: template.len(),
        required,
        passes,
        trials,
        pass_fraction: passes as f64 / trials.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta: f64, sigma: f64, side: Side) -> ProgressParams {
        ProgressParams {
            start_gap: delta,
            sigma,
            t: 5000,
            trials: 20,
            side,
        }
    }

    #[test]
    fn start_group_places_quantile() {
        let g = progress_start_group(0.5, 0.4, 0.002, 100).unwrap();
        assert_eq!(g.len(), 601);
        let q = g.quantile(0.5).unwrap();
        assert!((q - 0.4).abs() < 1e-15);
        assert_eq!(g.count_interval(0.4 - 0.002, 0.4 - 1e-9, Bounds::Closed).unwrap(), 100);
        assert_eq!(g.count_interval(0.4 + 1e-9, 0.4 + 0.002, Bounds::Closed).unwrap(), 100);

        let g = progress_start_group(0.75, 0.8, 0.01, 50).unwrap();
        assert!((g.quantile(0.75).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn hypotheses_match_hand_values() {
        let maj = OracleContext::majority();
        let rule = RuleSpec::majority();
        // g_r(0.1) = 0.02, g_r(0.098) = 0.019208, c2·σ = 0.004
        assert!(check_progress_hypotheses(&rule, &maj, &params(0.1, 0.002, Side::Left)).is_ok());
        let err = check_progress_hypotheses(&rule, &maj, &params(0.0, 0.002, Side::Left)).unwrap_err();
        assert!(err.to_string().contains("σ < Δ"));
        // g_r(0.01) = 0.0002; g_r(0.006) = 0.000072 < 0.0001
        let err = check_progress_hypotheses(&rule, &maj, &params(0.01, 0.004, Side::Left)).unwrap_err();
        assert!(err.to_string().contains("g(Δ−σ) > g(Δ)/2"));
        // g_r(0.1)/2 = 0.01 < 2 · 0.006
        let err = check_progress_hypotheses(&rule, &maj, &params(0.1, 0.006, Side::Left)).unwrap_err();
        assert!(err.to_string().contains("g(Δ)/2 > c2·σ"));
    }

    #[test]
    fn majority_progress_both_sides() {
        let rule = RuleSpec::majority();
        let ctx = OracleContext::majority();
        for side in [Side::Left, Side::Right] {
            let report = quantile_progress_test(&rule, &ctx, &params(0.1, 0.002, side), 5).unwrap();
            assert!(report.pass_fraction >= 0.8, "{side:?}: {report:?}");
        }
    }
}
