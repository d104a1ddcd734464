//! Running configured experiments and writing their outputs.
//!
//! A run writes `summary.json` and, depending on the kind, `trajectory.csv`,
//! `schedule.json`, `oracle.csv` or one trajectory per sweep cell under
//! `cells/`. Every file is a function of the config and seed alone; the wall
//! clock is kept in the in-memory record only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use crate::adversaries::{
    arithmetic_drift_schedule, committee_fuzz, geometric_tightness_run, immunity_config, integer_committee, median_id,
    one_step_irreplaceable, removal_schedule, replay, CommitteeFuzz, Monitors, ReplacementSchedule, ReplayReport,
};
use crate::committee::Committee;
use crate::config::{
    parse_committee, AdversaryConfig, CommitteeConfig, Construction, Experiment, ExperimentConfig, GrowConfig,
    OracleConfig, SweepConfig, VerifyConfig,
};
use crate::engine::{Checkpoint, Simulation, Trajectory};
use crate::error::{Error, Result};
use crate::group::GroupState;
use crate::oracles::triangle_cdf;
use crate::rational::{format_rational, int, parse_rational, to_f64, Rational};
use crate::rng::{derive_seed, SimRng};
use crate::stats::ks_distance;
use crate::verify::{run_suite, CriterionOutcome};

/// Column layout of `trajectory.csv`, recorded in the summary.
pub const CSV_SCHEMA: &str = "trajectory/v1";
pub const CSV_HEADER: [&str; 6] = ["k", "steps", "q_p", "gap", "x1", "xk"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowOutcome {
    pub p: f64,
    pub tau: Option<f64>,
    pub group_size: usize,
    pub steps: u64,
    pub accepted: u64,
    pub exhausted: bool,
    pub final_quantile: f64,
    pub final_gap: Option<f64>,
    /// KS distance of the second half of the admissions to the triangle law.
    pub ks_second_half: Option<f64>,
    pub consensus_violations: u64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub steps: usize,
    pub min_votes: Option<usize>,
    pub originals_removed: bool,
    pub final_members: Vec<String>,
}

impl ReplayOutcome {
    fn new(initial: &Committee, report: &ReplayReport) -> Self {
        Self {
            steps: report.votes.len(),
            min_votes: report.min_votes(),
            originals_removed: report.originals_removed(initial),
            final_members: report.final_state.values().map(format_rational).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzOutcome {
    pub accepted: usize,
    pub attempts: usize,
    pub episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_moves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hull_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irreplaceable_throughout: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_votes_seen: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stayed_median: Option<bool>,
}

impl From<&CommitteeFuzz> for FuzzOutcome {
    fn from(f: &CommitteeFuzz) -> Self {
        Self {
            accepted: f.accepted,
            attempts: f.attempts,
            episodes: f.episodes,
            drift_violations: f.drift.as_ref().map(|d| d.drift_violations),
            shift_violations: f.drift.as_ref().map(|d| d.shift_violations),
            median_moves: f.drift.as_ref().map(|d| d.median_moves),
            monotone_violations: f.consensus.as_ref().map(|c| c.monotone_violations),
            mirror_violations: f.consensus.as_ref().map(|c| c.mirror_violations),
            hull_violations: f.consensus.as_ref().map(|c| c.hull_violations),
            irreplaceable_throughout: f.immunity.as_ref().map(|m| m.irreplaceable_throughout),
            max_votes_seen: f.immunity.as_ref().map(|m| m.max_votes_seen),
            stayed_median: f.immunity.as_ref().map(|m| m.stayed_median),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommitteeOutcome {
    pub initial: Vec<String>,
    pub ell: usize,
    pub threshold: usize,
    pub replay: Option<ReplayOutcome>,
    pub fuzz: Option<FuzzOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryOutcome {
    pub construction: Construction,
    pub initial: Vec<String>,
    pub ell: usize,
    pub threshold: usize,
    pub replay: Option<ReplayOutcome>,
    /// Construction-specific quantities; exact values as `"num/den"`.
    pub details: Value,
    #[serde(skip)]
    pub schedule: Option<(Committee, ReplacementSchedule)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub rule: String,
    pub p: f64,
    pub tau: f64,
    pub fixed_point_residual: f64,
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
    /// `(q, f(q))`.
    pub table: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub index: usize,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub tau: Option<f64>,
    pub final_quantile: Option<f64>,
    pub final_gap: Option<f64>,
    pub passed: Option<bool>,
    pub error: Option<String>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// Statistics over the cells sharing one axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisAggregate {
    pub axis_value: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub passes: Option<usize>,
    pub pass_fraction: Option<f64>,
    pub gap_mean: Option<f64>,
    pub gap_min: Option<f64>,
    pub gap_max: Option<f64>,
    pub quantile_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub cells: Vec<CellOutcome>,
    pub aggregates: Vec<AxisAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub criteria: Vec<CriterionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Grow(GrowOutcome),
    Committee(CommitteeOutcome),
    Adversary(AdversaryOutcome),
    Oracle(OracleOutcome),
    Verify(VerifyOutcome),
    Sweep(SweepOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub wall_clock: Duration,
    pub verdicts: Vec<Verdict>,
    pub outcome: Outcome,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// The JSON summary: provenance, verdicts and the outcome.
    pub fn summary(&self) -> Value {
        json!({
            "kind": self.config.kind(),
            "seed": self.config.seed,
            "config_hash": self.config.hash(),
            "csv_schema": CSV_SCHEMA,
            "config": self.config.echo(),
            "passed": self.passed(),
            "verdicts": self.verdicts,
            "result": self.outcome,
        })
    }
}

/// Runs the configured experiment with its monitors attached.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    run_experiment_with(config, &mut |_| {})
}

/// As [`run_experiment`]; `progress` sees each acceptance criterion of a
/// verify run as soon as it finishes.
pub fn run_experiment_with(config: &ExperimentConfig, progress: &mut dyn FnMut(&CriterionOutcome)) -> Result<RunRecord> {
    let start = Instant::now();
    let seed = config.seed;
    let (verdicts, outcome) = match &config.experiment {
        Experiment::Grow(c) => {
            let outcome = grow(c, seed)?;
            (grow_verdicts(c, &outcome), Outcome::Grow(outcome))
        }
        Experiment::Committee(c) => committee(c, seed)?,
        Experiment::Adversary(c) => adversary(c, seed)?,
        Experiment::Oracle(c) => oracle(c)?,
        Experiment::Verify(c) => verify(c, seed, progress)?,
        Experiment::Sweep(c) => sweep(c, seed)?,
    };
    Ok(RunRecord {
        config: config.clone(),
        wall_clock: start.elapsed(),
        verdicts,
        outcome,
    })
}

/// One growing-group run.
pub fn grow(c: &GrowConfig, seed: u64) -> Result<GrowOutcome> {
    let rule = c.rule.build()?;
    let initial = GroupState::from_opinions(c.initial.iter().copied())?;
    let mut sim = Simulation::new(initial, rule, SimRng::new(seed), c.run_options()?)?;
    sim.run_until(c.target(), |_, _| {})?;
    let (trajectory, group) = sim.finish();
    let final_quantile = group.quantile(trajectory.p)?;
    let ks_second_half = match &trajectory.admitted_log {
        Some(log) if c.rule.name == crate::config::RuleName::Majority && log.len() >= 2 => {
            Some(ks_distance(&log[log.len() / 2..], |x| triangle_cdf(x).expect("opinions lie in [0, 1]"))?)
        }
        _ => None,
    };
    Ok(GrowOutcome {
        p: trajectory.p,
        tau: trajectory.tau,
        group_size: group.len(),
        steps: trajectory.steps,
        accepted: trajectory.accepted,
        exhausted: trajectory.exhausted,
        final_quantile,
        final_gap: trajectory.tau.map(|t| (final_quantile - t).abs()),
        ks_second_half,
        consensus_violations: trajectory.consensus_violations,
        trajectory,
    })
}

fn grow_verdicts(c: &GrowConfig, g: &GrowOutcome) -> Vec<Verdict> {
    let cps = &g.trajectory.checkpoints;
    let monotone = cps.windows(2).all(|w| w[0].k < w[1].k && w[0].steps <= w[1].steps);
    let mut v = vec![Verdict::new(
        "checkpoints_monotone",
        monotone,
        format!("{} checkpoints", cps.len()),
    )];
    if c.max_steps.is_some() {
        v.push(Verdict::new(
            "target_reached",
            !g.exhausted,
            format!("{} accepted in {} steps", g.accepted, g.steps),
        ));
    }
    if c.rule.name == crate::config::RuleName::Consensus {
        v.push(Verdict::new(
            "consensus_structure",
            g.consensus_violations == 0,
            format!("{} admissions outside [0, 2·x1] ∪ [2·xk − 1, 1]", g.consensus_violations),
        ));
    }
    if let (Some(tol), Some(gap)) = (c.gap_tolerance, g.final_gap) {
        v.push(Verdict::new("final_gap", gap <= tol, format!("|q_p − τ| = {gap:.6} (tolerance {tol})")));
    }
    if let Some(tol) = c.ks_tolerance {
        let ks = g.ks_second_half.unwrap_or(f64::INFINITY);
        v.push(Verdict::new("ks_second_half", ks <= tol, format!("KS = {ks:.6} (tolerance {tol})")));
    }
    v
}

fn fuzz_verdicts(f: &CommitteeFuzz) -> Vec<Verdict> {
    let mut v = Vec::new();
    if let Some(d) = &f.drift {
        v.push(Verdict::new("drift_bound", d.drift_violations == 0, format!("{} violations", d.drift_violations)));
        v.push(Verdict::new(
            "shift_inequality",
            d.shift_violations == 0,
            format!("{} violations over {} median moves", d.shift_violations, d.median_moves),
        ));
    }
    if let Some(c) = &f.consensus {
        v.push(Verdict::new(
            "consensus_monotone",
            c.monotone_violations == 0 && c.mirror_violations == 0,
            format!("{} increases, {} mirror decreases", c.monotone_violations, c.mirror_violations),
        ));
        v.push(Verdict::new(
            "consensus_hull",
            c.hull_violations == 0,
            format!("{} admissions outside the widened hull", c.hull_violations),
        ));
    }
    if let Some(m) = &f.immunity {
        v.push(Verdict::new(
            "irreplaceable_throughout",
            m.irreplaceable_throughout,
            format!("at most {} votes against the median member", m.max_votes_seen),
        ));
    }
    v
}

/// Replays a schedule; an illegal step is a failed verdict, not an error.
fn replay_verdict(initial: &Committee, schedule: &ReplacementSchedule) -> Result<(Verdict, Option<ReplayOutcome>)> {
    match replay(initial, schedule) {
        Ok(report) => {
            let outcome = ReplayOutcome::new(initial, &report);
            let detail = match outcome.min_votes {
                Some(v) => format!("{} steps, fewest votes {v}", outcome.steps),
                None => "empty schedule".to_string(),
            };
            Ok((Verdict::new("schedule_legal", true, detail), Some(outcome)))
        }
        Err(Error::Construction(msg)) => Ok((Verdict::new("schedule_legal", false, msg), None)),
        Err(e) => Err(e),
    }
}

fn committee(c: &CommitteeConfig, seed: u64) -> Result<(Vec<Verdict>, Outcome)> {
    let initial = c.validate()?;
    let mut verdicts = Vec::new();
    let mut replay_out = None;
    if let Some(s) = &c.schedule {
        let schedule = ReplacementSchedule::from_serde(s).map_err(|e| Error::config("schedule", e.to_string()))?;
        let (v, out) = replay_verdict(&initial, &schedule)?;
        verdicts.push(v);
        replay_out = out;
    }
    let mut fuzz_out = None;
    if let Some(f) = &c.fuzz {
        let run = committee_fuzz(&initial, c.monitors, f.accepted, f.episode, &mut SimRng::new(seed))?;
        verdicts.extend(fuzz_verdicts(&run));
        fuzz_out = Some(FuzzOutcome::from(&run));
    }
    Ok((
        verdicts,
        Outcome::Committee(CommitteeOutcome {
            initial: initial.values().map(format_rational).collect(),
            ell: initial.ell(),
            threshold: initial.threshold(),
            replay: replay_out,
            fuzz: fuzz_out,
        }),
    ))
}

fn rational_field(value: &Option<String>, default: Rational) -> Result<Rational> {
    value.as_deref().map_or(Ok(default), parse_rational)
}

fn adversary(c: &AdversaryConfig, seed: u64) -> Result<(Vec<Verdict>, Outcome)> {
    c.validate()?;
    let given = c.committee.as_ref().map(|s| parse_committee(s, "committee")).transpose()?;
    let mut verdicts = Vec::new();
    let (initial, schedule, details) = match c.construction {
        Construction::ArithmeticDrift => {
            let initial = match given {
                Some(g) => g,
                None => integer_committee(7, 0)?,
            };
            let diameter = initial.initial_diameter();
            let target = rational_field(&c.target, &diameter * int(100))?;
            let schedule = arithmetic_drift_schedule(&initial, &target)?;
            let report = replay(&initial, &schedule)?;
            let moved = report.final_state.median()? - initial.median()?;
            verdicts.push(Verdict::new(
                "displacement_reached",
                moved >= target,
                format!("median moved {:.6} for a target of {:.6}", to_f64(&moved), to_f64(&target)),
            ));
            let details = json!({
                "diameter": format_rational(&diameter),
                "target": format_rational(&target),
                "displacement": format_rational(&moved),
            });
            (initial, Some(schedule), details)
        }
        Construction::GeometricTightness => {
            let (k, ell) = (c.k.expect("validated"), c.ell.expect("validated"));
            let run = geometric_tightness_run(k, ell)?;
            verdicts.push(Verdict::new(
                "drift_bound_held",
                run.drift_bound_held,
                format!("displacement / bound = {:.6}", run.bound_ratio),
            ));
            verdicts.push(Verdict::new(
                "margin_exceeds_truncation",
                run.margin_exceeds_truncation(),
                format!("margin {:.3e} against truncation {:.3e}", run.min_margin, run.truncation_bound),
            ));
            let details = json!({
                "k": k,
                "ell": ell,
                "delta_root": run.delta_root,
                "delta": format_rational(&run.delta),
                "displacement": format_rational(&run.displacement),
                "bound": format_rational(&run.bound),
                "bound_ratio": run.bound_ratio,
                "min_margin": run.min_margin,
                "truncation_bound": run.truncation_bound,
            });
            (run.initial, Some(run.schedule), details)
        }
        Construction::Immunity => {
            let (k, ell) = (c.k.expect("validated"), c.ell.unwrap_or(1));
            let d = rational_field(&c.d, int(1))?;
            let big_d = rational_field(&c.big_d, int(1))?;
            let initial = immunity_config(k, ell, &d, &big_d)?;
            let verdict = one_step_irreplaceable(&initial, initial.n() / 2)?;
            verdicts.push(Verdict::new(
                "irreplaceable_initially",
                verdict.irreplaceable,
                format!("at most {} votes, threshold {}", verdict.max_votes, initial.threshold()),
            ));
            let mut details = json!({
                "median_id": median_id(&initial)?,
                "max_votes": verdict.max_votes,
            });
            if let Some(f) = &c.fuzz {
                let monitors = Monitors {
                    immunity: true,
                    ..Monitors::default()
                };
                let run = committee_fuzz(&initial, monitors, f.accepted, f.episode, &mut SimRng::new(seed))?;
                verdicts.extend(fuzz_verdicts(&run));
                details["fuzz"] = serde_json::to_value(FuzzOutcome::from(&run)).expect("plain data");
            }
            (initial, None, details)
        }
        Construction::RemovalSchedule => {
            let initial = match (given, c.k) {
                (Some(g), _) => g,
                (None, Some(k)) => integer_committee(4 * k + 3, k + 1)?,
                (None, None) => unreachable!("validated"),
            };
            let schedule = removal_schedule(&initial)?;
            (initial, Some(schedule), json!({}))
        }
    };
    let mut replay_out = None;
    if let Some(s) = &schedule {
        let (v, out) = replay_verdict(&initial, s)?;
        verdicts.insert(0, v);
        if c.construction == Construction::RemovalSchedule {
            let removed = out.as_ref().is_some_and(|o| o.originals_removed);
            verdicts.push(Verdict::new(
                "all_original_ids_removed",
                removed,
                format!("{} steps at threshold {}", s.len(), initial.threshold()),
            ));
        }
        replay_out = out;
    }
    Ok((
        verdicts,
        Outcome::Adversary(AdversaryOutcome {
            construction: c.construction,
            initial: initial.values().map(format_rational).collect(),
            ell: initial.ell(),
            threshold: initial.threshold(),
            replay: replay_out,
            details,
            schedule: schedule.map(|s| (initial, s)),
        }),
    ))
}

fn oracle(c: &OracleConfig) -> Result<(Vec<Verdict>, Outcome)> {
    c.validate()?;
    let ctx = c.context()?;
    let table = c
        .grid()
        .into_iter()
        .map(|q| Ok((q, ctx.f(q)?)))
        .collect::<Result<Vec<_>>>()?;
    let residual = (ctx.f(ctx.tau)? - ctx.p).abs();
    let verdicts = vec![Verdict::new(
        "fixed_point",
        residual <= 1e-12,
        format!("|f(τ) − p| = {residual:.3e} at τ = {:.10}", ctx.tau),
    )];
    Ok((
        verdicts,
        Outcome::Oracle(OracleOutcome {
            rule: c.rule.build()?.name().to_string(),
            p: ctx.p,
            tau: ctx.tau,
            fixed_point_residual: residual,
            phi1: ctx.phi1,
            phi2: ctx.phi2,
            table,
        }),
    ))
}

fn verify(c: &VerifyConfig, seed: u64, progress: &mut dyn FnMut(&CriterionOutcome)) -> Result<(Vec<Verdict>, Outcome)> {
    c.validate()?;
    let criteria = run_suite(c.suite, c.criteria.as_deref(), seed, progress)?;
    let verdicts = criteria
        .iter()
        .map(|o| Verdict::new(&format!("criterion_{}", o.id), o.passed, o.detail.clone()))
        .collect();
    Ok((verdicts, Outcome::Verify(VerifyOutcome { criteria })))
}

/// Seeds of the runs per axis value.
fn sweep_seeds(c: &SweepConfig, master: u64) -> Vec<u64> {
    match (&c.seeds, c.seed_count) {
        (Some(seeds), _) => seeds.clone(),
        (None, Some(n)) => (0..n).map(|i| derive_seed(master, i)).collect(),
        (None, None) => vec![master],
    }
}

fn run_cell(c: &SweepConfig, index: usize, axis_value: Option<f64>, seed: u64) -> CellOutcome {
    let mut cell = CellOutcome {
        index,
        axis_value,
        seed,
        tau: None,
        final_quantile: None,
        final_gap: None,
        passed: None,
        error: None,
        trajectory: None,
    };
    let config = match (&c.axis, axis_value) {
        (Some(axis), Some(v)) => axis.apply(&c.base, v),
        _ => Ok(c.base.clone()),
    };
    match config.and_then(|g| grow(&g, seed)) {
        Ok(g) => {
            cell.tau = g.tau;
            cell.final_quantile = Some(g.final_quantile);
            cell.final_gap = g.final_gap;
            cell.passed = c.pass_gap.map(|tol| g.final_gap.is_some_and(|gap| gap <= tol));
            cell.trajectory = Some(g.trajectory);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs every (axis value, seed) cell, spread over worker threads. Cell
/// `(a, j)` uses seed `j` of the run list, split by the axis index when an
/// axis is present; a failed cell is recorded and the sweep carries on.
pub fn sweep_cells(c: &SweepConfig, master: u64) -> Result<SweepOutcome> {
    c.validate()?;
    let seeds = sweep_seeds(c, master);
    let axis_values: Vec<Option<f64>> = match &c.axis {
        Some(axis) if !axis.values.is_empty() => axis.values.iter().map(|&v| Some(v)).collect(),
        _ => vec![None],
    };
    let jobs: Vec<(Option<f64>, u64)> = axis_values
        .iter()
        .enumerate()
        .flat_map(|(a, &value)| {
            seeds.iter().map(move |&s| (value, if value.is_some() { derive_seed(s, a as u64) } else { s }))
        })
        .collect();
    let threads = c
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .min(jobs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(value, seed)) = jobs.get(i) else { break };
                let cell = run_cell(c, i, value, seed);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(cell);
            });
        }
    });
    let cells: Vec<CellOutcome> = results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect();

    let aggregates = axis_values
        .iter()
        .map(|&value| {
            let group: Vec<&CellOutcome> = cells.iter().filter(|cell| cell.axis_value == value).collect();
            let ok: Vec<&&CellOutcome> = group.iter().filter(|cell| cell.error.is_none()).collect();
            let gaps: Vec<f64> = ok.iter().filter_map(|cell| cell.final_gap).collect();
            let qs: Vec<f64> = ok.iter().filter_map(|cell| cell.final_quantile).collect();
            let passes = c.pass_gap.map(|_| ok.iter().filter(|cell| cell.passed == Some(true)).count());
            AxisAggregate {
                axis_value: value,
                runs: group.len(),
                failures: group.len() - ok.len(),
                passes,
                pass_fraction: passes.map(|p| p as f64 / group.len() as f64),
                gap_mean: mean(&gaps),
                gap_min: gaps.iter().copied().reduce(f64::min),
                gap_max: gaps.iter().copied().reduce(f64::max),
                quantile_mean: mean(&qs),
            }
        })
        .collect();
    Ok(SweepOutcome { cells, aggregates })
}

fn sweep(c: &SweepConfig, master: u64) -> Result<(Vec<Verdict>, Outcome)> {
    let outcome = sweep_cells(c, master)?;
    let mut verdicts = Vec::new();
    let failures: usize = outcome.aggregates.iter().map(|a| a.failures).sum();
    verdicts.push(Verdict::new("cells_completed", failures == 0, format!("{failures} failed cells")));
    if let Some(min) = c.min_pass_fraction {
        for a in &outcome.aggregates {
            let fraction = a.pass_fraction.unwrap_or(0.0);
            let name = match a.axis_value {
                Some(v) => format!("pass_fraction[{v}]"),
                None => "pass_fraction".to_string(),
            };
            verdicts.push(Verdict::new(&name, fraction >= min, format!("{fraction:.3} (minimum {min})")));
        }
    }
    Ok((verdicts, Outcome::Sweep(outcome)))
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes checkpoints as CSV: the fixed header, integer `k` and `steps`,
/// floats with 17 significant digits, and an empty `gap` cell where the
/// limit is unknown.
pub fn write_trajectory_csv<W: Write>(checkpoints: &[Checkpoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in checkpoints {
        w.write_record([
            c.k.to_string(),
            c.steps.to_string(),
            sci(c.q_p),
            c.gap.map(sci).unwrap_or_default(),
            sci(c.x1),
            sci(c.xk),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn trajectory_bytes(checkpoints: &[Checkpoint]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trajectory_csv(checkpoints, &mut buf)?;
    Ok(buf)
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn json_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

/// The summary as written to `summary.json`.
pub fn summary_bytes(record: &RunRecord) -> Vec<u8> {
    json_bytes(&record.summary())
}

/// Writes the record's files into `dir` and returns their paths.
pub fn emit_outputs(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    match &record.outcome {
        Outcome::Grow(g) => put("trajectory.csv", &trajectory_bytes(&g.trajectory.checkpoints)?)?,
        Outcome::Adversary(AdversaryOutcome {
            schedule: Some((initial, schedule)),
            ..
        }) => {
            // a committee config that replays the schedule
            let replayable = json!({
                "kind": "committee",
                "seed": record.config.seed,
                "committee": initial.to_serde(),
                "schedule": schedule.to_serde(),
            });
            put("schedule.json", &json_bytes(&replayable))?;
        }
        Outcome::Oracle(o) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["q", "f"])?;
            for &(q, f) in &o.table {
                w.write_record([sci(q), sci(f)])?;
            }
            put("oracle.csv", &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
        }
        Outcome::Sweep(s) => {
            let cells = dir.join("cells");
            fs::create_dir_all(&cells).map_err(|e| Error::Io(format!("{}: {e}", cells.display())))?;
            for cell in &s.cells {
                if let Some(t) = &cell.trajectory {
                    put(&format!("cells/cell-{:04}.csv", cell.index), &trajectory_bytes(&t.checkpoints)?)?;
                }
            }
        }
        _ => {}
    }
    put("summary.json", &summary_bytes(record))?;
    Ok(written)
}

/// Re-runs the experiment recorded in a `summary.json` (or the directory
/// holding one) and compares the regenerated files with the recorded ones.
pub fn replay_run(path: &Path) -> Result<RunRecord> {
    let summary_path = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let dir = summary_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::Io(format!("{}: {e}", summary_path.display())))?;
    let summary: Value = serde_json::from_str(&text).map_err(|e| Error::config("", e.to_string()))?;
    let echo = summary
        .get("config")
        .cloned()
        .ok_or_else(|| Error::config("config", "the summary has no config echo"))?;
    let config = crate::config::from_value(echo)?;
    let recorded_hash = summary.get("config_hash").and_then(Value::as_str).unwrap_or_default();

    let mut record = run_experiment(&config)?;
    let mut checks = vec![Verdict::new(
        "config_hash_matches",
        recorded_hash == config.hash(),
        format!("recorded {recorded_hash}"),
    )];
    checks.push(Verdict::new(
        "summary_identical",
        summary_bytes(&record) == text.as_bytes(),
        summary_path.display().to_string(),
    ));
    if let Outcome::Grow(g) = &record.outcome {
        let csv_path = dir.join("trajectory.csv");
        if let Ok(recorded) = fs::read(&csv_path) {
            checks.push(Verdict::new(
                "trajectory_identical",
                trajectory_bytes(&g.trajectory.checkpoints)? == recorded,
                csv_path.display().to_string(),
            ));
        }
    }
    record.verdicts.extend(checks);
    Ok(record)
}
