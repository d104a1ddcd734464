//! The growing-group process: draw a pair, ask the rule, maybe insert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupState;
use crate::oracles::{accept_any_veto, limit_quantile};
use crate::rng::SimRng;
use crate::rules::{CandidatePair, Decision, RuleKind, RuleSpec, Summary};

/// Two independent uniforms, ordered. Consumes exactly two draws.
#[inline]
pub fn draw_pair(rng: &mut SimRng) -> CandidatePair {
    let a = rng.uniform();
    let b = rng.uniform();
    CandidatePair::ordered(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step_index: u64,
    pub pair: CandidatePair,
    pub decision: Decision,
    pub admitted: Option<f64>,
}

/// One step on a bare group: draw, decide, insert.
pub fn step(group: &mut GroupState, rule: &RuleSpec, rng: &mut SimRng, step_index: u64) -> Result<StepRecord> {
    let summary = rule.summarize(group)?;
    let pair = draw_pair(rng);
    let decision = rule.decide_with(summary, pair)?;
    let admitted = pair.admitted(decision);
    if let Some(y) = admitted {
        group.insert(y)?;
    }
    Ok(StepRecord {
        step_index,
        pair,
        decision,
        admitted,
    })
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Stop once this many candidates have been admitted.
    Accepted(u64),
    /// Stop after this many raw steps.
    Steps(u64),
}

/// Geometric checkpoint sizes: `next = max(k + 1, ⌈growth · k⌉)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSchedule {
    pub growth: f64,
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        Self { growth: 1.05 }
    }
}

impl CheckpointSchedule {
    pub fn new(growth: f64) -> Result<Self> {
        if !(growth > 1.0 && growth.is_finite()) {
            return Err(Error::domain(format!("checkpoint growth {growth} must exceed 1")));
        }
        Ok(Self { growth })
    }

    pub fn next(&self, k: u64) -> u64 {
        let scaled = (self.growth * k as f64).ceil();
        let scaled = if scaled >= u64::MAX as f64 { u64::MAX } else { scaled as u64 };
        scaled.max(k + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: u64,
    pub steps: u64,
    pub q_p: f64,
    pub gap: Option<f64>,
    pub x1: f64,
    pub xk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// The quantile level recorded in `q_p` (the median for majority and consensus).
    pub p: f64,
    /// The limit the gap column measures against, when known.
    pub tau: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub admitted_log: Option<Vec<f64>>,
    pub steps: u64,
    pub accepted: u64,
    /// The step budget ran out before the accepted target was reached.
    pub exhausted: bool,
    /// Consensus admissions outside `[0, 2·x1] ∪ [2·xk − 1, 1]`; always zero for other rules.
    pub consensus_violations: u64,
}

/// How rejected steps are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every raw step draws a pair.
    #[default]
    Raw,
    /// Veto only. While the driving quantile `q` is fixed, the number of raw
    /// steps up to the next admission is geometric with success probability
    /// `accept_any_veto(q)`, and the admitted opinion has density
    /// proportional to `min(y, 2q − y)` on `[0, min(2q, 1)]`. Both are drawn
    /// directly, so stalled runs with tiny `q` stay cheap. The process law is
    /// unchanged but the draw sequence differs from [`Sampling::Raw`].
    Direct,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub schedule: CheckpointSchedule,
    pub log_admitted: bool,
    /// Hard cap on raw steps when the target counts admissions.
    pub max_steps: Option<u64>,
    pub sampling: Sampling,
}

/// A run in progress.
///
/// The rule's summary is cached between admissions, so rejected steps cost
/// two draws and a comparison.
pub struct Simulation {
    group: GroupState,
    rule: RuleSpec,
    rng: SimRng,
    opts: RunOptions,
    p: f64,
    tau: Option<f64>,
    summary: Summary,
    steps: u64,
    accepted: u64,
    next_checkpoint: u64,
    checkpoints: Vec<Checkpoint>,
    admitted_log: Option<Vec<f64>>,
    exhausted: bool,
    consensus_violations: u64,
}

impl Simulation {
    pub fn new(initial: GroupState, rule: RuleSpec, rng: SimRng, opts: RunOptions) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::state("a run needs a non-empty initial group"));
        }
        if opts.sampling == Sampling::Direct && !matches!(rule.kind(), RuleKind::Veto { .. }) {
            return Err(Error::unsupported(format!("direct sampling is only available for veto, not {}", rule.name())));
        }
        let summary = rule.summarize(&initial)?;
        let tau = limit_quantile(&rule);
        let p = rule.p();
        let admitted_log = opts.log_admitted.then(Vec::new);
        let mut sim = Self {
            next_checkpoint: opts.schedule.next(initial.len() as u64),
            group: initial,
            rule,
            rng,
            opts,
            p,
            tau,
            summary,
            steps: 0,
            accepted: 0,
            checkpoints: Vec::new(),
            admitted_log,
            exhausted: false,
            consensus_violations: 0,
        };
        sim.record_checkpoint();
        Ok(sim)
    }

    pub fn group(&self) -> &GroupState {
        &self.group
    }

    pub fn rule(&self) -> &RuleSpec {
        &self.rule
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    pub fn admitted_log(&self) -> Option<&[f64]> {
        self.admitted_log.as_deref()
    }

    /// Runs one raw step, or under direct sampling jumps to the next admission.
    ///
    /// Returns `None` only under direct sampling, when no admission can happen
    /// within the step budget (the budget is then marked exhausted).
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        let (pair, decision) = match self.opts.sampling {
            Sampling::Raw => {
                let pair = draw_pair(&mut self.rng);
                self.steps += 1;
                (pair, self.rule.decide_with(self.summary, pair)?)
            }
            Sampling::Direct => match self.jump_to_admission() {
                Some(pair) => (pair, Decision::AdmitRight),
                None => return Ok(None),
            },
        };
        let admitted = pair.admitted(decision);
        if let Some(y) = admitted {
            if let (RuleKind::Consensus, Summary::Extremes { min, max }) = (self.rule.kind(), self.summary) {
                if !(y <= 2.0 * min || y >= 2.0 * max - 1.0) {
                    self.consensus_violations += 1;
                }
            }
            self.group.insert(y)?;
            self.accepted += 1;
            if let Some(log) = self.admitted_log.as_mut() {
                log.push(y);
            }
            self.summary = self.rule.summarize(&self.group)?;
            if self.group.len() as u64 >= self.next_checkpoint {
                self.record_checkpoint();
            }
        }
        Ok(Some(StepRecord {
            step_index: self.steps - 1,
            pair,
            decision,
            admitted,
        }))
    }

    fn jump_to_admission(&mut self) -> Option<CandidatePair> {
        let Summary::Quantile(q) = self.summary else {
            unreachable!("direct sampling is restricted to veto")
        };
        let budget = self.opts.max_steps.unwrap_or(u64::MAX);
        let a = accept_any_veto(q).expect("quantile of opinions lies in [0, 1]");
        let wait = if a >= 1.0 {
            1.0
        } else if a <= 0.0 {
            f64::INFINITY
        } else {
            let u = 1.0 - self.rng.uniform();
            (u.ln() / (-a).ln_1p()).ceil().max(1.0)
        };
        if wait > (budget - self.steps) as f64 {
            self.steps = budget;
            self.exhausted = true;
            return None;
        }
        self.steps += wait as u64;
        let y2 = loop {
            let y = q * (self.rng.uniform() + self.rng.uniform());
            if y <= 1.0 {
                break y;
            }
        };
        let y1 = self.rng.uniform() * y2.min(2.0 * q - y2);
        Some(CandidatePair::ordered(y1, y2))
    }

    /// Steps until `target` (counted from the start of the run) is reached.
    /// `observer` sees the group after every admission.
    pub fn run_until<F>(&mut self, target: Target, mut observer: F) -> Result<()>
    where
        F: FnMut(&GroupState, &StepRecord),
    {
        let max_steps = self.opts.max_steps.unwrap_or(u64::MAX);
        loop {
            match target {
                Target::Accepted(n) if self.accepted >= n => return Ok(()),
                Target::Steps(n) if self.steps >= n => return Ok(()),
                _ => {}
            }
            if self.steps >= max_steps {
                self.exhausted = true;
                return Ok(());
            }
            match self.step()? {
                Some(record) if record.admitted.is_some() => observer(&self.group, &record),
                Some(_) => {}
                None => return Ok(()),
            }
        }
    }

    fn record_checkpoint(&mut self) {
        let k = self.group.len() as u64;
        if self.checkpoints.last().is_some_and(|c| c.k == k) {
            return;
        }
        let q_p = self.group.quantile(self.p).expect("non-empty group, p in [0, 1]");
        self.checkpoints.push(Checkpoint {
            k,
            steps: self.steps,
            q_p,
            gap: self.tau.map(|t| (q_p - t).abs()),
            x1: self.group.min().expect("non-empty"),
            xk: self.group.max().expect("non-empty"),
        });
        self.next_checkpoint = self.opts.schedule.next(k);
    }

    /// Closes the run, recording a final checkpoint at the current size.
    pub fn finish(mut self) -> (Trajectory, GroupState) {
        self.record_checkpoint();
        let trajectory = Trajectory {
            p: self.p,
            tau: self.tau,
            checkpoints: self.checkpoints,
            admitted_log: self.admitted_log,
            steps: self.steps,
            accepted: self.accepted,
            exhausted: self.exhausted,
            consensus_violations: self.consensus_violations,
        };
        (trajectory, self.group)
    }
}

/// Runs a whole process and returns its trajectory.
pub fn run(initial: GroupState, rule: RuleSpec, target: Target, rng: SimRng, opts: RunOptions) -> Result<Trajectory> {
    match target {
        Target::Accepted(0) | Target::Steps(0) => return Err(Error::domain("run target must be positive")),
        _ => {}
    }
    let mut sim = Simulation::new(initial, rule, rng, opts)?;
    sim.run_until(target, |_, _| {})?;
    Ok(sim.finish().0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts_logged() -> RunOptions {
        RunOptions {
            log_admitted: true,
            ..RunOptions::default()
        }
    }

    #[test]
    fn draw_pair_is_replayable_and_uses_two_draws() {
        let mut a = SimRng::new(5);
        let mut b = SimRng::new(5);
        assert_eq!(draw_pair(&mut a), draw_pair(&mut b));
        let mut c = SimRng::new(5);
        let u = c.uniform();
        let v = c.uniform();
        let mut d = SimRng::new(5);
        let pair = draw_pair(&mut d);
        assert_eq!((pair.left(), pair.right()), (u.min(v), u.max(v)));
        assert_eq!(c.next_u64(), d.next_u64());
    }

    #[test]
    fn draw_pair_moments() {
        let mut rng = SimRng::new(2024);
        let n = 1_000_000;
        let (mut s1, mut s2, mut below) = (0.0, 0.0, 0u32);
        for _ in 0..n {
            let p = draw_pair(&mut rng);
            s1 += p.left();
            s2 += p.right();
            below += u32::from(p.midpoint() < 0.5);
        }
        let n = n as f64;
        assert!((s1 / n - 1.0 / 3.0).abs() < 0.002);
        assert!((s2 / n - 2.0 / 3.0).abs() < 0.002);
        assert!((below as f64 / n - 0.5).abs() < 0.002);
    }

    #[test]
    fn majority_admits_every_step() {
        let mut group = GroupState::from_opinions([0.25]).unwrap();
        let mut rng = SimRng::new(1);
        let rule = RuleSpec::majority();
        for i in 0..1000 {
            let before = group.len();
            let rec = step(&mut group, &rule, &mut rng, i).unwrap();
            assert!(rec.admitted.is_some());
            assert_eq!(group.len(), before + 1);
        }
    }

    #[test]
    fn consensus_forced_pair_rejects() {
        let group = GroupState::from_opinions([0.4, 0.6]).unwrap();
        let rule = RuleSpec::consensus();
        let pair = CandidatePair::new(0.3, 0.7).unwrap();
        assert_eq!(rule.decide(&group, pair).unwrap(), Decision::AdmitNone);
    }

    #[test]
    fn majority_run_final_size() {
        let t = run(
            GroupState::from_opinions([0.25]).unwrap(),
            RuleSpec::majority(),
            Target::Accepted(10_000),
            SimRng::new(3),
            RunOptions::default(),
        )
        .unwrap();
        let last = t.checkpoints.last().unwrap();
        assert_eq!(last.k, 10_001);
        assert_eq!(t.steps, 10_000);
        assert!(t.checkpoints.windows(2).all(|w| w[0].k < w[1].k));
        assert_eq!(t.checkpoints[0].k, 1);
        assert!(t.checkpoints.iter().all(|c| c.gap.unwrap() >= 0.0));
    }

    #[test]
    fn veto_admits_only_right_candidates() {
        let mut sim = Simulation::new(
            GroupState::from_opinions([1.0]).unwrap(),
            RuleSpec::veto(0.75).unwrap(),
            SimRng::new(4),
            opts_logged(),
        )
        .unwrap();
        let mut records = Vec::new();
        while sim.accepted() < 1000 {
            let rec = sim.step().unwrap().unwrap();
            assert_ne!(rec.decision, Decision::AdmitLeft);
            if let Some(y) = rec.admitted {
                assert_eq!(y, rec.pair.right());
                records.push(y);
            }
        }
        assert_eq!(sim.admitted_log().unwrap(), &records[..]);
        assert_eq!(sim.group().len(), 1001);
    }

    #[test]
    fn replay_is_bit_identical() {
        let go = || {
            run(
                GroupState::from_opinions([0.5]).unwrap(),
                RuleSpec::consensus(),
                Target::Steps(20_000),
                SimRng::new(77),
                opts_logged(),
            )
            .unwrap()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn consensus_structural_invariant_and_size_accounting() {
        let t = run(
            GroupState::from_opinions([0.3, 0.7]).unwrap(),
            RuleSpec::consensus(),
            Target::Steps(50_000),
            SimRng::new(8),
            opts_logged(),
        )
        .unwrap();
        assert_eq!(t.consensus_violations, 0);
        assert_eq!(t.checkpoints.last().unwrap().k, 2 + t.accepted);
        assert_eq!(t.admitted_log.as_ref().unwrap().len() as u64, t.accepted);
        assert!(t.accepted < t.steps);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut sim = Simulation::new(
            GroupState::from_opinions([1.0]).unwrap(),
            RuleSpec::veto(0.75).unwrap(),
            SimRng::new(1),
            RunOptions {
                max_steps: Some(10),
                ..RunOptions::default()
            },
        )
        .unwrap();
        sim.run_until(Target::Accepted(1_000_000), |_, _| {}).unwrap();
        let (t, _) = sim.finish();
        assert!(t.exhausted);
        assert_eq!(t.steps, 10);
    }

    #[test]
    fn schedule_is_geometric() {
        let s = CheckpointSchedule::default();
        assert_eq!(s.next(1), 2);
        assert_eq!(s.next(20), 21);
        assert_eq!(s.next(100), 105);
        assert_eq!(s.next(1000), 1050);
        assert!(CheckpointSchedule::new(1.0).is_err());
    }
}
