//! Deterministic replacement schedules for committees, and the checks that
//! certify them.
//!
//! Every schedule is built against a working copy of the committee and then
//! replayed from the initial state, so legality is verified twice by
//! [`Committee::try_replace`] and never assumed.

use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::committee::{drift_bound_check, shift_lemma_check, within_consensus_hull, Acceptance, Committee};
use crate::error::{Error, Result};
use crate::rational::{format_rational, int, parse_rational, round_dyadic, to_f64, Rational};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementStep {
    pub member_id: u64,
    pub y: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementSchedule {
    pub steps: Vec<ReplacementStep>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSerde {
    pub member_id: u64,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSerde {
    /// Where the schedule came from; hand-written ones default to `manual`.
    #[serde(default = "manual")]
    pub provenance: String,
    pub steps: Vec<StepSerde>,
}

fn manual() -> String {
    "manual".into()
}

impl ReplacementSchedule {
    fn new(provenance: &str) -> Self {
        Self {
            steps: Vec::new(),
            provenance: provenance.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_serde(&self) -> ScheduleSerde {
        ScheduleSerde {
            provenance: self.provenance.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| StepSerde {
                    member_id: s.member_id,
                    y: format_rational(&s.y),
                })
                .collect(),
        }
    }

    pub fn from_serde(s: &ScheduleSerde) -> Result<Self> {
        let steps = s
            .steps
            .iter()
            .map(|st| {
                Ok(ReplacementStep {
                    member_id: st.member_id,
                    y: parse_rational(&st.y)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            steps,
            provenance: s.provenance.clone(),
        })
    }

    /// Applies one step to `working`, recording it, or fails with the step index.
    fn push(&mut self, working: &mut Committee, member_id: u64, y: Rational) -> Result<()> {
        let step = self.steps.len();
        let i = working
            .index_of(member_id)
            .ok_or_else(|| Error::construction(format!("step {step}: member {member_id} is not in the committee")))?;
        let votes = working.vote_count(i, &y)?;
        if !working.try_replace(i, y.clone())? {
            return Err(Error::construction(format!(
                "step {step}: replacing member {member_id} by {y} got {votes} votes, {} needed",
                working.threshold()
            )));
        }
        self.steps.push(ReplacementStep { member_id, y });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub final_state: Committee,
    /// Supporters of each step, in order.
    pub votes: Vec<usize>,
}

impl ReplayReport {
    pub fn min_votes(&self) -> Option<usize> {
        self.votes.iter().copied().min()
    }

    /// Whether none of the ids `0..n` of the initial members remain.
    pub fn originals_removed(&self, initial: &Committee) -> bool {
        let original: HashSet<u64> = initial.ids().collect();
        self.final_state.ids().all(|id| !original.contains(&id))
    }
}

/// Replays `schedule` from `initial`; any rejected step or unknown member id
/// is a construction error naming the step.
pub fn replay(initial: &Committee, schedule: &ReplacementSchedule) -> Result<ReplayReport> {
    replay_with(initial, schedule, |_, _| Ok(()))
}

/// [`replay`] with a hook seeing the states before and after each step.
pub fn replay_with(
    initial: &Committee,
    schedule: &ReplacementSchedule,
    mut hook: impl FnMut(&Committee, &Committee) -> Result<()>,
) -> Result<ReplayReport> {
    let mut state = initial.clone();
    let mut votes = Vec::with_capacity(schedule.len());
    for (step, s) in schedule.steps.iter().enumerate() {
        let i = state
            .index_of(s.member_id)
            .ok_or_else(|| Error::construction(format!("step {step}: member {} is not in the committee", s.member_id)))?;
        let v = state.vote_count(i, &s.y)?;
        let (accepted, next) = state.replace_attempt(i, &s.y)?;
        if !accepted {
            return Err(Error::construction(format!(
                "step {step}: {v} votes for replacing member {} by {}, {} needed",
                s.member_id,
                s.y,
                state.threshold()
            )));
        }
        hook(&state, &next)?;
        votes.push(v);
        state = next;
    }
    Ok(ReplayReport {
        final_state: state,
        votes,
    })
}

fn require_distinct(c: &Committee) -> Result<()> {
    let vals: Vec<&Rational> = c.values().collect();
    if vals.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::precondition("all opinions must be distinct"));
    }
    Ok(())
}

fn rat(n: usize) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Moves the median of a simple-majority committee right by at least
/// `target`.
///
/// The members below and above the median are first pulled into an
/// arithmetic progression of step `ε` around it, where `ε` is half of
/// `min(M − x_k, x_{k+2} − M)/k`; a profile that already is an arithmetic
/// progression is used as is, with its own step. Then the smallest member is
/// repeatedly replaced by `x_n + ε`, which moves the median by `ε` each time.
pub fn arithmetic_drift_schedule(initial: &Committee, target: &Rational) -> Result<ReplacementSchedule> {
    if initial.ell() != 0 {
        return Err(Error::precondition(format!("ℓ = 0 (got ℓ = {})", initial.ell())));
    }
    if initial.n().is_multiple_of(2) || initial.n() < 3 {
        return Err(Error::precondition(format!("odd n ≥ 3 (got n = {})", initial.n())));
    }
    require_distinct(initial)?;
    let mut schedule = ReplacementSchedule::new("arithmetic_drift");
    if !target.is_positive() {
        return Ok(schedule);
    }
    let n = initial.n();
    let k = initial.k();
    let m0 = initial.median()?.clone();
    let mut working = initial.clone();

    let step0 = initial.value(1) - initial.value(0);
    let is_progression = (1..n).all(|i| initial.value(i) - initial.value(i - 1) == step0);
    let eps = if is_progression {
        step0
    } else {
        let below = (&m0 - initial.value(k - 1)) / rat(k);
        let above = (initial.value(k + 1) - &m0) / rat(k);
        let eps = below.min(above) / rat(2);
        let ids: Vec<u64> = initial.ids().collect();
        // x_i ↦ M − εi and x_{k+1+i} ↦ M + εi for 1 ≤ i ≤ k
        for (pos, &id) in ids.iter().enumerate().take(k) {
            schedule.push(&mut working, id, &m0 - &eps * rat(pos + 1))?;
        }
        for (pos, &id) in ids.iter().enumerate().skip(k + 1) {
            schedule.push(&mut working, id, &m0 + &eps * rat(pos - k))?;
        }
        eps
    };

    while working.median()? - &m0 < *target {
        let id = working.members()[0].id;
        let y = working.max() + &eps;
        schedule.push(&mut working, id, y)?;
    }
    Ok(schedule)
}

fn geometric_residual(k: usize, ell: usize, delta: f64) -> f64 {
    let r = 1.0 - delta;
    let near: f64 = (0..=k - ell).map(|i| r.powi(i as i32)).sum();
    let far: f64 = (k - ell + 1..=2 * k).map(|i| r.powi(i as i32)).sum();
    near - far
}

fn check_geometric_params(k: usize, ell: usize) -> Result<()> {
    if ell == 0 || ell > k {
        return Err(Error::domain(format!("need 1 ≤ ℓ ≤ k (k = {k}, ℓ = {ell})")));
    }
    Ok(())
}

/// The `δ ∈ (0, 1)` with `Σ_{i=0}^{k−ℓ} (1−δ)^i = Σ_{i=k−ℓ+1}^{2k} (1−δ)^i`,
/// by bisection.
pub fn solve_geometric_delta(k: usize, ell: usize) -> Result<f64> {
    check_geometric_params(k, ell)?;
    // the difference is 1 − 2ℓ < 0 at δ = 0 and 1 at δ = 1
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if geometric_residual(k, ell, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let residual = geometric_residual(k, ell, delta);
    if !(delta > 0.0 && delta < 1.0) || residual.abs() > 1e-12 {
        return Err(Error::construction(format!(
            "no root in (0, 1) for k = {k}, ℓ = {ell} (δ = {delta}, residual = {residual})"
        )));
    }
    Ok(delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessRun {
    pub k: usize,
    pub ell: usize,
    /// The float root of the equidistance equation.
    pub delta_root: f64,
    /// The dyadic `δ` actually used (at least the root).
    pub delta: Rational,
    pub initial: Committee,
    pub schedule: ReplacementSchedule,
    /// Final minus initial value of `x_{k−ℓ+2}`.
    pub displacement: Rational,
    /// `D·k/(2ℓ − 1)`.
    pub bound: Rational,
    pub bound_ratio: f64,
    /// The drift bound held after every step.
    pub drift_bound_held: bool,
    /// Smallest `x_{k−ℓ+2} − (x_1 + y)/2` over the steps: how far the
    /// deciding voter was from indifference.
    pub min_margin: f64,
    /// Upper bound on how far any point is from the untruncated progression.
    pub truncation_bound: f64,
}

impl TightnessRun {
    pub fn margin_exceeds_truncation(&self) -> bool {
        self.min_margin > self.truncation_bound
    }
}

/// Bits of the dyadic grid `δ` is rounded up to.
const DELTA_BITS: u32 = 32;
/// The run stops once the next spacing falls below `2^-STOP_BITS`.
const STOP_BITS: u32 = 40;
/// Spacings are truncated to multiples of `2^-SPACING_BITS`.
const SPACING_BITS: u32 = 128;

fn truncate_dyadic(x: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    Rational::new((x * Rational::from_integer(scale.clone())).floor().to_integer(), scale)
}

/// Drives `x_{k−ℓ+2}` as far right as the geometric construction allows.
///
/// The profile is `x_1 = 0`, `x_{i+1} − x_i = (1−δ)^{i−1}` for `i ≤ 2k`, with
/// `δ` the equidistance root rounded up to a dyadic rational (one grid unit
/// beyond the first one where the equidistance inequality holds exactly).
/// Each spacing is the previous one times `1 − δ`, truncated to `2^-128`.
/// Each step replaces the smallest member by the next point of the
/// progression. Every state is checked against the drift bound.
pub fn geometric_tightness_run(k: usize, ell: usize) -> Result<TightnessRun> {
    check_geometric_params(k, ell)?;
    let delta_root = solve_geometric_delta(k, ell)?;
    let unit = Rational::new(BigInt::one(), BigInt::one() << DELTA_BITS);
    let mut delta = Rational::from_integer(BigInt::from((delta_root * (1u64 << DELTA_BITS) as f64).ceil() as u64)) * &unit;
    let exact_holds = |delta: &Rational| {
        let r = Rational::one() - delta;
        let mut pow = Rational::one();
        let (mut near, mut far) = (Rational::zero(), Rational::zero());
        for i in 0..=2 * k {
            if i <= k - ell {
                near += &pow;
            } else {
                far += &pow;
            }
            pow *= &r;
        }
        near >= far
    };
    let mut nudges = 0;
    while !exact_holds(&delta) {
        delta += &unit;
        nudges += 1;
        if nudges > 1000 {
            return Err(Error::construction(format!("dyadic δ for k = {k}, ℓ = {ell} did not settle")));
        }
    }
    delta += &unit;
    let r = Rational::one() - &delta;

    let mut values = Vec::with_capacity(2 * k + 1);
    let mut x = Rational::zero();
    let mut spacing = Rational::one();
    values.push(x.clone());
    for _ in 0..2 * k {
        x += &spacing;
        values.push(x.clone());
        spacing = truncate_dyadic(&(&spacing * &r), SPACING_BITS);
    }
    let initial = Committee::new(values, ell)?;
    let tracked = k + 1 - ell;
    let stop = Rational::new(BigInt::one(), BigInt::one() << STOP_BITS);

    let mut schedule = ReplacementSchedule::new("geometric_tightness");
    let mut working = initial.clone();
    let mut drift_bound_held = true;
    let mut min_margin: Option<Rational> = None;
    let mut truncations = 2 * k;
    while spacing >= stop {
        x += &spacing;
        spacing = truncate_dyadic(&(&spacing * &r), SPACING_BITS);
        truncations += 1;
        let margin = working.value(tracked) - (working.min() + &x) / rat(2);
        if min_margin.as_ref().is_none_or(|m| margin < *m) {
            min_margin = Some(margin);
        }
        let id = working.members()[0].id;
        schedule.push(&mut working, id, x.clone())?;
        drift_bound_held &= drift_bound_check(&initial, &working)?.holds();
    }
    // each spacing is off by less than one unit per truncation so far, and a
    // point is a sum of at most `truncations` spacings
    let unit_err = (truncations as f64).powi(2) * 2f64.powi(-(SPACING_BITS as i32));

    let displacement = working.value(tracked) - initial.value(tracked);
    let bound = (initial.max() - initial.min()) * rat(k) / rat(2 * ell - 1);
    let bound_ratio = to_f64(&(&displacement / &bound));
    Ok(TightnessRun {
        k,
        ell,
        delta_root,
        delta,
        initial,
        schedule,
        displacement,
        bound,
        bound_ratio,
        drift_bound_held,
        min_margin: min_margin.as_ref().map_or(f64::INFINITY, to_f64),
        truncation_bound: unit_err,
    })
}

/// Two clusters around an isolated median, `n = 4k + 3`, threshold `3k+2+ℓ`.
///
/// The left cluster is `2k+1` points spread evenly over `[0, d]`, the median
/// sits `Dk/(2ℓ−1) + max(d, D)` to its right and the right cluster of width
/// `D` starts the same distance beyond the median.
pub fn immunity_config(k: usize, ell: usize, d: &Rational, big_d: &Rational) -> Result<Committee> {
    if k == 0 || ell == 0 || ell > k {
        return Err(Error::domain(format!("need 1 ≤ ℓ ≤ k (k = {k}, ℓ = {ell})")));
    }
    if !d.is_positive() || !big_d.is_positive() {
        return Err(Error::domain("cluster widths must be positive"));
    }
    let gap = big_d * rat(k) / rat(2 * ell - 1) + d.max(big_d).clone();
    let median = d + &gap;
    let right = &median + &gap;
    let mut values: Vec<Rational> = (0..=2 * k).map(|i| d * rat(i) / rat(2 * k)).collect();
    values.push(median);
    values.extend((0..=2 * k).map(|i| &right + big_d * rat(i) / rat(2 * k)));
    Committee::new(values, k + 1 + ell)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Irreplaceability {
    /// No candidate other than the member itself gathers the threshold.
    pub irreplaceable: bool,
    pub max_votes: usize,
    /// A candidate attaining `max_votes`.
    pub witness: Option<Rational>,
}

/// The most votes any candidate `y ≠ x_i` can get against member `i`.
///
/// The vote count is constant between consecutive reflections `2x_j − x_i`,
/// so it is evaluated at each reflection, between consecutive ones and
/// beyond both ends. `y = x_i` (re-electing the member) is left out.
pub fn one_step_irreplaceable(committee: &Committee, i: usize) -> Result<Irreplaceability> {
    let xi = committee.value(i).clone();
    let mut points: Vec<Rational> = committee
        .values()
        .map(|x| x * rat(2) - &xi)
        .chain(std::iter::once(xi.clone()))
        .collect();
    points.sort();
    points.dedup();
    let mut candidates = Vec::with_capacity(2 * points.len() + 2);
    candidates.push(&points[0] - Rational::one());
    for w in points.windows(2) {
        candidates.push(w[0].clone());
        candidates.push((&w[0] + &w[1]) / rat(2));
    }
    candidates.push(points[points.len() - 1].clone());
    candidates.push(&points[points.len() - 1] + Rational::one());

    let mut max_votes = 0;
    let mut witness = None;
    for y in candidates.into_iter().filter(|y| *y != xi) {
        let v = committee.vote_count(i, &y)?;
        if witness.is_none() || v > max_votes {
            max_votes = v;
            witness = Some(y);
        }
    }
    Ok(Irreplaceability {
        irreplaceable: max_votes < committee.threshold(),
        max_votes,
        witness,
    })
}

/// One left-to-right sweep. At stage `j` the `j` smallest members form an
/// arithmetic progression ending at `x_j`; the smallest one repeatedly jumps
/// to the top plus `δ_j = (x_{j+1} − x_j)/m_j` until the progression ends at
/// `x_{j+1}`, which removes `x_j`. `m_j` is `j + 2`, or larger when needed to
/// keep `δ_j ≤ δ_{j−1}`: with spacings that never grow towards the top, at
/// least half of the progression stays above each midpoint.
fn sweep_left(
    working: &mut Committee,
    schedule: &mut ReplacementSchedule,
    stages: usize,
    remaining: &dyn Fn(&Committee) -> bool,
) -> Result<()> {
    let mut prev: Option<Rational> = None;
    for j in 1..=stages {
        if !remaining(working) {
            break;
        }
        let xj = working.value(j - 1).clone();
        let gap = working.value(j) - &xj;
        let mut m = j + 2;
        if let Some(prev) = &prev {
            let needed = (&gap / prev).ceil().to_integer();
            m = m.max(usize::try_from(needed).map_err(|_| Error::construction("stage step count overflow"))?);
        }
        let delta = gap / rat(m);
        for s in 1..m {
            let id = working.members()[0].id;
            schedule.push(working, id, &xj + &delta * rat(s))?;
        }
        prev = Some(delta);
    }
    Ok(())
}

/// Replaces every original member of a `4k+3` committee whose threshold is
/// at most `3k+2`: stages `1..=2k+2` sweep the left side up to and including
/// the median, and the mirrored process sweeps the right side.
pub fn removal_schedule(initial: &Committee) -> Result<ReplacementSchedule> {
    let n = initial.n();
    if n < 3 || n % 4 != 3 {
        return Err(Error::precondition(format!("n = 4k + 3 (got n = {n})")));
    }
    let k = (n - 3) / 4;
    if initial.threshold() > 3 * k + 2 {
        return Err(Error::unsupported(format!(
            "threshold {} ≥ 3k + 3 = {}: removal is not possible in this phase",
            initial.threshold(),
            3 * k + 3
        )));
    }
    require_distinct(initial)?;
    let original: HashSet<u64> = initial.ids().collect();
    let remaining = |c: &Committee| c.ids().any(|id| original.contains(&id));

    let mut schedule = ReplacementSchedule::new("removal");
    let mut working = initial.clone();
    sweep_left(&mut working, &mut schedule, 2 * k + 2, &remaining)?;

    let mut mirror = working.reflected();
    let mut mirrored = ReplacementSchedule::new("removal");
    sweep_left(&mut mirror, &mut mirrored, 2 * k + 2, &remaining)?;
    for s in mirrored.steps {
        schedule.push(&mut working, s.member_id, -s.y)?;
    }
    if remaining(&working) {
        return Err(Error::construction("original members remain after both sweeps"));
    }
    Ok(schedule)
}

/// Finest grid a random candidate is rounded to.
const FUZZ_GRID_BITS: i64 = 60;

/// `y` rounded to a dyadic grid about `2^-bits` times `width`, but never
/// finer than `2^-60`, so that denominators stay bounded while members
/// crowd together.
fn round_relative(y: &Rational, width: &Rational, bits: u32) -> Rational {
    let scale = if width.is_zero() {
        0
    } else {
        width.numer().bits() as i64 - width.denom().bits() as i64
    };
    round_dyadic(y, (bits as i64 - scale).clamp(0, FUZZ_GRID_BITS) as u32)
}

fn unit_fraction(rng: &mut SimRng) -> Rational {
    Rational::new(BigInt::from(rng.below(1 << 20)), BigInt::one() << 20u32)
}

/// A random replacement attempt: a member index and a candidate on a dyadic
/// grid `bits` below the scale it was drawn at.
///
/// Half of the candidates are `x_i + u·2(x_j − x_i)` for another member `j`,
/// which is where the vote count changes; the rest are uniform over the hull
/// widened by its diameter.
pub fn random_attempt(committee: &Committee, rng: &mut SimRng, bits: u32) -> (usize, Rational) {
    let n = committee.n() as u64;
    let i = rng.below(n) as usize;
    let xi = committee.value(i);
    let u = unit_fraction(rng);
    let (y, width) = if n > 1 && rng.below(2) == 0 {
        let mut j = rng.below(n - 1) as usize;
        if j >= i {
            j += 1;
        }
        let reach = (committee.value(j) - xi) * rat(2);
        (xi + u * &reach, reach.abs())
    } else {
        let span = committee.max() - committee.min();
        let span = if span.is_zero() { Rational::one() } else { span };
        (committee.min() - &span + u * rat(3) * &span, span)
    };
    (i, round_relative(&y, &width, bits))
}

/// A random replacement that the committee accepts: the first member from a
/// random starting index whose acceptance interval, clipped to the current
/// hull, is not a single point, and a candidate drawn from it (rounded as in
/// [`random_attempt`] and pulled back inside if rounding pushed it out).
pub fn random_accepted(committee: &Committee, rng: &mut SimRng, bits: u32) -> Result<(usize, Rational)> {
    let n = committee.n();
    let first = rng.below(n as u64) as usize;
    let mut pick = None;
    for offset in 0..n {
        let i = (first + offset) % n;
        match committee.acceptance_interval(i)? {
            Acceptance::Everyone => return Ok(random_attempt(committee, rng, bits)),
            Acceptance::Nobody => {}
            Acceptance::Interval(lo, hi) => {
                let (lo, hi) = (lo.max(committee.min().clone()), hi.min(committee.max().clone()));
                if lo < hi {
                    pick = Some((i, lo, hi));
                    break;
                }
            }
        }
    }
    let Some((i, lo, hi)) = pick else {
        return Ok((first, committee.value(first).clone()));
    };
    let width = &hi - &lo;
    let y = round_relative(&(&lo + unit_fraction(rng) * &width), &width, bits);
    let y = if y < lo || y > hi { committee.value(i).clone() } else { y };
    Ok((i, y))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImmunityFuzz {
    pub accepted: usize,
    pub attempts: usize,
    pub episodes: usize,
    /// The median member stayed one-step irreplaceable after every step.
    pub irreplaceable_throughout: bool,
    /// Largest vote count any candidate could get against it.
    pub max_votes_seen: usize,
    /// Experimental: it also stayed the median.
    pub stayed_median: bool,
}

#[derive(Default)]
struct ImmunityMonitor {
    watched: u64,
    checks: usize,
    failures: usize,
    max_votes_seen: usize,
    left_median: bool,
}

impl ImmunityMonitor {
    fn watch(&mut self, state: &Committee) -> Result<()> {
        self.checks += 1;
        let Some(i) = state.index_of(self.watched) else {
            self.failures += 1;
            return Ok(());
        };
        let verdict = one_step_irreplaceable(state, i)?;
        self.failures += usize::from(!verdict.irreplaceable);
        self.max_votes_seen = self.max_votes_seen.max(verdict.max_votes);
        self.left_median |= i != state.n() / 2;
        Ok(())
    }
}

impl FuzzMonitor for ImmunityMonitor {
    fn start(&mut self, initial: &Committee) -> Result<()> {
        self.watched = median_id(initial)?;
        self.watch(initial)
    }

    fn step(&mut self, _: &Committee, after: &Committee, _: &Rational) -> Result<()> {
        self.watch(after)
    }
}

/// Random accepted replacements on two-cluster configurations of
/// [`immunity_config`] with cluster widths drawn from `[1/4, 4]`, checking
/// after each one that the original median is still present and one-step
/// irreplaceable. Re-elections (`y = x_i`) are not drawn.
pub fn immunity_fuzz(k: usize, ell: usize, accepted: usize, episode: usize, rng: &mut SimRng) -> Result<ImmunityFuzz> {
    let mut m = ImmunityMonitor::default();
    let mut fresh = |rng: &mut SimRng| {
        let mut width = || Rational::new(BigInt::from(16 + rng.below(241)), BigInt::from(64));
        let (d, big_d) = (width(), width());
        immunity_config(k, ell, &d, &big_d)
    };
    let (accepted, attempts, episodes) = fuzz_episodes(&mut fresh, accepted, episode, rng, &mut m)?;
    Ok(ImmunityFuzz {
        accepted,
        attempts,
        episodes,
        irreplaceable_throughout: m.failures == 0,
        max_votes_seen: m.max_votes_seen,
        stayed_median: !m.left_median,
    })
}

/// Draws a candidate from the acceptance interval or, half of the time, from
/// [`random_attempt`]; re-elections come back as `None`.
fn fuzz_candidate(state: &Committee, rng: &mut SimRng) -> Result<Option<(usize, Rational)>> {
    let (i, y) = if rng.below(2) == 0 {
        random_accepted(state, rng, 24)?
    } else {
        random_attempt(state, rng, 24)
    };
    Ok((y != *state.value(i)).then_some((i, y)))
}

/// Exact checks attached to a fuzz run.
trait FuzzMonitor {
    fn start(&mut self, initial: &Committee) -> Result<()>;
    fn step(&mut self, before: &Committee, after: &Committee, y: &Rational) -> Result<()>;
}

/// Runs episodes from fresh committees until `accepted` replacements
/// went through. An episode ends after `episode` replacements, or early once
/// `patience` attempts in a row fail (random replacements tend to contract
/// the committee).
fn fuzz_episodes(
    fresh: &mut dyn FnMut(&mut SimRng) -> Result<Committee>,
    accepted: usize,
    episode: usize,
    rng: &mut SimRng,
    monitor: &mut dyn FuzzMonitor,
) -> Result<(usize, usize, usize)> {
    let patience = 50;
    let (mut total, mut attempts, mut episodes) = (0, 0, 0);
    while total < accepted {
        episodes += 1;
        let mut state = fresh(rng)?;
        monitor.start(&state)?;
        let (mut done, mut misses) = (0, 0);
        while done < episode && total < accepted && misses < patience {
            attempts += 1;
            let Some((i, y)) = fuzz_candidate(&state, rng)? else {
                misses += 1;
                continue;
            };
            if state.vote_count(i, &y)? < state.threshold() {
                misses += 1;
                continue;
            }
            let (_, next) = state.replace_attempt(i, &y)?;
            misses = 0;
            monitor.step(&state, &next, &y)?;
            state = next;
            done += 1;
            total += 1;
        }
        if done == 0 {
            return Err(Error::state(format!("a fresh committee accepted no replacement in {patience} attempts")));
        }
    }
    Ok((total, attempts, episodes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftFuzz {
    pub accepted: usize,
    pub attempts: usize,
    pub episodes: usize,
    pub drift_violations: usize,
    /// Accepted steps that moved the median.
    pub median_moves: usize,
    pub shift_violations: usize,
}

#[derive(Default)]
struct DriftMonitor {
    limits: Option<(Rational, Rational)>,
    drift_violations: usize,
    median_moves: usize,
    shift_violations: usize,
}

impl FuzzMonitor for DriftMonitor {
    fn start(&mut self, initial: &Committee) -> Result<()> {
        let v = drift_bound_check(initial, initial)?;
        self.limits = Some((v.upper_limit, v.lower_limit));
        Ok(())
    }

    fn step(&mut self, before: &Committee, after: &Committee, _: &Rational) -> Result<()> {
        let (upper, lower) = self.limits.as_ref().expect("episode started");
        let (k, ell) = (after.k(), after.ell());
        if after.value(k + 1 - ell) > upper || after.value(k + ell - 1) < lower {
            self.drift_violations += 1;
        }
        if before.median()? != after.median()? {
            self.median_moves += 1;
            self.shift_violations += usize::from(!shift_lemma_check(before, after)?.holds);
        }
        Ok(())
    }
}

/// Random accepted replacements on committees of `n` with surplus `ell`:
/// the drift bound is checked after every step and the shift inequality on
/// every step that moves the median, both exactly.
pub fn drift_fuzz(n: usize, ell: usize, accepted: usize, episode: usize, rng: &mut SimRng) -> Result<DriftFuzz> {
    let mut m = DriftMonitor::default();
    let (accepted, attempts, episodes) = fuzz_episodes(&mut |rng| random_distinct_committee(n, ell, 10, rng), accepted, episode, rng, &mut m)?;
    Ok(DriftFuzz {
        accepted,
        attempts,
        episodes,
        drift_violations: m.drift_violations,
        median_moves: m.median_moves,
        shift_violations: m.shift_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusFuzz {
    pub accepted: usize,
    pub attempts: usize,
    pub episodes: usize,
    /// Steps where `x_n + x_2 − x_1` increased.
    pub monotone_violations: usize,
    /// Steps where `x_1 + x_{n−1} − x_n` decreased.
    pub mirror_violations: usize,
    /// Admitted values outside `[x_1⁰ − D, x_n⁰ + D]`.
    pub hull_violations: usize,
}

#[derive(Default)]
struct ConsensusMonitor {
    last: Option<(Rational, Rational)>,
    monotone_violations: usize,
    mirror_violations: usize,
    hull_violations: usize,
}

impl FuzzMonitor for ConsensusMonitor {
    fn start(&mut self, initial: &Committee) -> Result<()> {
        self.last = Some((initial.consensus_monotone()?, initial.consensus_monotone_mirror()?));
        Ok(())
    }

    fn step(&mut self, _: &Committee, after: &Committee, y: &Rational) -> Result<()> {
        let (upper, lower) = self.last.take().expect("episode started");
        self.hull_violations += usize::from(!within_consensus_hull(after, y));
        let (u, l) = (after.consensus_monotone()?, after.consensus_monotone_mirror()?);
        self.monotone_violations += usize::from(u > upper);
        self.mirror_violations += usize::from(l < lower);
        self.last = Some((u, l));
        Ok(())
    }
}

/// Random accepted replacements on committees of `n` under the consensus
/// threshold `n − 1`, with the consensus quantities checked exactly.
pub fn consensus_fuzz(n: usize, accepted: usize, episode: usize, rng: &mut SimRng) -> Result<ConsensusFuzz> {
    let mut m = ConsensusMonitor::default();
    let (accepted, attempts, episodes) = fuzz_episodes(&mut |rng| random_distinct_committee(n, n / 2, 10, rng), accepted, episode, rng, &mut m)?;
    Ok(ConsensusFuzz {
        accepted,
        attempts,
        episodes,
        monotone_violations: m.monotone_violations,
        mirror_violations: m.mirror_violations,
        hull_violations: m.hull_violations,
    })
}

/// Which exact checks a committee fuzz run carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Monitors {
    pub drift: bool,
    pub consensus: bool,
    pub immunity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitteeFuzz {
    pub accepted: usize,
    pub attempts: usize,
    pub episodes: usize,
    pub drift: Option<DriftFuzz>,
    pub consensus: Option<ConsensusFuzz>,
    pub immunity: Option<ImmunityFuzz>,
}

impl CommitteeFuzz {
    /// No attached monitor saw a violation.
    pub fn passed(&self) -> bool {
        self.drift.as_ref().is_none_or(|d| d.drift_violations == 0 && d.shift_violations == 0)
            && self
                .consensus
                .as_ref()
                .is_none_or(|c| c.monotone_violations == 0 && c.mirror_violations == 0 && c.hull_violations == 0)
            && self.immunity.as_ref().is_none_or(|m| m.irreplaceable_throughout)
    }
}

struct Attached<'a>(Vec<&'a mut dyn FuzzMonitor>);

impl FuzzMonitor for Attached<'_> {
    fn start(&mut self, initial: &Committee) -> Result<()> {
        self.0.iter_mut().try_for_each(|m| m.start(initial))
    }

    fn step(&mut self, before: &Committee, after: &Committee, y: &Rational) -> Result<()> {
        self.0.iter_mut().try_for_each(|m| m.step(before, after, y))
    }
}

/// Random accepted replacements from a given committee, restarting from it
/// every `episode` replacements, with the chosen monitors attached.
///
/// The drift and immunity monitors need an odd committee, the drift monitor
/// also `1 ≤ ℓ ≤ k`.
pub fn committee_fuzz(
    initial: &Committee,
    monitors: Monitors,
    accepted: usize,
    episode: usize,
    rng: &mut SimRng,
) -> Result<CommitteeFuzz> {
    if monitors.drift || monitors.immunity {
        initial.median()?;
    }
    if monitors.drift && !(1..=initial.k()).contains(&initial.ell()) {
        return Err(Error::precondition(format!(
            "the drift monitor needs 1 ≤ ℓ ≤ k (ℓ = {}, k = {})",
            initial.ell(),
            initial.k()
        )));
    }
    let mut drift = DriftMonitor::default();
    let mut consensus = ConsensusMonitor::default();
    let mut immunity = ImmunityMonitor::default();
    let mut attached = Vec::<&mut dyn FuzzMonitor>::new();
    if monitors.drift {
        attached.push(&mut drift);
    }
    if monitors.consensus {
        attached.push(&mut consensus);
    }
    if monitors.immunity {
        attached.push(&mut immunity);
    }
    let (accepted, attempts, episodes) =
        fuzz_episodes(&mut |_| Ok(initial.clone()), accepted, episode, rng, &mut Attached(attached))?;
    Ok(CommitteeFuzz {
        accepted,
        attempts,
        episodes,
        drift: monitors.drift.then_some(DriftFuzz {
            accepted,
            attempts,
            episodes,
            drift_violations: drift.drift_violations,
            median_moves: drift.median_moves,
            shift_violations: drift.shift_violations,
        }),
        consensus: monitors.consensus.then_some(ConsensusFuzz {
            accepted,
            attempts,
            episodes,
            monotone_violations: consensus.monotone_violations,
            mirror_violations: consensus.mirror_violations,
            hull_violations: consensus.hull_violations,
        }),
        immunity: monitors.immunity.then_some(ImmunityFuzz {
            accepted,
            attempts,
            episodes,
            irreplaceable_throughout: immunity.failures == 0,
            max_votes_seen: immunity.max_votes_seen,
            stayed_median: !immunity.left_median,
        }),
    })
}

/// `n` distinct opinions drawn from the grid `2^-bits` in `[0, 1)`.
pub fn random_distinct_committee(n: usize, ell: usize, bits: u32, rng: &mut SimRng) -> Result<Committee> {
    if n as u64 > 1u64 << bits {
        return Err(Error::domain(format!("{n} distinct points do not fit on a 2^-{bits} grid")));
    }
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        seen.insert(rng.below(1 << bits));
    }
    let scale = BigInt::one() << bits;
    Committee::new(
        seen.into_iter().map(|v| Rational::new(BigInt::from(v), scale.clone())).collect(),
        ell,
    )
}

/// The id of the median member of an odd committee.
pub fn median_id(committee: &Committee) -> Result<u64> {
    committee.median()?;
    Ok(committee.members()[committee.n() / 2].id)
}

pub fn integer_committee(n: usize, ell: usize) -> Result<Committee> {
    Committee::new((1..=n).map(|v| int(v as i64)).collect(), ell)
}
