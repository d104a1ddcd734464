//! Admission rules for the growing group.
//!
//! Every rule sees the candidate pair plus one summary of the group: the
//! median (majority), the extremes (consensus) or a single quantile (veto and
//! custom quantile-driven rules). Exact ties always go to the left candidate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{check_opinion, GroupState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    AdmitLeft,
    AdmitRight,
    AdmitNone,
}

impl Decision {
    pub fn admits(self) -> bool {
        !matches!(self, Decision::AdmitNone)
    }
}

/// Two candidates, stored so that `y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    y1: f64,
    y2: f64,
}

impl CandidatePair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_opinion(a)?;
        check_opinion(b)?;
        Ok(Self::ordered(a, b))
    }

    #[inline]
    pub(crate) fn ordered(a: f64, b: f64) -> Self {
        if a <= b {
            Self { y1: a, y2: b }
        } else {
            Self { y1: b, y2: a }
        }
    }

    #[inline]
    pub fn left(&self) -> f64 {
        self.y1
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.y2
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        (self.y1 + self.y2) / 2.0
    }

    /// The opinion a decision admits, if any.
    pub fn admitted(&self, decision: Decision) -> Option<f64> {
        match decision {
            Decision::AdmitLeft => Some(self.y1),
            Decision::AdmitRight => Some(self.y2),
            Decision::AdmitNone => None,
        }
    }
}

pub fn majority_decide(median: f64, pair: CandidatePair) -> Decision {
    if (median - pair.y1).abs() <= (pair.y2 - median).abs() {
        Decision::AdmitLeft
    } else {
        Decision::AdmitRight
    }
}

pub fn consensus_decide(min_member: f64, max_member: f64, pair: CandidatePair) -> Decision {
    let mid = pair.midpoint();
    if mid >= max_member {
        Decision::AdmitLeft
    } else if mid < min_member {
        Decision::AdmitRight
    } else {
        Decision::AdmitNone
    }
}

pub fn veto_decide(q_threshold: f64, pair: CandidatePair) -> Decision {
    if pair.midpoint() < q_threshold {
        Decision::AdmitRight
    } else {
        Decision::AdmitNone
    }
}

/// A user-supplied rule that may only look at `q_p` and the pair.
pub trait QuantileDecider: Send + Sync {
    fn decide(&self, q_p: f64, pair: CandidatePair) -> Decision;
}

impl<F> QuantileDecider for F
where
    F: Fn(f64, CandidatePair) -> Decision + Send + Sync,
{
    fn decide(&self, q_p: f64, pair: CandidatePair) -> Decision {
        self(q_p, pair)
    }
}

#[derive(Clone)]
pub enum RuleKind {
    Majority,
    Consensus,
    Veto { r: f64 },
    QuantileDriven { p: f64, decider: Arc<dyn QuantileDecider> },
}

impl fmt::Debug for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Majority => f.write_str("Majority"),
            RuleKind::Consensus => f.write_str("Consensus"),
            RuleKind::Veto { r } => f.debug_struct("Veto").field("r", r).finish(),
            RuleKind::QuantileDriven { p, .. } => f.debug_struct("QuantileDriven").field("p", p).finish_non_exhaustive(),
        }
    }
}

/// A rule together with the smoothness constants used to certify it.
#[derive(Debug, Clone)]
pub struct RuleSpec {
    kind: RuleKind,
    c1: f64,
    c2: f64,
}

impl RuleSpec {
    pub fn majority() -> Self {
        Self {
            kind: RuleKind::Majority,
            c1: 1.0,
            c2: 2.0,
        }
    }

    pub fn consensus() -> Self {
        Self {
            kind: RuleKind::Consensus,
            c1: 1.0,
            c2: 2.0,
        }
    }

    pub fn veto(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!("veto parameter r = {r} outside (0, 1)")));
        }
        Ok(Self {
            kind: RuleKind::Veto { r },
            c1: 1.0,
            c2: 4.0,
        })
    }

    pub fn quantile_driven(p: f64, decider: Arc<dyn QuantileDecider>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("quantile level p = {p} outside [0, 1]")));
        }
        Ok(Self {
            kind: RuleKind::QuantileDriven { p, decider },
            c1: 1.0,
            c2: 2.0,
        })
    }

    pub fn with_constants(mut self, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::domain(format!("smoothness constants must be positive, got ({c1}, {c2})")));
        }
        self.c1 = c1;
        self.c2 = c2;
        Ok(self)
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// The driving quantile: `1/2` for majority and consensus, `1 − r` for veto.
    pub fn p(&self) -> f64 {
        match &self.kind {
            RuleKind::Majority | RuleKind::Consensus => 0.5,
            RuleKind::Veto { r } => 1.0 - r,
            RuleKind::QuantileDriven { p, .. } => *p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RuleKind::Majority => "majority",
            RuleKind::Consensus => "consensus",
            RuleKind::Veto { .. } => "veto",
            RuleKind::QuantileDriven { .. } => "quantile-driven",
        }
    }

    /// Reads the summary this rule needs off the group.
    pub fn summarize(&self, group: &GroupState) -> Result<Summary> {
        if group.is_empty() {
            return Err(Error::state("admission decision on an empty group"));
        }
        Ok(match &self.kind {
            RuleKind::Majority => Summary::Median(group.median()?),
            RuleKind::Consensus => Summary::Extremes {
                min: group.min().expect("non-empty"),
                max: group.max().expect("non-empty"),
            },
            RuleKind::Veto { .. } | RuleKind::QuantileDriven { .. } => Summary::Quantile(group.quantile(self.p())?),
        })
    }

    /// Decision from a precomputed summary.
    ///
    /// A summary of the wrong shape is a state error.
    pub fn decide_with(&self, summary: Summary, pair: CandidatePair) -> Result<Decision> {
        match (&self.kind, summary) {
            (RuleKind::Majority, Summary::Median(m)) => Ok(majority_decide(m, pair)),
            (RuleKind::Consensus, Summary::Extremes { min, max }) => Ok(consensus_decide(min, max, pair)),
            (RuleKind::Veto { .. }, Summary::Quantile(q)) => Ok(veto_decide(q, pair)),
            (RuleKind::QuantileDriven { decider, .. }, Summary::Quantile(q)) => Ok(decider.decide(q, pair)),
            (_, summary) => Err(Error::state(format!("{} rule cannot use summary {summary:?}", self.name()))),
        }
    }

    pub fn decide(&self, group: &GroupState, pair: CandidatePair) -> Result<Decision> {
        let summary = self.summarize(group)?;
        self.decide_with(summary, pair)
    }
}

/// The only view of the group a rule is allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Summary {
    Median(f64),
    Extremes { min: f64, max: f64 },
    Quantile(f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: f64, b: f64) -> CandidatePair {
        CandidatePair::new(a, b).unwrap()
    }

    #[test]
    fn pair_normalizes() {
        let p = pair(0.9, 0.1);
        assert_eq!((p.left(), p.right()), (0.1, 0.9));
        assert!(CandidatePair::new(0.2, 1.2).is_err());
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_decide(0.4, pair(0.3, 0.6)), Decision::AdmitLeft);
        assert_eq!(majority_decide(0.5, pair(0.4, 0.6)), Decision::AdmitLeft);
        assert_eq!(majority_decide(0.1, pair(0.5, 0.9)), Decision::AdmitLeft);
        assert_eq!(majority_decide(0.8, pair(0.5, 0.9)), Decision::AdmitRight);
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_decide(0.4, 0.6, pair(0.1, 0.15)), Decision::AdmitRight);
        assert_eq!(consensus_decide(0.4, 0.6, pair(0.3, 0.7)), Decision::AdmitNone);
        assert_eq!(consensus_decide(0.4, 0.6, pair(0.7, 0.9)), Decision::AdmitLeft);
        // midpoint exactly on the top member: weak preference admits left
        assert_eq!(consensus_decide(0.4, 0.6, pair(0.5, 0.7)), Decision::AdmitLeft);
    }

    #[test]
    fn veto_examples() {
        assert_eq!(veto_decide(0.6, pair(0.3, 0.7)), Decision::AdmitRight);
        assert_eq!(veto_decide(0.6, pair(0.5, 0.9)), Decision::AdmitNone);
        assert_eq!(veto_decide(0.6, pair(0.6, 0.6)), Decision::AdmitNone);
    }

    #[test]
    fn decide_dispatch_examples() {
        let g = GroupState::from_opinions([0.1, 0.5, 0.9]).unwrap();
        assert_eq!(RuleSpec::majority().decide(&g, pair(0.45, 0.95)).unwrap(), Decision::AdmitLeft);

        // q_{0.75} of {0.1, 0.3, 0.7, 0.9} is the third member
        let g = GroupState::from_opinions([0.1, 0.3, 0.7, 0.9]).unwrap();
        let veto = RuleSpec::veto(0.25).unwrap();
        assert_eq!(g.quantile(veto.p()).unwrap(), 0.7);
        assert_eq!(veto.decide(&g, pair(0.2, 0.9)).unwrap(), Decision::AdmitRight);

        let g = GroupState::from_opinions([0.5]).unwrap();
        assert_eq!(RuleSpec::consensus().decide(&g, pair(0.1, 0.2)).unwrap(), Decision::AdmitRight);

        assert!(matches!(
            RuleSpec::majority().decide(&GroupState::new(), pair(0.1, 0.2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn custom_rule_sees_only_quantile() {
        let rule = RuleSpec::quantile_driven(
            0.5,
            Arc::new(|q: f64, pair: CandidatePair| {
                if pair.right() < q {
                    Decision::AdmitRight
                } else {
                    Decision::AdmitNone
                }
            }),
        )
        .unwrap();
        let g = GroupState::from_opinions([0.2, 0.6, 0.8]).unwrap();
        assert_eq!(rule.decide(&g, pair(0.1, 0.5)).unwrap(), Decision::AdmitRight);
        assert_eq!(rule.decide(&g, pair(0.1, 0.7)).unwrap(), Decision::AdmitNone);
        assert!(rule.decide_with(Summary::Median(0.5), pair(0.1, 0.2)).is_err());
    }

    #[test]
    fn veto_parameter_validated() {
        assert!(RuleSpec::veto(0.0).is_err());
        assert!(RuleSpec::veto(1.0).is_err());
        assert!(RuleSpec::veto(f64::NAN).is_err());
        assert_eq!(RuleSpec::veto(0.25).unwrap().p(), 0.75);
        assert!(RuleSpec::majority().with_constants(0.0, 1.0).is_err());
    }
}
