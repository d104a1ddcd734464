//! Fixed-size committees with exact rational opinions.
//!
//! A member `x_i` is replaced by a candidate `y` when at least
//! `⌈(n−1)/2⌉ + ℓ` of the other members weakly prefer `y`, i.e.
//! `|x_j − y| ≤ |x_j − x_i|`. Indices in this module are 0-based positions in
//! the sorted profile; member ids are stable across replacements.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{abs_diff, format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub value: Rational,
    pub id: u64,
}

/// The candidates that win a replacement vote against one member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acceptance {
    /// Threshold 0.
    Everyone,
    /// The threshold exceeds `n − 1`; even re-electing the member fails.
    Nobody,
    /// The closed interval `[lo, hi]`, which contains `x_i`.
    Interval(Rational, Rational),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Committee {
    members: Vec<Member>,
    ell: usize,
    next_id: u64,
    initial_min: Rational,
    initial_max: Rational,
}

impl Committee {
    /// Members get ids `0..n` in increasing order of opinion.
    pub fn new(mut values: Vec<Rational>, ell: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("a committee needs at least one member"));
        }
        values.sort();
        let members: Vec<Member> = values
            .into_iter()
            .enumerate()
            .map(|(id, value)| Member { value, id: id as u64 })
            .collect();
        Ok(Self {
            initial_min: members[0].value.clone(),
            initial_max: members[members.len() - 1].value.clone(),
            next_id: members.len() as u64,
            members,
            ell,
        })
    }

    pub fn from_integers(values: &[i64], ell: usize) -> Result<Self> {
        Self::new(values.iter().map(|&v| crate::rational::int(v)).collect(), ell)
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// `(n − 1)/2`, rounded down.
    pub fn k(&self) -> usize {
        (self.n() - 1) / 2
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// The same profile and ids under a different supermajority surplus.
    pub fn with_ell(&self, ell: usize) -> Self {
        Self { ell, ..self.clone() }
    }

    pub fn threshold(&self) -> usize {
        (self.n() - 1).div_ceil(2) + self.ell
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn value(&self, i: usize) -> &Rational {
        &self.members[i].value
    }

    pub fn values(&self) -> impl Iterator<Item = &Rational> {
        self.members.iter().map(|m| &m.value)
    }

    pub fn min(&self) -> &Rational {
        &self.members[0].value
    }

    pub fn max(&self) -> &Rational {
        &self.members[self.n() - 1].value
    }

    pub fn initial_extremes(&self) -> (&Rational, &Rational) {
        (&self.initial_min, &self.initial_max)
    }

    pub fn initial_diameter(&self) -> Rational {
        &self.initial_max - &self.initial_min
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.members.iter().position(|m| m.id == id)
    }

    pub fn contains_id(&self, id: u64) -> bool {
        self.index_of(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.iter().map(|m| m.id)
    }

    /// The `x ↦ −x` image, keeping ids, ℓ and (reflected) initial extremes.
    pub fn reflected(&self) -> Self {
        let members = self
            .members
            .iter()
            .rev()
            .map(|m| Member {
                value: -m.value.clone(),
                id: m.id,
            })
            .collect();
        Self {
            members,
            ell: self.ell,
            next_id: self.next_id,
            initial_min: -self.initial_max.clone(),
            initial_max: -self.initial_min.clone(),
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::range(format!("member index {i} outside 0..{}", self.n())))
        }
    }

    fn require_odd(&self, what: &str) -> Result<()> {
        if self.n() % 2 == 1 {
            Ok(())
        } else {
            Err(Error::unsupported(format!("{what} is defined for odd committee sizes only (n = {})", self.n())))
        }
    }

    /// Members `j ≠ i` with `|x_j − y| ≤ |x_j − x_i|`.
    ///
    /// For `y > x_i` these are exactly the members at or above the midpoint
    /// `(x_i + y)/2`; for `y < x_i`, those at or below it.
    pub fn vote_count(&self, i: usize, y: &Rational) -> Result<usize> {
        self.check_index(i)?;
        let xi = &self.members[i].value;
        let n = self.n();
        Ok(match y.cmp(xi) {
            std::cmp::Ordering::Equal => n - 1,
            std::cmp::Ordering::Greater => {
                let mid = (xi + y) / Rational::from_integer(2.into());
                n - self.members.partition_point(|m| m.value < mid)
            }
            std::cmp::Ordering::Less => {
                let mid = (xi + y) / Rational::from_integer(2.into());
                self.members.partition_point(|m| m.value <= mid)
            }
        })
    }

    /// The candidates that would replace member `i`: a closed interval
    /// around `x_i`, since the vote count only falls as `y` moves away.
    pub fn acceptance_interval(&self, i: usize) -> Result<Acceptance> {
        self.check_index(i)?;
        let t = self.threshold();
        if t == 0 {
            return Ok(Acceptance::Everyone);
        }
        if t > self.n() - 1 {
            return Ok(Acceptance::Nobody);
        }
        let xi = self.value(i).clone();
        let others: Vec<&Rational> = self
            .members
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, m)| &m.value)
            .collect();
        let two = Rational::from_integer(2.into());
        // the t-th smallest and t-th largest of the others bound the midpoint
        let low = &two * others[t - 1] - &xi;
        let high = &two * others[others.len() - t] - &xi;
        Ok(Acceptance::Interval(low.min(xi.clone()), high.max(xi)))
    }

    /// Replaces member `i` by `y` if the vote reaches the threshold.
    /// Returns whether it did; the new member gets a fresh id.
    pub fn try_replace(&mut self, i: usize, y: Rational) -> Result<bool> {
        if self.vote_count(i, &y)? < self.threshold() {
            return Ok(false);
        }
        self.members.remove(i);
        let pos = self.members.partition_point(|m| m.value <= y);
        self.members.insert(
            pos,
            Member {
                value: y,
                id: self.next_id,
            },
        );
        self.next_id += 1;
        Ok(true)
    }

    pub fn replace_attempt(&self, i: usize, y: &Rational) -> Result<(bool, Committee)> {
        let mut next = self.clone();
        let accepted = next.try_replace(i, y.clone())?;
        Ok((accepted, next))
    }

    /// The median `x_{k+1}` (odd `n`).
    pub fn median(&self) -> Result<&Rational> {
        self.require_odd("the median")?;
        Ok(&self.members[self.n() / 2].value)
    }

    /// Sum of distances to the median.
    pub fn potential(&self) -> Result<Rational> {
        let m = self.median()?;
        Ok(self.values().fold(Rational::zero(), |acc, x| acc + abs_diff(x, m)))
    }

    /// `x_n + x_2 − x_1`.
    pub fn consensus_monotone(&self) -> Result<Rational> {
        if self.n() < 3 {
            return Err(Error::unsupported("the consensus quantity needs n ≥ 3"));
        }
        Ok(self.max() + self.value(1) - self.min())
    }

    /// `x_1 + x_{n−1} − x_n`, the reflection of [`Committee::consensus_monotone`].
    pub fn consensus_monotone_mirror(&self) -> Result<Rational> {
        if self.n() < 3 {
            return Err(Error::unsupported("the consensus quantity needs n ≥ 3"));
        }
        Ok(self.min() + self.value(self.n() - 2) - self.max())
    }

    pub fn to_serde(&self) -> CommitteeSerde {
        CommitteeSerde {
            members: self.values().map(format_rational).collect(),
            ell: self.ell,
        }
    }

    pub fn from_serde(s: &CommitteeSerde) -> Result<Self> {
        let values = s.members.iter().map(|v| parse_rational(v)).collect::<Result<Vec<_>>>()?;
        Self::new(values, s.ell)
    }
}

/// JSON form of a committee: opinions as decimal or `"num/den"` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitteeSerde {
    pub members: Vec<String>,
    pub ell: usize,
}

/// Both sides of the shift inequality for one replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftVerdict {
    /// The median moved; otherwise the inequality is vacuous.
    pub applicable: bool,
    /// `S − S'`.
    pub decrease: Rational,
    /// `2 Σ_{j=k−ℓ+2}^{k} |x_j − x'_j| + |x_{k+1} − x'_{k+1}|` (mirrored for a left move).
    pub required: Rational,
    pub holds: bool,
}

/// Checks that a median-moving replacement decreased the potential by at
/// least the weighted displacement of the points between `x_{k−ℓ+2}` and the
/// median (or, for a left move, between the median and `x_{k+ℓ}`).
pub fn shift_lemma_check(before: &Committee, after: &Committee) -> Result<ShiftVerdict> {
    if before.n() != after.n() || before.ell() != after.ell() {
        return Err(Error::state("shift check needs two states of the same committee"));
    }
    before.require_odd("the shift inequality")?;
    let k = before.k();
    let ell = before.ell();
    if ell == 0 || ell > k {
        return Err(Error::unsupported(format!("the shift inequality needs 1 ≤ ℓ ≤ k (ℓ = {ell}, k = {k})")));
    }
    let m0 = before.median()?;
    let m1 = after.median()?;
    let decrease = before.potential()? - after.potential()?;
    if m0 == m1 {
        return Ok(ShiftVerdict {
            applicable: false,
            decrease,
            required: Rational::zero(),
            holds: true,
        });
    }
    // 0-based: positions k−ℓ+1 ..= k−1 (1-based k−ℓ+2 ..= k), mirrored to k+1 ..= k+ℓ−1.
    let side: Vec<usize> = if m1 > m0 {
        (k + 1 - ell..k).collect()
    } else {
        (k + 1..k + ell).collect()
    };
    let two = Rational::from_integer(2.into());
    let mut required = abs_diff(m0, m1);
    for j in side {
        required += &two * abs_diff(before.value(j), after.value(j));
    }
    Ok(ShiftVerdict {
        applicable: true,
        holds: decrease >= required,
        decrease,
        required,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftVerdict {
    /// `D·k/(2ℓ − 1)`.
    pub bound: Rational,
    /// `x'_{k−ℓ+2}` and its limit `x_n + bound`.
    pub upper_value: Rational,
    pub upper_limit: Rational,
    /// `x'_{k+ℓ}` and its limit `x_1 − bound`.
    pub lower_value: Rational,
    pub lower_limit: Rational,
}

impl DriftVerdict {
    pub fn holds(&self) -> bool {
        self.upper_value <= self.upper_limit && self.lower_value >= self.lower_limit
    }
}

/// Checks `x'_{k−ℓ+2} ≤ x_n + Dk/(2ℓ−1)` and `x'_{k+ℓ} ≥ x_1 − Dk/(2ℓ−1)`,
/// where `x` and `D` come from `initial`.
pub fn drift_bound_check(initial: &Committee, current: &Committee) -> Result<DriftVerdict> {
    if initial.n() != current.n() {
        return Err(Error::state("drift check needs two states of the same committee"));
    }
    initial.require_odd("the drift bound")?;
    let k = initial.k();
    let ell = current.ell();
    if ell == 0 || ell > k {
        return Err(Error::unsupported(format!("the drift bound needs 1 ≤ ℓ ≤ k (ℓ = {ell}, k = {k})")));
    }
    let d = initial.max() - initial.min();
    let bound = d * Rational::from_integer(k.into()) / Rational::from_integer((2 * ell - 1).into());
    Ok(DriftVerdict {
        upper_value: current.value(k + 1 - ell).clone(),
        upper_limit: initial.max() + &bound,
        lower_value: current.value(k + ell - 1).clone(),
        lower_limit: initial.min() - &bound,
        bound,
    })
}

/// Whether every value lies in `[x_1⁰ − D, x_n⁰ + D]` for the initial extremes.
pub fn within_consensus_hull(committee: &Committee, y: &Rational) -> bool {
    let (lo, hi) = committee.initial_extremes();
    let d = committee.initial_diameter();
    *y >= lo - &d && *y <= hi + &d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn brute_votes(c: &Committee, i: usize, y: &Rational) -> usize {
        let xi = c.value(i);
        (0..c.n())
            .filter(|&j| j != i && abs_diff(c.value(j), y) <= abs_diff(c.value(j), xi))
            .count()
    }

    #[test]
    fn vote_count_examples() {
        let c = Committee::from_integers(&[0, 1, 2], 0).unwrap();
        assert_eq!(c.vote_count(0, &int(3)).unwrap(), 1);
        assert_eq!(c.vote_count(1, c.value(1)).unwrap(), 2);
        let c = Committee::from_integers(&[0, 10, 20], 0).unwrap();
        assert_eq!(c.vote_count(1, &ratio(21, 2)).unwrap(), 1);
        assert!(matches!(c.vote_count(3, &int(1)), Err(Error::Range(_))));
    }

    #[test]
    fn replace_attempt_examples() {
        let c = Committee::from_integers(&[0, 1, 2], 0).unwrap();
        assert_eq!(c.threshold(), 1);
        let (ok, next) = c.replace_attempt(0, &int(3)).unwrap();
        assert!(ok);
        assert_eq!(next.values().cloned().collect::<Vec<_>>(), vec![int(1), int(2), int(3)]);
        assert!(!next.contains_id(0));
        assert_eq!(next.members()[2].id, 3);

        let c = Committee::from_integers(&[0, 1, 2], 1).unwrap();
        assert_eq!(c.threshold(), 2);
        let (ok, same) = c.replace_attempt(0, &int(3)).unwrap();
        assert!(!ok);
        assert_eq!(same, c);

        let (ok, next) = c.replace_attempt(1, &int(1)).unwrap();
        assert!(ok);
        assert_eq!(next.values().cloned().collect::<Vec<_>>(), vec![int(0), int(1), int(2)]);
        assert_eq!(next.members()[1].id, 3);
    }

    #[test]
    fn threshold_formula() {
        for n in 1..12 {
            let c = Committee::from_integers(&(0..n as i64).collect::<Vec<_>>(), 2).unwrap();
            assert_eq!(c.threshold(), ((n as f64 - 1.0) / 2.0).ceil() as usize + 2);
        }
    }

    #[test]
    fn potential_examples() {
        assert_eq!(Committee::from_integers(&[0, 1, 2], 0).unwrap().potential().unwrap(), int(2));
        assert_eq!(Committee::from_integers(&[5, 5, 5], 0).unwrap().potential().unwrap(), int(0));
        assert_eq!(Committee::from_integers(&[0, 0, 0, 0, 4], 0).unwrap().potential().unwrap(), int(4));
        assert!(matches!(
            Committee::from_integers(&[0, 1], 0).unwrap().potential(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn consensus_quantities() {
        let c = Committee::from_integers(&[0, 1, 2], 1).unwrap();
        assert_eq!(c.consensus_monotone().unwrap(), int(3));
        assert_eq!(c.consensus_monotone_mirror().unwrap(), int(-1));
        assert!(Committee::from_integers(&[0, 1], 0).unwrap().consensus_monotone().is_err());
    }

    #[test]
    fn shift_lemma_hand_case() {
        // n = 5, k = 2, ℓ = 1: x = (0, 2, 4, 6, 8), drop x_1 = 0, add y = 5.
        // x_2 = 2 is not involved for ℓ = 1; x_{k-ℓ+2} = x_3 = 4 prefers 5 to 0.
        let before = Committee::from_integers(&[0, 2, 4, 6, 8], 1).unwrap();
        let (ok, after) = before.replace_attempt(0, &int(5)).unwrap();
        assert!(ok);
        assert_eq!(after.median().unwrap(), &int(5));
        let v = shift_lemma_check(&before, &after).unwrap();
        // S = 4+2+0+2+4 = 12, S' = 3+1+0+1+3 = 8; required = |4 − 5| = 1
        assert!(v.applicable);
        assert_eq!(v.decrease, int(4));
        assert_eq!(v.required, int(1));
        assert!(v.holds);
        // S' = S − d(x_i, x_{k+1}) from the proof's first case
        assert_eq!(v.decrease, int(4));
    }

    #[test]
    fn shift_lemma_unchanged_median() {
        let before = Committee::from_integers(&[0, 2, 4, 6, 8], 1).unwrap();
        let (ok, after) = before.replace_attempt(0, &int(1)).unwrap();
        assert!(ok);
        let v = shift_lemma_check(&before, &after).unwrap();
        assert!(!v.applicable && v.holds);
    }

    #[test]
    fn drift_bound_examples() {
        let c = Committee::from_integers(&[0, 1, 2, 3, 4], 1).unwrap();
        let v = drift_bound_check(&c, &c).unwrap();
        assert!(v.holds());
        // n = 5, k = 2, ℓ = 1: x'_3 ≤ x_5 + 2D
        assert_eq!(v.bound, int(8));
        assert_eq!(v.upper_value, int(2));
        assert_eq!(v.upper_limit, int(12));
        let zero_ell = Committee::from_integers(&[0, 1, 2, 3, 4], 0).unwrap();
        assert!(matches!(drift_bound_check(&zero_ell, &zero_ell), Err(Error::Unsupported(_))));
    }

    #[test]
    fn serde_round_trip() {
        let c = Committee::new(vec![ratio(1, 3), int(2), ratio(-5, 2)], 1).unwrap();
        let s = c.to_serde();
        assert_eq!(s.members, vec!["-5/2", "1/3", "2/1"]);
        assert_eq!(Committee::from_serde(&s).unwrap(), c);
        let decimal = CommitteeSerde {
            members: vec!["0.25".into(), "1".into(), "3/2".into()],
            ell: 0,
        };
        assert_eq!(Committee::from_serde(&decimal).unwrap().value(0), &ratio(1, 4));
    }

    #[test]
    fn reflection_keeps_ids() {
        let c = Committee::from_integers(&[0, 1, 5], 1).unwrap();
        let r = c.reflected();
        assert_eq!(r.values().cloned().collect::<Vec<_>>(), vec![int(-5), int(-1), int(0)]);
        assert_eq!(r.ids().collect::<Vec<_>>(), vec![2, 1, 0]);
        assert_eq!(r.initial_extremes(), (&int(-5), &int(0)));
    }

    #[test]
    fn acceptance_interval_matches_votes() {
        for ell in 0..4 {
            let c = Committee::from_integers(&[0, 1, 1, 4, 6, 9, 10], ell).unwrap();
            for i in 0..c.n() {
                let Acceptance::Interval(lo, hi) = c.acceptance_interval(i).unwrap() else {
                    panic!("ℓ = {ell}: expected an interval");
                };
                for num in -40..=80 {
                    let y = ratio(num, 4);
                    let inside = y >= lo && y <= hi;
                    assert_eq!(inside, brute_votes(&c, i, &y) >= c.threshold(), "ℓ = {ell}, i = {i}, y = {y}");
                }
            }
        }
        let single = Committee::from_integers(&[3], 0).unwrap();
        assert_eq!(single.acceptance_interval(0).unwrap(), Acceptance::Everyone);
        let tight = Committee::from_integers(&[0, 1, 2], 2).unwrap();
        assert_eq!(tight.acceptance_interval(1).unwrap(), Acceptance::Nobody);
    }

    #[test]
    fn vote_count_matches_brute_force_with_duplicates() {
        let c = Committee::from_integers(&[0, 0, 1, 3, 3, 3, 7], 0).unwrap();
        for i in 0..c.n() {
            for num in -20..=40 {
                let y = ratio(num, 4);
                assert_eq!(c.vote_count(i, &y).unwrap(), brute_votes(&c, i, &y), "i = {i}, y = {y}");
            }
        }
    }
}
