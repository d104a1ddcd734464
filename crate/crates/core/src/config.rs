//! Experiment configuration files.
//!
//! A config is one JSON object with a `kind`, a mandatory `seed`, an optional
//! `out` directory, and the fields of that kind. Unknown keys are rejected
//! and every error names the JSON path it refers to, e.g. `rule.r`.

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::adversaries::{Monitors, ScheduleSerde};
use crate::committee::{Committee, CommitteeSerde};
use crate::engine::{CheckpointSchedule, RunOptions, Sampling, Target};
use crate::error::{Error, Result};
use crate::oracles::OracleContext;
use crate::rational::parse_rational;
use crate::rules::RuleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Majority,
    Consensus,
    Veto,
}

/// A rule as written in a config: `"majority"`, `"consensus"`, or an object
/// `{"type": "veto", "r": 0.25}`; objects may override `c1` and `c2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    pub name: RuleName,
    pub r: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl RuleConfig {
    pub fn majority() -> Self {
        Self::named(RuleName::Majority)
    }

    pub fn veto(r: f64) -> Self {
        Self {
            r: Some(r),
            ..Self::named(RuleName::Veto)
        }
    }

    fn named(name: RuleName) -> Self {
        Self {
            name,
            r: None,
            c1: None,
            c2: None,
        }
    }

    pub fn build(&self) -> Result<RuleSpec> {
        let spec = match self.name {
            RuleName::Majority => RuleSpec::majority(),
            RuleName::Consensus => RuleSpec::consensus(),
            RuleName::Veto => {
                let r = self.r.ok_or_else(|| Error::config("rule.r", "the veto rule needs `r`"))?;
                RuleSpec::veto(r).map_err(|e| Error::config("rule.r", e.to_string()))?
            }
        };
        if self.c1.is_none() && self.c2.is_none() {
            return Ok(spec);
        }
        let (c1, c2) = (self.c1.unwrap_or(spec.c1()), self.c2.unwrap_or(spec.c2()));
        spec.with_constants(c1, c2).map_err(|e| Error::config("rule", e.to_string()))
    }
}

/// A veto parameter, checked while it is read so the error carries its path.
struct OpenUnit(f64);

impl<'de> Deserialize<'de> for OpenUnit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = f64::deserialize(d)?;
        if r > 0.0 && r < 1.0 {
            Ok(OpenUnit(r))
        } else {
            Err(de::Error::custom(format!("r = {r} outside (0, 1)")))
        }
    }
}

struct Positive(f64);

impl<'de> Deserialize<'de> for Positive {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = f64::deserialize(d)?;
        if c > 0.0 && c.is_finite() {
            Ok(Positive(c))
        } else {
            Err(de::Error::custom(format!("{c} is not a positive constant")))
        }
    }
}

impl<'de> Deserialize<'de> for RuleConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RuleVisitor;

        impl<'de> Visitor<'de> for RuleVisitor {
            type Value = RuleConfig;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"majority\", \"consensus\" or an object with a `type`")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<RuleConfig, E> {
                match s {
                    "majority" => Ok(RuleConfig::named(RuleName::Majority)),
                    "consensus" => Ok(RuleConfig::named(RuleName::Consensus)),
                    "veto" => Err(E::custom("the veto rule needs an object with `r`")),
                    other => Err(E::unknown_variant(other, &["majority", "consensus", "veto"])),
                }
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RuleConfig, A::Error> {
                let (mut name, mut r, mut c1, mut c2) = (None, None, None, None);
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "type" => name = Some(map.next_value::<RuleName>()?),
                        "r" => r = Some(map.next_value::<OpenUnit>()?.0),
                        "c1" => c1 = Some(map.next_value::<Positive>()?.0),
                        "c2" => c2 = Some(map.next_value::<Positive>()?.0),
                        other => return Err(de::Error::unknown_field(other, &["type", "r", "c1", "c2"])),
                    }
                }
                let name = name.ok_or_else(|| de::Error::missing_field("type"))?;
                match (name, r) {
                    (RuleName::Veto, None) => Err(de::Error::missing_field("r")),
                    (RuleName::Majority | RuleName::Consensus, Some(_)) => {
                        Err(de::Error::custom("`r` only applies to the veto rule"))
                    }
                    _ => Ok(RuleConfig { name, r, c1, c2 }),
                }
            }
        }

        d.deserialize_any(RuleVisitor)
    }
}

impl Serialize for RuleConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        if self.r.is_none() && self.c1.is_none() && self.c2.is_none() {
            return self.name.serialize(s);
        }
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("type", &self.name)?;
        if let Some(r) = self.r {
            map.serialize_entry("r", &r)?;
        }
        if let Some(c1) = self.c1 {
            map.serialize_entry("c1", &c1)?;
        }
        if let Some(c2) = self.c2 {
            map.serialize_entry("c2", &c2)?;
        }
        map.end()
    }
}

fn default_growth() -> f64 {
    CheckpointSchedule::default().growth
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowConfig {
    pub rule: RuleConfig,
    pub initial: Vec<f64>,
    /// Stop after this many admissions...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<u64>,
    /// ...or after this many raw steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default = "default_growth")]
    pub checkpoint_growth: f64,
    #[serde(default)]
    pub sampling: Sampling,
    /// Keep every admitted opinion (needed for the KS value in the summary).
    #[serde(default)]
    pub log_admitted: bool,
    /// Verdict: final `|q_p − τ|` at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tolerance: Option<f64>,
    /// Verdict: KS distance of the second half of the admissions to the
    /// majority limit density at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_tolerance: Option<f64>,
}

impl GrowConfig {
    pub fn new(rule: RuleConfig, initial: Vec<f64>, target: Target) -> Self {
        let (accepted, steps) = match target {
            Target::Accepted(a) => (Some(a), None),
            Target::Steps(s) => (None, Some(s)),
        };
        Self {
            rule,
            initial,
            accepted,
            steps,
            max_steps: None,
            checkpoint_growth: default_growth(),
            sampling: Sampling::Raw,
            log_admitted: false,
            gap_tolerance: None,
            ks_tolerance: None,
        }
    }

    pub fn target(&self) -> Target {
        match (self.accepted, self.steps) {
            (Some(a), _) => Target::Accepted(a),
            (None, Some(s)) => Target::Steps(s),
            (None, None) => Target::Accepted(0),
        }
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            schedule: CheckpointSchedule::new(self.checkpoint_growth)?,
            log_admitted: self.log_admitted || self.ks_tolerance.is_some(),
            max_steps: self.max_steps,
            sampling: self.sampling,
        })
    }

    /// Checks everything the schema cannot; `prefix` is the path of this object.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let at = |field: &str| join(prefix, field);
        let rule = self.rule.build().map_err(|e| reprefix(e, prefix))?;
        if self.initial.is_empty() {
            return Err(Error::config(at("initial"), "the initial group must not be empty"));
        }
        if let Some(i) = self.initial.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::config(
                at(&format!("initial[{i}]")),
                format!("opinion {} outside [0, 1]", self.initial[i]),
            ));
        }
        match (self.accepted, self.steps) {
            (Some(_), Some(_)) => return Err(Error::config(at("steps"), "give either `accepted` or `steps`, not both")),
            (None, None) => return Err(Error::config(at("accepted"), "a target (`accepted` or `steps`) is required")),
            _ => {}
        }
        if !(self.checkpoint_growth > 1.0 && self.checkpoint_growth.is_finite()) {
            return Err(Error::config(at("checkpoint_growth"), "must be a finite number above 1"));
        }
        if self.sampling == Sampling::Direct && self.rule.name != RuleName::Veto {
            return Err(Error::config(at("sampling"), "direct sampling is only available for the veto rule"));
        }
        if let Some(tol) = self.gap_tolerance {
            if !(tol >= 0.0) {
                return Err(Error::config(at("gap_tolerance"), "must be non-negative"));
            }
            if crate::oracles::limit_quantile(&rule).is_none() {
                return Err(Error::config(at("gap_tolerance"), format!("the {} rule has no limit quantile", rule.name())));
            }
        }
        if let Some(tol) = self.ks_tolerance {
            if !(tol >= 0.0) {
                return Err(Error::config(at("ks_tolerance"), "must be non-negative"));
            }
            if self.rule.name != RuleName::Majority {
                return Err(Error::config(at("ks_tolerance"), "the KS check compares against the majority limit density"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzConfig {
    pub accepted: usize,
    #[serde(default = "default_episode")]
    pub episode: usize,
}

fn default_episode() -> usize {
    100
}

/// A committee experiment replays a schedule, fuzzes random accepted
/// replacements with monitors attached, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitteeConfig {
    pub committee: CommitteeSerde,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSerde>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzz: Option<FuzzConfig>,
    #[serde(default)]
    pub monitors: Monitors,
}

impl CommitteeConfig {
    pub fn validate(&self) -> Result<Committee> {
        let committee = parse_committee(&self.committee, "committee")?;
        let odd = committee.n() % 2 == 1;
        if self.monitors.drift && !odd {
            return Err(Error::config("monitors.drift", "the drift monitor requires an odd committee size"));
        }
        if self.monitors.drift && !(1..=committee.k()).contains(&committee.ell()) {
            return Err(Error::config(
                "monitors.drift",
                format!("the drift monitor requires 1 ≤ ell ≤ {}", committee.k()),
            ));
        }
        if self.monitors.immunity && !odd {
            return Err(Error::config("monitors.immunity", "the immunity monitor requires an odd committee size"));
        }
        if self.schedule.is_none() && self.fuzz.is_none() {
            return Err(Error::config("fuzz", "a committee experiment needs a `schedule`, a `fuzz` block, or both"));
        }
        if let Some(f) = &self.fuzz {
            if f.episode == 0 {
                return Err(Error::config("fuzz.episode", "must be at least 1"));
            }
        }
        Ok(committee)
    }
}

pub(crate) fn parse_committee(c: &CommitteeSerde, path: &str) -> Result<Committee> {
    for (i, v) in c.members.iter().enumerate() {
        parse_rational(v).map_err(|e| Error::config(format!("{path}.members[{i}]"), e.to_string()))?;
    }
    Committee::from_serde(c).map_err(|e| Error::config(path, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    ArithmeticDrift,
    GeometricTightness,
    Immunity,
    RemovalSchedule,
}

/// Parameters of the adversarial constructions; which ones apply depends on
/// `construction` and the others must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub construction: Construction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committee: Option<CommitteeSerde>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    /// Median displacement to reach, as a rational string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<String>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub big_d: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzz: Option<FuzzConfig>,
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        use Construction::*;
        let allowed: &[&str] = match self.construction {
            ArithmeticDrift => &["committee", "target"],
            GeometricTightness => &["k", "ell"],
            Immunity => &["k", "ell", "d", "D", "fuzz"],
            RemovalSchedule => &["k", "committee"],
        };
        let given = [
            ("committee", self.committee.is_some()),
            ("k", self.k.is_some()),
            ("ell", self.ell.is_some()),
            ("target", self.target.is_some()),
            ("d", self.d.is_some()),
            ("D", self.big_d.is_some()),
            ("fuzz", self.fuzz.is_some()),
        ];
        for (field, present) in given {
            if present && !allowed.contains(&field) {
                return Err(Error::config(field, format!("not a parameter of {:?}", self.construction)));
            }
        }
        if let Some(c) = &self.committee {
            parse_committee(c, "committee")?;
        }
        for (field, value) in [("target", &self.target), ("d", &self.d), ("D", &self.big_d)] {
            if let Some(v) = value {
                let x = parse_rational(v).map_err(|e| Error::config(field, e.to_string()))?;
                if x <= crate::rational::int(0) {
                    return Err(Error::config(field, "must be positive"));
                }
            }
        }
        let needs_k = matches!(self.construction, GeometricTightness | Immunity)
            || (self.construction == RemovalSchedule && self.committee.is_none());
        if needs_k && self.k.is_none() {
            return Err(Error::config("k", format!("{:?} needs `k`", self.construction)));
        }
        if self.construction == RemovalSchedule && self.k.is_some() && self.committee.is_some() {
            return Err(Error::config("k", "give either `k` or `committee`, not both"));
        }
        if self.k == Some(0) {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.construction == GeometricTightness && self.ell.is_none() {
            return Err(Error::config("ell", "geometric tightness needs `ell`"));
        }
        if let (Some(k), Some(ell)) = (self.k, self.ell) {
            if !(1..=k).contains(&ell) {
                return Err(Error::config("ell", format!("must lie in 1..={k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub rule: RuleConfig,
    /// Where to tabulate the admission probability; 21 points on `[0, 1]` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let ctx = self.context()?;
        if let Some(grid) = &self.grid {
            for (i, &q) in grid.iter().enumerate() {
                ctx.f(q).map_err(|e| Error::config(format!("grid[{i}]"), e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn context(&self) -> Result<OracleContext> {
        let rule = self.rule.build()?;
        let path = if self.rule.name == RuleName::Veto { "rule.r" } else { "rule" };
        OracleContext::for_rule(&rule).map_err(|e| Error::config(path, e.to_string()))
    }

    /// The explicit grid, or 21 even points over the domain of `f`.
    pub fn grid(&self) -> Vec<f64> {
        match (&self.grid, self.rule.name) {
            (Some(g), _) => g.clone(),
            (None, RuleName::Veto) => (0..=20).map(|i| 0.5 + 0.5 * (i.max(1) as f64) / 20.0).collect(),
            (None, _) => (0..=20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Every criterion at its stated sample sizes.
    Full,
    /// The same checks at reduced sample sizes.
    #[default]
    Quick,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Suite::Full),
            "quick" => Ok(Suite::Quick),
            other => Err(Error::config("suite", format!("unknown suite `{other}` (expected full or quick)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub suite: Suite,
    /// Criterion numbers to run; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u32>>,
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(ids) = &self.criteria {
            if let Some(i) = ids.iter().position(|c| !(1..=crate::verify::CRITERIA).contains(c)) {
                return Err(Error::config(
                    format!("criteria[{i}]"),
                    format!("no criterion {}", ids[i]),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    /// Veto quantile level; sets `r = 1 − p`.
    P,
    R,
    Accepted,
    Steps,
    CheckpointGrowth,
    /// A single founder at this opinion.
    Founder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

impl Axis {
    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &GrowConfig, value: f64) -> Result<GrowConfig> {
        let mut cell = base.clone();
        let count = |v: f64, field: &str| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::config(field, format!("{v} is not a count")))
            }
        };
        match self.name {
            AxisName::P | AxisName::R => {
                if cell.rule.name != RuleName::Veto {
                    return Err(Error::config("axis.name", "the p and r axes need a veto base rule"));
                }
                cell.rule.r = Some(if self.name == AxisName::P { 1.0 - value } else { value });
            }
            AxisName::Accepted => {
                cell.accepted = Some(count(value, "axis.values")?);
                cell.steps = None;
            }
            AxisName::Steps => {
                cell.steps = Some(count(value, "axis.values")?);
                cell.accepted = None;
            }
            AxisName::CheckpointGrowth => cell.checkpoint_growth = value,
            AxisName::Founder => cell.initial = vec![value],
        }
        Ok(cell)
    }
}

/// Runs the cross product of `axis` values and seeds on a grow base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: GrowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    /// Explicit run seeds...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// ...or this many seeds split off the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<u64>,
    /// A cell passes when its final gap is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_gap: Option<f64>,
    /// Verdict: pass fraction per axis value at least this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_pass_fraction: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate("base")?;
        if self.seeds.is_some() && self.seed_count.is_some() {
            return Err(Error::config("seed_count", "give either `seeds` or `seed_count`, not both"));
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) || self.seed_count == Some(0) {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if let Some(axis) = &self.axis {
            for (i, &v) in axis.values.iter().enumerate() {
                let path = format!("axis.values[{i}]");
                let cell = axis.apply(&self.base, v).map_err(|e| match e {
                    Error::Config { path: p, message } if p == "axis.values" => Error::config(path.clone(), message),
                    other => other,
                })?;
                cell.validate("base").map_err(|e| match e {
                    Error::Config { message, .. } => Error::config(path.clone(), message),
                    other => other,
                })?;
            }
        }
        if self.min_pass_fraction.is_some() && self.pass_gap.is_none() {
            return Err(Error::config("min_pass_fraction", "needs `pass_gap`"));
        }
        if let Some(f) = self.min_pass_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("min_pass_fraction", "must lie in [0, 1]"));
            }
        }
        if self.pass_gap.is_some() && crate::oracles::limit_quantile(&self.base.rule.build()?).is_none() {
            return Err(Error::config("pass_gap", "the base rule has no limit quantile"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Grow(GrowConfig),
    Committee(CommitteeConfig),
    Adversary(AdversaryConfig),
    Oracle(OracleConfig),
    Verify(VerifyConfig),
    Sweep(SweepConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Grow(_) => "grow",
            Experiment::Committee(_) => "committee",
            Experiment::Adversary(_) => "adversary",
            Experiment::Oracle(_) => "oracle",
            Experiment::Verify(_) => "verify",
            Experiment::Sweep(_) => "sweep",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Experiment::Grow(c) => c.validate(""),
            Experiment::Committee(c) => c.validate().map(|_| ()),
            Experiment::Adversary(c) => c.validate(),
            Experiment::Oracle(c) => c.validate(),
            Experiment::Verify(c) => c.validate(),
            Experiment::Sweep(c) => c.validate(),
        }
    }

    fn to_value(&self) -> Value {
        let v = match self {
            Experiment::Grow(c) => serde_json::to_value(c),
            Experiment::Committee(c) => serde_json::to_value(c),
            Experiment::Adversary(c) => serde_json::to_value(c),
            Experiment::Oracle(c) => serde_json::to_value(c),
            Experiment::Verify(c) => serde_json::to_value(c),
            Experiment::Sweep(c) => serde_json::to_value(c),
        };
        v.expect("config types serialize to JSON")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence.
    pub out: Option<PathBuf>,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn new(seed: u64, experiment: Experiment) -> Result<Self> {
        experiment.validate()?;
        Ok(Self {
            seed,
            out: None,
            experiment,
        })
    }

    pub fn kind(&self) -> &'static str {
        self.experiment.kind()
    }

    /// The normalized config (defaults filled in, `out` left out) that the
    /// summary echoes and the hash covers.
    pub fn echo(&self) -> Value {
        let mut map = match self.experiment.to_value() {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        map.insert("kind".into(), Value::from(self.kind()));
        map.insert("seed".into(), Value::from(self.seed));
        Value::Object(map)
    }

    /// SHA-256 of the echo's compact JSON, in hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.echo()).expect("JSON values serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn join(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

fn reprefix(err: Error, prefix: &str) -> Error {
    match err {
        Error::Config { path, message } => Error::config(join(prefix, &path), message),
        other => other,
    }
}

fn typed<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: Value = serde_path_to_error::deserialize(de).map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))?;
    from_value(value)
}

pub fn from_value(value: Value) -> Result<ExperimentConfig> {
    let Value::Object(mut map) = value else {
        return Err(Error::config("", "a config must be a JSON object"));
    };
    let kind = match map.remove("kind") {
        Some(Value::String(kind)) => kind,
        Some(_) => return Err(Error::config("kind", "must be a string")),
        None => return Err(Error::config("kind", "missing field `kind`")),
    };
    let seed = match map.remove("seed") {
        Some(v) => v.as_u64().ok_or_else(|| Error::config("seed", "must be an unsigned 64-bit integer"))?,
        None => return Err(Error::config("seed", "missing field `seed`; every experiment needs a seed")),
    };
    let out = match map.remove("out") {
        Some(Value::String(p)) => Some(PathBuf::from(p)),
        Some(_) => return Err(Error::config("out", "must be a path string")),
        None => None,
    };
    let rest = Value::Object(map);
    let experiment = match kind.as_str() {
        "grow" => Experiment::Grow(typed(rest)?),
        "committee" => Experiment::Committee(typed(rest)?),
        "adversary" => Experiment::Adversary(typed(rest)?),
        "oracle" => Experiment::Oracle(typed(rest)?),
        "verify" => Experiment::Verify(typed(rest)?),
        "sweep" => Experiment::Sweep(typed(rest)?),
        other => {
            return Err(Error::config(
                "kind",
                format!("unknown kind `{other}` (expected grow, committee, adversary, oracle, verify or sweep)"),
            ))
        }
    };
    let mut config = ExperimentConfig::new(seed, experiment)?;
    config.out = out;
    Ok(config)
}
