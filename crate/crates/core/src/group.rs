//! The growing group: an ordered multiset of opinions in `[0, 1]`.
//!
//! Storage is a counted B+-tree. Leaves hold sorted runs of opinions; branch
//! nodes keep, per child, the number of opinions below it and the largest
//! opinion it contains. Insert, rank, select and interval counts all walk a
//! single root-to-leaf path, so every query is `O(log k)` with a small
//! constant even at 10^7 members.

use crate::error::{Error, Result};

const LEAF_MAX: usize = 128;
const BRANCH_MAX: usize = 64;
const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<f64>),
    Branch {
        children: Vec<usize>,
        counts: Vec<usize>,
        maxes: Vec<f64>,
    },
}

impl Node {
    fn summary(&self) -> (usize, f64) {
        match self {
            Node::Leaf(values) => (values.len(), *values.last().expect("leaf never empty after split")),
            Node::Branch { counts, maxes, .. } => (counts.iter().sum(), *maxes.last().expect("branch has children")),
        }
    }

    fn overflowing(&self) -> bool {
        match self {
            Node::Leaf(values) => values.len() > LEAF_MAX,
            Node::Branch { children, .. } => children.len() > BRANCH_MAX,
        }
    }

    fn split_off_right(&mut self) -> Node {
        match self {
            Node::Leaf(values) => {
                let mid = values.len() / 2;
                Node::Leaf(values.split_off(mid))
            }
            Node::Branch {
                children,
                counts,
                maxes,
            } => {
                let mid = children.len() / 2;
                Node::Branch {
                    children: children.split_off(mid),
                    counts: counts.split_off(mid),
                    maxes: maxes.split_off(mid),
                }
            }
        }
    }
}

/// Order-statistic multiset of `f64` keys (no NaN).
#[derive(Debug, Clone)]
pub struct OrderStatTree {
    nodes: Vec<Node>,
    root: usize,
    len: usize,
}

impl Default for OrderStatTree {
    fn default() -> Self {
        Self {
            nodes: vec![Node::Leaf(Vec::new())],
            root: 0,
            len: 0,
        }
    }
}

impl OrderStatTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts after any equal keys.
    pub fn insert(&mut self, x: f64) {
        debug_assert!(!x.is_nan());
        let mut path = [(0usize, 0usize); MAX_DEPTH];
        let mut depth = 0;
        let mut node = self.root;
        loop {
            match &mut self.nodes[node] {
                Node::Branch {
                    children,
                    counts,
                    maxes,
                } => {
                    let i = maxes.partition_point(|&m| m <= x).min(children.len() - 1);
                    counts[i] += 1;
                    if x > maxes[i] {
                        maxes[i] = x;
                    }
                    path[depth] = (node, i);
                    depth += 1;
                    node = children[i];
                }
                Node::Leaf(values) => {
                    let pos = values.partition_point(|&v| v <= x);
                    values.insert(pos, x);
                    break;
                }
            }
        }
        self.len += 1;

        let mut child = node;
        while self.nodes[child].overflowing() {
            let right = self.nodes[child].split_off_right();
            let right_idx = self.nodes.len();
            self.nodes.push(right);
            let (left_count, left_max) = self.nodes[child].summary();
            let (right_count, right_max) = self.nodes[right_idx].summary();
            if depth == 0 {
                let new_root = self.nodes.len();
                self.nodes.push(Node::Branch {
                    children: vec![child, right_idx],
                    counts: vec![left_count, right_count],
                    maxes: vec![left_max, right_max],
                });
                self.root = new_root;
                break;
            }
            depth -= 1;
            let (parent, i) = path[depth];
            if let Node::Branch {
                children,
                counts,
                maxes,
            } = &mut self.nodes[parent]
            {
                counts[i] = left_count;
                maxes[i] = left_max;
                children.insert(i + 1, right_idx);
                counts.insert(i + 1, right_count);
                maxes.insert(i + 1, right_max);
            }
            child = parent;
        }
    }

    /// The element of 0-based rank `rank`.
    pub fn select(&self, mut rank: usize) -> Option<f64> {
        if rank >= self.len {
            return None;
        }
        let mut node = self.root;
        loop {
            match &self.nodes[node] {
                Node::Branch { children, counts, .. } => {
                    let mut i = 0;
                    while rank >= counts[i] {
                        rank -= counts[i];
                        i += 1;
                    }
                    node = children[i];
                }
                Node::Leaf(values) => return Some(values[rank]),
            }
        }
    }

    /// Number of elements strictly below `x`.
    pub fn count_lt(&self, x: f64) -> usize {
        self.count_with(x, |v, x| v < x)
    }

    /// Number of elements at most `x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.count_with(x, |v, x| v <= x)
    }

    fn count_with(&self, x: f64, below: impl Fn(f64, f64) -> bool) -> usize {
        let mut acc = 0;
        let mut node = self.root;
        loop {
            match &self.nodes[node] {
                Node::Branch {
                    children,
                    counts,
                    maxes,
                } => {
                    let i = maxes.partition_point(|&m| below(m, x));
                    acc += counts[..i].iter().sum::<usize>();
                    if i == children.len() {
                        return acc;
                    }
                    node = children[i];
                }
                Node::Leaf(values) => return acc + values.partition_point(|&v| below(v, x)),
            }
        }
    }

    /// All elements in non-decreasing order.
    pub fn to_sorted_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        self.collect(self.root, &mut out);
        out
    }

    fn collect(&self, node: usize, out: &mut Vec<f64>) {
        match &self.nodes[node] {
            Node::Leaf(values) => out.extend_from_slice(values),
            Node::Branch { children, .. } => {
                for &c in children {
                    self.collect(c, out);
                }
            }
        }
    }
}

/// Which endpoints an interval count includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bounds {
    /// `[lo, hi]`
    Closed,
    /// `[lo, hi)`
    HalfOpen,
}

pub(crate) fn check_opinion(x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::domain(format!("opinion {x} outside [0, 1]")))
    }
}

pub(crate) fn check_probability(p: f64, what: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::domain(format!("{what} = {p} outside [0, 1]")))
    }
}

/// `⌈p·k⌉` computed exactly, reading `p` as the dyadic rational its bits encode.
pub fn ceil_scaled(p: f64, k: u64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p == 0.0 || k == 0 {
        return 0;
    }
    if p == 1.0 {
        return k;
    }
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as u32;
    let frac = bits & ((1u64 << 52) - 1);
    // p = mant * 2^-shift
    let (mant, shift) = if exp == 0 {
        (frac, 1074u32)
    } else {
        (frac | (1u64 << 52), 1075 - exp)
    };
    let prod = u128::from(mant) * u128::from(k);
    if shift >= 128 {
        return u64::from(prod > 0);
    }
    let whole = prod >> shift;
    let rem = prod & ((1u128 << shift) - 1);
    (whole + u128::from(rem != 0)) as u64
}

/// A growing group `S(k)`.
///
/// Quantile tie rule: among members satisfying both defining inequalities the
/// smallest is returned, which is the member of rank `max(1, ⌈p·k⌉)`. The
/// median is the `1/2`-quantile, hence the lower median for even sizes.
#[derive(Debug, Clone, Default)]
pub struct GroupState {
    tree: OrderStatTree,
    min: f64,
    max: f64,
}

impl GroupState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_opinions<I: IntoIterator<Item = f64>>(opinions: I) -> Result<Self> {
        let mut group = Self::new();
        for x in opinions {
            group.insert(x)?;
        }
        Ok(group)
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn insert(&mut self, x: f64) -> Result<()> {
        check_opinion(x)?;
        if self.tree.is_empty() {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.tree.insert(x);
        Ok(())
    }

    /// The `rank`-th smallest member, 1-based.
    pub fn select(&self, rank: usize) -> Result<f64> {
        if rank == 0 || rank > self.len() {
            return Err(Error::range(format!("rank {rank} outside 1..={}", self.len())));
        }
        Ok(self.tree.select(rank - 1).expect("rank checked"))
    }

    pub fn min(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.max)
    }

    pub fn count_below(&self, x: f64) -> usize {
        self.tree.count_lt(x)
    }

    pub fn count_at_most(&self, x: f64) -> usize {
        self.tree.count_le(x)
    }

    pub fn count_interval(&self, lo: f64, hi: f64, bounds: Bounds) -> Result<usize> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::domain("interval endpoint is NaN"));
        }
        if lo > hi {
            return Err(Error::range(format!("interval lower end {lo} exceeds upper end {hi}")));
        }
        let upper = match bounds {
            Bounds::Closed => self.tree.count_le(hi),
            Bounds::HalfOpen => self.tree.count_lt(hi),
        };
        Ok(upper - self.tree.count_lt(lo))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p, "quantile level")?;
        if self.is_empty() {
            return Err(Error::state("quantile of an empty group"));
        }
        let rank = ceil_scaled(p, self.len() as u64).max(1) as usize;
        Ok(self.tree.select(rank - 1).expect("rank within size"))
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    pub fn to_sorted_vec(&self) -> Vec<f64> {
        self.tree.to_sorted_vec()
    }
}
