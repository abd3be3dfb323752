//! Uniform, paired-uniform and leveled HST metric spaces.
//!
//! All spaces here are ultrametrics. Leaves of an HST are indexed left to
//! right in depth-first order, so the leaves below any node form a contiguous
//! index range and indices are stable across serialization.

use std::collections::{BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{format_rational, rational_pow, ExtendedCost};
use crate::error::{Error, Result};
use crate::request::{Request, RequestSet};

/// Above this many points `validate` samples triples instead of enumerating them.
pub const EXHAUSTIVE_VALIDATION_LIMIT: usize = 64;
const SAMPLED_TRIPLES: usize = 20_000;

/// A leveled rooted tree whose leaves are the points of the metric.
///
/// Level 0 holds the leaves and level `L` the root. Every node at level `i`
/// carries weight `level_weights[i - 1]`, and the distance between two leaves
/// is the weight of their least common ancestor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HstTree {
    level_weights: Vec<BigRational>,
    /// Children counts, one row per level from the root down.
    rows: Vec<Vec<usize>>,
    /// `ancestors[l - 1][leaf]` = index of the leaf's ancestor at level `l`.
    ancestors: Vec<Vec<u32>>,
    /// `spans[l][node]` = half-open leaf range below `node` at level `l`.
    spans: Vec<Vec<(usize, usize)>>,
}

impl HstTree {
    /// Builds a tree from children-count rows: `rows[0]` is `[root children]`,
    /// `rows[j]` lists the children counts of the level `L - j` nodes in order,
    /// and the last row gives leaf counts of the level-1 nodes.
    pub fn new(level_weights: Vec<BigRational>, rows: Vec<Vec<usize>>) -> Result<Self> {
        let levels = level_weights.len();
        if levels == 0 {
            return Err(Error::InvalidMetric("an HST needs at least one level".into()));
        }
        if rows.len() != levels {
            return Err(Error::InvalidMetric(format!(
                "{} children rows for {levels} levels",
                rows.len()
            )));
        }
        if rows[0].len() != 1 {
            return Err(Error::InvalidMetric("first row must describe the root alone".into()));
        }
        for j in 1..levels {
            let expected: usize = rows[j - 1].iter().sum();
            if rows[j].len() != expected {
                return Err(Error::InvalidMetric(format!(
                    "row {j} has {} entries, expected {expected}",
                    rows[j].len()
                )));
            }
        }
        if rows.iter().flatten().any(|&c| c == 0) {
            return Err(Error::InvalidMetric("every internal node needs a child".into()));
        }
        let n: usize = rows[levels - 1].iter().sum();

        // parent[l] maps nodes at level l to their parent at level l + 1.
        let mut parent: Vec<Vec<u32>> = vec![Vec::new(); levels];
        for l in 1..=levels {
            let row = &rows[levels - l];
            let mut p = Vec::with_capacity(row.iter().sum());
            for (node, &c) in row.iter().enumerate() {
                p.extend(std::iter::repeat_n(node as u32, c));
            }
            parent[l - 1] = p;
        }
        let mut ancestors = Vec::with_capacity(levels);
        let mut current: Vec<u32> = (0..n as u32).collect();
        for p in parent.iter() {
            current = current.iter().map(|&x| p[x as usize]).collect();
            ancestors.push(current.clone());
        }
        let mut spans = Vec::with_capacity(levels + 1);
        spans.push((0..n).map(|i| (i, i + 1)).collect::<Vec<_>>());
        for l in 1..=levels {
            let count = rows[levels - l].len();
            let mut s = vec![(usize::MAX, 0usize); count];
            for (leaf, &a) in ancestors[l - 1].iter().enumerate() {
                let e = &mut s[a as usize];
                e.0 = e.0.min(leaf);
                e.1 = e.1.max(leaf + 1);
            }
            spans.push(s);
        }
        Ok(HstTree { level_weights, rows, ancestors, spans })
    }

    /// Weights `1, C, C², …` for `rows.len()` levels.
    pub fn with_aspect_ratio(rows: Vec<Vec<usize>>, aspect: &BigRational) -> Result<Self> {
        let weights = (0..rows.len() as i64).map(|i| rational_pow(aspect, i)).collect();
        HstTree::new(weights, rows)
    }

    /// Two-level tree whose level-1 subtrees have the given leaf counts.
    pub fn two_level(subtree_sizes: &[usize], aspect: &BigRational) -> Result<Self> {
        HstTree::with_aspect_ratio(vec![vec![subtree_sizes.len()], subtree_sizes.to_vec()], aspect)
    }

    pub fn levels(&self) -> usize {
        self.level_weights.len()
    }

    pub fn n(&self) -> usize {
        self.spans[0].len()
    }

    pub fn level_weights(&self) -> &[BigRational] {
        &self.level_weights
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Ratio of the top two level weights (1 for a single level).
    pub fn aspect_ratio(&self) -> BigRational {
        match self.level_weights.len() {
            0 | 1 => BigRational::one(),
            l => &self.level_weights[l - 1] / &self.level_weights[l - 2],
        }
    }

    pub fn node_count(&self, level: usize) -> usize {
        self.spans[level].len()
    }

    /// Ancestor of `leaf` at `level` (level 0 is the leaf itself).
    pub fn ancestor(&self, leaf: usize, level: usize) -> usize {
        if level == 0 {
            leaf
        } else {
            self.ancestors[level - 1][leaf] as usize
        }
    }

    /// Half-open range of leaves below `node` at `level`.
    pub fn leaf_span(&self, level: usize, node: usize) -> (usize, usize) {
        self.spans[level][node]
    }

    /// Level of the least common ancestor (0 when `i == j`).
    pub fn lca_level(&self, i: usize, j: usize) -> usize {
        if i == j {
            return 0;
        }
        (1..=self.levels())
            .find(|&l| self.ancestors[l - 1][i] == self.ancestors[l - 1][j])
            .unwrap_or(self.levels())
    }

    pub fn distance(&self, i: usize, j: usize) -> BigRational {
        match self.lca_level(i, j) {
            0 => BigRational::zero(),
            l => self.level_weights[l - 1].clone(),
        }
    }
}

/// A finite ultrametric space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MetricConfig", into = "MetricConfig")]
pub enum MetricSpace {
    Uniform { n: usize },
    /// Points `2p` and `2p + 1` form pair `p` at distance 1; distinct pairs are `c` apart.
    PairedUniform { n: usize, c: BigRational },
    Hst(HstTree),
    /// An explicit distance table, used to check hand-built spaces.
    Table(Vec<Vec<BigRational>>),
}

impl MetricSpace {
    pub fn uniform(n: usize) -> Self {
        MetricSpace::Uniform { n }
    }

    pub fn paired_uniform(n: usize, c: BigRational) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidMetric(format!("paired-uniform needs an even n, got {n}")));
        }
        if c <= BigRational::one() {
            return Err(Error::InvalidMetric("paired-uniform needs C > 1".into()));
        }
        Ok(MetricSpace::PairedUniform { n, c })
    }

    pub fn n(&self) -> usize {
        match self {
            MetricSpace::Uniform { n } | MetricSpace::PairedUniform { n, .. } => *n,
            MetricSpace::Hst(t) => t.n(),
            MetricSpace::Table(d) => d.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MetricSpace::Uniform { .. } => "uniform",
            MetricSpace::PairedUniform { .. } => "paired_uniform",
            MetricSpace::Hst(_) => "hst",
            MetricSpace::Table(_) => "table",
        }
    }

    /// Checked distance.
    pub fn distance(&self, i: usize, j: usize) -> Result<ExtendedCost> {
        let n = self.n();
        for s in [i, j] {
            if s >= n {
                return Err(Error::InvalidState { state: s, n });
            }
        }
        Ok(ExtendedCost::Finite(self.d(i, j)))
    }

    /// Unchecked distance; panics on out-of-range indices.
    pub fn d(&self, i: usize, j: usize) -> BigRational {
        match self {
            _ if i == j && !matches!(self, MetricSpace::Table(_)) => BigRational::zero(),
            MetricSpace::Uniform { .. } => BigRational::one(),
            MetricSpace::PairedUniform { c, .. } => {
                if i / 2 == j / 2 {
                    BigRational::one()
                } else {
                    c.clone()
                }
            }
            MetricSpace::Hst(t) => t.distance(i, j),
            MetricSpace::Table(d) => d[i][j].clone(),
        }
    }

    /// Point count if every pair of distinct points is at distance exactly 1.
    pub fn uniform_n(&self) -> Option<usize> {
        match self {
            MetricSpace::Uniform { n } => Some(*n),
            MetricSpace::Hst(t) if t.levels() == 1 && t.level_weights()[0].is_one() => Some(t.n()),
            _ => None,
        }
    }

    /// The space as an HST when it is one (uniform → one level, paired → two levels).
    pub fn to_hst(&self) -> Option<HstTree> {
        match self {
            MetricSpace::Uniform { n } => {
                HstTree::new(vec![BigRational::one()], vec![vec![*n]]).ok()
            }
            MetricSpace::PairedUniform { n, c } => HstTree::two_level(&vec![2; n / 2], c).ok(),
            MetricSpace::Hst(t) => Some(t.clone()),
            MetricSpace::Table(_) => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics always serialize")
    }
}

/// Serialized metric description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricConfig {
    Uniform {
        n: usize,
    },
    PairedUniform {
        n: usize,
        #[serde(rename = "C")]
        c: ExtendedCost,
    },
    Hst {
        level_weights: Vec<ExtendedCost>,
        tree: Vec<Vec<usize>>,
    },
    Table {
        distances: Vec<Vec<ExtendedCost>>,
    },
}

fn finite(c: ExtendedCost, what: &str) -> Result<BigRational> {
    c.as_finite()
        .cloned()
        .ok_or_else(|| Error::InvalidMetric(format!("{what} must be finite")))
}

impl TryFrom<MetricConfig> for MetricSpace {
    type Error = Error;
    fn try_from(c: MetricConfig) -> Result<Self> {
        match c {
            MetricConfig::Uniform { n } => {
                if n == 0 {
                    return Err(Error::InvalidMetric("empty uniform space".into()));
                }
                Ok(MetricSpace::uniform(n))
            }
            MetricConfig::PairedUniform { n, c } => MetricSpace::paired_uniform(n, finite(c, "C")?),
            MetricConfig::Hst { level_weights, tree } => {
                let w = level_weights
                    .into_iter()
                    .map(|x| finite(x, "level weight"))
                    .collect::<Result<Vec<_>>>()?;
                Ok(MetricSpace::Hst(HstTree::new(w, tree)?))
            }
            MetricConfig::Table { distances } => {
                let n = distances.len();
                let mut out = Vec::with_capacity(n);
                for row in distances {
                    if row.len() != n {
                        return Err(Error::InvalidMetric("distance table must be square".into()));
                    }
                    out.push(row.into_iter().map(|x| finite(x, "distance")).collect::<Result<_>>()?);
                }
                Ok(MetricSpace::Table(out))
            }
        }
    }
}

impl From<MetricSpace> for MetricConfig {
    fn from(m: MetricSpace) -> Self {
        match m {
            MetricSpace::Uniform { n } => MetricConfig::Uniform { n },
            MetricSpace::PairedUniform { n, c } => MetricConfig::PairedUniform { n, c: c.into() },
            MetricSpace::Hst(t) => MetricConfig::Hst {
                level_weights: t.level_weights.iter().cloned().map(Into::into).collect(),
                tree: t.rows,
            },
            MetricSpace::Table(d) => MetricConfig::Table {
                distances: d.into_iter().map(|r| r.into_iter().map(Into::into).collect()).collect(),
            },
        }
    }
}

/// First definitional invariant a space breaks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Identity { i: usize },
    Symmetry { i: usize, j: usize },
    NonPositive { i: usize, j: usize },
    Ultrametric { i: usize, j: usize, k: usize },
    LevelWeights { level: usize, weight: String, previous: String },
    Parameter { message: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Identity { i } => write!(f, "d({i},{i}) != 0"),
            Violation::Symmetry { i, j } => write!(f, "d({i},{j}) != d({j},{i})"),
            Violation::NonPositive { i, j } => write!(f, "d({i},{j}) is not positive"),
            Violation::Ultrametric { i, j, k } => {
                write!(f, "ultrametric inequality fails at ({i},{j},{k})")
            }
            Violation::LevelWeights { level, weight, previous } => write!(
                f,
                "level weights not increasing: w{level} = {weight} <= w{} = {previous}",
                level - 1
            ),
            Violation::Parameter { message } => write!(f, "{message}"),
        }
    }
}

fn check_triple(m: &MetricSpace, i: usize, j: usize, k: usize) -> std::result::Result<(), Violation> {
    let (ij, jk, ik) = (m.d(i, j), m.d(j, k), m.d(i, k));
    if ik > ij.max(jk) {
        return Err(Violation::Ultrametric { i, j, k });
    }
    Ok(())
}

fn check_pair(m: &MetricSpace, i: usize, j: usize) -> std::result::Result<(), Violation> {
    let (a, b) = (m.d(i, j), m.d(j, i));
    if a != b {
        return Err(Violation::Symmetry { i, j });
    }
    if !(a > BigRational::zero()) {
        return Err(Violation::NonPositive { i, j });
    }
    Ok(())
}

/// Checks identity, symmetry, positivity, the ultrametric inequality and
/// level-weight monotonicity.
pub fn validate(space: &MetricSpace) -> std::result::Result<(), Violation> {
    match space {
        MetricSpace::PairedUniform { n, c } => {
            if n % 2 != 0 || *n == 0 {
                return Err(Violation::Parameter { message: format!("paired-uniform n = {n} is not even") });
            }
            if *c <= BigRational::one() {
                return Err(Violation::Parameter { message: "paired-uniform C must exceed 1".into() });
            }
        }
        MetricSpace::Hst(t) => {
            for l in 1..t.levels() {
                if t.level_weights[l] <= t.level_weights[l - 1] {
                    return Err(Violation::LevelWeights {
                        level: l + 1,
                        weight: format_rational(&t.level_weights[l]),
                        previous: format_rational(&t.level_weights[l - 1]),
                    });
                }
            }
            if !(t.level_weights[0] > BigRational::zero()) {
                return Err(Violation::NonPositive { i: 0, j: 0 });
            }
        }
        _ => {}
    }
    let n = space.n();
    if n <= EXHAUSTIVE_VALIDATION_LIMIT {
        for i in 0..n {
            if !space.d(i, i).is_zero() {
                return Err(Violation::Identity { i });
            }
            for j in 0..n {
                if i != j {
                    check_pair(space, i, j)?;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    check_triple(space, i, j, k)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..SAMPLED_TRIPLES {
            let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            if !space.d(i, i).is_zero() {
                return Err(Violation::Identity { i });
            }
            if i != j {
                check_pair(space, i, j)?;
            }
            check_triple(space, i, j, k)?;
        }
    }
    Ok(())
}

/// Result of collapsing equivalent parts of an HST under a set-chasing request pool.
#[derive(Clone, Debug)]
pub struct Trimmed {
    pub tree: HstTree,
    pub requests: RequestSet,
    /// `kept[old] = Some(new)` for surviving leaves.
    pub kept: Vec<Option<usize>>,
    /// Every old leaf that is not hit by all requests, mapped to the surviving
    /// leaf that stands in for it (its own image when it survives).
    pub representative: Vec<Option<usize>>,
    /// Index of each old request in the trimmed pool.
    pub request_of: Vec<usize>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum ShapeKey {
    Leaf(Vec<bool>),
    Node(BTreeSet<u32>),
}

struct Trimmer<'a> {
    tree: &'a HstTree,
    labels: Vec<Vec<bool>>,
    interned: HashMap<ShapeKey, u32>,
}

/// A node after trimming: its shape id and surviving children (or leaf index).
struct Kept {
    shape: u32,
    level: usize,
    node: usize,
    children: Vec<Kept>,
}

impl Trimmer<'_> {
    fn intern(&mut self, key: ShapeKey) -> u32 {
        let next = self.interned.len() as u32;
        *self.interned.entry(key).or_insert(next)
    }

    fn children_of(&self, level: usize, node: usize) -> Vec<usize> {
        // Children of `node` at `level` are the level-(level-1) nodes whose span lies inside it.
        let (lo, hi) = self.tree.leaf_span(level, node);
        let mut out = Vec::new();
        let mut leaf = lo;
        while leaf < hi {
            let c = self.tree.ancestor(leaf, level - 1);
            out.push(c);
            leaf = self.tree.leaf_span(level - 1, c).1;
        }
        out
    }

    fn visit(&mut self, level: usize, node: usize) -> Option<Kept> {
        if level == 0 {
            let label = self.labels[node].clone();
            if label.iter().all(|&h| h) {
                return None;
            }
            let shape = self.intern(ShapeKey::Leaf(label));
            return Some(Kept { shape, level, node, children: Vec::new() });
        }
        let mut seen = BTreeSet::new();
        let mut children = Vec::new();
        for c in self.children_of(level, node) {
            if let Some(k) = self.visit(level - 1, c) {
                if seen.insert(k.shape) {
                    children.push(k);
                }
            }
        }
        if children.is_empty() {
            return None;
        }
        let shape = self.intern(ShapeKey::Node(seen));
        Some(Kept { shape, level, node, children })
    }

    fn shape_of(&mut self, level: usize, node: usize) -> Option<u32> {
        self.visit(level, node).map(|k| k.shape)
    }
}

fn collect_rows(k: &Kept, depth: usize, rows: &mut Vec<Vec<usize>>, leaves: &mut Vec<usize>) {
    if k.level == 0 {
        leaves.push(k.node);
        return;
    }
    rows[depth].push(k.children.len());
    for c in &k.children {
        collect_rows(c, depth + 1, rows, leaves);
    }
}

/// Removes leaves hit by every request and, bottom-up, duplicate siblings
/// with identical labels (leaves by hit vector, internal nodes by the set of
/// their children's labels).
pub fn trim_equivalent(tree: &HstTree, requests: &RequestSet) -> Result<Trimmed> {
    requests.require_set_chasing()?;
    let n = tree.n();
    if requests.m() > 0 && requests.point_count() != n {
        return Err(Error::InvalidParameter("request length differs from leaf count".into()));
    }
    let labels: Vec<Vec<bool>> =
        (0..n).map(|s| requests.iter().map(|r| r.cost(s).is_infinite()).collect()).collect();
    let mut t = Trimmer { tree, labels, interned: HashMap::new() };
    let root = t
        .visit(tree.levels(), 0)
        .ok_or_else(|| Error::InvalidParameter("every leaf is hit by every request".into()))?;

    // BFS order of rows: collect level by level.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); tree.levels()];
    let mut frontier: Vec<&Kept> = vec![&root];
    for row in rows.iter_mut() {
        let mut next = Vec::new();
        for k in frontier {
            row.push(k.children.len());
            next.extend(k.children.iter());
        }
        frontier = next;
    }
    let mut leaves = Vec::new();
    let mut dfs_rows: Vec<Vec<usize>> = vec![Vec::new(); tree.levels()];
    collect_rows(&root, 0, &mut dfs_rows, &mut leaves);
    debug_assert_eq!(rows, dfs_rows);

    let mut kept = vec![None; n];
    for (new, &old) in leaves.iter().enumerate() {
        kept[old] = Some(new);
    }

    // Map every non-dominated leaf to a survivor with the same label by
    // walking down the kept tree along matching shapes.
    let mut representative = vec![None; n];
    for leaf in 0..n {
        if let Some(new) = kept[leaf] {
            representative[leaf] = Some(new);
            continue;
        }
        let mut cur = &root;
        let mut ok = true;
        for level in (0..tree.levels()).rev() {
            let anc = tree.ancestor(leaf, level);
            let Some(shape) = t.shape_of(level, anc) else {
                ok = false;
                break;
            };
            match cur.children.iter().find(|c| c.shape == shape) {
                Some(c) => cur = c,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            representative[leaf] = kept[cur.node];
        }
    }

    let new_tree = HstTree::new(tree.level_weights.clone(), rows)?;
    // Trimming can merge two requests that differed only on removed leaves.
    let mut pool: Vec<Request> = Vec::new();
    let mut request_of = Vec::with_capacity(requests.m());
    for r in requests.iter() {
        let nr = Request::new(leaves.iter().map(|&old| r.cost(old).clone()).collect());
        match pool.iter().position(|p| *p == nr) {
            Some(i) => request_of.push(i),
            None => {
                request_of.push(pool.len());
                pool.push(nr);
            }
        }
    }
    let new_requests = RequestSet::new(pool)?;
    Ok(Trimmed { tree: new_tree, requests: new_requests, kept, representative, request_of })
}
