//! Meta-sequences on a cube-labeled HST, and their iterated lifting.
//!
//! With `d = ⌊m/2⌋` the leaves are labeled by cube nodes `{0,1}^d` and request
//! `r_{i,b}` (index `2(i-1) + b`) forbids the leaves whose `i`-th coordinate
//! is `b`. Level-0 items are cube nodes. The items of every level come in
//! complementary pairs: pair `p` is item `p` and its bitwise complement. A
//! level-`l` item picks one item of each level-`(l-1)` pair, encoded as a
//! bitmask (most significant bit is pair 0, a set bit picks the complement).
//! Every item is both a node of the tree (its children are its picks) and a
//! request sequence: a cube node `b` is `r_{1,b_1} .. r_{d,b_d}`, and a
//! level-`l` item repeats the sequence of each pick `C` times in pair order.
//!
//! The sequence of an item is survived by exactly one item of its level, its
//! complement. A phase plays the sequence of a uniformly random top item `Y`
//! and the adversary hides under `~Y`, recursively in the complement of
//! whichever pick is being played.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{int, require_aspect, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::check::CheckRow;
use crate::cost::{rational_pow, Reps};
use crate::error::{Error, Result};
use crate::metric::{HstTree, MetricSpace};
use crate::request::{push_block, push_run, Block, Request, RequestSet, Run};

/// `c_1 = ⌊m/2⌋`, `c_l = 2^(c_(l-1) - 1)`, for `l = 1..=levels`.
pub fn lift_values(m: usize, levels: usize) -> Result<Vec<BigUint>> {
    if m < 2 {
        return Err(Error::InvalidParameter("lifting needs m >= 2".into()));
    }
    let mut out = vec![BigUint::from(m / 2)];
    while out.len() < levels {
        let prev = out.last().expect("non-empty");
        let exp = prev
            .to_u32()
            .filter(|&e| e <= 1 << 20)
            .ok_or_else(|| Error::TooLarge(format!("c_{} = 2^({prev} - 1) is too large", out.len() + 1)))?;
        out.push(BigUint::one() << (exp - 1) as usize);
    }
    Ok(out)
}

pub struct LiftedConstruction {
    metric: MetricSpace,
    requests: RequestSet,
    d: usize,
    levels: usize,
    /// Items per level, `items[0] = 2^d`.
    items: Vec<usize>,
    /// Leaves below one node of each level.
    below: Vec<usize>,
    c: BigRational,
    reps: usize,
    rng: ChaCha8Rng,
    target: usize,
    queue: Vec<Block>,
    cursor: usize,
    top: usize,
    phase_steps: Reps,
    completed: Vec<PhaseRecord>,
    bad_phases: usize,
}

impl LiftedConstruction {
    /// A tree with `levels` levels above the leaves; `levels = 2` is the
    /// meta-sequence construction. `c = None` picks `C = 16 P` where `P` is
    /// the number of pairs played per phase.
    pub fn new(
        m: usize,
        levels: usize,
        c: Option<BigRational>,
        seed: u64,
        phases: usize,
        size_cap: usize,
    ) -> Result<Self> {
        if m < 2 || levels < 2 {
            return Err(Error::InvalidParameter(format!("need m >= 2 and levels >= 2, got m={m} levels={levels}")));
        }
        let d = m / 2;
        let too_large = || Error::TooLarge(format!("the {levels}-level construction for m={m} exceeds {size_cap} leaves"));
        let mut items = vec![1usize << d];
        while items.len() < levels {
            let pairs = items.last().expect("non-empty") / 2;
            if pairs >= usize::BITS as usize - 1 {
                return Err(too_large());
            }
            items.push(1usize << pairs);
        }
        let mut below = vec![1usize];
        for l in 1..levels {
            let n = below[l - 1].checked_mul(items[l - 1] / 2).ok_or_else(too_large)?;
            below.push(n);
        }
        let leaves = below[levels - 1].checked_mul(items[levels - 1]).ok_or_else(too_large)?;
        if leaves > size_cap {
            return Err(too_large());
        }
        let pairs_top = items[levels - 2] / 2;
        let c = c.unwrap_or_else(|| int(16 * pairs_top));
        require_aspect(&c)?;
        if !c.is_integer() {
            return Err(Error::InvalidParameter("C must be an integer: sequences repeat C times".into()));
        }
        let reps = c.to_integer().to_usize().ok_or_else(|| Error::TooLarge("C".into()))?;

        let mut rows = vec![vec![items[levels - 1]]];
        for l in (1..levels).rev() {
            rows.push(vec![items[l - 1] / 2; rows.last().expect("non-empty").iter().sum()]);
        }
        let tree = HstTree::with_aspect_ratio(rows, &c)?;

        let mut labels = Vec::with_capacity(leaves);
        for top in 0..items[levels - 1] {
            collect_leaves(&items, levels - 1, top, &mut labels);
        }
        let mut requests = Vec::with_capacity(2 * d);
        for i in 1..=d {
            for b in 0..2 {
                let hits: Vec<bool> = labels.iter().map(|&x| coordinate(d, x, i) == b).collect();
                requests.push(Request::from_hits(&hits));
            }
        }

        let mut adv = LiftedConstruction {
            metric: MetricSpace::Hst(tree),
            requests: RequestSet::new(requests)?,
            d,
            levels,
            items,
            below,
            c,
            reps,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: phases,
            queue: Vec::new(),
            cursor: 0,
            top: 0,
            phase_steps: Reps::default(),
            completed: Vec::new(),
            bad_phases: 0,
        };
        adv.start_phase();
        Ok(adv)
    }

    fn start_phase(&mut self) {
        let top_level = self.levels - 1;
        self.top = self.rng.gen_range(0..self.items[top_level]);
        self.queue.clear();
        self.cursor = 0;
        let mut queue = Vec::new();
        self.play(top_level, self.top, &mut queue);
        self.queue = queue;
    }

    fn play(&self, level: usize, item: usize, out: &mut Vec<Block>) {
        let one = Reps::one();
        if level == 0 {
            for i in 1..=self.d {
                push_block(out, 2 * (i - 1) + coordinate(self.d, item, i), &one);
            }
            return;
        }
        for p in 0..self.items[level - 1] / 2 {
            let pick = pick(&self.items, level, item, p);
            for _ in 0..self.reps {
                self.play(level - 1, pick, out);
            }
        }
    }

    fn hide(&self, level: usize, item: usize, offset: usize, out: &mut Vec<Run>) {
        if level == 0 {
            push_run(out, offset, &Reps::from(self.d));
            return;
        }
        for p in 0..self.items[level - 1] / 2 {
            let pick = pick(&self.items, level, item, p);
            for _ in 0..self.reps {
                self.hide(level - 1, pick, offset + p * self.below[level - 1], out);
            }
        }
    }

    /// Levels above the leaves.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Number of top-level subtrees, which is also the number of top sequences.
    pub fn top_items(&self) -> usize {
        self.items[self.levels - 1]
    }

    /// Top subtrees that survive the sequence of top item `y`, found by
    /// evaluating every constituent cube sequence against the leaf labels.
    pub fn never_hit(&self, y: usize) -> Vec<usize> {
        let l = self.levels - 1;
        (0..self.items[l]).filter(|&z| self.survives(l, z, y)).collect()
    }

    fn survives(&self, level: usize, node: usize, item: usize) -> bool {
        if level == 0 {
            return (1..=self.d).all(|i| coordinate(self.d, node, i) != coordinate(self.d, item, i));
        }
        let pairs = self.items[level - 1] / 2;
        (0..pairs).all(|p| {
            let played = pick(&self.items, level, item, p);
            (0..pairs).any(|q| self.survives(level - 1, pick(&self.items, level, node, q), played))
        })
    }

    /// Movement of the hiding trajectory inside `~Y` for one top sequence.
    fn hiding_cost(&self, level: usize) -> BigRational {
        if level == 0 {
            return int(0);
        }
        let pairs = int(self.items[level - 1] / 2);
        pairs * (rational_pow(&self.c, level as i64 - 1) + &self.c * self.hiding_cost(level - 1))
    }

    fn top_weight(&self) -> BigRational {
        rational_pow(&self.c, self.levels as i64 - 1)
    }

    fn alg_floor(&self) -> BigRational {
        self.top_weight() * int(self.items[self.levels - 2] / 2) / int(2)
    }
}

/// The `p`-th child of `item` at `level`.
fn pick(items: &[usize], level: usize, item: usize, p: usize) -> usize {
    let below = items[level - 1];
    let pairs = below / 2;
    if (item >> (pairs - 1 - p)) & 1 == 1 {
        p ^ (below - 1)
    } else {
        p
    }
}

/// Coordinate `i` (1-based, most significant first) of a cube node.
fn coordinate(d: usize, node: usize, i: usize) -> usize {
    (node >> (d - i)) & 1
}

fn collect_leaves(items: &[usize], level: usize, item: usize, out: &mut Vec<usize>) {
    if level == 0 {
        out.push(item);
        return;
    }
    for p in 0..items[level - 1] / 2 {
        collect_leaves(items, level - 1, pick(items, level, item, p), out);
    }
}

impl Adversary for LiftedConstruction {
    fn name(&self) -> &'static str {
        if self.levels == 2 {
            "meta-sequence"
        } else {
            "lift-construction"
        }
    }

    fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    fn requests(&self) -> &RequestSet {
        &self.requests
    }

    fn unit(&self) -> &'static str {
        "meta-sequence"
    }

    fn next(&mut self, _alg_state: usize) -> Option<Emission> {
        if self.completed.len() >= self.target {
            return None;
        }
        let block = self.queue[self.cursor].clone();
        Some(Emission { block, stop_on_move: false })
    }

    fn served(&mut self, steps: &Reps, _runs: &[Run]) {
        self.phase_steps += steps;
        self.cursor += 1;
        if self.cursor < self.queue.len() {
            return;
        }
        let top_level = self.levels - 1;
        let hidden = self.top ^ (self.items[top_level] - 1);
        if self.never_hit(self.top) != [hidden] {
            self.bad_phases += 1;
        }
        let mut trace = Vec::new();
        self.hide(top_level, self.top, hidden * self.below[top_level], &mut trace);
        let steps = std::mem::take(&mut self.phase_steps);
        self.completed.push(PhaseRecord { steps, trace });
        self.start_phase();
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            alg_mean_at_least: Some(self.alg_floor()),
            certified_at_most: Some(self.top_weight() + self.hiding_cost(self.levels - 1)),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        let cert = self.top_weight() + self.hiding_cost(self.levels - 1);
        let formula = if self.levels == 2 {
            "(C*2^(m/2-1)/2)/(C+2^(m/2-1))".to_string()
        } else {
            format!("(C^{}*P/2)/certified, P={} pairs per phase", self.levels - 1, self.items[self.levels - 2] / 2)
        };
        Prediction { value: self.alg_floor() / cert, formula }
    }

    fn checks(&self) -> Vec<CheckRow> {
        vec![CheckRow::at_most(
            "phases without exactly one never-hit top subtree",
            "all phases",
            self.bad_phases,
            0,
        )]
    }

    fn descriptor(&self) -> serde_json::Value {
        let top = self.items[self.levels - 1];
        let survivors: Vec<usize> = (0..top).map(|y| self.never_hit(y).len()).collect();
        let pairs = self.items[self.levels - 2] / 2;
        serde_json::json!({
            "adversary": self.name(),
            "kind": "oblivious",
            "m": 2 * self.d,
            "levels": self.levels,
            "C": crate::cost::format_rational(&self.c),
            "items_per_level": self.items,
            "leaves": self.metric.n(),
            "top_subtrees": top,
            "top_sequences": top,
            "recursion_values": lift_values(2 * self.d, self.levels)
                .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>())
                .unwrap_or_default(),
            "never_hit_per_sequence": survivors,
            "phase": "draw a top item Y uniformly and play its sequence: each pick repeated C times, recursively",
            "alg_per_phase_candidates": {
                "with_half": crate::cost::format_rational(&(self.top_weight() * int(pairs) / int(2))),
                "without_half": crate::cost::format_rational(&(self.top_weight() * int(pairs))),
            },
        })
    }
}
