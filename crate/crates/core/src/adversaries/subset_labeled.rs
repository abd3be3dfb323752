//! Subset-labeled two-level HST against deterministic set chasers.
//!
//! There are `B = binom(m, ⌊m/2⌋)` subtrees, one per `⌊m/2⌋`-subset of the
//! requests in lexicographic order, each with one leaf per subset element.
//! Request `r` forbids every leaf labeled `r`. Whenever the algorithm starts a
//! batch in the subtree labeled `S`, the adversary requests all of `S` in
//! index order, one step each.
//!
//! A period closes at a batch boundary, either when the algorithm is about to
//! start a batch in the last subtree it has not visited during the period, or
//! once its cost in the period reached `C·B`. Either way some subtree `T*` was
//! never the batch subtree, and since `T*` is not contained in any other label
//! there is always a leaf of `T*` the current request spares. The certified
//! trajectory enters `T*` and dodges inside it, moving only when its leaf is
//! requested, to the leaf requested furthest in the future.

use num_rational::BigRational;

use super::{int, require_aspect, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::check::CheckRow;
use crate::cost::{ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::{HstTree, MetricSpace};
use crate::request::{push_run, Block, Request, RequestSet, Run};

pub struct SubsetLabeledHst {
    metric: MetricSpace,
    requests: RequestSet,
    m: usize,
    k: usize,
    subsets: Vec<Vec<usize>>,
    c: BigRational,
    target: usize,
    alg: usize,
    batch: Vec<usize>,
    visited: Vec<bool>,
    period_requests: Vec<usize>,
    period_cost: ExtendedCost,
    hide_end: usize,
    completed: Vec<PhaseRecord>,
    closed_by_cost: usize,
    hiding_hits: usize,
}

/// All `k`-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for e in start..m {
            cur.push(e);
            go(e + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

impl SubsetLabeledHst {
    /// `c = None` picks `C = B`.
    pub fn new(m: usize, c: Option<BigRational>, phases: usize, size_cap: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter("subset-labeled-hst needs m >= 2".into()));
        }
        let k = m / 2;
        let count = binomial(m, k).ok_or_else(|| Error::TooLarge(format!("binom({m},{k}) overflows")))?;
        if count.checked_mul(k).is_none_or(|n| n > size_cap) {
            return Err(Error::TooLarge(format!("{count} subtrees of {k} leaves exceed the cap of {size_cap}")));
        }
        let labels = subsets(m, k);
        let c = c.unwrap_or_else(|| int(labels.len()));
        require_aspect(&c)?;
        let tree = HstTree::two_level(&vec![k; labels.len()], &c)?;
        let requests = (0..m)
            .map(|r| {
                let hits: Vec<bool> = labels.iter().flat_map(|s| s.iter().map(move |&e| e == r)).collect();
                Request::from_hits(&hits)
            })
            .collect();
        let visited = vec![false; labels.len()];
        Ok(SubsetLabeledHst {
            metric: MetricSpace::Hst(tree),
            requests: RequestSet::new(requests)?,
            m,
            k,
            subsets: labels,
            c,
            target: phases,
            alg: 0,
            batch: Vec::new(),
            visited,
            period_requests: Vec::new(),
            period_cost: ExtendedCost::zero(),
            hide_end: 0,
            completed: Vec::new(),
            closed_by_cost: 0,
            hiding_hits: 0,
        })
    }

    pub fn subtree_count(&self) -> usize {
        self.subsets.len()
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Periods closed because the algorithm's cost reached `C·B`.
    pub fn closed_by_cost(&self) -> usize {
        self.closed_by_cost
    }

    fn subtree_of(&self, state: usize) -> usize {
        state / self.k
    }

    fn close(&mut self, hide: usize) {
        let reqs = std::mem::take(&mut self.period_requests);
        let trace = dodge(&self.subsets[hide], hide * self.k, self.hide_end, &reqs);
        let mut t = 0;
        for run in &trace {
            let label = self.subsets[hide][run.state - hide * self.k];
            let len = usize::try_from(&run.count).expect("period fits in memory");
            self.hiding_hits += reqs[t..t + len].iter().filter(|&&r| r == label).count();
            t += len;
        }
        self.hide_end = trace.last().map_or(self.hide_end, |r| r.state);
        self.completed.push(PhaseRecord { steps: Reps::from(reqs.len()), trace });
        self.visited.iter_mut().for_each(|v| *v = false);
        self.period_cost = ExtendedCost::zero();
    }
}

/// Belady dodging inside one subtree whose leaves `base..base+labels.len()`
/// carry `labels`, starting from `from`.
fn dodge(labels: &[usize], base: usize, from: usize, requests: &[usize]) -> Vec<Run> {
    let next_use = |label: usize, at: usize| requests[at..].iter().position(|&r| r == label).unwrap_or(usize::MAX);
    let furthest = |at: usize| {
        (0..labels.len()).max_by_key(|&j| (next_use(labels[j], at), std::cmp::Reverse(j))).expect("non-empty label")
    };
    let inside = from >= base && from < base + labels.len();
    let mut leaf = if inside && next_use(labels[from - base], 0) > 0 { from - base } else { furthest(0) };
    let mut runs = Vec::new();
    let one = Reps::from(1u8);
    for (t, &r) in requests.iter().enumerate() {
        if labels[leaf] == r {
            leaf = furthest(t);
        }
        push_run(&mut runs, base + leaf, &one);
    }
    runs
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

impl Adversary for SubsetLabeledHst {
    fn name(&self) -> &'static str {
        "subset-labeled-hst"
    }

    fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    fn requests(&self) -> &RequestSet {
        &self.requests
    }

    fn unit(&self) -> &'static str {
        "period"
    }

    fn next(&mut self, alg_state: usize) -> Option<Emission> {
        self.alg = alg_state;
        if self.batch.is_empty() {
            let here = self.subtree_of(alg_state);
            let unseen: Vec<usize> = (0..self.visited.len()).filter(|&t| !self.visited[t]).collect();
            let budget = ExtendedCost::Finite(&self.c * int(self.subsets.len()));
            if !self.period_requests.is_empty() && unseen == [here] {
                self.close(here);
            } else if !self.period_requests.is_empty() && self.period_cost >= budget {
                let hide = if unseen.contains(&self.subtree_of(self.hide_end)) {
                    self.subtree_of(self.hide_end)
                } else {
                    unseen[0]
                };
                self.closed_by_cost += 1;
                self.close(hide);
            }
            if self.completed.len() >= self.target {
                return None;
            }
            self.visited[here] = true;
            self.batch = self.subsets[here].iter().rev().copied().collect();
        }
        let request = self.batch.pop().expect("batch refilled");
        self.period_requests.push(request);
        Some(Emission { block: Block::single(request), stop_on_move: false })
    }

    fn served(&mut self, _steps: &Reps, runs: &[Run]) {
        let request = *self.period_requests.last().expect("served after next");
        for run in runs {
            self.period_cost += ExtendedCost::Finite(self.metric.d(self.alg, run.state));
            self.period_cost += self.requests.get(request).cost(run.state).times(&run.count);
            self.alg = run.state;
        }
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        let b = int(self.subsets.len());
        Bounds {
            alg_at_least: Some(&self.c * &b),
            certified_at_most: Some(&b + &self.c),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        let b = int(self.subsets.len());
        Prediction { value: &b * &self.c / (&b + &self.c), formula: "B*C/(B+C), B=binom(m,floor(m/2))".into() }
    }

    fn checks(&self) -> Vec<CheckRow> {
        vec![CheckRow::at_most("steps where the hiding leaf is requested", "all periods", self.hiding_hits, 0)]
    }

    fn descriptor(&self) -> serde_json::Value {
        let labels: Vec<Vec<usize>> = self.subsets.iter().map(|s| s.iter().map(|e| e + 1).collect()).collect();
        serde_json::json!({
            "adversary": self.name(),
            "kind": "adaptive",
            "m": self.m,
            "C": crate::cost::format_rational(&self.c),
            "subtree_labels": labels,
            "policy": "when the algorithm starts a batch in the subtree labeled S, request every element of S in index order",
            "period_end": "the algorithm is about to enter the last subtree not visited in the period, or its period cost reached C*B",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate;

    #[test]
    fn m4_labels() {
        let a = SubsetLabeledHst::new(4, None, 1, 1 << 10).unwrap();
        let want: Vec<Vec<usize>> = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]];
        assert_eq!(a.labels(), &want[..]);
        assert_eq!(a.metric().n(), 12);
        assert!(validate(a.metric()).is_ok());
        // request 0 forbids leaf 0 of the first three subtrees
        assert_eq!(a.requests().get(0).zero_set().len(), 9);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(SubsetLabeledHst::new(20, None, 1, 1000), Err(Error::TooLarge(_))));
    }

    #[test]
    fn dodging_never_stands_on_a_request() {
        let reqs = [0, 1, 0, 2, 1, 2, 0];
        let runs = dodge(&[0, 1], 4, 0, &reqs);
        let mut t = 0;
        for run in &runs {
            for _ in 0..usize::try_from(&run.count).unwrap() {
                let label = [0, 1][run.state - 4];
                assert_ne!(label, reqs[t]);
                t += 1;
            }
        }
        assert_eq!(t, reqs.len());
    }
}
