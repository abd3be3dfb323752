//! Exact offline optimum by dynamic programming over (step, state).
//!
//! Repeated requests are folded in closed form: after `k` copies of `r` the
//! best way to end at `s` is to reach some `u`, sit there for `k - 1` steps
//! and then step to `s`. This follows from the triangle inequality and keeps
//! the solver exact for repeat counts far beyond anything expandable.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cost::{ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{push_run, Block, Request, RequestSet, Run};

/// Default limit on `n^L` for the exhaustive oracle.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub cost: ExtendedCost,
    /// Optimal trajectory as runs; empty when the cost is infinite.
    pub witness: Vec<Run>,
    /// Optimum of each prefix, one entry per block (per step for explicit sequences).
    pub per_prefix: Vec<ExtendedCost>,
}

/// Where the server may start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    At(usize),
    /// Any state, free of charge. Used for the optimum of a sub-sequence.
    Anywhere,
}

struct Step<'a> {
    request: &'a Request,
    repeat: &'a Reps,
}

/// `g(u) = min_s v(s) + d(s, u)` together with the minimizing `s` (lowest index).
fn relax(metric: &MetricSpace, v: &[ExtendedCost]) -> (Vec<ExtendedCost>, Vec<usize>) {
    let n = v.len();
    if metric.uniform_n().is_some() {
        let best = (0..n).min_by(|&a, &b| v[a].cmp(&v[b]).then(a.cmp(&b))).expect("nonempty");
        let via = v[best].clone() + ExtendedCost::one();
        let mut g = Vec::with_capacity(n);
        let mut arg = Vec::with_capacity(n);
        for u in 0..n {
            if v[u] <= via {
                g.push(v[u].clone());
                arg.push(u);
            } else {
                g.push(via.clone());
                arg.push(best);
            }
        }
        return (g, arg);
    }
    let mut g = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for u in 0..n {
        let mut best = (ExtendedCost::Infinite, usize::MAX);
        for (s, vs) in v.iter().enumerate() {
            if vs.is_infinite() {
                continue;
            }
            let c = vs + &ExtendedCost::Finite(metric.d(s, u));
            if c < best.0 {
                best = (c, s);
            }
        }
        if best.1 == usize::MAX {
            best.1 = u;
        }
        g.push(best.0);
        arg.push(best.1);
    }
    (g, arg)
}

struct Trace {
    /// Previous block's end state feeding `u`.
    pred: Vec<usize>,
    /// Sitting state for each end state (equal to the end state when repeat is 1).
    sit: Vec<usize>,
}

fn solve(metric: &MetricSpace, start: Start, steps: &[Step<'_>]) -> Result<OptResult> {
    let n = metric.n();
    if let Start::At(s0) = start {
        if s0 >= n {
            return Err(Error::InvalidState { state: s0, n });
        }
    }
    for st in steps {
        if st.request.len() != n {
            return Err(Error::InvalidTrace(format!(
                "request of length {} on {n} points",
                st.request.len()
            )));
        }
    }
    let mut v: Vec<ExtendedCost> = match start {
        Start::At(s0) => (0..n)
            .map(|s| if s == s0 { ExtendedCost::zero() } else { ExtendedCost::Infinite })
            .collect(),
        Start::Anywhere => vec![ExtendedCost::zero(); n],
    };
    let mut traces = Vec::with_capacity(steps.len());
    let mut per_prefix = Vec::with_capacity(steps.len());
    for st in steps {
        let (g, pred) = relax(metric, &v);
        let r = st.request;
        let extra = st.repeat - BigUint::one();
        let mut next = Vec::with_capacity(n);
        let mut sit = Vec::with_capacity(n);
        if extra.is_zero() {
            for s in 0..n {
                next.push(r.cost(s) + &g[s]);
                sit.push(s);
            }
        } else {
            // h(u) = g(u) + (k - 1) r(u); then relax once more and add r(s).
            let h: Vec<ExtendedCost> = (0..n).map(|u| &g[u] + &r.cost(u).times(&extra)).collect();
            let (hh, arg) = relax(metric, &h);
            for s in 0..n {
                next.push(r.cost(s) + &hh[s]);
                sit.push(arg[s]);
            }
        }
        per_prefix.push(next.iter().min().cloned().expect("nonempty"));
        traces.push(Trace { pred, sit });
        v = next;
    }
    let cost = match v.iter().min() {
        Some(c) => c.clone(),
        None => ExtendedCost::zero(),
    };
    if steps.is_empty() || cost.is_infinite() {
        return Ok(OptResult { cost, witness: Vec::new(), per_prefix });
    }
    let mut end = (0..n).find(|&s| v[s] == cost).expect("minimum exists");
    let mut rev: Vec<(usize, usize)> = Vec::with_capacity(steps.len());
    for t in traces.iter().rev() {
        let u = t.sit[end];
        rev.push((u, end));
        end = t.pred[u];
    }
    let mut witness = Vec::new();
    for (st, &(u, s)) in steps.iter().zip(rev.iter().rev()) {
        let extra = st.repeat - BigUint::one();
        push_run(&mut witness, u, &extra);
        push_run(&mut witness, s, &BigUint::one());
    }
    Ok(OptResult { cost, witness, per_prefix })
}

/// Optimum of an explicit request sequence from `s0`.
pub fn optimal(metric: &MetricSpace, s0: usize, sequence: &[Request]) -> Result<OptResult> {
    let one = BigUint::one();
    let steps: Vec<Step<'_>> = sequence.iter().map(|r| Step { request: r, repeat: &one }).collect();
    solve(metric, Start::At(s0), &steps)
}

/// Optimum of a run-length-encoded sequence.
pub fn optimal_rle(
    metric: &MetricSpace,
    requests: &RequestSet,
    start: Start,
    blocks: &[Block],
) -> Result<OptResult> {
    let mut steps = Vec::with_capacity(blocks.len());
    for b in blocks {
        if b.request >= requests.m() {
            return Err(Error::InvalidTrace(format!("request index {} out of range", b.request)));
        }
        if b.repeat.is_zero() {
            return Err(Error::InvalidTrace("zero repeat count".into()));
        }
        steps.push(Step { request: requests.get(b.request), repeat: &b.repeat });
    }
    solve(metric, start, &steps)
}

/// Exhaustive minimum over all `n^L` trajectories. Test oracle only.
pub fn brute_force_optimal(
    metric: &MetricSpace,
    s0: usize,
    sequence: &[Request],
    limit: u64,
) -> Result<OptResult> {
    let n = metric.n();
    if s0 >= n {
        return Err(Error::InvalidState { state: s0, n });
    }
    let len = sequence.len();
    let space = (n as u64).checked_pow(len as u32).filter(|&x| x <= limit);
    let Some(space) = space else {
        return Err(Error::TooLarge(format!("{n}^{len} trajectories exceed {limit}")));
    };
    if let Some(r) = sequence.iter().find(|r| r.len() != n) {
        return Err(Error::InvalidTrace(format!("request of length {} on {n} points", r.len())));
    }
    let eval = |states: &[usize]| -> ExtendedCost {
        let mut total = ExtendedCost::zero();
        let mut prev = s0;
        for (&s, r) in states.iter().zip(sequence) {
            total += ExtendedCost::Finite(metric.d(prev, s));
            total += r.cost(s);
            prev = s;
        }
        total
    };
    let mut best: Option<(ExtendedCost, Vec<usize>)> = None;
    let mut states = vec![0usize; len];
    for code in 0..space {
        let mut c = code;
        for slot in states.iter_mut().rev() {
            *slot = (c % n as u64) as usize;
            c /= n as u64;
        }
        let cost = eval(&states);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, states.clone()));
        }
    }
    let (cost, states) = best.expect("at least one trajectory");
    let mut per_prefix: Vec<ExtendedCost> = (1..len)
        .map(|t| brute_force_optimal(metric, s0, &sequence[..t], limit).map(|r| r.cost))
        .collect::<Result<Vec<_>>>()?;
    if len > 0 {
        per_prefix.push(cost.clone());
    }
    let witness = if cost.is_infinite() {
        Vec::new()
    } else {
        let mut w = Vec::new();
        for s in states {
            push_run(&mut w, s, &BigUint::one());
        }
        w
    };
    Ok(OptResult { cost, witness, per_prefix })
}

impl OptResult {
    /// Witness as an explicit state list, refusing expansions beyond `cap`.
    pub fn witness_states(&self, cap: u64) -> Result<Vec<usize>> {
        let total: Reps = self.witness.iter().map(|r| &r.count).sum();
        if total > BigUint::from(cap) {
            return Err(Error::SequenceTooLong { requested: total.to_string(), cap });
        }
        let mut out = Vec::new();
        for r in &self.witness {
            out.extend(std::iter::repeat_n(r.state, r.count.to_usize().expect("bounded")));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::{cost_breakdown, cost_breakdown_rle};

    fn req(v: &[&str]) -> Request {
        Request::new(v.iter().map(|s| s.parse().unwrap()).collect())
    }

    #[test]
    fn all_zero_stays_home() {
        let m = MetricSpace::uniform(3);
        let seq = vec![req(&["0", "0", "0"]); 4];
        let r = optimal(&m, 1, &seq).unwrap();
        assert_eq!(r.cost, ExtendedCost::zero());
        assert_eq!(r.witness, vec![Run::new(1, 4u32)]);
    }

    #[test]
    fn forced_move() {
        let m = MetricSpace::uniform(2);
        let r = optimal(&m, 0, &[req(&["inf", "0"])]).unwrap();
        assert_eq!(r.cost, ExtendedCost::one());
    }

    #[test]
    fn three_step_example_matches_oracle() {
        let m = MetricSpace::uniform(3);
        let seq = [req(&["1", "0", "3"]), req(&["0", "2", "0"]), req(&["4", "0", "0"])];
        let dp = optimal(&m, 0, &seq).unwrap();
        let bf = brute_force_optimal(&m, 0, &seq, BRUTE_FORCE_LIMIT).unwrap();
        assert_eq!(dp.cost, bf.cost);
        assert_eq!(dp.per_prefix, bf.per_prefix);
        let states = dp.witness_states(100).unwrap();
        assert_eq!(cost_breakdown(&m, 0, &states, &seq).unwrap().total(), dp.cost);
    }

    #[test]
    fn single_step_is_min_over_targets() {
        let m = MetricSpace::paired_uniform(4, crate::cost::rat(10, 1)).unwrap();
        let r = req(&["5", "3", "1/2", "0"]);
        let dp = optimal(&m, 0, std::slice::from_ref(&r)).unwrap();
        assert_eq!(dp.cost, ExtendedCost::from_int(4));
    }

    #[test]
    fn empty_sequence() {
        let m = MetricSpace::uniform(2);
        let bf = brute_force_optimal(&m, 0, &[], BRUTE_FORCE_LIMIT).unwrap();
        assert_eq!(bf.cost, ExtendedCost::zero());
        assert_eq!(optimal(&m, 0, &[]).unwrap().cost, ExtendedCost::zero());
    }

    #[test]
    fn oracle_refuses_large_spaces() {
        let m = MetricSpace::uniform(10);
        let seq = vec![req(&["0"; 10]); 8];
        assert!(matches!(brute_force_optimal(&m, 0, &seq, 1000), Err(Error::TooLarge(_))));
    }

    #[test]
    fn rle_block_matches_expansion() {
        let m = MetricSpace::uniform(3);
        let rs = RequestSet::new(vec![req(&["1/3", "1/2", "2"]), req(&["0", "inf", "1/5"])]).unwrap();
        let blocks = vec![Block::new(0, 7u32), Block::new(1, 3u32), Block::new(0, 2u32)];
        let rle = optimal_rle(&m, &rs, Start::At(1), &blocks).unwrap();
        let explicit: Vec<Request> = crate::request::expand_rle(&blocks, None)
            .unwrap()
            .into_iter()
            .map(|i| rs.get(i).clone())
            .collect();
        let ex = optimal(&m, 1, &explicit).unwrap();
        assert_eq!(rle.cost, ex.cost);
        let w = cost_breakdown_rle(&m, &rs, 1, &rle.witness, &blocks).unwrap();
        assert_eq!(w.total(), rle.cost);
    }

    #[test]
    fn huge_repeat_counts_stay_exact() {
        let m = MetricSpace::uniform(2);
        let rs = RequestSet::new(vec![req(&["1/1000", "1/999"])]).unwrap();
        let k = BigUint::from(10u32).pow(40);
        let r = optimal_rle(&m, &rs, Start::At(1), &[Block::new(0, k.clone())]).unwrap();
        // Moving once to the cheaper state and staying wins.
        let expected = ExtendedCost::one()
            + ExtendedCost::from_ratio(1, 1000).times(&k);
        assert_eq!(r.cost, expected);
    }

    #[test]
    fn free_start_ignores_initial_position() {
        let m = MetricSpace::uniform(2);
        let rs = RequestSet::new(vec![req(&["inf", "0"])]).unwrap();
        let r = optimal_rle(&m, &rs, Start::Anywhere, &[Block::new(0, 5u32)]).unwrap();
        assert_eq!(r.cost, ExtendedCost::zero());
    }

    #[test]
    fn infinite_optimum_has_empty_witness() {
        let m = MetricSpace::uniform(2);
        let r = optimal(&m, 0, &[req(&["inf", "inf"])]).unwrap();
        assert!(r.cost.is_infinite());
        assert!(r.witness.is_empty());
    }
}
