//! Requests, request sets, run-length-encoded sequences, instances, and the
//! cost functional that everything else is measured with.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cost::{reps_serde, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;

/// One cost per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Request {
    pub costs: Vec<ExtendedCost>,
}

impl Request {
    pub fn new(costs: Vec<ExtendedCost>) -> Self {
        Request { costs }
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn cost(&self, state: usize) -> &ExtendedCost {
        &self.costs[state]
    }

    pub fn is_set_chasing(&self) -> bool {
        self.costs.iter().all(|c| c.is_zero() || c.is_infinite())
    }

    /// States with cost zero; the set a set-chasing request asks the server to enter.
    pub fn zero_set(&self) -> Vec<usize> {
        (0..self.len()).filter(|&s| self.costs[s].is_zero()).collect()
    }

    /// `hit[s]` is true when the request costs infinity at `s`.
    pub fn hit_vector(&self) -> Vec<bool> {
        self.costs.iter().map(ExtendedCost::is_infinite).collect()
    }

    /// Builds a set-chasing request from its infinite positions.
    pub fn from_hits(hits: &[bool]) -> Self {
        Request::new(
            hits.iter()
                .map(|&h| if h { ExtendedCost::Infinite } else { ExtendedCost::zero() })
                .collect(),
        )
    }
}

/// The finite pool `R` of allowed requests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RequestSet {
    requests: Vec<Request>,
}

impl RequestSet {
    pub fn new(requests: Vec<Request>) -> Result<Self> {
        if let Some(first) = requests.first() {
            let n = first.len();
            if requests.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidParameter("requests have different lengths".into()));
            }
        }
        for i in 0..requests.len() {
            for j in 0..i {
                if requests[i] == requests[j] {
                    return Err(Error::InvalidParameter(format!(
                        "requests {j} and {i} are identical"
                    )));
                }
            }
        }
        Ok(RequestSet { requests })
    }

    pub fn m(&self) -> usize {
        self.requests.len()
    }

    pub fn get(&self, i: usize) -> &Request {
        &self.requests[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Request> {
        self.requests.iter()
    }

    pub fn as_slice(&self) -> &[Request] {
        &self.requests
    }

    /// Point count the requests are defined over (0 for an empty set).
    pub fn point_count(&self) -> usize {
        self.requests.first().map_or(0, Request::len)
    }

    pub fn is_set_chasing(&self) -> bool {
        self.requests.iter().all(Request::is_set_chasing)
    }

    pub fn require_set_chasing(&self) -> Result<()> {
        match self.requests.iter().position(|r| !r.is_set_chasing()) {
            None => Ok(()),
            Some(i) => Err(Error::NotSetChasing(format!("request {i} has a cost outside {{0, inf}}"))),
        }
    }
}

impl<'de> Deserialize<'de> for RequestSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let requests = Vec::<Request>::deserialize(d)?;
        RequestSet::new(requests).map_err(serde::de::Error::custom)
    }
}

/// `repeat` consecutive copies of request `request`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub request: usize,
    pub repeat: Reps,
}

impl Block {
    pub fn new(request: usize, repeat: impl Into<Reps>) -> Self {
        Block { request, repeat: repeat.into() }
    }

    pub fn single(request: usize) -> Self {
        Block::new(request, 1u32)
    }
}

impl Serialize for Block {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Pair<'a>(usize, #[serde(with = "reps_serde")] &'a Reps);
        Pair(self.request, &self.repeat).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Pair(usize, #[serde(with = "reps_serde")] Reps);
        let Pair(request, repeat) = Pair::deserialize(d)?;
        if repeat.is_zero() {
            return Err(serde::de::Error::custom("repeat count must be at least 1"));
        }
        Ok(Block { request, repeat })
    }
}

/// `count` consecutive steps spent at `state`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub state: usize,
    pub count: Reps,
}

impl Run {
    pub fn new(state: usize, count: impl Into<Reps>) -> Self {
        Run { state, count: count.into() }
    }
}

impl Serialize for Run {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Pair<'a>(usize, #[serde(with = "reps_serde")] &'a Reps);
        Pair(self.state, &self.count).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Run {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Pair(usize, #[serde(with = "reps_serde")] Reps);
        let Pair(state, count) = Pair::deserialize(d)?;
        Ok(Run { state, count })
    }
}

/// Appends a run, merging with the previous one when the state repeats.
pub fn push_run(runs: &mut Vec<Run>, state: usize, count: &Reps) {
    if count.is_zero() {
        return;
    }
    match runs.last_mut() {
        Some(last) if last.state == state => last.count += count,
        _ => runs.push(Run { state, count: count.clone() }),
    }
}

pub fn push_block(blocks: &mut Vec<Block>, request: usize, count: &Reps) {
    if count.is_zero() {
        return;
    }
    match blocks.last_mut() {
        Some(last) if last.request == request => last.repeat += count,
        _ => blocks.push(Block { request, repeat: count.clone() }),
    }
}

pub fn total_steps(blocks: &[Block]) -> Reps {
    blocks.iter().map(|b| &b.repeat).sum()
}

/// Steps `[from, to)` of a run-length-encoded sequence.
pub fn slice_blocks(blocks: &[Block], from: &Reps, to: &Reps) -> Vec<Block> {
    let mut out = Vec::new();
    let mut pos = Reps::zero();
    for b in blocks {
        let end = &pos + &b.repeat;
        let lo = (&pos).max(from);
        let hi = (&end).min(to);
        if lo < hi {
            push_block(&mut out, b.request, &(hi - lo));
        }
        pos = end;
        if &pos >= to {
            break;
        }
    }
    out
}

/// Same as [`slice_blocks`] for trajectories.
pub fn slice_runs(runs: &[Run], from: &Reps, to: &Reps) -> Vec<Run> {
    let mut out = Vec::new();
    let mut pos = Reps::zero();
    for r in runs {
        let end = &pos + &r.count;
        let lo = (&pos).max(from);
        let hi = (&end).min(to);
        if lo < hi {
            push_run(&mut out, r.state, &(hi - lo));
        }
        pos = end;
        if &pos >= to {
            break;
        }
    }
    out
}

/// State occupied just before step `at` (the start state when `at` is 0).
pub fn state_before(runs: &[Run], s0: usize, at: &Reps) -> usize {
    let mut pos = Reps::zero();
    let mut state = s0;
    for r in runs {
        if &pos >= at {
            break;
        }
        state = r.state;
        pos += &r.count;
    }
    state
}

/// Unrolls a run-length-encoded sequence into explicit request indices.
///
/// `cap = None` means unlimited.
pub fn expand_rle(blocks: &[Block], cap: Option<u64>) -> Result<Vec<usize>> {
    let total = total_steps(blocks);
    if let Some(cap) = cap {
        if total > BigUint::from(cap) {
            return Err(Error::SequenceTooLong { requested: total.to_string(), cap });
        }
    }
    let len = total.to_usize().ok_or_else(|| Error::SequenceTooLong {
        requested: total.to_string(),
        cap: cap.unwrap_or(u64::MAX),
    })?;
    let mut out = Vec::with_capacity(len);
    for b in blocks {
        let k = b.repeat.to_usize().expect("bounded by total");
        out.extend(std::iter::repeat_n(b.request, k));
    }
    Ok(out)
}

/// Movement and service parts of a cost.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub movement: ExtendedCost,
    pub service: ExtendedCost,
}

impl CostBreakdown {
    pub fn total(&self) -> ExtendedCost {
        &self.movement + &self.service
    }
}

/// `Σ_t d(s_{t-1}, s_t) + ρ_t(s_t)` over explicit states and requests.
pub fn total_cost(
    metric: &MetricSpace,
    s0: usize,
    states: &[usize],
    sequence: &[Request],
) -> Result<ExtendedCost> {
    Ok(cost_breakdown(metric, s0, states, sequence)?.total())
}

pub fn cost_breakdown(
    metric: &MetricSpace,
    s0: usize,
    states: &[usize],
    sequence: &[Request],
) -> Result<CostBreakdown> {
    if states.len() != sequence.len() {
        return Err(Error::InvalidTrace(format!(
            "{} states for {} requests",
            states.len(),
            sequence.len()
        )));
    }
    let n = metric.n();
    let mut out = CostBreakdown::default();
    let mut prev = s0;
    for (&s, req) in states.iter().zip(sequence) {
        if req.len() != n {
            return Err(Error::InvalidTrace(format!("request of length {} on {n} points", req.len())));
        }
        out.movement += metric.distance(prev, s)?;
        out.service += req.cost(s);
        prev = s;
    }
    Ok(out)
}

/// The same functional over a run-length-encoded trajectory and sequence.
pub fn cost_breakdown_rle(
    metric: &MetricSpace,
    requests: &RequestSet,
    s0: usize,
    runs: &[Run],
    blocks: &[Block],
) -> Result<CostBreakdown> {
    let n = metric.n();
    let mut out = CostBreakdown::default();
    let mut prev = s0;
    let (mut ri, mut bi) = (0usize, 0usize);
    let mut run_left = runs.first().map(|r| r.count.clone()).unwrap_or_default();
    let mut block_left = blocks.first().map(|b| b.repeat.clone()).unwrap_or_default();
    let mut entered = false;
    loop {
        while ri < runs.len() && run_left.is_zero() {
            ri += 1;
            entered = false;
            if ri < runs.len() {
                run_left = runs[ri].count.clone();
            }
        }
        while bi < blocks.len() && block_left.is_zero() {
            bi += 1;
            if bi < blocks.len() {
                block_left = blocks[bi].repeat.clone();
            }
        }
        match (ri < runs.len(), bi < blocks.len()) {
            (false, false) => break,
            (true, true) => {}
            _ => return Err(Error::InvalidTrace("trajectory and sequence lengths differ".into())),
        }
        let state = runs[ri].state;
        let req = blocks[bi].request;
        if state >= n {
            return Err(Error::InvalidState { state, n });
        }
        if req >= requests.m() {
            return Err(Error::InvalidTrace(format!("request index {req} out of range")));
        }
        if !entered {
            out.movement += metric.distance(prev, state)?;
            prev = state;
            entered = true;
        }
        let k = run_left.clone().min(block_left.clone());
        out.service += requests.get(req).cost(state).times(&k);
        run_left -= &k;
        block_left -= &k;
    }
    Ok(out)
}

/// A complete problem: metric, request pool, start state and sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub metric: MetricSpace,
    pub requests: RequestSet,
    pub initial_state: usize,
    #[serde(default)]
    pub sequence: Vec<Block>,
}

impl Instance {
    pub fn new(
        metric: MetricSpace,
        requests: RequestSet,
        initial_state: usize,
        sequence: Vec<Block>,
    ) -> Result<Self> {
        let inst = Instance { metric, requests, initial_state, sequence };
        inst.check()?;
        Ok(inst)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.metric.n();
        if self.initial_state >= n {
            return Err(Error::InvalidState { state: self.initial_state, n });
        }
        if self.requests.m() > 0 && self.requests.point_count() != n {
            return Err(Error::InvalidParameter(format!(
                "requests cover {} points but the metric has {n}",
                self.requests.point_count()
            )));
        }
        for b in &self.sequence {
            if b.request >= self.requests.m() {
                return Err(Error::InvalidParameter(format!("sequence index {} ≥ m", b.request)));
            }
            if b.repeat.is_zero() {
                return Err(Error::InvalidParameter("repeat count must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.check()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instances always serialize")
    }
}

/// Full record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub states: Vec<Run>,
    pub movement_cost: ExtendedCost,
    pub service_cost: ExtendedCost,
    pub total: ExtendedCost,
    pub opt: ExtendedCost,
    /// Step indices (0-based, exclusive ends) at which phases close.
    pub phase_marks: Vec<crate::cost::Count>,
    #[serde(with = "crate::cost::rational_serde")]
    pub additive_slack: num_rational::BigRational,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::rat;

    fn req(v: &[&str]) -> Request {
        Request::new(v.iter().map(|s| s.parse().unwrap()).collect())
    }

    #[test]
    fn stay_at_zero_cost() {
        let m = MetricSpace::uniform(2);
        assert_eq!(total_cost(&m, 0, &[0], &[req(&["0", "0"])]).unwrap(), ExtendedCost::zero());
    }

    #[test]
    fn forced_move_costs_distance() {
        let m = MetricSpace::uniform(2);
        assert_eq!(total_cost(&m, 0, &[1], &[req(&["inf", "0"])]).unwrap(), ExtendedCost::one());
    }

    #[test]
    fn paired_uniform_two_steps() {
        let m = MetricSpace::paired_uniform(4, rat(10, 1)).unwrap();
        let seq = [req(&["inf", "0", "0", "0"]), req(&["0", "0", "1/2", "0"])];
        assert_eq!(total_cost(&m, 0, &[2, 2], &seq).unwrap(), ExtendedCost::from_ratio(21, 2));
    }

    #[test]
    fn length_mismatch_is_invalid_trace() {
        let m = MetricSpace::uniform(2);
        let err = total_cost(&m, 0, &[0, 1], &[req(&["0", "0"])]).unwrap_err();
        assert!(matches!(err, Error::InvalidTrace(_)));
    }

    #[test]
    fn expand_examples() {
        let seq = vec![Block::new(0, 3u32), Block::new(1, 1u32)];
        assert_eq!(expand_rle(&seq, None).unwrap(), vec![0, 0, 0, 1]);
        assert_eq!(expand_rle(&[], None).unwrap(), Vec::<usize>::new());
        let huge = vec![Block::new(0, 1_000_000_000u64)];
        assert!(matches!(
            expand_rle(&huge, Some(1_000_000)),
            Err(Error::SequenceTooLong { .. })
        ));
    }

    #[test]
    fn duplicate_requests_rejected() {
        let r = req(&["0", "1"]);
        assert!(RequestSet::new(vec![r.clone(), r]).is_err());
    }

    #[test]
    fn rle_cost_matches_expanded_cost() {
        let m = MetricSpace::uniform(3);
        let rs = RequestSet::new(vec![req(&["1/3", "0", "2"]), req(&["0", "inf", "1"])]).unwrap();
        let blocks = vec![Block::new(0, 2u32), Block::new(1, 3u32)];
        let runs = vec![Run::new(1, 2u32), Run::new(0, 2u32), Run::new(2, 1u32)];
        let rle = cost_breakdown_rle(&m, &rs, 0, &runs, &blocks).unwrap().total();
        let states = [1, 1, 0, 0, 2];
        let seq: Vec<Request> =
            expand_rle(&blocks, None).unwrap().into_iter().map(|i| rs.get(i).clone()).collect();
        assert_eq!(rle, total_cost(&m, 0, &states, &seq).unwrap());
        assert_eq!(rle, ExtendedCost::from_int(4));
    }

    #[test]
    fn instance_json_round_trip_is_bit_exact() {
        let text = r#"{"metric":{"kind":"uniform","n":3},"requests":[["inf","1/4",0],[0,0,"2"]],"initial_state":0,"sequence":[[0,3],[1,1]]}"#;
        let inst = Instance::from_json(text).unwrap();
        let once = inst.to_json();
        let twice = Instance::from_json(&once).unwrap().to_json();
        assert_eq!(once, twice);
        assert_eq!(inst.sequence, vec![Block::new(0, 3u32), Block::new(1, 1u32)]);
    }
}
