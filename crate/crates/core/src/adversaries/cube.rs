//! Binary-cube set chasing on a uniform metric.
//!
//! The first `2^k` states are labeled by `{0,1}^k` (most significant bit is
//! coordinate 1); any further states are forbidden by every request. Request
//! `r_{i,b}` (index `2(i-1) + b`) forbids the labels whose `i`-th coordinate
//! is `b`. A phase draws `b` uniformly and requests `r_{1,b_1}, …, r_{k,b_k}`;
//! the complement of `b` is never forbidden.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{int, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::check::CheckRow;
use crate::cost::Reps;
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{Block, Request, RequestSet, Run};

pub struct CubeMss {
    metric: MetricSpace,
    requests: RequestSet,
    k: usize,
    rng: ChaCha8Rng,
    target: usize,
    bits: usize,
    position: usize,
    completed: Vec<PhaseRecord>,
    safe_hits: usize,
}

/// `r_{i,b}` over `n` states with `k` coordinates; `i` is 1-based.
pub fn cube_request(n: usize, k: usize, i: usize, b: usize) -> Request {
    let hits: Vec<bool> =
        (0..n).map(|s| s >= 1 << k || (s >> (k - i)) & 1 == b).collect();
    Request::from_hits(&hits)
}

/// The label never forbidden during a phase with choice bits `b`.
pub fn safe_label(k: usize, b: usize) -> usize {
    !b & ((1 << k) - 1)
}

impl CubeMss {
    pub fn new(n: usize, m: usize, seed: u64, phases: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("cube-mss needs n >= 2".into()));
        }
        let log = usize::BITS as usize - 1 - n.leading_zeros() as usize;
        let k = (m / 2).min(log);
        if k == 0 {
            return Err(Error::InvalidParameter("cube-mss needs m >= 2".into()));
        }
        let mut requests = Vec::with_capacity(2 * k);
        for i in 1..=k {
            for b in 0..2 {
                requests.push(cube_request(n, k, i, b));
            }
        }
        let mut adv = CubeMss {
            metric: MetricSpace::uniform(n),
            requests: RequestSet::new(requests)?,
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: phases,
            bits: 0,
            position: 0,
            completed: Vec::new(),
            safe_hits: 0,
        };
        adv.bits = adv.rng.gen_range(0..1usize << k);
        Ok(adv)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn bit(&self, i: usize) -> usize {
        (self.bits >> (self.k - 1 - i)) & 1
    }
}

impl Adversary for CubeMss {
    fn name(&self) -> &'static str {
        "cube-mss"
    }

    fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    fn requests(&self) -> &RequestSet {
        &self.requests
    }

    fn next(&mut self, _alg_state: usize) -> Option<Emission> {
        if self.completed.len() >= self.target {
            return None;
        }
        let i = self.position;
        let request = 2 * i + self.bit(i);
        if self.requests.get(request).cost(safe_label(self.k, self.bits)).is_infinite() {
            self.safe_hits += 1;
        }
        Some(Emission { block: Block::single(request), stop_on_move: false })
    }

    fn served(&mut self, _steps: &Reps, _runs: &[Run]) {
        self.position += 1;
        if self.position == self.k {
            let safe = safe_label(self.k, self.bits);
            self.completed.push(PhaseRecord {
                steps: Reps::from(self.k),
                trace: vec![Run::new(safe, self.k)],
            });
            self.position = 0;
            self.bits = self.rng.gen_range(0..1usize << self.k);
        }
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            alg_mean_at_least: Some(int(self.k) / int(2)),
            certified_at_most: Some(int(1)),
            trace_moves_at_most: Some(1),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        Prediction { value: int(self.k) / int(2), formula: "k/2".into() }
    }

    fn checks(&self) -> Vec<CheckRow> {
        vec![CheckRow::at_most("requests hitting the safe label", "all phases", self.safe_hits, 0)]
    }

    fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "adversary": self.name(),
            "kind": "oblivious",
            "k": self.k,
            "request_index": "2(i-1)+b forbids labels with coordinate i equal to b",
            "phase": "draw b uniformly from {0,1}^k; request r_{1,b_1} .. r_{k,b_k}",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coordinate_zero() {
        let r = cube_request(4, 2, 1, 0);
        assert_eq!(r.hit_vector(), vec![true, true, false, false]);
    }

    #[test]
    fn phase_zero_one_spares_one_zero() {
        let b = 0b01;
        let k = 2;
        assert_eq!(safe_label(k, b), 0b10);
        let first = cube_request(4, k, 1, 0);
        let second = cube_request(4, k, 2, 1);
        assert!(!first.cost(0b10).is_infinite());
        assert!(!second.cost(0b10).is_infinite());
    }

    #[test]
    fn extra_states_are_forbidden() {
        let a = CubeMss::new(6, 8, 0, 1).unwrap();
        assert_eq!(a.k(), 2);
        assert!(a.requests().iter().all(|r| r.cost(4).is_infinite() && r.cost(5).is_infinite()));
    }
}
