//! The two-request ladder run independently on `m/2` groups of `2n/m` states.
//!
//! Group `g` owns requests `2g` and `2g + 1`, which cost nothing outside the
//! group. The adversary plays rounds of the group the algorithm sits in; if
//! that group is already exhausted it advances the lowest live group. Rounds
//! are emitted whole, so a group's round state only changes while it is being
//! played. Once a group's rounds are done, one more block pushes its hidden
//! state to accrued cost 1. The phase ends when every state has accrued 1.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::two_request::{interval, ladder};
use super::{int, require_aspect, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::check::CheckRow;
use crate::cost::{ceil_to_reps, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{Block, Request, RequestSet, Run};

pub struct MultiGroupUniform {
    metric: MetricSpace,
    requests: RequestSet,
    n: usize,
    m: usize,
    size: usize,
    q: usize,
    c: BigRational,
    rng: ChaCha8Rng,
    target: usize,
    hidden: Vec<usize>,
    round: Vec<usize>,
    dead: Vec<bool>,
    acc: Vec<ExtendedCost>,
    pending: Option<(usize, bool, usize)>,
    last_killed: usize,
    phase_steps: Reps,
    completed: Vec<PhaseRecord>,
    unfinished_states: usize,
}

impl MultiGroupUniform {
    /// `c = None` picks `C = 8 log2(2n/m)`.
    pub fn new(n: usize, m: usize, c: Option<BigRational>, seed: u64, phases: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) || m > n {
            return Err(Error::InvalidParameter(format!("m = {m} must be even with 2 <= m <= n")));
        }
        if !(2 * n).is_multiple_of(m) || !((2 * n) / m).is_power_of_two() || 2 * n / m < 2 {
            return Err(Error::InvalidParameter(format!("2n/m = {}/{m} must be a power of two", 2 * n)));
        }
        let size = 2 * n / m;
        let q = size.trailing_zeros() as usize;
        let c = c.unwrap_or_else(|| int(8 * q));
        require_aspect(&c)?;
        let groups = m / 2;
        let local = ladder(size, &c);
        let mut requests = Vec::with_capacity(m);
        for g in 0..groups {
            for r in &local {
                let mut costs = vec![ExtendedCost::zero(); n];
                costs[g * size..(g + 1) * size].clone_from_slice(&r.costs);
                requests.push(Request::new(costs));
            }
        }
        let mut adv = MultiGroupUniform {
            metric: MetricSpace::uniform(n),
            requests: RequestSet::new(requests)?,
            n,
            m,
            size,
            q,
            c,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: phases,
            hidden: Vec::new(),
            round: vec![0; groups],
            dead: vec![false; groups],
            acc: vec![ExtendedCost::zero(); n],
            pending: None,
            last_killed: 0,
            phase_steps: Reps::zero(),
            completed: Vec::new(),
            unfinished_states: 0,
        };
        adv.new_phase();
        Ok(adv)
    }

    fn new_phase(&mut self) {
        let groups = self.m / 2;
        self.hidden = (0..groups).map(|_| self.rng.gen_range(0..self.size)).collect();
        self.round = vec![0; groups];
        self.dead = vec![false; groups];
        self.acc = vec![ExtendedCost::zero(); self.n];
    }

    pub fn group_size(&self) -> usize {
        self.size
    }
}

impl Adversary for MultiGroupUniform {
    fn name(&self) -> &'static str {
        "multi-group-uniform"
    }

    fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    fn requests(&self) -> &RequestSet {
        &self.requests
    }

    fn next(&mut self, alg_state: usize) -> Option<Emission> {
        if self.completed.len() >= self.target {
            return None;
        }
        let here = alg_state / self.size;
        let g = if !self.dead[here] {
            here
        } else {
            (0..self.dead.len()).find(|&g| !self.dead[g]).expect("phase still open")
        };
        let h = self.hidden[g];
        let offset = g * self.size;
        let block = if self.round[g] < self.q {
            let i = self.round[g];
            let bit = (h >> (self.q - i - 1)) & 1;
            let (lo, hi) = interval(self.q, h, i);
            let adjacent = if bit == 0 { hi } else { lo - 1 };
            let request = 2 * g + bit;
            let rate = self.requests.get(request).cost(offset + adjacent).as_finite().expect("finite").clone();
            Block::new(request, ceil_to_reps(&(BigRational::one() / rate)))
        } else {
            let request = 2 * g;
            let s = offset + h;
            let rate = self.requests.get(request).cost(s).as_finite().expect("finite").clone();
            let have = self.acc[s].as_finite().cloned().unwrap_or_else(BigRational::one);
            let left = BigRational::one() - have;
            let count = if left <= BigRational::zero() { Reps::one() } else { ceil_to_reps(&(left / rate)) };
            Block::new(request, count.max(Reps::one()))
        };
        self.pending = Some((g, self.round[g] >= self.q, block.request));
        Some(Emission { block, stop_on_move: false })
    }

    fn served(&mut self, steps: &Reps, _runs: &[Run]) {
        let (g, kill, request) = self.pending.take().expect("served after next");
        for s in 0..self.n {
            let add = self.requests.get(request).cost(s).times(steps);
            self.acc[s] += add;
        }
        self.phase_steps += steps;
        if kill {
            self.dead[g] = true;
            self.last_killed = g * self.size + self.hidden[g];
        } else {
            self.round[g] += 1;
        }
        if self.dead.iter().all(|&d| d) {
            self.unfinished_states += self.acc.iter().filter(|a| **a < ExtendedCost::one()).count();
            let steps = std::mem::take(&mut self.phase_steps);
            self.completed.push(PhaseRecord { trace: vec![Run::new(self.last_killed, steps.clone())], steps });
            self.new_phase();
        }
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            certified_at_most: Some(int(2) + int(1) / &self.c),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        let groups = int(self.m / 2);
        Prediction {
            value: groups * int(self.q) / int(2) / (int(2) + int(1) / &self.c),
            formula: "(m/2)(log2(2n/m)/2)/(2+1/C)".into(),
        }
    }

    fn checks(&self) -> Vec<CheckRow> {
        vec![CheckRow::at_most(
            "states below accrued cost 1 at phase end",
            "all phases",
            self.unfinished_states,
            0,
        )]
    }

    fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "adversary": self.name(),
            "kind": "adaptive",
            "n": self.n,
            "m": self.m,
            "group_size": self.size,
            "C": crate::cost::format_rational(&self.c),
            "policy": "play the next whole round of the algorithm's group, or of the lowest live group when the \
                       algorithm's group is exhausted; finish each group by lifting its hidden state to cost 1",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::rat;

    #[test]
    fn single_group_has_the_ladder() {
        let a = MultiGroupUniform::new(8, 2, Some(rat(16, 1)), 0, 1).unwrap();
        assert_eq!(a.requests().as_slice(), &ladder(8, &rat(16, 1))[..]);
    }

    #[test]
    fn group_requests_vanish_outside() {
        let a = MultiGroupUniform::new(8, 4, Some(rat(16, 1)), 0, 1).unwrap();
        assert_eq!(a.group_size(), 4);
        for r in 0..2 {
            assert!((4..8).all(|s| a.requests().get(r).cost(s).is_zero()));
        }
    }

    #[test]
    fn divisibility_is_checked() {
        assert!(MultiGroupUniform::new(12, 4, None, 0, 1).is_err());
    }
}
