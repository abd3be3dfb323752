//! Two requests on a uniform metric of `n = 2^q` states.
//!
//! `r0(i) = C^(i-n)` grows to the right and `r1(i) = C^(-i-1)` grows to the
//! left. A phase hides at a uniformly random `h` and narrows a dyadic interval
//! around it bit by bit: round `i` repeats the request that is expensive on
//! the side of `J_i` away from `h` until the state just outside `J_i` on that
//! side has accrued cost 1.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{int, require_aspect, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::cost::{ceil_to_reps, rational_pow, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{Block, Request, RequestSet, Run};

pub struct TwoRequestUniform {
    metric: MetricSpace,
    requests: RequestSet,
    n: usize,
    q: usize,
    c: BigRational,
    rng: ChaCha8Rng,
    target: usize,
    hidden: usize,
    round: usize,
    phase_steps: Reps,
    completed: Vec<PhaseRecord>,
}

/// `(lo, hi)` of `J_i`, the states sharing the top `i + 1` bits of `h`.
pub fn interval(q: usize, h: usize, i: usize) -> (usize, usize) {
    let width = 1usize << (q - i - 1);
    let lo = h / width * width;
    (lo, lo + width)
}

/// The ladder pair for `n` states and ratio `c`.
pub fn ladder(n: usize, c: &BigRational) -> [Request; 2] {
    let n = n as i64;
    let up = (0..n).map(|i| ExtendedCost::Finite(rational_pow(c, i - n))).collect();
    let down = (0..n).map(|i| ExtendedCost::Finite(rational_pow(c, -i - 1))).collect();
    [Request::new(up), Request::new(down)]
}

/// Round `i` of a phase hiding at `h`: the request index and how often it is repeated.
pub fn round_block(requests: &RequestSet, q: usize, h: usize, i: usize) -> Block {
    let bit = (h >> (q - i - 1)) & 1;
    let (lo, hi) = interval(q, h, i);
    let adjacent = if bit == 0 { hi } else { lo - 1 };
    let rate = requests.get(bit).cost(adjacent).as_finite().expect("finite ladder").clone();
    Block::new(bit, ceil_to_reps(&(BigRational::from_integer(1.into()) / rate)))
}

impl TwoRequestUniform {
    /// `c = None` picks the default `C = 8q`.
    pub fn new(n: usize, c: Option<BigRational>, seed: u64, phases: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("n = {n} must be a power of two >= 2")));
        }
        let q = n.trailing_zeros() as usize;
        let c = c.unwrap_or_else(|| int(8 * q));
        require_aspect(&c)?;
        let requests = RequestSet::new(ladder(n, &c).to_vec())?;
        let mut adv = TwoRequestUniform {
            metric: MetricSpace::uniform(n),
            requests,
            n,
            q,
            c,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: phases,
            hidden: 0,
            round: 0,
            phase_steps: Reps::default(),
            completed: Vec::new(),
        };
        adv.hidden = adv.rng.gen_range(0..n);
        Ok(adv)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

impl Adversary for TwoRequestUniform {
    fn name(&self) -> &'static str {
        "two-request-uniform"
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
        Some(Emission {
            block: round_block(&self.requests, self.q, self.hidden, self.round),
            stop_on_move: false,
        })
    }

    fn served(&mut self, steps: &Reps, _runs: &[Run]) {
        self.phase_steps += steps;
        self.round += 1;
        if self.round == self.q {
            let steps = std::mem::take(&mut self.phase_steps);
            self.completed.push(PhaseRecord { trace: vec![Run::new(self.hidden, steps.clone())], steps });
            self.round = 0;
            self.hidden = self.rng.gen_range(0..self.n);
        }
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        let q = int(self.q);
        Bounds {
            alg_mean_at_least: Some(&q / int(2)),
            certified_at_most: Some(int(1) + int(2) * &q / &self.c),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        let q = int(self.q);
        Prediction {
            value: (&q / int(2)) / (int(1) + int(2) * &q / &self.c),
            formula: "(q/2)/(1+2q/C)".into(),
        }
    }

    fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "adversary": self.name(),
            "kind": "oblivious",
            "n": self.n,
            "q": self.q,
            "C": crate::cost::format_rational(&self.c),
            "phase": "sample h uniformly; for i in 0..q repeat r^{h_i} ceil(1/r(adjacent)) times",
        })
    }
}
