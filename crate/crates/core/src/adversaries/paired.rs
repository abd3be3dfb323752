//! Deterministic adaptive adversary on the paired-uniform metric.
//!
//! With `h_i = (Cn)^(i-n)`, request `r` charges `h_p` at the unprimed state of
//! pair `p` and nothing at the primed one; `r'` charges `(Cn)^(-p-1)` at the
//! primed state and nothing at the unprimed one. Whichever side the algorithm
//! occupies gets charged. A round ends when the algorithm changes pair or has
//! paid `C` inside its pair; a phase is `n/2 - 1` rounds, so some pair is
//! never occupied and the adversary hides there.

use num_rational::BigRational;
use num_traits::Zero;

use super::{int, require_aspect, Adversary, Bounds, Emission, PhaseRecord, Prediction};
use crate::cost::{ceil_to_reps, rational_pow, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{push_run, Block, Request, RequestSet, Run};

pub struct PairedUniform {
    metric: MetricSpace,
    requests: RequestSet,
    pairs: usize,
    c: BigRational,
    target: usize,
    alg: usize,
    last_request: usize,
    round_pair: Option<usize>,
    round_cost: ExtendedCost,
    round_steps: Reps,
    /// (pair, steps) of the finished rounds of the running phase.
    rounds: Vec<(usize, Reps)>,
    hide_state: usize,
    completed: Vec<PhaseRecord>,
}

/// The two requests for `n` points and ratio `c`.
pub fn paired_requests(n: usize, c: &BigRational) -> [Request; 2] {
    let base = c * int(n);
    let nn = n as i64;
    let mut r = vec![ExtendedCost::zero(); n];
    let mut r2 = vec![ExtendedCost::zero(); n];
    for p in 0..n / 2 {
        r[2 * p] = ExtendedCost::Finite(rational_pow(&base, p as i64 - nn));
        r2[2 * p + 1] = ExtendedCost::Finite(rational_pow(&base, -(p as i64) - 1));
    }
    [Request::new(r), Request::new(r2)]
}

impl PairedUniform {
    /// `c = None` picks the default `C = n`.
    pub fn new(n: usize, c: Option<BigRational>, phases: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("n = {n} must be even and at least 4")));
        }
        let c = c.unwrap_or_else(|| int(n));
        require_aspect(&c)?;
        Ok(PairedUniform {
            metric: MetricSpace::paired_uniform(n, c.clone())?,
            requests: RequestSet::new(paired_requests(n, &c).to_vec())?,
            pairs: n / 2,
            c,
            target: phases,
            alg: 0,
            last_request: 0,
            round_pair: None,
            round_cost: ExtendedCost::zero(),
            round_steps: Reps::zero(),
            rounds: Vec::new(),
            hide_state: 0,
            completed: Vec::new(),
        })
    }

    fn close_phase(&mut self) {
        let used: Vec<usize> = self.rounds.iter().map(|r| r.0).collect();
        let j = (0..self.pairs).find(|p| !used.contains(p)).expect("fewer rounds than pairs");
        let mut trace = Vec::new();
        let mut steps = Reps::zero();
        for (i, k) in self.rounds.drain(..) {
            let side = if i < j { 2 * j + 1 } else { 2 * j };
            push_run(&mut trace, side, &k);
            steps += k;
        }
        self.hide_state = trace.last().map_or(self.hide_state, |r| r.state);
        self.completed.push(PhaseRecord { steps, trace });
    }
}

impl Adversary for PairedUniform {
    fn name(&self) -> &'static str {
        "paired-uniform"
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
        self.alg = alg_state;
        if self.round_pair.is_none() {
            self.round_pair = Some(alg_state / 2);
        }
        let request = alg_state % 2;
        self.last_request = request;
        let rate = self.requests.get(request).cost(alg_state).as_finite().expect("positive").clone();
        let room = match &self.round_cost {
            ExtendedCost::Finite(spent) => &self.c - spent,
            ExtendedCost::Infinite => BigRational::zero(),
        };
        let mut count = ceil_to_reps(&(room / rate));
        if count.is_zero() {
            count = Reps::from(1u8);
        }
        Some(Emission { block: Block::new(request, count), stop_on_move: true })
    }

    fn served(&mut self, steps: &Reps, runs: &[Run]) {
        let req = self.requests.get(self.last_request);
        for run in runs {
            self.round_cost += ExtendedCost::Finite(self.metric.d(self.alg, run.state));
            self.round_cost += req.cost(run.state).times(&run.count);
            self.alg = run.state;
        }
        self.round_steps += steps;
        let pair = self.round_pair.expect("round open");
        if self.alg / 2 != pair || self.round_cost >= ExtendedCost::Finite(self.c.clone()) {
            self.rounds.push((pair, std::mem::take(&mut self.round_steps)));
            self.round_pair = None;
            self.round_cost = ExtendedCost::zero();
            if self.rounds.len() == self.pairs - 1 {
                self.close_phase();
            }
        }
    }

    fn completed(&self) -> &[PhaseRecord] {
        &self.completed
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            alg_at_least: Some(&self.c * int(self.pairs - 1)),
            certified_below: Some(&self.c + int(self.pairs)),
            certified_service_below: Some(int(1)),
            ..Default::default()
        }
    }

    fn predicted(&self) -> Prediction {
        Prediction {
            value: &self.c * int(self.pairs - 1) / (&self.c + int(self.pairs)),
            formula: "C(n/2-1)/(C+n/2)".into(),
        }
    }

    fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "adversary": self.name(),
            "kind": "adaptive",
            "n": self.pairs * 2,
            "C": crate::cost::format_rational(&self.c),
            "policy": "request r (index 0) when the algorithm is on an even (unprimed) state, r' (index 1) otherwise; \
                       repeat until the algorithm moves or has paid C in the round",
            "round_end": "pair change or round cost >= C",
            "rounds_per_phase": self.pairs - 1,
        })
    }
}
