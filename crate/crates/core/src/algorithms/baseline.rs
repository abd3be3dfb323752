//! Simple victims for the lower-bound constructions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_start, OnlineAlgorithm};
use crate::cost::{ExtendedCost, Reps};
use crate::error::Result;
use crate::metric::MetricSpace;
use crate::request::RequestSet;

#[derive(Clone, Debug, Default)]
struct Setup {
    metric: Option<MetricSpace>,
    requests: Option<RequestSet>,
    current: usize,
}

impl Setup {
    fn load(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        check_start(metric, requests, s0)?;
        self.metric = Some(metric.clone());
        self.requests = Some(requests.clone());
        self.current = s0;
        Ok(())
    }

    /// argmin over s of d(current, s) + r(s); the current state wins ties, then the lowest index.
    fn best_response(&self, request: usize) -> usize {
        let metric = self.metric.as_ref().expect("initialized");
        let r = self.requests.as_ref().expect("initialized").get(request);
        let mut best = self.current;
        let mut best_cost = r.cost(best).clone();
        for s in 0..metric.n() {
            let c = ExtendedCost::Finite(metric.d(self.current, s)) + r.cost(s);
            if c < best_cost {
                best = s;
                best_cost = c;
            }
        }
        best
    }

    fn cost_here(&self, request: usize) -> &ExtendedCost {
        self.requests.as_ref().expect("initialized").get(request).cost(self.current)
    }
}

/// Moves to the state minimizing movement plus service for the current request.
#[derive(Clone, Debug, Default)]
pub struct Greedy {
    setup: Setup,
}

impl OnlineAlgorithm for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        self.setup.load(metric, requests, s0)
    }

    fn step(&mut self, request: usize) -> usize {
        self.setup.current = self.setup.best_response(request);
        self.setup.current
    }

    fn state(&self) -> usize {
        self.setup.current
    }

    // Once greedy has answered a request, the triangle inequality makes its
    // answer a fixed point for further copies of the same request.
    fn quiet_steps(&self, request: usize) -> Option<Reps> {
        if self.setup.best_response(request) == self.setup.current {
            None
        } else {
            Some(Reps::default())
        }
    }
}

/// Stays put unless the current state costs infinity, then moves greedily.
#[derive(Clone, Debug, Default)]
pub struct Lazy {
    setup: Setup,
}

impl OnlineAlgorithm for Lazy {
    fn name(&self) -> &'static str {
        "lazy"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        self.setup.load(metric, requests, s0)
    }

    fn step(&mut self, request: usize) -> usize {
        if self.setup.cost_here(request).is_infinite() {
            self.setup.current = self.setup.best_response(request);
        }
        self.setup.current
    }

    fn state(&self) -> usize {
        self.setup.current
    }

    fn quiet_steps(&self, request: usize) -> Option<Reps> {
        if self.setup.cost_here(request).is_infinite() {
            Some(Reps::default())
        } else {
            None
        }
    }
}

/// Jumps to a uniformly random state every step. A negative control for the
/// bound checks, not a serious algorithm.
#[derive(Clone, Debug)]
/// Jumps to a uniformly random state of finite cost on every step.
pub struct RandomWalk {
    rng: ChaCha8Rng,
    finite: Vec<Vec<usize>>,
    n: usize,
    current: usize,
}

impl RandomWalk {
    pub fn new(seed: u64) -> Self {
        RandomWalk { rng: ChaCha8Rng::seed_from_u64(seed), finite: Vec::new(), n: 1, current: 0 }
    }
}

impl OnlineAlgorithm for RandomWalk {
    fn name(&self) -> &'static str {
        "random"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        check_start(metric, requests, s0)?;
        self.n = metric.n();
        self.finite = requests
            .iter()
            .map(|r| (0..self.n).filter(|&s| !r.cost(s).is_infinite()).collect())
            .collect();
        self.current = s0;
        Ok(())
    }

    fn step(&mut self, request: usize) -> usize {
        let options = &self.finite[request];
        self.current = if options.is_empty() {
            self.rng.gen_range(0..self.n)
        } else {
            options[self.rng.gen_range(0..options.len())]
        };
        self.current
    }

    fn state(&self) -> usize {
        self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::Request;

    fn set(rows: &[&[&str]]) -> RequestSet {
        RequestSet::new(
            rows.iter()
                .map(|r| Request::new(r.iter().map(|s| s.parse().unwrap()).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn greedy_stays_on_zero_request() {
        let mut g = Greedy::default();
        g.init(&MetricSpace::uniform(3), &set(&[&["0", "0", "0"]]), 2).unwrap();
        assert_eq!(g.step(0), 2);
        assert_eq!(g.quiet_steps(0), None);
    }

    #[test]
    fn greedy_argmin_example() {
        let mut g = Greedy::default();
        g.init(&MetricSpace::uniform(3), &set(&[&["2", "1/2", "3/2"]]), 0).unwrap();
        assert_eq!(g.step(0), 1);
    }

    #[test]
    fn lazy_moves_only_when_forced() {
        let mut l = Lazy::default();
        l.init(&MetricSpace::uniform(2), &set(&[&["inf", "0"], &["1", "0"]]), 0).unwrap();
        assert_eq!(l.step(1), 0);
        assert_eq!(l.step(0), 1);
    }

    #[test]
    fn random_walk_is_reproducible() {
        let rs = set(&[&["0", "0", "0", "0"]]);
        let m = MetricSpace::uniform(4);
        let run = |seed| {
            let mut a = RandomWalk::new(seed);
            a.init(&m, &rs, 0).unwrap();
            (0..20).map(|_| a.step(0)).collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
    }
}
