//! Deterministic phase/round algorithm for MTS on a uniform metric with `m`
//! distinct requests.
//!
//! A phase starts with every state alive. Each round the algorithm parks on
//! a pivot of the alive set. The round ends as soon as at least `|S|/2m`
//! alive states have accrued phase cost 1, and the `⌈|S|/2m⌉` most expensive
//! states are dropped. Once fewer than `m ln(en/m)` states survive, the last
//! round cycles among them by threshold until each has accrued cost 1 within
//! that round, which closes the phase.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{check_start, pivot::select_pivot, OnlineAlgorithm};
use crate::check::CheckRow;
use crate::cost::{ceil_to_reps, rational_of, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::RequestSet;

#[derive(Clone, Debug, Default)]
pub struct PhasedUniformMts {
    requests: Option<RequestSet>,
    n: usize,
    m: usize,
    current: usize,
    /// Where the algorithm wants to be: the pivot, or the cycling target in the last round.
    home: usize,
    steps: Reps,
    phase_open: bool,
    alive: Vec<usize>,
    acc: Vec<ExtendedCost>,
    last_round: bool,
    round_acc: Vec<ExtendedCost>,
    rounds: usize,
    last_round_threshold: f64,
    marks: Vec<Reps>,
    rounds_per_phase: Vec<usize>,
    /// (|S_{r-1}|, |S_r|) at every regular round end.
    contractions: Vec<(usize, usize)>,
}

fn one() -> ExtendedCost {
    ExtendedCost::one()
}

/// Copies of a request with per-copy cost `rate` needed to lift `acc` to at least 1.
fn copies_to_one(acc: &ExtendedCost, rate: &ExtendedCost) -> Option<Reps> {
    if *acc >= one() {
        return Some(Reps::zero());
    }
    match rate {
        ExtendedCost::Infinite => Some(Reps::one()),
        ExtendedCost::Finite(r) if r.is_zero() => None,
        ExtendedCost::Finite(r) => {
            let a = acc.as_finite().expect("below one");
            Some(ceil_to_reps(&((BigRational::one() - a) / r)))
        }
    }
}

impl PhasedUniformMts {
    /// Rounds allowed per phase: `2m ln(n/m) + 1` (the log term clamped at 0).
    pub fn round_bound(n: usize, m: usize) -> f64 {
        2.0 * m as f64 * (n as f64 / m as f64).ln().max(0.0) + 1.0
    }

    pub fn rounds_per_phase(&self) -> &[usize] {
        &self.rounds_per_phase
    }

    fn request(&self, r: usize) -> &crate::request::Request {
        self.requests.as_ref().expect("initialized").get(r)
    }

    fn start_phase(&mut self) {
        self.phase_open = true;
        self.alive = (0..self.n).collect();
        self.acc = vec![ExtendedCost::zero(); self.n];
        self.rounds = 1;
        self.last_round = false;
        self.begin_round();
    }

    fn begin_round(&mut self) {
        // With one survivor there is nothing left to contract, whatever the threshold says.
        if self.alive.len() <= 1 || (self.alive.len() as f64) < self.last_round_threshold {
            self.last_round = true;
            self.round_acc = vec![ExtendedCost::zero(); self.n];
            if !self.alive.contains(&self.home) {
                self.home = self.alive[0];
            }
        } else {
            let requests = self.requests.as_ref().expect("initialized");
            // A pivot always exists for a nonempty set; the fallback is never taken.
            self.home = select_pivot(&self.alive, requests).unwrap_or(self.alive[0]);
        }
    }

    fn reached_one(&self) -> usize {
        self.alive.iter().filter(|&&s| self.acc[s] >= one()).count()
    }

    fn round_over(&self) -> bool {
        self.reached_one() * 2 * self.m >= self.alive.len()
    }

    fn end_round(&mut self) {
        let before = self.alive.len();
        let drop = before.div_ceil(2 * self.m).min(before - 1);
        let mut order = self.alive.clone();
        // Most expensive first; equal costs drop the lower index first.
        order.sort_by(|&a, &b| self.acc[b].cmp(&self.acc[a]).then(a.cmp(&b)));
        let removed: Vec<usize> = order[..drop].to_vec();
        self.alive.retain(|s| !removed.contains(s));
        self.contractions.push((before, self.alive.len()));
        self.rounds += 1;
        self.begin_round();
    }

    fn cheapest_alive_by_round_cost(&self) -> usize {
        *self
            .alive
            .iter()
            .min_by(|&&a, &&b| self.round_acc[a].cmp(&self.round_acc[b]).then(a.cmp(&b)))
            .expect("alive set is nonempty")
    }

    fn accrue(&mut self, r: usize, count: &Reps) {
        let costs: Vec<(usize, ExtendedCost)> =
            self.alive.iter().map(|&s| (s, self.request(r).cost(s).times(count))).collect();
        let target = if self.last_round { &mut self.round_acc } else { &mut self.acc };
        for (s, c) in costs {
            target[s] += c;
        }
        self.steps += count;
    }
}

impl OnlineAlgorithm for PhasedUniformMts {
    fn name(&self) -> &'static str {
        "phased-uniform-mts"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        let n = metric
            .uniform_n()
            .ok_or_else(|| Error::UnsupportedMetric(format!("{} metric, need uniform", metric.kind_name())))?;
        check_start(metric, requests, s0)?;
        if requests.m() == 0 {
            return Err(Error::InvalidParameter("empty request set".into()));
        }
        *self = PhasedUniformMts {
            requests: Some(requests.clone()),
            n,
            m: requests.m(),
            current: s0,
            home: s0,
            last_round_threshold: requests.m() as f64
                * (std::f64::consts::E * n as f64 / requests.m() as f64).ln(),
            ..Default::default()
        };
        Ok(())
    }

    fn step(&mut self, r: usize) -> usize {
        if !self.phase_open {
            self.start_phase();
        }
        self.accrue(r, &Reps::one());
        if !self.last_round {
            while !self.last_round && self.round_over() {
                self.end_round();
            }
        } else if self.alive.iter().all(|&s| self.round_acc[s] >= one()) {
            self.marks.push(self.steps.clone());
            self.rounds_per_phase.push(self.rounds);
            self.phase_open = false;
        } else if self.round_acc[self.home] >= one() {
            self.home = self.cheapest_alive_by_round_cost();
        }
        self.current = self.home;
        if self.request(r).cost(self.current).is_infinite() {
            // Never sit on an infinite cost when a finite one is available.
            let req = self.request(r);
            if let Some(s) = (0..self.n).filter(|&s| !req.cost(s).is_infinite()).min_by(|&a, &b| {
                req.cost(a).cmp(req.cost(b)).then(a.cmp(&b))
            }) {
                self.current = s;
            }
        }
        self.current
    }

    fn state(&self) -> usize {
        self.current
    }

    fn quiet_steps(&self, r: usize) -> Option<Reps> {
        if !self.phase_open || self.current != self.home {
            return Some(Reps::zero());
        }
        let req = self.request(r);
        if req.cost(self.home).is_infinite() {
            return Some(Reps::zero());
        }
        let event = if self.last_round {
            let mut to_end = Some(Reps::zero());
            for &s in &self.alive {
                to_end = match (to_end, copies_to_one(&self.round_acc[s], req.cost(s))) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            let to_move = copies_to_one(&self.round_acc[self.home], req.cost(self.home));
            match (to_end, to_move) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        } else {
            let need = self.alive.len().div_ceil(2 * self.m);
            let mut taus: Vec<Reps> =
                self.alive.iter().filter_map(|&s| copies_to_one(&self.acc[s], req.cost(s))).collect();
            taus.sort();
            taus.get(need.max(1) - 1).cloned()
        };
        match event {
            None => None,
            Some(e) if e.is_zero() => Some(Reps::zero()),
            Some(e) => Some(e - Reps::one()),
        }
    }

    fn apply_quiet(&mut self, r: usize, count: &Reps) {
        self.accrue(r, count);
    }

    fn marks(&self) -> Vec<Reps> {
        self.marks.clone()
    }

    fn checks(&self) -> Vec<CheckRow> {
        let bound = Self::round_bound(self.n, self.m);
        let mut rows: Vec<CheckRow> = self
            .rounds_per_phase
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                CheckRow::new(
                    "rounds per phase <= 2m ln(n/m) + 1",
                    format!("phase {i}"),
                    r,
                    format!("<= {bound:.4}"),
                    (r as f64) <= bound,
                )
            })
            .collect();
        let m2 = 2 * self.m;
        for (i, &(before, after)) in self.contractions.iter().enumerate() {
            rows.push(CheckRow::new(
                "|S_r| <= (1 - 1/2m) |S_{r-1}|",
                format!("round end {i}"),
                format!("{after}"),
                format!("<= {}", rational_of(&Reps::from(before * (m2 - 1))) / rational_of(&Reps::from(m2))),
                after * m2 <= before * (m2 - 1),
            ));
        }
        rows
    }
}
