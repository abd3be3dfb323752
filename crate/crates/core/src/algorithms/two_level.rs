//! Set chasing on a two-level HST with aspect ratio `C`.
//!
//! Work is split into periods, periods into epochs and epochs into phases.
//! An epoch parks in the lowest-index unmarked subtree `T` and runs the
//! uniform marking rule inside it. A phase of `T` ends once the requests
//! since its start have hit every state of `T`. After `C` phases the epoch
//! ends: `T` is marked, as is every subtree whose own phases completed at
//! least `C` times this period. The period ends when every subtree is
//! marked.
//!
//! If a single request hits all of `T` the algorithm cannot stay; it marks
//! `T` and opens a new epoch elsewhere.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use super::{require_set_chasing, check_start, OnlineAlgorithm};
use crate::check::CheckRow;
use crate::cost::{format_rational, Reps};
use crate::error::{Error, Result};
use crate::metric::{HstTree, MetricSpace};
use crate::request::RequestSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodStats {
    pub end_step: Reps,
    pub epochs: usize,
    pub phases: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TwoLevelMssMarking {
    zero: Vec<Vec<bool>>,
    m: usize,
    /// Leaf ranges of the level-1 subtrees.
    spans: Vec<(usize, usize)>,
    subtree_of: Vec<usize>,
    aspect: Option<BigRational>,
    phases_per_epoch: usize,
    current: usize,
    active: Option<usize>,
    /// Per subtree: states not yet hit in its running phase.
    open: Vec<Vec<bool>>,
    completed: Vec<usize>,
    marked: Vec<bool>,
    epoch_phases: usize,
    epochs: usize,
    period_phases: usize,
    steps: Reps,
    periods: Vec<PeriodStats>,
    forced_exits: usize,
}

impl TwoLevelMssMarking {
    pub fn periods(&self) -> &[PeriodStats] {
        &self.periods
    }

    pub fn forced_exits(&self) -> usize {
        self.forced_exits
    }

    /// `C (m 2^(m-1) + 2^m - 2)`, the cost allowed per period.
    pub fn period_cost_bound(m: usize, aspect: &BigRational) -> BigRational {
        let p = BigRational::from_integer((1u64 << m).into());
        let mm = BigRational::from_integer((m as u64).into());
        let two = BigRational::from_integer(2.into());
        aspect * (&mm * &p / &two + &p - two)
    }

    fn reset_open(&mut self, t: usize) {
        let (lo, hi) = self.spans[t];
        self.open[t] = (lo..hi).map(|_| true).collect();
    }

    /// Enters the lowest unmarked subtree that can serve request `r`, falling
    /// back to any subtree that can.
    fn enter_new_subtree(&mut self, r: usize) {
        let z = &self.zero[r];
        let can_serve = |t: usize| (self.spans[t].0..self.spans[t].1).any(|s| z[s]);
        let k = self.spans.len();
        let choice = (0..k)
            .find(|&t| !self.marked[t] && can_serve(t))
            .or_else(|| (0..k).find(|&t| can_serve(t)));
        self.epochs += 1;
        self.epoch_phases = 0;
        match choice {
            Some(t) => {
                self.active = Some(t);
                let (lo, hi) = self.spans[t];
                let target = (lo..hi)
                    .find(|&s| z[s] && self.open[t][s - lo])
                    .or_else(|| (lo..hi).find(|&s| z[s]))
                    .expect("subtree can serve");
                self.current = target;
            }
            None => {
                self.active = Some(self.subtree_of[self.current]);
            }
        }
    }

    fn close_epoch(&mut self, t: usize) {
        self.marked[t] = true;
        for u in 0..self.spans.len() {
            if self.completed[u] >= self.phases_per_epoch {
                self.marked[u] = true;
            }
        }
        if self.marked.iter().all(|&b| b) {
            self.periods.push(PeriodStats {
                end_step: self.steps.clone(),
                epochs: self.epochs,
                phases: self.period_phases,
            });
            self.epochs = 0;
            self.period_phases = 0;
            self.marked = vec![false; self.spans.len()];
            self.completed = vec![0; self.spans.len()];
            for u in 0..self.spans.len() {
                self.reset_open(u);
            }
        }
    }
}

impl OnlineAlgorithm for TwoLevelMssMarking {
    fn name(&self) -> &'static str {
        "two-level-mss-marking"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        let tree: HstTree = metric
            .to_hst()
            .filter(|t| t.levels() == 2)
            .ok_or_else(|| Error::UnsupportedMetric(format!("{} metric, need a two-level HST", metric.kind_name())))?;
        check_start(metric, requests, s0)?;
        require_set_chasing(requests)?;
        let n = tree.n();
        let k = tree.node_count(1);
        let spans: Vec<(usize, usize)> = (0..k).map(|t| tree.leaf_span(1, t)).collect();
        let aspect = tree.aspect_ratio();
        let phases_per_epoch = aspect.ceil().to_integer().to_usize().unwrap_or(usize::MAX).max(1);
        *self = TwoLevelMssMarking {
            zero: requests.iter().map(|r| (0..n).map(|s| r.cost(s).is_zero()).collect()).collect(),
            m: requests.m(),
            subtree_of: (0..n).map(|s| tree.ancestor(s, 1)).collect(),
            open: spans.iter().map(|&(lo, hi)| vec![true; hi - lo]).collect(),
            completed: vec![0; k],
            marked: vec![false; k],
            spans,
            aspect: Some(aspect),
            phases_per_epoch,
            current: s0,
            ..Default::default()
        };
        Ok(())
    }

    fn step(&mut self, r: usize) -> usize {
        self.steps += Reps::one();
        let z = self.zero[r].clone();
        // Every subtree runs its own phase bookkeeping.
        let mut finished = vec![false; self.spans.len()];
        for t in 0..self.spans.len() {
            let (lo, hi) = self.spans[t];
            for s in lo..hi {
                self.open[t][s - lo] &= z[s];
            }
            if !self.open[t].iter().any(|&b| b) {
                finished[t] = true;
                self.completed[t] += 1;
                self.reset_open(t);
            }
        }
        let Some(t) = self.active else {
            self.enter_new_subtree(r);
            return self.current;
        };
        if finished[t] {
            self.epoch_phases += 1;
            self.period_phases += 1;
        }
        let (lo, hi) = self.spans[t];
        if !(lo..hi).any(|s| z[s]) {
            self.forced_exits += 1;
            self.close_epoch(t);
            self.enter_new_subtree(r);
            return self.current;
        }
        if self.epoch_phases >= self.phases_per_epoch {
            self.close_epoch(t);
            self.enter_new_subtree(r);
            return self.current;
        }
        if !z[self.current] {
            let target = (lo..hi)
                .find(|&s| self.open[t][s - lo] && z[s])
                .or_else(|| (lo..hi).find(|&s| z[s]))
                .expect("checked above");
            self.current = target;
        }
        self.current
    }

    fn state(&self) -> usize {
        self.current
    }

    fn quiet_steps(&self, r: usize) -> Option<Reps> {
        let z = &self.zero[r];
        if self.active.is_none() || !z[self.current] {
            return Some(Reps::default());
        }
        let unchanged = self.spans.iter().enumerate().all(|(t, &(lo, hi))| {
            (lo..hi).all(|s| !self.open[t][s - lo] || z[s])
        });
        if unchanged {
            None
        } else {
            Some(Reps::default())
        }
    }

    fn apply_quiet(&mut self, _r: usize, count: &Reps) {
        self.steps += count;
    }

    fn marks(&self) -> Vec<Reps> {
        self.periods.iter().map(|p| p.end_step.clone()).collect()
    }

    fn checks(&self) -> Vec<CheckRow> {
        let epoch_bound = (1usize << self.m.min(60)) - 1;
        let mut rows = Vec::new();
        let aspect = self.aspect.clone().unwrap_or_else(BigRational::one);
        let phase_bound = BigRational::from_integer((epoch_bound as u64).into()) * &aspect;
        for (i, p) in self.periods.iter().enumerate() {
            rows.push(CheckRow::at_most("epochs per period <= 2^m - 1", format!("period {i}"), p.epochs, epoch_bound));
            let observed = BigRational::from_integer((p.phases as u64).into());
            rows.push(CheckRow::new(
                "phases per period <= C (2^m - 1)",
                format!("period {i}"),
                p.phases,
                format!("<= {}", format_rational(&phase_bound)),
                observed <= phase_bound,
            ));
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::rat;
    use crate::request::Request;

    #[test]
    fn never_leaves_a_safe_first_subtree() {
        let tree = HstTree::two_level(&[2, 2], &rat(4, 1)).unwrap();
        let rs = RequestSet::new(vec![
            Request::from_hits(&[false, false, true, false]),
            Request::from_hits(&[false, false, false, true]),
        ])
        .unwrap();
        let mut a = TwoLevelMssMarking::default();
        a.init(&MetricSpace::Hst(tree), &rs, 3).unwrap();
        let first = a.step(0);
        assert_eq!(first, 0);
        for i in 0..40 {
            assert_eq!(a.step(i % 2), 0);
        }
        assert!(a.periods().is_empty());
    }

    #[test]
    fn rejects_uniform() {
        let rs = RequestSet::new(vec![Request::from_hits(&[true, false])]).unwrap();
        let mut a = TwoLevelMssMarking::default();
        assert!(matches!(a.init(&MetricSpace::uniform(2), &rs, 0), Err(Error::UnsupportedMetric(_))));
    }

    #[test]
    fn bound_formula() {
        assert_eq!(TwoLevelMssMarking::period_cost_bound(4, &rat(6, 1)), rat(276, 1));
    }
}
