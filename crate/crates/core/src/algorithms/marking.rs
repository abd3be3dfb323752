//! Marking-style algorithm for set chasing on a uniform metric.
//!
//! If some state lies in every request's zero set the algorithm moves there
//! once. Otherwise it keeps the intersection of the zero sets seen in the
//! current phase and, when hit, jumps to the lowest state of that
//! intersection. The request that empties the intersection closes the phase.

use num_traits::One;

use super::{check_start, require_set_chasing, OnlineAlgorithm};
use crate::check::CheckRow;
use crate::cost::Reps;
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::RequestSet;

#[derive(Clone, Debug, Default)]
pub struct UniformMssMarking {
    zero: Vec<Vec<bool>>,
    n: usize,
    current: usize,
    /// A state in every zero set, if any.
    haven: Option<usize>,
    intersection: Vec<bool>,
    steps: Reps,
    marks: Vec<Reps>,
    moves_this_phase: usize,
    moves_per_phase: Vec<usize>,
}

impl UniformMssMarking {
    pub fn moves_per_phase(&self) -> &[usize] {
        &self.moves_per_phase
    }

    fn go(&mut self, s: usize) {
        if s != self.current {
            self.current = s;
            self.moves_this_phase += 1;
        }
    }
}

impl OnlineAlgorithm for UniformMssMarking {
    fn name(&self) -> &'static str {
        "uniform-mss-marking"
    }

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
        let n = metric
            .uniform_n()
            .ok_or_else(|| Error::UnsupportedMetric(format!("{} metric, need uniform", metric.kind_name())))?;
        check_start(metric, requests, s0)?;
        require_set_chasing(requests)?;
        let zero: Vec<Vec<bool>> =
            requests.iter().map(|r| (0..n).map(|s| r.cost(s).is_zero()).collect()).collect();
        let haven = (0..n).find(|&s| zero.iter().all(|z| z[s]));
        *self = UniformMssMarking {
            zero,
            n,
            current: s0,
            haven,
            intersection: vec![true; n],
            ..Default::default()
        };
        Ok(())
    }

    fn step(&mut self, r: usize) -> usize {
        self.steps += Reps::one();
        if let Some(h) = self.haven {
            self.go(h);
            return self.current;
        }
        let z = &self.zero[r];
        for s in 0..self.n {
            self.intersection[s] &= z[s];
        }
        if self.intersection.iter().any(|&b| b) {
            if !z[self.current] {
                let target = self.intersection.iter().position(|&b| b).expect("nonempty");
                self.go(target);
            }
        } else {
            // This request closes the phase; the next one starts afresh.
            if !z[self.current] {
                if let Some(target) = z.iter().position(|&b| b) {
                    self.go(target);
                }
            }
            self.marks.push(self.steps.clone());
            self.moves_per_phase.push(self.moves_this_phase);
            self.moves_this_phase = 0;
            self.intersection = vec![true; self.n];
        }
        self.current
    }

    fn state(&self) -> usize {
        self.current
    }

    fn quiet_steps(&self, r: usize) -> Option<Reps> {
        if let Some(h) = self.haven {
            return if self.current == h { None } else { Some(Reps::default()) };
        }
        let z = &self.zero[r];
        let unchanged = (0..self.n).all(|s| !self.intersection[s] || z[s]);
        if z[self.current] && unchanged {
            None
        } else {
            Some(Reps::default())
        }
    }

    fn apply_quiet(&mut self, _r: usize, count: &Reps) {
        self.steps += count;
    }

    fn marks(&self) -> Vec<Reps> {
        self.marks.clone()
    }

    fn checks(&self) -> Vec<CheckRow> {
        let m = self.zero.len();
        self.moves_per_phase
            .iter()
            .enumerate()
            .map(|(i, &k)| CheckRow::at_most("moves per phase <= m", format!("phase {i}"), k, m))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::Request;

    fn zero_sets(n: usize, sets: &[&[usize]]) -> RequestSet {
        RequestSet::new(
            sets.iter()
                .map(|z| Request::from_hits(&(0..n).map(|s| !z.contains(&s)).collect::<Vec<_>>()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stays_when_not_hit() {
        let mut a = UniformMssMarking::default();
        a.init(&MetricSpace::uniform(3), &zero_sets(3, &[&[0, 1], &[1, 2]]), 1).unwrap();
        assert_eq!(a.step(0), 1);
        assert_eq!(a.step(1), 1);
    }

    #[test]
    fn three_set_cycle() {
        let mut a = UniformMssMarking::default();
        a.init(&MetricSpace::uniform(3), &zero_sets(3, &[&[0, 1], &[1, 2], &[0, 2]]), 0).unwrap();
        assert_eq!(a.step(0), 0);
        assert_eq!(a.step(1), 1);
        assert_eq!(a.step(2), 0);
        assert_eq!(a.marks(), vec![Reps::from(3u8)]);
        assert_eq!(a.moves_per_phase(), &[2]);
        for _ in 0..30 {
            a.step(0);
            a.step(1);
            a.step(2);
        }
        assert!(a.checks().iter().all(|c| c.pass));
    }

    #[test]
    fn common_state_is_a_haven() {
        let mut a = UniformMssMarking::default();
        a.init(&MetricSpace::uniform(4), &zero_sets(4, &[&[0, 2], &[2, 3]]), 1).unwrap();
        assert_eq!(a.step(0), 2);
        assert_eq!(a.step(1), 2);
        assert_eq!(a.quiet_steps(0), None);
    }

    #[test]
    fn rejects_task_requests() {
        let mut a = UniformMssMarking::default();
        let rs = RequestSet::new(vec![Request::new(vec![crate::cost::ExtendedCost::one(); 2])]).unwrap();
        assert!(matches!(a.init(&MetricSpace::uniform(2), &rs, 0), Err(Error::NotSetChasing(_))));
    }
}
