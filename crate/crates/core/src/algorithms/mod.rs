//! Online algorithms and the driver that feeds them run-length-encoded requests.

mod baseline;
mod marking;
mod phased;
mod pivot;
mod two_level;

pub use baseline::{Greedy, Lazy, RandomWalk};
pub use marking::UniformMssMarking;
pub use phased::PhasedUniformMts;
pub use pivot::{is_valid_pivot, pivot_threshold, select_pivot};
pub use two_level::TwoLevelMssMarking;

use num_traits::Zero;

use crate::check::CheckRow;
use crate::cost::Reps;
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{push_run, RequestSet, Run};

/// An online algorithm. It sees the metric, the request pool and the start
/// state up front, then one request index per step, and answers with the
/// state it serves that request in.
pub trait OnlineAlgorithm: Send {
    fn name(&self) -> &'static str;

    fn init(&mut self, metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()>;

    /// Serves one copy of `request` and returns the new state.
    fn step(&mut self, request: usize) -> usize;

    fn state(&self) -> usize;

    /// How many further copies of `request` can be served without moving and
    /// without any internal event, so that [`apply_quiet`](Self::apply_quiet)
    /// may fold them in one go. `None` means arbitrarily many.
    fn quiet_steps(&self, _request: usize) -> Option<Reps> {
        Some(Reps::zero())
    }

    fn apply_quiet(&mut self, _request: usize, _count: &Reps) {}

    /// Step counts at which the algorithm's own accounting units (phases or
    /// periods) closed.
    fn marks(&self) -> Vec<Reps> {
        Vec::new()
    }

    /// Self-reported invariants.
    fn checks(&self) -> Vec<CheckRow> {
        Vec::new()
    }
}

/// Names accepted by [`by_name`].
pub const ALGORITHM_NAMES: [&str; 6] =
    ["phased-uniform-mts", "uniform-mss-marking", "two-level-mss-marking", "greedy", "lazy", "random"];

/// The deterministic algorithms.
pub const DETERMINISTIC_SUITE: [&str; 5] =
    ["phased-uniform-mts", "uniform-mss-marking", "two-level-mss-marking", "greedy", "lazy"];

/// Builds an algorithm by name. `seed` is only used by `random`.
pub fn by_name(name: &str, seed: u64) -> Result<Box<dyn OnlineAlgorithm>> {
    Ok(match name {
        "phased-uniform-mts" => Box::new(PhasedUniformMts::default()),
        "uniform-mss-marking" => Box::new(UniformMssMarking::default()),
        "two-level-mss-marking" => Box::new(TwoLevelMssMarking::default()),
        "greedy" => Box::new(Greedy::default()),
        "lazy" => Box::new(Lazy::default()),
        "random" => Box::new(RandomWalk::new(seed)),
        other => return Err(Error::Unknown(format!("algorithm '{other}'"))),
    })
}

/// What happened while serving part of a block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Served {
    pub steps: Reps,
    pub runs: Vec<Run>,
    pub moved: bool,
}

/// Serves up to `count` copies of `request`.
///
/// With `stop_on_move` it returns right after the first step that changes
/// state. Steps that cannot be folded count against `budget`; running out
/// yields [`Error::SequenceTooLong`].
pub fn serve(
    alg: &mut dyn OnlineAlgorithm,
    request: usize,
    count: &Reps,
    stop_on_move: bool,
    budget: &mut u64,
) -> Result<Served> {
    let mut out = Served { steps: Reps::zero(), runs: Vec::new(), moved: false };
    let one = Reps::from(1u8);
    while &out.steps < count {
        let left = count - &out.steps;
        let quiet = match alg.quiet_steps(request) {
            None => Some(left.clone()),
            Some(q) if q.is_zero() => None,
            Some(q) => Some(q.min(left.clone())),
        };
        if let Some(q) = quiet {
            let here = alg.state();
            alg.apply_quiet(request, &q);
            push_run(&mut out.runs, here, &q);
            out.steps += q;
            continue;
        }
        if *budget == 0 {
            return Err(Error::SequenceTooLong {
                requested: left.to_str_radix(10),
                cap: 0,
            });
        }
        *budget -= 1;
        let before = alg.state();
        let after = alg.step(request);
        push_run(&mut out.runs, after, &one);
        out.steps += &one;
        if after != before {
            out.moved = true;
            if stop_on_move {
                break;
            }
        }
    }
    Ok(out)
}

/// Serves a whole explicit sequence one request at a time and returns the states.
pub fn run_explicit(alg: &mut dyn OnlineAlgorithm, sequence: &[usize]) -> Vec<usize> {
    sequence.iter().map(|&r| alg.step(r)).collect()
}

pub(crate) fn require_set_chasing(requests: &RequestSet) -> Result<()> {
    requests.require_set_chasing()
}

pub(crate) fn check_start(metric: &MetricSpace, requests: &RequestSet, s0: usize) -> Result<()> {
    let n = metric.n();
    if s0 >= n {
        return Err(Error::InvalidState { state: s0, n });
    }
    if requests.m() > 0 && requests.point_count() != n {
        return Err(Error::InvalidParameter(format!(
            "requests cover {} points but the metric has {n}",
            requests.point_count()
        )));
    }
    Ok(())
}
