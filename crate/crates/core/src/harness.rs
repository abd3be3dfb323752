//! Runs algorithms against adversaries or fixed sequences and accounts for
//! every completed phase exactly.
//!
//! Per phase the report carries the algorithm's cost, the cost of the
//! adversary's hiding trajectory (chained from the previous phase's end) and
//! the free-start optimum of the phase's sub-sequence. Totals are over the
//! completed prefix only; the optimum total starts from the initial state.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::adversaries::{self, Adversary, AdversaryParams, Bounds, Prediction};
use crate::algorithms::{self, serve, OnlineAlgorithm, TwoLevelMssMarking};
use crate::check::CheckRow;
use crate::cost::{format_rational, Count, ExtendedCost, Reps};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::offline::{optimal_rle, Start};
use crate::request::{
    cost_breakdown_rle, push_block, push_run, slice_blocks, slice_runs, state_before, total_steps, Block, Instance,
    RequestSet, Run, Transcript,
};

/// Default budget of individually simulated steps per trial.
pub const DEFAULT_CAP: u64 = 2_000_000;

/// Factory for the algorithm under test, given its per-trial seed.
pub type AlgorithmFactory<'a> = dyn Fn(u64) -> Result<Box<dyn OnlineAlgorithm>> + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub adversary: String,
    pub algorithm: String,
    /// Adversary parameters; `seed` is the root seed of the experiment.
    #[serde(flatten)]
    pub params: AdversaryParams,
    #[serde(default = "one")]
    pub trials: usize,
    /// Budget of individually simulated steps per trial.
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn one() -> usize {
    1
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

impl ExperimentSpec {
    pub fn new(adversary: &str, algorithm: &str, params: AdversaryParams) -> Self {
        ExperimentSpec {
            adversary: adversary.into(),
            algorithm: algorithm.into(),
            params,
            trials: 1,
            cap: DEFAULT_CAP,
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.params.phases == 0 {
            return Err(Error::InvalidParameter("phases must be at least 1".into()));
        }
        if !adversaries::ADVERSARY_NAMES.contains(&self.adversary.as_str()) {
            return Err(Error::Unknown(format!("adversary '{}'", self.adversary)));
        }
        Ok(())
    }
}

/// A competitive ratio that may be undefined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ratio {
    Exact(BigRational),
    Infinite,
    /// The denominator is 0 or infinite.
    Undefined(&'static str),
}

impl Ratio {
    pub fn of(num: &ExtendedCost, den: &ExtendedCost) -> Ratio {
        match (num, den) {
            (_, ExtendedCost::Infinite) => Ratio::Undefined("undefined (OPT=inf)"),
            (_, ExtendedCost::Finite(d)) if d.is_zero() => Ratio::Undefined("undefined (OPT=0)"),
            (ExtendedCost::Infinite, _) => Ratio::Infinite,
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => Ratio::Exact(a / b),
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Ratio::Exact(r) => Some(r),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        match self {
            Ratio::Exact(r) => Some(crate::cost::ratio_to_f64(r)),
            Ratio::Infinite => Some(f64::INFINITY),
            Ratio::Undefined(_) => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Exact(r) => f.write_str(&format_rational(r)),
            Ratio::Infinite => f.write_str("inf"),
            Ratio::Undefined(why) => f.write_str(why),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Exact costs of one completed phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCosts {
    pub steps: Count,
    pub alg: ExtendedCost,
    pub alg_moves: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<ExtendedCost>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_service: Option<ExtendedCost>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_moves: Option<usize>,
    /// Free-start optimum of the phase's sub-sequence.
    pub opt: ExtendedCost,
}

/// Least-squares fit of cumulative ALG against cumulative OPT over phase prefixes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: String,
    pub intercept: String,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub adversary_seed: u64,
    pub algorithm_seed: u64,
    pub completed_phases: usize,
    /// The step budget ran out before the requested number of phases.
    pub truncated: bool,
    pub steps: Count,
    pub alg_total: ExtendedCost,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adv_certified_total: Option<ExtendedCost>,
    pub opt_total: ExtendedCost,
    pub ratio_vs_opt: Ratio,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_vs_certified: Option<Ratio>,
    pub fit: Option<Fit>,
    pub per_phase: Vec<PhaseCosts>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; absent with fewer than two samples.
    pub sd: Option<f64>,
    pub samples: usize,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Option<MeanSd> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(MeanSd { mean, sd, samples: xs.len() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Randomized {
    pub ratio_vs_opt: Option<MeanSd>,
    pub ratio_vs_certified: Option<MeanSd>,
    pub alg_per_phase: Option<MeanSd>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub adversary: String,
    pub algorithm: String,
    pub unit: String,
    pub metric: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub root_seed: u64,
    pub completed_phases: usize,
    pub truncated: bool,
    /// Sums over trials.
    pub alg_total: ExtendedCost,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adv_certified_total: Option<ExtendedCost>,
    pub opt_total: ExtendedCost,
    pub empirical_ratio_vs_opt: Ratio,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_ratio_vs_certified: Option<Ratio>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_bound: Option<Prediction>,
    /// Exact mean ALG per completed phase over all trials.
    pub mean_alg_per_phase: Option<String>,
    pub randomized: Randomized,
    pub per_trial: Vec<TrialReport>,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Transcript>,
}

impl RatioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|r| !r.pass)
    }

    /// Every completed phase of every trial.
    pub fn phases(&self) -> impl Iterator<Item = &PhaseCosts> {
        self.per_trial.iter().flat_map(|t| t.per_phase.iter())
    }
}

/// Per-trial seeds for the adversary and the algorithm.
pub fn trial_seeds(root: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(trial as u64);
    (rng.next_u64(), rng.next_u64())
}

/// What one trial produced before accounting.
struct Driven {
    blocks: Vec<Block>,
    runs: Vec<Run>,
    /// `blocks.len()` at each phase close.
    phase_ends: Vec<usize>,
    truncated: bool,
}

fn seal(d: &mut Driven, completed: usize) {
    while d.phase_ends.len() < completed {
        d.phase_ends.push(d.blocks.len());
    }
}

fn drive(adv: &mut dyn Adversary, alg: &mut dyn OnlineAlgorithm, cap: u64) -> Result<Driven> {
    alg.init(adv.metric(), adv.requests(), adv.initial_state())?;
    let mut d = Driven { blocks: Vec::new(), runs: Vec::new(), phase_ends: Vec::new(), truncated: false };
    let mut budget = cap;
    while let Some(em) = adv.next(alg.state()) {
        seal(&mut d, adv.completed().len());
        let request = em.block.request;
        let served = match serve(alg, request, &em.block.repeat, em.stop_on_move, &mut budget) {
            Ok(s) => s,
            Err(Error::SequenceTooLong { .. }) => {
                d.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        // never merge a block across a phase boundary
        if d.phase_ends.last() == Some(&d.blocks.len()) {
            d.blocks.push(Block::new(request, served.steps.clone()));
        } else {
            push_block(&mut d.blocks, request, &served.steps);
        }
        for r in &served.runs {
            push_run(&mut d.runs, r.state, &r.count);
        }
        adv.served(&served.steps, &served.runs);
        seal(&mut d, adv.completed().len());
    }
    seal(&mut d, adv.completed().len());
    Ok(d)
}

fn moves(s0: usize, runs: &[Run]) -> usize {
    let mut prev = s0;
    let mut k = 0;
    for r in runs {
        if r.state != prev {
            k += 1;
            prev = r.state;
        }
    }
    k
}

/// Runs `spec` with the registered algorithm.
pub fn run(spec: &ExperimentSpec) -> Result<RatioReport> {
    let name = spec.algorithm.clone();
    algorithms::by_name(&name, 0)?;
    run_with(spec, &move |seed| algorithms::by_name(&name, seed))
}

/// Runs `spec` with algorithms built by `make`. Checks tied to an algorithm
/// are selected by the name it reports.
pub fn run_with(spec: &ExperimentSpec, make: &AlgorithmFactory<'_>) -> Result<RatioReport> {
    spec.check()?;
    let trials: Vec<Result<(TrialReport, Vec<CheckRow>, Bounds, Prediction, Context)>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, make, t))
        .collect();
    let mut reports = Vec::with_capacity(trials.len());
    let mut checks = Vec::new();
    let mut last = None;
    for r in trials {
        let (report, rows, bounds, prediction, ctx) = r?;
        checks.extend(rows);
        reports.push(report);
        last = Some((bounds, prediction, ctx));
    }
    let (bounds, prediction, ctx) = last.expect("at least one trial");
    if let Some(b) = &bounds.alg_mean_at_least {
        checks.push(mean_row(&reports, b));
    }
    Ok(assemble(spec.params.seed, ctx, Some(prediction), reports, checks))
}

/// Shape of the instance, for the report header.
struct Context {
    adversary: String,
    algorithm: String,
    unit: String,
    metric: String,
    n: usize,
    m: usize,
}

fn run_trial(
    spec: &ExperimentSpec,
    make: &AlgorithmFactory<'_>,
    trial: usize,
) -> Result<(TrialReport, Vec<CheckRow>, Bounds, Prediction, Context)> {
    let (adv_seed, alg_seed) = trial_seeds(spec.params.seed, trial);
    let params = AdversaryParams { seed: adv_seed, ..spec.params.clone() };
    let mut adv = adversaries::by_name(&spec.adversary, &params)?;
    let mut alg = make(alg_seed)?;
    let driven = drive(adv.as_mut(), alg.as_mut(), spec.cap)?;
    let metric = adv.metric();
    let requests = adv.requests();
    let s0 = adv.initial_state();
    let scope = format!("trial {trial}");

    let records = adv.completed();
    let mut per_phase = Vec::with_capacity(records.len());
    let mut from = Reps::zero();
    let mut prev_block = 0;
    let mut trace_end = s0;
    for (i, rec) in records.iter().enumerate() {
        let blocks = &driven.blocks[prev_block..driven.phase_ends[i]];
        if total_steps(blocks) != rec.steps {
            return Err(Error::InvalidTrace(format!(
                "{} {i} of {} reports {} steps but {} were served",
                adv.unit(),
                adv.name(),
                rec.steps,
                total_steps(blocks)
            )));
        }
        let to = &from + &rec.steps;
        let alg_runs = slice_runs(&driven.runs, &from, &to);
        let alg_start = state_before(&driven.runs, s0, &from);
        let alg_cost = cost_breakdown_rle(metric, requests, alg_start, &alg_runs, blocks)?.total();
        let certified = cost_breakdown_rle(metric, requests, trace_end, &rec.trace, blocks)?;
        let trace_moves = moves(trace_end, &rec.trace);
        trace_end = rec.trace.last().map_or(trace_end, |r| r.state);
        let opt = optimal_rle(metric, requests, Start::Anywhere, blocks)?.cost;
        per_phase.push(PhaseCosts {
            steps: Count(rec.steps.clone()),
            alg: alg_cost,
            alg_moves: moves(alg_start, &alg_runs),
            certified: Some(certified.total()),
            certified_service: Some(certified.service),
            trace_moves: Some(trace_moves),
            opt,
        });
        from = to;
        prev_block = driven.phase_ends[i];
    }
    let prefix = &driven.blocks[..prev_block];
    let opt_run = optimal_rle(metric, requests, Start::At(s0), prefix)?;
    let opt_prefixes: Vec<ExtendedCost> =
        driven.phase_ends.iter().map(|&e| if e == 0 { ExtendedCost::zero() } else { opt_run.per_prefix[e - 1].clone() }).collect();
    let alg_total: ExtendedCost = per_phase.iter().map(|p| p.alg.clone()).sum();
    let certified_total: ExtendedCost = per_phase.iter().filter_map(|p| p.certified.clone()).sum();
    let fit = fit(&per_phase, &opt_prefixes);

    let mut rows = Vec::new();
    let bounds = adv.bounds();
    phase_rows(&mut rows, &scope, &per_phase, &bounds);
    rows.push(CheckRow::at_least(
        format!("completed {}s", adv.unit()),
        scope.clone(),
        records.len(),
        spec.params.phases,
    ));
    rows.push(CheckRow::at_most("OPT <= certified total", scope.clone(), opt_run.cost.clone(), certified_total.clone()));
    rows.push(CheckRow::new(
        "certified trace feasible",
        scope.clone(),
        &certified_total,
        "< inf",
        !certified_total.is_infinite(),
    ));
    if matches!(&opt_run.cost, ExtendedCost::Finite(v) if v.is_positive()) {
        rows.push(CheckRow::at_least("ALG >= OPT", scope.clone(), alg_total.clone(), opt_run.cost.clone()));
    }
    for row in adv.checks() {
        rows.push(scoped(row, &scope));
    }
    for row in alg.checks() {
        rows.push(scoped(row, &scope));
    }
    let served_steps = total_steps(prefix);
    rows.extend(external_rows(alg.as_ref(), metric, requests, s0, &driven.blocks, &driven.runs, &served_steps, &scope)?);

    let report = TrialReport {
        trial,
        adversary_seed: adv_seed,
        algorithm_seed: alg_seed,
        completed_phases: records.len(),
        truncated: driven.truncated,
        steps: Count(served_steps),
        ratio_vs_opt: Ratio::of(&alg_total, &opt_run.cost),
        ratio_vs_certified: Some(Ratio::of(&alg_total, &certified_total)),
        alg_total,
        adv_certified_total: Some(certified_total),
        opt_total: opt_run.cost,
        fit,
        per_phase,
    };
    let ctx = Context {
        adversary: adv.name().into(),
        algorithm: alg.name().into(),
        unit: adv.unit().into(),
        metric: metric.kind_name().into(),
        n: metric.n(),
        m: requests.m(),
    };
    Ok((report, rows, bounds, adv.predicted(), ctx))
}

fn scoped(mut row: CheckRow, scope: &str) -> CheckRow {
    row.scope = format!("{scope}, {}", row.scope);
    row
}

/// One row per inequality, reporting the worst phase.
fn phase_rows(rows: &mut Vec<CheckRow>, scope: &str, phases: &[PhaseCosts], b: &Bounds) {
    let worst = |key: &dyn Fn(&PhaseCosts) -> ExtendedCost, max: bool| {
        phases.iter().enumerate().map(|(i, p)| (key(p), i)).reduce(|a, c| {
            if (max && c.0 > a.0) || (!max && c.0 < a.0) {
                c
            } else {
                a
            }
        })
    };
    let at = |i: usize| format!("{scope}, phase {i}");
    if let Some(bound) = &b.alg_at_least {
        if let Some((v, i)) = worst(&|p| p.alg.clone(), false) {
            rows.push(CheckRow::at_least("per-phase ALG", at(i), v, ExtendedCost::Finite(bound.clone())));
        }
    }
    let certified = |p: &PhaseCosts| p.certified.clone().unwrap_or_default();
    if let Some(bound) = &b.certified_at_most {
        if let Some((v, i)) = worst(&certified, true) {
            rows.push(CheckRow::at_most("per-phase certified cost", at(i), v, ExtendedCost::Finite(bound.clone())));
        }
    }
    if let Some(bound) = &b.certified_below {
        if let Some((v, i)) = worst(&certified, true) {
            rows.push(CheckRow::below("per-phase certified cost", at(i), v, ExtendedCost::Finite(bound.clone())));
        }
    }
    if let Some(bound) = &b.certified_service_below {
        let service = |p: &PhaseCosts| p.certified_service.clone().unwrap_or_default();
        if let Some((v, i)) = worst(&service, true) {
            rows.push(CheckRow::below("per-phase certified service", at(i), v, ExtendedCost::Finite(bound.clone())));
        }
    }
    if let Some(bound) = b.trace_moves_at_most {
        if let Some((i, p)) = phases.iter().enumerate().max_by_key(|(i, p)| (p.trace_moves, std::cmp::Reverse(*i))) {
            rows.push(CheckRow::at_most("per-phase trace moves", at(i), p.trace_moves.unwrap_or(0), bound));
        }
    }
}

/// Mean ALG per phase over all trials, against the bound with 10% sampling slack.
fn mean_row(reports: &[TrialReport], bound: &BigRational) -> CheckRow {
    let slack = bound * BigRational::new(9.into(), 10.into());
    match exact_mean(reports) {
        Some(mean) => CheckRow::at_least(
            "mean per-phase ALG (10% sampling tolerance)",
            "all trials",
            ExtendedCost::Finite(mean),
            ExtendedCost::Finite(slack),
        ),
        None => CheckRow::new("mean per-phase ALG", "all trials", "no finite phases", format!(">= {}", format_rational(&slack)), false),
    }
}

fn exact_mean(reports: &[TrialReport]) -> Option<BigRational> {
    let phases: Vec<&PhaseCosts> = reports.iter().flat_map(|t| &t.per_phase).collect();
    if phases.is_empty() {
        return None;
    }
    let mut sum = BigRational::zero();
    for p in &phases {
        sum += p.alg.as_finite()?;
    }
    Some(sum / BigRational::from_integer(BigInt::from(phases.len())))
}

fn fit(phases: &[PhaseCosts], opt_prefixes: &[ExtendedCost]) -> Option<Fit> {
    let mut xs = Vec::with_capacity(phases.len());
    let mut ys = Vec::with_capacity(phases.len());
    let mut acc = BigRational::zero();
    for (p, o) in phases.iter().zip(opt_prefixes) {
        acc += p.alg.as_finite()?;
        xs.push(o.as_finite()?.clone());
        ys.push(acc.clone());
    }
    if xs.len() < 2 {
        return None;
    }
    let n = BigRational::from_integer(BigInt::from(xs.len()));
    let mx = xs.iter().sum::<BigRational>() / &n;
    let my = ys.iter().sum::<BigRational>() / &n;
    let sxx: BigRational = xs.iter().map(|x| (x - &mx) * (x - &mx)).sum();
    if sxx.is_zero() {
        return None;
    }
    let sxy: BigRational = xs.iter().zip(&ys).map(|(x, y)| (x - &mx) * (y - &my)).sum();
    let slope = sxy / sxx;
    let intercept = my - &slope * mx;
    Some(Fit { slope: decimal(&slope, 9), intercept: decimal(&intercept, 9), points: xs.len() })
}

/// `v` rounded toward zero to `digits` decimals.
pub fn decimal(v: &BigRational, digits: usize) -> String {
    let scale = BigInt::from(10u8).pow(digits as u32);
    let scaled = (v.abs() * BigRational::from_integer(scale.clone())).to_integer();
    let int = &scaled / &scale;
    let frac = (&scaled % &scale).to_string();
    let sign = if v.is_negative() && !scaled.is_zero() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{int}");
    }
    format!("{sign}{int}.{frac:0>digits$}")
}

/// Checks computed from the transcript rather than reported by the algorithm.
#[allow(clippy::too_many_arguments)]
fn external_rows(
    alg: &dyn OnlineAlgorithm,
    metric: &MetricSpace,
    requests: &RequestSet,
    s0: usize,
    blocks: &[Block],
    runs: &[Run],
    served: &Reps,
    scope: &str,
) -> Result<Vec<CheckRow>> {
    let blocks = slice_blocks(blocks, &Reps::zero(), served);
    let runs = slice_runs(runs, &Reps::zero(), served);
    match alg.name() {
        "uniform-mss-marking" if metric.uniform_n().is_some() && requests.is_set_chasing() => {
            marking_rows(metric, requests, s0, &blocks, &runs, scope)
        }
        "two-level-mss-marking" => two_level_rows(alg, metric, requests, s0, &blocks, &runs, scope),
        _ => Ok(Vec::new()),
    }
}

/// Phases of an MSS sequence: each ends with the request that empties the
/// intersection of the zero sets requested since the phase began.
pub fn mss_phase_ends(requests: &RequestSet, blocks: &[Block]) -> Vec<Reps> {
    let n = requests.point_count();
    let zero: Vec<Vec<bool>> = requests.iter().map(|r| r.hit_vector().iter().map(|h| !h).collect()).collect();
    let mut ends = Vec::new();
    let mut common = vec![true; n];
    let mut pos = Reps::zero();
    for b in blocks {
        let z = &zero[b.request];
        let next: Vec<bool> = common.iter().zip(z).map(|(a, b)| *a && *b).collect();
        if next.iter().any(|&x| x) {
            common = next;
        } else {
            ends.push(&pos + Reps::one());
            // further copies of the emptying request open the next phase
            common = if b.repeat > Reps::one() { z.clone() } else { vec![true; n] };
        }
        pos += &b.repeat;
    }
    ends
}

fn marking_rows(
    metric: &MetricSpace,
    requests: &RequestSet,
    s0: usize,
    blocks: &[Block],
    runs: &[Run],
    scope: &str,
) -> Result<Vec<CheckRow>> {
    let m = requests.m();
    let n = metric.n();
    let mut rows = Vec::new();
    let mut from = Reps::zero();
    let mut alg_sum = ExtendedCost::zero();
    let mut opt_phases = 0usize;
    for (i, to) in mss_phase_ends(requests, blocks).iter().enumerate() {
        let seg = slice_runs(runs, &from, to);
        let start = state_before(runs, s0, &from);
        let k = moves(start, &seg);
        rows.push(CheckRow::at_most("moves per sequence phase <= m", format!("{scope}, phase {i}"), k, m));
        let part = slice_blocks(blocks, &from, to);
        let opt = optimal_rle(metric, requests, Start::Anywhere, &part)?.cost;
        rows.push(CheckRow::at_least("phase OPT >= 1", format!("{scope}, phase {i}"), opt, ExtendedCost::one()));
        alg_sum += cost_breakdown_rle(metric, requests, start, &seg, &part)?.total();
        opt_phases += 1;
        from = to.clone();
    }
    if opt_phases > 0 {
        let prefix = slice_blocks(blocks, &Reps::zero(), &from);
        let opt = optimal_rle(metric, requests, Start::At(s0), &prefix)?.cost;
        let cap = BigRational::from_integer(BigInt::from(m.min(n)));
        let ratio = Ratio::of(&alg_sum, &opt);
        let pass = ratio.exact().is_some_and(|r| *r <= cap);
        rows.push(CheckRow::new(
            "ALG/OPT over completed phases <= min(m, n)",
            scope.to_string(),
            &ratio,
            format!("<= {}", format_rational(&cap)),
            pass,
        ));
    }
    Ok(rows)
}

fn two_level_rows(
    alg: &dyn OnlineAlgorithm,
    metric: &MetricSpace,
    requests: &RequestSet,
    s0: usize,
    blocks: &[Block],
    runs: &[Run],
    scope: &str,
) -> Result<Vec<CheckRow>> {
    let Some(tree) = metric.to_hst() else { return Ok(Vec::new()) };
    let bound = ExtendedCost::Finite(TwoLevelMssMarking::period_cost_bound(requests.m(), &tree.aspect_ratio()));
    let mut rows = Vec::new();
    let mut from = Reps::zero();
    let total = total_steps(blocks);
    for (i, to) in alg.marks().iter().enumerate() {
        if *to > total {
            break;
        }
        let seg = slice_runs(runs, &from, to);
        let part = slice_blocks(blocks, &from, to);
        let start = state_before(runs, s0, &from);
        let cost = cost_breakdown_rle(metric, requests, start, &seg, &part)?.total();
        rows.push(CheckRow::at_most(
            "period cost <= C(m 2^(m-1) + 2^m - 2)",
            format!("{scope}, period {i}"),
            cost,
            bound.clone(),
        ));
        from = to.clone();
    }
    Ok(rows)
}

fn assemble(
    seed: u64,
    ctx: Context,
    prediction: Option<Prediction>,
    reports: Vec<TrialReport>,
    checks: Vec<CheckRow>,
) -> RatioReport {
    let alg_total: ExtendedCost = reports.iter().map(|r| r.alg_total.clone()).sum();
    let opt_total: ExtendedCost = reports.iter().map(|r| r.opt_total.clone()).sum();
    let certified_total: Option<ExtendedCost> =
        reports.iter().map(|r| r.adv_certified_total.clone()).collect::<Option<Vec<_>>>().map(|v| v.into_iter().sum());
    let ratio_opt: Vec<f64> = reports.iter().filter_map(|r| r.ratio_vs_opt.to_f64()).collect();
    let ratio_cert: Vec<f64> =
        reports.iter().filter_map(|r| r.ratio_vs_certified.as_ref().and_then(|x| x.to_f64())).collect();
    let per_phase: Vec<f64> = reports.iter().flat_map(|r| r.per_phase.iter().map(|p| p.alg.to_f64())).collect();
    let passed = checks.iter().all(|c| c.pass);
    RatioReport {
        adversary: ctx.adversary,
        algorithm: ctx.algorithm,
        unit: ctx.unit,
        metric: ctx.metric,
        n: ctx.n,
        m: ctx.m,
        trials: reports.len(),
        root_seed: seed,
        completed_phases: reports.iter().map(|r| r.completed_phases).sum(),
        truncated: reports.iter().any(|r| r.truncated),
        empirical_ratio_vs_opt: Ratio::of(&alg_total, &opt_total),
        empirical_ratio_vs_certified: certified_total.as_ref().map(|c| Ratio::of(&alg_total, c)),
        alg_total,
        adv_certified_total: certified_total,
        opt_total,
        predicted_bound: prediction,
        mean_alg_per_phase: exact_mean(&reports).map(|v| format_rational(&v)),
        randomized: Randomized {
            ratio_vs_opt: MeanSd::of(&ratio_opt),
            ratio_vs_certified: MeanSd::of(&ratio_cert),
            alg_per_phase: MeanSd::of(&per_phase),
        },
        per_trial: reports,
        checks,
        passed,
        transcript: None,
    }
}

/// Serves a fixed instance. Phases are the algorithm's own accounting units.
pub fn run_fixed(instance: &Instance, algorithm: &str, seed: u64, cap: u64) -> Result<RatioReport> {
    let mut alg = algorithms::by_name(algorithm, seed)?;
    run_fixed_with(instance, alg.as_mut(), cap)
}

pub fn run_fixed_with(instance: &Instance, alg: &mut dyn OnlineAlgorithm, cap: u64) -> Result<RatioReport> {
    instance.check()?;
    let metric = &instance.metric;
    let requests = &instance.requests;
    let s0 = instance.initial_state;
    alg.init(metric, requests, s0)?;
    let mut runs = Vec::new();
    let mut budget = cap;
    for b in &instance.sequence {
        let served = serve(alg, b.request, &b.repeat, false, &mut budget).map_err(|e| match e {
            Error::SequenceTooLong { requested, .. } => Error::SequenceTooLong { requested, cap },
            other => other,
        })?;
        for r in &served.runs {
            push_run(&mut runs, r.state, &r.count);
        }
    }
    let blocks = &instance.sequence;
    let total = total_steps(blocks);
    let breakdown = cost_breakdown_rle(metric, requests, s0, &runs, blocks)?;
    let alg_total = breakdown.total();
    let opt = optimal_rle(metric, requests, Start::At(s0), blocks)?;

    let mut per_phase = Vec::new();
    let mut from = Reps::zero();
    let marks: Vec<Reps> = alg.marks().into_iter().filter(|m| *m <= total).collect();
    for to in &marks {
        let seg = slice_runs(&runs, &from, to);
        let part = slice_blocks(blocks, &from, to);
        let start = state_before(&runs, s0, &from);
        per_phase.push(PhaseCosts {
            steps: Count(to - &from),
            alg: cost_breakdown_rle(metric, requests, start, &seg, &part)?.total(),
            alg_moves: moves(start, &seg),
            certified: None,
            certified_service: None,
            trace_moves: None,
            opt: optimal_rle(metric, requests, Start::Anywhere, &part)?.cost,
        });
        from = to.clone();
    }
    let scope = "fixed";
    let mut checks: Vec<CheckRow> = alg.checks().into_iter().map(|r| scoped(r, scope)).collect();
    if matches!(&opt.cost, ExtendedCost::Finite(v) if v.is_positive()) {
        checks.push(CheckRow::at_least("ALG >= OPT", scope, alg_total.clone(), opt.cost.clone()));
    }
    checks.extend(external_rows(alg, metric, requests, s0, blocks, &runs, &total, scope)?);

    let ratio = Ratio::of(&alg_total, &opt.cost);
    let slack = match (&alg_total, &opt.cost, ratio.exact()) {
        (ExtendedCost::Finite(a), ExtendedCost::Finite(o), Some(r)) => a - r * o,
        _ => BigRational::zero(),
    };
    let transcript = Transcript {
        states: runs.clone(),
        movement_cost: breakdown.movement.clone(),
        service_cost: breakdown.service.clone(),
        total: alg_total.clone(),
        opt: opt.cost.clone(),
        phase_marks: marks.iter().cloned().map(Count).collect(),
        additive_slack: slack,
    };
    let trial = TrialReport {
        trial: 0,
        adversary_seed: 0,
        algorithm_seed: 0,
        completed_phases: per_phase.len(),
        truncated: false,
        steps: Count(total),
        alg_total: alg_total.clone(),
        adv_certified_total: None,
        opt_total: opt.cost.clone(),
        ratio_vs_opt: ratio,
        ratio_vs_certified: None,
        fit: None,
        per_phase,
    };
    let ctx = Context {
        adversary: "fixed".into(),
        algorithm: alg.name().into(),
        unit: "phase".into(),
        metric: metric.kind_name().into(),
        n: metric.n(),
        m: requests.m(),
    };
    let mut report = assemble(0, ctx, None, vec![trial], checks);
    report.transcript = Some(transcript);
    Ok(report)
}

/// Pass/fail ledger for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ledger {
    pub rows: Vec<CheckRow>,
    pub passed: bool,
}

pub fn verify_bounds(spec: &ExperimentSpec) -> Result<Ledger> {
    let report = run(spec)?;
    Ok(Ledger { passed: report.passed, rows: report.checks })
}

/// A parameter grid. Every present axis multiplies the grid; an empty axis
/// makes the grid empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub adversaries: Vec<String>,
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default)]
    pub m: Option<Vec<usize>>,
    #[serde(rename = "C", default)]
    pub c: Option<Vec<ExtendedCost>>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_grid_phases")]
    pub phases: usize,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn default_grid_phases() -> usize {
    10
}

impl Grid {
    pub fn points(&self) -> Result<Vec<ExperimentSpec>> {
        let lift = |v: &Option<Vec<usize>>| v.as_ref().map_or(vec![None], |v| v.iter().copied().map(Some).collect());
        let ns = lift(&self.n);
        let ms = lift(&self.m);
        let cs: Vec<Option<BigRational>> = match &self.c {
            None => vec![None],
            Some(v) => v
                .iter()
                .map(|c| {
                    c.as_finite()
                        .cloned()
                        .map(Some)
                        .ok_or_else(|| Error::InvalidParameter("C must be finite".into()))
                })
                .collect::<Result<_>>()?,
        };
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![0]);
        let mut out = Vec::new();
        for adversary in &self.adversaries {
            for algorithm in &self.algorithms {
                for &n in &ns {
                    for &m in &ms {
                        for c in &cs {
                            for &seed in &seeds {
                                out.push(ExperimentSpec {
                                    adversary: adversary.clone(),
                                    algorithm: algorithm.clone(),
                                    params: AdversaryParams {
                                        n,
                                        m,
                                        c: c.clone(),
                                        levels: self.levels,
                                        seed,
                                        phases: self.phases,
                                        ..AdversaryParams::default()
                                    },
                                    trials: self.trials,
                                    cap: self.cap,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "adversary",
    "algorithm",
    "n",
    "m",
    "C",
    "seed",
    "completed_phases",
    "alg_total",
    "adv_certified_total",
    "opt_total",
    "ratio_vs_opt",
    "ratio_vs_certified",
    "predicted_bound",
    "bound_formula",
    "error",
];

/// One CSV row per grid point; failures fill the `error` column only.
pub fn sweep<W: std::io::Write>(grid: &Grid, out: W) -> Result<()> {
    let points = grid.points()?;
    let results: Vec<Result<RatioReport>> = points.par_iter().map(run).collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS).map_err(csv_error)?;
    for (spec, result) in points.iter().zip(results) {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            spec.adversary.clone(),
            spec.algorithm.clone(),
            opt(spec.params.n),
            opt(spec.params.m),
            spec.params.c.as_ref().map(format_rational).unwrap_or_default(),
            spec.params.seed.to_string(),
        ];
        match result {
            Ok(r) => {
                let (value, formula) =
                    r.predicted_bound.as_ref().map_or((String::new(), String::new()), |p| (format_rational(&p.value), p.formula.clone()));
                row.extend([
                    r.completed_phases.to_string(),
                    r.alg_total.to_string(),
                    r.adv_certified_total.as_ref().map(|c| c.to_string()).unwrap_or_default(),
                    r.opt_total.to_string(),
                    r.empirical_ratio_vs_opt.to_string(),
                    r.empirical_ratio_vs_certified.as_ref().map(|c| c.to_string()).unwrap_or_default(),
                    value,
                    formula,
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.to_string());
            }
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// The instance an adversary would build, with its policy descriptor.
pub fn construct(name: &str, params: &AdversaryParams) -> Result<serde_json::Value> {
    let adv = adversaries::by_name(name, params)?;
    let instance = Instance::new(adv.metric().clone(), adv.requests().clone(), adv.initial_state(), Vec::new())?;
    let bounds = adv.bounds();
    let fmt = |v: &Option<BigRational>| v.as_ref().map(format_rational);
    Ok(serde_json::json!({
        "instance": serde_json::to_value(&instance)?,
        "adversary": adv.descriptor(),
        "unit": adv.unit(),
        "predicted_bound": serde_json::to_value(adv.predicted())?,
        "bounds": {
            "alg_at_least": fmt(&bounds.alg_at_least),
            "alg_mean_at_least": fmt(&bounds.alg_mean_at_least),
            "certified_at_most": fmt(&bounds.certified_at_most),
            "certified_below": fmt(&bounds.certified_below),
            "certified_service_below": fmt(&bounds.certified_service_below),
            "trace_moves_at_most": bounds.trace_moves_at_most,
        },
    }))
}

/// `p/q` followed by a decimal approximation; other strings unchanged.
fn approx(v: &str) -> String {
    match crate::cost::parse_rational(v) {
        Ok(r) if !r.is_integer() => {
            let f = crate::cost::ratio_to_f64(&r);
            if f.abs() >= 1e6 || f.abs() < 1e-3 {
                format!("{v} (~{f:.4e})")
            } else {
                format!("{v} (~{f:.4})")
            }
        }
        _ => v.to_string(),
    }
}

/// Human-readable summary of a serialized report.
pub fn pretty(report: &serde_json::Value) -> String {
    let s = |k: &str| match &report[k] {
        serde_json::Value::Null => "-".to_string(),
        serde_json::Value::String(v) => approx(v),
        v => v.to_string(),
    };
    let mut out = String::new();
    out.push_str(&format!("{} vs {} on {} (n={}, m={})\n", s("algorithm"), s("adversary"), s("metric"), s("n"), s("m")));
    out.push_str(&format!("trials {}, completed {}s {}, truncated {}\n", s("trials"), s("unit"), s("completed_phases"), s("truncated")));
    out.push_str(&format!("ALG {}  certified {}  OPT {}\n", s("alg_total"), s("adv_certified_total"), s("opt_total")));
    out.push_str(&format!(
        "ALG/OPT {}  ALG/certified {}\n",
        s("empirical_ratio_vs_opt"),
        s("empirical_ratio_vs_certified")
    ));
    if let Some(p) = report["predicted_bound"].as_object() {
        let get = |k: &str| p.get(k).and_then(|v| v.as_str()).unwrap_or("-").to_string();
        out.push_str(&format!("predicted {} = {}\n", get("formula"), approx(&get("value"))));
    }
    if let Some(rows) = report["checks"].as_array() {
        let failed: Vec<_> = rows.iter().filter(|r| r["pass"] == serde_json::Value::Bool(false)).collect();
        out.push_str(&format!("checks {} rows, {} failed\n", rows.len(), failed.len()));
        for r in failed {
            let get = |k: &str| r[k].as_str().unwrap_or("").to_string();
            out.push_str(&format!("  FAIL {} [{}]: {} {}\n", get("check"), get("scope"), get("observed"), get("bound")));
        }
    }
    out
}
