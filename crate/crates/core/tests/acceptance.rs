//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtslab::adversaries::{lift_values, Adversary, AdversaryParams, LiftedConstruction};
use mtslab::algorithms::{pivot_threshold, select_pivot, TwoLevelMssMarking};
use mtslab::algorithms::{ALGORITHM_NAMES, DETERMINISTIC_SUITE};
use mtslab::cost::rat;
use mtslab::harness::{self, ExperimentSpec, RatioReport};
use mtslab::metric::validate;
use mtslab::offline::{brute_force_optimal, BRUTE_FORCE_LIMIT};
use mtslab::{optimal, optimal_rle, Block, Error, ExtendedCost, HstTree, Instance, MetricSpace, Request, RequestSet, Start};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fin(v: i64) -> ExtendedCost {
    ExtendedCost::from_int(v)
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    match rng.gen_range(0..3) {
        0 => MetricSpace::uniform(n),
        1 if n.is_multiple_of(2) => MetricSpace::paired_uniform(n, rat(rng.gen_range(3..12), 2)).unwrap(),
        _ => {
            let mut sizes = Vec::new();
            let mut left = n;
            while left > 0 {
                let s = rng.gen_range(1..=left);
                sizes.push(s);
                left -= s;
            }
            MetricSpace::Hst(HstTree::two_level(&sizes, &rat(rng.gen_range(3..12), 2)).unwrap())
        }
    }
}

fn random_cost(rng: &mut ChaCha8Rng) -> ExtendedCost {
    if rng.gen_bool(0.15) {
        ExtendedCost::Infinite
    } else {
        let den = rng.gen_range(1..=4);
        ExtendedCost::Finite(rat(rng.gen_range(0..=4 * den), den))
    }
}

/// Drops repeated requests, which a request pool does not allow.
fn pool_of(mut pool: Vec<Request>) -> RequestSet {
    let mut seen: Vec<Request> = Vec::new();
    pool.retain(|r| {
        let fresh = !seen.contains(r);
        if fresh {
            seen.push(r.clone());
        }
        fresh
    });
    RequestSet::new(pool).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 1000;
    let mut infinite = 0;
    for i in 0..instances {
        let n = rng.gen_range(1..=5);
        let metric = random_metric(&mut rng, n);
        let m = rng.gen_range(1..=3);
        let pool: Vec<Request> =
            (0..m).map(|_| Request::new((0..n).map(|_| random_cost(&mut rng)).collect())).collect();
        let requests = pool_of(pool);
        let m = requests.m();
        let len = rng.gen_range(0..=6);
        let seq: Vec<usize> = (0..len).map(|_| rng.gen_range(0..m)).collect();
        let s0 = rng.gen_range(0..n);
        let explicit: Vec<Request> = seq.iter().map(|&r| requests.get(r).clone()).collect();
        let brute = brute_force_optimal(&metric, s0, &explicit, BRUTE_FORCE_LIMIT).unwrap();
        let dp = optimal(&metric, s0, &explicit).unwrap();
        ensure(dp.cost == brute.cost, || format!("instance {i}: dp {} vs brute {}", dp.cost, brute.cost))?;
        ensure(dp.per_prefix == brute.per_prefix, || format!("instance {i}: prefix optima differ"))?;
        // the same sequence folded into blocks
        let mut blocks: Vec<Block> = Vec::new();
        for &r in &seq {
            match blocks.last_mut() {
                Some(b) if b.request == r => b.repeat += 1u8,
                _ => blocks.push(Block::single(r)),
            }
        }
        let rle = optimal_rle(&metric, &requests, Start::At(s0), &blocks).unwrap();
        ensure(rle.cost == brute.cost, || format!("instance {i}: rle {} vs brute {}", rle.cost, brute.cost))?;
        infinite += usize::from(brute.cost.is_infinite());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{instances} instances equal ({infinite} with infinite optimum), {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut draws = 0;
    let mut tries = 0;
    while draws < 10_000 {
        tries += 1;
        let n = rng.gen_range(2..=64);
        let m = rng.gen_range(1..=8usize.min(n));
        let threshold = pivot_threshold(n, m);
        let lo = threshold.floor() as usize + 1;
        if lo > n {
            continue;
        }
        let size = rng.gen_range(lo..=n);
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let set = &all[..size];
        // few distinct values make ties, which is where pivots get scarce
        let levels = rng.gen_range(1..=6);
        let pool: Vec<Request> = (0..m)
            .map(|_| {
                Request::new(
                    (0..n)
                        .map(|_| match rng.gen_range(0..=levels) {
                            0 => ExtendedCost::Infinite,
                            v => fin(v as i64),
                        })
                        .collect(),
                )
            })
            .collect();
        let requests = pool_of(pool);
        match select_pivot(set, &requests) {
            Ok(_) => draws += 1,
            Err(e) => return Err(format!("draw {draws} (n={n}, m={m}, |S|={size}): {e}")),
        }
    }
    Ok(format!("{draws} draws above m ln(n/m) all have a pivot ({} rejected as too small)", tries - draws))
}

fn random_mss(rng: &mut ChaCha8Rng, metric: MetricSpace, m: usize, blocks: usize) -> Instance {
    let n = metric.n();
    let pool: Vec<Request> = (0..m)
        .map(|_| {
            let mut hits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
            let keep = rng.gen_range(0..n);
            hits[keep] = false;
            Request::from_hits(&hits)
        })
        .collect();
    let requests = pool_of(pool);
    let m = requests.m();
    let sequence = (0..blocks).map(|_| Block::new(rng.gen_range(0..m), rng.gen_range(1..=3u32))).collect();
    let s0 = rng.gen_range(0..n);
    Instance::new(metric, requests, s0, sequence).unwrap()
}

fn rows_named<'a>(r: &'a RatioReport, prefix: &'a str) -> impl Iterator<Item = &'a mtslab::check::CheckRow> {
    r.checks.iter().filter(move |c| c.check.starts_with(prefix))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut phases = 0;
    for i in 0..100 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(2..=5);
        let len = rng.gen_range(10..40);
        let inst = random_mss(&mut rng, MetricSpace::uniform(n), m, len);
        let report = harness::run_fixed(&inst, "uniform-mss-marking", 0, 1_000_000).map_err(|e| e.to_string())?;
        let moves = rows_named(&report, "moves per sequence phase").count();
        phases += moves;
        ensure(rows_named(&report, "phase OPT >= 1").count() == moves, || format!("instance {i}: OPT rows missing"))?;
        if moves > 0 {
            ensure(rows_named(&report, "ALG/OPT over completed phases").count() == 1, || {
                format!("instance {i}: ratio row missing")
            })?;
        }
        if let Some(bad) = report.failures().next() {
            return Err(format!("instance {i}: {} [{}] {} {}", bad.check, bad.scope, bad.observed, bad.bound));
        };
    }
    ensure(phases > 0, || "no completed phases".into())?;
    Ok(format!("100 instances, {phases} completed phases: moves <= m, phase OPT >= 1, ALG/OPT <= min(m,n)"))
}

fn params(n: Option<usize>, m: Option<usize>, c: Option<i64>, phases: usize) -> AdversaryParams {
    AdversaryParams { n, m, c: c.map(|v| rat(v, 1)), phases, ..Default::default() }
}

/// Runs every named algorithm, skipping those that reject the metric or the
/// request kind.
fn against(adversary: &str, algorithms: &[&str], p: &AdversaryParams) -> Result<Vec<RatioReport>, String> {
    let mut out = Vec::new();
    for alg in algorithms {
        match harness::run(&ExperimentSpec::new(adversary, alg, p.clone())) {
            Ok(r) => out.push(r),
            Err(Error::UnsupportedMetric(_) | Error::NotSetChasing(_)) => {}
            Err(e) => return Err(format!("{alg}: {e}")),
        }
    }
    ensure(!out.is_empty(), || "no applicable algorithm".into())?;
    Ok(out)
}

fn first_failure(r: &RatioReport) -> Result<(), String> {
    match r.failures().next() {
        Some(bad) => Err(format!("{}: {} [{}] {} {}", r.algorithm, bad.check, bad.scope, bad.observed, bad.bound)),
        None => Ok(()),
    }
}

fn names(reports: &[RatioReport]) -> String {
    reports.iter().map(|r| r.algorithm.as_str()).collect::<Vec<_>>().join(", ")
}

fn criterion_4() -> Outcome {
    let reports = against("paired-uniform", &["lazy", "greedy"], &params(Some(8), None, Some(8), 5))?;
    for r in &reports {
        first_failure(r)?;
        ensure(r.completed_phases >= 5, || format!("{}: {} phases", r.algorithm, r.completed_phases))?;
        for (i, p) in r.phases().enumerate() {
            ensure(p.alg >= fin(24), || format!("{} phase {i}: ALG {}", r.algorithm, p.alg))?;
            let cert = p.certified.clone().ok_or("no certified cost")?;
            ensure(cert <= fin(12), || format!("{} phase {i}: certified {cert}", r.algorithm))?;
            let service = p.certified_service.clone().ok_or("no service cost")?;
            ensure(service < fin(1), || format!("{} phase {i}: service {service}", r.algorithm))?;
        }
    }
    Ok(format!("{}: every phase ALG >= 24, certified <= 12, service < 1", names(&reports)))
}

fn mean_alg(r: &RatioReport) -> f64 {
    let v: Vec<f64> = r.phases().map(|p| p.alg.to_f64()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_5() -> Outcome {
    let reports = against("two-request-uniform", &DETERMINISTIC_SUITE, &params(Some(16), None, Some(64), 200))?;
    let bound = ExtendedCost::Finite(rat(9, 8));
    let mut means = Vec::new();
    for r in &reports {
        first_failure(r)?;
        ensure(r.completed_phases >= 200, || format!("{}: {} phases", r.algorithm, r.completed_phases))?;
        let mean = mean_alg(r);
        ensure(mean >= 1.8, || format!("{}: mean ALG per phase {mean:.3}", r.algorithm))?;
        for (i, p) in r.phases().enumerate() {
            let cert = p.certified.clone().ok_or("no certified cost")?;
            ensure(cert <= bound, || format!("{} phase {i}: certified {cert}", r.algorithm))?;
        }
        means.push(format!("{} {:.2}", r.algorithm, mean));
    }
    Ok(format!("mean ALG per phase [{}] >= 1.8, certified <= 9/8", means.join(", ")))
}

fn criterion_6() -> Outcome {
    let reports = against("cube-mss", &DETERMINISTIC_SUITE, &params(Some(16), Some(8), None, 500))?;
    let mut means = Vec::new();
    for r in &reports {
        first_failure(r)?;
        ensure(r.completed_phases >= 500, || format!("{}: {} phases", r.algorithm, r.completed_phases))?;
        let mean = mean_alg(r);
        ensure(mean >= 1.8, || format!("{}: mean ALG per phase {mean:.3}", r.algorithm))?;
        for (i, p) in r.phases().enumerate() {
            ensure(p.trace_moves.is_some_and(|k| k <= 1), || format!("{} phase {i}: adversary moves", r.algorithm))?;
        }
        means.push(format!("{} {:.2}", r.algorithm, mean));
    }
    Ok(format!("k=4, mean ALG per phase [{}] >= 1.8, adversary moves <= 1", means.join(", ")))
}

/// Largest observed period cost and epoch count in a report.
fn period_maxima(r: &RatioReport) -> Result<(BigRational, usize, usize), String> {
    let mut cost = BigRational::from_integer(0.into());
    let mut epochs = 0;
    let mut periods = 0;
    for row in rows_named(r, "period cost") {
        let c: BigRational = mtslab::cost::parse_rational(&row.observed).map_err(|e| e.to_string())?;
        cost = cost.max(c);
        periods += 1;
    }
    for row in rows_named(r, "epochs per period") {
        epochs = epochs.max(row.observed.parse::<usize>().map_err(|e| e.to_string())?);
    }
    Ok((cost, epochs, periods))
}

fn criterion_7() -> Outcome {
    let formula = TwoLevelMssMarking::period_cost_bound(4, &rat(6, 1));
    ensure(formula == rat(276, 1), || format!("C(m 2^(m-1) + 2^m - 2) at m=4, C=6 is {formula}"))?;
    let spec = ExperimentSpec::new("subset-labeled-hst", "two-level-mss-marking", params(None, Some(4), Some(6), 5));
    let r = harness::run(&spec).map_err(|e| e.to_string())?;
    first_failure(&r)?;
    let (adv_cost, adv_epochs, adv_periods) = period_maxima(&r)?;
    ensure(adv_periods > 0, || "no period closed under the subset adversary".into())?;
    ensure(adv_cost <= rat(228, 1), || format!("period cost {adv_cost} above 228"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut periods = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..50 {
        let leaves = rng.gen_range(4..=32);
        let mut sizes = Vec::new();
        let mut left = leaves;
        while left > 0 {
            let s = rng.gen_range(1..=left.min(8));
            sizes.push(s);
            left -= s;
        }
        let c = rat(rng.gen_range(2..=8), 1);
        let metric = MetricSpace::Hst(HstTree::two_level(&sizes, &c).unwrap());
        let m = rng.gen_range(2..=4);
        let len = rng.gen_range(100..300);
        let inst = random_mss(&mut rng, metric, m, len);
        let r = harness::run_fixed(&inst, "two-level-mss-marking", 0, 1_000_000).map_err(|e| e.to_string())?;
        if let Some(bad) = r.failures().next() {
            return Err(format!("random {i}: {} [{}] {} {}", bad.check, bad.scope, bad.observed, bad.bound));
        }
        let (cost, _, p) = period_maxima(&r)?;
        periods += p;
        let bound = TwoLevelMssMarking::period_cost_bound(m, &c);
        worst_ratio = worst_ratio.max(mtslab::cost::ratio_to_f64(&(cost / bound)));
    }
    ensure(periods > 0, || "no period closed on the random sequences".into())?;
    Ok(format!(
        "subset m=4 C=6: {adv_periods} periods, max cost {adv_cost} (stated 228, formula 276), max epochs {adv_epochs} <= 15; \
         50 random HSTs: {periods} periods, max cost/bound {worst_ratio:.3}"
    ))
}

fn criterion_8() -> Outcome {
    let reports = against("subset-labeled-hst", &ALGORITHM_NAMES, &params(None, Some(4), Some(6), 5))?;
    for r in &reports {
        first_failure(r)?;
        ensure(r.completed_phases >= 5, || format!("{}: {} periods", r.algorithm, r.completed_phases))?;
        for (i, p) in r.phases().enumerate() {
            ensure(p.alg >= fin(36), || format!("{} period {i}: ALG {}", r.algorithm, p.alg))?;
            let cert = p.certified.clone().ok_or("no certified cost")?;
            ensure(cert <= fin(12), || format!("{} period {i}: certified {cert}", r.algorithm))?;
        }
        let ratio = r.empirical_ratio_vs_certified.as_ref().and_then(|x| x.exact().cloned());
        ensure(ratio.as_ref().is_some_and(|x| *x >= rat(3, 1)), || format!("{}: ratio {ratio:?}", r.algorithm))?;
    }
    Ok(format!("{}: period ALG >= 36, certified <= 12, ratio >= 3", names(&reports)))
}

fn criterion_9() -> Outcome {
    let lc = LiftedConstruction::new(4, 2, Some(rat(32, 1)), 0, 1, 1 << 16).map_err(|e| e.to_string())?;
    ensure(lc.top_items() == 4, || format!("{} subtrees", lc.top_items()))?;
    for y in 0..4 {
        let hit = lc.never_hit(y);
        ensure(hit == [y ^ 3], || format!("meta-sequence {y} spares {hit:?}"))?;
    }
    validate(lc.metric()).map_err(|v| v.to_string())?;
    let reports = against("meta-sequence", &DETERMINISTIC_SUITE, &params(None, Some(4), Some(32), 100))?;
    let mut parts = Vec::new();
    for r in &reports {
        first_failure(r)?;
        ensure(r.completed_phases >= 100, || format!("{}: {} meta-sequences", r.algorithm, r.completed_phases))?;
        let mean = mean_alg(r);
        ensure(mean >= 0.9 * 32.0, || format!("{}: mean ALG {mean:.2}", r.algorithm))?;
        for (i, p) in r.phases().enumerate() {
            let cert = p.certified.clone().ok_or("no certified cost")?;
            ensure(cert <= fin(34), || format!("{} meta-sequence {i}: certified {cert}", r.algorithm))?;
        }
        let ratio = r.empirical_ratio_vs_certified.as_ref().and_then(|x| x.exact().cloned());
        ensure(ratio.as_ref().is_some_and(|x| *x >= rat(3, 2)), || format!("{}: ratio {ratio:?}", r.algorithm))?;
        parts.push(format!("{} mean {mean:.1}", r.algorithm));
    }
    Ok(format!("4 subtrees, each meta-sequence spares exactly its complement; [{}], certified <= 34, ratio >= 1.5", parts.join(", ")))
}

fn criterion_10() -> Outcome {
    let values = lift_values(6, 3).map_err(|e| e.to_string())?;
    let want: Vec<BigUint> = [3u32, 4, 8].into_iter().map(BigUint::from).collect();
    ensure(values == want, || format!("recursion values {values:?}"))?;
    let lc = LiftedConstruction::new(6, 3, None, 0, 1, 1 << 16).map_err(|e| e.to_string())?;
    validate(lc.metric()).map_err(|v| format!("validate: {v}"))?;
    let leaves = lc.metric().n();
    let too_big = LiftedConstruction::new(8, 3, None, 0, 1, 1 << 16);
    ensure(matches!(too_big, Err(Error::TooLarge(_))), || "m=8 lift was not size-guarded".into())?;
    Ok(format!("c = 3, 4, 8; 3-level instance with {leaves} leaves validates; m=8 refused as too large"))
}

fn criterion_11() -> Outcome {
    let specs = [
        ("two-request-uniform", "random", params(Some(16), None, Some(64), 10), 3),
        ("cube-mss", "greedy", params(Some(16), Some(8), None, 20), 2),
        ("subset-labeled-hst", "two-level-mss-marking", params(None, Some(4), Some(6), 3), 1),
        ("meta-sequence", "random", params(None, Some(4), Some(32), 5), 2),
    ];
    for (adv, alg, p, trials) in specs {
        let mut spec = ExperimentSpec::new(adv, alg, AdversaryParams { seed: 42, ..p });
        spec.trials = trials;
        let a = harness::run(&spec).map_err(|e| e.to_string())?.to_json();
        let b = harness::run(&spec).map_err(|e| e.to_string())?.to_json();
        ensure(a == b, || format!("{adv} vs {alg}: reports differ"))?;
    }
    let cli = || {
        Command::new(env!("CARGO_BIN_EXE_mtslab"))
            .args(["simulate", "--adversary", "two-request-uniform", "--algorithm", "random"])
            .args(["--n", "16", "--C", "64", "--phases", "5", "--trials", "2", "--seed", "9"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (cli()?, cli()?);
    ensure(a.status.success() && !a.stdout.is_empty(), || String::from_utf8_lossy(&a.stderr).into_owned())?;
    ensure(a.stdout == b.stdout, || "CLI output differs between runs".into())?;
    Ok("4 library specs and the CLI give byte-identical JSON on repeat".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("offline oracle equivalence", criterion_1),
        ("pivot existence", criterion_2),
        ("uniform MSS marking per phase", criterion_3),
        ("paired-uniform per-phase inequalities", criterion_4),
        ("two-request randomized bound", criterion_5),
        ("cube MSS bound", criterion_6),
        ("two-level marking period cost", criterion_7),
        ("subset-labeled HST lower bound", criterion_8),
        ("meta-sequence structure and bound", criterion_9),
        ("lifting recursion", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
