use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtslab::algorithms::{self, run_explicit, ALGORITHM_NAMES};
use mtslab::cost::rat;
use mtslab::metric::trim_equivalent;
use mtslab::request::{cost_breakdown_rle, expand_rle};
use mtslab::{optimal, optimal_rle, Block, ExtendedCost, HstTree, Instance, MetricSpace, Request, RequestSet, Start};

fn distinct(pool: Vec<Request>) -> RequestSet {
    let mut out: Vec<Request> = Vec::new();
    for r in pool {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    RequestSet::new(out).unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, levels: usize, max_children: usize) -> Vec<Vec<usize>> {
    let mut rows = Vec::new();
    let mut nodes = 1;
    for _ in 0..levels {
        let row: Vec<usize> = (0..nodes).map(|_| rng.gen_range(1..=max_children)).collect();
        nodes = row.iter().sum();
        rows.push(row);
    }
    rows
}

fn random_metric(rng: &mut ChaCha8Rng) -> MetricSpace {
    match rng.gen_range(0..3) {
        0 => MetricSpace::uniform(rng.gen_range(1..=5)),
        1 => MetricSpace::paired_uniform(2 * rng.gen_range(1..=2), rat(rng.gen_range(3..10), 2)).unwrap(),
        _ => {
            let rows = random_rows(rng, 2, 3);
            MetricSpace::Hst(HstTree::with_aspect_ratio(rows, &rat(rng.gen_range(3..10), 2)).unwrap())
        }
    }
}

fn random_pool(rng: &mut ChaCha8Rng, n: usize, mss: bool) -> RequestSet {
    let m = rng.gen_range(1..=3);
    let pool = (0..m)
        .map(|_| {
            let keep = rng.gen_range(0..n);
            Request::new(
                (0..n)
                    .map(|s| {
                        if mss {
                            if s != keep && rng.gen_bool(0.5) {
                                ExtendedCost::Infinite
                            } else {
                                ExtendedCost::zero()
                            }
                        } else if rng.gen_bool(0.1) {
                            ExtendedCost::Infinite
                        } else {
                            ExtendedCost::Finite(rat(rng.gen_range(0..12), rng.gen_range(1..4)))
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    distinct(pool)
}

fn random_blocks(rng: &mut ChaCha8Rng, m: usize, len: usize, max_repeat: u32) -> Vec<Block> {
    (0..len).map(|_| Block::new(rng.gen_range(0..m), rng.gen_range(1..=max_repeat))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rle_matches_expansion(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&mut rng);
        let n = metric.n();
        let mss = rng.gen_bool(0.3);
        let requests = random_pool(&mut rng, n, mss);
        let len = rng.gen_range(0..6);
        let blocks = random_blocks(&mut rng, requests.m(), len, 5);
        let s0 = rng.gen_range(0..n);
        let folded = optimal_rle(&metric, &requests, Start::At(s0), &blocks).unwrap();
        let explicit: Vec<Request> =
            expand_rle(&blocks, None).unwrap().iter().map(|&r| requests.get(r).clone()).collect();
        let flat = optimal(&metric, s0, &explicit).unwrap();
        prop_assert_eq!(&folded.cost, &flat.cost);
        prop_assert_eq!(folded.per_prefix.len(), blocks.len());
        if !folded.cost.is_infinite() {
            let paid = cost_breakdown_rle(&metric, &requests, s0, &folded.witness, &blocks).unwrap().total();
            prop_assert_eq!(paid, folded.cost.clone());
        }
        let free = optimal_rle(&metric, &requests, Start::Anywhere, &blocks).unwrap();
        prop_assert!(free.cost <= folded.cost);
    }

    #[test]
    fn prefix_optima_are_prefix_solutions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&mut rng);
        let requests = random_pool(&mut rng, metric.n(), false);
        let len = rng.gen_range(1..6);
        let blocks = random_blocks(&mut rng, requests.m(), len, 4);
        let s0 = rng.gen_range(0..metric.n());
        let full = optimal_rle(&metric, &requests, Start::At(s0), &blocks).unwrap();
        for k in 1..=blocks.len() {
            let part = optimal_rle(&metric, &requests, Start::At(s0), &blocks[..k]).unwrap();
            prop_assert_eq!(&full.per_prefix[k - 1], &part.cost);
        }
    }

    #[test]
    fn huge_repeats_stay_exact(seed in any::<u64>(), exp in 20u32..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&mut rng);
        let requests = random_pool(&mut rng, metric.n(), false);
        let r = rng.gen_range(0..requests.m());
        let small = optimal_rle(&metric, &requests, Start::Anywhere, &[Block::new(r, 1u8)]).unwrap();
        let big = BigUint::from(2u8).pow(exp);
        let large = optimal_rle(&metric, &requests, Start::Anywhere, &[Block::new(r, big)]).unwrap();
        prop_assert!(small.cost <= large.cost);
        // the cheapest point is free of charge or is paid once per repeat
        let cheapest = (0..metric.n()).map(|s| requests.get(r).cost(s).clone()).min().unwrap();
        prop_assert_eq!(small.cost, cheapest.clone());
        prop_assert_eq!(cheapest.is_zero(), large.cost.is_zero());
    }

    #[test]
    fn online_decisions_ignore_the_future(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&mut rng);
        let mss = rng.gen_bool(0.5);
        let requests = random_pool(&mut rng, metric.n(), mss);
        let s0 = rng.gen_range(0..metric.n());
        let len = rng.gen_range(1..30);
        let prefix: Vec<usize> = (0..len).map(|_| rng.gen_range(0..requests.m())).collect();
        let mut longer = prefix.clone();
        longer.extend((0..10).map(|_| rng.gen_range(0..requests.m())));
        for name in ALGORITHM_NAMES {
            let mut a = algorithms::by_name(name, seed).unwrap();
            let mut b = algorithms::by_name(name, seed).unwrap();
            if a.init(&metric, &requests, s0).is_err() {
                continue;
            }
            b.init(&metric, &requests, s0).unwrap();
            let short = run_explicit(a.as_mut(), &prefix);
            let long = run_explicit(b.as_mut(), &longer);
            prop_assert_eq!(&short[..], &long[..prefix.len()], "{}", name);
        }
    }

    #[test]
    fn trimming_preserves_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = rng.gen_range(1..=3);
        let rows = random_rows(&mut rng, levels, 3);
        let tree = HstTree::with_aspect_ratio(rows, &rat(rng.gen_range(2..6), 1)).unwrap();
        let n = tree.n();
        // a leaf every request forbids gets removed
        let requests = random_pool(&mut rng, n, true);
        let Ok(trimmed) = trim_equivalent(&tree, &requests) else {
            return Ok(());
        };
        let len = rng.gen_range(1..8);
        let blocks = random_blocks(&mut rng, requests.m(), len, 3);
        let mapped: Vec<Block> =
            blocks.iter().map(|b| Block::new(trimmed.request_of[b.request], b.repeat.clone())).collect();
        let big = MetricSpace::Hst(tree.clone());
        let small = MetricSpace::Hst(trimmed.tree.clone());
        let before = optimal_rle(&big, &requests, Start::Anywhere, &blocks).unwrap();
        let after = optimal_rle(&small, &trimmed.requests, Start::Anywhere, &mapped).unwrap();
        prop_assert_eq!(&before.cost, &after.cost);
        let s0 = rng.gen_range(0..n);
        if let Some(t0) = trimmed.representative[s0] {
            let before = optimal_rle(&big, &requests, Start::At(s0), &blocks).unwrap();
            let after = optimal_rle(&small, &trimmed.requests, Start::At(t0), &mapped).unwrap();
            prop_assert_eq!(before.cost, after.cost);
        }
    }

    #[test]
    fn instances_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&mut rng);
        let requests = random_pool(&mut rng, metric.n(), false);
        let len = rng.gen_range(0..5);
        let blocks = random_blocks(&mut rng, requests.m(), len, 1000);
        let inst = Instance::new(metric, requests, 0, blocks).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back, inst);
    }
}
