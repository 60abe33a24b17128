mod common;

use std::collections::HashSet;

use weakdep::confsets::{normal_quantile, Interval};
use weakdep::functional::FunctionalSpec;
use weakdep::simulate::{replication_seed, run, wilson_interval, ExperimentPlan, LawCase, Method};

fn plan(methods: Vec<Method>, reps: usize, seed: u64) -> ExperimentPlan {
    let law = common::late_law(0.5, [0.2, 0.8], [0.3, 0.6]);
    let phi = common::wald_ratio(&law);
    ExperimentPlan {
        laws: vec![LawCase { label: "strong".into(), law, true_phi: phi }],
        functional: FunctionalSpec::Late,
        methods,
        n: 400,
        reps,
        level: 0.95,
        seed,
        range: Interval { lo: -20.0, hi: 20.0 },
    }
}

#[test]
fn trivial_methods_have_known_coverage() {
    let p = plan(vec![Method::Full, Method::Empty, Method::Oracle { eps: 0.01 }], 50, 1);
    let report = run(&p).unwrap();
    let full = report.cell("strong", "full").unwrap();
    assert_eq!((full.coverage, full.frac_fullrange, full.diam_mean), (1.0, 1.0, 40.0));
    let empty = report.cell("strong", "empty").unwrap();
    assert_eq!((empty.coverage, empty.diam_mean), (0.0, 0.0));
    let oracle = report.cell("strong", "oracle(0.01)").unwrap();
    assert_eq!(oracle.coverage, 1.0);
    assert!((oracle.diam_p50 - 0.02).abs() < 1e-12);
}

/// Endpoints of `{p : |p̂ − p| ≤ z √(p(1−p)/n)}` by bisection.
fn wilson_by_bisection(hits: usize, n: usize, conf: f64) -> (f64, f64) {
    let z = normal_quantile(0.5 + conf / 2.0);
    let ph = hits as f64 / n as f64;
    let inside = |p: f64| (ph - p).abs() <= z * (p * (1.0 - p) / n as f64).sqrt();
    let edge = |mut a: f64, mut b: f64| {
        // a inside, b outside
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if inside(m) {
                a = m
            } else {
                b = m
            }
        }
        a
    };
    let lo = if inside(0.0) { 0.0 } else { edge(ph, 0.0) };
    let hi = if inside(1.0) { 1.0 } else { edge(ph, 1.0) };
    (lo, hi)
}

#[test]
fn wilson_interval_inverts_the_score_test() {
    for (hits, n) in [(0, 10), (3, 10), (950, 1000), (1000, 1000), (517, 1000), (1, 2)] {
        let w = wilson_interval(hits, n, 0.95);
        let (lo, hi) = wilson_by_bisection(hits, n, 0.95);
        assert!((w.lo - lo).abs() < 1e-9 && (w.hi - hi).abs() < 1e-9, "{hits}/{n}: {w} vs [{lo}, {hi}]");
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let p = plan(vec![Method::Wald { cross_fit: false }, Method::Score { grid: 401 }], 64, 99);
    let csv_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run(&p)).unwrap();
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        out
    };
    let one = csv_with(1);
    assert_eq!(one, csv_with(4));
    assert_eq!(one, csv_with(3));
    let other = run(&ExperimentPlan { seed: 100, ..p.clone() }).unwrap();
    let mut out = Vec::new();
    other.write_csv(&mut out).unwrap();
    assert_ne!(one, out);
}

#[test]
fn replication_seeds_are_distinct() {
    let seeds: HashSet<u64> = (0..4).flat_map(|l| (0..5000).map(move |r| replication_seed(7, l, r))).collect();
    assert_eq!(seeds.len(), 20_000);
    assert_ne!(replication_seed(7, 0, 0), replication_seed(8, 0, 0));
}

#[test]
fn invalid_plans_are_rejected() {
    let base = plan(vec![Method::Wald { cross_fit: false }], 10, 1);
    assert!(run(&ExperimentPlan { reps: 0, ..base.clone() }).is_err());
    assert!(run(&ExperimentPlan { level: 1.0, ..base.clone() }).is_err());
    assert!(run(&ExperimentPlan { methods: vec![], ..base.clone() }).is_err());
    let unbounded = ExperimentPlan { methods: vec![Method::Score { grid: 11 }], range: Interval::real_line(), ..base.clone() };
    assert!(run(&unbounded).is_err());
    let generic = ExperimentPlan { functional: FunctionalSpec::AteIv, methods: vec![Method::Score { grid: 11 }], ..base };
    assert!(run(&generic).is_err());
    assert!(Method::parse("bogus", 11).is_err());
    for name in Method::NAMES {
        assert_eq!(Method::parse(name, 11).unwrap().name(), name);
    }
}
