use std::io::Write;
use std::path::Path;

use chowfilter::bench::{
    evaluate_run, generate, write_results, MetricRecord, RunOutput, Scenario, Shift, RESULT_COLUMNS,
};
use chowfilter::icf::Selector;
use chowfilter::pq::{pq_learn, rejection_rate, split_indices, PqConfig};
use chowfilter::tds::split_test;
use chowfilter::Classifier;
use proptest::prelude::*;

fn shipped(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

#[test]
fn shipped_scenarios_load_and_validate() {
    for name in ["pq_subcube.toml", "tds_identical.toml", "tds_flip_cloud.toml", "icf_gaussian.toml"] {
        let scn = shipped(name);
        scn.validate().unwrap();
        let again = Scenario::from_toml_str(&scn.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, scn, "{name}");
    }
}

#[test]
fn scenario_file_round_trip() {
    let scn = shipped("pq_subcube.toml");
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(scn.to_toml_string().unwrap().as_bytes()).unwrap();
    assert_eq!(Scenario::load(file.path()).unwrap(), scn);
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    let scn = shipped("icf_gaussian.toml");
    let a = generate(&scn).unwrap();
    let b = generate(&scn).unwrap();
    assert_eq!(a.train.flat_points(), b.train.flat_points());
    assert_eq!(a.test.labels(), b.test.labels());
    assert_eq!(a.test_shifted, b.test_shifted);
    let other = generate(&Scenario { seed: scn.seed + 1, ..scn.clone() }).unwrap();
    assert_ne!(a.train.flat_points(), other.train.flat_points());
}

#[test]
fn empirical_errors_converge_to_exact_lambda() {
    let scn = Scenario {
        samples: chowfilter::bench::SampleSizes { train: 200, test: 200, fresh: 40_000 },
        noise: chowfilter::bench::Noise { train: 0.1, test: 0.05 },
        ..shipped("pq_subcube.toml")
    };
    let report = scn.oracle_lambda().unwrap().expect("hypercube scenario with a class");
    let class = chowfilter::bench::concept_class(scn.oracle_class.as_ref().unwrap(), scn.dim).unwrap();
    let best = &class[report.argmin];
    let g = generate(&scn).unwrap();
    for (sample, exact) in [(&g.fresh_train, report.lambda_train), (&g.fresh_test, report.lambda_test)] {
        let labels = sample.require_labels().unwrap();
        let n = sample.len() as f64;
        let err = sample.points().zip(labels).filter(|(x, y)| u8::from(best.eval(x)) != **y).count() as f64 / n;
        let se = (exact * (1.0 - exact) / n).sqrt().max(1.0 / n);
        assert!((err - exact).abs() <= 5.0 * se, "empirical {err} vs exact {exact}");
    }
}

#[test]
fn pq_pipeline_records_round_trip() {
    let scn = shipped("pq_subcube.toml");
    let g = generate(&scn).unwrap();
    let mut cfg = PqConfig::new(0.2, 0.5, 2);
    cfg.multilinear = true;
    cfg.seed = scn.seed;
    let out = pq_learn(&g.train, &g.test, &cfg).unwrap();

    let (_, ref_idx) = split_indices(g.train.len(), cfg.seed);
    let reference = g.train.subset(&ref_idx).unlabeled();
    let restored = Selector::from_json(&out.selector.to_json().unwrap(), &reference).unwrap();
    let test = g.test.unlabeled();
    assert_eq!(restored.evaluate_sample(&test).unwrap(), out.selector.evaluate_sample(&test).unwrap());

    let record = out.classifier.to_record().unwrap();
    let h = Classifier::from_record(&record).unwrap();
    assert!(g.fresh_test.points().all(|x| h.eval(x) == out.classifier.eval(x)));

    let lambda = scn.oracle_lambda().unwrap();
    let m = evaluate_run(
        RunOutput::Pq { output: &out, eps: 0.2, eta: 0.5 },
        &g.fresh_test,
        Some(&g.fresh_train),
        lambda.as_ref(),
    )
    .unwrap();
    assert_eq!(m.rejection_test, Some(rejection_rate(&out.selector, &g.fresh_test.unlabeled()).unwrap()));
    assert!(m.bound.unwrap() >= m.selective_error.unwrap());
}

#[test]
fn unshifted_scenario_has_no_shifted_points() {
    let scn = Scenario { shift: Shift::None, ..shipped("pq_subcube.toml") };
    let g = generate(&scn).unwrap();
    assert!(g.test_shifted.iter().all(|s| !s));
    assert_eq!(g.test.len(), scn.samples.test);
    assert_eq!(g.fresh_train.len(), scn.samples.fresh);
}

fn metric() -> impl Strategy<Value = MetricRecord> {
    (
        any::<u64>(),
        proptest::option::of(0.0..1.0f64),
        proptest::option::of(0.0..1.0f64),
        proptest::option::of(0usize..1000),
        proptest::option::of(prop_oneof![Just("ACCEPT".to_string()), Just("REJECT".to_string())]),
    )
        .prop_map(|(seed, err, rej, iters, decision)| MetricRecord {
            scenario: "s,with \"quotes\"".into(),
            seed,
            mode: "tds".into(),
            decision,
            selective_error: err,
            rejection_train: rej,
            iterations: iters,
            ..MetricRecord::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_table_parses_back(rows in proptest::collection::vec(metric(), 0..8)) {
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        prop_assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), RESULT_COLUMNS.to_vec());
        let parsed: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        prop_assert_eq!(parsed.len(), rows.len());
        for (rec, m) in parsed.iter().zip(&rows) {
            prop_assert_eq!(rec.iter().map(String::from).collect::<Vec<_>>(), m.to_fields());
            let err: Option<f64> = rec.get(4).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap());
            prop_assert_eq!(err, m.selective_error);
        }
    }

    #[test]
    fn splits_partition_the_indices(n in 2usize..500, seed in any::<u64>(), frac in 0.0..1.0f64) {
        let (a, b) = split_indices(n, seed);
        prop_assert_eq!(a.len(), n.div_ceil(2));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        let hold = ((n as f64 * frac) as usize).min(n);
        let (h, f) = split_test(n, hold, seed);
        prop_assert_eq!(h.len(), hold);
        let mut all: Vec<usize> = h.iter().chain(&f).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
