use bopp_bench::experiment::{run_experiment, ExperimentSpec, Method, CSV_HEADER};
use bopp_bench::registry::ModelOptions;

fn small(model: &str, methods: Vec<Method>) -> ExperimentSpec {
    ExperimentSpec {
        model: model.into(),
        model_options: ModelOptions {
            steps: Some(15),
            ..Default::default()
        },
        methods,
        budget: 8,
        n_particles: 20,
        runs: 2,
        seed: 3,
        timing: false,
        ..Default::default()
    }
}

#[test]
fn methods_share_the_evaluation_axis() {
    let t = run_experiment(&small("kalman", vec![Method::Bopp, Method::PmmhLmh])).unwrap();
    assert_eq!(t.rows.len(), 2 * 2 * 8);
    assert_eq!(t.methods(), vec![Method::Bopp, Method::PmmhLmh]);
    for m in t.methods() {
        for run in 0..2 {
            let idx: Vec<usize> = t.rows.iter().filter(|r| r.method == m && r.run == run).map(|r| r.eval_index).collect();
            assert_eq!(idx, (1..=8).collect::<Vec<_>>());
        }
    }
    for r in &t.rows {
        assert_eq!(r.seed, 3 + r.run as u64);
        assert!(r.dist_to_truth.is_some());
    }
}

#[test]
fn best_so_far_is_running_max() {
    let t = run_experiment(&small("hmm", Method::ALL.to_vec())).unwrap();
    for w in t.rows.windows(2) {
        if w[0].method == w[1].method && w[0].run == w[1].run {
            assert!(w[1].best_log_z >= w[0].best_log_z);
            assert!(w[1].best_log_z >= w[1].log_z);
        }
    }
    let summary = t.summary();
    assert_eq!(summary.len(), 3 * 8);
    assert!(summary.iter().all(|s| s.n_runs == 2 && s.best_log_z_q25 <= s.best_log_z_q75));
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    let mut a = small("bimodal", vec![Method::Bopp, Method::PmmhRmh]);
    a.threads = 1;
    let mut b = a.clone();
    b.threads = 3;
    let (ta, tb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
    let csv = |t: &bopp_bench::ResultsTable| {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    assert_eq!(csv(&ta), csv(&tb));
}

#[test]
fn csv_and_json_outputs() {
    let t = run_experiment(&small("branin", vec![Method::PmmhLmh])).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    let first = reader.records().next().unwrap().unwrap();
    let theta: serde_json::Value = serde_json::from_str(&first[5]).unwrap();
    assert!(theta.get("x1").is_some() && theta.get("x2").is_some());
    assert_eq!(&first[8], "");

    let mut buf = Vec::new();
    t.write_json(&mut buf).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 16);
    assert_eq!(doc["summary"].as_array().unwrap().len(), 8);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(run_experiment(&small("nope", vec![Method::Bopp])).is_err());
    assert!(run_experiment(&small("bimodal", vec![])).is_err());
    let mut s = small("bimodal", vec![Method::Bopp]);
    s.n_particles = 0;
    assert!(run_experiment(&s).is_err());
}
