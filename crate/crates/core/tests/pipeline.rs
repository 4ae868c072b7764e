use mcda_core::baselines::{evaluate_bound, run_suite, MethodSpec};
use mcda_core::datagen::{read_dataset, write_dataset, BenchmarkSpec};
use mcda_core::mcda::train::predict_dataset;
use mcda_core::mcda::{train, Method, TrainConfig};
use mcda_core::nnet::{read_checkpoint, write_checkpoint};

fn tiny_config(method: Method) -> TrainConfig {
    TrainConfig {
        method,
        epochs: 3,
        batch_size: 16,
        ..TrainConfig::default()
    }
}

#[test]
fn generated_data_survives_the_file_format() {
    let ds = BenchmarkSpec::standard_vector(50).build(9).unwrap();
    let back = read_dataset(&write_dataset(&ds), "memory").unwrap();
    assert!(back.bit_eq(&ds));
}

#[test]
fn trained_model_round_trips_through_a_checkpoint() {
    let ds = BenchmarkSpec::standard_vector(60).build(1).unwrap();
    let outcome = train(&ds, &tiny_config(Method::Mcda)).unwrap();
    assert_eq!(outcome.log.records.len(), 4);
    let restored = read_checkpoint(&write_checkpoint(&outcome.bundle), "memory").unwrap();
    let (_, a) = predict_dataset(&outcome.bundle, &ds).unwrap();
    let (_, b) = predict_dataset(&restored, &ds).unwrap();
    assert_eq!(a, b);
    let report = evaluate_bound(&restored, &ds).unwrap();
    assert_eq!(report.eps_tgt_per_domain.len(), 3);
}

#[test]
fn training_is_reproducible_per_seed() {
    let ds = BenchmarkSpec::standard_vector(60).build(2).unwrap();
    let a = train(&ds, &tiny_config(Method::Dann)).unwrap();
    let b = train(&ds, &tiny_config(Method::Dann)).unwrap();
    assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
    assert_eq!(write_checkpoint(&a.bundle), write_checkpoint(&b.bundle));
}

#[test]
fn suite_covers_every_method_and_seed() {
    let ds = BenchmarkSpec::standard_vector(40).build(3).unwrap();
    let methods: Vec<MethodSpec> = Method::ALL.iter().map(|&m| MethodSpec::new(m)).collect();
    let result = run_suite(&ds, &methods, &[0, 1], &tiny_config(Method::Mcda)).unwrap();
    assert_eq!(result.rows.len(), Method::ALL.len() * 2);
    assert_eq!(result.summary().len(), Method::ALL.len());
    assert!(result.rows.iter().all(|r| (0.0..=1.0).contains(&r.acc_tgt_mean)));
}
