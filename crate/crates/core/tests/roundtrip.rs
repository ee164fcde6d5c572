//! Persistence round-trips and synthetic-fleet contracts.

mod common;

use hbprog::io::{
    generate_synthetic, load_dataset, load_samples, read_json, save_dataset, save_samples, write_json, RunConfig,
};
use hbprog::prognostics::{predict_trajectory, rul_distribution};
use hbprog::{Dataset, DatasetMeta, DegradationModel, ModelFamily, PrognosisConfig, PrognosisResult, SampleSet};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn battery_export_round_trips_bit_identically(values in prop::collection::vec(0.5f64..2.2, 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let cycles: Vec<f64> = (1..=values.len()).map(|k| k as f64).collect();
        let d = Dataset::new("B0005", cycles, values, DatasetMeta::battery(1.4)).unwrap();
        let p = dir.path().join("B0005.csv");
        save_dataset(&p, &d).unwrap();
        let back = load_dataset(&p).unwrap();
        prop_assert_eq!(back.cycles(), d.cycles());
        let same = back.values().iter().zip(d.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
        prop_assert_eq!(back.meta, d.meta);
    }

    #[test]
    fn samples_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..50)) {
        let dir = tempfile::tempdir().unwrap();
        let s = SampleSet::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows).unwrap();
        let p = dir.path().join("s.csv");
        save_samples(&p, &s).unwrap();
        prop_assert_eq!(load_samples(&p).unwrap(), s);
    }
}

#[test]
fn two_row_file_parses() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.csv");
    std::fs::write(&p, "cycle,value\n1,1.85\n2,1.84\n").unwrap();
    write_json(&hbprog::io::sidecar_path(&p), &DatasetMeta::battery(1.4)).unwrap();
    assert_eq!(load_dataset(&p).unwrap().len(), 2);
}

#[test]
fn prognosis_result_round_trips_with_infinite_bands() {
    let model = hbprog::degradation::ParisModel::new(
        Default::default(),
        common::crack_geometry(),
        common::crack_loading(),
    )
    .unwrap();
    let s = SampleSet::from_rows(
        vec!["theta1".into(), "theta2".into(), "sigma".into()],
        &[vec![1.03, 1.05, 0.05], vec![1.4, 1.05, 0.05], vec![0.9, 1.07, 0.05]],
    )
    .unwrap();
    let cfg = PrognosisConfig::new(10.0, 1000.0, 1e7);
    let grid: Vec<f64> = (1..=50).map(|k| k as f64 * 2000.0).collect();
    let result = PrognosisResult {
        model: model.name().into(),
        units: "mm".into(),
        bands: Some(predict_trajectory(&s, &model, &grid, &cfg).unwrap()),
        rul: Some(rul_distribution(&s, &model, &cfg).unwrap()),
        config: cfg,
        fingerprint: "0123456789abcdef".into(),
    };
    assert!(result.bands.as_ref().unwrap().values.iter().flatten().any(|v| v.is_infinite()));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    write_json(&p, &result).unwrap();
    let back: PrognosisResult = read_json(&p).unwrap();
    assert_eq!(back, result);
}

#[test]
fn noiseless_synthesis_is_the_model_curve_and_deterministic() {
    let spec = hbprog::io::SyntheticSpec { noise_level: Some(0.0), ..common::crack_fleet(3, 1000.0, "S") };
    let (a, truth) = generate_synthetic(&spec, 11).unwrap();
    let (b, _) = generate_synthetic(&spec, 11).unwrap();
    assert_eq!(a, b);
    let fam = ModelFamily::from_name("paris").unwrap();
    for (d, u) in a.iter().zip(&truth.units) {
        let m = d.bind(&fam).unwrap();
        for (k, y) in d.cycles().iter().zip(d.values()) {
            assert_eq!(*y, m.predict(&u.theta, *k).unwrap());
        }
    }
    let (c, _) = generate_synthetic(&spec, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn run_config_resolves_paths_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.json");
    std::fs::write(&p, r#"{"historical": ["data/T1.csv"], "current": "/abs/T7.csv", "seed": 3}"#).unwrap();
    let cfg = RunConfig::load(&p).unwrap();
    assert_eq!(cfg.historical[0], dir.path().join("data/T1.csv"));
    assert_eq!(cfg.current.as_deref(), Some(std::path::Path::new("/abs/T7.csv")));
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.fingerprint(), RunConfig::load(&p).unwrap().fingerprint());
}
