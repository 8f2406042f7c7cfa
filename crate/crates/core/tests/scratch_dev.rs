// Temporary diagnostics; deleted before ship.
use std::collections::HashMap;

use threatmatch::encoder::{normalize, read_csv, split, Dataset, TargetMode};
use threatmatch::experiment::evaluate;
use threatmatch::neuralnet::{init_mlp, train, Model, OutputActivation, TrainConfig};

fn conflict_floor(fit: &Dataset) -> f64 {
    let mut groups: HashMap<[u64; 4], Vec<f64>> = HashMap::new();
    for (row, target) in fit.rows().iter().zip(fit.targets()) {
        let key = [
            row.0[0].to_bits(),
            row.0[1].to_bits(),
            row.0[2].to_bits(),
            row.0[3].to_bits(),
        ];
        groups.entry(key).or_default().push(target[0]);
    }
    let mut total = 0.0;
    for targets in groups.values() {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        total += targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>();
    }
    total / fit.len() as f64
}

#[test]
#[ignore]
fn per_seed_convergence() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/dataset.csv"
    ))
    .unwrap();
    let dataset = read_csv(&text, TargetMode::Scalar, false).unwrap();

    for seed in 1u64..=14 {
        let (train_set, test_set) = split(&dataset, 26, seed).unwrap();
        let (norm_train, params) = normalize(&train_set).unwrap();
        let n_val = (0.15 * norm_train.len() as f64).floor() as usize;
        let (fit, _val) = split(&norm_train, n_val, seed).unwrap();
        let floor = conflict_floor(&fit);

        let mlp = init_mlp([4, 90, 1], OutputActivation::Linear, seed).unwrap();
        let config = TrainConfig {
            seed,
            max_epochs: 6000,
            max_fail: usize::MAX / 2,
            ..TrainConfig::default()
        };
        let started = std::time::Instant::now();
        let (trained, log) = train(mlp, &norm_train, &config).unwrap();
        let secs = started.elapsed().as_secs_f64();
        let model = Model {
            mlp: trained,
            mode: TargetMode::Scalar,
            norm: Some(params),
        };
        let acc = evaluate(&model, &test_set).unwrap().accuracy;
        let final_mse = log.final_train_mse();
        let at = |e: usize| log.epochs.get(e - 1).map(|r| r.train_mse).unwrap_or(f64::NAN);
        println!(
            "seed={seed:2} floor={floor:.5} mse@2000={:.5} mse@4000={:.5} mse@6000={final_mse:.5} excess={:.5} acc={acc:.2} secs={secs:.1}",
            at(2000), at(4000), final_mse - floor
        );
    }
}
