use hetnoise::eval::Target;
use hetnoise::label::Label;
use hetnoise::noisegen::{generate, BlobConfig, NoiseProfile, NoisyDataset};
use hetnoise::prob_head::McConfig;
use hetnoise::rng::NoiseStream;
use hetnoise::train::{
    batch_loss, fit, predict_dataset, HeadMode, HetModel, ModelSpec, Sample, TrainConfig,
};

fn clean_blobs(n: usize, seed: u64) -> NoisyDataset {
    let blobs = BlobConfig { separation: 8.0, ..BlobConfig::default() };
    generate(n, 2, 2, &NoiseProfile::uniform_flip(0.0), seed, &blobs).unwrap()
}

fn full_loss(model: &HetModel, data: &NoisyDataset) -> f64 {
    let batch: Vec<Sample> = (0..data.len())
        .map(|i| Sample { id: i as u64, features: &data.features()[i], label: &data.noisy_labels()[i] })
        .collect();
    batch_loss(model, &batch, &NoiseStream::new(99)).unwrap()
}

fn quick_cfg(seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: 0.02, epochs: 10, batch_size: 32, seed, train_mc_samples: 16, ..TrainConfig::default() }
}

#[test]
fn deterministic_head_fits_separable_blobs() {
    let data = clean_blobs(400, 1);
    let spec = ModelSpec::new(2, vec![8], 2, HeadMode::Deterministic);
    let (model, log) = fit(HetModel::new(&spec, 1).unwrap(), &data, &quick_cfg(1)).unwrap();
    let preds = predict_dataset(&model, &data, &McConfig::default()).unwrap();
    assert!(preds.accuracy() >= 0.99, "accuracy {}", preds.accuracy());
    let first = log.epochs.first().unwrap().train_loss;
    let last = log.epochs.last().unwrap().train_loss;
    assert!(last * 10.0 <= first, "loss {first} -> {last}");
}

#[test]
fn fit_is_deterministic() {
    let data = clean_blobs(200, 2);
    let spec = ModelSpec::new(2, vec![4], 2, HeadMode::Multiclass);
    let run = || fit(HetModel::new(&spec, 5).unwrap(), &data, &quick_cfg(3)).unwrap();
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(la, lb);
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let data = clean_blobs(100, 3);
    let spec = ModelSpec::new(2, vec![4], 2, HeadMode::Multiclass);
    let start = HetModel::new(&spec, 4).unwrap();
    let cfg = TrainConfig { learning_rate: 0.0, ..quick_cfg(0) };
    let (end, _) = fit(start.clone(), &data, &cfg).unwrap();
    assert_eq!(start.parameters(), end.parameters());
}

#[test]
fn training_lowers_the_loss_for_every_seed() {
    for seed in 0..5 {
        let data = clean_blobs(300, 10 + seed);
        for head in [HeadMode::Multiclass, HeadMode::Deterministic] {
            let spec = ModelSpec::new(2, vec![6], 2, head);
            let start = HetModel::new(&spec, seed).unwrap().with_mc_config(McConfig::new(1.0, 16, 0).unwrap());
            let (end, _) = fit(start.clone(), &data, &quick_cfg(seed)).unwrap();
            let (before, after) = (full_loss(&start, &data), full_loss(&end, &data));
            assert!(after < before, "seed {seed} {head:?}: {before} -> {after}");
        }
    }
}

#[test]
fn fit_rejects_mismatched_data() {
    let data = clean_blobs(50, 4);
    let spec = ModelSpec::new(3, vec![], 2, HeadMode::Multiclass);
    assert!(fit(HetModel::new(&spec, 0).unwrap(), &data, &quick_cfg(0)).is_err());
    let spec = ModelSpec::new(2, vec![], 3, HeadMode::Multiclass);
    assert!(fit(HetModel::new(&spec, 0).unwrap(), &data, &quick_cfg(0)).is_err());
}

#[test]
fn deterministic_predictions_carry_no_uncertainty() {
    let data = clean_blobs(60, 5);
    let spec = ModelSpec::new(2, vec![3], 2, HeadMode::Deterministic);
    let preds = predict_dataset(&HetModel::new(&spec, 2).unwrap(), &data, &McConfig::default()).unwrap();
    assert!(preds.uncertainty.iter().all(|&u| u == 0.0));
}

/// A probabilistic head whose scale outputs sit at the floor, sharing its
/// mean outputs with a deterministic head.
fn twin_heads() -> (HetModel, HetModel) {
    let det = HetModel::new(&ModelSpec::new(2, vec![], 3, HeadMode::Deterministic), 7).unwrap();
    let mut prob = HetModel::zeros(&ModelSpec::new(2, vec![], 3, HeadMode::Multiclass)).unwrap();
    let (src, dst) = (&det.layers()[0], &mut prob.layers_mut()[0]);
    dst.weights[..6].copy_from_slice(&src.weights);
    dst.biases[..3].copy_from_slice(&src.biases);
    for b in &mut dst.biases[3..] {
        *b = -1000.0;
    }
    (det, prob)
}

#[test]
fn floored_scales_reproduce_the_deterministic_head() {
    let data = generate(200, 2, 3, &NoiseProfile::uniform_flip(0.5), 6, &BlobConfig::default()).unwrap();
    let (det, prob) = twin_heads();
    let mc = McConfig::new(1.0, 200, 1).unwrap();
    let a = predict_dataset(&det, &data, &mc).unwrap();
    let b = predict_dataset(&prob, &data, &mc).unwrap();
    assert_eq!(a.predicted, b.predicted);
    for (p, q) in a.probs.iter().zip(&b.probs) {
        for (x, y) in p.iter().zip(q) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}

#[test]
fn predictions_are_reproducible_and_retargetable() {
    let data = generate(120, 2, 2, &NoiseProfile::uniform_flip(1.0), 8, &BlobConfig::default()).unwrap();
    let model = HetModel::new(&ModelSpec::new(2, vec![4], 2, HeadMode::Multiclass), 3).unwrap();
    let mc = McConfig::new(0.5, 300, 4).unwrap();
    let a = predict_dataset(&model, &data, &mc).unwrap();
    let b = predict_dataset(&model, &data, &mc).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.target, Target::Noisy);
    let clean = a.retarget(Target::Clean).unwrap();
    assert_eq!(clean.target_labels(), data.clean_labels().unwrap());
    assert!(matches!(clean.predicted[0], Label::Class(_)));
}
