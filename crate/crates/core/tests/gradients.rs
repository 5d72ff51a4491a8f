mod common;

use hetnoise::label::{Label, TaskKind};
use hetnoise::prob_head::McConfig;
use hetnoise::rng::NoiseStream;
use hetnoise::train::{grad, Activation, HeadMode, HetModel, ModelSpec, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const FLOOR: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn random_case(
    rng: &mut ChaCha8Rng,
    head: HeadMode,
    task: TaskKind,
    tau: f64,
    activation: Activation,
) -> (HetModel, Vec<Vec<f64>>, Vec<Label>) {
    let d = rng.random_range(2..=4);
    let k = rng.random_range(2..=3);
    let hidden = vec![rng.random_range(2..=5)];
    let mut spec = ModelSpec::new(d, hidden, k, head);
    spec.task = task;
    spec.activation = activation;
    spec.mc_config = McConfig::new(tau, 40, 0).unwrap();
    let mut model = HetModel::new(&spec, rng.random()).unwrap();
    // Nonzero biases so every parameter carries gradient signal.
    let p: Vec<f64> = model.parameters().iter().map(|w| w + rng.random_range(-0.3..0.3)).collect();
    model.set_parameters(&p).unwrap();
    let n = 5;
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = (0..n)
        .map(|_| match task {
            TaskKind::Multiclass => Label::Class(rng.random_range(0..k)),
            TaskKind::Multilabel => Label::MultiHot((0..k).map(|_| rng.random_range(0..2u8)).collect()),
        })
        .collect();
    (model, x, y)
}

fn check(head: HeadMode, task: TaskKind, activation: Activation, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for tau in [0.2, 1.0, 5.0] {
        for rep in 0..3 {
            let (model, x, y) = random_case(&mut rng, head, task, tau, activation);
            assert!(model.num_parameters() <= 200);
            let batch: Vec<Sample> = (0..x.len())
                .map(|i| Sample { id: i as u64, features: &x[i], label: &y[i] })
                .collect();
            let (worst, at) = common::gradient_check(&model, &batch, &NoiseStream::new(rep), H, FLOOR);
            assert!(worst < TOL, "{head:?} tau {tau}: relative error {worst:e} at {at}");
        }
    }
}

#[test]
fn multiclass_head_matches_finite_differences() {
    check(HeadMode::Multiclass, TaskKind::Multiclass, Activation::Tanh, 1);
}

#[test]
fn multilabel_head_matches_finite_differences() {
    check(HeadMode::Multilabel, TaskKind::Multilabel, Activation::Tanh, 2);
}

#[test]
fn relu_network_matches_finite_differences() {
    check(HeadMode::Multiclass, TaskKind::Multiclass, Activation::Relu, 3);
}

#[test]
fn deterministic_heads_match_finite_differences() {
    check(HeadMode::Deterministic, TaskKind::Multiclass, Activation::Tanh, 4);
    check(HeadMode::Deterministic, TaskKind::Multilabel, Activation::Tanh, 5);
}

#[test]
fn gradient_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (model, x, y) = random_case(&mut rng, HeadMode::Multiclass, TaskKind::Multiclass, 0.5, Activation::Tanh);
    let batch: Vec<Sample> = (0..x.len())
        .map(|i| Sample { id: i as u64, features: &x[i], label: &y[i] })
        .collect();
    let s = NoiseStream::new(3);
    let a = grad(&model, &batch, &s).unwrap();
    let b = grad(&model, &batch, &s).unwrap();
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1, b.1);
}
