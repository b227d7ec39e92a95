use wsdetect::corpus::TokenSequence;
use wsdetect::embeddings::{EmbeddingMatrix, Vocabulary};
use wsdetect::nn::{
    train, AdamConfig, BiLstmModel, Dense, LstmParams, Matrix, ModelConfig, TrainConfig,
};
use wsdetect::rng::SplitMix64;

fn fill(n: usize, seed: f64) -> Vec<f64> {
    (0..n).map(|k| 0.3 * (seed + 1.7 * k as f64).sin()).collect()
}

fn vocab(tokens: &[&str]) -> Vocabulary {
    Vocabulary::from_tokens(
        tokens.iter().map(|t| t.to_string()).collect(),
        vec![1; tokens.len()],
        1,
    )
    .unwrap()
}

fn uniform(rng: &mut SplitMix64, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0 * scale)
        .collect()
}

fn random_embeddings(tokens: &[&str], dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = SplitMix64::new(seed);
    let vectors = uniform(&mut rng, tokens.len() * dim, 0.5);
    EmbeddingMatrix::new(vocab(tokens), dim, vectors).unwrap()
}

/// Vocabulary of 3, dimension 2, hidden 2, dense1 of 2; every tensor filled
/// from `fill` with a distinct offset.
fn tiny_model() -> BiLstmModel {
    let (d, h, f) = (2, 2, 2);
    let mut table = vec![0.0; d];
    table.extend(fill(6, 0.1));
    let lstm = |a: f64, b: f64, c: f64| LstmParams {
        w: Matrix::from_vec(4 * h, d, fill(4 * h * d, a)),
        u: Matrix::from_vec(4 * h, h, fill(4 * h * h, b)),
        b: fill(4 * h, c),
    };
    BiLstmModel::from_parts(
        vocab(&["a", "b", "c"]),
        Matrix::from_vec(4, d, table),
        true,
        lstm(1.0, 2.0, 3.0),
        lstm(4.0, 5.0, 6.0),
        Dense {
            weights: Matrix::from_vec(f, 2 * h, fill(f * 2 * h, 7.0)),
            bias: fill(f, 8.0),
        },
        Dense {
            weights: Matrix::from_vec(1, f, fill(f, 9.0)),
            bias: fill(1, 10.0),
        },
        16,
    )
    .unwrap()
}

#[test]
fn tiny_model_matches_manual_oracle() {
    // Independent scalar re-implementation, evaluated offline.
    let expected = 0.4732319161541555;
    let p = tiny_model().forward(&[1, 3, 0, 2]).unwrap();
    assert!((p - expected).abs() < 1e-10, "{p} vs {expected}");
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

fn check_gradients(trainable: bool) -> usize {
    let tokens = ["w0", "w1", "w2", "w3"];
    let cfg = ModelConfig {
        hidden_size: 3,
        dense1_size: 2,
        max_sequence_length: 8,
        trainable_embedding: trainable,
    };
    let mut model = BiLstmModel::new(&random_embeddings(&tokens, 3, 5), &cfg, 11).unwrap();
    // Non-zero biases so every bias gradient is exercised.
    let mut rng = SplitMix64::new(99);
    model.dense1.bias = uniform(&mut rng, 2, 0.3);
    model.dense2.bias = uniform(&mut rng, 1, 0.3);
    model.forward_lstm.b = uniform(&mut rng, 12, 0.3);
    model.backward_lstm.b = uniform(&mut rng, 12, 0.3);
    let batch = vec![(vec![1, 2, 3], 1u8), (vec![4, 0, 2, 2, 1], 0), (vec![3], 1)];

    let (_, grads) = model.loss_and_gradients(&batch).unwrap();
    let analytic = grads.dense_groups(&model);
    let names: Vec<&str> = model.parameter_groups_mut().iter().map(|g| g.name).collect();
    assert_eq!(names, analytic.iter().map(|(n, _)| *n).collect::<Vec<_>>());

    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (gi, (name, g)) in analytic.iter().enumerate() {
        for (k, &analytic_k) in g.iter().enumerate() {
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                m.parameter_groups_mut()[gi].values[k] += delta;
                m.batch_loss(&batch).unwrap()
            };
            let numeric = (loss_at(step) - loss_at(-step)) / (2.0 * step);
            let e = rel_err(analytic_k, numeric);
            assert!(e < 1e-4, "{name}[{k}]: analytic {analytic_k} numeric {numeric}");
            worst = worst.max(e);
            checked += 1;
        }
    }
    eprintln!("checked {checked} parameters, worst relative error {worst:.2e}");
    checked
}

#[test]
fn gradients_match_finite_differences() {
    let with = check_gradients(true);
    let without = check_gradients(false);
    assert_eq!(with - without, 12, "embedding rows 1..=4 of width 3");
}

#[test]
fn reversal_symmetry_with_shared_directions() {
    let mut model = tiny_model();
    model.backward_lstm = model.forward_lstm.clone();
    let h = model.hidden_size();
    for r in 0..model.dense1.weights.rows() {
        for c in 0..h {
            let v = model.dense1.weights.get(r, c);
            model.dense1.weights.set(r, c + h, v);
        }
    }
    let ids = [1, 3, 3, 2, 0, 1];
    let rev: Vec<usize> = ids.iter().rev().copied().collect();
    let a = model.forward(&ids).unwrap();
    let b = model.forward(&rev).unwrap();
    assert!((a - b).abs() < 1e-14, "{a} vs {b}");
}

#[test]
fn zero_output_layer_gives_one_half() {
    let mut model = tiny_model();
    model.dense2.weights = Matrix::zeros(1, 2);
    model.dense2.bias = vec![0.0];
    for ids in [vec![1], vec![3, 2, 1, 0], vec![0]] {
        assert_eq!(model.forward(&ids).unwrap(), 0.5);
    }
    let batch: Vec<_> = (1..=4).map(|i| (vec![i % 4], 1u8)).collect();
    let (loss, grads) = model.loss_and_gradients(&batch).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    // (0.5 - 1) / 4 per example, four examples.
    assert_eq!(grads.dense2.bias[0], -0.5);
    let mixed = vec![(vec![1], 1u8), (vec![2], 0u8)];
    let (_, grads) = model.loss_and_gradients(&mixed).unwrap();
    assert_eq!(grads.dense2.bias[0], 0.0);
}

#[test]
fn saturated_correct_predictions_have_zero_gradient() {
    let mut model = tiny_model();
    model.dense2.weights = Matrix::zeros(1, 2);
    model.dense2.bias = vec![50.0];
    let batch = vec![(vec![1, 2], 1u8), (vec![3], 1u8)];
    let (loss, grads) = model.loss_and_gradients(&batch).unwrap();
    assert!(grads.is_all_zero());
    assert!(loss < 1e-6);
    model.dense2.bias = vec![-800.0];
    let batch = vec![(vec![1, 2], 0u8), (vec![3], 0u8)];
    let (_, grads) = model.loss_and_gradients(&batch).unwrap();
    assert!(grads.is_all_zero());
}

#[test]
fn probabilities_stay_in_open_interval() {
    let mut model = tiny_model();
    model.dense2.bias = vec![1e6];
    let p = model.forward(&[1]).unwrap();
    assert!(p <= 1.0);
    let loss = model.batch_loss(&[(vec![1], 0)]).unwrap();
    assert!(loss.is_finite());
}

#[test]
fn empty_and_out_of_range_input() {
    let model = tiny_model();
    assert!(model.forward(&[]).is_err());
    assert!(model.forward(&[4]).is_err());
    assert_eq!(model.encode(&TokenSequence::from_whitespace("")), vec![0]);
    assert_eq!(model.encode(&TokenSequence::from_whitespace("c zzz a")), vec![3, 0, 1]);
}

#[test]
fn truncation_keeps_the_head() {
    let mut model = tiny_model();
    model.max_sequence_length = 3;
    let long = model.forward(&[1, 2, 3, 3, 3, 1]).unwrap();
    let head = model.forward(&[1, 2, 3]).unwrap();
    assert_eq!(long, head);
    let seq = TokenSequence::from_whitespace("a b c a b c");
    assert_eq!(model.encode(&seq), vec![1, 2, 3]);
}

#[test]
fn memorizes_a_small_set() {
    let tokens: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let cfg = ModelConfig {
        hidden_size: 8,
        dense1_size: 4,
        max_sequence_length: 16,
        trainable_embedding: true,
    };
    let mut model = BiLstmModel::new(&random_embeddings(&refs, 8, 3), &cfg, 4).unwrap();
    let mut rng = SplitMix64::new(21);
    let batch: Vec<(Vec<usize>, u8)> = (0..48)
        .map(|i| {
            let len = 2 + rng.below(5);
            let ids = (0..len).map(|_| 1 + rng.below(12)).collect();
            (ids, (i % 2) as u8)
        })
        .collect();
    let adam = AdamConfig {
        lr: 1e-2,
        ..Default::default()
    };
    let mut state = model.new_adam_state();
    for _ in 0..200 {
        let (_, grads) = model.loss_and_gradients(&batch).unwrap();
        model.apply_adam(&grads, &mut state, &adam);
    }
    let loss = model.batch_loss(&batch).unwrap();
    assert!(loss < 0.05, "final loss {loss}");
}

/// Two disjoint vocabularies, one per class.
pub fn separable(n: usize, seed: u64) -> (Vec<String>, Vec<(TokenSequence, u8)>) {
    let words: Vec<String> = (0..10)
        .map(|i| format!("pos{i}"))
        .chain((0..10).map(|i| format!("neg{i}")))
        .collect();
    let mut rng = SplitMix64::new(seed);
    let data = (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let offset = if label == 1 { 0 } else { 10 };
            let len = 3 + rng.below(6);
            let text: Vec<&str> = (0..len)
                .map(|_| words[offset + rng.below(10)].as_str())
                .collect();
            (TokenSequence::from_whitespace(&text.join(" ")), label)
        })
        .collect();
    (words, data)
}

fn small_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 10,
        batch_size: 16,
        adam: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        hidden_size: 8,
        dense1_size: 4,
        seed: 17,
        ..Default::default()
    }
}

fn setup(cfg: &TrainConfig) -> (BiLstmModel, Vec<(TokenSequence, u8)>) {
    let (words, data) = separable(200, 8);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let model = BiLstmModel::new(&random_embeddings(&refs, 8, 2), &cfg.model_config(), cfg.seed).unwrap();
    (model, data)
}

#[test]
fn separable_data_is_learned() {
    let cfg = small_train_config();
    let (model, data) = setup(&cfg);
    let out = train(model, &data, &cfg).unwrap();
    assert_eq!(out.test_indices.len(), 40);
    assert_eq!(out.loss_history.len(), 10);
    assert!(out.report.f1 >= 0.95, "{:?}", out.report);
    assert!(out.loss_history[9] < out.loss_history[0]);
}

#[test]
fn zero_epochs_keeps_initialisation() {
    let cfg = TrainConfig {
        epochs: 0,
        ..small_train_config()
    };
    let (model, data) = setup(&cfg);
    let out = train(model.clone(), &data, &cfg).unwrap();
    assert_eq!(out.model, model);
    assert!(out.loss_history.is_empty());
    assert_eq!(out.test_scores.len(), 40);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 80,
        ..small_train_config()
    };
    let (model, data) = setup(&cfg);
    let a = train(model.clone(), &data, &cfg).unwrap();
    let b = train(model.clone(), &data, &cfg).unwrap();
    let c = train(model, &data, &TrainConfig { threads: 3, ..cfg }).unwrap();
    assert_eq!(a.loss_history, b.loss_history);
    assert_eq!(a.model, b.model);
    assert_eq!(a.loss_history, c.loss_history);
    assert_eq!(a.model, c.model);
    assert_eq!(a.report, c.report);
}

#[test]
fn single_class_is_rejected() {
    let cfg = small_train_config();
    let (model, data) = setup(&cfg);
    let ones: Vec<_> = data.into_iter().filter(|(_, y)| *y == 1).collect();
    let err = train(model, &ones, &cfg).unwrap_err();
    assert!(err.to_string().contains("degenerate labels"));
}
