use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabdisent::model::{Ablation, Detector, Hyperparameters, ModelConfig};
use tabdisent::numerics::{grad_check, AdamSettings, AdamState, Tape, Tensor};
use tabdisent::Error;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Random values with magnitude at least `gap`, so kinks are never crossed.
fn away_from_zero(shape: &[usize], gap: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn matmul_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (a, b) in [([3, 4], [4, 5]), ([1, 1], [1, 1])] {
        let target = random(&[a[0], b[1]], &mut rng);
        let err = grad_check(
            |tape, v| v[0].matmul(v[1])?.mse(tape.constant(target.clone())),
            &[random(&a, &mut rng), random(&b, &mut rng)],
        )
        .unwrap();
        assert!(err <= 1e-5, "{err}");
    }
    let err = grad_check(
        |_, v| v[0].matmul(v[1])?.sum(),
        &[random(&[2, 3, 4], &mut rng), random(&[2, 4, 2], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
    let err = grad_check(
        |_, v| {
            v[0].matmul_transposed(v[1])?
                .softmax_rows()?
                .mse(v[0].matmul_transposed(v[0])?)
        },
        &[random(&[2, 3, 4], &mut rng), random(&[2, 3, 4], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn softmax_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let target = random(&[3, 4], &mut rng);
    let err = grad_check(
        |tape, v| v[0].softmax_rows()?.mse(tape.constant(target.clone())),
        &[random(&[3, 4], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn leaky_relu_gradient_away_from_kink() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = random(&[5, 6], &mut rng);
    let err = grad_check(
        |tape, v| v[0].leaky_relu(0.01)?.mse(tape.constant(target.clone())),
        &[away_from_zero(&[5, 6], 1e-3, &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn linear_gradient_all_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let target = random(&[2, 3, 2], &mut rng);
    let err = grad_check(
        |tape, v| v[0].linear(v[1], v[2])?.mse(tape.constant(target.clone())),
        &[
            random(&[2, 3, 4], &mut rng),
            random(&[4, 2], &mut rng),
            random(&[2], &mut rng),
        ],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn mse_and_cosine_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let err = grad_check(
        |_, v| v[0].mse(v[1]),
        &[random(&[4, 3], &mut rng), random(&[4, 3], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
    let err = grad_check(
        |_, v| v[0].cosine_sim(v[1]),
        &[random(&[3, 3], &mut rng), random(&[3, 3], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
    let err = grad_check(
        |_, v| v[0].batch_cosine_mean(v[1]),
        &[random(&[4, 3, 3], &mut rng), random(&[4, 3, 3], &mut rng)],
    )
    .unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn composite_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y = random(&[3, 2], &mut rng);
    let err = grad_check(
        |tape, v| {
            v[0].softmax_rows()?
                .linear(v[1], v[2])?
                .mse(tape.constant(y.clone()))
        },
        &[
            random(&[3, 4], &mut rng),
            random(&[4, 2], &mut rng),
            random(&[2], &mut rng),
        ],
    )
    .unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn sum_gradient_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let err = grad_check(|_, v| v[0].sum(), &[random(&[3, 5], &mut rng)]).unwrap();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn forward_examples() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::new(&[1, 3], vec![0.0, 0.0, 0.0]).unwrap());
    for p in x.softmax_rows().unwrap().value().data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
    for c in [-3.0, 0.0, 50.0] {
        let x = tape.constant(Tensor::new(&[1, 2], vec![c, c + 2f64.ln()]).unwrap());
        let s = x.softmax_rows().unwrap().value();
        assert!((s.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }
    let x = tape.constant(Tensor::new(&[2], vec![2.0, -1.0]).unwrap());
    assert_eq!(x.leaky_relu(0.01).unwrap().value().data(), &[2.0, -0.01]);

    let a = tape.constant(Tensor::new(&[2], vec![0.0, 0.0]).unwrap());
    let b = tape.constant(Tensor::new(&[2], vec![1.0, 3.0]).unwrap());
    assert_eq!(a.mse(b).unwrap().item(), 5.0);
    let e1 = tape.constant(Tensor::new(&[2], vec![1.0, 0.0]).unwrap());
    let e2 = tape.constant(Tensor::new(&[2], vec![0.0, 1.0]).unwrap());
    assert_eq!(e1.cosine_sim(e2).unwrap().item(), 0.0);
    assert!((b.cosine_sim(b).unwrap().item() - 1.0).abs() < 1e-15);
    assert!(matches!(a.cosine_sim(b), Err(Error::Degenerate(_))));

    let x = tape.constant(Tensor::new(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap());
    let zero_w = tape.constant(Tensor::zeros(&[3, 2]));
    let bias = tape.constant(Tensor::new(&[2], vec![0.5, -1.0]).unwrap());
    assert_eq!(
        x.linear(zero_w, bias).unwrap().value().data(),
        &[0.5, -1.0, 0.5, -1.0]
    );
    let eye = tape.constant(Tensor::eye(3));
    let zb = tape.constant(Tensor::zeros(&[3]));
    assert_eq!(x.linear(eye, zb).unwrap().value(), x.value());
    assert!(x.matmul(x).is_err());
    assert!(x.mse(b).is_err());
}

fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a.data()[i * k + p] * b.data()[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |d| Tensor::new(&[rows, cols], d).unwrap())
}

fn matmul_case() -> impl Strategy<Value = (Tensor, Tensor)> {
    (1usize..=8, 1usize..=8, 1usize..=8).prop_flat_map(|(m, k, n)| (matrix(m, k), matrix(k, n)))
}

proptest! {
    #[test]
    fn matmul_matches_naive_exactly((a, b) in matmul_case()) {
        let tape = Tape::new();
        let got = tape.constant(a.clone()).matmul(tape.constant(b.clone())).unwrap().value();
        let expected = naive_matmul(&a, &b);
        prop_assert_eq!(got.data(), expected.as_slice());
    }

    #[test]
    fn softmax_rows_are_distributions(x in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c))) {
        let tape = Tape::new();
        let s = tape.constant(x).softmax_rows().unwrap().value();
        for row in s.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(row.iter().all(|&p| p > 0.0 && p < 1.0 || row.len() == 1));
        }
    }

    #[test]
    fn cosine_ranges(
        (a, b) in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)))
    ) {
        let tape = Tape::new();
        let (va, vb) = (tape.constant(a), tape.constant(b));
        if let Ok(c) = va.cosine_sim(vb) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c.item()));
        }
        let c = va.softmax_rows().unwrap().cosine_sim(vb.softmax_rows().unwrap()).unwrap().item();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
    }
}

#[test]
fn adam_examples() {
    let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
    let mut adam = AdamState::new(AdamSettings::with_learning_rate(0.1));
    adam.update(&mut [&mut w], &mut [Some(vec![1.0])]).unwrap();
    assert!((w.data()[0] + 0.1).abs() < 1e-6);

    let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
    let mut adam = AdamState::new(AdamSettings::with_learning_rate(0.1));
    for _ in 0..500 {
        let g = 2.0 * (w.data()[0] - 3.0);
        adam.update(&mut [&mut w], &mut [Some(vec![g])]).unwrap();
    }
    assert!((w.data()[0] - 3.0).abs() < 1e-2, "{}", w.data()[0]);

    let mut p = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
    let before = p.clone();
    let mut adam = AdamState::new(AdamSettings::default());
    adam.update(&mut [&mut p], &mut [Some(vec![0.0; 3])])
        .unwrap();
    assert_eq!(p, before);
    assert_eq!(adam.step_count(), 1);
    assert!(adam.update(&mut [&mut p], &mut [None]).is_err());
}

/// Relative error with the same magnitude floor the library uses, written
/// out independently.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn toy_detector(ablation: Ablation, heads: usize) -> (Detector, Tensor) {
    let hyper = Hyperparameters {
        latent_channels: 8,
        num_heads: heads,
        ablation,
        ..Default::default()
    };
    let det = Detector::new(ModelConfig::new(4, 1, 11, hyper)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    (det, random(&[3, 4, 1], &mut rng))
}

/// Finite differences of the full training objective over every parameter.
fn full_loss_error(det: &Detector, x: &Tensor) -> f64 {
    let (_, grads) = det.gradients(x).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = det.clone();
    let count = det.params.tensors().len();
    for (t, analytic) in grads.iter().enumerate().take(count) {
        let analytic = analytic.as_ref().unwrap();
        for (i, &g) in analytic.iter().enumerate() {
            let orig = probe.params.tensors()[t].data()[i];
            probe.params.tensors_mut()[t].data_mut()[i] = orig + h;
            let up = probe.forward_batch(x).unwrap().loss_overall;
            probe.params.tensors_mut()[t].data_mut()[i] = orig - h;
            let down = probe.forward_batch(x).unwrap().loss_overall;
            probe.params.tensors_mut()[t].data_mut()[i] = orig;
            worst = worst.max(rel(g, (up - down) / (2.0 * h)));
        }
    }
    worst
}

#[test]
fn full_objective_gradients_match_finite_differences() {
    for (ablation, heads) in [
        (Ablation::Full, 2),
        (Ablation::Full, 3),
        (Ablation::NoDisentangle, 2),
        (Ablation::OneHeadOneSubset, 1),
        (Ablation::ComplementMask, 1),
    ] {
        let (det, x) = toy_detector(ablation, heads);
        let err = full_loss_error(&det, &x);
        assert!(err <= 1e-4, "{ablation:?}: {err}");
    }
}
