//! Spectral normalization and network construction checked against an SVD oracle.

use genlab_core::autodiff::Tape;
use genlab_core::nn::{init_network, Mode, NetworkParams, NetworkSpec};
use genlab_core::Tensor;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn top_singular(w: &Tensor) -> f64 {
    DMatrix::from_row_slice(w.rows(), w.cols(), w.data()).singular_values().max()
}

fn train_forward(net: &mut NetworkParams, x: &Tensor) {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    net.forward(&mut tape, xv, Mode::Train, false).unwrap();
}

#[test]
fn power_iteration_matches_svd() {
    for (seed, width) in [(1u64, 2usize), (2, 8), (3, 32)] {
        let net = init_network(&NetworkSpec::discriminator(2, width), seed).unwrap();
        for layer in &net.layers {
            let est = layer.estimate_singular(500);
            let oracle = top_singular(&layer.weight);
            assert!((est.sigma - oracle).abs() < 1e-8 * oracle, "width {width}: {} vs {oracle}", est.sigma);
        }
    }
}

#[test]
fn train_forwards_keep_u_unit_and_converge() {
    let mut net = init_network(&NetworkSpec::discriminator(2, 8), 9).unwrap();
    let x = Tensor::matrix(3, 2, vec![0.1, 0.5, -0.4, 0.2, 0.9, -0.8]).unwrap();
    for _ in 0..150 {
        train_forward(&mut net, &x);
        for layer in &net.layers {
            let norm: f64 = layer.u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12, "|u| = {norm}");
        }
    }
    for w in net.effective_weights() {
        let s = top_singular(&w);
        assert!((s - 1.0).abs() < 1e-2, "sigma_max {s}");
    }
}

#[test]
fn width_and_seed_properties() {
    let base = NetworkSpec::discriminator(2, 4);
    let mut prev = 0;
    for w in [1, 2, 4, 8, 16, 32] {
        let count = base.with_width(w).parameter_count();
        assert!(count > prev);
        let net = init_network(&base.with_width(w), 0).unwrap();
        assert_eq!(net.parameter_count(), count);
        prev = count;
    }
    let a = init_network(&base, 1).unwrap();
    let b = init_network(&base, 2).unwrap();
    assert_ne!(a.checksum(), b.checksum());
    assert_eq!(a.checksum(), init_network(&base, 1).unwrap().checksum());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// After warm-up every layer is 1-Lipschitz, so the critic is too.
    #[test]
    fn warmed_up_critic_is_lipschitz(seed in 0u64..1000, p in proptest::collection::vec(-3.0f64..3.0, 4)) {
        let mut net = init_network(&NetworkSpec::discriminator(2, 4), seed).unwrap();
        let warm = Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        for _ in 0..200 {
            train_forward(&mut net, &warm);
        }
        let x = Tensor::matrix(2, 2, p.clone()).unwrap();
        let out = net.predict(&x).unwrap();
        let dist = ((p[0] - p[2]).powi(2) + (p[1] - p[3]).powi(2)).sqrt();
        let diff = (out.data()[0] - out.data()[1]).abs();
        prop_assert!(diff <= dist * (1.0 + 1e-3) + 1e-12, "{} > {}", diff, dist);
    }

    #[test]
    fn same_seed_same_parameters(seed in any::<u64>(), width in 0u32..5) {
        let spec = NetworkSpec::generator(4, 2, 1 << width);
        let a = init_network(&spec, seed).unwrap();
        let b = init_network(&spec, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
