mod common;

use ndarray::Array2;
use proptest::prelude::*;

use common::*;
use rand::Rng;
use salc::code_nn::{
    huber, huber_loss, preprocess, pretrain, reconstruct_nn, train_all, DeltaSample, Network, NnModelSet, NnParams,
    TrainParams,
};
use salc::geometry::Point2;
use salc::radio::{mp_stream, RssDatabase};
use salc::romac::ClusterModel;

proptest! {
    #[test]
    fn analytic_gradient_matches_central_differences(seed in any::<u64>()) {
        props::gradient_matches_fd(seed)?;
    }

    #[test]
    fn huber_is_continuous_at_the_threshold(gamma in 1e-3f64..100.0) {
        props::huber_continuous(gamma)?;
    }

    #[test]
    fn huber_slope_is_bounded(r in -1e3f64..1e3, gamma in 1e-3f64..100.0) {
        props::huber_derivative_bounded(r, gamma)?;
    }

    #[test]
    fn forward_matches_the_loop_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_in = r.random_range(1..6);
        let hidden: Vec<usize> = (0..r.random_range(0..4)).map(|_| r.random_range(1..8)).collect();
        let mut net = Network::init(n_in, &hidden, r.random_range(1..6), seed);
        for layer in net.layers_mut() {
            layer.b.mapv_inplace(|_| r.random_range(-1.0..1.0));
        }
        let x: Vec<f64> = (0..n_in).map(|_| r.random_range(-3.0..3.0)).collect();
        let got = net.forward(&x).unwrap();
        let want = forward_oracle(&net, &x);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn training_keeps_shapes(seed in any::<u64>()) {
        props::nn_shapes_kept(seed)?;
    }

    #[test]
    fn finetune_starts_from_the_pretrained_network(seed in any::<u64>()) {
        props::warm_start_identity(seed)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn training_is_deterministic(seed in any::<u64>(), batch in proptest::option::of(1usize..6)) {
        props::nn_training_deterministic(seed, batch)?;
    }
}

#[test]
fn huber_values() {
    assert_eq!(huber(0.5, 1.0), 0.125);
    assert_eq!(huber(-3.0, 1.0), 2.5);
    assert_eq!(huber_loss(&[1.0, 0.0], &[0.0, 3.0], 1.0), (0.5 + 2.5) / 2.0);
}

fn samples(seed: u64) -> Vec<DeltaSample> {
    let mut r = rng(seed);
    (0..12)
        .map(|_| {
            let input: Vec<f64> = (0..2).map(|_| r.random_range(-2.0..2.0)).collect();
            let target: Vec<f64> = (0..4).map(|j| input[j % 2] * 0.7 + r.random_range(-0.1..0.1)).collect();
            DeltaSample {
                averaged_target: target.clone(),
                input,
                target,
            }
        })
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let net = Network::init(2, &[6, 5], 4, 3);
    let p = TrainParams {
        eta: 0.0,
        iters: 20,
        ..TrainParams::default()
    };
    let (same, _) = pretrain(net.clone(), &samples(1), p).unwrap();
    assert_eq!(same, net);
}

#[test]
fn full_batch_loss_decreases() {
    let net = Network::init(2, &[16, 16], 4, 5);
    let p = TrainParams {
        eta: 0.05,
        iters: 300,
        ..TrainParams::default()
    };
    let (_, log) = pretrain(net, &samples(2), p).unwrap();
    assert!(log.losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "loss rose");
    assert!(log.final_loss < 0.5 * log.losses[0]);
}

#[test]
fn mini_batches_cover_each_epoch_once() {
    let net = Network::init(2, &[8], 4, 5);
    let p = TrainParams {
        eta: 0.05,
        iters: 7,
        batch_size: Some(5),
        batch_seed: 11,
        ..TrainParams::default()
    };
    let (_, log) = pretrain(net, &samples(3), p).unwrap();
    assert_eq!(log.losses.len(), 7);
}

#[test]
fn nonpositive_gamma_is_rejected() {
    let net = Network::init(2, &[4], 4, 5);
    let p = TrainParams {
        gamma: 0.0,
        ..TrainParams::default()
    };
    assert!(pretrain(net, &samples(4), p).is_err());
}

fn tiny_db() -> (RssDatabase, ClusterModel) {
    let mut r = rng(9);
    let (n_rp, n_ap, n_s) = (6, 2, 8);
    let pts: Vec<Point2> = (0..n_rp).map(|i| Point2::new(i as f64, 0.0)).collect();
    let values = (0..n_rp * n_ap * n_s).map(|_| r.random_range(-70.0..-40.0)).collect();
    let db = RssDatabase::new(pts, n_ap, (0..n_s).collect(), values).unwrap();
    (db, ClusterModel::from_assignment(vec![0, 0, 0, 3, 3, 3]).unwrap())
}

#[test]
fn preprocess_matches_drift_and_cluster_mean_oracle() {
    let (db, cm) = tiny_db();
    for l in 0..db.n_aps() {
        let s = preprocess(&db, &cm, l);
        assert_eq!(s.len(), db.n_samples() - 1);
        for (i, sample) in s.iter().enumerate() {
            let k = i + 1;
            let drift = |n: usize| db.get(n, l, k) - db.get(n, l, 0);
            assert_eq!(sample.input, vec![drift(0), drift(3)]);
            for n in 0..6 {
                assert_eq!(sample.target[n], drift(n));
                let group = if n < 3 { 0..3 } else { 3..6 };
                let mean = group.clone().map(drift).sum::<f64>() / 3.0;
                assert!((sample.averaged_target[n] - mean).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn reconstruction_adds_predicted_drift_to_the_reference() {
    let (db, cm) = tiny_db();
    let p = NnParams {
        hidden: vec![5],
        pretrain_iters: 5,
        finetune_iters: 5,
        eta: 0.01,
        ..NnParams::default()
    };
    let (models, _) = train_all(&db, &cm, &p).unwrap();
    let now = mp_stream(&db, cm.exemplars(), 4).unwrap();
    let reference = db.reference();
    let snap = reconstruct_nn(&models, &now, &reference).unwrap();
    for l in 0..db.n_aps() {
        let input: Vec<f64> = cm.exemplars().iter().map(|&m| db.get(m, l, 4) - db.get(m, l, 0)).collect();
        let drift = forward_oracle(&models.networks[l], &input);
        for n in 0..db.n_points() {
            assert!((snap.get(n, l) - (reference.get(n, l) + drift[n])).abs() < 1e-9);
        }
    }
}

#[test]
fn model_text_round_trip() {
    let (db, cm) = tiny_db();
    let p = NnParams {
        hidden: vec![4, 3],
        pretrain_iters: 3,
        finetune_iters: 3,
        eta: 0.01,
        ..NnParams::default()
    };
    let (models, _) = train_all(&db, &cm, &p).unwrap();
    let back = NnModelSet::parse(&models.to_text()).unwrap();
    assert_eq!(back, models);
}

#[test]
fn batch_loss_agrees_with_per_sample_huber() {
    let net = Network::init(2, &[5], 3, 2);
    let x = Array2::from_shape_vec((2, 2), vec![0.3, -1.0, 2.0, 0.5]).unwrap();
    let y = Array2::from_shape_vec((2, 3), vec![1.0, -2.0, 0.0, 4.0, 0.1, -0.3]).unwrap();
    let (loss, _) = net.loss_and_gradients(x.view(), y.view(), 0.8);
    let mut sum = 0.0;
    for i in 0..2 {
        let pred = forward_oracle(&net, &[x[[i, 0]], x[[i, 1]]]);
        sum += huber_loss(y.row(i).as_slice().unwrap(), &pred, 0.8);
    }
    assert!((loss - sum / 2.0).abs() < 1e-12);
}
