mod common;

use mdti_model::objectives::{
    info_nce, init_objective_params, mask_sequence, metrics, mlm_logits, mlm_loss, tte_head,
    tte_loss, total_loss, MlmBatch, MASK_RATE, TAU_INIT,
};
use mdti_nn::{gradcheck, LayerParams, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_tau_var(tape: &std::rc::Rc<Tape>, tau: f64) -> mdti_nn::Var {
    tape.leaf(Tensor::scalar(tau.ln()))
}

#[test]
fn info_nce_single_pair_is_zero() {
    let tape = Tape::new();
    let g = tape.constant(Tensor::row(&[1.0, 0.0, 0.0]));
    let r = tape.constant(Tensor::row(&[1.0, 0.0, 0.0]));
    let lt = log_tau_var(&tape, TAU_INIT);
    let loss = info_nce(&g, &r, &lt).unwrap();
    assert!(loss.value().item().abs() < 1e-12);
}

#[test]
fn info_nce_orthonormal_pair_closed_form() {
    let tape = Tape::new();
    let rows = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let g = tape.constant(rows.clone());
    let r = tape.constant(rows);
    let lt = log_tau_var(&tape, 1.0);
    let loss = info_nce(&g, &r, &lt).unwrap().value().item();
    let expect = (1.0 + (-1.0f64).exp()).ln();
    assert!((loss - expect).abs() < 1e-12);
    assert!((loss - 0.31326).abs() < 1e-5);
}

#[test]
fn info_nce_is_symmetric_in_modalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tape = Tape::new();
    let g = tape.constant(mdti_nn::init::normal(&mut rng, 4, 6, 1.0));
    let r = tape.constant(mdti_nn::init::normal(&mut rng, 4, 6, 1.0));
    let lt = log_tau_var(&tape, TAU_INIT);
    let a = info_nce(&g, &r, &lt).unwrap().value().item();
    let b = info_nce(&r, &g, &lt).unwrap().value().item();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn info_nce_invariant_under_common_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = mdti_nn::init::normal(&mut rng, 3, 4, 1.0);
    let r = mdti_nn::init::normal(&mut rng, 3, 4, 1.0);
    // orthogonal: Givens rotations in planes (0,1) and (2,3)
    let (c1, s1) = (0.6f64, 0.8f64);
    let (c2, s2) = ((0.3f64).cos(), (0.3f64).sin());
    let q = Tensor::from_rows(&[
        vec![c1, s1, 0.0, 0.0],
        vec![-s1, c1, 0.0, 0.0],
        vec![0.0, 0.0, c2, s2],
        vec![0.0, 0.0, -s2, c2],
    ]);
    let run = |g: &Tensor, r: &Tensor| {
        let tape = Tape::new();
        let gv = tape.constant(g.clone());
        let rv = tape.constant(r.clone());
        let lt = log_tau_var(&tape, TAU_INIT);
        info_nce(&gv, &rv, &lt).unwrap().value().item()
    };
    let base = run(&g, &r);
    let rotated = run(&g.matmul(&q), &r.matmul(&q));
    assert!((base - rotated).abs() < 1e-9);
}

#[test]
fn info_nce_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let tape = Tape::new();
        let n = rng.gen_range(1..5);
        let g = tape.constant(mdti_nn::init::normal(&mut rng, n, 3, 1.0));
        let r = tape.constant(mdti_nn::init::normal(&mut rng, n, 3, 1.0));
        let lt = log_tau_var(&tape, TAU_INIT);
        assert!(info_nce(&g, &r, &lt).unwrap().value().item() >= -1e-12);
    }
}

#[test]
fn mask_rate_concentrates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let segments: Vec<usize> = (0..200_000).map(|i| i % 50).collect();
    let batch = mask_sequence(&segments, MASK_RATE, &mut rng).unwrap();
    let rate = batch.positions.len() as f64 / segments.len() as f64;
    assert!((0.14..=0.16).contains(&rate), "rate {rate}");
    for (&p, &t) in batch.positions.iter().zip(&batch.targets) {
        assert!(p < segments.len());
        assert_eq!(t, segments[p]);
    }
}

#[test]
fn force_mask_rule_and_exclusions() {
    for seed in 0..1_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segments = vec![7usize, 8, 9];
        let batch = mask_sequence(&segments, 0.0, &mut rng).unwrap();
        assert_eq!(batch.positions.len(), 1, "rate 0 force-masks exactly one");
        // positions index real tokens only, so [CLS]/[PAD] can never appear
        assert!(batch.positions[0] < segments.len());

        let batch = mask_sequence(&segments, MASK_RATE, &mut rng).unwrap();
        assert!(!batch.positions.is_empty());
        assert!(batch.positions.iter().all(|&p| p < segments.len()));
    }
}

#[test]
fn mlm_uniform_logits_give_ln_v() {
    let tape = Tape::new();
    for v in [3usize, 17, 60] {
        let logits = tape.constant(Tensor::filled(4, v, 0.123));
        let batch = MlmBatch {
            positions: vec![0, 2],
            targets: vec![1, v - 1],
        };
        let loss = mlm_loss(&logits, &batch).unwrap().value().item();
        assert!((loss - (v as f64).ln()).abs() < 1e-9);
    }
}

#[test]
fn mlm_closed_form_v3() {
    let tape = Tape::new();
    let logits = tape.constant(Tensor::row(&[1.0, 0.0, 0.0]));
    let batch = MlmBatch {
        positions: vec![0],
        targets: vec![0],
    };
    let loss = mlm_loss(&logits, &batch).unwrap().value().item();
    let expect = -(1f64.exp() / (1f64.exp() + 2.0)).ln();
    assert!((loss - expect).abs() < 1e-12);
    assert!((loss - 0.55145).abs() < 1e-5);
}

#[test]
fn mlm_saturated_logits_approach_zero() {
    let tape = Tape::new();
    let logits = tape.constant(Tensor::from_fn(1, 4, |_, j| if j == 2 { 50.0 } else { 0.0 }));
    let batch = MlmBatch {
        positions: vec![0],
        targets: vec![2],
    };
    assert!(mlm_loss(&logits, &batch).unwrap().value().item() < 1e-9);
}

#[test]
fn mlm_monotone_in_correct_logit() {
    let mut last = f64::INFINITY;
    for step in 0..8 {
        let tape = Tape::new();
        let logits = tape.constant(Tensor::from_fn(1, 5, |_, j| {
            if j == 1 {
                step as f64 * 0.5
            } else {
                0.2
            }
        }));
        let batch = MlmBatch {
            positions: vec![0],
            targets: vec![1],
        };
        let loss = mlm_loss(&logits, &batch).unwrap().value().item();
        assert!(loss < last);
        last = loss;
    }
}

#[test]
fn mlm_rejects_empty_mask() {
    let tape = Tape::new();
    let logits = tape.constant(Tensor::zeros(2, 3));
    let batch = MlmBatch {
        positions: vec![],
        targets: vec![],
    };
    assert!(mlm_loss(&logits, &batch).is_err());
}

#[test]
fn total_loss_arithmetic_and_ablation_weights() {
    let tape = Tape::new();
    let cl = tape.constant(Tensor::scalar(0.5));
    let mlm = tape.constant(Tensor::scalar(0.3));
    assert!((total_loss(&cl, &mlm, (1.0, 1.0)).value().item() - 0.8).abs() < 1e-15);
    assert!((total_loss(&cl, &mlm, (1.0, 0.0)).value().item() - 0.5).abs() < 1e-15);
    assert!((total_loss(&cl, &mlm, (0.0, 1.0)).value().item() - 0.3).abs() < 1e-15);
}

#[test]
fn total_loss_gradient_is_additive() {
    let tape = Tape::new();
    let a = tape.leaf(Tensor::scalar(0.7));
    let b = tape.leaf(Tensor::scalar(1.2));
    let l = total_loss(&a.mul(&a), &b.mul(&b), (2.0, 3.0));
    let grads = l.backward();
    assert!((grads.get(&a).unwrap().item() - 2.0 * 2.0 * 0.7).abs() < 1e-12);
    assert!((grads.get(&b).unwrap().item() - 3.0 * 2.0 * 1.2).abs() < 1e-12);
}

#[test]
fn tte_head_positive_and_zero_loss_at_label() {
    let dims = common::toy_dims();
    let mut params = LayerParams::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    init_objective_params(&mut params, &dims, 11, &mut rng);
    let tape = Tape::new();
    let bound = params.bind(&tape);
    for seed in 0..10 {
        let cls = tape.constant(mdti_nn::init::normal(
            &mut ChaCha8Rng::seed_from_u64(seed),
            1,
            dims.d,
            2.0,
        ));
        let pred = tte_head(&bound, &cls).unwrap();
        let p = pred.value().item();
        assert!(p > 0.0, "softplus output must be positive");
        assert!(tte_loss(&pred, p).value().item().abs() < 1e-15);
        assert!((tte_loss(&pred, p + 2.5).value().item() - 2.5).abs() < 1e-12);
    }
}

#[test]
fn gradcheck_tte_head() {
    let dims = common::toy_dims();
    let mut params = LayerParams::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    init_objective_params(&mut params, &dims, 5, &mut rng);
    let cls = mdti_nn::init::normal(&mut rng, 1, dims.d, 1.0);
    let err = gradcheck(&params, 1e-5, |tape, bound| {
        let c = tape.constant(cls.clone());
        let pred = tte_head(bound, &c).map_err(|e| mdti_nn::NnError::Config(e.to_string()))?;
        Ok(tte_loss(&pred, 3.0))
    })
    .unwrap();
    assert!(err < 1e-4, "gradcheck error {err}");
}

#[test]
fn mlm_head_shapes_logits() {
    let dims = common::toy_dims();
    let mut params = LayerParams::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    init_objective_params(&mut params, &dims, 13, &mut rng);
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let states = tape.constant(mdti_nn::init::normal(&mut rng, 3, dims.d, 1.0));
    let logits = mlm_logits(&bound, &states).unwrap();
    assert_eq!(logits.shape(), [3, 13]);
}

#[test]
fn metrics_oracles() {
    let m = metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    assert_eq!((m.mae, m.rmse, m.mape), (0.0, 0.0, 0.0));

    let m = metrics(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
    assert!((m.mae - 1.5).abs() < 1e-12);
    assert!((m.rmse - 2.5f64.sqrt()).abs() < 1e-12);
    assert!((m.rmse - 1.58114).abs() < 1e-5);
    assert!((m.mape - 1.0).abs() < 1e-12);

    // joint permutation invariance
    let a = metrics(&[2.0, 4.0, 5.0], &[1.0, 2.0, 10.0]).unwrap();
    let b = metrics(&[5.0, 2.0, 4.0], &[10.0, 1.0, 2.0]).unwrap();
    assert_eq!(a, b);

    assert!(metrics(&[1.0], &[0.0]).is_err());
    assert!(metrics(&[], &[]).is_err());
    assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
}
