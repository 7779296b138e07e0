use mdti_nn::layers::{
    ffn, gat_layer, linear, masked_softmax, multi_head_attention, AttentionParams, AttnBias,
    GatParams, HeadMerge,
};
use mdti_nn::{BoolMat, NnError, Tape, Tensor, Var};
use proptest::prelude::*;

fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::new(rows, cols, data.to_vec()).unwrap()
}

#[test]
fn linear_identity() {
    let tape = Tape::new();
    let x = tape.constant(t(1, 2, &[1.0, 2.0]));
    let w = tape.constant(t(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let y = linear(&x, &w, None).unwrap();
    assert_eq!(y.value().data(), &[1.0, 2.0]);
}

#[test]
fn linear_zero_input_yields_bias() {
    let tape = Tape::new();
    let x = tape.constant(t(1, 2, &[0.0, 0.0]));
    let w = tape.constant(t(2, 2, &[5.0, -1.0, 2.0, 7.0]));
    let b = tape.constant(t(1, 2, &[3.0, 4.0]));
    let y = linear(&x, &w, Some(&b)).unwrap();
    assert_eq!(y.value().data(), &[3.0, 4.0]);
}

#[test]
fn linear_hand_arithmetic() {
    // 1*2 + 1*3 + 1 = 6
    let tape = Tape::new();
    let x = tape.constant(t(1, 2, &[1.0, 1.0]));
    let w = tape.constant(t(2, 1, &[2.0, 3.0]));
    let b = tape.constant(t(1, 1, &[1.0]));
    let y = linear(&x, &w, Some(&b)).unwrap();
    assert!((y.value().item() - 6.0).abs() < 1e-12);
}

#[test]
fn linear_shape_error_names_both_shapes() {
    let tape = Tape::new();
    let x = tape.constant(t(1, 3, &[0.0; 3]));
    let w = tape.constant(t(2, 2, &[0.0; 4]));
    let err = linear(&x, &w, None).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
}

#[test]
fn softmax_symmetry_and_single_key() {
    let tape = Tape::new();
    let s = tape.constant(t(1, 2, &[0.0, 0.0]));
    let y = masked_softmax(&s, None).unwrap();
    assert_eq!(y.value().data(), &[0.5, 0.5]);

    let s1 = tape.constant(t(1, 1, &[-3.7]));
    let y1 = masked_softmax(&s1, None).unwrap();
    assert_eq!(y1.value().data(), &[1.0]);
}

#[test]
fn softmax_closed_form() {
    let tape = Tape::new();
    let s = tape.constant(t(1, 2, &[1.0, 0.0]));
    let y = masked_softmax(&s, None).unwrap();
    let e = std::f64::consts::E;
    assert!((y.value().get(0, 0) - e / (e + 1.0)).abs() < 1e-12);
    assert!((y.value().get(0, 1) - 1.0 / (e + 1.0)).abs() < 1e-12);
}

#[test]
fn softmax_masked_positions_exactly_zero() {
    let tape = Tape::new();
    let s = tape.constant(t(1, 3, &[5.0, 1.0, 2.0]));
    let mask = BoolMat::from_key_mask(1, &[false, true, true]);
    let y = masked_softmax(&s, Some(&mask)).unwrap();
    assert_eq!(y.value().get(0, 0), 0.0);
    let sum: f64 = y.value().data().iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn softmax_fully_masked_row_errors() {
    let tape = Tape::new();
    let s = tape.constant(t(1, 2, &[0.0, 0.0]));
    let mask = BoolMat::from_key_mask(1, &[false, false]);
    match masked_softmax(&s, Some(&mask)) {
        Err(NnError::FullyMasked(0)) => {}
        other => panic!("expected FullyMasked, got {other:?}"),
    }
}

fn attn_params(tape: &std::rc::Rc<Tape>, d: usize) -> (Var, Var, Var, Var) {
    let eye = Tensor::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 });
    (
        tape.constant(eye.clone()),
        tape.constant(eye.clone()),
        tape.constant(eye.clone()),
        tape.constant(eye),
    )
}

#[test]
fn attention_single_key_forces_value() {
    let tape = Tape::new();
    let d = 4;
    let (wq, wk, wv, wo) = attn_params(&tape, d);
    let p = AttentionParams {
        w_q: &wq,
        w_k: &wk,
        w_v: &wv,
        w_o: &wo,
    };
    let q = tape.constant(t(3, 4, &[0.3; 12]));
    let k = tape.constant(t(1, 4, &[1.0, -2.0, 0.5, 0.0]));
    let v = tape.constant(t(1, 4, &[9.0, 8.0, 7.0, 6.0]));
    let y = multi_head_attention(&q, &k, &v, &p, 2, None, None).unwrap();
    for i in 0..3 {
        assert_eq!(y.value().row_slice(i), &[9.0, 8.0, 7.0, 6.0]);
    }
}

#[test]
fn attention_zero_scores_uniform() {
    let tape = Tape::new();
    let d = 4;
    let (wq, wk, wv, wo) = attn_params(&tape, d);
    let p = AttentionParams {
        w_q: &wq,
        w_k: &wk,
        w_v: &wv,
        w_o: &wo,
    };
    let q = tape.constant(Tensor::zeros(2, d));
    let k = tape.constant(Tensor::zeros(3, d));
    let v = tape.constant(t(3, 4, &[3.0, 0.0, 0.0, 0.0, 6.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0]));
    let bias = tape.constant(Tensor::zeros(2, 3));
    let b = AttnBias::Shared(&bias);
    let y = multi_head_attention(&q, &k, &v, &p, 2, Some(&b), None).unwrap();
    // uniform attention over 3 value rows -> mean
    assert!((y.value().get(0, 0) - 6.0).abs() < 1e-12);
}

#[test]
fn attention_large_negative_bias_saturates() {
    let tape = Tape::new();
    let d = 4;
    let (wq, wk, wv, wo) = attn_params(&tape, d);
    let p = AttentionParams {
        w_q: &wq,
        w_k: &wk,
        w_v: &wv,
        w_o: &wo,
    };
    let q = tape.constant(Tensor::zeros(1, d));
    let k = tape.constant(Tensor::zeros(2, d));
    let v = tape.constant(t(2, 4, &[1.0, 2.0, 3.0, 4.0, -5.0, -6.0, -7.0, -8.0]));
    let bias = tape.constant(t(1, 2, &[0.0, -1e9]));
    let b = AttnBias::Shared(&bias);
    let y = multi_head_attention(&q, &k, &v, &p, 2, Some(&b), None).unwrap();
    // Explicit softmax oracle: weights ~ [1, 0] -> output = first value row.
    let out = y.value();
    for (a, e) in out.data().iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((a - e).abs() < 1e-9, "{a} vs {e}");
    }
}

#[test]
fn attention_rejects_bad_head_count() {
    let tape = Tape::new();
    let (wq, wk, wv, wo) = attn_params(&tape, 4);
    let p = AttentionParams {
        w_q: &wq,
        w_k: &wk,
        w_v: &wv,
        w_o: &wo,
    };
    let q = tape.constant(Tensor::zeros(1, 4));
    let err = multi_head_attention(&q, &q, &q, &p, 3, None, None).unwrap_err();
    assert!(matches!(err, NnError::Config(_)));
}

#[test]
fn gat_isolated_node_is_self_only() {
    let tape = Tape::new();
    let h = tape.constant(t(1, 2, &[1.0, -2.0]));
    let w = tape.constant(t(2, 2, &[0.5, 1.0, -1.0, 0.25]));
    let a_src = tape.constant(t(1, 2, &[0.3, -0.2]));
    let a_dst = tape.constant(t(1, 2, &[0.1, 0.4]));
    let adj = BoolMat::new(1, 1, true);
    let p = GatParams {
        w: &w,
        a_src: &a_src,
        a_dst: &a_dst,
    };
    let y = gat_layer(&h, &adj, &p, 1, HeadMerge::Average).unwrap();
    // alpha_ii = 1 -> output = ELU(W h)
    let wh: [f64; 2] = [1.0 * 0.5 + -2.0 * -1.0, 1.0 * 1.0 + -2.0 * 0.25];
    for (o, e) in y.value().data().iter().zip(wh) {
        let elu = if e > 0.0 { e } else { e.exp() - 1.0 };
        assert!((o - elu).abs() < 1e-12);
    }
}

#[test]
fn gat_symmetric_pair_attends_half() {
    // two nodes, identical features, mutual edges: attention must be 0.5/0.5,
    // so both outputs are identical.
    let tape = Tape::new();
    let h = tape.constant(t(2, 2, &[0.7, -0.3, 0.7, -0.3]));
    let w = tape.constant(t(2, 2, &[1.0, 0.2, -0.4, 0.9]));
    let a_src = tape.constant(t(1, 2, &[0.5, -0.1]));
    let a_dst = tape.constant(t(1, 2, &[0.2, 0.3]));
    let adj = BoolMat::new(2, 2, true);
    let p = GatParams {
        w: &w,
        a_src: &a_src,
        a_dst: &a_dst,
    };
    let y = gat_layer(&h, &adj, &p, 1, HeadMerge::Average).unwrap();
    assert_eq!(y.value().row_slice(0), y.value().row_slice(1));
}

#[test]
fn gat_missing_self_loop_rejected() {
    let tape = Tape::new();
    let h = tape.constant(Tensor::zeros(2, 2));
    let w = tape.constant(Tensor::zeros(2, 2));
    let a = tape.constant(Tensor::zeros(1, 2));
    let mut adj = BoolMat::new(2, 2, true);
    adj.set(1, 1, false);
    let p = GatParams {
        w: &w,
        a_src: &a,
        a_dst: &a,
    };
    assert!(gat_layer(&h, &adj, &p, 1, HeadMerge::Average).is_err());
}

#[test]
fn ffn_shape_contract() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::zeros(3, 4));
    let w1 = tape.constant(Tensor::zeros(4, 8));
    let b1 = tape.constant(Tensor::zeros(1, 8));
    let w2 = tape.constant(Tensor::zeros(8, 4));
    let b2 = tape.constant(Tensor::zeros(1, 4));
    let y = ffn(&x, &w1, &b1, &w2, &b2).unwrap();
    assert_eq!(y.shape(), [3, 4]);
}

#[test]
fn forward_is_pure() {
    let run = || {
        let tape = Tape::new();
        let x = tape.constant(t(2, 2, &[0.1, 0.2, 0.3, 0.4]));
        let w = tape.constant(t(2, 2, &[1.5, -0.5, 0.25, 2.0]));
        let y = linear(&x, &w, None).unwrap().elu().sum();
        y.value().item()
    };
    assert_eq!(run().to_bits(), run().to_bits());
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..8, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scores = Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-5.0..5.0));
        // random mask with at least one valid entry per row
        let mut mask = BoolMat::from_fn(rows, cols, |_, _| rng.gen_bool(0.6));
        for i in 0..rows {
            if mask.row_count_true(i) == 0 {
                mask.set(i, rng.gen_range(0..cols), true);
            }
        }
        let tape = Tape::new();
        let s = tape.constant(scores);
        let y = masked_softmax(&s, Some(&mask)).unwrap();
        for i in 0..rows {
            let sum: f64 = y.value().row_slice(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            for j in 0..cols {
                if !mask.get(i, j) {
                    prop_assert_eq!(y.value().get(i, j), 0.0);
                }
            }
        }
    }
}
