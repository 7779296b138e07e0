mod common;

use mdti_model::road_encoder::{
    build_sequence_inputs, encode_road, init_road_params, minute_bucket, positional_encoding,
    road_adjacency, road_gat, road_node_features, type_bias_layer, week_index, DEGREE_NORM,
    SPECIAL_TYPE,
};
use mdti_nn::layers::linear;
use mdti_nn::{gradcheck, LayerParams, Tape, Tensor};
use mdti_traj::{RoadNetwork, RoadSegment, RoadTrajectory, RoadType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_network() -> RoadNetwork {
    let types = [
        RoadType::Arterial,
        RoadType::Collector,
        RoadType::Local,
        RoadType::Ramp,
    ];
    let segments = (0..4)
        .map(|id| RoadSegment {
            id,
            polyline: vec![(0.001 * id as f64, 41.0), (0.001 * (id + 1) as f64, 41.0)],
            road_type: types[id],
            length_m: 80.0 + 10.0 * id as f64,
        })
        .collect();
    RoadNetwork {
        segments,
        edges: vec![(0, 1), (1, 0), (1, 2), (2, 3), (3, 0)],
    }
}

fn toy_traj() -> RoadTrajectory {
    RoadTrajectory {
        segments: vec![0, 1, 2],
        timestamps: vec![1_000.0, 1_030.0, 1_075.0],
    }
}

fn road_params(dims: &mdti_model::ModelDims, seed: u64) -> LayerParams {
    let mut params = LayerParams::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_road_params(&mut params, dims, 4, &mut rng);
    params
}

#[test]
fn node_features_encode_type_and_degree() {
    let net = toy_network();
    let f = road_node_features(&net);
    assert_eq!(f.shape(), [4, 7]);
    assert_eq!(f.get(3, 0), 1.0, "longest segment normalizes to 1");
    for i in 0..4 {
        let one_hot: Vec<f64> = (1..=4).map(|j| f.get(i, j)).collect();
        assert_eq!(one_hot.iter().sum::<f64>(), 1.0);
        assert_eq!(one_hot[net.segments[i].road_type.index()], 1.0);
        assert_eq!(f.get(i, 5), net.out_degree(i) as f64 / DEGREE_NORM);
        assert_eq!(f.get(i, 6), net.in_degree(i) as f64 / DEGREE_NORM);
    }
}

#[test]
fn road_adjacency_is_directed_with_self_loops() {
    let adj = road_adjacency(&toy_network());
    assert!(adj.get(0, 0) && adj.get(0, 1) && adj.get(1, 0));
    assert!(adj.get(2, 3) && !adj.get(3, 2));
}

#[test]
fn road_gat_matches_dense_oracle() {
    let dims = common::toy_dims();
    let params = road_params(&dims, 13);
    let net = toy_network();
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let out = road_gat(&tape, &bound, &dims, &net).unwrap();
    assert_eq!(out.shape(), [4, dims.d]);

    // oracle: input projection then two literal-formula GAT layers
    let feats = road_node_features(&net);
    let adj_mat = road_adjacency(&net);
    let adj: Vec<Vec<bool>> = (0..4)
        .map(|i| (0..4).map(|j| adj_mat.get(i, j)).collect())
        .collect();
    let value = |name: &str| params.get(name).unwrap().value.clone();
    let x = feats
        .matmul(&value("road.in_proj.w"))
        .add(&Tensor::from_fn(4, dims.gat_hidden, |_, j| {
            value("road.in_proj.b").get(0, j)
        }));
    let h1 = common::gat_oracle(
        &x,
        &adj,
        &value("road.gat1.w"),
        &value("road.gat1.a_src"),
        &value("road.gat1.a_dst"),
        dims.heads,
        false,
    );
    let h2 = common::gat_oracle(
        &h1,
        &adj,
        &value("road.gat2.w"),
        &value("road.gat2.a_src"),
        &value("road.gat2.a_dst"),
        dims.heads,
        true,
    );
    assert!(out.value().max_abs_diff(&h2) < 1e-6);
}

#[test]
fn calendar_indexing() {
    assert_eq!(week_index(0.0), 0);
    assert_eq!(week_index(86_400.0 * 8.0 + 5.0), 1);
    assert_eq!(minute_bucket(0.0), 0);
    assert_eq!(minute_bucket(15.0 * 60.0), 1);
    assert_eq!(minute_bucket(86_399.0), 95);
}

#[test]
fn sequence_inputs_contract() {
    let dims = common::toy_dims();
    let params = road_params(&dims, 17);
    let net = toy_network();
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let g_emb = road_gat(&tape, &bound, &dims, &net).unwrap();

    let one = RoadTrajectory {
        segments: vec![2],
        timestamps: vec![1_000.0],
    };
    let inputs =
        build_sequence_inputs(&tape, &bound, &dims, &one, &net, &g_emb, None, None).unwrap();
    assert_eq!(inputs.x.shape(), [2, dims.d]);
    assert_eq!(inputs.type_ids, vec![SPECIAL_TYPE, RoadType::Local.index()]);
    assert_eq!(inputs.pad_mask, vec![false, false]);

    // same segment, same minute, same type at two positions differ only by PE
    let twice = RoadTrajectory {
        segments: vec![2, 2],
        timestamps: vec![1_000.0, 1_010.0],
    };
    let inputs =
        build_sequence_inputs(&tape, &bound, &dims, &twice, &net, &g_emb, None, None).unwrap();
    let pe = positional_encoding(3, dims.d);
    for j in 0..dims.d {
        let diff = inputs.x.value().get(1, j) - inputs.x.value().get(2, j);
        let pe_diff = pe.get(1, j) - pe.get(2, j);
        assert!((diff - pe_diff).abs() < 1e-12);
    }

    // padding flags exactly the padded tail
    let inputs =
        build_sequence_inputs(&tape, &bound, &dims, &toy_traj(), &net, &g_emb, None, Some(6))
            .unwrap();
    assert_eq!(inputs.pad_mask, vec![false, false, false, false, true, true]);
    assert_eq!(inputs.x.shape(), [6, dims.d]);

    let bad = RoadTrajectory {
        segments: vec![9],
        timestamps: vec![0.0],
    };
    assert!(build_sequence_inputs(&tape, &bound, &dims, &bad, &net, &g_emb, None, None).is_err());
}

#[test]
fn zero_type_embeddings_reduce_to_vanilla_layer() {
    let dims = common::toy_dims();
    let params = road_params(&dims, 23);
    let net = toy_network();
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let g_emb = road_gat(&tape, &bound, &dims, &net).unwrap();
    let inputs =
        build_sequence_inputs(&tape, &bound, &dims, &toy_traj(), &net, &g_emb, None, None)
            .unwrap();
    let zero_types = tape.constant(Tensor::zeros(4, dims.d));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let with_zero_prior = type_bias_layer(
        &bound,
        &dims,
        0,
        &inputs.x,
        &zero_types,
        &inputs.pad_mask,
        false,
        &mut rng,
    )
    .unwrap();

    // vanilla reference: same layer weights, no bias
    let normed = inputs.x.layer_norm(bound.var("road.l0.ln1.g"), bound.var("road.l0.ln1.b"), 1e-5);
    let attn = mdti_nn::layers::multi_head_attention(
        &normed,
        &normed,
        &normed,
        &mdti_nn::layers::AttentionParams {
            w_q: bound.var("road.l0.attn.w_q"),
            w_k: bound.var("road.l0.attn.w_k"),
            w_v: bound.var("road.l0.attn.w_v"),
            w_o: bound.var("road.l0.attn.w_o"),
        },
        dims.heads,
        None,
        Some(&[true, true, true, true]),
    )
    .unwrap();
    let h = inputs.x.add(&attn);
    let normed2 = h.layer_norm(bound.var("road.l0.ln2.g"), bound.var("road.l0.ln2.b"), 1e-5);
    let f = mdti_nn::layers::ffn(
        &normed2,
        bound.var("road.l0.ffn.w1"),
        bound.var("road.l0.ffn.b1"),
        bound.var("road.l0.ffn.w2"),
        bound.var("road.l0.ffn.b2"),
    )
    .unwrap();
    let vanilla = h.add(&f);
    assert_eq!(
        with_zero_prior.value().as_ref(),
        vanilla.value().as_ref(),
        "zero prior must reduce to the vanilla layer exactly"
    );
}

#[test]
fn encode_road_contract_and_pad_independence() {
    let dims = common::toy_dims();
    let net = toy_network();
    let traj = toy_traj();

    let run = |pad_value: f64| {
        let mut params = road_params(&dims, 29);
        params.get_mut("road.pad").unwrap().value = Tensor::filled(1, dims.d, pad_value);
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let g_emb = road_gat(&tape, &bound, &dims, &net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_road(
            &tape, &bound, &dims, &traj, &net, &g_emb, None, Some(8), false, &mut rng,
        )
        .unwrap();
        assert_eq!(enc.r.shape(), [8, dims.d]);
        assert_eq!(&enc.pad_mask[..4], &[false; 4]);
        assert_eq!(&enc.pad_mask[4..], &[true; 4]);
        enc.r.value().as_ref().clone()
    };

    let a = run(0.0);
    let b = run(137.25);
    for i in 0..4 {
        for j in 0..dims.d {
            assert_eq!(
                a.get(i, j).to_bits(),
                b.get(i, j).to_bits(),
                "padded content leaked into row {i}"
            );
        }
    }
}

#[test]
fn cls_is_sensitive_to_real_tokens() {
    let dims = common::toy_dims();
    let params = road_params(&dims, 31);
    let net = toy_network();

    let run = |segments: Vec<usize>| {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let g_emb = road_gat(&tape, &bound, &dims, &net).unwrap();
        let traj = RoadTrajectory {
            segments,
            timestamps: vec![1_000.0, 1_030.0, 1_075.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_road(
            &tape, &bound, &dims, &traj, &net, &g_emb, None, None, false, &mut rng,
        )
        .unwrap();
        enc.r.value().row_slice(0).to_vec()
    };

    let base = run(vec![0, 1, 2]);
    let changed = run(vec![0, 3, 2]);
    let diff: f64 = base
        .iter()
        .zip(&changed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff > 1e-9, "[CLS] ignored a real token change");
}

#[test]
fn masked_slot_uses_mask_embedding_only() {
    let dims = common::toy_dims();
    let params = road_params(&dims, 37);
    let net = toy_network();
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let g_emb = road_gat(&tape, &bound, &dims, &net).unwrap();
    let inputs = build_sequence_inputs(
        &tape,
        &bound,
        &dims,
        &toy_traj(),
        &net,
        &g_emb,
        Some(&[1]),
        None,
    )
    .unwrap();
    let pe = positional_encoding(4, dims.d);
    let mask_emb = &params.get("road.mask").unwrap().value;
    for j in 0..dims.d {
        let expect = mask_emb.get(0, j) + pe.get(2, j);
        assert!((inputs.x.value().get(2, j) - expect).abs() < 1e-12);
    }
    assert_eq!(inputs.type_ids[2], SPECIAL_TYPE);
}

#[test]
fn gradcheck_encode_road_toy() {
    let dims = mdti_model::ModelDims {
        road_layers: 1,
        ..common::toy_dims()
    };
    let params = road_params(&dims, 41);
    let net = toy_network();
    let traj = toy_traj();
    let err = gradcheck(&params, 1e-4, |tape, bound| {
        let g_emb = road_gat(tape, bound, &dims, &net)
            .map_err(|e| mdti_nn::NnError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_road(
            tape, bound, &dims, &traj, &net, &g_emb, None, None, false, &mut rng,
        )
        .map_err(|e| mdti_nn::NnError::Config(e.to_string()))?;
        Ok(enc.r.sum())
    })
    .unwrap();
    assert!(err < 1e-3, "gradcheck error {err}");
}

#[test]
fn output_projection_is_rowwise() {
    // sanity anchor for the pad-independence test above: the final linear
    // layer maps rows independently
    let tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = tape.constant(mdti_nn::init::normal(&mut rng, 3, 3, 1.0));
    let x = tape.constant(mdti_nn::init::normal(&mut rng, 2, 3, 1.0));
    let full = linear(&x, &w, None).unwrap();
    let row0 = linear(&x.slice_rows(0, 1), &w, None).unwrap();
    assert_eq!(full.value().row_slice(0), row0.value().row_slice(0));
}
