//! Every layer kind and every loss against central finite differences, plus
//! the closed-form dense backward.

use std::time::Instant;

use radlab_core::nn::{LayerKind, MaskableParam, Network, ParamSet, Tape, Tensor};
use radlab_core::rng::stream;
use radlab_core::verify::gradient_inventory;

#[test]
fn inventory_beats_tolerance_within_budget() {
    let started = Instant::now();
    let results = gradient_inventory();
    assert!(!results.is_empty());
    for (name, err) in &results {
        println!("gradcheck {name}: max relative error {err:.3e}");
        assert!(*err < 1e-4, "{name} gradient error {err:.3e} >= 1e-4");
    }
    let elapsed = started.elapsed();
    println!("inventory completed in {elapsed:?}");
    assert!(elapsed.as_secs() < 60, "gradient suite took {elapsed:?}");
}

#[test]
fn dense_backward_matches_closed_form() {
    // Squared error through one linear layer: dL/dW = 2 xᵀ(xW + b − y).
    let net = Network::new(vec![(
        "d".into(),
        LayerKind::Dense { in_dim: 3, out_dim: 2, relu: false },
    )]);
    let params = net.init_params(&mut stream(31, &[]));
    let x = Tensor::from_fn(4, 3, |r, c| ((r * 3 + c) as f64 * 0.71).sin());
    let target = Tensor::from_fn(4, 2, |r, c| 0.2 * (r as f64) - 0.1 * (c as f64));

    let mut tape = Tape::new();
    let leaves = params.register_leaves(&mut tape);
    let xv = tape.constant(x.clone());
    let yv = tape.constant(target.clone());
    let out = net.forward_on_tape(&mut tape, xv, &leaves);
    let d = tape.sub(out, yv);
    let sq = tape.mul(d, d);
    let loss = tape.sum_all(sq);
    let grads = tape.backward(loss);

    let w = &params.get("d.w").unwrap().values;
    let b = &params.get("d.b").unwrap().values;
    let pred = x.matmul(w);
    let delta = Tensor::from_fn(4, 2, |r, c| 2.0 * (pred.get(r, c) + b.get(0, c) - target.get(r, c)));
    let want_w = x.matmul_tn(&delta); // xᵀδ
    let got_w = grads.get(leaves["d.w"]).expect("dense weight gradient");
    for i in 0..want_w.len() {
        let (a, n) = (got_w.data()[i], want_w.data()[i]);
        assert!((a - n).abs() <= 1e-12 * a.abs().max(n.abs()).max(1.0), "xᵀδ mismatch at {i}");
    }
    let got_b = grads.get(leaves["d.b"]).expect("dense bias gradient");
    for c in 0..2 {
        let want: f64 = (0..4).map(|r| delta.get(r, c)).sum();
        assert!((got_b.get(0, c) - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn frozen_entries_receive_zero_masked_gradient() {
    // An all-frozen parameter set yields all-zero gradients after masking.
    let mut set = ParamSet::new();
    let mut p = MaskableParam::new("w", Tensor::from_fn(2, 2, |r, c| (r + c) as f64 + 0.5));
    p.set_frozen(Tensor::filled(2, 2, 1.0));
    set.insert(p);
    let mut tape = Tape::new();
    let leaves = set.register_leaves(&mut tape);
    let sq = tape.mul(leaves["w"], leaves["w"]);
    let loss = tape.sum_all(sq);
    let grads = tape.backward(loss);
    let masked = radlab_core::nn::params::masked_grads(&set, &leaves, &grads);
    assert!(masked["w"].data().iter().all(|&g| g == 0.0));
}
