//! Repo-wide gradient inventory: every layer kind and every loss, checked
//! against central finite differences.
//!
//! Integration and acceptance tests consume this from one place so the case
//! list cannot drift between them. All instances are fixed and deterministic;
//! values are chosen to keep ReLU/clamp pre-activations away from their kinks
//! at the finite-difference step.

use std::collections::BTreeMap;

use crate::bayesian::{self, VariationalLinear, VariationalVars};
use crate::evidential::head::{self, BankVars, PrototypeBank};
use crate::nn::classify::{self, HeadVars, LinearHead};
use crate::nn::gradcheck::max_rel_error;
use crate::nn::{LayerKind, Network, ParamSet, Tensor, Var};
use crate::rng::stream;

/// Finite-difference step used across the inventory.
pub const FD_STEP: f64 = 1e-4;

/// Worst relative error per named case. Every entry must beat 1e-4.
pub fn gradient_inventory() -> Vec<(&'static str, f64)> {
    vec![
        ("dense_relu", dense_relu()),
        ("conv1d_relu", conv1d_relu()),
        ("residual_block", residual_block()),
        ("cross_entropy", cross_entropy()),
        ("evidential_loss_chain", evidential_chain(false)),
        ("elc_loss_chain", evidential_chain(true)),
        ("bayes_elbo", bayes_elbo()),
        ("backbone_to_elc_end_to_end", backbone_end_to_end()),
    ]
}

/// Registers leaves for `set` in iteration order and returns name → Var,
/// consuming vars from the shared slice.
fn leaves_from(set: &ParamSet, vars: &[Var], offset: usize) -> BTreeMap<String, Var> {
    set.names().enumerate().map(|(i, n)| (n.clone(), vars[offset + i])).collect()
}

fn set_tensors(set: &ParamSet) -> Vec<Tensor> {
    set.iter().map(|(_, p)| p.values.clone()).collect()
}

fn dense_relu() -> f64 {
    let net = Network::new(vec![(
        "d".into(),
        LayerKind::Dense { in_dim: 4, out_dim: 3, relu: true },
    )]);
    let params = net.init_params(&mut stream(101, &[]));
    let x = Tensor::from_fn(3, 4, |r, c| 0.4 * ((r * 4 + c) as f64 * 0.9).sin() + 0.2);
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&params));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&params, vars, 1);
            let y = net.forward_on_tape(tape, vars[0], &leaves);
            let sq = tape.mul(y, y);
            tape.sum_all(sq)
        },
        &inputs,
        FD_STEP,
    )
}

fn conv1d_relu() -> f64 {
    let net = Network::new(vec![(
        "c".into(),
        LayerKind::Conv1d { in_ch: 2, out_ch: 3, kernel: 3, len: 5, relu: true },
    )]);
    let params = net.init_params(&mut stream(102, &[]));
    let x = Tensor::from_fn(2, 10, |r, c| 0.5 * ((r * 10 + c) as f64 * 0.7).cos() + 0.1);
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&params));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&params, vars, 1);
            let y = net.forward_on_tape(tape, vars[0], &leaves);
            let sq = tape.mul(y, y);
            tape.sum_all(sq)
        },
        &inputs,
        FD_STEP,
    )
}

fn residual_block() -> f64 {
    // in != out so the projection path is exercised too.
    let net = Network::new(vec![(
        "r".into(),
        LayerKind::ResidualDense { in_dim: 5, hidden: 4, out_dim: 3 },
    )]);
    let params = net.init_params(&mut stream(103, &[]));
    let x = Tensor::from_fn(2, 5, |r, c| 0.6 * ((r * 5 + c) as f64 * 1.3).sin() + 0.15);
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&params));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&params, vars, 1);
            let y = net.forward_on_tape(tape, vars[0], &leaves);
            let sq = tape.mul(y, y);
            tape.sum_all(sq)
        },
        &inputs,
        FD_STEP,
    )
}

fn cross_entropy() -> f64 {
    let head = LinearHead::init(5, 3, &mut stream(104, &[]));
    let set = head.to_param_set();
    let x = Tensor::from_fn(4, 5, |r, c| ((r * 5 + c) as f64 * 0.61).sin());
    let labels = vec![0usize, 2, 1, 2];
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&set));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&set, vars, 1);
            let hv = HeadVars { w: leaves[classify::HEAD_W], b: leaves[classify::HEAD_B] };
            let logits = classify::logits_on_tape(tape, vars[0], &hv);
            classify::cross_entropy_on_tape(tape, logits, &labels)
        },
        &inputs,
        FD_STEP,
    )
}

fn bank_vars_from(set: &ParamSet, vars: &[Var], offset: usize) -> BankVars {
    let leaves = leaves_from(set, vars, offset);
    BankVars {
        prototypes: leaves[head::PROTO],
        alpha_logit: leaves[head::ALPHA_LOGIT],
        log_gamma: leaves[head::LOG_GAMMA],
        membership_logits: leaves[head::MEMBERSHIP],
    }
}

fn evidential_chain(gated: bool) -> f64 {
    let means = vec![vec![0.8, -0.2, 0.3, 0.1], vec![-0.4, 0.6, -0.1, 0.5]];
    let bank = PrototypeBank::init(&means, 2, 0.15, &mut stream(105, &[]));
    let set = bank.to_param_set();
    let x = Tensor::from_fn(3, 4, |r, c| 0.7 * ((r * 4 + c) as f64 * 0.83).cos());
    let labels = vec![0usize, 1, 0];
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&set));
    max_rel_error(
        move |tape, vars| {
            let bv = bank_vars_from(&set, vars, 1);
            let e = head::utilities_on_tape(tape, vars[0], &bv, 2, 0.9);
            if gated {
                head::elc_loss_on_tape(tape, e, &labels, 2.5)
            } else {
                head::evidential_loss_on_tape(tape, e, &labels)
            }
        },
        &inputs,
        FD_STEP,
    )
}

fn bayes_elbo() -> f64 {
    let layer = VariationalLinear::init(4, 3, 3, &mut stream(106, &[]));
    let set = layer.to_param_set();
    let eps = bayesian::sample_epsilons(4, 3, 3, 777);
    let x = Tensor::from_fn(3, 4, |r, c| ((r * 4 + c) as f64 * 0.47).sin());
    let labels = vec![1usize, 0, 2];
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&set));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&set, vars, 1);
            let vv = VariationalVars {
                w_mu: leaves[bayesian::W_MU],
                w_logsigma: leaves[bayesian::W_LOGSIGMA],
                b_mu: leaves[bayesian::B_MU],
                b_logsigma: leaves[bayesian::B_LOGSIGMA],
            };
            bayesian::bayes_loss_on_tape(tape, vars[0], &vv, &labels, &eps, 0.2)
        },
        &inputs,
        FD_STEP,
    )
}

fn backbone_end_to_end() -> f64 {
    let net = Network::new(vec![
        ("b1".into(), LayerKind::ResidualDense { in_dim: 8, hidden: 6, out_dim: 6 }),
        ("b2".into(), LayerKind::ResidualDense { in_dim: 6, hidden: 4, out_dim: 4 }),
    ]);
    let params = net.init_params(&mut stream(107, &[]));
    let means = vec![vec![0.5, 0.1, -0.3, 0.2], vec![-0.2, 0.4, 0.6, -0.1]];
    let bank = PrototypeBank::init(&means, 2, 0.1, &mut stream(108, &[]));
    let bank_set = bank.to_param_set();
    let x = Tensor::from_fn(2, 8, |r, c| 0.5 * ((r * 8 + c) as f64 * 0.59).sin() + 0.1);
    let labels = vec![0usize, 1];
    let n_backbone = params.len();
    let mut inputs = vec![x];
    inputs.extend(set_tensors(&params));
    inputs.extend(set_tensors(&bank_set));
    max_rel_error(
        move |tape, vars| {
            let leaves = leaves_from(&params, vars, 1);
            let feats = net.forward_on_tape(tape, vars[0], &leaves);
            let bv = bank_vars_from(&bank_set, vars, 1 + n_backbone);
            let e = head::utilities_on_tape(tape, feats, &bv, 2, 0.9);
            head::elc_loss_on_tape(tape, e, &labels, 1.5)
        },
        &inputs,
        FD_STEP,
    )
}
