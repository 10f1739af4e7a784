//! Plain linear softmax head: the ST baseline, the LPS task head, and the
//! warm-up head used before prototype initialization.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{MaskableParam, ParamSet, Tape, Tensor, Var};

pub const HEAD_W: &str = "head.w";
pub const HEAD_B: &str = "head.b";

/// Softmax probabilities are floored here before logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LinearHead {
    /// [F, M].
    pub w: Tensor,
    /// [1, M].
    pub b: Tensor,
}

impl LinearHead {
    /// Xavier-scaled weights, zero biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let scale = (in_dim as f64).sqrt().recip();
        Self {
            w: Tensor::from_fn(in_dim, out_dim, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                scale * z
            }),
            b: Tensor::zeros(1, out_dim),
        }
    }

    pub fn to_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.insert(MaskableParam::new(HEAD_W, self.w.clone()));
        set.insert(MaskableParam::new(HEAD_B, self.b.clone()));
        set
    }

    pub fn from_param_set(set: &ParamSet) -> Self {
        Self {
            w: set.get(HEAD_W).expect("head.w").values.clone(),
            b: set.get(HEAD_B).expect("head.b").values.clone(),
        }
    }

    /// Softmax probabilities for one feature vector.
    pub fn predict(&self, feature: &[f64]) -> Vec<f64> {
        assert_eq!(feature.len(), self.w.rows(), "feature dimension");
        let m = self.w.cols();
        let mut logits = vec![0.0; m];
        for (c, logit) in logits.iter_mut().enumerate() {
            *logit = self.b.get(0, c)
                + feature.iter().enumerate().map(|(f, &x)| x * self.w.get(f, c)).sum::<f64>();
        }
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - mx).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }
}

/// Tape leaves for a head during training.
pub struct HeadVars {
    pub w: Var,
    pub b: Var,
}

impl HeadVars {
    pub fn register(set: &ParamSet, tape: &mut Tape) -> (Self, BTreeMap<String, Var>) {
        let leaves = set.register_leaves(tape);
        (Self { w: leaves[HEAD_W], b: leaves[HEAD_B] }, leaves)
    }
}

/// features [B, F] → logits [B, M].
pub fn logits_on_tape(tape: &mut Tape, features: Var, head: &HeadVars) -> Var {
    let xw = tape.matmul(features, head.w);
    tape.add(xw, head.b)
}

/// Mean categorical cross-entropy of softmaxed logits against the labels.
pub fn cross_entropy_on_tape(tape: &mut Tape, logits: Var, labels: &[usize]) -> Var {
    let p = tape.softmax_rows(logits);
    let clamped = tape.clamp(p, PROB_FLOOR, 1.0);
    let ln_p = tape.ln(clamped);
    let true_ln = tape.gather_cols(ln_p, labels);
    let mean = tape.mean_all(true_ln);
    tape.affine(mean, -1.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn predict_is_a_simplex_and_matches_tape_logits() {
        let head = LinearHead::init(3, 4, &mut stream(2, &[]));
        let x = [0.2, -0.7, 1.1];
        let probs = head.predict(&x);
        assert_relative_eq!(probs.iter().sum::<f64>(), 1.0, max_relative = 1e-12);

        let set = head.to_param_set();
        let mut tape = Tape::new();
        let (vars, _) = HeadVars::register(&set, &mut tape);
        let xv = tape.constant(Tensor::row_vec(x.to_vec()));
        let logits = logits_on_tape(&mut tape, xv, &vars);
        let p = tape.softmax_rows(logits);
        for (c, &want) in probs.iter().enumerate() {
            assert_relative_eq!(tape.value(p).get(0, c), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln_m() {
        let head = LinearHead { w: Tensor::zeros(3, 5), b: Tensor::zeros(1, 5) };
        let set = head.to_param_set();
        let mut tape = Tape::new();
        let (vars, _) = HeadVars::register(&set, &mut tape);
        let x = tape.constant(Tensor::from_fn(2, 3, |r, c| (r + c) as f64));
        let logits = logits_on_tape(&mut tape, x, &vars);
        let ce = cross_entropy_on_tape(&mut tape, logits, &[1, 4]);
        assert_relative_eq!(tape.value(ce).get(0, 0), 5.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn confident_correct_logits_drive_the_loss_to_zero() {
        let mut tape = Tape::new();
        let logits = tape.constant(Tensor::from_fn(1, 3, |_, c| if c == 2 { 50.0 } else { 0.0 }));
        let ce = cross_entropy_on_tape(&mut tape, logits, &[2]);
        assert!(tape.value(ce).get(0, 0) < 1e-12);
    }
}
