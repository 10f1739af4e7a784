//! Network definition: an ordered stack of dense / conv / residual layers
//! producing a feature vector. Classification heads live elsewhere
//! (evidential / bayesian modules); the backbone ends at the feature layer.
//!
//! There is intentionally no batch normalization: its running statistics
//! cannot be partitioned per task without breaking exact no-forgetting.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::{MaskableParam, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub enum LayerKind {
    /// `y = x·W + b`, optional ReLU.
    Dense { in_dim: usize, out_dim: usize, relu: bool },
    /// Same-padded 1-D convolution over channel-major flattened rows,
    /// optional ReLU.
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize, len: usize, relu: bool },
    /// Two dense layers with a skip connection:
    /// `y = relu(W2·relu(W1 x + b1) + b2 + P x)`, `P` a linear projection
    /// when dimensions differ, identity otherwise.
    ResidualDense { in_dim: usize, hidden: usize, out_dim: usize },
}

impl LayerKind {
    fn out_dim(&self) -> usize {
        match self {
            LayerKind::Dense { out_dim, .. } => *out_dim,
            LayerKind::Conv1d { out_ch, len, .. } => out_ch * len,
            LayerKind::ResidualDense { out_dim, .. } => *out_dim,
        }
    }

    fn in_dim(&self) -> usize {
        match self {
            LayerKind::Dense { in_dim, .. } => *in_dim,
            LayerKind::Conv1d { in_ch, len, .. } => in_ch * len,
            LayerKind::ResidualDense { in_dim, .. } => *in_dim,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<(String, LayerKind)>,
    input_width: usize,
    feature_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<(String, LayerKind)>) -> Self {
        assert!(!layers.is_empty());
        for w in layers.windows(2) {
            assert_eq!(
                w[0].1.out_dim(),
                w[1].1.in_dim(),
                "layer widths must chain: {} -> {}",
                w[0].0,
                w[1].0
            );
        }
        let input_width = layers[0].1.in_dim();
        let feature_dim = layers.last().unwrap().1.out_dim();
        Self { layers, input_width, feature_dim }
    }

    /// The stack used throughout: three residual blocks stepping
    /// 1024 → 256 → 128 → `feature_dim`.
    pub fn residual_backbone(input_width: usize, feature_dim: usize) -> Self {
        Self::new(vec![
            (
                "block1".into(),
                LayerKind::ResidualDense { in_dim: input_width, hidden: 256, out_dim: 256 },
            ),
            (
                "block2".into(),
                LayerKind::ResidualDense { in_dim: 256, hidden: 128, out_dim: 128 },
            ),
            (
                "block3".into(),
                LayerKind::ResidualDense { in_dim: 128, hidden: feature_dim, out_dim: feature_dim },
            ),
        ])
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn layers(&self) -> &[(String, LayerKind)] {
        &self.layers
    }

    /// Shapes of every named parameter tensor, in declaration order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        for (name, kind) in &self.layers {
            match kind {
                LayerKind::Dense { in_dim, out_dim, .. } => {
                    out.push((format!("{name}.w"), (*in_dim, *out_dim)));
                    out.push((format!("{name}.b"), (1, *out_dim)));
                }
                LayerKind::Conv1d { in_ch, out_ch, kernel, .. } => {
                    out.push((format!("{name}.w"), (*out_ch, in_ch * kernel)));
                    out.push((format!("{name}.b"), (1, *out_ch)));
                }
                LayerKind::ResidualDense { in_dim, hidden, out_dim } => {
                    out.push((format!("{name}.w1"), (*in_dim, *hidden)));
                    out.push((format!("{name}.b1"), (1, *hidden)));
                    out.push((format!("{name}.w2"), (*hidden, *out_dim)));
                    out.push((format!("{name}.b2"), (1, *out_dim)));
                    if in_dim != out_dim {
                        out.push((format!("{name}.proj"), (*in_dim, *out_dim)));
                    }
                }
            }
        }
        out
    }

    /// He-initialized parameter set (weights ~ N(0, 2/fan_in), biases zero).
    pub fn init_params(&self, rng: &mut impl Rng) -> ParamSet {
        let mut set = ParamSet::new();
        for (name, (rows, cols)) in self.param_shapes() {
            let values = if name.ends_with(".b")
                || name.ends_with(".b1")
                || name.ends_with(".b2")
            {
                Tensor::zeros(rows, cols)
            } else {
                he_normal(rows, cols, rng)
            };
            set.insert(MaskableParam::new(name, values));
        }
        set
    }

    /// Builds the forward graph on `tape` from input node `x` using the
    /// given parameter nodes. Callers decide whether parameters are leaves
    /// (training) or constants (inference).
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        x: Var,
        params: &BTreeMap<String, Var>,
    ) -> Var {
        assert_eq!(tape.value(x).cols(), self.input_width, "input width mismatch");
        let mut h = x;
        for (name, kind) in &self.layers {
            h = match kind {
                LayerKind::Dense { relu, .. } => {
                    let z = tape.matmul(h, params[&format!("{name}.w")]);
                    let z = tape.add(z, params[&format!("{name}.b")]);
                    if *relu {
                        tape.relu(z)
                    } else {
                        z
                    }
                }
                LayerKind::Conv1d { in_ch, out_ch, kernel, len, relu } => {
                    let z = tape.conv1d(
                        h,
                        params[&format!("{name}.w")],
                        params[&format!("{name}.b")],
                        *in_ch,
                        *out_ch,
                        *kernel,
                        *len,
                    );
                    if *relu {
                        tape.relu(z)
                    } else {
                        z
                    }
                }
                LayerKind::ResidualDense { in_dim, out_dim, .. } => {
                    let z1 = tape.matmul(h, params[&format!("{name}.w1")]);
                    let z1 = tape.add(z1, params[&format!("{name}.b1")]);
                    let a1 = tape.relu(z1);
                    let z2 = tape.matmul(a1, params[&format!("{name}.w2")]);
                    let z2 = tape.add(z2, params[&format!("{name}.b2")]);
                    let skip = if in_dim != out_dim {
                        tape.matmul(h, params[&format!("{name}.proj")])
                    } else {
                        h
                    };
                    let s = tape.add(z2, skip);
                    tape.relu(s)
                }
            };
        }
        h
    }

    /// Pure inference: features for a batch under an explicit effective
    /// parameter map. Bit-deterministic in (params, input).
    pub fn forward(&self, batch: &Tensor, effective: &BTreeMap<String, Tensor>) -> Tensor {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let params: BTreeMap<String, Var> = effective
            .iter()
            .map(|(n, t)| (n.clone(), tape.constant(t.clone())))
            .collect();
        let out = self.forward_on_tape(&mut tape, x, &params);
        tape.value(out).clone()
    }
}

fn he_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let fan_in = rows as f64;
    let std = (2.0 / fan_in).sqrt();
    Tensor::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * std
    })
}
