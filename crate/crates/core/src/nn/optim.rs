//! SGD with momentum over a [`ParamSet`].
//!
//! Frozen entries are skipped outright (not merely given zero gradient), so
//! they remain bitwise unchanged no matter how many steps run.

use std::collections::BTreeMap;

use super::params::ParamSet;
use super::tensor::Tensor;

pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: BTreeMap::new() }
    }

    /// `v ← momentum·v + g;  p ← p − lr·v` on trainable entries.
    pub fn step(&mut self, params: &mut ParamSet, grads: &BTreeMap<String, Tensor>) {
        for (name, param) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            assert_eq!(g.shape(), param.values.shape(), "gradient shape for {name}");
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.rows(), g.cols()));
            for i in 0..g.len() {
                if param.frozen.data()[i] != 0.0 {
                    continue;
                }
                let vi = self.momentum * v.data()[i] + g.data()[i];
                v.data_mut()[i] = vi;
                param.values.data_mut()[i] -= self.lr * vi;
            }
        }
    }

    /// Drops accumulated momentum (used at phase boundaries).
    pub fn reset_velocity(&mut self) {
        self.velocity.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::MaskableParam;

    #[test]
    fn step_moves_only_trainable_entries() {
        let mut set = ParamSet::new();
        let mut p = MaskableParam::new("w", Tensor::from_vec(1, 2, vec![1.0, 1.0]));
        p.set_frozen(Tensor::from_vec(1, 2, vec![0.0, 1.0]));
        set.insert(p);
        let mut opt = SgdMomentum::new(0.1, 0.0);
        let grads: BTreeMap<String, Tensor> =
            [("w".to_string(), Tensor::from_vec(1, 2, vec![0.5, 0.5]))].into();
        opt.step(&mut set, &grads);
        let w = &set.get("w").unwrap().values;
        assert_eq!(w.data()[0], 0.95);
        assert_eq!(w.data()[1].to_bits(), 1.0f64.to_bits(), "frozen entry moved");
    }

    #[test]
    fn momentum_accumulates() {
        let mut set = ParamSet::new();
        set.insert(MaskableParam::new("w", Tensor::scalar(0.0)));
        let mut opt = SgdMomentum::new(1.0, 0.5);
        let grads: BTreeMap<String, Tensor> = [("w".to_string(), Tensor::scalar(1.0))].into();
        opt.step(&mut set, &grads); // v=1, p=-1
        opt.step(&mut set, &grads); // v=1.5, p=-2.5
        assert_eq!(set.get("w").unwrap().values.get(0, 0), -2.5);
    }
}
