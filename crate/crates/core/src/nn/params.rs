//! Named parameters with freeze masks.
//!
//! A [`MaskableParam`] pairs a value tensor with a binary `frozen` tensor:
//! entries at 1 belong to an earlier task (or are otherwise pinned) and must
//! never move. The optimizer and the gradient-collection helper both honor
//! the mask, so frozen entries stay bitwise identical across any number of
//! training steps.

use std::collections::BTreeMap;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct MaskableParam {
    name: String,
    pub values: Tensor,
    /// 1.0 = frozen (excluded from optimization), 0.0 = trainable.
    pub frozen: Tensor,
}

impl MaskableParam {
    pub fn new(name: impl Into<String>, values: Tensor) -> Self {
        let frozen = Tensor::zeros(values.rows(), values.cols());
        Self { name: name.into(), values, frozen }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Marks every entry where `mask` is nonzero as frozen (union with the
    /// current freeze set).
    pub fn freeze_where(&mut self, mask: &Tensor) {
        assert_eq!(self.values.shape(), mask.shape());
        self.frozen = self
            .frozen
            .zip_map(mask, |f, m| if f != 0.0 || m != 0.0 { 1.0 } else { 0.0 });
    }

    pub fn set_frozen(&mut self, mask: Tensor) {
        assert_eq!(self.values.shape(), mask.shape());
        self.frozen = mask;
    }

    pub fn trainable_count(&self) -> usize {
        self.frozen.data().iter().filter(|&&f| f == 0.0).count()
    }
}

/// An ordered collection of named parameters. Iteration order is the sorted
/// name order (BTreeMap), which keeps every training run and serialization
/// deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    params: BTreeMap<String, MaskableParam>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, param: MaskableParam) {
        self.params.insert(param.name().to_string(), param);
    }

    pub fn get(&self, name: &str) -> Option<&MaskableParam> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut MaskableParam> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &MaskableParam)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut MaskableParam)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    /// Total number of scalar entries across all parameters.
    pub fn total_len(&self) -> usize {
        self.params.values().map(|p| p.values.len()).sum()
    }

    /// Registers every parameter as a tape leaf; returns name → Var.
    pub fn register_leaves(&self, tape: &mut Tape) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(n, p)| (n.clone(), tape.leaf(p.values.clone())))
            .collect()
    }
}

/// Extracts gradients for a leaf map, zeroing frozen entries. Parameters
/// whose leaf received no gradient get an explicit zero tensor, so callers
/// can treat the result as total.
pub fn masked_grads(
    set: &ParamSet,
    leaves: &BTreeMap<String, Var>,
    grads: &Gradients,
) -> BTreeMap<String, Tensor> {
    let mut out = BTreeMap::new();
    for (name, param) in set.iter() {
        let leaf = leaves[name];
        let mut g = match grads.get(leaf) {
            Some(t) => t.clone(),
            None => Tensor::zeros(param.values.rows(), param.values.cols()),
        };
        for (ge, &fe) in g.data_mut().iter_mut().zip(param.frozen.data()) {
            if fe != 0.0 {
                *ge = 0.0;
            }
        }
        out.insert(name.clone(), g);
    }
    out
}
