//! Learn–prune–share lifelong training: each task is allotted a disjoint
//! slice of one shared backbone via ADMM-guided magnitude pruning, prior
//! tasks' weights are frozen bitwise, and a trainable adaptive mask lets the
//! current task borrow frozen prior weights read-only.
//!
//! Task lifecycle:
//!
//! 1. [`LifelongState::begin_task`] — freeze the union of prior owned
//!    supports, reinitialize the free entries, and set up ADMM state.
//! 2. ADMM phase — train task loss plus the [`admm_penalty_on_tape`] term,
//!    calling [`admm_project`] every `update_interval` epochs.
//! 3. [`LifelongState::finalize_task`] — hard-prune the free weights down to
//!    the task's allocation, binarize the adaptive mask, freeze everything
//!    but the owned slice, and archive the partition.
//! 4. Fine-tune phase — retrain the owned slice (ADMM term dropped), then
//!    [`LifelongState::attach_head`] the task's trained head.
//!
//! After step 4 no later task can move the task's effective parameters:
//! owned and reused entries are frozen and the optimizer skips frozen
//! entries outright, so per-task inference stays bit-identical forever.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::nn::{MaskableParam, ParamSet, Tape, Tensor, Var};
use crate::rng::stream;

/// Named tensors keyed like the backbone [`ParamSet`].
pub type TensorMap = BTreeMap<String, Tensor>;

#[derive(Debug, Error)]
pub enum LpsError {
    #[error("capacity exhausted: requested alpha {requested} with {remaining} remaining")]
    CapacityExhausted { requested: f64, remaining: f64 },
    #[error("no eligible entries to prune in layer {0}")]
    NoEligibleEntries(String),
    #[error("owned mask for layer {0} is empty")]
    EmptyOwnedMask(String),
    #[error("unknown task id {0}")]
    UnknownTask(usize),
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
}

/// ADMM hyperparameters. The penalties are mild nudges, not hard
/// constraints — projection enforces sparsity exactly at finalize.
#[derive(Clone, Copy, Debug)]
pub struct AdmmConfig {
    /// Weight-term penalty ρ.
    pub rho: f64,
    /// Mask-term penalty; named apart from the selective-prediction
    /// threshold which also goes by τ elsewhere.
    pub tau_admm: f64,
    /// Epochs between projection steps.
    pub update_interval: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho: 1e-2, tau_admm: 1e-2, update_interval: 5 }
    }
}

/// Auxiliary/dual tensors of the ADMM split, per layer.
#[derive(Clone, Debug)]
pub struct AdmmState {
    /// Desired sparse weights; always `keep`-sparse after a projection.
    pub z: TensorMap,
    /// Weight duals.
    pub u: TensorMap,
    /// Desired sparse adaptive mask.
    pub y: TensorMap,
    /// Mask duals.
    pub k: TensorMap,
    pub cfg: AdmmConfig,
    /// Per-layer kept-entry counts for the weight prune (α of the layer's
    /// total, capped at the free count).
    pub theta_keep: BTreeMap<String, usize>,
    /// Per-layer kept counts for the mask prune (β of the prior support).
    pub mask_keep: BTreeMap<String, usize>,
}

/// Everything a task needs between `begin_task` and `finalize_task`.
#[derive(Clone, Debug)]
pub struct TaskContext {
    pub task_id: usize,
    pub alpha: f64,
    pub beta: f64,
    /// 1 where this task may write (complement of the prior owned union).
    pub free_mask: TensorMap,
    /// Union of prior owned supports.
    pub prior_mask: TensorMap,
    /// Backbone values on the prior support, snapshotted at task start.
    /// Frozen entries never move, so this equals the live values.
    pub prior_theta: TensorMap,
    /// Trainable soft reuse mask in [0,1]; frozen off the prior support.
    pub adaptive: ParamSet,
    pub admm: AdmmState,
}

/// A finalized task: its owned slice, its reuse mask, and (once attached)
/// its head parameters. Immutable after archiving.
#[derive(Clone, Debug)]
pub struct TaskPartition {
    pub task_id: usize,
    /// Binary owned mask Mᵗ, disjoint from every other task's.
    pub theta_mask: TensorMap,
    /// Binary reuse mask; support ⊆ prior tasks' owned union.
    pub adaptive_mask: TensorMap,
    pub alpha: f64,
    pub beta: f64,
    /// Task head (prototypes / variational layer / linear), stored per task.
    pub head: ParamSet,
}

/// Accounting across tasks: who owns what, and how much capacity is left.
#[derive(Clone, Debug)]
pub struct LifelongState {
    /// 1 where some finalized task owns the entry.
    pub cumulative_mask: TensorMap,
    /// ᾱ = Σ finalized alphas; remaining capacity is 1 − ᾱ.
    pub cumulative_alpha: f64,
    pub partitions: Vec<TaskPartition>,
}

impl LifelongState {
    /// Fresh state shaped like the backbone, nothing owned.
    pub fn new(template: &ParamSet) -> Self {
        let cumulative_mask = template
            .iter()
            .map(|(name, p)| (name.clone(), Tensor::zeros(p.values.rows(), p.values.cols())))
            .collect();
        Self { cumulative_mask, cumulative_alpha: 0.0, partitions: Vec::new() }
    }

    pub fn n_tasks(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition(&self, task_id: usize) -> Result<&TaskPartition, LpsError> {
        self.partitions.get(task_id).ok_or(LpsError::UnknownTask(task_id))
    }

    /// Starts a task: checks capacity, freezes the prior union, reinitializes
    /// the free entries (weights He-scaled, biases zero), builds the adaptive
    /// mask (uniform [0,1) logits on the prior support, frozen elsewhere),
    /// and seeds the ADMM split with hard-pruned Z/Y and zero duals.
    pub fn begin_task(
        &self,
        params: &mut ParamSet,
        alpha: f64,
        beta: f64,
        cfg: AdmmConfig,
        seed: u64,
    ) -> Result<TaskContext, LpsError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LpsError::InvalidFraction(alpha));
        }
        if !(beta >= 0.0 && beta <= 1.0) {
            return Err(LpsError::InvalidFraction(beta));
        }
        let remaining = 1.0 - self.cumulative_alpha;
        if alpha > remaining + 1e-12 {
            return Err(LpsError::CapacityExhausted { requested: alpha, remaining });
        }
        let task_id = self.partitions.len();

        let mut free_mask = TensorMap::new();
        let mut prior_mask = TensorMap::new();
        let mut prior_theta = TensorMap::new();
        let mut adaptive = ParamSet::new();
        let mut z = TensorMap::new();
        let mut u = TensorMap::new();
        let mut y = TensorMap::new();
        let mut k = TensorMap::new();
        let mut theta_keep = BTreeMap::new();
        let mut mask_keep = BTreeMap::new();

        for (li, (name, param)) in params.iter_mut().enumerate() {
            let prior = self.cumulative_mask[name].clone();
            let free = prior.map(|m| 1.0 - m);
            let total = free.len();
            let free_count = free.data().iter().filter(|&&m| m != 0.0).count();
            if free_count == 0 {
                return Err(LpsError::NoEligibleEntries(name.clone()));
            }

            // Reinitialize only what this task may write; owned prior
            // entries keep their exact bits.
            let mut rng = stream(seed, &[task_id as u64, li as u64]);
            let is_bias = name.rsplit('.').next().map_or(false, |s| s.starts_with('b'));
            let scale = (2.0 / param.values.rows() as f64).sqrt();
            for (i, v) in param.values.data_mut().iter_mut().enumerate() {
                let draw: f64 = rng.sample(StandardNormal);
                if free.data()[i] != 0.0 {
                    *v = if is_bias { 0.0 } else { scale * draw };
                }
            }
            param.set_frozen(prior.clone());

            // Soft reuse logits live on the prior support only.
            let mut logits = Tensor::zeros(prior.rows(), prior.cols());
            let mut mask_rng = stream(seed, &[task_id as u64, li as u64, 1]);
            for (i, l) in logits.data_mut().iter_mut().enumerate() {
                let draw: f64 = mask_rng.gen();
                if prior.data()[i] != 0.0 {
                    *l = draw;
                }
            }
            let mut mask_param = MaskableParam::new(name.clone(), logits);
            mask_param.set_frozen(free.clone());
            let prior_count = total - free_count;

            let t_keep = ((alpha * total as f64).ceil() as usize).clamp(1, free_count);
            let m_keep = (beta * prior_count as f64).ceil() as usize;
            let z_mask = hard_prune_count(&param.values, t_keep, &free)?;
            z.insert(name.clone(), param.values.zip_map(&z_mask, |v, m| v * m));
            u.insert(name.clone(), Tensor::zeros(prior.rows(), prior.cols()));
            let y_val = if m_keep == 0 {
                Tensor::zeros(prior.rows(), prior.cols())
            } else {
                let y_mask = hard_prune_count(&mask_param.values, m_keep, &prior)?;
                mask_param.values.zip_map(&y_mask, |v, m| v * m)
            };
            y.insert(name.clone(), y_val);
            k.insert(name.clone(), Tensor::zeros(prior.rows(), prior.cols()));
            theta_keep.insert(name.clone(), t_keep);
            mask_keep.insert(name.clone(), m_keep);

            prior_theta
                .insert(name.clone(), param.values.zip_map(&prior, |v, m| v * m));
            adaptive.insert(mask_param);
            free_mask.insert(name.clone(), free);
            prior_mask.insert(name.clone(), prior);
        }

        Ok(TaskContext {
            task_id,
            alpha,
            beta,
            free_mask,
            prior_mask,
            prior_theta,
            adaptive,
            admm: AdmmState { z, u, y, k, cfg, theta_keep, mask_keep },
        })
    }

    /// Ends the ADMM phase: hard-prunes the free weights to the task's
    /// allocation, zeroes the rest, binarizes the adaptive mask from Y's
    /// support, freezes everything except the owned slice (for the caller's
    /// fine-tune pass), and archives the partition.
    pub fn finalize_task(
        &mut self,
        params: &mut ParamSet,
        ctx: TaskContext,
    ) -> Result<usize, LpsError> {
        let task_id = ctx.task_id;
        let mut theta_mask = TensorMap::new();
        let mut adaptive_mask = TensorMap::new();

        for (name, param) in params.iter_mut() {
            let free = &ctx.free_mask[name];
            let keep = ctx.admm.theta_keep[name];
            let owned = hard_prune_count(&param.values, keep, free)?;
            if owned.data().iter().all(|&m| m == 0.0) {
                return Err(LpsError::EmptyOwnedMask(name.clone()));
            }
            // Free entries the task did not keep go to exactly zero so the
            // next task reinitializes from a clean slate.
            let values = &mut param.values;
            for (i, v) in values.data_mut().iter_mut().enumerate() {
                if free.data()[i] != 0.0 && owned.data()[i] == 0.0 {
                    *v = 0.0;
                }
            }
            param.set_frozen(owned.map(|m| 1.0 - m));

            let binary = ctx.admm.y[name].map(|v| if v != 0.0 { 1.0 } else { 0.0 });
            adaptive_mask.insert(name.clone(), binary);
            theta_mask.insert(name.clone(), owned);
        }

        for (name, owned) in &theta_mask {
            let cum = self.cumulative_mask.get_mut(name).expect("layer");
            *cum = cum.zip_map(owned, |a, b| if a != 0.0 || b != 0.0 { 1.0 } else { 0.0 });
        }
        self.cumulative_alpha += ctx.alpha;
        self.partitions.push(TaskPartition {
            task_id,
            theta_mask,
            adaptive_mask,
            alpha: ctx.alpha,
            beta: ctx.beta,
            head: ParamSet::new(),
        });
        Ok(task_id)
    }

    /// Stores the task's trained head after its fine-tune pass.
    pub fn attach_head(&mut self, task_id: usize, head: ParamSet) -> Result<(), LpsError> {
        match self.partitions.get_mut(task_id) {
            Some(p) => {
                p.head = head;
                Ok(())
            }
            None => Err(LpsError::UnknownTask(task_id)),
        }
    }

    /// Effective backbone for a finalized task: θ ⊙ Mᵗ + θ ⊙ adaptiveᵗ.
    /// Both supports are frozen from the task's fine-tune onward, so the
    /// result is bitwise stable under any later training.
    pub fn compose_inference_params(
        &self,
        params: &ParamSet,
        task_id: usize,
    ) -> Result<TensorMap, LpsError> {
        let part = self.partition(task_id)?;
        Ok(params
            .iter()
            .map(|(name, p)| {
                let own = &part.theta_mask[name];
                let reuse = &part.adaptive_mask[name];
                let mut eff = p.values.zip_map(own, |v, m| v * m);
                let borrowed = p.values.zip_map(reuse, |v, m| v * m);
                eff.axpy(1.0, &borrowed);
                (name.clone(), eff)
            })
            .collect())
    }

    /// Verifies the partition algebra: owned supports pairwise disjoint,
    /// union cardinality additive, every adaptive support inside the union
    /// of strictly earlier owned supports.
    pub fn check_mask_discipline(&self) -> Result<(), LpsError> {
        for name in self.cumulative_mask.keys() {
            let len = self.cumulative_mask[name].len();
            let mut seen = vec![false; len];
            let mut total = 0usize;
            for part in &self.partitions {
                let own = &part.theta_mask[name];
                for (i, &m) in own.data().iter().enumerate() {
                    if m != 0.0 {
                        if seen[i] {
                            return Err(LpsError::EmptyOwnedMask(format!(
                                "{name}: overlapping owned supports at entry {i}"
                            )));
                        }
                        seen[i] = true;
                        total += 1;
                    }
                }
                for (i, &m) in part.adaptive_mask[name].data().iter().enumerate() {
                    if m != 0.0 {
                        let in_prior = self.partitions[..part.task_id]
                            .iter()
                            .any(|q| q.theta_mask[name].data()[i] != 0.0);
                        if !in_prior {
                            return Err(LpsError::EmptyOwnedMask(format!(
                                "{name}: adaptive entry {i} outside prior supports"
                            )));
                        }
                    }
                }
            }
            let union =
                self.cumulative_mask[name].data().iter().filter(|&&m| m != 0.0).count();
            if union != total {
                return Err(LpsError::EmptyOwnedMask(format!(
                    "{name}: union cardinality {union} != sum of parts {total}"
                )));
            }
        }
        Ok(())
    }
}

/// Binary top-k mask: keeps the ⌈keep_fraction · eligible_count⌉ largest
/// entries by absolute value among the eligible ones, ties broken toward the
/// lower flat index.
pub fn hard_prune(
    values: &Tensor,
    keep_fraction: f64,
    eligible: &Tensor,
) -> Result<Tensor, LpsError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(LpsError::InvalidFraction(keep_fraction));
    }
    let n = eligible.data().iter().filter(|&&m| m != 0.0).count();
    if n == 0 {
        return Err(LpsError::NoEligibleEntries("eligible mask".into()));
    }
    hard_prune_count(values, (keep_fraction * n as f64).ceil() as usize, eligible)
}

/// [`hard_prune`] with an explicit kept-entry count (≥ 1, ≤ eligible count).
pub fn hard_prune_count(
    values: &Tensor,
    keep: usize,
    eligible: &Tensor,
) -> Result<Tensor, LpsError> {
    assert_eq!(values.shape(), eligible.shape(), "mask shape");
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| eligible.data()[i] != 0.0).collect();
    if idx.is_empty() {
        return Err(LpsError::NoEligibleEntries("eligible mask".into()));
    }
    assert!(keep >= 1 && keep <= idx.len(), "keep count {keep} of {}", idx.len());
    idx.sort_by(|&a, &b| {
        values.data()[b]
            .abs()
            .partial_cmp(&values.data()[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut mask = Tensor::zeros(values.rows(), values.cols());
    for &i in idx.iter().take(keep) {
        mask.data_mut()[i] = 1.0;
    }
    Ok(mask)
}

/// (ρ/2)‖θ − Z + U‖² + (τ/2)‖M − Y + K‖², summed over the free / prior
/// supports respectively. Pure mirror of [`admm_penalty_on_tape`].
pub fn admm_loss(params: &ParamSet, adaptive: &ParamSet, ctx: &TaskContext) -> f64 {
    let mut weight_term = 0.0;
    let mut mask_term = 0.0;
    for (name, p) in params.iter() {
        let free = &ctx.free_mask[name];
        let z = &ctx.admm.z[name];
        let u = &ctx.admm.u[name];
        for i in 0..p.values.len() {
            if free.data()[i] != 0.0 {
                let d = p.values.data()[i] - z.data()[i] + u.data()[i];
                weight_term += d * d;
            }
        }
        let prior = &ctx.prior_mask[name];
        let m = &adaptive.get(name).expect("adaptive layer").values;
        let y = &ctx.admm.y[name];
        let k = &ctx.admm.k[name];
        for i in 0..m.len() {
            if prior.data()[i] != 0.0 {
                let d = m.data()[i] - y.data()[i] + k.data()[i];
                mask_term += d * d;
            }
        }
    }
    0.5 * ctx.admm.cfg.rho * weight_term + 0.5 * ctx.admm.cfg.tau_admm * mask_term
}

/// The ADMM penalty as a tape node so its gradient joins the task loss.
pub fn admm_penalty_on_tape(
    tape: &mut Tape,
    theta_leaves: &BTreeMap<String, Var>,
    adaptive_leaves: &BTreeMap<String, Var>,
    ctx: &TaskContext,
) -> Var {
    let mut total = tape.constant(Tensor::scalar(0.0));
    for (name, &theta) in theta_leaves {
        let free = tape.constant(ctx.free_mask[name].clone());
        // Z − U is supported on the free entries only, so masking θ alone
        // keeps the difference correct and the gradient free-supported.
        let target = ctx.admm.z[name].zip_map(&ctx.admm.u[name], |z, u| z - u);
        let target = tape.constant(target);
        let masked = tape.mul(theta, free);
        let d = tape.sub(masked, target);
        let sq = tape.mul(d, d);
        let sum = tape.sum_all(sq);
        let scaled = tape.affine(sum, 0.5 * ctx.admm.cfg.rho, 0.0);
        total = tape.add(total, scaled);

        let adaptive = adaptive_leaves[name];
        let prior = tape.constant(ctx.prior_mask[name].clone());
        let m_target = ctx.admm.y[name].zip_map(&ctx.admm.k[name], |y, k| y - k);
        let m_target = tape.constant(m_target);
        let m_masked = tape.mul(adaptive, prior);
        let md = tape.sub(m_masked, m_target);
        let msq = tape.mul(md, md);
        let msum = tape.sum_all(msq);
        let mscaled = tape.affine(msum, 0.5 * ctx.admm.cfg.tau_admm, 0.0);
        total = tape.add(total, mscaled);
    }
    total
}

/// One projection step: Z ← prune(θ+U), U ← U + θ − Z, Y ← prune(M+K),
/// K ← K + M − Y. Call every `update_interval` epochs during the ADMM phase.
pub fn admm_project(ctx: &mut TaskContext, params: &ParamSet) {
    for (name, p) in params.iter() {
        let free = &ctx.free_mask[name];
        let u = ctx.admm.u.get_mut(name).expect("layer");
        let theta_u = p.values.zip_map(u, |t, uu| t + uu);
        let keep = ctx.admm.theta_keep[name];
        let mask = hard_prune_count(&theta_u, keep, free).expect("free entries exist");
        let z = theta_u.zip_map(&mask, |v, m| v * m);
        for i in 0..u.len() {
            if free.data()[i] != 0.0 {
                u.data_mut()[i] += p.values.data()[i] - z.data()[i];
            }
        }
        ctx.admm.z.insert(name.clone(), z);

        let m_keep = ctx.admm.mask_keep[name];
        if m_keep == 0 {
            continue;
        }
        let prior = &ctx.prior_mask[name];
        let m = &ctx.adaptive.get(name).expect("adaptive layer").values;
        let k = ctx.admm.k.get_mut(name).expect("layer");
        let m_k = m.zip_map(k, |mm, kk| mm + kk);
        let y_mask = hard_prune_count(&m_k, m_keep, prior).expect("prior entries exist");
        let y = m_k.zip_map(&y_mask, |v, mm| v * mm);
        for i in 0..k.len() {
            if prior.data()[i] != 0.0 {
                k.data_mut()[i] += m.data()[i] - y.data()[i];
            }
        }
        ctx.admm.y.insert(name.clone(), y);
    }
}

/// Clamps the soft adaptive logits back into [0,1] after an optimizer step.
pub fn clamp_adaptive(adaptive: &mut ParamSet) {
    for (_, p) in adaptive.iter_mut() {
        for v in p.values.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Per-layer effective weights during the ADMM phase:
/// θ ⊙ free + prior_theta ⊙ M, with gradients flowing to θ on the free
/// support and to M on the prior support.
pub fn effective_leaves_admm(
    tape: &mut Tape,
    theta_leaves: &BTreeMap<String, Var>,
    adaptive_leaves: &BTreeMap<String, Var>,
    ctx: &TaskContext,
) -> BTreeMap<String, Var> {
    theta_leaves
        .iter()
        .map(|(name, &theta)| {
            let free = tape.constant(ctx.free_mask[name].clone());
            let own_part = tape.mul(theta, free);
            let prior = tape.constant(ctx.prior_theta[name].clone());
            let borrow_part = tape.mul(prior, adaptive_leaves[name]);
            (name.clone(), tape.add(own_part, borrow_part))
        })
        .collect()
}

/// Per-layer effective weights when the reuse part is fixed (fine-tune and
/// task-specific evaluation): θ ⊙ active + reuse_values.
pub fn effective_leaves_masked(
    tape: &mut Tape,
    theta_leaves: &BTreeMap<String, Var>,
    active_mask: &TensorMap,
    reuse_values: &TensorMap,
) -> BTreeMap<String, Var> {
    theta_leaves
        .iter()
        .map(|(name, &theta)| {
            let active = tape.constant(active_mask[name].clone());
            let own_part = tape.mul(theta, active);
            let reuse = tape.constant(reuse_values[name].clone());
            (name.clone(), tape.add(own_part, reuse))
        })
        .collect()
}

/// The frozen reuse contribution for a finalized task:
/// prior_theta ⊙ binary adaptive mask.
pub fn reuse_values(part: &TaskPartition, params: &ParamSet) -> TensorMap {
    part.adaptive_mask
        .iter()
        .map(|(name, mask)| {
            let p = params.get(name).expect("layer");
            (name.clone(), p.values.zip_map(mask, |v, m| v * m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_params(rows: usize, cols: usize) -> ParamSet {
        let mut set = ParamSet::new();
        set.insert(MaskableParam::new(
            "l1.w",
            Tensor::from_fn(rows, cols, |r, c| 0.1 * (r * cols + c) as f64 - 0.3),
        ));
        set.insert(MaskableParam::new("l1.b", Tensor::zeros(1, cols)));
        set
    }

    #[test]
    fn hard_prune_magnitude_and_ties() {
        let v = Tensor::row_vec(vec![0.1, -0.5, 0.3, -0.05]);
        let all = Tensor::filled(1, 4, 1.0);
        let mask = hard_prune(&v, 0.25, &all).unwrap();
        assert_eq!(mask.data(), &[0.0, 1.0, 0.0, 0.0]);

        // keep_fraction = 1 reproduces the eligible mask.
        let elig = Tensor::row_vec(vec![1.0, 0.0, 1.0, 1.0]);
        let full = hard_prune(&v, 1.0, &elig).unwrap();
        assert_eq!(full.data(), elig.data());

        // Equal magnitudes: ties go to the lower flat index.
        let flat = Tensor::row_vec(vec![0.2, 0.2, 0.2, 0.2]);
        let half = hard_prune(&flat, 0.5, &all).unwrap();
        assert_eq!(half.data(), &[1.0, 1.0, 0.0, 0.0]);

        let none = Tensor::zeros(1, 4);
        assert!(hard_prune(&v, 0.5, &none).is_err());
    }

    #[test]
    fn admm_loss_examples() {
        let mut params = ParamSet::new();
        params.insert(MaskableParam::new("l.w", Tensor::row_vec(vec![1.0, 0.0])));
        let state = LifelongState::new(&params);
        let mut ctx = state
            .begin_task(&mut params, 0.5, 0.5, AdmmConfig { rho: 2.0, ..Default::default() }, 3)
            .unwrap();
        // Force the configuration from the worked example: θ − Z + U = [1, 0].
        params.get_mut("l.w").unwrap().values = Tensor::row_vec(vec![1.0, 0.0]);
        ctx.admm.z.insert("l.w".into(), Tensor::zeros(1, 2));
        ctx.admm.u.insert("l.w".into(), Tensor::zeros(1, 2));
        let adaptive = ctx.adaptive.clone();
        assert_relative_eq!(admm_loss(&params, &adaptive, &ctx), 1.0, max_relative = 1e-12);

        // Doubling rho doubles the weight term.
        ctx.admm.cfg.rho = 4.0;
        assert_relative_eq!(admm_loss(&params, &adaptive, &ctx), 2.0, max_relative = 1e-12);

        // At the split point the penalty vanishes.
        ctx.admm.cfg.rho = 2.0;
        ctx.admm.z.insert("l.w".into(), Tensor::row_vec(vec![1.0, 0.0]));
        assert_eq!(admm_loss(&params, &adaptive, &ctx), 0.0);
    }

    #[test]
    fn admm_projection_example_and_fixed_point() {
        let mut params = ParamSet::new();
        params.insert(MaskableParam::new("l.w", Tensor::row_vec(vec![0.9, 0.1])));
        let state = LifelongState::new(&params);
        let mut ctx =
            state.begin_task(&mut params, 0.5, 0.5, AdmmConfig::default(), 7).unwrap();
        params.get_mut("l.w").unwrap().values = Tensor::row_vec(vec![0.9, 0.1]);
        ctx.admm.u.insert("l.w".into(), Tensor::zeros(1, 2));

        admm_project(&mut ctx, &params);
        assert_eq!(ctx.admm.z["l.w"].data(), &[0.9, 0.0]);
        assert_eq!(ctx.admm.u["l.w"].data(), &[0.0, 0.1]);

        // Drive θ to Z − U each round: the duals stop moving.
        let mut last = f64::INFINITY;
        for _ in 0..6 {
            let target = ctx.admm.z["l.w"].zip_map(&ctx.admm.u["l.w"], |z, u| z - u);
            params.get_mut("l.w").unwrap().values = target;
            admm_project(&mut ctx, &params);
            let norm = ctx.admm.u["l.w"].sq_norm();
            assert!(norm <= last + 1e-12);
            last = norm;
        }
    }

    #[test]
    fn begin_task_capacity_and_freezing() {
        let mut params = toy_params(3, 4);
        let mut state = LifelongState::new(&params);

        // First task: nothing frozen.
        let ctx = state.begin_task(&mut params, 0.5, 0.9, AdmmConfig::default(), 1).unwrap();
        assert_eq!(params.get("l1.w").unwrap().trainable_count(), 12);
        assert_eq!(ctx.task_id, 0);
        state.finalize_task(&mut params, ctx).unwrap();

        // Second of two equal slices: exactly the owned half is frozen.
        let ctx = state.begin_task(&mut params, 0.5, 0.9, AdmmConfig::default(), 2).unwrap();
        let frozen = 12 - params.get("l1.w").unwrap().trainable_count();
        assert_eq!(frozen, 6);
        state.finalize_task(&mut params, ctx).unwrap();

        // Capacity is spent.
        assert!(matches!(
            state.begin_task(&mut params, 0.1, 0.9, AdmmConfig::default(), 3),
            Err(LpsError::CapacityExhausted { .. })
        ));
    }

    #[test]
    fn finalize_counts_disjointness_and_adaptive_support() {
        let mut params = toy_params(3, 3);
        let mut state = LifelongState::new(&params);
        for (task, seed) in [(0usize, 11u64), (1, 12), (2, 13)] {
            let ctx = state
                .begin_task(&mut params, 1.0 / 3.0, 0.5, AdmmConfig::default(), seed)
                .unwrap();
            assert_eq!(ctx.task_id, task);
            state.finalize_task(&mut params, ctx).unwrap();
            let part = state.partition(task).unwrap();
            // ceil(9/3) = 3 weights owned per layer.
            let owned: usize = part.theta_mask["l1.w"].data().iter().map(|&m| m as usize).sum();
            assert_eq!(owned, 3);
        }
        state.check_mask_discipline().unwrap();
        assert_relative_eq!(state.cumulative_alpha, 1.0, max_relative = 1e-12);
        let union: usize =
            state.cumulative_mask["l1.w"].data().iter().map(|&m| m as usize).sum();
        assert_eq!(union, 9);
    }

    #[test]
    fn composition_uses_owned_plus_borrowed_entries() {
        let mut params = ParamSet::new();
        params.insert(MaskableParam::new("l.w", Tensor::row_vec(vec![0.0, 0.0, 0.0, 0.0])));
        let mut state = LifelongState::new(&params);

        let ctx = state.begin_task(&mut params, 0.5, 1.0, AdmmConfig::default(), 5).unwrap();
        // Make entries 0,1 the obvious keepers.
        params.get_mut("l.w").unwrap().values = Tensor::row_vec(vec![0.7, 0.6, 0.01, 0.02]);
        state.finalize_task(&mut params, ctx).unwrap();
        let eff = state.compose_inference_params(&params, 0).unwrap();
        assert_eq!(eff["l.w"].data(), &[0.7, 0.6, 0.0, 0.0]);

        // Task 2 owns one entry (ceil(0.25·4) = 1) and borrows all priors
        // (beta = 1 keeps the full prior support in Y).
        let mut ctx = state.begin_task(&mut params, 0.25, 1.0, AdmmConfig::default(), 6).unwrap();
        {
            let v = &mut params.get_mut("l.w").unwrap().values;
            v.set(0, 2, 0.4);
            v.set(0, 3, 0.05);
        }
        admm_project(&mut ctx, &params); // fills Y with the prior support
        state.finalize_task(&mut params, ctx).unwrap();
        let eff = state.compose_inference_params(&params, 1).unwrap();
        // Owned: entry 2 (0.4). Borrowed: entries 0,1 (0.7, 0.6), unmodified.
        assert_eq!(eff["l.w"].data(), &[0.7, 0.6, 0.4, 0.0]);

        assert!(matches!(
            state.compose_inference_params(&params, 9),
            Err(LpsError::UnknownTask(9))
        ));
    }

    #[test]
    fn later_training_cannot_move_a_finalized_task() {
        let mut params = toy_params(4, 4);
        let mut state = LifelongState::new(&params);
        let ctx = state.begin_task(&mut params, 0.5, 0.5, AdmmConfig::default(), 21).unwrap();
        state.finalize_task(&mut params, ctx).unwrap();
        let before = state.compose_inference_params(&params, 0).unwrap();

        // Task 2 reinitializes and "trains" its free slice.
        let ctx = state.begin_task(&mut params, 0.5, 0.5, AdmmConfig::default(), 22).unwrap();
        for (name, p) in params.iter_mut() {
            let free = &ctx.free_mask[name];
            for i in 0..p.values.len() {
                if free.data()[i] != 0.0 {
                    p.values.data_mut()[i] += 42.0;
                }
            }
        }
        state.finalize_task(&mut params, ctx).unwrap();

        let after = state.compose_inference_params(&params, 0).unwrap();
        for (name, t) in &before {
            assert_eq!(t.data(), after[name].data(), "layer {name} moved");
        }
        state.check_mask_discipline().unwrap();
    }

    #[test]
    fn adaptive_mask_round_trip_on_tape() {
        let mut params = toy_params(2, 3);
        let mut state = LifelongState::new(&params);
        let ctx = state.begin_task(&mut params, 0.5, 0.5, AdmmConfig::default(), 31).unwrap();
        state.finalize_task(&mut params, ctx).unwrap();
        let ctx = state.begin_task(&mut params, 0.25, 0.5, AdmmConfig::default(), 32).unwrap();

        // Penalty at the split point is zero; elsewhere positive, and the
        // tape value agrees with the pure evaluation.
        let mut tape = Tape::new();
        let theta_leaves = params.register_leaves(&mut tape);
        let adaptive_leaves = ctx.adaptive.register_leaves(&mut tape);
        let pen = admm_penalty_on_tape(&mut tape, &theta_leaves, &adaptive_leaves, &ctx);
        let pure = admm_loss(&params, &ctx.adaptive, &ctx);
        assert_relative_eq!(tape.value(pen).get(0, 0), pure, max_relative = 1e-12);

        // Effective weights: free entries from θ, prior entries weighted by
        // the soft mask.
        let eff = effective_leaves_admm(&mut tape, &theta_leaves, &adaptive_leaves, &ctx);
        for (name, &var) in &eff {
            let got = tape.value(var);
            let p = &params.get(name).unwrap().values;
            let m = &ctx.adaptive.get(name).unwrap().values;
            for i in 0..got.len() {
                let want = if ctx.free_mask[name].data()[i] != 0.0 {
                    p.data()[i]
                } else {
                    ctx.prior_theta[name].data()[i] * m.data()[i]
                };
                assert_relative_eq!(got.data()[i], want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn clamping_keeps_logits_in_unit_interval() {
        let mut adaptive = ParamSet::new();
        adaptive.insert(MaskableParam::new("l.w", Tensor::row_vec(vec![-0.5, 0.3, 1.7])));
        clamp_adaptive(&mut adaptive);
        assert_eq!(adaptive.get("l.w").unwrap().values.data(), &[0.0, 0.3, 1.0]);
    }
}
