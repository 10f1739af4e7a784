//! Checkpoint evaluation: frames in, per-sample scored predictions out.
//!
//! Everything flows from the archive: the backbone is recomposed per task
//! from stored values and masks, heads are rebuilt from their parameter
//! sets, and the variational head's Monte-Carlo draws are seeded per
//! sample index. Two evaluations of the same checkpoint on the same frame
//! file are therefore bit-identical.

use radlab_core::bayesian::{self, VariationalLinear};
use radlab_core::evidential::{self, PrototypeBank, UtilityConfig};
use radlab_core::nn::classify::LinearHead;
use radlab_core::nn::Network;
use radlab_core::preprocess::Frame;
use radlab_core::rng::derive_seed;
use radlab_core::selpred::ScoredPrediction;

use crate::checkpoint::Checkpoint;
use crate::train::HeadKind;
use crate::LabError;

const EVAL_CHUNK: usize = 256;

/// One evaluated sample. `index` is the sample's position in the frame
/// file, which also seeds the variational head's draws.
#[derive(Clone, Copy, Debug)]
pub struct PredRow {
    pub index: usize,
    pub task_id: usize,
    pub snr_db: f64,
    pub true_label: usize,
    pub predicted_label: usize,
    pub uncertainty: f64,
}

impl PredRow {
    pub fn is_correct(&self) -> bool {
        self.predicted_label == self.true_label
    }

    /// The selective-prediction view of this row.
    pub fn scored(&self) -> ScoredPrediction {
        ScoredPrediction {
            predicted_class: self.predicted_label,
            true_class: self.true_label,
            uncertainty: self.uncertainty,
            snr_db: self.snr_db,
        }
    }
}

enum EvalHead {
    Linear(LinearHead),
    Evidential(PrototypeBank, UtilityConfig),
    Bayesian(VariationalLinear),
}

/// Index of the entry that scores a frame: lifelong archives route by the
/// frame's task id; single-task archives send everything to their one head.
fn entry_for(ckpt: &Checkpoint, frame: &Frame) -> Result<usize, LabError> {
    if ckpt.manifest.variant.is_lifelong() {
        ckpt.manifest
            .tasks
            .iter()
            .position(|e| e.id == frame.task_id)
            .ok_or_else(|| LabError::Data(format!("no archived task for task id {}", frame.task_id)))
    } else {
        Ok(0)
    }
}

pub fn evaluate(ckpt: &Checkpoint, frames: &[Frame]) -> Result<Vec<PredRow>, LabError> {
    if frames.is_empty() {
        return Err(LabError::Data("no frames to evaluate".into()));
    }
    let m = &ckpt.manifest;
    for f in frames {
        if f.values.len() != m.input_width {
            return Err(LabError::Data(format!(
                "frame width {} does not match the archived backbone ({})",
                f.values.len(),
                m.input_width
            )));
        }
    }
    let net = Network::residual_backbone(m.input_width, m.feature_dim);
    let kind = m.variant.head_kind();

    // Group sample positions by archive entry, then score entry by entry.
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m.tasks.len()];
    for (i, f) in frames.iter().enumerate() {
        groups[entry_for(ckpt, f)?].push(i);
    }

    let mut out: Vec<Option<PredRow>> = vec![None; frames.len()];
    for (entry_idx, idxs) in groups.iter().enumerate() {
        if idxs.is_empty() {
            continue;
        }
        let entry = ckpt.task_entry(entry_idx)?;
        let labels = &entry.labels;
        let effective = ckpt.composed_params(entry_idx)?;
        let head_set = &ckpt.heads[entry_idx];
        let head = match kind {
            HeadKind::Linear => EvalHead::Linear(LinearHead::from_param_set(head_set)),
            HeadKind::Evidential => EvalHead::Evidential(
                PrototypeBank::from_param_set(head_set, labels.len()),
                UtilityConfig::identity(labels.len(), m.nu),
            ),
            HeadKind::Bayesian => {
                EvalHead::Bayesian(VariationalLinear::from_param_set(head_set, m.t_eval))
            }
        };

        for chunk in idxs.chunks(EVAL_CHUNK) {
            let mut x = radlab_core::nn::Tensor::zeros(chunk.len(), m.input_width);
            for (r, &i) in chunk.iter().enumerate() {
                x.data_mut()[r * m.input_width..(r + 1) * m.input_width]
                    .copy_from_slice(&frames[i].values);
            }
            let feats = net.forward(&x, &effective);
            for (r, &i) in chunk.iter().enumerate() {
                let feature = feats.row(r);
                let (local, uncertainty) = match &head {
                    EvalHead::Linear(h) => {
                        let probs = h.predict(feature);
                        let best = argmax(&probs);
                        (best, 1.0 - probs[best])
                    }
                    EvalHead::Evidential(bank, util) => {
                        let utilities = bank.utilities_for(feature, util)?;
                        evidential::predict_and_uncertainty(&utilities)
                    }
                    EvalHead::Bayesian(vl) => {
                        let seed =
                            derive_seed(m.seed, &[7, entry_idx as u64, i as u64]);
                        let samples = vl.sample_forward(feature, seed);
                        let mean = samples.mean_predictive();
                        let (_, _, epistemic) = bayesian::entropy_decomposition(&samples);
                        (argmax(&mean), epistemic)
                    }
                };
                let frame = &frames[i];
                out[i] = Some(PredRow {
                    index: i,
                    task_id: frame.task_id,
                    snr_db: frame.snr_db,
                    true_label: frame.class_label,
                    predicted_label: labels[local],
                    uncertainty,
                });
            }
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every frame scored")).collect())
}

/// First index of the largest value (ties break low, matching the
/// decision rule used everywhere else).
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
