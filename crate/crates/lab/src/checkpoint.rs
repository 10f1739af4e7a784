//! The RLCK checkpoint container.
//!
//! One file archives a finished run: a TOML manifest (config hash, layer
//! table, per-task records), the backbone values as f32, per-task owned and
//! adaptive masks as bitsets, per-task head parameters as f64, and a
//! trailing SHA-256 over everything before it. Backbone values are
//! quantized to f32 on save *and* during training-side evaluation, so a
//! loaded checkpoint reproduces inference bit for bit.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "RLCK" | u16 version | u16 reserved | u32 manifest_len | manifest TOML
//! backbone: per layer (manifest order), rows*cols f32
//! per task (manifest order):
//!     theta bitset, adaptive bitset   (per layer, LSB-first, byte-padded)
//!     head: per head layer, rows*cols f64
//! SHA-256 digest (32 bytes)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use radlab_core::lps::TensorMap;
use radlab_core::nn::{MaskableParam, ParamSet, Tensor};

use crate::config::Variant;
use crate::LabError;

const MAGIC: &[u8; 4] = b"RLCK";
const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskEntry {
    pub id: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Global class labels this task's head scores, in head-output order.
    pub labels: Vec<usize>,
    pub head: Vec<LayerEntry>,
}

/// Everything evaluation needs beyond the raw arrays, so `eval` can run
/// from the checkpoint and a frame file alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub variant: Variant,
    pub seed: u64,
    pub input_width: usize,
    pub feature_dim: usize,
    pub nu: f64,
    pub t_eval: usize,
    pub coverage_target: f64,
    pub snr_bin_width_db: f64,
    pub cumulative_alpha: f64,
    /// The experiment's task → global-label grouping, kept even for ST
    /// archives (whose single head spans every group) so reports can break
    /// recall out per task.
    pub label_groups: Vec<Vec<usize>>,
    pub layers: Vec<LayerEntry>,
    #[serde(rename = "task")]
    pub tasks: Vec<TaskEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: Manifest,
    /// Backbone values (f32-quantized); freeze flags are not archived.
    pub backbone: TensorMap,
    /// Per task: 0/1 masks over every backbone layer.
    pub theta_masks: Vec<TensorMap>,
    pub adaptive_masks: Vec<TensorMap>,
    /// Per task: head parameters, exact f64.
    pub heads: Vec<ParamSet>,
}

impl Checkpoint {
    /// Effective backbone for one archived task: stored values through the
    /// union of the task's owned and adaptive-reuse supports.
    pub fn composed_params(&self, task_idx: usize) -> Result<TensorMap, LabError> {
        let theta = self
            .theta_masks
            .get(task_idx)
            .ok_or_else(|| LabError::Data(format!("no task {task_idx} in checkpoint")))?;
        let adaptive = &self.adaptive_masks[task_idx];
        let mut out = TensorMap::new();
        for (name, values) in &self.backbone {
            let m = &theta[name];
            let a = &adaptive[name];
            let mut eff = values.clone();
            for (i, v) in eff.data_mut().iter_mut().enumerate() {
                let keep = m.data()[i] != 0.0 || a.data()[i] != 0.0;
                if !keep {
                    *v = 0.0;
                }
            }
            out.insert(name.clone(), eff);
        }
        Ok(out)
    }

    pub fn task_entry(&self, task_idx: usize) -> Result<&TaskEntry, LabError> {
        self.manifest
            .tasks
            .get(task_idx)
            .ok_or_else(|| LabError::Data(format!("no task {task_idx} in checkpoint")))
    }
}

/// f32 round-trip applied to every backbone entry; the canonical numeric
/// form shared by the archive and by training-side evaluation.
pub fn quantize_map(map: &TensorMap) -> TensorMap {
    map.iter()
        .map(|(k, t)| (k.clone(), t.map(|v| v as f32 as f64)))
        .collect()
}

fn layer_table(map: &TensorMap) -> Vec<LayerEntry> {
    map.iter()
        .map(|(name, t)| LayerEntry { name: name.clone(), rows: t.rows(), cols: t.cols() })
        .collect()
}

/// The value tensors of a parameter set, keyed by layer name.
pub fn set_values(set: &ParamSet) -> TensorMap {
    set.iter().map(|(name, p)| (name.clone(), p.values.clone())).collect()
}

/// Builds the archive from training-side state. Mask maps must cover every
/// backbone layer; head sets are archived as-is.
pub fn build(
    manifest_base: Manifest,
    backbone: &TensorMap,
    theta_masks: Vec<TensorMap>,
    adaptive_masks: Vec<TensorMap>,
    heads: Vec<ParamSet>,
) -> Checkpoint {
    let backbone = quantize_map(backbone);
    let mut manifest = manifest_base;
    manifest.layers = layer_table(&backbone);
    for (entry, head) in manifest.tasks.iter_mut().zip(&heads) {
        entry.head = layer_table(&set_values(head));
    }
    Checkpoint { manifest, backbone, theta_masks, adaptive_masks, heads }
}

fn push_bitset(buf: &mut Vec<u8>, mask: &Tensor) {
    let bits = mask.data();
    let mut byte = 0u8;
    for (i, &b) in bits.iter().enumerate() {
        if b != 0.0 {
            byte |= 1 << (i % 8);
        }
        if i % 8 == 7 {
            buf.push(byte);
            byte = 0;
        }
    }
    if bits.len() % 8 != 0 {
        buf.push(byte);
    }
}

fn read_bitset(body: &[u8], at: &mut usize, rows: usize, cols: usize) -> Result<Tensor, LabError> {
    let n = rows * cols;
    let n_bytes = n.div_ceil(8);
    let slice = body
        .get(*at..*at + n_bytes)
        .ok_or_else(|| LabError::Data("checkpoint truncated in mask section".into()))?;
    *at += n_bytes;
    let mut t = Tensor::zeros(rows, cols);
    for (i, v) in t.data_mut().iter_mut().enumerate() {
        if slice[i / 8] >> (i % 8) & 1 == 1 {
            *v = 1.0;
        }
    }
    Ok(t)
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<(), LabError> {
    let manifest =
        toml::to_string(&ckpt.manifest).map_err(|e| LabError::Data(e.to_string()))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    buf.extend_from_slice(manifest.as_bytes());

    for entry in &ckpt.manifest.layers {
        let t = &ckpt.backbone[&entry.name];
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for (i, entry) in ckpt.manifest.tasks.iter().enumerate() {
        for layer in &ckpt.manifest.layers {
            push_bitset(&mut buf, &ckpt.theta_masks[i][&layer.name]);
        }
        for layer in &ckpt.manifest.layers {
            push_bitset(&mut buf, &ckpt.adaptive_masks[i][&layer.name]);
        }
        for layer in &entry.head {
            let p = ckpt.heads[i]
                .get(&layer.name)
                .ok_or_else(|| LabError::Data(format!("head layer {} missing", layer.name)))?;
            for &v in p.values.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    std::fs::write(path, &buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, LabError> {
    let buf = std::fs::read(path)?;
    if buf.len() < 12 + DIGEST_LEN {
        return Err(LabError::Data(format!("{}: truncated checkpoint", path.display())));
    }
    let (body, tail) = buf.split_at(buf.len() - DIGEST_LEN);
    if Sha256::digest(body)[..] != tail[..] {
        return Err(LabError::Data(format!("{}: checksum mismatch", path.display())));
    }
    if &body[0..4] != MAGIC {
        return Err(LabError::Data(format!("{}: not an RLCK checkpoint", path.display())));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != VERSION {
        return Err(LabError::Data(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let manifest_len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let manifest_bytes = body
        .get(12..12 + manifest_len)
        .ok_or_else(|| LabError::Data("checkpoint truncated in manifest".into()))?;
    let manifest_text = std::str::from_utf8(manifest_bytes)
        .map_err(|_| LabError::Data("manifest is not UTF-8".into()))?;
    let manifest: Manifest =
        toml::from_str(manifest_text).map_err(|e| LabError::Data(format!("manifest: {e}")))?;

    let mut at = 12 + manifest_len;
    let mut backbone = TensorMap::new();
    for layer in &manifest.layers {
        let n = layer.rows * layer.cols;
        let slice = body
            .get(at..at + n * 4)
            .ok_or_else(|| LabError::Data("checkpoint truncated in backbone".into()))?;
        at += n * 4;
        let mut t = Tensor::zeros(layer.rows, layer.cols);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = f32::from_le_bytes(slice[i * 4..i * 4 + 4].try_into().expect("4 bytes")) as f64;
        }
        backbone.insert(layer.name.clone(), t);
    }

    let mut theta_masks = Vec::with_capacity(manifest.tasks.len());
    let mut adaptive_masks = Vec::with_capacity(manifest.tasks.len());
    let mut heads = Vec::with_capacity(manifest.tasks.len());
    for entry in &manifest.tasks {
        let mut theta = TensorMap::new();
        for layer in &manifest.layers {
            theta.insert(layer.name.clone(), read_bitset(body, &mut at, layer.rows, layer.cols)?);
        }
        let mut adaptive = TensorMap::new();
        for layer in &manifest.layers {
            adaptive
                .insert(layer.name.clone(), read_bitset(body, &mut at, layer.rows, layer.cols)?);
        }
        let mut head = ParamSet::new();
        for layer in &entry.head {
            let n = layer.rows * layer.cols;
            let slice = body
                .get(at..at + n * 8)
                .ok_or_else(|| LabError::Data("checkpoint truncated in head".into()))?;
            at += n * 8;
            let mut t = Tensor::zeros(layer.rows, layer.cols);
            for (i, v) in t.data_mut().iter_mut().enumerate() {
                *v = f64::from_le_bytes(slice[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
            }
            head.insert(MaskableParam::new(layer.name.clone(), t));
        }
        theta_masks.push(theta);
        adaptive_masks.push(adaptive);
        heads.push(head);
    }
    if at != body.len() {
        return Err(LabError::Data(format!(
            "{}: {} trailing bytes after last section",
            path.display(),
            body.len() - at
        )));
    }
    Ok(Checkpoint { manifest, backbone, theta_masks, adaptive_masks, heads })
}
