//! Dataset assembly and the on-disk frame format.
//!
//! Assembly runs synthesis → preprocessing per class until the configured
//! frame budget is met, then splits at *waveform* granularity (frames cut
//! from one burst never straddle the train/test boundary), stratified by
//! (class, SNR value). Frame values are quantized to f32 at assembly time
//! so in-memory data and data re-loaded from disk are bit-identical.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use radlab_core::preprocess::{preprocess_waveform, Frame, PreprocessConfig};
use radlab_core::rng::stream;
use radlab_core::signal::build_dataset;

use crate::config::{DataConfig, ExperimentConfig, TaskConfig};
use crate::LabError;

/// Hard ceiling on synthesis attempts per class; reaching it means the
/// frame budget is unreachable for this waveform geometry.
const MAX_WAVEFORMS_PER_CLASS: usize = 1 << 16;

/// RNG stream tag for the train/test shuffle.
const SPLIT_STREAM: u64 = 9;

#[derive(Clone, Debug)]
pub struct TaskData {
    pub task_id: usize,
    pub train: Vec<Frame>,
    pub test: Vec<Frame>,
}

pub fn preprocess_config_for(task: &TaskConfig, data: &DataConfig) -> PreprocessConfig {
    PreprocessConfig {
        carrier_hz: task.carrier_hz,
        sample_rate_hz: task.sample_rate_hz,
        bandwidth_hz: task.bandwidth_hz,
        frame_width: data.frame_width,
        overlap_fraction: task.overlap_fraction,
    }
}

/// f32 quantization: the canonical numeric form of a frame everywhere
/// (training, checkpoint evaluation, disk round-trips).
fn quantize(frame: &mut Frame) {
    for v in &mut frame.values {
        *v = *v as f32 as f64;
    }
}

/// Builds one task's train/test frame sets. Deterministic in
/// (config, seed): synthesis indices are prefix-stable, so growing the
/// waveform count to reach the frame budget never perturbs earlier samples.
pub fn build_task_data(cfg: &ExperimentConfig, task_id: usize) -> Result<TaskData, LabError> {
    let task = &cfg.tasks[task_id];
    let pp = preprocess_config_for(task, &cfg.data);
    pp.validate()?;
    let grid = cfg.data.snr_grid();
    let grid_vals = grid.values();
    let target = cfg.data.frames_per_class;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in task.class_specs() {
        // Grow the waveform count until the frame budget is met, keeping a
        // deterministic prefix; the final pass stops mid-list once covered.
        let mut n = (target / 2).max(8);
        let groups: Vec<(usize, Vec<Frame>)> = loop {
            let waves = build_dataset(task_id, std::slice::from_ref(&class), n, &grid, cfg.seed)?;
            let mut groups = Vec::with_capacity(waves.len());
            let mut total = 0usize;
            for w in &waves {
                let mut frames = preprocess_waveform(w, &pp)?;
                for f in &mut frames {
                    quantize(f);
                }
                total += frames.len();
                let stratum = grid_vals
                    .iter()
                    .position(|&v| v == w.snr_db)
                    .ok_or_else(|| LabError::Data("waveform SNR off the grid".into()))?;
                groups.push((stratum, frames));
                if total >= target {
                    break;
                }
            }
            if total >= target {
                break groups;
            }
            if n >= MAX_WAVEFORMS_PER_CLASS {
                return Err(LabError::Data(format!(
                    "class {}: {total} frames from {n} waveforms, target {target} unreachable",
                    class.label
                )));
            }
            n = (n * 2).min(MAX_WAVEFORMS_PER_CLASS);
        };

        // Stratified split: shuffle each (class, SNR) bucket of waveforms,
        // send the head to test.
        let mut by_stratum: Vec<Vec<Vec<Frame>>> = vec![Vec::new(); grid_vals.len()];
        for (s, frames) in groups {
            if !frames.is_empty() {
                by_stratum[s].push(frames);
            }
        }
        let mut class_train: Vec<Vec<Frame>> = Vec::new();
        let mut class_test: Vec<Vec<Frame>> = Vec::new();
        for (s, mut bucket) in by_stratum.into_iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let mut rng =
                stream(cfg.seed, &[SPLIT_STREAM, task_id as u64, class.label as u64, s as u64]);
            bucket.shuffle(&mut rng);
            let n_test = (bucket.len() as f64 * cfg.data.test_fraction).round() as usize;
            for (i, frames) in bucket.into_iter().enumerate() {
                if i < n_test {
                    class_test.push(frames);
                } else {
                    class_train.push(frames);
                }
            }
        }
        // Rounding can starve the test side when buckets are tiny; every
        // class must still be measurable.
        if class_test.is_empty() {
            if class_train.len() < 2 {
                return Err(LabError::Data(format!(
                    "class {}: too few waveforms to split",
                    class.label
                )));
            }
            class_test.push(class_train.pop().expect("nonempty"));
        }
        for g in class_train {
            train.extend(g);
        }
        for g in class_test {
            test.extend(g);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(LabError::Data("empty split; raise frames_per_class".into()));
    }
    Ok(TaskData { task_id, train, test })
}

pub fn build_all_tasks(cfg: &ExperimentConfig) -> Result<Vec<TaskData>, LabError> {
    (0..cfg.tasks.len()).map(|t| build_task_data(cfg, t)).collect()
}

// ---------------------------------------------------------------------------
// FRM1: self-contained binary frame container.
//
// magic "FRM1" | u16 version | u16 reserved | u32 n_frames | u32 frame_width
// then per frame: u32 class_label | u32 task_id | f64 snr_db | width x f32
// then a trailing SHA-256 of every preceding byte. All little-endian.
// ---------------------------------------------------------------------------

const FRAME_MAGIC: &[u8; 4] = b"FRM1";
const FRAME_VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;
const HEADER_LEN: usize = 16;

pub fn frames_path(dir: &Path, task_id: usize, split: &str) -> PathBuf {
    dir.join(format!("task{task_id}_{split}.frm"))
}

pub fn write_frames(path: &Path, frames: &[Frame]) -> Result<(), LabError> {
    let width = frames.first().map(|f| f.values.len()).unwrap_or(0);
    if frames.iter().any(|f| f.values.len() != width) {
        return Err(LabError::Data("ragged frame widths".into()));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + frames.len() * (16 + width * 4) + DIGEST_LEN);
    buf.extend_from_slice(FRAME_MAGIC);
    buf.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    for f in frames {
        buf.extend_from_slice(&(f.class_label as u32).to_le_bytes());
        buf.extend_from_slice(&(f.task_id as u32).to_le_bytes());
        buf.extend_from_slice(&f.snr_db.to_le_bytes());
        for &v in &f.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    std::fs::write(path, &buf)?;
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<Vec<Frame>, LabError> {
    let buf = std::fs::read(path)?;
    if buf.len() < HEADER_LEN + DIGEST_LEN {
        return Err(LabError::Data(format!("{}: truncated frame file", path.display())));
    }
    let (body, tail) = buf.split_at(buf.len() - DIGEST_LEN);
    if Sha256::digest(body)[..] != tail[..] {
        return Err(LabError::Data(format!("{}: checksum mismatch", path.display())));
    }
    if &body[0..4] != FRAME_MAGIC {
        return Err(LabError::Data(format!("{}: not an FRM1 file", path.display())));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != FRAME_VERSION {
        return Err(LabError::Data(format!(
            "{}: unsupported frame file version {version}",
            path.display()
        )));
    }
    let n = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let width = u32::from_le_bytes(body[12..16].try_into().expect("4 bytes")) as usize;
    let record = 16 + width * 4;
    if body.len() != HEADER_LEN + n * record {
        return Err(LabError::Data(format!("{}: length mismatch", path.display())));
    }
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let at = HEADER_LEN + i * record;
        let class_label = u32::from_le_bytes(body[at..at + 4].try_into().expect("4 bytes")) as usize;
        let task_id = u32::from_le_bytes(body[at + 4..at + 8].try_into().expect("4 bytes")) as usize;
        let snr_db = f64::from_le_bytes(body[at + 8..at + 16].try_into().expect("8 bytes"));
        let mut values = Vec::with_capacity(width);
        for k in 0..width {
            let v = at + 16 + k * 4;
            values.push(f32::from_le_bytes(body[v..v + 4].try_into().expect("4 bytes")) as f64);
        }
        frames.push(Frame { values, class_label, task_id, snr_db });
    }
    Ok(frames)
}

/// Writes both splits of every task into `dir` using the standard layout.
pub fn write_dataset(dir: &Path, tasks: &[TaskData]) -> Result<(), LabError> {
    std::fs::create_dir_all(dir)?;
    for t in tasks {
        write_frames(&frames_path(dir, t.task_id, "train"), &t.train)?;
        write_frames(&frames_path(dir, t.task_id, "test"), &t.test)?;
    }
    Ok(())
}

/// Loads the standard layout back; `n_tasks` from the config.
pub fn read_dataset(dir: &Path, n_tasks: usize) -> Result<Vec<TaskData>, LabError> {
    (0..n_tasks)
        .map(|t| {
            Ok(TaskData {
                task_id: t,
                train: read_frames(&frames_path(dir, t, "train"))?,
                test: read_frames(&frames_path(dir, t, "test"))?,
            })
        })
        .collect()
}
