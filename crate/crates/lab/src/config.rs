//! Experiment configuration: one TOML file drives synthesis, training,
//! evaluation and reporting. Everything a run needs is in here, so the
//! config hash plus the seed pin the entire artifact chain.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use radlab_core::lps::AdmmConfig;
use radlab_core::signal::{ClassSpec, Family, Jitter, Scheme, SnrGrid};

use crate::LabError;

/// Model variants. `ST_*` train once on the union of all tasks; the
/// lifelong variants train task-by-task behind LPS masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum Variant {
    ST_Linear,
    ST_Bayesian,
    ST_Evidential,
    LPS,
    BLC,
    ELC,
}

impl Variant {
    pub fn is_lifelong(self) -> bool {
        matches!(self, Variant::LPS | Variant::BLC | Variant::ELC)
    }

    /// The single-task counterpart trained on the task union.
    pub fn st_equivalent(self) -> Variant {
        match self {
            Variant::LPS => Variant::ST_Linear,
            Variant::BLC => Variant::ST_Bayesian,
            Variant::ELC => Variant::ST_Evidential,
            st => st,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Modulation scheme in config form; mirrors the synthesis catalog.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    CoherentPulseTrain,
    Barker { length: usize },
    PolyphaseBarker { length: usize },
    Frank { m: usize },
    Lfm,
    P0n,
    ZadoffChu { root: u32, length: usize },
}

impl From<SchemeSpec> for Scheme {
    fn from(s: SchemeSpec) -> Scheme {
        match s {
            SchemeSpec::CoherentPulseTrain => Scheme::CoherentPulseTrain,
            SchemeSpec::Barker { length } => Scheme::Barker { length },
            SchemeSpec::PolyphaseBarker { length } => Scheme::PolyphaseBarker { length },
            SchemeSpec::Frank { m } => Scheme::Frank { m },
            SchemeSpec::Lfm => Scheme::Lfm,
            SchemeSpec::P0n => Scheme::P0n,
            SchemeSpec::ZadoffChu { root, length } => Scheme::ZadoffChu { root, length },
        }
    }
}

/// One emitter class inside a task. Timing jitter ranges are inclusive;
/// `[x, x]` pins the parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassConfig {
    /// Global class label, unique across the whole experiment.
    pub label: usize,
    pub scheme: SchemeSpec,
    pub pulse_width_us: [f64; 2],
    pub pri_us: [f64; 2],
    pub pulses: [u32; 2],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    RadCharLike,
    RadNistLike,
}

impl From<FamilyConfig> for Family {
    fn from(f: FamilyConfig) -> Family {
        match f {
            FamilyConfig::RadCharLike => Family::RadCharLike,
            FamilyConfig::RadNistLike => Family::RadNistLike,
        }
    }
}

/// One task: a radio front-end plus its class catalog.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskConfig {
    pub name: String,
    pub family: FamilyConfig,
    pub sample_rate_hz: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub overlap_fraction: f64,
    #[serde(rename = "class")]
    pub classes: Vec<ClassConfig>,
}

impl TaskConfig {
    pub fn labels(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.label).collect()
    }

    /// Position of a global label inside this task's head.
    pub fn local_index(&self, label: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.label == label)
    }

    pub fn class_specs(&self) -> Vec<ClassSpec> {
        self.classes
            .iter()
            .map(|c| ClassSpec {
                label: c.label,
                family: self.family.into(),
                scheme: c.scheme.into(),
                pulse_width_s: Jitter::new(c.pulse_width_us[0] * 1e-6, c.pulse_width_us[1] * 1e-6),
                pri_s: Jitter::new(c.pri_us[0] * 1e-6, c.pri_us[1] * 1e-6),
                pulses_per_burst: Jitter::new(c.pulses[0] as f64, c.pulses[1] as f64),
                bandwidth_hz: self.bandwidth_hz,
                sample_rate_hz: self.sample_rate_hz,
                carrier_offset_hz: self.carrier_hz,
            })
            .collect()
    }
}

/// Training protocol knobs (per task for lifelong variants; the ST variants
/// spend `admm_epochs + finetune_epochs` on the union).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Per-task parameter budgets; Σ ≤ 1.
    pub alpha: Vec<f64>,
    /// Reuse-mask budget (fraction of the prior owned support).
    pub beta: f64,
    /// Pessimism of the evidential expected-utility blend.
    pub nu: f64,
    pub prototypes_per_class: usize,
    /// Isotropic spread of prototypes around their class mean at init.
    pub prototype_noise_std: f64,
    /// Gated-KL weight, annealed linearly over the first half of a task's
    /// epochs.
    pub lambda_kl: f64,
    /// Backbone warm-up epochs before prototype initialization
    /// (evidential variants only).
    pub warmup_epochs: usize,
    pub admm_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Monte-Carlo draws for the variational head: training / evaluation.
    pub t_train: usize,
    pub t_eval: usize,
    pub coverage_target: f64,
    pub feature_dim: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdmmSection {
    pub rho: f64,
    pub tau: f64,
    pub update_interval: usize,
}

impl From<AdmmSection> for AdmmConfig {
    fn from(a: AdmmSection) -> AdmmConfig {
        AdmmConfig { rho: a.rho, tau_admm: a.tau, update_interval: a.update_interval }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataConfig {
    /// Frame count target per class (generation stops once reached).
    pub frames_per_class: usize,
    pub test_fraction: f64,
    pub snr_start_db: f64,
    pub snr_stop_db: f64,
    pub snr_step_db: f64,
    /// Width of one training frame in real (interleaved I/Q) samples.
    pub frame_width: usize,
    /// Bin width for the SNR-resolved report table.
    pub snr_bin_width_db: f64,
}

impl DataConfig {
    pub fn snr_grid(&self) -> SnrGrid {
        SnrGrid {
            start_db: self.snr_start_db,
            stop_db: self.snr_stop_db,
            step_db: self.snr_step_db,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    pub admm: AdmmSection,
    pub data: DataConfig,
    #[serde(rename = "task")]
    pub tasks: Vec<TaskConfig>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Total number of classes across all tasks; labels must be exactly
    /// 0..n (validated).
    pub fn n_classes_total(&self) -> usize {
        self.tasks.iter().map(|t| t.classes.len()).sum()
    }

    /// All (task_id, label) pairs in declaration order.
    pub fn global_labels(&self) -> Vec<usize> {
        self.tasks.iter().flat_map(|t| t.labels()).collect()
    }

    /// SHA-256 of the canonical serialized form; whitespace and comments in
    /// the source file do not affect it.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let p = &self.protocol;
        if self.tasks.is_empty() {
            return Err(LabError::Config("at least one task required".into()));
        }
        if self.variant.is_lifelong() {
            if p.alpha.len() != self.tasks.len() {
                return Err(LabError::Config(format!(
                    "alpha list has {} entries for {} tasks",
                    p.alpha.len(),
                    self.tasks.len()
                )));
            }
            let total: f64 = p.alpha.iter().sum();
            if total > 1.0 + 1e-12 {
                return Err(LabError::Config(format!("alpha sums to {total} > 1")));
            }
            if p.alpha.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
                return Err(LabError::Config("every alpha must lie in (0, 1]".into()));
            }
        }
        if !(0.0..=1.0).contains(&p.beta) {
            return Err(LabError::Config("beta must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&p.nu) {
            return Err(LabError::Config("nu must lie in [0, 1]".into()));
        }
        if !(p.coverage_target > 0.0 && p.coverage_target <= 1.0) {
            return Err(LabError::Config("coverage_target must lie in (0, 1]".into()));
        }
        if p.prototypes_per_class == 0
            || p.batch_size == 0
            || p.t_train == 0
            || p.t_eval == 0
            || p.feature_dim == 0
            || p.admm_epochs == 0
        {
            return Err(LabError::Config(
                "prototypes_per_class, batch_size, t_train, t_eval, feature_dim \
                 and admm_epochs must all be >= 1"
                    .into(),
            ));
        }
        if !(p.learning_rate > 0.0) || !(0.0..1.0).contains(&p.momentum) {
            return Err(LabError::Config("bad learning_rate / momentum".into()));
        }
        if self.admm.update_interval == 0 {
            return Err(LabError::Config("admm update_interval must be >= 1".into()));
        }
        let d = &self.data;
        if d.frames_per_class == 0 {
            return Err(LabError::Config("frames_per_class must be >= 1".into()));
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(LabError::Config("test_fraction must lie in (0, 1)".into()));
        }
        if !(d.snr_bin_width_db > 0.0) {
            return Err(LabError::Config("snr_bin_width_db must be > 0".into()));
        }
        d.snr_grid().validate().map_err(|e| LabError::Config(e.to_string()))?;

        // Global labels must be exactly 0..n, disjoint across tasks.
        let mut labels = self.global_labels();
        labels.sort_unstable();
        let expected: Vec<usize> = (0..self.n_classes_total()).collect();
        if labels != expected {
            return Err(LabError::Config(
                "class labels must be unique across tasks and cover 0..n".into(),
            ));
        }
        for t in &self.tasks {
            if t.classes.is_empty() {
                return Err(LabError::Config(format!("task {} has no classes", t.name)));
            }
            if !(0.0..1.0).contains(&t.overlap_fraction) {
                return Err(LabError::Config("overlap_fraction must be in [0, 1)".into()));
            }
            crate::data::preprocess_config_for(t, &self.data)
                .validate()
                .map_err(|e| LabError::Config(format!("task {}: {e}", t.name)))?;
            for c in &t.classes {
                if c.pulse_width_us[0] > c.pulse_width_us[1]
                    || c.pri_us[0] > c.pri_us[1]
                    || c.pulses[0] > c.pulses[1]
                {
                    return Err(LabError::Config(format!(
                        "inverted jitter range on class {}",
                        c.label
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Canned experiment configurations. `desk` is the full default experiment
/// (mirrored by `configs/desk.toml`); the others are scaled for tests.
pub mod presets {
    use super::*;

    struct ClassRow(SchemeSpec, [f64; 2], [f64; 2], [u32; 2]);

    fn classes(rows: &[ClassRow], label_start: usize, take: usize) -> Vec<ClassConfig> {
        rows.iter()
            .take(take)
            .enumerate()
            .map(|(i, row)| ClassConfig {
                label: label_start + i,
                scheme: row.0,
                pulse_width_us: row.1,
                pri_us: row.2,
                pulses: row.3,
            })
            .collect()
    }

    /// Narrowband pulse-train catalog: identical timing envelopes so the
    /// classes differ only in intra-pulse modulation.
    fn radchar_task(label_start: usize, take: usize, overlap: f64) -> TaskConfig {
        let rows = [
            ClassRow(SchemeSpec::CoherentPulseTrain, [10.0, 16.0], [20.0, 28.0], [5, 7]),
            ClassRow(SchemeSpec::Lfm, [10.0, 16.0], [20.0, 28.0], [5, 7]),
            ClassRow(SchemeSpec::Barker { length: 13 }, [10.0, 16.0], [20.0, 28.0], [5, 7]),
            ClassRow(SchemeSpec::PolyphaseBarker { length: 13 }, [10.0, 16.0], [20.0, 28.0], [5, 7]),
            ClassRow(SchemeSpec::Frank { m: 4 }, [10.0, 16.0], [20.0, 28.0], [5, 7]),
        ];
        TaskConfig {
            name: "narrowband".into(),
            family: FamilyConfig::RadCharLike,
            sample_rate_hz: 3.2e6,
            bandwidth_hz: 1.6e6,
            carrier_hz: 0.8e6,
            overlap_fraction: overlap,
            classes: classes(&rows, label_start, take),
        }
    }

    /// Wideband catalog on a different front-end; polyphase-heavy.
    fn radnist_task(label_start: usize, take: usize, overlap: f64) -> TaskConfig {
        let rows = [
            ClassRow(SchemeSpec::P0n, [10.0, 14.0], [20.0, 30.0], [3, 4]),
            ClassRow(SchemeSpec::ZadoffChu { root: 1, length: 63 }, [10.0, 14.0], [20.0, 30.0], [3, 4]),
            ClassRow(SchemeSpec::Barker { length: 13 }, [10.0, 14.0], [20.0, 30.0], [3, 4]),
            ClassRow(SchemeSpec::Frank { m: 4 }, [10.0, 14.0], [20.0, 30.0], [3, 4]),
            ClassRow(SchemeSpec::ZadoffChu { root: 5, length: 63 }, [10.0, 14.0], [20.0, 30.0], [3, 4]),
        ];
        TaskConfig {
            name: "wideband".into(),
            family: FamilyConfig::RadNistLike,
            sample_rate_hz: 10.0e6,
            bandwidth_hz: 2.5e6,
            carrier_hz: 2.0e6,
            overlap_fraction: overlap,
            classes: classes(&rows, label_start, take),
        }
    }

    /// The default two-task heterogeneous experiment at full desk scale.
    pub fn desk(variant: Variant, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            variant,
            seed,
            protocol: ProtocolConfig {
                alpha: vec![0.5, 0.5],
                beta: 0.2,
                nu: 0.9,
                prototypes_per_class: 20,
                prototype_noise_std: 0.1,
                lambda_kl: 10.0,
                warmup_epochs: 3,
                admm_epochs: 60,
                finetune_epochs: 20,
                learning_rate: 1e-3,
                momentum: 0.9,
                batch_size: 64,
                t_train: 4,
                t_eval: 20,
                coverage_target: 0.8,
                feature_dim: 32,
            },
            admm: AdmmSection { rho: 1e-2, tau: 1e-2, update_interval: 5 },
            data: DataConfig {
                frames_per_class: 1000,
                test_fraction: 0.2,
                snr_start_db: -20.0,
                snr_stop_db: 18.0,
                snr_step_db: 2.0,
                frame_width: 256,
                snr_bin_width_db: 2.0,
            },
            tasks: vec![radchar_task(0, 5, 0.0), radnist_task(5, 5, 0.5)],
        }
    }

    /// Reduced two-task run sized for the acceptance suite's wall budget.
    pub fn acceptance(variant: Variant, seed: u64) -> ExperimentConfig {
        let mut cfg = desk(variant, seed);
        cfg.data.frames_per_class = 320;
        cfg.protocol.admm_epochs = 24;
        cfg.protocol.finetune_epochs = 8;
        cfg
    }

    /// Tiny two-task config for fast end-to-end plumbing tests.
    pub fn smoke(variant: Variant, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            variant,
            seed,
            protocol: ProtocolConfig {
                alpha: vec![0.3, 0.3],
                beta: 0.5,
                nu: 0.9,
                prototypes_per_class: 4,
                prototype_noise_std: 0.1,
                lambda_kl: 10.0,
                warmup_epochs: 1,
                admm_epochs: 4,
                finetune_epochs: 2,
                learning_rate: 1e-3,
                momentum: 0.9,
                batch_size: 32,
                t_train: 2,
                t_eval: 4,
                coverage_target: 0.8,
                feature_dim: 16,
            },
            admm: AdmmSection { rho: 1e-2, tau: 1e-2, update_interval: 2 },
            data: DataConfig {
                frames_per_class: 48,
                test_fraction: 0.2,
                snr_start_db: 5.0,
                snr_stop_db: 15.0,
                snr_step_db: 10.0,
                frame_width: 64,
                snr_bin_width_db: 10.0,
            },
            tasks: vec![radchar_task(0, 2, 0.0), radnist_task(2, 2, 0.5)],
        }
    }

    /// One easy high-SNR task with the whole parameter budget: the setting
    /// where a single-task lifelong run and the plain ST variant must agree.
    pub fn parity_toy(variant: Variant, seed: u64) -> ExperimentConfig {
        let mut cfg = smoke(variant, seed);
        cfg.protocol.alpha = vec![1.0];
        cfg.protocol.beta = 0.9;
        cfg.protocol.admm_epochs = 12;
        cfg.protocol.finetune_epochs = 4;
        cfg.data.frames_per_class = 200;
        cfg.data.snr_start_db = 10.0;
        cfg.data.snr_stop_db = 18.0;
        cfg.data.snr_step_db = 4.0;
        cfg.data.snr_bin_width_db = 4.0;
        cfg.tasks = vec![radchar_task(0, 2, 0.0)];
        cfg
    }
}
