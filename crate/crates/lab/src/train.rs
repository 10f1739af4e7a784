//! Training loops.
//!
//! Lifelong variants (LPS, BLC, ELC) train task by task: reinitialize the
//! free slice, run the task loss plus the ADMM penalty with periodic
//! projections, hard-prune into an owned mask, fine-tune the owned slice,
//! then archive the task head. Single-task variants train once on the
//! union of all tasks with the plain task loss. Every source of
//! randomness is a tagged stream off the experiment seed, so a (config,
//! seed) pair fixes the full artifact chain.
//!
//! Stream tags: 0 backbone init, 1 task reinit, 2 head init, 3 epoch
//! shuffles, 4 warm-up head init, 5 variational noise draws, 6 prototype
//! placement (7 is reserved by evaluation, 9 by the data split).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use radlab_core::bayesian::{self, VariationalLinear};
use radlab_core::evidential::annealed_lambda;
use radlab_core::evidential::head::{self as evhead, PrototypeBank};
use radlab_core::lps::{self, LifelongState, TaskContext, TensorMap};
use radlab_core::nn::classify::{self, LinearHead};
use radlab_core::nn::params::masked_grads;
use radlab_core::nn::{Network, ParamSet, SgdMomentum, Tape, Tensor, Var};
use radlab_core::preprocess::Frame;
use radlab_core::rng::{derive_seed, stream};

use crate::checkpoint::{self, Checkpoint, Manifest, TaskEntry};
use crate::config::{ExperimentConfig, Variant};
use crate::data::{self, TaskData};
use crate::LabError;

/// Forward chunk size for the pure (tape-free) passes.
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Linear,
    Evidential,
    Bayesian,
}

impl Variant {
    pub fn head_kind(self) -> HeadKind {
        match self {
            Variant::ST_Linear | Variant::LPS => HeadKind::Linear,
            Variant::ST_Bayesian | Variant::BLC => HeadKind::Bayesian,
            Variant::ST_Evidential | Variant::ELC => HeadKind::Evidential,
        }
    }
}

pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub ckpt_path: PathBuf,
    /// One archive per completed stage: after each task for lifelong runs,
    /// the final state only for single-task runs.
    pub stage_ckpts: Vec<PathBuf>,
    pub log_path: PathBuf,
    pub data_dir: PathBuf,
}

struct LogRow {
    task: usize,
    phase: &'static str,
    epoch: usize,
    loss: f64,
    penalty: f64,
    lr: f64,
}

/// Per-task constants shared by every optimization step of one phase.
struct Phase<'a> {
    net: &'a Network,
    kind: HeadKind,
    frames: &'a [Frame],
    label_of: &'a BTreeMap<usize, usize>,
    n_out: usize,
    batch_size: usize,
    nu: f64,
    t_train: usize,
    kl_weight: f64,
    seed: u64,
    task_tag: u64,
    phase_tag: u64,
}

pub fn run_training(cfg: &ExperimentConfig, run_dir: &Path) -> Result<RunArtifacts, LabError> {
    cfg.validate()?;
    std::fs::create_dir_all(run_dir)?;
    let tasks = data::build_all_tasks(cfg)?;
    let data_dir = run_dir.join("data");
    data::write_dataset(&data_dir, &tasks)?;

    let mut log = Vec::new();
    let (ckpt, stage_ckpts) = if cfg.variant.is_lifelong() {
        train_lifelong(cfg, &tasks, run_dir, &mut log)?
    } else {
        train_single(cfg, &tasks, run_dir, &mut log)?
    };
    let ckpt_path = run_dir.join("ckpt.rlck");
    checkpoint::save(&ckpt_path, &ckpt)?;
    let log_path = run_dir.join("train_log.csv");
    write_log(&log_path, cfg.variant, &log)?;
    Ok(RunArtifacts { run_dir: run_dir.to_path_buf(), ckpt_path, stage_ckpts, log_path, data_dir })
}

fn train_lifelong(
    cfg: &ExperimentConfig,
    tasks: &[TaskData],
    run_dir: &Path,
    log: &mut Vec<LogRow>,
) -> Result<(Checkpoint, Vec<PathBuf>), LabError> {
    let p = &cfg.protocol;
    let net = Network::residual_backbone(cfg.data.frame_width, p.feature_dim);
    let mut params = net.init_params(&mut stream(cfg.seed, &[0]));
    let mut state = LifelongState::new(&params);
    let kind = cfg.variant.head_kind();
    let total_epochs = p.admm_epochs + p.finetune_epochs;
    let mut stage_ckpts = Vec::new();

    for (t, td) in tasks.iter().enumerate() {
        let labels = cfg.tasks[t].labels();
        let label_of: BTreeMap<usize, usize> =
            labels.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let n_out = labels.len();
        let mut ctx = state.begin_task(
            &mut params,
            p.alpha[t],
            p.beta,
            cfg.admm.into(),
            derive_seed(cfg.seed, &[1]),
        )?;
        let kl_weight = 1.0 / td.train.len() as f64;

        let mut phase = Phase {
            net: &net,
            kind,
            frames: &td.train,
            label_of: &label_of,
            n_out,
            batch_size: p.batch_size,
            nu: p.nu,
            t_train: p.t_train,
            kl_weight,
            seed: cfg.seed,
            task_tag: t as u64,
            phase_tag: 0,
        };

        // Head initialization; the evidential head needs a warmed-up
        // feature space before prototypes can sit on class means.
        let mut head: ParamSet = match kind {
            HeadKind::Linear => {
                LinearHead::init(p.feature_dim, n_out, &mut stream(cfg.seed, &[2, t as u64]))
                    .to_param_set()
            }
            HeadKind::Bayesian => VariationalLinear::init(
                p.feature_dim,
                n_out,
                p.t_train,
                &mut stream(cfg.seed, &[2, t as u64]),
            )
            .to_param_set(),
            HeadKind::Evidential => {
                let warm = Phase { kind: HeadKind::Linear, ..phase };
                let mut warm_head = LinearHead::init(
                    p.feature_dim,
                    n_out,
                    &mut stream(cfg.seed, &[4, t as u64]),
                )
                .to_param_set();
                let mut opt_theta = SgdMomentum::new(p.learning_rate, p.momentum);
                let mut opt_adaptive = SgdMomentum::new(p.learning_rate, p.momentum);
                let mut opt_head = SgdMomentum::new(p.learning_rate, p.momentum);
                for e in 0..p.warmup_epochs {
                    let lr = cosine_lr(p.learning_rate, e, p.warmup_epochs);
                    set_lr(lr, [&mut opt_theta, &mut opt_adaptive, &mut opt_head]);
                    let order = shuffled(td.train.len(), cfg.seed, &[3, t as u64, 0, e as u64]);
                    let (loss, _) = admm_epoch(
                        &warm,
                        &mut params,
                        &mut ctx,
                        &mut warm_head,
                        &order,
                        e,
                        0.0,
                        false,
                        &mut opt_theta,
                        &mut opt_adaptive,
                        &mut opt_head,
                    )?;
                    log.push(LogRow { task: t, phase: "warmup", epoch: e, loss, penalty: 0.0, lr });
                }
                phase = Phase { kind, ..warm };
                let eff = effective_map_admm(&params, &ctx);
                let means =
                    class_means(&net, &eff, &td.train, &label_of, n_out, p.feature_dim)?;
                PrototypeBank::init(
                    &means,
                    p.prototypes_per_class,
                    p.prototype_noise_std,
                    &mut stream(cfg.seed, &[6, t as u64]),
                )
                .to_param_set()
            }
        };

        // ADMM phase: task loss + augmented penalty, projection on schedule.
        phase.phase_tag = 1;
        let mut opt_theta = SgdMomentum::new(p.learning_rate, p.momentum);
        let mut opt_adaptive = SgdMomentum::new(p.learning_rate, p.momentum);
        let mut opt_head = SgdMomentum::new(p.learning_rate, p.momentum);
        for e in 0..p.admm_epochs {
            let lr = cosine_lr(p.learning_rate, e, p.admm_epochs);
            set_lr(lr, [&mut opt_theta, &mut opt_adaptive, &mut opt_head]);
            let lambda_eff = annealed_lambda(p.lambda_kl, e, total_epochs);
            let order = shuffled(td.train.len(), cfg.seed, &[3, t as u64, 1, e as u64]);
            let (loss, penalty) = admm_epoch(
                &phase,
                &mut params,
                &mut ctx,
                &mut head,
                &order,
                e,
                lambda_eff,
                true,
                &mut opt_theta,
                &mut opt_adaptive,
                &mut opt_head,
            )?;
            if (e + 1) % ctx.admm.cfg.update_interval == 0 {
                lps::admm_project(&mut ctx, &params);
            }
            log.push(LogRow { task: t, phase: "admm", epoch: e, loss, penalty, lr });
        }

        // Prune to the owned slice, then fine-tune it with the reuse
        // contribution frozen at its binary mask.
        state.finalize_task(&mut params, ctx)?;
        state.check_mask_discipline()?;
        let (active, reuse) = {
            let part = state.partition(t)?;
            (part.theta_mask.clone(), lps::reuse_values(part, &params))
        };
        phase.phase_tag = 2;
        let mut opt_theta = SgdMomentum::new(p.learning_rate, p.momentum);
        let mut opt_head = SgdMomentum::new(p.learning_rate, p.momentum);
        for e in 0..p.finetune_epochs {
            let lr = cosine_lr(p.learning_rate, e, p.finetune_epochs);
            opt_theta.lr = lr;
            opt_head.lr = lr;
            let lambda_eff = annealed_lambda(p.lambda_kl, p.admm_epochs + e, total_epochs);
            let order = shuffled(td.train.len(), cfg.seed, &[3, t as u64, 2, e as u64]);
            let loss = simple_epoch(
                &phase,
                &mut params,
                Some((&active, &reuse)),
                &mut head,
                &order,
                e,
                lambda_eff,
                &mut opt_theta,
                &mut opt_head,
            )?;
            log.push(LogRow { task: t, phase: "finetune", epoch: e, loss, penalty: 0.0, lr });
        }
        state.attach_head(t, head)?;

        let stage = lifelong_checkpoint(cfg, &state, &params);
        let path = run_dir.join(format!("ckpt_task{t}.rlck"));
        checkpoint::save(&path, &stage)?;
        stage_ckpts.push(path);
    }
    Ok((lifelong_checkpoint(cfg, &state, &params), stage_ckpts))
}

fn train_single(
    cfg: &ExperimentConfig,
    tasks: &[TaskData],
    _run_dir: &Path,
    log: &mut Vec<LogRow>,
) -> Result<(Checkpoint, Vec<PathBuf>), LabError> {
    let p = &cfg.protocol;
    let net = Network::residual_backbone(cfg.data.frame_width, p.feature_dim);
    let mut params = net.init_params(&mut stream(cfg.seed, &[0]));
    let union: Vec<Frame> = tasks.iter().flat_map(|t| t.train.iter().cloned()).collect();
    let all_labels = cfg.global_labels();
    let label_of: BTreeMap<usize, usize> =
        all_labels.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let n_out = all_labels.len();
    let kind = cfg.variant.head_kind();
    let kl_weight = 1.0 / union.len() as f64;
    let total_epochs = p.admm_epochs + p.finetune_epochs;

    let mut phase = Phase {
        net: &net,
        kind,
        frames: &union,
        label_of: &label_of,
        n_out,
        batch_size: p.batch_size,
        nu: p.nu,
        t_train: p.t_train,
        kl_weight,
        seed: cfg.seed,
        task_tag: 0,
        phase_tag: 0,
    };

    let mut head: ParamSet = match kind {
        HeadKind::Linear => {
            LinearHead::init(p.feature_dim, n_out, &mut stream(cfg.seed, &[2, 0])).to_param_set()
        }
        HeadKind::Bayesian => {
            VariationalLinear::init(p.feature_dim, n_out, p.t_train, &mut stream(cfg.seed, &[2, 0]))
                .to_param_set()
        }
        HeadKind::Evidential => {
            let warm = Phase { kind: HeadKind::Linear, ..phase };
            let mut warm_head =
                LinearHead::init(p.feature_dim, n_out, &mut stream(cfg.seed, &[4, 0]))
                    .to_param_set();
            let mut opt_theta = SgdMomentum::new(p.learning_rate, p.momentum);
            let mut opt_head = SgdMomentum::new(p.learning_rate, p.momentum);
            for e in 0..p.warmup_epochs {
                let lr = cosine_lr(p.learning_rate, e, p.warmup_epochs);
                opt_theta.lr = lr;
                opt_head.lr = lr;
                let order = shuffled(union.len(), cfg.seed, &[3, 0, 0, e as u64]);
                let loss = simple_epoch(
                    &warm,
                    &mut params,
                    None,
                    &mut warm_head,
                    &order,
                    e,
                    0.0,
                    &mut opt_theta,
                    &mut opt_head,
                )?;
                log.push(LogRow { task: 0, phase: "warmup", epoch: e, loss, penalty: 0.0, lr });
            }
            phase = Phase { kind, ..warm };
            let eff = checkpoint::set_values(&params);
            let means = class_means(&net, &eff, &union, &label_of, n_out, p.feature_dim)?;
            PrototypeBank::init(
                &means,
                p.prototypes_per_class,
                p.prototype_noise_std,
                &mut stream(cfg.seed, &[6, 0]),
            )
            .to_param_set()
        }
    };

    phase.phase_tag = 1;
    let mut opt_theta = SgdMomentum::new(p.learning_rate, p.momentum);
    let mut opt_head = SgdMomentum::new(p.learning_rate, p.momentum);
    for e in 0..total_epochs {
        let lr = cosine_lr(p.learning_rate, e, total_epochs);
        opt_theta.lr = lr;
        opt_head.lr = lr;
        let lambda_eff = annealed_lambda(p.lambda_kl, e, total_epochs);
        let order = shuffled(union.len(), cfg.seed, &[3, 0, 1, e as u64]);
        let loss = simple_epoch(
            &phase,
            &mut params,
            None,
            &mut head,
            &order,
            e,
            lambda_eff,
            &mut opt_theta,
            &mut opt_head,
        )?;
        log.push(LogRow { task: 0, phase: "train", epoch: e, loss, penalty: 0.0, lr });
    }

    Ok((st_checkpoint(cfg, &params, head), Vec::new()))
}

/// One pass over the shuffled data with the ADMM composition
/// θ⊙free + prior⊙soft-adaptive; optionally adds the augmented penalty.
/// Returns (mean task loss, mean penalty).
#[allow(clippy::too_many_arguments)]
fn admm_epoch(
    ph: &Phase<'_>,
    params: &mut ParamSet,
    ctx: &mut TaskContext,
    head: &mut ParamSet,
    order: &[usize],
    epoch: usize,
    lambda_eff: f64,
    with_penalty: bool,
    opt_theta: &mut SgdMomentum,
    opt_adaptive: &mut SgdMomentum,
    opt_head: &mut SgdMomentum,
) -> Result<(f64, f64), LabError> {
    let mut loss_sum = 0.0;
    let mut pen_sum = 0.0;
    let mut steps = 0usize;
    for (step, chunk) in order.chunks(ph.batch_size).enumerate() {
        let (x, labels) = batch_of(ph.frames, chunk, ph.label_of);
        let mut tape = Tape::new();
        let theta_leaves = params.register_leaves(&mut tape);
        let adaptive_leaves = ctx.adaptive.register_leaves(&mut tape);
        let effective = lps::effective_leaves_admm(&mut tape, &theta_leaves, &adaptive_leaves, ctx);
        let xv = tape.constant(x);
        let features = ph.net.forward_on_tape(&mut tape, xv, &effective);
        let (task_loss, head_leaves) =
            task_loss_on_tape(&mut tape, features, head, ph, &labels, lambda_eff, epoch, step);
        let task_value = scalar_value(&tape, task_loss);
        let (loss, pen_value) = if with_penalty {
            let pen = lps::admm_penalty_on_tape(&mut tape, &theta_leaves, &adaptive_leaves, ctx);
            let pv = scalar_value(&tape, pen);
            (tape.add(task_loss, pen), pv)
        } else {
            (task_loss, 0.0)
        };
        let total = scalar_value(&tape, loss);
        if !total.is_finite() {
            return Err(LabError::Numeric(format!(
                "loss diverged (task {}, epoch {epoch}, step {step})",
                ph.task_tag
            )));
        }
        let grads = tape.backward(loss);
        let g_theta = masked_grads(params, &theta_leaves, &grads);
        let g_adaptive = masked_grads(&ctx.adaptive, &adaptive_leaves, &grads);
        let g_head = masked_grads(head, &head_leaves, &grads);
        opt_theta.step(params, &g_theta);
        opt_adaptive.step(&mut ctx.adaptive, &g_adaptive);
        lps::clamp_adaptive(&mut ctx.adaptive);
        opt_head.step(head, &g_head);
        loss_sum += task_value;
        pen_sum += pen_value;
        steps += 1;
    }
    Ok((loss_sum / steps as f64, pen_sum / steps as f64))
}

/// One pass with a fixed composition: `masked` = (owned mask, frozen reuse
/// values) for a finalized task's fine-tune, `None` = the raw backbone
/// (single-task training). No ADMM terms.
#[allow(clippy::too_many_arguments)]
fn simple_epoch(
    ph: &Phase<'_>,
    params: &mut ParamSet,
    masked: Option<(&TensorMap, &TensorMap)>,
    head: &mut ParamSet,
    order: &[usize],
    epoch: usize,
    lambda_eff: f64,
    opt_theta: &mut SgdMomentum,
    opt_head: &mut SgdMomentum,
) -> Result<f64, LabError> {
    let mut loss_sum = 0.0;
    let mut steps = 0usize;
    for (step, chunk) in order.chunks(ph.batch_size).enumerate() {
        let (x, labels) = batch_of(ph.frames, chunk, ph.label_of);
        let mut tape = Tape::new();
        let theta_leaves = params.register_leaves(&mut tape);
        let effective = match masked {
            Some((active, reuse)) => {
                lps::effective_leaves_masked(&mut tape, &theta_leaves, active, reuse)
            }
            None => theta_leaves.clone(),
        };
        let xv = tape.constant(x);
        let features = ph.net.forward_on_tape(&mut tape, xv, &effective);
        let (loss, head_leaves) =
            task_loss_on_tape(&mut tape, features, head, ph, &labels, lambda_eff, epoch, step);
        let value = scalar_value(&tape, loss);
        if !value.is_finite() {
            return Err(LabError::Numeric(format!(
                "loss diverged (task {}, epoch {epoch}, step {step})",
                ph.task_tag
            )));
        }
        let grads = tape.backward(loss);
        let g_theta = masked_grads(params, &theta_leaves, &grads);
        let g_head = masked_grads(head, &head_leaves, &grads);
        opt_theta.step(params, &g_theta);
        opt_head.step(head, &g_head);
        loss_sum += value;
        steps += 1;
    }
    Ok(loss_sum / steps as f64)
}

/// The variant's task loss for one batch; registers the head on the tape
/// and returns its leaves for the optimizer.
fn task_loss_on_tape(
    tape: &mut Tape,
    features: Var,
    head: &ParamSet,
    ph: &Phase<'_>,
    labels: &[usize],
    lambda_eff: f64,
    epoch: usize,
    step: usize,
) -> (Var, BTreeMap<String, Var>) {
    match ph.kind {
        HeadKind::Linear => {
            let (vars, leaves) = classify::HeadVars::register(head, tape);
            let logits = classify::logits_on_tape(tape, features, &vars);
            (classify::cross_entropy_on_tape(tape, logits, labels), leaves)
        }
        HeadKind::Evidential => {
            let (vars, leaves) = evhead::BankVars::register(head, tape);
            let utilities = evhead::utilities_on_tape(tape, features, &vars, ph.n_out, ph.nu);
            (evhead::elc_loss_on_tape(tape, utilities, labels, lambda_eff), leaves)
        }
        HeadKind::Bayesian => {
            let (vars, leaves) = bayesian::VariationalVars::register(head, tape);
            let seed = derive_seed(
                ph.seed,
                &[5, ph.task_tag, ph.phase_tag, epoch as u64, step as u64],
            );
            let eps =
                bayesian::sample_epsilons(tape.value(features).cols(), ph.n_out, ph.t_train, seed);
            (bayesian::bayes_loss_on_tape(tape, features, &vars, labels, &eps, ph.kl_weight), leaves)
        }
    }
}

// --- small shared pieces ---------------------------------------------------

fn scalar_value(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data()[0]
}

fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}

fn set_lr(lr: f64, opts: [&mut SgdMomentum; 3]) {
    for o in opts {
        o.lr = lr;
    }
}

fn shuffled(n: usize, seed: u64, tags: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, tags));
    order
}

/// Stacks the chosen frames into a [B, width] batch and maps their global
/// labels into head-local indices.
fn batch_of(
    frames: &[Frame],
    idx: &[usize],
    label_of: &BTreeMap<usize, usize>,
) -> (Tensor, Vec<usize>) {
    let width = frames[idx[0]].values.len();
    let mut x = Tensor::zeros(idx.len(), width);
    let mut labels = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        x.data_mut()[r * width..(r + 1) * width].copy_from_slice(&frames[i].values);
        labels.push(label_of[&frames[i].class_label]);
    }
    (x, labels)
}

/// The ADMM-phase composition as plain tensors (for tape-free forwards):
/// θ⊙free + prior⊙soft-adaptive.
fn effective_map_admm(params: &ParamSet, ctx: &TaskContext) -> TensorMap {
    params
        .iter()
        .map(|(name, p)| {
            let free = &ctx.free_mask[name];
            let soft = &ctx.adaptive.get(name).expect("adaptive layer").values;
            let mut eff = p.values.zip_map(free, |v, m| v * m);
            let borrowed = ctx.prior_theta[name].zip_map(soft, |v, m| v * m);
            eff.axpy(1.0, &borrowed);
            (name.clone(), eff)
        })
        .collect()
}

/// Mean feature vector per head-local class over the given frames.
fn class_means(
    net: &Network,
    effective: &TensorMap,
    frames: &[Frame],
    label_of: &BTreeMap<usize, usize>,
    n_classes: usize,
    feature_dim: usize,
) -> Result<Vec<Vec<f64>>, LabError> {
    let mut sums = vec![vec![0.0f64; feature_dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    let all: Vec<usize> = (0..frames.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, labels) = batch_of(frames, chunk, label_of);
        let f = net.forward(&x, effective);
        for (r, &c) in labels.iter().enumerate() {
            for (j, s) in sums[c].iter_mut().enumerate() {
                *s += f.get(r, j);
            }
            counts[c] += 1;
        }
    }
    for (c, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(LabError::Data(format!("class index {c} missing from training frames")));
        }
        for s in sums[c].iter_mut() {
            *s /= *count as f64;
        }
    }
    Ok(sums)
}

fn base_manifest(cfg: &ExperimentConfig, cumulative_alpha: f64) -> Manifest {
    Manifest {
        config_hash: cfg.hash(),
        variant: cfg.variant,
        seed: cfg.seed,
        input_width: cfg.data.frame_width,
        feature_dim: cfg.protocol.feature_dim,
        nu: cfg.protocol.nu,
        t_eval: cfg.protocol.t_eval,
        coverage_target: cfg.protocol.coverage_target,
        snr_bin_width_db: cfg.data.snr_bin_width_db,
        cumulative_alpha,
        label_groups: cfg.tasks.iter().map(|t| t.labels()).collect(),
        layers: Vec::new(),
        tasks: Vec::new(),
    }
}

fn lifelong_checkpoint(
    cfg: &ExperimentConfig,
    state: &LifelongState,
    params: &ParamSet,
) -> Checkpoint {
    let mut manifest = base_manifest(cfg, state.cumulative_alpha);
    manifest.tasks = state
        .partitions
        .iter()
        .map(|part| TaskEntry {
            id: part.task_id,
            alpha: part.alpha,
            beta: part.beta,
            labels: cfg.tasks[part.task_id].labels(),
            head: Vec::new(),
        })
        .collect();
    checkpoint::build(
        manifest,
        &checkpoint::set_values(params),
        state.partitions.iter().map(|p| p.theta_mask.clone()).collect(),
        state.partitions.iter().map(|p| p.adaptive_mask.clone()).collect(),
        state.partitions.iter().map(|p| p.head.clone()).collect(),
    )
}

fn st_checkpoint(cfg: &ExperimentConfig, params: &ParamSet, head: ParamSet) -> Checkpoint {
    let ones: TensorMap = params
        .iter()
        .map(|(n, p)| (n.clone(), Tensor::filled(p.values.rows(), p.values.cols(), 1.0)))
        .collect();
    let zeros: TensorMap = params
        .iter()
        .map(|(n, p)| (n.clone(), Tensor::zeros(p.values.rows(), p.values.cols())))
        .collect();
    let mut manifest = base_manifest(cfg, 1.0);
    manifest.tasks = vec![TaskEntry {
        id: 0,
        alpha: 1.0,
        beta: 0.0,
        labels: cfg.global_labels(),
        head: Vec::new(),
    }];
    checkpoint::build(
        manifest,
        &checkpoint::set_values(params),
        vec![ones],
        vec![zeros],
        vec![head],
    )
}

fn write_log(path: &Path, variant: Variant, rows: &[LogRow]) -> Result<(), LabError> {
    let mut out = String::from("variant,task,phase,epoch,loss,penalty,lr\n");
    for r in rows {
        writeln!(
            out,
            "{variant},{},{},{},{},{},{}",
            r.task, r.phase, r.epoch, r.loss, r.penalty, r.lr
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}
