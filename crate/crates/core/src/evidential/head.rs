//! The differentiable prototype head: distance-based supports, per-prototype
//! masses, an in-graph Dempster fold, and the expected-utility output layer.
//!
//! Both a pure path (per-sample, used at evaluation and in oracle tests) and
//! a tape path (batched, used for training) are provided. They compute the
//! same function; the tape path folds prototypes pairwise with per-step
//! renormalization, which is algebraically identical to the pure fold.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    combine_all, expected_utilities, prototype_mass, EvidentialError, MassVector, UtilityConfig,
};
use crate::nn::{MaskableParam, ParamSet, Tape, Tensor, Var};

/// Parameter names used when a bank is flattened into a [`ParamSet`].
pub const PROTO: &str = "prototypes";
pub const ALPHA_LOGIT: &str = "alpha_logit";
pub const LOG_GAMMA: &str = "log_gamma";
pub const MEMBERSHIP: &str = "membership_logits";

/// Membership logits start at ±`ONE_HOT_LOGIT`·(one-hot), putting ~99% of
/// each prototype's membership on its own class while staying trainable.
const ONE_HOT_LOGIT: f64 = 6.0;

#[derive(Clone, Debug)]
pub struct PrototypeBank {
    /// [P, F] prototype locations.
    pub prototypes: Tensor,
    /// [1, P] unconstrained logits; α = sigmoid(logit) ∈ (0,1).
    pub alpha_logit: Tensor,
    /// [1, P] log of the RBF width γ > 0.
    pub log_gamma: Tensor,
    /// [P, M] unconstrained logits; h = row-softmax ∈ simplex.
    pub membership_logits: Tensor,
    pub n_classes: usize,
}

impl PrototypeBank {
    /// Initializes `per_class` prototypes per class around the given
    /// class-conditional feature means (plus isotropic noise), membership
    /// near-one-hot on the owning class, α = 0.5, γ = 1/F.
    pub fn init(
        class_means: &[Vec<f64>],
        per_class: usize,
        noise_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let n_classes = class_means.len();
        assert!(n_classes > 0 && per_class > 0);
        let dim = class_means[0].len();
        let p = n_classes * per_class;
        let mut prototypes = Tensor::zeros(p, dim);
        let mut membership = Tensor::zeros(p, n_classes);
        for c in 0..n_classes {
            assert_eq!(class_means[c].len(), dim);
            for k in 0..per_class {
                let row = c * per_class + k;
                for (j, &mu) in class_means[c].iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    prototypes.set(row, j, mu + noise_std * z);
                }
                for q in 0..n_classes {
                    membership.set(row, q, if q == c { ONE_HOT_LOGIT } else { 0.0 });
                }
            }
        }
        Self {
            prototypes,
            alpha_logit: Tensor::zeros(1, p),
            log_gamma: Tensor::filled(1, p, (1.0 / dim as f64).ln()),
            membership_logits: membership,
            n_classes,
        }
    }

    pub fn n_prototypes(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.prototypes.cols()
    }

    /// Flattens into named parameters for the optimizer / checkpoints.
    pub fn to_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.insert(MaskableParam::new(PROTO, self.prototypes.clone()));
        set.insert(MaskableParam::new(ALPHA_LOGIT, self.alpha_logit.clone()));
        set.insert(MaskableParam::new(LOG_GAMMA, self.log_gamma.clone()));
        set.insert(MaskableParam::new(MEMBERSHIP, self.membership_logits.clone()));
        set
    }

    pub fn from_param_set(set: &ParamSet, n_classes: usize) -> Self {
        Self {
            prototypes: set.get(PROTO).expect("prototypes").values.clone(),
            alpha_logit: set.get(ALPHA_LOGIT).expect("alpha_logit").values.clone(),
            log_gamma: set.get(LOG_GAMMA).expect("log_gamma").values.clone(),
            membership_logits: set.get(MEMBERSHIP).expect("membership").values.clone(),
            n_classes,
        }
    }

    /// sⁱ = sigmoid(αⁱ_logit)·exp(−γⁱ·‖x − pⁱ‖²) ∈ (0,1).
    pub fn support(&self, feature: &[f64]) -> Vec<f64> {
        assert_eq!(feature.len(), self.feature_dim(), "feature dimension");
        (0..self.n_prototypes())
            .map(|i| {
                let d2: f64 = self
                    .prototypes
                    .row(i)
                    .iter()
                    .zip(feature)
                    .map(|(&p, &x)| (x - p) * (x - p))
                    .sum();
                let alpha = crate::nn::tape::sigmoid(self.alpha_logit.get(0, i));
                let gamma = self.log_gamma.get(0, i).exp();
                alpha * (-gamma * d2).exp()
            })
            .collect()
    }

    /// Row-softmax of the membership logits: h rows on the simplex.
    pub fn membership(&self) -> Tensor {
        let p = self.n_prototypes();
        let m = self.n_classes;
        let mut out = Tensor::zeros(p, m);
        for i in 0..p {
            let row = self.membership_logits.row(i);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (q, &l) in row.iter().enumerate() {
                let e = (l - mx).exp();
                out.set(i, q, e);
                sum += e;
            }
            for q in 0..m {
                out.set(i, q, out.get(i, q) / sum);
            }
        }
        out
    }

    /// Pure end-to-end mass for one feature: per-prototype masses combined
    /// under Dempster's rule.
    pub fn mass_for(&self, feature: &[f64]) -> Result<MassVector, EvidentialError> {
        let supports = self.support(feature);
        let h = self.membership();
        let masses: Vec<MassVector> = supports
            .iter()
            .enumerate()
            .map(|(i, &s)| prototype_mass(s, h.row(i)))
            .collect();
        combine_all(masses.iter(), self.n_classes)
    }

    /// Pure expected utilities for one feature.
    pub fn utilities_for(
        &self,
        feature: &[f64],
        cfg: &UtilityConfig,
    ) -> Result<Vec<f64>, EvidentialError> {
        Ok(expected_utilities(&self.mass_for(feature)?, cfg))
    }
}

/// Tape leaves for a bank during training.
pub struct BankVars {
    pub prototypes: Var,
    pub alpha_logit: Var,
    pub log_gamma: Var,
    pub membership_logits: Var,
}

impl BankVars {
    pub fn register(set: &ParamSet, tape: &mut Tape) -> (Self, BTreeMap<String, Var>) {
        let leaves = set.register_leaves(tape);
        (
            Self {
                prototypes: leaves[PROTO],
                alpha_logit: leaves[ALPHA_LOGIT],
                log_gamma: leaves[LOG_GAMMA],
                membership_logits: leaves[MEMBERSHIP],
            },
            leaves,
        )
    }
}

/// Batched expected utilities on the tape (identity utility matrix):
/// features [B, F] → E [B, M] with E_i = m_i + (1−ν)·m(Ω) after the full
/// Dempster fold over prototypes.
pub fn utilities_on_tape(
    tape: &mut Tape,
    features: Var,
    bank: &BankVars,
    n_classes: usize,
    pessimism: f64,
) -> Var {
    let batch = tape.value(features).rows();
    let n_proto = tape.value(bank.prototypes).rows();

    // Squared distances: ‖x‖² + ‖p‖² − 2x·pᵀ via broadcast outer sum.
    let fx2 = tape.mul(features, features);
    let sqx = tape.sum_rows(fx2); // [B,1]
    let p2 = tape.mul(bank.prototypes, bank.prototypes);
    let sqp = tape.sum_rows(p2); // [P,1]
    let sqp_row = tape.transpose(sqp); // [1,P]
    let pt = tape.transpose(bank.prototypes); // [F,P]
    let cross = tape.matmul(features, pt); // [B,P]
    let cross2 = tape.affine(cross, -2.0, 0.0);
    let outer = tape.add(sqx, sqp_row); // [B,P]
    let d2 = tape.add(outer, cross2);

    // Supports s = sigmoid(α_logit)·exp(−γ·d²) ∈ (0,1).
    let gamma = tape.exp(bank.log_gamma); // [1,P]
    let gd = tape.mul(d2, gamma);
    let neg = tape.affine(gd, -1.0, 0.0);
    let rbf = tape.exp(neg);
    let alpha = tape.sigmoid(bank.alpha_logit); // [1,P]
    let s = tape.mul(rbf, alpha); // [B,P]

    let h = tape.softmax_rows(bank.membership_logits); // [P,M]

    // Dempster fold, renormalizing at each step. State: singletons [B,M],
    // ignorance [B,1]; start vacuous.
    let mut singletons = tape.constant(Tensor::zeros(batch, n_classes));
    let mut ignorance = tape.constant(Tensor::filled(batch, 1, 1.0));
    for i in 0..n_proto {
        let s_i = tape.slice_cols(s, i, 1); // [B,1]
        let h_i = tape.slice_rows(h, i, 1); // [1,M]
        let sh = tape.mul(s_i, h_i); // [B,M] = prototype's singleton masses
        let keep = tape.affine(s_i, -1.0, 1.0); // [B,1] = prototype's m(Ω)
        // new_q = S_q·(sh_q + keep) + G·sh_q
        let gate = tape.add(sh, keep); // [B,M] broadcast col
        let part1 = tape.mul(singletons, gate);
        let part2 = tape.mul(ignorance, sh);
        let new_s = tape.add(part1, part2);
        let new_g = tape.mul(ignorance, keep); // [B,1]
        let row_total = tape.sum_rows(new_s);
        let denom_raw = tape.add(row_total, new_g); // = 1 − K
        let denom = tape.clamp(denom_raw, 1e-12, 2.0);
        singletons = tape.div(new_s, denom);
        ignorance = tape.div(new_g, denom);
    }

    // Identity utilities: E = m + (1−ν)·m(Ω).
    let credit = tape.affine(ignorance, 1.0 - pessimism, 0.0);
    tape.add(singletons, credit)
}

/// Batched evidential loss (mean over rows) on the tape.
pub fn evidential_loss_on_tape(tape: &mut Tape, utilities: Var, labels: &[usize]) -> Var {
    let e = tape.clamp(utilities, super::UTILITY_CLAMP, 1.0 - super::UTILITY_CLAMP);
    let ln_e = tape.ln(e);
    let one_minus = tape.affine(e, -1.0, 1.0);
    let ln_1me = tape.ln(one_minus);
    let true_ln = tape.gather_cols(ln_e, labels); // [B,1]
    let all_1me = tape.sum_rows(ln_1me); // [B,1]
    let true_1me = tape.gather_cols(ln_1me, labels);
    let others = tape.sub(all_1me, true_1me);
    let per_row = tape.add(true_ln, others);
    let neg = tape.affine(per_row, -1.0, 0.0);
    tape.mean_all(neg)
}

/// Batched gated ELC loss on the tape. `lambda_eff` is the already-annealed
/// KL weight for the current epoch.
pub fn elc_loss_on_tape(
    tape: &mut Tape,
    utilities: Var,
    labels: &[usize],
    lambda_eff: f64,
) -> Var {
    let m = tape.value(utilities).cols() as f64;
    let e = tape.clamp(utilities, super::UTILITY_CLAMP, 1.0 - super::UTILITY_CLAMP);

    // Evidential BCE term (same construction as evidential_loss_on_tape,
    // kept per-row here so the gate multiplies before the batch mean).
    let ln_e = tape.ln(e);
    let one_minus = tape.affine(e, -1.0, 1.0);
    let ln_1me = tape.ln(one_minus);
    let true_ln = tape.gather_cols(ln_e, labels);
    let all_1me = tape.sum_rows(ln_1me);
    let true_1me = tape.gather_cols(ln_1me, labels);
    let others = tape.sub(all_1me, true_1me);
    let bce_pos = tape.add(true_ln, others);
    let bce = tape.affine(bce_pos, -1.0, 0.0); // [B,1]

    // Gate w = maxE·(1 − E_true).
    let max_e = tape.row_max(e);
    let e_true = tape.gather_cols(e, labels);
    let one_minus_true = tape.affine(e_true, -1.0, 1.0);
    let gate = tape.mul(max_e, one_minus_true); // [B,1]

    // KL(normalized E ‖ uniform) with ε smoothing.
    let smoothed = tape.affine(e, 1.0, super::KL_EPS);
    let totals = tape.sum_rows(smoothed); // [B,1]
    let q = tape.div(smoothed, totals); // [B,M]
    let qm = tape.affine(q, m, 0.0);
    let ln_qm = tape.ln(qm);
    let terms = tape.mul(q, ln_qm);
    let kl = tape.sum_rows(terms); // [B,1]

    let gated = tape.mul(gate, kl);
    let weighted = tape.affine(gated, lambda_eff, 0.0);
    let per_row = tape.add(bce, weighted);
    tape.mean_all(per_row)
}
