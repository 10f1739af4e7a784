//! Evidential (Dempster–Shafer) classification: mass functions over the
//! class frame, Dempster combination, expected utilities under a pessimism
//! blend, epistemic uncertainty, and the evidential / gated-KL losses.
//!
//! The frame of discernment is the class set Ω = {ω₁..ω_M}; focal sets are
//! restricted to the singletons plus Ω itself, which is closed under
//! Dempster's rule and exactly what the prototype construction emits.
//!
//! This file is the pure algebra on plain values; [`head`] holds the
//! differentiable prototype head that feeds it.

pub mod head;

pub use head::PrototypeBank;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvidentialError {
    #[error("mass vector is not normalized (sum {sum}, tolerance 1e-9)")]
    NotNormalized { sum: f64 },
    #[error("mass vector has a negative entry ({0})")]
    NegativeMass(f64),
    #[error("total conflict: combined evidence is contradictory (1-K = {denom})")]
    TotalConflict { denom: f64 },
    #[error("class frames differ: {0} vs {1} classes")]
    FrameMismatch(usize, usize),
    #[error("invalid utility config: {0}")]
    InvalidUtilities(String),
}

/// A mass function over {singletons} ∪ {Ω}.
#[derive(Clone, Debug, PartialEq)]
pub struct MassVector {
    /// m({ω_q}) for q = 0..M.
    pub singletons: Vec<f64>,
    /// m(Ω) — the ignorance mass.
    pub ignorance: f64,
}

impl MassVector {
    /// Total ignorance: m(Ω) = 1. Neutral element of Dempster combination.
    pub fn vacuous(n_classes: usize) -> Self {
        Self { singletons: vec![0.0; n_classes], ignorance: 1.0 }
    }

    pub fn n_classes(&self) -> usize {
        self.singletons.len()
    }

    pub fn total(&self) -> f64 {
        self.singletons.iter().sum::<f64>() + self.ignorance
    }

    pub fn validate(&self) -> Result<(), EvidentialError> {
        for &m in self.singletons.iter().chain(std::iter::once(&self.ignorance)) {
            if m < 0.0 {
                return Err(EvidentialError::NegativeMass(m));
            }
        }
        let sum = self.total();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvidentialError::NotNormalized { sum });
        }
        Ok(())
    }
}

/// Per-prototype mass: m({ω_q}) = h_q·s and the complement m(Ω) = 1 − s, so
/// a prototype with no support is exactly vacuous.
pub fn prototype_mass(support: f64, membership: &[f64]) -> MassVector {
    MassVector {
        singletons: membership.iter().map(|&h| h * support).collect(),
        ignorance: 1.0 - support,
    }
}

/// Dempster's rule for two masses over the same frame:
/// singleton q ← m₁(q)m₂(q) + m₁(q)m₂(Ω) + m₁(Ω)m₂(q);
/// Ω ← m₁(Ω)m₂(Ω); all renormalized by 1 − K where K is the mass of
/// conflicting singleton pairs.
pub fn dempster_combine(a: &MassVector, b: &MassVector) -> Result<MassVector, EvidentialError> {
    if a.n_classes() != b.n_classes() {
        return Err(EvidentialError::FrameMismatch(a.n_classes(), b.n_classes()));
    }
    let mut singletons: Vec<f64> = a
        .singletons
        .iter()
        .zip(&b.singletons)
        .map(|(&ma, &mb)| ma * mb + ma * b.ignorance + a.ignorance * mb)
        .collect();
    let ignorance = a.ignorance * b.ignorance;
    let unnormalized: f64 = singletons.iter().sum::<f64>() + ignorance;
    // K = 1 − (retained mass); computing the denominator directly from the
    // retained products is numerically kinder than summing conflicts.
    let denom = unnormalized;
    if denom <= 1e-15 {
        return Err(EvidentialError::TotalConflict { denom });
    }
    for m in &mut singletons {
        *m /= denom;
    }
    Ok(MassVector { singletons, ignorance: ignorance / denom })
}

/// Left-fold combination over any number of masses, starting vacuous.
pub fn combine_all<'a>(
    masses: impl IntoIterator<Item = &'a MassVector>,
    n_classes: usize,
) -> Result<MassVector, EvidentialError> {
    let mut acc = MassVector::vacuous(n_classes);
    for m in masses {
        acc = dempster_combine(&acc, m)?;
    }
    Ok(acc)
}

/// Normalized utility matrix plus the pessimism blend ν.
#[derive(Clone, Debug)]
pub struct UtilityConfig {
    /// u[i][q] = utility of choosing class i when the truth is ω_q; in [0,1]
    /// with max 1 per row.
    pub utilities: Vec<Vec<f64>>,
    /// ν = 1 is fully pessimistic (lower expectation), ν = 0 optimistic.
    pub pessimism: f64,
}

impl UtilityConfig {
    pub fn identity(n_classes: usize, pessimism: f64) -> Self {
        let utilities = (0..n_classes)
            .map(|i| (0..n_classes).map(|q| if i == q { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { utilities, pessimism }
    }

    pub fn is_identity(&self) -> bool {
        self.utilities.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(q, &u)| u == if i == q { 1.0 } else { 0.0 })
        })
    }

    pub fn validate(&self) -> Result<(), EvidentialError> {
        if !(0.0..=1.0).contains(&self.pessimism) {
            return Err(EvidentialError::InvalidUtilities("nu outside [0,1]".into()));
        }
        for row in &self.utilities {
            if row.len() != self.utilities.len() {
                return Err(EvidentialError::InvalidUtilities("matrix not square".into()));
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if (max - 1.0).abs() > 1e-9 {
                return Err(EvidentialError::InvalidUtilities(
                    "each row needs a maximal utility of 1".into(),
                ));
            }
            if row.iter().any(|&u| !(0.0..=1.0 + 1e-12).contains(&u)) {
                return Err(EvidentialError::InvalidUtilities(
                    "utilities must lie in [0,1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.utilities.len()
    }
}

/// Expected utility of each singleton act under the ν-blend of lower and
/// upper expectations:
/// lower_i = Σ_q m_q·u_iq + m(Ω)·min_j u_ij,
/// upper_i = Σ_q m_q·u_iq + m(Ω)·max_j u_ij,
/// E_i = ν·lower_i + (1−ν)·upper_i.
/// With identity utilities this collapses to E_i = m_i + (1−ν)·m(Ω).
pub fn expected_utilities(m: &MassVector, cfg: &UtilityConfig) -> Vec<f64> {
    assert_eq!(m.n_classes(), cfg.n_classes(), "frame/utility size mismatch");
    let nu = cfg.pessimism;
    cfg.utilities
        .iter()
        .map(|row| {
            let base: f64 = row.iter().zip(&m.singletons).map(|(&u, &mq)| u * mq).sum();
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            nu * (base + m.ignorance * lo) + (1.0 - nu) * (base + m.ignorance * hi)
        })
        .collect()
}

/// Argmax act and its epistemic uncertainty 1 − max E. Ties resolve to the
/// lowest class index.
pub fn predict_and_uncertainty(utilities: &[f64]) -> (usize, f64) {
    assert!(!utilities.is_empty());
    let mut arg = 0;
    for (i, &e) in utilities.iter().enumerate() {
        if e > utilities[arg] {
            arg = i;
        }
    }
    (arg, 1.0 - utilities[arg])
}

/// Clamp bound applied to expected utilities before any logarithm.
pub const UTILITY_CLAMP: f64 = 1e-7;

/// KL smoothing constant.
pub const KL_EPS: f64 = 1e-8;

fn clamp_unit(e: f64) -> f64 {
    e.clamp(UTILITY_CLAMP, 1.0 - UTILITY_CLAMP)
}

/// Binary-cross-entropy-style evidential loss over the per-act utilities:
/// L = −[ln E_y + Σ_{i≠y} ln(1 − E_i)], natural log, inputs clamped to
/// [1e-7, 1−1e-7].
pub fn evidential_loss(utilities: &[f64], true_class: usize) -> f64 {
    assert!(true_class < utilities.len());
    let mut loss = 0.0;
    for (i, &e) in utilities.iter().enumerate() {
        let e = clamp_unit(e);
        if i == true_class {
            loss -= e.ln();
        } else {
            loss -= (1.0 - e).ln();
        }
    }
    loss
}

/// The confident-error gate w = (max_i E_i)·(1 − E_y): 0 for confident
/// correct predictions, 1 for fully confident errors.
pub fn elc_gate(utilities: &[f64], true_class: usize) -> f64 {
    let max = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    clamp_unit(max) * (1.0 - clamp_unit(utilities[true_class]))
}

/// KL divergence between the smoothed, normalized utility profile and the
/// uniform distribution over classes.
pub fn kl_to_uniform(utilities: &[f64]) -> f64 {
    let m = utilities.len() as f64;
    let total: f64 = utilities.iter().map(|&e| clamp_unit(e) + KL_EPS).sum();
    utilities
        .iter()
        .map(|&e| {
            let q = (clamp_unit(e) + KL_EPS) / total;
            q * (q * m).ln()
        })
        .sum()
}

/// Gated ELC loss: evidential loss plus w·λ·KL(normalized E ‖ uniform),
/// with the annealed λ supplied by the caller (see [`annealed_lambda`]).
pub fn elc_loss(utilities: &[f64], true_class: usize, lambda_eff: f64) -> f64 {
    evidential_loss(utilities, true_class)
        + elc_gate(utilities, true_class) * lambda_eff * kl_to_uniform(utilities)
}

/// λ(epoch): linear 0 → λ_KL over the first half of the task's epochs, then
/// constant at λ_KL.
pub fn annealed_lambda(lambda_kl: f64, epoch: usize, total_epochs: usize) -> f64 {
    if total_epochs == 0 {
        return lambda_kl;
    }
    let half = total_epochs as f64 / 2.0;
    lambda_kl * ((epoch as f64) / half).min(1.0)
}
