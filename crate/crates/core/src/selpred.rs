//! Selective prediction over scored classifier outputs: accept/reject by an
//! uncertainty threshold, risk–coverage sweeps, coverage-targeted threshold
//! selection, SNR-binned recall, and an uncertainty ROC.
//!
//! Everything here is a pure function over immutable prediction lists. A
//! prediction is accepted when u ≤ τ (ties accepted), so all metrics are
//! rank-based: any strictly monotone transform of the uncertainties with a
//! correspondingly transformed τ leaves them unchanged. Metrics over an
//! empty acceptance set are reported as `None` rather than 0 or 1.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SelPredError {
    #[error("empty prediction list")]
    EmptyInput,
    #[error("coverage target {0} outside (0, 1]")]
    InvalidTarget(f64),
}

/// One classified sample with its uncertainty score and SNR tag.
#[derive(Clone, Copy, Debug)]
pub struct ScoredPrediction {
    pub predicted_class: usize,
    pub true_class: usize,
    /// u(x) ∈ [0, ∞), finite.
    pub uncertainty: f64,
    pub snr_db: f64,
}

impl ScoredPrediction {
    pub fn is_correct(&self) -> bool {
        self.predicted_class == self.true_class
    }
}

/// One point of a risk–coverage curve. Produced by [`sweep_thresholds`],
/// where every threshold accepts at least one sample, so the recall is
/// always defined.
#[derive(Clone, Copy, Debug)]
pub struct RiskCoveragePoint {
    /// Acceptance threshold; `f64::INFINITY` is the accept-all sentinel.
    pub tau_select: f64,
    /// Accepted fraction of all samples, exact.
    pub coverage: f64,
    /// Fraction correct among accepted.
    pub selective_recall: f64,
}

/// Recall over the accepted set and the accepted fraction, at threshold τ.
/// With nothing accepted the recall is `None` and coverage 0.
pub fn selective_metrics(
    preds: &[ScoredPrediction],
    tau: f64,
) -> Result<(Option<f64>, f64), SelPredError> {
    if preds.is_empty() {
        return Err(SelPredError::EmptyInput);
    }
    debug_assert!(preds.iter().all(|p| p.uncertainty.is_finite() && p.uncertainty >= 0.0));
    let accepted: Vec<&ScoredPrediction> =
        preds.iter().filter(|p| p.uncertainty <= tau).collect();
    let coverage = accepted.len() as f64 / preds.len() as f64;
    if accepted.is_empty() {
        return Ok((None, 0.0));
    }
    let correct = accepted.iter().filter(|p| p.is_correct()).count();
    Ok((Some(correct as f64 / accepted.len() as f64), coverage))
}

/// Risk–coverage curve: one point per distinct uncertainty value plus the
/// accept-all +∞ sentinel, sorted by coverage ascending (ties by τ).
pub fn sweep_thresholds(
    preds: &[ScoredPrediction],
) -> Result<Vec<RiskCoveragePoint>, SelPredError> {
    if preds.is_empty() {
        return Err(SelPredError::EmptyInput);
    }
    let mut taus: Vec<f64> = preds.iter().map(|p| p.uncertainty).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    taus.push(f64::INFINITY);
    let mut curve: Vec<RiskCoveragePoint> = taus
        .into_iter()
        .map(|tau| {
            let (recall, coverage) = selective_metrics(preds, tau).expect("nonempty");
            RiskCoveragePoint {
                tau_select: tau,
                coverage,
                // Every finite tau equals some sample's u, so >=1 accepted.
                selective_recall: recall.expect("at least one accepted"),
            }
        })
        .collect();
    curve.sort_by(|a, b| {
        a.coverage
            .partial_cmp(&b.coverage)
            .unwrap()
            .then(a.tau_select.partial_cmp(&b.tau_select).unwrap())
    });
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageStatus {
    /// Realized coverage ≥ target (may overshoot; see `realized_coverage`).
    Met,
    /// Target exceeded every point on the curve (possible only for curves
    /// truncated below full coverage); nearest point returned.
    NearestBelow,
}

#[derive(Clone, Copy, Debug)]
pub struct CoverageThreshold {
    pub tau: f64,
    pub realized_coverage: f64,
    pub status: CoverageStatus,
}

/// Smallest τ on the curve whose coverage reaches `target`. A full-coverage
/// target returns the +∞ sentinel so acceptance stays total on unseen data
/// rather than pinned to the largest uncertainty seen so far.
pub fn threshold_for_coverage(
    curve: &[RiskCoveragePoint],
    target: f64,
) -> Result<CoverageThreshold, SelPredError> {
    if curve.is_empty() {
        return Err(SelPredError::EmptyInput);
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(SelPredError::InvalidTarget(target));
    }
    if target == 1.0 {
        if let Some(p) = curve.iter().find(|p| p.tau_select.is_infinite()) {
            return Ok(CoverageThreshold {
                tau: p.tau_select,
                realized_coverage: p.coverage,
                status: CoverageStatus::Met,
            });
        }
    }
    let mut best: Option<&RiskCoveragePoint> = None;
    for p in curve {
        if p.coverage >= target && best.map_or(true, |b| p.tau_select < b.tau_select) {
            best = Some(p);
        }
    }
    match best {
        Some(p) => Ok(CoverageThreshold {
            tau: p.tau_select,
            realized_coverage: p.coverage,
            status: CoverageStatus::Met,
        }),
        None => {
            let p = curve
                .iter()
                .max_by(|a, b| a.coverage.partial_cmp(&b.coverage).unwrap())
                .expect("nonempty");
            Ok(CoverageThreshold {
                tau: p.tau_select,
                realized_coverage: p.coverage,
                status: CoverageStatus::NearestBelow,
            })
        }
    }
}

/// Per-SNR-bin metrics at one global threshold.
#[derive(Clone, Copy, Debug)]
pub struct SnrBinRecall {
    /// Lower edge of the bin; bins are `[k·w, (k+1)·w)` anchored at
    /// multiples of the width.
    pub snr_db: f64,
    pub n: usize,
    pub base_recall: f64,
    /// `None` when the bin's accepted set is empty.
    pub selective_recall: Option<f64>,
    pub coverage: f64,
}

/// Applies one global τ and reports per-bin base recall, selective recall
/// and coverage; only nonempty bins appear, sorted by SNR ascending.
pub fn snr_binned_recall(
    preds: &[ScoredPrediction],
    tau: f64,
    bin_width_db: f64,
) -> Result<Vec<SnrBinRecall>, SelPredError> {
    if preds.is_empty() {
        return Err(SelPredError::EmptyInput);
    }
    assert!(bin_width_db > 0.0, "bin width must be positive");
    let mut bins: BTreeMap<i64, Vec<ScoredPrediction>> = BTreeMap::new();
    for p in preds {
        let idx = (p.snr_db / bin_width_db).floor() as i64;
        bins.entry(idx).or_default().push(*p);
    }
    Ok(bins
        .into_iter()
        .map(|(idx, members)| {
            let base =
                members.iter().filter(|p| p.is_correct()).count() as f64 / members.len() as f64;
            let (sel, coverage) = selective_metrics(&members, tau).expect("nonempty bin");
            SnrBinRecall {
                snr_db: idx as f64 * bin_width_db,
                n: members.len(),
                base_recall: base,
                selective_recall: sel,
                coverage,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC for "low uncertainty predicts correctness": at each threshold the
/// samples with u ≤ τ are flagged correct. Returns the curve and trapezoid
/// AUC, which equals the probability that a random correct sample scores a
/// lower uncertainty than a random incorrect one (ties ½). With only one
/// outcome class present the AUC (and curve) are undefined.
pub fn uncertainty_roc(
    preds: &[ScoredPrediction],
) -> Result<(Vec<RocPoint>, Option<f64>), SelPredError> {
    if preds.is_empty() {
        return Err(SelPredError::EmptyInput);
    }
    let n_pos = preds.iter().filter(|p| p.is_correct()).count();
    let n_neg = preds.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok((Vec::new(), None));
    }
    let mut taus: Vec<f64> = preds.iter().map(|p| p.uncertainty).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    for tau in taus {
        let tp = preds.iter().filter(|p| p.is_correct() && p.uncertainty <= tau).count();
        let fp = preds.iter().filter(|p| !p.is_correct() && p.uncertainty <= tau).count();
        points.push(RocPoint { fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum::<f64>();
    Ok((points, Some(auc)))
}
