//! Oracles for the uncertainty algebra. The Dempster fold and the expected
//! utilities are checked against an independent evaluator that enumerates
//! the *full* power set of the frame (bitmask subsets), never the
//! singleton-plus-Ω shortcut the production code uses; entropy
//! decomposition is re-derived inline; ROC AUC is checked against the
//! O(n²) pairwise counter it is supposed to equal.

use proptest::prelude::*;
use rand::Rng;
use radlab_core::bayesian::{entropy_decomposition, PredictiveSamples};
use radlab_core::evidential::{
    combine_all, dempster_combine, expected_utilities, predict_and_uncertainty, EvidentialError,
    MassVector, UtilityConfig,
};
use radlab_core::nn::Tensor;
use radlab_core::rng::stream;
use radlab_core::selpred::{
    selective_metrics, sweep_thresholds, uncertainty_roc, ScoredPrediction,
};

// ───────────────────────── power-set oracle ─────────────────────────

/// Mass over every subset of an M-class frame, indexed by bitmask
/// (bit q set ⇔ ω_q ∈ A). Slot 0 is ∅ and only ever holds conflict
/// transiently during combination.
struct PowerSetMass {
    m: Vec<f64>,
    n_classes: usize,
}

impl PowerSetMass {
    fn from_mass_vector(mv: &MassVector) -> Self {
        let n = mv.n_classes();
        let mut m = vec![0.0; 1 << n];
        for (q, &s) in mv.singletons.iter().enumerate() {
            m[1 << q] = s;
        }
        m[(1 << n) - 1] = mv.ignorance;
        Self { m, n_classes: n }
    }

    /// Conjunctive combination over all subset pairs, then Dempster's
    /// renormalization by 1 − m(∅). Quadratic in 2^M — fine for M ≤ 4.
    fn dempster(&self, other: &Self) -> Option<Self> {
        let size = self.m.len();
        let mut raw = vec![0.0; size];
        for (a, &ma) in self.m.iter().enumerate() {
            for (b, &mb) in other.m.iter().enumerate() {
                raw[a & b] += ma * mb;
            }
        }
        let conflict = raw[0];
        if 1.0 - conflict <= 1e-15 {
            return None;
        }
        raw[0] = 0.0;
        for v in &mut raw {
            *v /= 1.0 - conflict;
        }
        Some(Self { m: raw, n_classes: self.n_classes })
    }

    /// ν-blend of lower and upper expected utility for each singleton act,
    /// walking every focal set: the lower expectation credits a set with
    /// the worst utility among its members, the upper with the best.
    fn expected_utilities(&self, utilities: &[Vec<f64>], nu: f64) -> Vec<f64> {
        (0..self.n_classes)
            .map(|act| {
                let mut lower = 0.0;
                let mut upper = 0.0;
                for (set, &mass) in self.m.iter().enumerate().skip(1) {
                    let mut worst = f64::INFINITY;
                    let mut best = f64::NEG_INFINITY;
                    for q in 0..self.n_classes {
                        if set >> q & 1 == 1 {
                            worst = worst.min(utilities[act][q]);
                            best = best.max(utilities[act][q]);
                        }
                    }
                    lower += mass * worst;
                    upper += mass * best;
                }
                nu * lower + (1.0 - nu) * upper
            })
            .collect()
    }

    fn close_to(&self, mv: &MassVector, tol: f64) -> bool {
        let full = (1 << self.n_classes) - 1;
        let singletons_ok = mv
            .singletons
            .iter()
            .enumerate()
            .all(|(q, &s)| (self.m[1 << q] - s).abs() <= tol);
        let stray_ok = (0..self.m.len()).all(|set| {
            set.count_ones() <= 1 || set == full || self.m[set].abs() <= tol
        });
        singletons_ok && stray_ok && (self.m[full] - mv.ignorance).abs() <= tol
    }
}

fn random_mass(rng: &mut impl Rng, n_classes: usize) -> MassVector {
    let weights: Vec<f64> = (0..=n_classes).map(|_| rng.gen_range(1e-3..1.0)).collect();
    let total: f64 = weights.iter().sum();
    MassVector {
        singletons: weights[..n_classes].iter().map(|&w| w / total).collect(),
        ignorance: weights[n_classes] / total,
    }
}

#[test]
fn dempster_combination_matches_the_power_set_enumeration() {
    let mut rng = stream(0xA1CE, &[10]);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=4usize);
        let a = random_mass(&mut rng, n);
        let b = random_mass(&mut rng, n);
        let fused = dempster_combine(&a, &b).expect("positive ignorance cannot conflict away");
        let oracle = PowerSetMass::from_mass_vector(&a)
            .dempster(&PowerSetMass::from_mass_vector(&b))
            .expect("oracle agrees combination is well-defined");
        assert!(
            oracle.close_to(&fused, 1e-12),
            "fusion disagrees with subset enumeration: {fused:?} vs {:?}",
            oracle.m
        );
        fused.validate().expect("closure: combined mass stays normalized");
    }
}

#[test]
fn folded_combination_matches_the_power_set_enumeration() {
    let mut rng = stream(0xA1CE, &[11]);
    for _ in 0..200 {
        let n = rng.gen_range(2..=4usize);
        let count = rng.gen_range(3..=6usize);
        let masses: Vec<MassVector> = (0..count).map(|_| random_mass(&mut rng, n)).collect();
        let fused = combine_all(&masses, n).expect("positive ignorance cannot conflict away");
        let mut oracle = PowerSetMass::from_mass_vector(&MassVector::vacuous(n));
        for m in &masses {
            oracle = oracle
                .dempster(&PowerSetMass::from_mass_vector(m))
                .expect("oracle agrees combination is well-defined");
        }
        assert!(oracle.close_to(&fused, 1e-12), "fold disagrees with subset enumeration");
    }
}

#[test]
fn expected_utilities_match_the_power_set_enumeration() {
    let mut rng = stream(0xA1CE, &[12]);
    for trial in 0..1000 {
        let n = rng.gen_range(2..=4usize);
        let mass = random_mass(&mut rng, n);
        let nu = rng.gen_range(0.0..=1.0);
        let cfg = if trial % 2 == 0 {
            UtilityConfig::identity(n, nu)
        } else {
            // Arbitrary normalized utilities: every row gets a 1 somewhere.
            let utilities: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let peak = rng.gen_range(0..n);
                    row[peak] = 1.0;
                    row
                })
                .collect();
            UtilityConfig { utilities, pessimism: nu }
        };
        cfg.validate().expect("constructed utilities are valid");
        let fast = expected_utilities(&mass, &cfg);
        let slow = PowerSetMass::from_mass_vector(&mass)
            .expected_utilities(&cfg.utilities, nu);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() <= 1e-12, "utility mismatch: {f} vs {s}");
        }
    }
}

#[test]
fn contradictory_certainties_refuse_to_combine() {
    let a = MassVector { singletons: vec![1.0, 0.0], ignorance: 0.0 };
    let b = MassVector { singletons: vec![0.0, 1.0], ignorance: 0.0 };
    assert!(matches!(
        dempster_combine(&a, &b),
        Err(EvidentialError::TotalConflict { .. })
    ));
    assert!(matches!(
        combine_all([&a, &b], 2),
        Err(EvidentialError::TotalConflict { .. })
    ));
    // The power-set oracle reaches the same verdict.
    assert!(PowerSetMass::from_mass_vector(&a)
        .dempster(&PowerSetMass::from_mass_vector(&b))
        .is_none());
}

// Shifting mass from the singletons to Ω (keeping their ratios) must never
// make the classifier more confident — provided pessimism outweighs the
// optimist credit (1 − ν) for ignorance. The worst case is a uniform ratio
// profile, where the best singleton share is 1/M, so ν ≥ 1 − 1/M makes the
// claim hold for every profile; the operating point ν = 0.9 sits inside
// that band for up to ten classes.
#[test]
fn growing_ignorance_never_shrinks_uncertainty_under_pessimism() {
    let mut rng = stream(0xA1CE, &[13]);
    for trial in 0..1000 {
        let n = rng.gen_range(2..=6usize);
        let nu = if trial % 4 == 0 {
            0.9
        } else {
            rng.gen_range(1.0 - 1.0 / n as f64..=1.0)
        };
        let cfg = UtilityConfig::identity(n, nu);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let ratios: Vec<f64> = raw.iter().map(|&w| w / total).collect();
        let mut last_unc = -1.0;
        for step in 0..=10 {
            let certainty = 1.0 - step as f64 / 10.0;
            let mass = MassVector {
                singletons: ratios.iter().map(|&r| r * certainty).collect(),
                ignorance: 1.0 - certainty,
            };
            let (_, unc) = predict_and_uncertainty(&expected_utilities(&mass, &cfg));
            assert!(
                unc >= last_unc - 1e-12,
                "uncertainty dropped from {last_unc} to {unc} as ignorance grew (nu={nu}, n={n})"
            );
            last_unc = unc;
        }
    }
}

// ───────────────────── entropy decomposition oracle ─────────────────────

/// Inline re-derivation, sharing nothing with the production path.
fn entropy_by_hand(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-6..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

#[test]
fn entropy_decomposition_matches_an_independent_evaluator() {
    let mut rng = stream(0xA1CE, &[14]);
    for _ in 0..1000 {
        let t_draws = rng.gen_range(1..=8usize);
        let n = rng.gen_range(2..=6usize);
        let rows: Vec<Vec<f64>> = (0..t_draws).map(|_| random_simplex(&mut rng, n)).collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let samples = PredictiveSamples { probs: Tensor::from_vec(t_draws, n, flat) };
        let (total, aleatoric, epistemic) = entropy_decomposition(&samples);

        let mean: Vec<f64> = (0..n)
            .map(|q| rows.iter().map(|r| r[q]).sum::<f64>() / t_draws as f64)
            .collect();
        let total_oracle = entropy_by_hand(&mean);
        let aleatoric_oracle =
            rows.iter().map(|r| entropy_by_hand(r)).sum::<f64>() / t_draws as f64;
        let epistemic_oracle = total_oracle - aleatoric_oracle;

        assert!((total - total_oracle).abs() <= 1e-12);
        assert!((aleatoric - aleatoric_oracle).abs() <= 1e-12);
        assert!((epistemic - epistemic_oracle).abs() <= 1e-12);
        // Jensen: averaging the draws cannot lose entropy.
        assert!(epistemic_oracle >= -1e-9, "Jensen violated: {epistemic_oracle}");
        assert!(aleatoric <= total + 1e-9);
    }
}

// ───────────────────────── selective prediction ─────────────────────────

/// Predictions whose uncertainties sit on a coarse exact grid (multiples of
/// 1/64) so ties are frequent and monotone transforms cannot reorder them
/// through rounding. Correctness is anti-correlated with u to give the
/// curves some shape.
fn gridded_predictions(seed_leaf: u64, n: usize) -> Vec<ScoredPrediction> {
    let mut rng = stream(0xA1CE, &[seed_leaf]);
    (0..n)
        .map(|_| {
            let u = rng.gen_range(0..=64u32) as f64 / 64.0;
            let correct = rng.gen_range(0.0..1.0) < 0.9 - 0.6 * u;
            ScoredPrediction {
                predicted_class: 0,
                true_class: if correct { 0 } else { 1 },
                uncertainty: u,
                snr_db: rng.gen_range(-20.0..18.0),
            }
        })
        .collect()
}

#[test]
fn roc_auc_agrees_with_the_pairwise_counter() {
    for seed_leaf in 20..25 {
        let preds = gridded_predictions(seed_leaf, 1000);
        let (curve, auc) = uncertainty_roc(&preds).expect("nonempty");
        let auc = auc.expect("both outcomes present");
        assert_eq!(curve.first(), Some(&radlab_core::selpred::RocPoint { fpr: 0.0, tpr: 0.0 }));
        assert_eq!(curve.last(), Some(&radlab_core::selpred::RocPoint { fpr: 1.0, tpr: 1.0 }));

        let correct: Vec<f64> =
            preds.iter().filter(|p| p.is_correct()).map(|p| p.uncertainty).collect();
        let incorrect: Vec<f64> =
            preds.iter().filter(|p| !p.is_correct()).map(|p| p.uncertainty).collect();
        let mut wins = 0u64;
        let mut ties = 0u64;
        for &uc in &correct {
            for &ui in &incorrect {
                if uc < ui {
                    wins += 1;
                } else if uc == ui {
                    ties += 1;
                }
            }
        }
        let pairwise = (wins as f64 + 0.5 * ties as f64)
            / (correct.len() as f64 * incorrect.len() as f64);
        assert!(
            (auc - pairwise).abs() <= 1e-12,
            "trapezoid {auc} vs pairwise {pairwise}"
        );
    }
}

#[test]
fn degenerate_outcomes_leave_the_auc_undefined() {
    let all_correct: Vec<ScoredPrediction> = (0..10)
        .map(|i| ScoredPrediction {
            predicted_class: 0,
            true_class: 0,
            uncertainty: i as f64 / 10.0,
            snr_db: 0.0,
        })
        .collect();
    let (curve, auc) = uncertainty_roc(&all_correct).expect("nonempty");
    assert!(curve.is_empty());
    assert!(auc.is_none());
}

#[test]
fn coverage_is_monotone_and_the_accept_all_point_is_exact() {
    let preds = gridded_predictions(30, 1000);
    let curve = sweep_thresholds(&preds).expect("nonempty");
    for pair in curve.windows(2) {
        assert!(pair[1].coverage >= pair[0].coverage);
    }
    let last = curve.last().expect("sentinel present");
    assert_eq!(last.tau_select, f64::INFINITY);
    assert_eq!(last.coverage, 1.0);
    let overall =
        preds.iter().filter(|p| p.is_correct()).count() as f64 / preds.len() as f64;
    assert_eq!(last.selective_recall, overall);
}

#[test]
fn selective_metrics_depend_only_on_uncertainty_ranks() {
    let preds = gridded_predictions(31, 500);
    for k in 0..=16 {
        let tau = k as f64 / 16.0;
        let baseline = selective_metrics(&preds, tau).expect("nonempty");
        // exp is strictly monotone, and the grid spacing keeps the rounded
        // images strictly ordered too.
        let warped: Vec<ScoredPrediction> = preds
            .iter()
            .map(|p| ScoredPrediction { uncertainty: p.uncertainty.exp(), ..*p })
            .collect();
        assert_eq!(baseline, selective_metrics(&warped, tau.exp()).expect("nonempty"));
    }
    assert_eq!(selective_metrics(&preds, -1.0).expect("nonempty"), (None, 0.0));
}

// ─────────────────── commutativity / associativity ───────────────────

fn mass_strategy(n_classes: usize) -> impl Strategy<Value = MassVector> {
    proptest::collection::vec(1e-3..1.0f64, n_classes + 1).prop_map(move |weights| {
        let total: f64 = weights.iter().sum();
        MassVector {
            singletons: weights[..n_classes].iter().map(|&w| w / total).collect(),
            ignorance: weights[n_classes] / total,
        }
    })
}

fn mass_triple() -> impl Strategy<Value = (MassVector, MassVector, MassVector)> {
    (2..=5usize)
        .prop_flat_map(|n| (mass_strategy(n), mass_strategy(n), mass_strategy(n)))
}

fn assert_masses_close(a: &MassVector, b: &MassVector, tol: f64) {
    for (x, y) in a.singletons.iter().zip(&b.singletons) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
    assert!((a.ignorance - b.ignorance).abs() <= tol, "{a:?} vs {b:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prop_dempster_commutes((a, b, _) in mass_triple()) {
        let ab = dempster_combine(&a, &b).expect("positive ignorance");
        let ba = dempster_combine(&b, &a).expect("positive ignorance");
        prop_assert!(ab.validate().is_ok());
        assert_masses_close(&ab, &ba, 1e-9);
    }

    #[test]
    fn prop_dempster_associates((a, b, c) in mass_triple()) {
        let left = dempster_combine(&dempster_combine(&a, &b).expect("ok"), &c).expect("ok");
        let right = dempster_combine(&a, &dempster_combine(&b, &c).expect("ok")).expect("ok");
        prop_assert!(left.validate().is_ok());
        assert_masses_close(&left, &right, 1e-9);
    }

    #[test]
    fn prop_vacuous_is_neutral((a, _, _) in mass_triple()) {
        let fused = dempster_combine(&a, &MassVector::vacuous(a.n_classes())).expect("ok");
        assert_masses_close(&fused, &a, 1e-12);
    }
}
