//! Mean-field variational classification head with Monte Carlo predictive
//! sampling and a Shannon-entropy uncertainty decomposition.
//!
//! Weights carry independent Gaussian posteriors N(μ, σ²) with σ = exp(logσ).
//! Prediction averages T reparameterized softmax draws; uncertainty splits
//! the predictive entropy into an aleatoric part (mean per-draw entropy) and
//! an epistemic remainder. Training minimizes an ELBO: negative log mean
//! predictive probability of the label plus a closed-form KL to a standard
//! normal prior.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{MaskableParam, ParamSet, Tape, Tensor, Var};
use crate::rng::stream;

/// Parameter names used when a layer is flattened into a [`ParamSet`].
pub const W_MU: &str = "w_mu";
pub const W_LOGSIGMA: &str = "w_logsigma";
pub const B_MU: &str = "b_mu";
pub const B_LOGSIGMA: &str = "b_logsigma";

/// Posterior scales start at exp(−3) ≈ 0.05 so early draws stay close to the
/// mean while the KL term still sees a finite σ.
pub const LOGSIGMA_INIT: f64 = -3.0;

/// Predictive probabilities are clamped here before the log in the ELBO.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct VariationalLinear {
    /// [F, M] weight means.
    pub w_mu: Tensor,
    /// [F, M] weight log standard deviations.
    pub w_logsigma: Tensor,
    /// [1, M] bias means.
    pub b_mu: Tensor,
    /// [1, M] bias log standard deviations.
    pub b_logsigma: Tensor,
    /// T ≥ 1 Monte Carlo draws per forward pass.
    pub mc_samples: usize,
}

/// T softmax rows from T posterior draws.
#[derive(Clone, Debug)]
pub struct PredictiveSamples {
    /// [T, M]; every row a probability simplex.
    pub probs: Tensor,
}

impl PredictiveSamples {
    pub fn n_draws(&self) -> usize {
        self.probs.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.cols()
    }

    /// p̄ = mean over draws.
    pub fn mean_predictive(&self) -> Vec<f64> {
        let t = self.n_draws() as f64;
        (0..self.n_classes())
            .map(|c| (0..self.n_draws()).map(|r| self.probs.get(r, c)).sum::<f64>() / t)
            .collect()
    }
}

impl VariationalLinear {
    /// Means ~ N(0, 1/√F), biases zero, all log-σ at [`LOGSIGMA_INIT`].
    pub fn init(in_dim: usize, out_dim: usize, mc_samples: usize, rng: &mut impl Rng) -> Self {
        assert!(mc_samples >= 1, "T >= 1");
        let scale = (in_dim as f64).sqrt().recip();
        let w_mu = Tensor::from_fn(in_dim, out_dim, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        });
        Self {
            w_mu,
            w_logsigma: Tensor::filled(in_dim, out_dim, LOGSIGMA_INIT),
            b_mu: Tensor::zeros(1, out_dim),
            b_logsigma: Tensor::filled(1, out_dim, LOGSIGMA_INIT),
            mc_samples,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_mu.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w_mu.cols()
    }

    pub fn to_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.insert(MaskableParam::new(W_MU, self.w_mu.clone()));
        set.insert(MaskableParam::new(W_LOGSIGMA, self.w_logsigma.clone()));
        set.insert(MaskableParam::new(B_MU, self.b_mu.clone()));
        set.insert(MaskableParam::new(B_LOGSIGMA, self.b_logsigma.clone()));
        set
    }

    pub fn from_param_set(set: &ParamSet, mc_samples: usize) -> Self {
        Self {
            w_mu: set.get(W_MU).expect("w_mu").values.clone(),
            w_logsigma: set.get(W_LOGSIGMA).expect("w_logsigma").values.clone(),
            b_mu: set.get(B_MU).expect("b_mu").values.clone(),
            b_logsigma: set.get(B_LOGSIGMA).expect("b_logsigma").values.clone(),
            mc_samples,
        }
    }

    /// T reparameterized draws for one feature vector, deterministic in
    /// `seed`. Draw order is fixed: per draw, weight ε row-major, then bias ε.
    pub fn sample_forward(&self, feature: &[f64], seed: u64) -> PredictiveSamples {
        assert_eq!(feature.len(), self.in_dim(), "feature dimension");
        let eps = sample_epsilons(self.in_dim(), self.out_dim(), self.mc_samples, seed);
        let mut probs = Tensor::zeros(self.mc_samples, self.out_dim());
        for (t, (ew, eb)) in eps.iter().enumerate() {
            let mut logits = vec![0.0; self.out_dim()];
            for (m, logit) in logits.iter_mut().enumerate() {
                let mut acc = self.b_mu.get(0, m) + self.b_logsigma.get(0, m).exp() * eb.get(0, m);
                for (f, &x) in feature.iter().enumerate() {
                    let w =
                        self.w_mu.get(f, m) + self.w_logsigma.get(f, m).exp() * ew.get(f, m);
                    acc += x * w;
                }
                *logit = acc;
            }
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&l| (l - mx).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for (m, e) in exps.iter().enumerate() {
                probs.set(t, m, e / sum);
            }
        }
        PredictiveSamples { probs }
    }

    /// KL(N(μ,σ²) ‖ N(0,1)) summed over every weight and bias:
    /// Σ ½(σ² + μ² − 1 − 2 logσ).
    pub fn gaussian_kl(&self) -> f64 {
        let term = |mu: &Tensor, logsigma: &Tensor| -> f64 {
            let mut acc = 0.0;
            for i in 0..mu.rows() {
                for j in 0..mu.cols() {
                    let m = mu.get(i, j);
                    let ls = logsigma.get(i, j);
                    acc += 0.5 * ((2.0 * ls).exp() + m * m - 1.0 - 2.0 * ls);
                }
            }
            acc
        };
        term(&self.w_mu, &self.w_logsigma) + term(&self.b_mu, &self.b_logsigma)
    }
}

/// Frozen noise for T draws: per draw a [F, M] weight ε and a [1, M] bias ε.
/// Shared by the pure forward and the tape loss so a frozen seed gives the
/// identical reparameterization path.
pub fn sample_epsilons(
    in_dim: usize,
    out_dim: usize,
    t_draws: usize,
    seed: u64,
) -> Vec<(Tensor, Tensor)> {
    let mut rng = stream(seed, &[]);
    (0..t_draws)
        .map(|_| {
            let ew = Tensor::from_fn(in_dim, out_dim, |_, _| rng.sample(StandardNormal));
            let eb = Tensor::from_fn(1, out_dim, |_, _| rng.sample(StandardNormal));
            (ew, eb)
        })
        .collect()
}

/// H(p) = −Σ p ln p in nats, with 0·ln 0 = 0.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// (total, aleatoric, epistemic): H of the mean predictive, mean per-draw H,
/// and their difference clamped at zero from below (Jensen guarantees the
/// true difference is nonnegative; floating point may dip ~1e-16).
pub fn entropy_decomposition(samples: &PredictiveSamples) -> (f64, f64, f64) {
    let mean = samples.mean_predictive();
    let total = shannon_entropy(&mean);
    let t = samples.n_draws();
    let aleatoric = (0..t).map(|r| shannon_entropy(samples.probs.row(r))).sum::<f64>() / t as f64;
    let epistemic = (total - aleatoric).max(0.0);
    (total, aleatoric, epistemic)
}

/// ELBO-style loss for one sample: −ln p̄_y + kl_weight · KL(posterior ‖ prior).
pub fn bayes_loss(
    layer: &VariationalLinear,
    samples: &PredictiveSamples,
    true_class: usize,
    kl_weight: f64,
) -> f64 {
    let mean = samples.mean_predictive();
    -mean[true_class].max(PROB_FLOOR).ln() + kl_weight * layer.gaussian_kl()
}

/// Tape leaves for a layer during training.
pub struct VariationalVars {
    pub w_mu: Var,
    pub w_logsigma: Var,
    pub b_mu: Var,
    pub b_logsigma: Var,
}

impl VariationalVars {
    pub fn register(set: &ParamSet, tape: &mut Tape) -> (Self, BTreeMap<String, Var>) {
        let leaves = set.register_leaves(tape);
        (
            Self {
                w_mu: leaves[W_MU],
                w_logsigma: leaves[W_LOGSIGMA],
                b_mu: leaves[B_MU],
                b_logsigma: leaves[B_LOGSIGMA],
            },
            leaves,
        )
    }
}

/// Batched ELBO on the tape with frozen noise: mean over rows of
/// −ln((1/T) Σ_t softmax(x·(μ+σ∘ε_t) + b_t)[y]) + kl_weight·KL.
pub fn bayes_loss_on_tape(
    tape: &mut Tape,
    features: Var,
    vars: &VariationalVars,
    labels: &[usize],
    epsilons: &[(Tensor, Tensor)],
    kl_weight: f64,
) -> Var {
    assert!(!epsilons.is_empty(), "T >= 1");
    let batch = tape.value(features).rows();
    let classes = tape.value(vars.b_mu).cols();
    let t_draws = epsilons.len();

    let sigma_w = tape.exp(vars.w_logsigma);
    let sigma_b = tape.exp(vars.b_logsigma);
    let mut acc = tape.constant(Tensor::zeros(batch, classes));
    for (ew, eb) in epsilons {
        let ew = tape.constant(ew.clone());
        let eb = tape.constant(eb.clone());
        let noise_w = tape.mul(sigma_w, ew);
        let w = tape.add(vars.w_mu, noise_w);
        let noise_b = tape.mul(sigma_b, eb);
        let b = tape.add(vars.b_mu, noise_b);
        let xw = tape.matmul(features, w);
        let logits = tape.add(xw, b);
        let p = tape.softmax_rows(logits);
        acc = tape.add(acc, p);
    }
    let mean = tape.affine(acc, 1.0 / t_draws as f64, 0.0);
    let clamped = tape.clamp(mean, PROB_FLOOR, 1.0);
    let ln_p = tape.ln(clamped);
    let true_ln = tape.gather_cols(ln_p, labels);
    let nll_pos = tape.mean_all(true_ln);
    let nll = tape.affine(nll_pos, -1.0, 0.0);

    let kl_of = |tape: &mut Tape, mu: Var, logsigma: Var| -> Var {
        let mu2 = tape.mul(mu, mu);
        let two_ls = tape.affine(logsigma, 2.0, 0.0);
        let sig2 = tape.exp(two_ls);
        let quad = tape.add(mu2, sig2);
        let neg = tape.affine(two_ls, -1.0, -1.0); // −2logσ − 1
        let inner = tape.add(quad, neg);
        let summed = tape.sum_all(inner);
        tape.affine(summed, 0.5, 0.0)
    };
    let kl_w = kl_of(tape, vars.w_mu, vars.w_logsigma);
    let kl_b = kl_of(tape, vars.b_mu, vars.b_logsigma);
    let kl = tape.add(kl_w, kl_b);
    let weighted = tape.affine(kl, kl_weight, 0.0);
    tape.add(nll, weighted)
}
