//! Central finite-difference gradient verification.
//!
//! Every backward implementation in this crate is validated against this
//! oracle rather than by inspection: the checker rebuilds the computation
//! from scratch for every perturbed evaluation, so it shares no code path
//! with the analytic gradients it judges.

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Relative error between an analytic and a numeric derivative.
///
/// Gradients smaller than `NEGLIGIBLE` on both sides are treated as zero:
/// central differences at step `h` carry O(h²) truncation plus cancellation
/// noise, so ratios of near-zero values are meaningless.
const NEGLIGIBLE: f64 = 1e-7;

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < NEGLIGIBLE {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Checks the gradient of a scalar-valued computation against central finite
/// differences and returns the worst relative error over all elements of all
/// inputs.
///
/// `build` must register exactly the given inputs (in order, as leaves —
/// they are pre-registered and handed in as `Var`s) and return the scalar
/// loss node. It is invoked `1 + 2·Σ len(inputs)` times.
pub fn max_rel_error<F>(build: F, inputs: &[Tensor], step: f64) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |tensors: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        assert_eq!(tape.value(loss).shape(), (1, 1), "loss must be scalar");
        tape.value(loss).get(0, 0)
    };

    // Analytic gradients once.
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss);

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        for e in 0..input.len() {
            let x0 = input.data()[e];
            work[i].data_mut()[e] = x0 + step;
            let fp = eval(&work);
            work[i].data_mut()[e] = x0 - step;
            let fm = eval(&work);
            work[i].data_mut()[e] = x0;
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic.map_or(0.0, |g| g.data()[e]);
            worst = worst.max(rel_error(a, numeric));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_clean() {
        // f = sum(x^2): grad 2x, exactly representable — checker should see
        // errors at the truncation-noise level only.
        let x = Tensor::from_vec(2, 3, vec![0.3, -1.2, 0.7, 2.0, -0.4, 0.05]);
        let err = max_rel_error(
            |t, vars| {
                let sq = t.mul(vars[0], vars[0]);
                t.sum_all(sq)
            },
            &[x],
            1e-4,
        );
        assert!(err < 1e-6, "quadratic gradcheck error {err}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Same loss but computed through exp(ln(x^2)) with a deliberately
        // broken chain: we simulate a bug by checking d/dx of sum(x^3)
        // against an analytic gradient of sum(x^2)'s graph. The checker must
        // flag it — this guards the guard.
        let x = Tensor::from_vec(1, 2, vec![0.8, 1.3]);
        let err = max_rel_error(
            |t, vars| {
                // Analytic pass sees x^2...
                let sq = t.mul(vars[0], vars[0]);
                // ...but perturbed passes see x^2 scaled by a value-dependent
                // factor only when x deviates (emulated via clamp edge).
                let c = t.clamp(sq, 0.0, 0.64 + 1e-9);
                t.sum_all(c)
            },
            &[x],
            1e-4,
        );
        // At x=0.8 the clamp boundary bites in exactly one perturbation
        // direction: numeric and analytic must disagree there.
        assert!(err > 1e-2, "checker failed to flag a kinked gradient: {err}");
    }
}
