//! Desk-scale laboratory for uncertainty-aware, lifelong radar pulse
//! classification.
//!
//! The crate is organised as a pipeline plus a small training engine:
//!
//! * [`signal`] — synthesis of labelled intra-pulse modulated waveforms
//!   (LFM, phase codes, pulse trains) with calibrated complex AWGN.
//! * [`preprocess`] — down-conversion, FIR low-pass + decimation, and framing
//!   into fixed-width standardized I/Q vectors.
//! * [`nn`] — a deliberately small f64 tape autodiff engine with exactly the
//!   ops the models need, plus maskable parameters and SGD.
//! * [`lps`] — learn–prune–share lifelong training: ADMM-guided pruning
//!   carves each task a disjoint slice of one shared backbone.
//! * [`evidential`] — a prototype-based Dempster–Shafer head producing
//!   per-class masses, expected utilities and an epistemic uncertainty score.
//! * [`bayesian`] — a mean-field variational classification head with a
//!   total/aleatoric/epistemic entropy decomposition.
//! * [`selpred`] — selective prediction: thresholding, risk–coverage sweeps,
//!   SNR-binned recall and uncertainty ROC analysis.
//!
//! Everything is deterministic given a master seed; see [`rng`] for how
//! subsystem streams are derived.

pub mod bayesian;
pub mod evidential;
pub mod lps;
pub mod nn;
pub mod preprocess;
pub mod rng;
pub mod selpred;
pub mod signal;
pub mod verify;
