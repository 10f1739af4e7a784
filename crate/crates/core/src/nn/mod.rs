//! Minimal f64 training engine: dense 2-D tensors, a tape-based reverse-mode
//! autodiff with exactly the ops the models need, maskable parameters whose
//! frozen entries never move, network definitions, and plain SGD.
//!
//! Scope is deliberate: everything is `f64`, everything is 2-D (`[rows,
//! cols]`; vectors are `[1, n]`), and the op set is closed. Correctness is
//! anchored by central finite differences (see [`gradcheck`]) rather than by
//! trusting each hand-written backward pass.

pub mod classify;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use layers::{LayerKind, Network};
pub use optim::SgdMomentum;
pub use params::{MaskableParam, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
