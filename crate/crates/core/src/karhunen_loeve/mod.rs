//! Karhunen-Loève models of processes with a known covariance kernel.
//!
//! The eigenproblem `a = λ ∫ B a` is solved by the Nyström method on a
//! composite Gauss-Legendre grid; a second solve on twice the nodes supplies
//! the error bounds `η_k` and `δ_k(t)` that the `c_N` formulas consume.

mod cn;
mod kernel;
mod model;
mod nystrom;

pub use cn::{cn_theorem10, cn_theorem11, cn_theorem9, KlTail, KlTailFn};
pub use kernel::{AnalyticEigen, KernelFn, KernelKind, KernelSpec};
pub use model::{build_kl_model, check_route, default_route, eigen_with_errors, kl_path, mode_draws, simulate_kl, KlModel, KlOptions};
pub use nystrom::{compare_systems, estimate_errors, nystrom_eigensystem, EigenSystem};
