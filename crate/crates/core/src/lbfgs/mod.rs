//! Limited-memory BFGS with a curvature-guarded secant memory and a strong
//! Wolfe line search.

mod iterate;
mod memory;
mod wolfe;

pub use iterate::{lbfgs_iterate, LbfgsState, StepReport};
pub use memory::SecantMemory;
pub use wolfe::{wolfe_search, LineSearch, WolfeParams};
