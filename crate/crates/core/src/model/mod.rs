//! Subnetworks, the windowed FBPINN sum and hard boundary lifting.

pub mod batch;
mod checkpoint;
mod fbpinn;
mod subnet;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use fbpinn::{coordinate_jets, fbpinn_jet, FbpinnModel};
pub use subnet::{init_params, subnet_forward, subnet_forward_jet, SubnetConfig};
