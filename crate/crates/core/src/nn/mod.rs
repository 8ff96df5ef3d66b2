//! Dense networks with exact reverse-mode gradients, Adam and target-network blending.

mod adam;
mod checkpoint;
mod dense;

pub use adam::{Adam, StepStatus};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, to_checkpoint_string, write_checkpoint};
pub use dense::{Backprop, DenseNet, Gradients, OutputActivation, Trace};
