//! Learning: negative sampling, the four-task loss and its gradients,
//! Adam updates and the early-stopped training loop.

mod adam;
mod batch;
mod gradcheck;
mod loss;
mod negatives;
mod trainer;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use batch::{Batch, ConItem, EntItem, InsItem, SubItem};
pub use gradcheck::{gradcheck, GradcheckConfig, GradcheckRow};
pub use loss::{loss, loss_and_gradients, LossBreakdown};
pub use negatives::{NegativeSampler, Task};
pub use trainer::{train, EarlyStopper, LogRecord, Observation, TrainConfig, TrainData, TrainOutcome};
