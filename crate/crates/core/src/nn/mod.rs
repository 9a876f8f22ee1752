//! Small feed-forward networks with hand-written backpropagation, the
//! adversarial losses, optimizers and checkpoints.

mod checkpoint;
mod loss;
mod mlp;
mod optim;
mod optimum;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use loss::{
    adversarial_gradients, bce_loss, classifier_gradients, d_loss, g_loss, joint_input, smooth_label, AdversarialBatch,
    AdversarialGradients, LossSpec,
};
pub use mlp::{Dense, Gradients, Mlp, Trace, EPS};
pub use optim::{OptState, OptimizerConfig, OptimizerKind};
pub use optimum::{
    closed_form_optimum, optimal_discriminator_check, pointwise_objective, DiscreteJointDistribution, OptimumCheck,
};
