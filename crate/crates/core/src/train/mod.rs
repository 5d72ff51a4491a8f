//! Dense feed-forward network with a probabilistic logit head, trained with
//! pathwise (reparameterized) gradients of the Monte Carlo averaged loss.

mod fit;
mod grad;
mod head;
mod model;
mod predict;

pub use fit::{fit, EpochRecord, OptimizerKind, TrainConfig, TrainingLog};
pub use grad::{batch_loss, grad, Gradients, LayerGrad, Sample};
pub use head::{head_backward, loss, HeadGrad, PROB_CLAMP};
pub use model::{
    forward, softplus, Activation, Dense, HeadMode, HetModel, ModelSpec, ScaleTransform,
    MODEL_FORMAT_VERSION,
};
pub use predict::predict_dataset;
