//! Augmentation, encoder, classification head, backprop, Adam and training.
//!
//! The encoder is a ReLU MLP whose output rows are L2-normalized; the head is
//! an affine map from the normalized embedding to class logits. Cross-entropy
//! reads the logits, the contrastive terms read the embeddings.

mod adam;
mod augment;
mod checkpoint;
mod encoder;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use augment::{make_view_batch, make_views, AugmentPolicy, ViewBatch};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use encoder::{
    backprop, encode, head_logits, Dense, EncoderParams, EncoderShape, ForwardCache, ParamGrads, NORM_GUARD,
};
pub use trainer::{
    adapt_to_episode, head_accuracy, loss_and_grads, train, EpochRecord, FinetuneConfig, HeadInit, StepOutput,
    TrainConfig, TrainState, TrainingTrace,
};
