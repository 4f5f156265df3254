//! Per-AP neural reconstruction of RP drifts from monitor-point drifts.

mod huber;
mod network;
mod train;

pub use huber::{huber, huber_derivative, huber_loss};
pub use network::{Dense, Gradients, Network, DEFAULT_HIDDEN};
pub use train::{
    finetune, preprocess, pretrain, reconstruct_nn, train_all, DeltaSample, NnModelSet, NnParams, NnTrainReport,
    TrainLog, TrainParams,
};
