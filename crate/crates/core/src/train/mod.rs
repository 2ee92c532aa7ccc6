//! Data pipeline, loss, optimizer and training loop.

pub mod data;
pub mod optim;
pub mod trainer;

pub use data::{compute_rgb_mean, sample_batch, sample_patch, Batch, Dataset, Dihedral, TrainPair};
pub use optim::{l1_loss, lr_at, AdamConfig, AdamState};
pub use trainer::{train, train_step, LogRecord, NoHooks, TrainConfig, TrainHooks, TrainLog};
