//! Optimizer, schedules, the training loop and checkpoint files.

mod adamw;
mod checkpoint;
mod schedule;
mod trainer;

pub use adamw::AdamW;
pub use checkpoint::{
    load_checkpoint, load_params, read_tensors, save_checkpoint, sidecar_path, write_tensors, CheckpointMeta, CHECKPOINT_FORMAT, MAGIC,
};
pub use schedule::{eps_at, lr_at, EpsSchedule, TrainConfig};
pub use trainer::{ce_loss_over_time, evaluate, train, write_log_csv, Checkpoint, LogRow, TrainOutcome};
