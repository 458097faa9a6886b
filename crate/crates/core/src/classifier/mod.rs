//! Small three-head convolutional PSF label classifier with hand-written
//! backpropagation.

mod checkpoint;
mod eval;
mod model;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use eval::{
    class_names, evaluate, predict, report_from_predictions, Confusion, EvalReport, HEAD_NAMES,
};
pub use model::{
    argmax, gradient_check, layout, normalize_input, softmax, ClassifierModel, Logits, LossKind,
    TensorGradCheck, TensorInfo, CHANNELS, DEFAULT_INPUT, FEATURES, HEADS,
};
pub use train::{
    load_samples, loss_log_csv, psf_input, train, train_with, EpochLog, Sample, TrainConfig,
    LOG_FLOOR, LOSS_CSV_HEADER,
};
