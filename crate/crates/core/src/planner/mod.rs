//! Fully convolutional grasp planner with a per-angle-bin sigmoid head.

pub mod checkpoint;
pub mod gradcheck;
pub mod map;
pub mod net;
pub mod spec;
pub mod tensor;
pub mod train;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use map::{
    angle_bin, bin_to_angle, forward_full, render_overlay, select_grasp, write_heatmaps, PlannedGrasp,
    ProbabilityMap, Selection, N_ANGLE_BINS,
};
pub use net::{forward_patch, init_params, masked_loss, LayerParams, ModelParams, Scalar};
pub use spec::{Activation, HeadStage, LayerSpec, ModelSpec, RECEPTIVE_FIELD, TOTAL_STRIDE};
pub use tensor::Tensor;
pub use train::{train, StepStats, TrainConfig, TrainSample, PATCH_BYTES};
