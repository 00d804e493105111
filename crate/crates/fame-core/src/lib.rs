//! Foreground-background merging (FAME) for video clips, plus a desk-scale
//! contrastive-learning probe.
//!
//! The pipeline discovers each clip's moving foreground from frame
//! differences and color statistics, binarizes it into a fixed-portion
//! mask, and composites the foreground onto replacement backgrounds. The
//! probe trains a tiny encoder with InfoNCE on synthetic labeled videos and
//! measures, via nearest-neighbor retrieval, whether the learned
//! representation tracks motion identity or background identity.

pub mod clip;
pub mod encoder;
pub mod error;
pub mod foreground;
pub mod io;
pub mod loss;
pub mod merge;
pub mod pnm;
pub mod synth;
pub mod train;

pub use clip::{Clip, Frame};
pub use encoder::{EncoderGrads, EncoderParams, EMBED_WIDTH, HIDDEN_WIDTH};
pub use error::{Error, Result};
pub use foreground::{
    binarize, fame_mask, sample_color_model, seed_region, soft_mask, variant_mask, BinaryMask,
    ColorModel, MaskVariant, SeedMap, SoftMask,
};
pub use io::{load_clip, save_clip, StorageKind};
pub use merge::{
    assign_backgrounds, fame_augment_batch, merge, AugmentConfig, BackgroundMode, BatchAssignment,
    Branches,
};
pub use pnm::import_frames;
pub use synth::{generate_synthetic, generate_with_ground_truth, LabeledClip, SynthConfig};
pub use train::{
    evaluate_retrieval, split_dataset, train_probe, Augmentation, ProbeMetrics, TrainOptions,
};
