//! Multi-scale image classification with spatial pyramid pooling and
//! multiple kernel learning.
//!
//! Images are warped to several square sizes, each warp is run through a
//! seeded convolutional extractor and pooled by a spatial pyramid into a
//! fixed-length descriptor. One kernel per scale is then fused by learning
//! simplex weights jointly with a soft-margin SVM, one classifier per class.

pub mod config;
pub mod dataio;
pub mod error;
pub mod featmap;
pub mod kernels;
pub mod mkl;
pub mod pipeline;
pub mod spp;
pub mod svm;

pub use config::RunConfig;
pub use error::{Error, ErrorClass, FormatErrorKind, Result};
pub use featmap::{extract, warp, Extractor, ExtractorSpec, FeatureMap, Image, LayerSpec, ScaleSet};
pub use kernels::{combine, gram, normalize_gram, GramMatrix, KernelSpec, SimplexWeights};
pub use mkl::{mkl_gradient, mkl_train, outer_objective, MklModel, MklOptions, MklProblem};
pub use pipeline::{
    evaluate, make_splits, predict, train_ovr, ConfusionMatrix, Dataset, EvalMode, ExperimentReport, Method, SplitPlan,
    TrainConfig,
};
pub use spp::{descriptor_length, spp_pool, window_geometry, Descriptor, PyramidSpec};
pub use svm::{svm_solve, SolverOptions, SvmModel, TrainSet};
