//! Depth-map numerics: preprocessing, training-loss terms, scale/shift
//! alignment and warm-to-cool colorization. Maps are plain row-major grids;
//! no network inference happens here.

mod colormap;
mod grid;
mod loss;
mod preprocess;

pub use colormap::{colorize, gradient_index, RgbImage, GRADIENT};
pub use grid::{DepthError, DepthMap, FeatureSet, RegionMask};
pub use loss::{
    align_loss, cosine_similarity, cutmix_loss, fit_affine, labeled_loss, pseudo_loss,
    total_loss, unlabeled_loss, AffineFit, LossWeights,
};
pub use preprocess::{crop, normalize_min_max, preprocess, resample_bilinear, CropRect};
