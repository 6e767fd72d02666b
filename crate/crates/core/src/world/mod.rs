//! Procedural sprite world: five labeled factors, a supersampled rasterizer and skewed
//! sampling of training sets.

mod attributes;
mod dataset;
mod render;

pub use attributes::{
    binarize_attribute, factor_index, sprite_attributes, AttributeKind, AttributeSpec,
    FACTOR_NAMES, ORIENTATION, POS_X, POS_Y, SCALE, SHAPE, SHAPE_NAMES,
};
pub use dataset::{build_dataset, sample_skewed_pair, DatasetConfig, LabeledDataset};
pub use render::{render_scene, Image, SceneParams, Shape, MIN_SIDE};
