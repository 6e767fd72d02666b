//! The generative model (a PCA linear decoder) and the target-attribute classifier.
//!
//! Both expose batched forward passes and exact pullbacks so that the discovery loss can
//! be differentiated from the classifier output back to latent space.

mod classifier;
mod generator;

pub use classifier::{
    train_classifier, train_classifier_on, Classifier, ClassifierConfig, ClassifierTape,
    DifferentiableClassifier, TargetClassifier, TrainingRecord, PROB_FLOOR,
};
pub use generator::{
    fit_pca_decoder, ClampTape, DifferentiableGenerator, Generator, IdentityGenerator,
    LinearDecoder, ModelMeta, DECODER_FORMAT, IDENTITY_FORMAT,
};
