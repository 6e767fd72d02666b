//! Discovery of an image classifier's unknown biased attribute.
//!
//! A biased attribute is modelled as a hyperplane in the latent space of a generative
//! model. Moving a latent along the hyperplane normal changes that attribute in the
//! generated image; if the classifier's prediction for its target attribute changes
//! along the way, the classifier depends on the attribute. [`discovery::discover`]
//! searches for the hyperplane whose traversals change the prediction the most while
//! staying orthogonal to the target and to any known attributes.
//!
//! The crate is self-contained: a procedural sprite world ([`world`]), a PCA decoder
//! and a small classifier with exact gradients ([`models`]), latent hyperplanes and the
//! ground-truth joint fit ([`hyperplane`]), recovery metrics and an experiment grid
//! ([`evaluation`]) and a command-line front end ([`cli`]).

pub mod artifact;
pub mod cli;
pub mod discovery;
pub mod error;
pub mod evaluation;
pub mod hyperplane;
pub mod models;
pub mod numgrad;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
