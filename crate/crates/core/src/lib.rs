//! Pronunciation analysis for single Arabic letters: audio loading,
//! denoising and trimming, spectral features, colormap images, dataset
//! tooling, classical classifiers and evaluation.

pub mod audio;
pub mod classifiers;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fsutil;
pub mod imaging;
pub mod preprocess;

pub use error::{Error, Result};
