//! Datasets, run configuration, the command-line workflow and a procedural
//! landscape corpus.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod synthetic;

pub use config::{AnimationConfig, DataConfig, EvalConfig, Preset, RunConfig, CONFIG_VERSION};
pub use dataset::{ingest_images, ingest_videos, load_training_data, preprocess, ImageDataset, VideoDataset, VideoIndexEntry};
pub use synthetic::{Scene, SyntheticCorpus};
