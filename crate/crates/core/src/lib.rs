//! Place recognition from stereo visual odometry.
//!
//! Keyframe points are accumulated into imitated omnidirectional scans
//! ([`scan`]), aligned by PCA ([`alignment`]), summarized by one of three
//! global signatures ([`descriptors`]), matched through structure, intensity
//! and fused difference matrices ([`matching`]) and scored against ground
//! truth ([`evaluation`]). [`pipeline`] chains the stages; [`synth`] builds
//! synthetic sequences to run them on.
//!
//! ```no_run
//! use voplace::config::PipelineConfig;
//! use voplace::descriptors::DescriptorKind;
//! use voplace::keyframe::load_sequence;
//! use voplace::pipeline::{run_pipeline, MatchSource, PipelineInput};
//!
//! let keyframes = load_sequence("keyframes.txt")?;
//! let input = PipelineInput { queries: &keyframes, references: None };
//! let run = run_pipeline(input, &PipelineConfig::default(), &[DescriptorKind::ScanContext], MatchSource::Fused, None)?;
//! println!("AUC {:.3}", run.descriptors[0].evaluation.curve.auc);
//! # Ok::<(), voplace::error::Error>(())
//! ```

pub mod alignment;
pub mod archive;
pub mod config;
pub mod descriptors;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod keyframe;
pub mod matching;
pub mod pipeline;
pub mod scan;
pub mod synth;

pub use error::{Error, Result};
