//! Contactless silent speech recognition from impulse-radio UWB radar frames.
//!
//! The pipeline runs from raw frame sets through loopback clutter reduction
//! ([`clutter`]) and envelope features of concatenated frames ([`ferasec`])
//! into either a dynamic-time-warping nearest-neighbour classifier ([`dtw`])
//! or a hybrid network/HMM classifier ([`hmm`]). [`synth`] renders labelled
//! synthetic corpora and [`harness`] runs leave-one-out evaluation over them.

mod codec;

pub mod clutter;
pub mod dtw;
pub mod error;
pub mod ferasec;
pub mod frames;
pub mod harness;
pub mod hmm;
pub mod manifest;
pub mod synth;

pub use error::{Error, Result};
pub use ferasec::{FeatureMatrix, FerasecConfig};
pub use frames::{Frame, FrameKind, FrameSet};
pub use manifest::{CorpusManifest, ManifestEntry, RadarPosition};
