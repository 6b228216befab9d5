//! Speaking-person detection from facial landmark trajectories.
//!
//! Per-frame 68-point face landmarks are grouped into person tracks
//! ([`tracker`]), turned into normalized lip signals and thresholded into
//! speaking intervals ([`detector`]). [`format`] reads and writes the
//! line-oriented landmark files and result documents, and [`synth`] renders
//! synthetic scenes with ground truth for testing.

pub mod bench;
pub mod cli;
pub mod detector;
pub mod format;
pub mod landmarks;
pub mod synth;
mod template;
pub mod tracker;
pub mod types;

pub use detector::{analyze_track, analyze_tracks, LipSignal};
pub use landmarks::{LandmarkSet, NormalizedLandmarks, Point};
pub use tracker::build_tracks;
pub use types::{DetectorConfig, FaceObservation, PersonTrack, SpeakingInterval, TrackerParams, VideoMeta};
