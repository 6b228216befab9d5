//! Domain records shared across ingestion, tracking and detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmarks::{LandmarkSet, NUM_LANDMARKS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

fn check(ok: bool, field: &'static str, requirement: &'static str, value: f64) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement,
            value,
        })
    }
}

/// Properties of the source video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub frame_count: Option<u64>,
}

impl VideoMeta {
    pub fn new(fps: f64, width: u32, height: u32) -> Result<Self, ConfigError> {
        let meta = Self {
            fps,
            width,
            height,
            frame_count: None,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.fps.is_finite() && self.fps > 0.0, "fps", "positive", self.fps)?;
        check(self.width > 0, "width", "positive", self.width as f64)?;
        check(self.height > 0, "height", "positive", self.height as f64)
    }

    pub fn frame_time(&self, frame: u64) -> f64 {
        frame as f64 / self.fps
    }
}

/// Axis-aligned face box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// One detected face in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation {
    pub frame: u64,
    pub time_s: f64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub landmarks: LandmarkSet,
}

impl FaceObservation {
    /// Builds an observation with `time_s` derived from `meta.fps`.
    pub fn new(meta: &VideoMeta, frame: u64, bbox: BoundingBox, confidence: f64, landmarks: LandmarkSet) -> Self {
        Self {
            frame,
            time_s: meta.frame_time(frame),
            bbox,
            confidence,
            landmarks,
        }
    }

    /// Bounding box of the landmarks themselves.
    pub fn landmark_bbox(landmarks: &LandmarkSet) -> BoundingBox {
        let pts = landmarks.points();
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in &pts[1..NUM_LANDMARKS] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        BoundingBox {
            x: lo.x,
            y: lo.y,
            w: hi.x - lo.x,
            h: hi.y - lo.y,
        }
    }
}

/// Observations attributed to one person, strictly increasing in frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    pub person_id: u64,
    pub observations: Vec<FaceObservation>,
}

impl PersonTrack {
    pub fn first_frame(&self) -> u64 {
        self.observations.first().map_or(0, |o| o.frame)
    }

    pub fn last_frame(&self) -> u64 {
        self.observations.last().map_or(0, |o| o.frame)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn summary(&self) -> TrackSummary {
        TrackSummary {
            person_id: self.person_id,
            first_frame: self.first_frame(),
            last_frame: self.last_frame(),
            observations: self.len(),
        }
    }
}

/// Span and size of a track, without its observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub person_id: u64,
    pub first_frame: u64,
    pub last_frame: u64,
    pub observations: usize,
}

/// Inclusive frame bounds of a speaking segment for one person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakingInterval {
    pub person_id: u64,
    pub start_frame: u64,
    pub end_frame: u64,
    pub start_s: f64,
    pub end_s: f64,
}

impl SpeakingInterval {
    pub fn from_frames(person_id: u64, start_frame: u64, end_frame: u64, fps: f64) -> Self {
        debug_assert!(start_frame <= end_frame);
        Self {
            person_id,
            start_frame,
            end_frame,
            start_s: start_frame as f64 / fps,
            end_s: end_frame as f64 / fps,
        }
    }

    /// Number of frames covered, counting both ends.
    pub fn len_frames(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }
}

/// Association parameters for grouping faces into tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Largest mouth-center jump between frames, in face heights.
    pub max_dist_factor: f64,
    /// Frames a track may go unobserved before it is closed.
    pub max_gap: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            max_dist_factor: 0.5,
            max_gap: 25,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(
            self.max_dist_factor.is_finite() && self.max_dist_factor >= 0.0,
            "tracker.max_dist_factor",
            "finite and >= 0",
            self.max_dist_factor,
        )
    }
}

/// Every tunable of the detection pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Smoothing (accumulation) window in seconds.
    pub window_s: f64,
    /// Speaking threshold on the combined deviation, in face heights.
    pub threshold: f64,
    /// Speaking runs separated by at most this many seconds are merged.
    pub merge_gap_s: f64,
    /// Intervals shorter than this many seconds are dropped.
    pub min_duration_s: f64,
    /// Longest run of missing frames bridged by linear interpolation.
    pub interp_max_gap: u64,
    /// Landmark index used for the upper-lip signal.
    pub upper_lip_index: usize,
    /// Landmark index used for the lower-lip signal.
    pub lower_lip_index: usize,
    pub tracker: TrackerParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            threshold: 0.01,
            merge_gap_s: 0.3,
            min_duration_s: 0.5,
            interp_max_gap: 12,
            upper_lip_index: crate::landmarks::UPPER_LIP_OUTER,
            lower_lip_index: crate::landmarks::LOWER_LIP_OUTER,
            tracker: TrackerParams::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(
            self.window_s.is_finite() && self.window_s > 0.0,
            "window_s",
            "positive",
            self.window_s,
        )?;
        check(
            self.threshold.is_finite() && self.threshold > 0.0,
            "threshold",
            "positive",
            self.threshold,
        )?;
        check(
            self.merge_gap_s.is_finite() && self.merge_gap_s >= 0.0,
            "merge_gap_s",
            "finite and >= 0",
            self.merge_gap_s,
        )?;
        check(
            self.min_duration_s.is_finite() && self.min_duration_s >= 0.0,
            "min_duration_s",
            "finite and >= 0",
            self.min_duration_s,
        )?;
        check(
            self.upper_lip_index < NUM_LANDMARKS,
            "upper_lip_index",
            "a landmark index below 68",
            self.upper_lip_index as f64,
        )?;
        check(
            self.lower_lip_index < NUM_LANDMARKS,
            "lower_lip_index",
            "a landmark index below 68",
            self.lower_lip_index as f64,
        )?;
        self.tracker.validate()
    }
}
