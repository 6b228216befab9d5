//! Scoring the full pipeline against synthetic ground truth.

use crate::detector::{analyze_track, DetectorError, LipSignal};
use crate::synth::{score_intervals, IouScore, Scene};
use crate::tracker::{build_track_indices, TrackerError};
use crate::types::{DetectorConfig, PersonTrack, SpeakingInterval};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// A track together with the scene face most of its observations came from.
#[derive(Debug, Clone)]
pub struct LabeledTrack {
    pub person_id: u64,
    pub face_index: usize,
    /// Observations whose source face differs from the previous one.
    pub label_changes: usize,
    pub observations: usize,
    pub signal: LipSignal,
    pub intervals: Vec<SpeakingInterval>,
}

#[derive(Debug, Clone)]
pub struct FaceEvaluation {
    pub face_index: usize,
    pub truth: Vec<SpeakingInterval>,
    /// Intervals of all tracks attributed to this face.
    pub predicted: Vec<SpeakingInterval>,
    pub score: IouScore,
}

#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub tracks: Vec<LabeledTrack>,
    pub faces: Vec<FaceEvaluation>,
}

impl SceneEvaluation {
    pub fn identity_switches(&self) -> usize {
        self.tracks.iter().map(|t| t.label_changes).sum()
    }

    /// Smallest IoU over every truth segment in the scene, if any.
    pub fn min_iou(&self) -> Option<f64> {
        self.faces
            .iter()
            .flat_map(|f| f.score.per_segment.iter().copied())
            .min_by(f64::total_cmp)
    }

    /// Intervals reported on faces that never speak.
    pub fn silent_face_intervals(&self) -> usize {
        self.faces
            .iter()
            .filter(|f| f.truth.is_empty())
            .map(|f| f.predicted.len())
            .sum()
    }

    /// Predicted intervals on speaking faces that overlap no truth segment.
    pub fn spurious_intervals(&self) -> usize {
        self.faces
            .iter()
            .filter(|f| !f.truth.is_empty())
            .map(|f| {
                f.predicted
                    .iter()
                    .filter(|p| {
                        !f.truth
                            .iter()
                            .any(|t| p.start_frame <= t.end_frame && t.start_frame <= p.end_frame)
                    })
                    .count()
            })
            .sum()
    }
}

fn majority(labels: impl Iterator<Item = usize>, faces: usize) -> usize {
    let mut counts = vec![0usize; faces.max(1)];
    for l in labels {
        counts[l] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(i, _)| i)
}

/// Tracks the scene, analyzes every track and scores each face.
pub fn evaluate_scene(scene: &Scene, config: &DetectorConfig) -> Result<SceneEvaluation, BenchError> {
    let members = build_track_indices(&scene.observations, &config.tracker)?;
    let n_faces = scene.truth.len();
    let mut tracks = Vec::with_capacity(members.len());
    for (id, idx) in members.iter().enumerate() {
        let labels: Vec<usize> = idx.iter().map(|&i| scene.labels[i]).collect();
        let track = PersonTrack {
            person_id: id as u64,
            observations: idx.iter().map(|&i| scene.observations[i].clone()).collect(),
        };
        let (signal, intervals) = analyze_track(&track, &scene.meta, config)?;
        tracks.push(LabeledTrack {
            person_id: id as u64,
            face_index: majority(labels.iter().copied(), n_faces),
            label_changes: labels.windows(2).filter(|w| w[0] != w[1]).count(),
            observations: idx.len(),
            signal,
            intervals,
        });
    }

    let faces = scene
        .truth
        .iter()
        .map(|truth| {
            let mut predicted: Vec<SpeakingInterval> = tracks
                .iter()
                .filter(|t| t.face_index == truth.face_index)
                .flat_map(|t| t.intervals.iter().copied())
                .collect();
            predicted.sort_by_key(|p| p.start_frame);
            let score = score_intervals(&predicted, &truth.intervals);
            FaceEvaluation {
                face_index: truth.face_index,
                truth: truth.intervals.clone(),
                predicted,
                score,
            }
        })
        .collect();
    Ok(SceneEvaluation { tracks, faces })
}
