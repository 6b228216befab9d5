//! Online grouping of per-frame face observations into person tracks.
//!
//! Each frame, every (active track, observation) pair within
//! `max_dist_factor` face heights is a candidate. Candidates are consumed in
//! order of increasing distance, ties broken by track id and then by
//! observation index; unmatched observations open new tracks.

use std::cmp::Ordering;

use thiserror::Error;

use crate::landmarks::LandmarkSet;
use crate::types::{FaceObservation, PersonTrack, TrackerParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackerError {
    #[error("frame {frame} is not after frame {last_frame} of active track {track_id}")]
    FrameOrder { frame: u64, last_frame: u64, track_id: u64 },
    #[error("observations of one batch span frames {first} and {other}")]
    MixedFrames { first: u64, other: u64 },
}

/// Mouth-center distance between two faces in units of their mean face height.
pub fn association_distance(a: &LandmarkSet, b: &LandmarkSet) -> f64 {
    let scale = (a.face_height() + b.face_height()) / 2.0;
    a.mouth_center().distance(b.mouth_center()) / scale
}

#[derive(Debug, Clone)]
struct ActiveTrack {
    id: u64,
    last: LandmarkSet,
    last_frame: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrackerState {
    active: Vec<ActiveTrack>,
    next_id: u64,
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ids of tracks still open for association, ascending.
    pub fn active_ids(&self) -> Vec<u64> {
        self.active.iter().map(|t| t.id).collect()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Drops every track whose last observation is more than `max_gap`
    /// frames before `frame`, returning their ids.
    fn expire(&mut self, frame: u64, max_gap: u64) -> Vec<u64> {
        let mut closed = Vec::new();
        self.active.retain(|t| {
            let keep = frame.saturating_sub(t.last_frame) <= max_gap;
            if !keep {
                closed.push(t.id);
            }
            keep
        });
        closed
    }
}

/// Result of associating one frame: the track id for each input observation
/// (same order as the input) and the ids of tracks closed by this frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameAssignment {
    pub track_ids: Vec<u64>,
    pub closed: Vec<u64>,
}

/// Greedy minimum-distance association of one frame's observations.
pub fn associate_frame(
    state: &mut TrackerState,
    frame_obs: &[FaceObservation],
    params: &TrackerParams,
) -> Result<FrameAssignment, TrackerError> {
    let Some(frame) = frame_obs.first().map(|o| o.frame) else {
        return Ok(FrameAssignment {
            track_ids: Vec::new(),
            closed: Vec::new(),
        });
    };
    if let Some(o) = frame_obs.iter().find(|o| o.frame != frame) {
        return Err(TrackerError::MixedFrames {
            first: frame,
            other: o.frame,
        });
    }
    if let Some(t) = state.active.iter().find(|t| t.last_frame >= frame) {
        return Err(TrackerError::FrameOrder {
            frame,
            last_frame: t.last_frame,
            track_id: t.id,
        });
    }
    let closed = state.expire(frame, params.max_gap);

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, track) in state.active.iter().enumerate() {
        for (oi, obs) in frame_obs.iter().enumerate() {
            let d = association_distance(&track.last, &obs.landmarks);
            if d <= params.max_dist_factor {
                candidates.push((d, ti, oi));
            }
        }
    }
    // `active` is kept sorted by id, so the track position orders like the id.
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut track_taken = vec![false; state.active.len()];
    let mut assigned: Vec<Option<u64>> = vec![None; frame_obs.len()];
    for (_, ti, oi) in candidates {
        if track_taken[ti] || assigned[oi].is_some() {
            continue;
        }
        track_taken[ti] = true;
        assigned[oi] = Some(state.active[ti].id);
        state.active[ti].last = frame_obs[oi].landmarks.clone();
        state.active[ti].last_frame = frame;
    }

    let track_ids = assigned
        .into_iter()
        .zip(frame_obs)
        .map(|(id, obs)| {
            id.unwrap_or_else(|| {
                let id = state.next_id;
                state.next_id += 1;
                state.active.push(ActiveTrack {
                    id,
                    last: obs.landmarks.clone(),
                    last_frame: frame,
                });
                id
            })
        })
        .collect();
    Ok(FrameAssignment { track_ids, closed })
}

/// Groups frame-ordered observations into tracks, returning for each track
/// the indices of its observations. Track `k` of the result has id `k`.
pub fn build_track_indices(
    observations: &[FaceObservation],
    params: &TrackerParams,
) -> Result<Vec<Vec<usize>>, TrackerError> {
    let mut state = TrackerState::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut offset = 0;
    for batch in observations.chunk_by(|a, b| a.frame == b.frame) {
        let assignment = associate_frame(&mut state, batch, params)?;
        for (k, id) in assignment.track_ids.into_iter().enumerate() {
            // Ids are dense and allocated in order.
            let slot = id as usize;
            if slot == members.len() {
                members.push(Vec::new());
            }
            members[slot].push(offset + k);
        }
        offset += batch.len();
    }
    Ok(members)
}

/// Groups frame-ordered observations into tracks.
///
/// Every observation lands in exactly one track. Output is sorted by first
/// frame, then id; ids follow creation order.
pub fn build_tracks(
    observations: &[FaceObservation],
    params: &TrackerParams,
) -> Result<Vec<PersonTrack>, TrackerError> {
    let mut tracks: Vec<PersonTrack> = build_track_indices(observations, params)?
        .into_iter()
        .enumerate()
        .map(|(id, idx)| PersonTrack {
            person_id: id as u64,
            observations: idx.into_iter().map(|i| observations[i].clone()).collect(),
        })
        .collect();
    tracks.sort_by(|a, b| match a.first_frame().cmp(&b.first_frame()) {
        Ordering::Equal => a.person_id.cmp(&b.person_id),
        other => other,
    });
    Ok(tracks)
}
