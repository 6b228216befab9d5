//! Lip-movement speaking detector.
//!
//! For each track the normalized y of an upper-lip and a lower-lip landmark
//! form two per-frame series `t` and `b`. Each is compared with a heavily
//! smoothed copy of itself; the mean absolute deviation `c` of both is
//! thresholded to find speaking frames, which are then merged across short
//! gaps and filtered by minimum duration.

use rayon::prelude::*;
use thiserror::Error;

use crate::types::{DetectorConfig, PersonTrack, SpeakingInterval, VideoMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("smoothing window must be odd and >= 1, got {0}")]
    InvalidWindow(usize),
    #[error("signal lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),
    #[error("track {person_id} is empty")]
    EmptyTrack { person_id: u64 },
    #[error("track {person_id}: frame {frame} does not increase")]
    UnorderedTrack { person_id: u64, frame: u64 },
}

/// Raw lip series over a track's contiguous frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct LipSeries {
    pub first_frame: u64,
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub valid: Vec<bool>,
}

/// All intermediate signals for one track. Entries of invalid frames are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LipSignal {
    pub first_frame: u64,
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub t_smooth: Vec<f64>,
    pub b_smooth: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: Vec<f64>,
    pub valid: Vec<bool>,
}

impl LipSignal {
    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }
}

/// Inclusive range of signal indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl FrameSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &FrameSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Odd window length nearest to `window_s * fps`; exact ties round up.
pub fn window_frames(window_s: f64, fps: f64) -> usize {
    let half = ((window_s * fps - 1.0) / 2.0).round();
    if half <= 0.0 {
        1
    } else {
        2 * half as usize + 1
    }
}

/// Per-frame lip positions of a track, with short gaps interpolated.
pub fn extract_lip_series(track: &PersonTrack, config: &DetectorConfig) -> Result<LipSeries, DetectorError> {
    let first = track.observations.first().ok_or(DetectorError::EmptyTrack {
        person_id: track.person_id,
    })?;
    let first_frame = first.frame;
    let len = (track.last_frame() - first_frame + 1) as usize;
    let mut series = LipSeries {
        first_frame,
        t: vec![f64::NAN; len],
        b: vec![f64::NAN; len],
        valid: vec![false; len],
    };

    let mut prev: Option<(usize, f64, f64)> = None;
    for obs in &track.observations {
        let i = match obs.frame.checked_sub(first_frame) {
            Some(i) if prev.is_none_or(|(p, _, _)| i as usize > p) => i as usize,
            _ => {
                return Err(DetectorError::UnorderedTrack {
                    person_id: track.person_id,
                    frame: obs.frame,
                })
            }
        };
        let norm = obs.landmarks.normalize();
        let t = norm.point(config.upper_lip_index).y;
        let b = norm.point(config.lower_lip_index).y;
        series.t[i] = t;
        series.b[i] = b;
        series.valid[i] = true;

        if let Some((p, pt, pb)) = prev {
            let missing = i - p - 1;
            if missing > 0 && missing as u64 <= config.interp_max_gap {
                let span = (i - p) as f64;
                for k in p + 1..i {
                    let w = (k - p) as f64 / span;
                    series.t[k] = pt + (t - pt) * w;
                    series.b[k] = pb + (b - pb) * w;
                    series.valid[k] = true;
                }
            }
        }
        prev = Some((i, t, b));
    }
    Ok(series)
}

/// Centered moving average of odd width `window`, replicating the edge values.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>, DetectorError> {
    if window.is_multiple_of(2) {
        return Err(DetectorError::InvalidWindow(window));
    }
    let n = series.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Summing offsets from the first sample keeps constant inputs exact.
    let base = series[0];
    let first = 0.0;
    let last = series[n - 1] - base;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in series {
        acc += x - base;
        prefix.push(acc);
    }

    let half = (window / 2) as isize;
    let last_idx = n as isize - 1;
    let out = (0..n as isize)
        .map(|i| {
            let lo = i - half;
            let hi = i + half;
            let left = (-lo).max(0) as f64;
            let right = (hi - last_idx).max(0) as f64;
            let a = lo.max(0) as usize;
            let b = hi.min(last_idx) as usize;
            let inner = prefix[b + 1] - prefix[a];
            base + (inner + left * first + right * last) / window as f64
        })
        .collect();
    Ok(out)
}

/// `(d, e, c)` series.
pub type Deviation = (Vec<f64>, Vec<f64>, Vec<f64>);

/// `d = |t - t~|`, `e = |b - b~|`, `c = (d + e) / 2`, elementwise.
pub fn deviation(t: &[f64], b: &[f64], t_smooth: &[f64], b_smooth: &[f64]) -> Result<Deviation, DetectorError> {
    let lens = vec![t.len(), b.len(), t_smooth.len(), b_smooth.len()];
    if lens.iter().any(|&l| l != lens[0]) {
        return Err(DetectorError::LengthMismatch(lens));
    }
    let d: Vec<f64> = t.iter().zip(t_smooth).map(|(x, s)| (x - s).abs()).collect();
    let e: Vec<f64> = b.iter().zip(b_smooth).map(|(x, s)| (x - s).abs()).collect();
    let c = d.iter().zip(&e).map(|(d, e)| (d + e) / 2.0).collect();
    Ok((d, e, c))
}

fn runs(mask: &[bool]) -> Vec<FrameSpan> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(FrameSpan { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(FrameSpan {
            start: s,
            end: mask.len() - 1,
        });
    }
    out
}

/// Frames flagged as speaking before any merging: valid and `c >= threshold`.
pub fn speaking_mask(c: &[f64], valid: &[bool], threshold: f64) -> Vec<bool> {
    c.iter().zip(valid).map(|(&c, &v)| v && c >= threshold).collect()
}

/// Thresholds `c` and post-processes the speaking runs. Spans index into `c`.
///
/// Runs separated by at most `merge_gap_s * fps` valid non-speaking frames
/// are joined; gaps containing invalid frames are never bridged. Spans
/// shorter than `min_duration_s * fps` frames are dropped.
pub fn detect_intervals(c: &[f64], valid: &[bool], config: &DetectorConfig, fps: f64) -> Vec<FrameSpan> {
    debug_assert_eq!(c.len(), valid.len());
    const EPS: f64 = 1e-9;
    let max_gap = config.merge_gap_s * fps + EPS;
    let min_len = config.min_duration_s * fps - EPS;

    let mut merged: Vec<FrameSpan> = Vec::new();
    for run in runs(&speaking_mask(c, valid, config.threshold)) {
        if let Some(last) = merged.last_mut() {
            let gap = run.start - last.end - 1;
            if gap as f64 <= max_gap && valid[last.end + 1..run.start].iter().all(|&v| v) {
                last.end = run.end;
                continue;
            }
        }
        merged.push(run);
    }
    merged.retain(|s| s.len() as f64 >= min_len);
    merged
}

/// Full per-track pipeline.
///
/// Each maximal run of valid frames is smoothed on its own, so data is never
/// averaged across an unbridged gap.
pub fn analyze_track(
    track: &PersonTrack,
    meta: &VideoMeta,
    config: &DetectorConfig,
) -> Result<(LipSignal, Vec<SpeakingInterval>), DetectorError> {
    let series = extract_lip_series(track, config)?;
    let window = window_frames(config.window_s, meta.fps);
    let n = series.valid.len();
    let mut t_smooth = vec![f64::NAN; n];
    let mut b_smooth = vec![f64::NAN; n];
    for seg in runs(&series.valid) {
        let range = seg.start..seg.end + 1;
        t_smooth[range.clone()].copy_from_slice(&smooth(&series.t[range.clone()], window)?);
        b_smooth[range.clone()].copy_from_slice(&smooth(&series.b[range], window)?);
    }
    let (d, e, c) = deviation(&series.t, &series.b, &t_smooth, &b_smooth)?;

    let intervals = detect_intervals(&c, &series.valid, config, meta.fps)
        .into_iter()
        .map(|s| {
            SpeakingInterval::from_frames(
                track.person_id,
                series.first_frame + s.start as u64,
                series.first_frame + s.end as u64,
                meta.fps,
            )
        })
        .collect();

    let signal = LipSignal {
        first_frame: series.first_frame,
        t: series.t,
        b: series.b,
        t_smooth,
        b_smooth,
        d,
        e,
        c,
        valid: series.valid,
    };
    Ok((signal, intervals))
}

/// Outcome of analyzing one track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackAnalysis {
    pub person_id: u64,
    pub signal: LipSignal,
    pub intervals: Vec<SpeakingInterval>,
}

/// Runs [`analyze_track`] over all tracks on up to `jobs` threads. Output
/// order matches `tracks`.
pub fn analyze_tracks(
    tracks: &[PersonTrack],
    meta: &VideoMeta,
    config: &DetectorConfig,
    jobs: usize,
) -> Result<Vec<TrackAnalysis>, DetectorError> {
    let run = |track: &PersonTrack| {
        analyze_track(track, meta, config).map(|(signal, intervals)| TrackAnalysis {
            person_id: track.person_id,
            signal,
            intervals,
        })
    };
    if jobs <= 1 || tracks.len() <= 1 {
        return tracks.iter().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| tracks.par_iter().map(run).collect()),
        Err(err) => {
            log::warn!("falling back to sequential analysis: {err}");
            tracks.iter().map(run).collect()
        }
    }
}
