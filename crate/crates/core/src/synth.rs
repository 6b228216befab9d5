//! Synthetic landmark scenes with known speaking intervals.
//!
//! A face is the neutral template placed along a piecewise-linear mouth path
//! and scaled to a (linearly varying) face height. While speaking, the lip
//! landmarks move apart and together sinusoidally; every coordinate then
//! receives Gaussian jitter and is rounded to the landmark-file precision.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::quantize;
use crate::landmarks::{LandmarkSet, Point, LOWER_LIP_OUTER, NUM_LANDMARKS, UPPER_LIP_OUTER};
use crate::template::NEUTRAL_FACE;
use crate::types::{FaceObservation, SpeakingInterval, VideoMeta};

/// Name of the random generator, recorded in truth files.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng/seed_from_u64";

/// Lip points that follow the outer lip middles at half amplitude.
const UPPER_NEIGHBORS: [usize; 5] = [50, 52, 61, 62, 63];
const LOWER_NEIGHBORS: [usize; 5] = [56, 58, 65, 66, 67];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid scene spec: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(msg.into())
}

/// The neutral template with its mouth center at `center` and the given face
/// height in pixels.
pub fn face_landmarks(center: Point, height: f64) -> LandmarkSet {
    LandmarkSet::new(template_points(center, height)).expect("template face is valid for heights >= 1 px")
}

fn template_points(center: Point, height: f64) -> Vec<Point> {
    NEUTRAL_FACE
        .iter()
        .map(|&[x, y]| Point::new(center.x + x * height, center.y + y * height))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
}

fn default_amplitude() -> f64 {
    0.03
}
fn default_freq() -> f64 {
    4.0
}
fn default_noise() -> f64 {
    0.002
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceSpec {
    /// Mouth-center waypoints; held constant before the first and after the last.
    pub path: Vec<Waypoint>,
    pub face_height_px: f64,
    /// Face height at the end of the scene; defaults to `face_height_px`.
    #[serde(default)]
    pub face_height_end_px: Option<f64>,
    #[serde(default)]
    pub speech_segments: Vec<[f64; 2]>,
    /// Lip excursion in face heights.
    #[serde(default = "default_amplitude")]
    pub lip_amplitude: f64,
    #[serde(default = "default_freq")]
    pub lip_freq_hz: f64,
    /// Per-coordinate jitter in face heights.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout_segments: Vec<[f64; 2]>,
}

impl FaceSpec {
    pub fn stationary(center: Point, face_height_px: f64) -> Self {
        Self {
            path: vec![Waypoint {
                t_s: 0.0,
                x: center.x,
                y: center.y,
            }],
            face_height_px,
            face_height_end_px: None,
            speech_segments: Vec::new(),
            lip_amplitude: default_amplitude(),
            lip_freq_hz: default_freq(),
            noise_sigma: default_noise(),
            dropout_segments: Vec::new(),
        }
    }

    fn position(&self, t: f64) -> Point {
        let path = &self.path;
        let first = path[0];
        if t <= first.t_s || path.len() == 1 {
            return Point::new(first.x, first.y);
        }
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= b.t_s {
                let f = (t - a.t_s) / (b.t_s - a.t_s);
                return Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f);
            }
        }
        let last = path[path.len() - 1];
        Point::new(last.x, last.y)
    }

    fn height(&self, t: f64, duration_s: f64) -> f64 {
        let end = self.face_height_end_px.unwrap_or(self.face_height_px);
        self.face_height_px + (end - self.face_height_px) * (t / duration_s).clamp(0.0, 1.0)
    }
}

fn default_width() -> u32 {
    1920
}
fn default_height() -> u32 {
    1080
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub fps: f64,
    pub duration_s: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default)]
    pub faces: Vec<FaceSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.fps).round() as u64
    }

    /// Inclusive frame range for `[start_s, end_s]`, clipped to the scene.
    pub fn frames_of(&self, [start, end]: [f64; 2]) -> (u64, u64) {
        let last = self.frame_count().saturating_sub(1);
        let a = ((start * self.fps).round() as u64).min(last);
        let b = ((end * self.fps).round() as u64).min(last);
        (a, b)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid(format!("duration_s must be positive, got {}", self.duration_s)));
        }
        if self.frame_count() == 0 {
            return Err(invalid("scene is shorter than one frame"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("frame dimensions must be positive"));
        }
        for (i, face) in self.faces.iter().enumerate() {
            let ctx = |msg: String| invalid(format!("face {i}: {msg}"));
            if face.path.is_empty() {
                return Err(ctx("path needs at least one waypoint".into()));
            }
            if face
                .path
                .iter()
                .any(|w| !(w.t_s.is_finite() && w.x.is_finite() && w.y.is_finite()))
            {
                return Err(ctx("path contains non-finite values".into()));
            }
            if face.path.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
                return Err(ctx("waypoint times must increase".into()));
            }
            let end_height = face.face_height_end_px.unwrap_or(face.face_height_px);
            for h in [face.face_height_px, end_height] {
                if !(h.is_finite() && h >= 2.0) {
                    return Err(ctx(format!("face height {h} px must be at least 2")));
                }
            }
            for (name, v) in [
                ("lip_amplitude", face.lip_amplitude),
                ("noise_sigma", face.noise_sigma),
                ("lip_freq_hz", face.lip_freq_hz),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ctx(format!("{name} must be finite and >= 0, got {v}")));
                }
            }
            for (kind, segs) in [("speech", &face.speech_segments), ("dropout", &face.dropout_segments)] {
                for &[s, e] in segs {
                    if !(s.is_finite() && e.is_finite() && 0.0 <= s && s <= e && e <= self.duration_s) {
                        return Err(ctx(format!(
                            "{kind} segment [{s}, {e}] outside [0, {}]",
                            self.duration_s
                        )));
                    }
                }
            }
            let mut frames: Vec<(u64, u64)> = face.speech_segments.iter().map(|&s| self.frames_of(s)).collect();
            frames.sort();
            if frames.windows(2).any(|w| w[1].0 <= w[0].1) {
                return Err(ctx("speech segments overlap".into()));
            }
        }
        Ok(())
    }
}

/// Ground truth for one face of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTruth {
    pub face_index: usize,
    pub intervals: Vec<SpeakingInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub meta: VideoMeta,
    pub observations: Vec<FaceObservation>,
    /// Source face index of each observation.
    pub labels: Vec<usize>,
    pub truth: Vec<FaceTruth>,
}

fn in_any(frame: u64, ranges: &[(u64, u64)]) -> Option<(u64, u64)> {
    ranges.iter().copied().find(|&(a, b)| a <= frame && frame <= b)
}

/// Renders a scene. Identical specs yield identical scenes.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SpecError> {
    spec.validate()?;
    let meta = VideoMeta {
        fps: spec.fps,
        width: spec.width,
        height: spec.height,
        frame_count: Some(spec.frame_count()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let speech: Vec<Vec<(u64, u64)>> = spec
        .faces
        .iter()
        .map(|f| {
            let mut v: Vec<_> = f.speech_segments.iter().map(|&s| spec.frames_of(s)).collect();
            v.sort();
            v
        })
        .collect();
    let dropouts: Vec<Vec<(u64, u64)>> = spec
        .faces
        .iter()
        .map(|f| f.dropout_segments.iter().map(|&s| spec.frames_of(s)).collect())
        .collect();

    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for frame in 0..spec.frame_count() {
        let t = meta.frame_time(frame);
        for (fi, face) in spec.faces.iter().enumerate() {
            if in_any(frame, &dropouts[fi]).is_some() {
                continue;
            }
            let height = face.height(t, spec.duration_s);
            let mut pts = template_points(face.position(t), height);

            if let Some((start, _)) = in_any(frame, &speech[fi]) {
                let phase = (frame - start) as f64 / spec.fps;
                let offset =
                    face.lip_amplitude * height * (2.0 * std::f64::consts::PI * face.lip_freq_hz * phase).sin();
                pts[UPPER_LIP_OUTER].y -= offset;
                pts[LOWER_LIP_OUTER].y += offset;
                for i in UPPER_NEIGHBORS {
                    pts[i].y -= offset / 2.0;
                }
                for i in LOWER_NEIGHBORS {
                    pts[i].y += offset / 2.0;
                }
            }

            let sigma = face.noise_sigma * height;
            for p in pts.iter_mut() {
                let nx: f64 = unit.sample(&mut rng);
                let ny: f64 = unit.sample(&mut rng);
                *p = Point::new(quantize(p.x + sigma * nx), quantize(p.y + sigma * ny));
            }
            debug_assert_eq!(pts.len(), NUM_LANDMARKS);
            let landmarks = LandmarkSet::new(pts).map_err(|e| invalid(format!("face {fi} frame {frame}: {e}")))?;
            let b = FaceObservation::landmark_bbox(&landmarks);
            let bbox = crate::types::BoundingBox {
                x: quantize(b.x),
                y: quantize(b.y),
                w: quantize(b.w),
                h: quantize(b.h),
            };
            observations.push(FaceObservation::new(&meta, frame, bbox, 0.99, landmarks));
            labels.push(fi);
        }
    }

    let truth = speech
        .iter()
        .enumerate()
        .map(|(fi, segs)| FaceTruth {
            face_index: fi,
            intervals: segs
                .iter()
                .map(|&(a, b)| SpeakingInterval::from_frames(fi as u64, a, b, spec.fps))
                .collect(),
        })
        .collect();

    Ok(Scene {
        meta,
        observations,
        labels,
        truth,
    })
}

#[derive(Serialize)]
struct TruthDocument<'a> {
    rng: &'static str,
    seed: u64,
    fps: f64,
    faces: &'a [FaceTruth],
}

/// Writes the ground-truth document for a generated scene.
pub fn write_truth<W: Write>(mut out: W, spec: &SceneSpec, truth: &[FaceTruth]) -> io::Result<()> {
    let doc = TruthDocument {
        rng: RNG_NAME,
        seed: spec.seed,
        fps: spec.fps,
        faces: truth,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Temporal IoU of each truth segment against its best-overlapping prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct IouScore {
    pub per_segment: Vec<f64>,
    /// Mean over truth segments. With no truth segments this is 1.0 when
    /// nothing was predicted and 0.0 otherwise.
    pub mean: f64,
}

fn overlap(a: &SpeakingInterval, b: &SpeakingInterval) -> u64 {
    let lo = a.start_frame.max(b.start_frame);
    let hi = a.end_frame.min(b.end_frame);
    if lo <= hi {
        hi - lo + 1
    } else {
        0
    }
}

pub fn score_intervals(predicted: &[SpeakingInterval], truth: &[SpeakingInterval]) -> IouScore {
    let per_segment: Vec<f64> = truth
        .iter()
        .map(|t| {
            let best = predicted
                .iter()
                .map(|p| (overlap(p, t), p))
                .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.start_frame.cmp(&a.1.start_frame)));
            match best {
                Some((ov, p)) if ov > 0 => {
                    let union = p.len_frames() + t.len_frames() - ov;
                    ov as f64 / union as f64
                }
                _ => 0.0,
            }
        })
        .collect();
    let mean = if per_segment.is_empty() {
        if predicted.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        per_segment.iter().sum::<f64>() / per_segment.len() as f64
    };
    IouScore { per_segment, mean }
}

/// Shape of randomly drawn benchmark scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkParams {
    pub fps: f64,
    pub duration_s: f64,
    pub min_faces: usize,
    pub max_faces: usize,
    /// Chance that a face has no speech at all.
    pub silent_probability: f64,
    pub segment_len_s: (f64, f64),
    pub lip_amplitude: f64,
    pub lip_freq_hz: f64,
    pub noise_sigma: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            fps: 25.0,
            duration_s: 60.0,
            min_faces: 1,
            max_faces: 3,
            silent_probability: 0.3,
            segment_len_s: (1.0, 5.0),
            lip_amplitude: 0.03,
            lip_freq_hz: 4.0,
            noise_sigma: 0.002,
        }
    }
}

/// Draws a scene spec: faces sit in separate columns of a 1920x1080 frame,
/// wander within their column and change size slowly; speaking faces get
/// segments separated by at least 1.5 s of silence.
pub fn benchmark_scene(seed: u64, params: &BenchmarkParams) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let n = rng.random_range(params.min_faces..=params.max_faces.max(params.min_faces));
    let column = 1920.0 / n.max(1) as f64;
    let dur = params.duration_s;
    let faces = (0..n)
        .map(|i| {
            let cx = column * (i as f64 + 0.5);
            let height: f64 = rng.random_range(80.0..200.0);
            let end_height = height * rng.random_range(0.8..1.25);
            let reach = (column / 2.0 - 0.6 * height.max(end_height)).clamp(0.0, 150.0);
            let steps = 4;
            let path = (0..=steps)
                .map(|k| Waypoint {
                    t_s: dur * k as f64 / steps as f64,
                    x: cx + rng.random_range(-reach..=reach),
                    y: 540.0 + rng.random_range(-120.0..=120.0),
                })
                .collect();

            let mut segments = Vec::new();
            if !rng.random_bool(params.silent_probability) {
                let (lo, hi) = params.segment_len_s;
                let mut cursor = rng.random_range(0.5..3.0);
                loop {
                    let len = rng.random_range(lo..=hi);
                    if cursor + len > dur - 0.5 {
                        break;
                    }
                    segments.push([cursor, cursor + len]);
                    cursor += len + rng.random_range(1.5..8.0);
                }
            }
            FaceSpec {
                path,
                face_height_px: height,
                face_height_end_px: Some(end_height),
                speech_segments: segments,
                lip_amplitude: params.lip_amplitude,
                lip_freq_hz: params.lip_freq_hz,
                noise_sigma: params.noise_sigma,
                dropout_segments: Vec::new(),
            }
        })
        .collect();
    SceneSpec {
        fps: params.fps,
        duration_s: dur,
        width: 1920,
        height: 1080,
        faces,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{LOWER_LIP_INNER, UPPER_LIP_INNER};

    fn one_face(speech: Vec<[f64; 2]>) -> SceneSpec {
        let mut face = FaceSpec::stationary(Point::new(600.0, 500.0), 150.0);
        face.speech_segments = speech;
        SceneSpec {
            fps: 25.0,
            duration_s: 10.0,
            width: 1920,
            height: 1080,
            faces: vec![face],
            seed: 11,
        }
    }

    #[test]
    fn template_is_normalized() {
        let pts: Vec<Point> = NEUTRAL_FACE.iter().map(|&[x, y]| Point::new(x, y)).collect();
        let c = pts[UPPER_LIP_INNER].midpoint(pts[LOWER_LIP_INNER]);
        assert!(c.distance(Point::default()) < 1e-12);
        let lm = face_landmarks(Point::new(0.0, 0.0), 100.0);
        assert!((lm.face_height() - 100.0).abs() < 1e-9);
        let n = lm.normalize();
        // Upper lip above the mouth center, lower lip below, chin lowest.
        assert!(n.point(51).y < 0.0 && n.point(57).y > 0.0);
        assert!(n.points().iter().all(|p| p.y <= n.point(8).y));
    }

    #[test]
    fn zero_faces() {
        let spec = SceneSpec {
            faces: vec![],
            ..one_face(vec![])
        };
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.meta.fps, 25.0);
        assert!(scene.observations.is_empty() && scene.truth.is_empty());
    }

    #[test]
    fn truth_frames_from_seconds() {
        let scene = generate_scene(&one_face(vec![[2.0, 4.0]])).unwrap();
        let iv = &scene.truth[0].intervals[0];
        assert_eq!((iv.start_frame, iv.end_frame), (50, 100));
        assert_eq!(scene.observations.len(), 250);
    }

    #[test]
    fn seeded_determinism() {
        let spec = one_face(vec![[1.0, 3.0]]);
        assert_eq!(generate_scene(&spec).unwrap(), generate_scene(&spec).unwrap());
        let other = SceneSpec {
            seed: 12,
            ..spec.clone()
        };
        assert_ne!(generate_scene(&spec).unwrap(), generate_scene(&other).unwrap());
    }

    #[test]
    fn noiseless_lips_follow_sine() {
        let mut spec = one_face(vec![[2.0, 4.0]]);
        spec.faces[0].noise_sigma = 0.0;
        let scene = generate_scene(&spec).unwrap();
        let quarter = 50 + 25 / 16; // sin(2*pi*4*0.04) ~ 0.84 at frame 51
        let obs = &scene.observations[quarter as usize];
        let n = obs.landmarks.normalize();
        let base = face_landmarks(Point::default(), 150.0).normalize();
        let expected = 0.03 * (2.0 * std::f64::consts::PI * 4.0 * (quarter - 50) as f64 / 25.0).sin();
        assert!((base.point(51).y - n.point(51).y - expected).abs() < 1e-4);
        assert!((n.point(57).y - base.point(57).y - expected).abs() < 1e-4);
        // mouth center stays put
        assert!(obs.landmarks.mouth_center().distance(Point::new(600.0, 500.0)) < 1e-3);
    }

    #[test]
    fn dropouts_and_labels() {
        let mut spec = one_face(vec![]);
        spec.faces[0].dropout_segments = vec![[1.0, 1.4]];
        spec.faces.push(FaceSpec::stationary(Point::new(1400.0, 500.0), 120.0));
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.observations.len(), 250 + 250 - 11);
        assert_eq!(scene.labels.len(), scene.observations.len());
        assert!(scene
            .observations
            .iter()
            .zip(&scene.labels)
            .all(|(o, &l)| l == 1 || !(25..=35).contains(&o.frame)));
    }

    #[test]
    fn spec_validation() {
        let base = one_face(vec![[2.0, 4.0]]);
        let mut cases = Vec::new();
        cases.push(SceneSpec {
            duration_s: 0.0,
            ..base.clone()
        });
        cases.push(SceneSpec {
            fps: -1.0,
            ..base.clone()
        });
        let mut s = base.clone();
        s.faces[0].speech_segments = vec![[2.0, 4.0], [3.0, 5.0]];
        cases.push(s);
        let mut s = base.clone();
        s.faces[0].speech_segments = vec![[8.0, 11.0]];
        cases.push(s);
        let mut s = base.clone();
        s.faces[0].lip_amplitude = -0.1;
        cases.push(s);
        let mut s = base.clone();
        s.faces[0].path.clear();
        cases.push(s);
        for spec in cases {
            assert!(matches!(generate_scene(&spec), Err(SpecError::Invalid(_))), "{spec:?}");
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: SceneSpec = serde_json::from_str(
            r#"{"fps":25,"duration_s":10,"faces":[{"path":[{"t_s":0,"x":500,"y":500}],"face_height_px":120,"speech_segments":[[2,4]]}]}"#,
        )
        .unwrap();
        assert_eq!(spec.width, 1920);
        assert_eq!(spec.faces[0].lip_amplitude, 0.03);
        assert_eq!(spec.faces[0].lip_freq_hz, 4.0);
        assert_eq!(spec.faces[0].noise_sigma, 0.002);
    }

    #[test]
    fn iou_examples() {
        let iv = |a, b| SpeakingInterval::from_frames(0, a, b, 25.0);
        let truth = [iv(50, 100), iv(200, 240)];
        let s = score_intervals(&truth, &truth);
        assert_eq!(s.per_segment, [1.0, 1.0]);
        assert_eq!(s.mean, 1.0);
        assert_eq!(score_intervals(&[], &truth).mean, 0.0);
        let s = score_intervals(&[iv(60, 100)], &[iv(50, 100)]);
        assert!((s.per_segment[0] - 41.0 / 51.0).abs() < 1e-12);
        // best-overlap match wins over the first one
        let s = score_intervals(&[iv(40, 52), iv(55, 100)], &[iv(50, 100)]);
        assert!((s.per_segment[0] - 46.0 / 51.0).abs() < 1e-12);
        assert_eq!(score_intervals(&[], &[]).mean, 1.0);
        assert_eq!(score_intervals(&[iv(1, 2)], &[]).mean, 0.0);
    }

    #[test]
    fn benchmark_scenes_are_valid() {
        for seed in 0..30 {
            let spec = benchmark_scene(seed, &BenchmarkParams::default());
            spec.validate().unwrap();
            assert!((1..=3).contains(&spec.faces.len()));
            for f in &spec.faces {
                for s in &f.speech_segments {
                    let len = s[1] - s[0];
                    assert!((1.0..=5.0).contains(&len));
                }
            }
        }
    }
}
