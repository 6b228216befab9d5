use std::collections::BTreeSet;

use lipdet::detector::{detect_intervals, smooth, speaking_mask, FrameSpan};
use lipdet::format::{quantize_observation, read_landmark_file, write_landmark_file};
use lipdet::synth::{face_landmarks, generate_scene, FaceSpec, SceneSpec, Waypoint};
use lipdet::tracker::{associate_frame, association_distance, build_track_indices, TrackerState};
use lipdet::types::BoundingBox;
use lipdet::{
    analyze_track, DetectorConfig, FaceObservation, LandmarkSet, PersonTrack, Point, TrackerParams, VideoMeta,
};
use proptest::prelude::*;

fn meta() -> VideoMeta {
    VideoMeta::new(25.0, 1920, 1080).unwrap()
}

/// Direct O(n·W) convolution with clamped borders.
fn smooth_oracle(x: &[f64], w: usize) -> Vec<f64> {
    let h = (w / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|i| (-h..=h).map(|k| x[(i + k).clamp(0, n - 1) as usize]).sum::<f64>() / w as f64)
        .collect()
}

fn landmark_set() -> impl Strategy<Value = LandmarkSet> {
    (
        prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 68),
        100.0f64..1500.0,
        100.0f64..900.0,
    )
        .prop_filter_map("degenerate", |(offsets, cx, cy)| {
            let pts = offsets
                .into_iter()
                .map(|(dx, dy)| Point::new(cx + dx, cy + dy))
                .collect();
            LandmarkSet::new(pts).ok()
        })
}

proptest! {
    #[test]
    fn normalization_is_similarity_invariant(
        set in landmark_set(),
        scale in 0.25f64..4.0,
        dx in -500.0f64..500.0,
        dy in -500.0f64..500.0,
    ) {
        let moved = set.scaled_translated(scale, Point::new(dx, dy)).unwrap();
        let (a, b) = (set.normalize(), moved.normalize());
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        }
        prop_assert!((a.y_extent() - 1.0).abs() < 1e-9);
        prop_assert!(a.mouth_center().x.abs() < 1e-9 && a.mouth_center().y.abs() < 1e-9);
    }

    #[test]
    fn association_distance_symmetric(a in landmark_set(), b in landmark_set()) {
        prop_assert_eq!(association_distance(&a, &b), association_distance(&b, &a));
        prop_assert!(association_distance(&a, &a) == 0.0);
    }

    #[test]
    fn landmark_file_round_trip(
        frames in prop::collection::vec((0u64..3, landmark_set(), 0.0f64..=1.0), 0..12),
    ) {
        let m = meta();
        let mut frame = 0;
        let observations: Vec<FaceObservation> = frames
            .into_iter()
            .map(|(step, lm, conf)| {
                frame += step;
                let bbox = FaceObservation::landmark_bbox(&lm);
                quantize_observation(&FaceObservation::new(&m, frame, bbox, conf, lm)).unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_landmark_file(&mut buf, &m, &observations).unwrap();
        let (m2, back) = read_landmark_file(&buf[..]).unwrap();
        prop_assert_eq!(m2, m);
        prop_assert_eq!(back, observations);
    }

    #[test]
    fn smoothing_matches_convolution(
        x in prop::collection::vec(-1.0f64..1.0, 1..400),
        half in 0usize..60,
    ) {
        let w = 2 * half + 1;
        let got = smooth(&x, w).unwrap();
        for (g, e) in got.iter().zip(smooth_oracle(&x, w)) {
            prop_assert!((g - e).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_threshold_shrinks_detections(
        c in prop::collection::vec(0.0f64..0.05, 1..300),
        invalid in prop::collection::vec(any::<bool>(), 300),
        lo in 0.001f64..0.03,
        extra in 0.0f64..0.02,
        merge in 0.0f64..0.5,
        min_dur in 0.0f64..0.8,
    ) {
        let valid: Vec<bool> = invalid.iter().take(c.len()).map(|&b| !b || c.len() < 5).collect();
        let hi = lo + extra;
        let low_mask = speaking_mask(&c, &valid, lo);
        let high_mask = speaking_mask(&c, &valid, hi);
        for (h, l) in high_mask.iter().zip(&low_mask) {
            prop_assert!(!h || *l);
        }
        let cfg = |t| DetectorConfig { threshold: t, merge_gap_s: merge, min_duration_s: min_dur, ..Default::default() };
        let low = detect_intervals(&c, &valid, &cfg(lo), 25.0);
        let high = detect_intervals(&c, &valid, &cfg(hi), 25.0);
        for s in &high {
            prop_assert!(low.iter().any(|l| l.contains(s)), "{:?} not inside {:?}", s, low);
        }
    }

    #[test]
    fn long_runs_land_in_exactly_one_interval(
        c in prop::collection::vec(0.0f64..0.05, 1..300),
        invalid in prop::collection::vec(prop::bool::weighted(0.05), 300),
        merge in 0.0f64..0.5,
        min_dur in 0.0f64..0.8,
    ) {
        let valid: Vec<bool> = invalid.iter().take(c.len()).map(|&b| !b).collect();
        let cfg = DetectorConfig { threshold: 0.025, merge_gap_s: merge, min_duration_s: min_dur, ..Default::default() };
        let spans = detect_intervals(&c, &valid, &cfg, 25.0);
        for w in spans.windows(2) {
            // sorted, disjoint, at least one frame apart
            prop_assert!(w[0].end + 1 < w[1].start);
        }
        let mask = speaking_mask(&c, &valid, cfg.threshold);
        let mut i = 0;
        while i < mask.len() {
            if !mask[i] { i += 1; continue; }
            let start = i;
            while i < mask.len() && mask[i] { i += 1; }
            let run = FrameSpan { start, end: i - 1 };
            if run.len() as f64 >= min_dur * 25.0 {
                prop_assert_eq!(spans.iter().filter(|s| s.contains(&run)).count(), 1);
            }
        }
        for s in &spans {
            prop_assert!(valid[s.start..=s.end].iter().all(|&v| v));
        }
    }
}

fn obs(frame: u64, center: Point, height: f64) -> FaceObservation {
    FaceObservation::new(
        &meta(),
        frame,
        BoundingBox::default(),
        1.0,
        face_landmarks(center, height),
    )
}

/// Random-walk scenes of up to `faces` faces over `frames` frames, with
/// occasional missing detections.
fn walk_scene(faces: usize, frames: u64) -> impl Strategy<Value = Vec<FaceObservation>> {
    (
        prop::collection::vec((100.0f64..1800.0, 100.0f64..900.0, 60.0f64..200.0), 1..=faces),
        prop::collection::vec(
            (-8.0f64..8.0, -8.0f64..8.0, prop::bool::weighted(0.1)),
            (faces * frames as usize)..=(faces * frames as usize),
        ),
    )
        .prop_map(move |(starts, steps)| {
            let mut pos: Vec<Point> = starts.iter().map(|&(x, y, _)| Point::new(x, y)).collect();
            let mut out = Vec::new();
            for f in 0..frames {
                for (k, &(_, _, h)) in starts.iter().enumerate() {
                    let (dx, dy, skip) = steps[f as usize * faces + k];
                    pos[k] = pos[k] + Point::new(dx, dy);
                    if !skip {
                        out.push(obs(f, pos[k], h));
                    }
                }
            }
            out
        })
}

fn memberships(observations: &[FaceObservation], idx: &[Vec<usize>]) -> BTreeSet<Vec<(u64, u64, u64)>> {
    // Identify observations by frame and quantized mouth center.
    idx.iter()
        .map(|members| {
            members
                .iter()
                .map(|&i| {
                    let o = &observations[i];
                    let c = o.landmarks.mouth_center();
                    (o.frame, c.x.to_bits(), c.y.to_bits())
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tracks_partition_observations(observations in walk_scene(4, 40), max_gap in 0u64..5, dist in 0.05f64..1.0) {
        let params = TrackerParams { max_dist_factor: dist, max_gap };
        let idx = build_track_indices(&observations, &params).unwrap();
        let mut seen: Vec<usize> = idx.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..observations.len()).collect::<Vec<_>>());
        for members in &idx {
            prop_assert!(!members.is_empty());
            for w in members.windows(2) {
                let (a, b) = (&observations[w[0]], &observations[w[1]]);
                prop_assert!(a.frame < b.frame);
                prop_assert!(b.frame - a.frame <= max_gap);
            }
        }
        let again = build_track_indices(&observations, &params).unwrap();
        prop_assert_eq!(idx, again);
    }

    #[test]
    fn within_frame_order_does_not_change_membership(observations in walk_scene(3, 30), seed in any::<u64>()) {
        let params = TrackerParams::default();
        let mut shuffled = observations.clone();
        let mut state = seed;
        for batch in shuffled.chunk_by_mut(|a, b| a.frame == b.frame) {
            for i in (1..batch.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                batch.swap(i, (state >> 33) as usize % (i + 1));
            }
        }
        let a = build_track_indices(&observations, &params).unwrap();
        let b = build_track_indices(&shuffled, &params).unwrap();
        prop_assert_eq!(memberships(&observations, &a), memberships(&shuffled, &b));
    }

    #[test]
    fn greedy_equals_exhaustive_on_unambiguous_frames(observations in walk_scene(3, 20)) {
        let params = TrackerParams::default();
        let mut state = TrackerState::new();
        // Reference: last landmarks and frame of each track id.
        let mut last: Vec<(LandmarkSet, u64)> = Vec::new();
        for batch in observations.chunk_by(|a, b| a.frame == b.frame) {
            let frame = batch[0].frame;
            let active: Vec<usize> = (0..last.len()).filter(|&t| frame - last[t].1 <= params.max_gap).collect();
            let dist: Vec<Vec<f64>> = active
                .iter()
                .map(|&t| batch.iter().map(|o| association_distance(&last[t].0, &o.landmarks)).collect())
                .collect();
            let got = associate_frame(&mut state, batch, &params).unwrap();

            let greedy: Vec<Option<usize>> = active
                .iter()
                .map(|&t| got.track_ids.iter().position(|&id| id as usize == t))
                .collect();
            let best = exhaustive(&dist, params.max_dist_factor);
            if dominant(&dist, &greedy, 0.05) {
                prop_assert_eq!(&greedy, &best);
            }
            for (o, &id) in batch.iter().zip(&got.track_ids) {
                let id = id as usize;
                if id == last.len() {
                    last.push((o.landmarks.clone(), frame));
                } else {
                    last[id] = (o.landmarks.clone(), frame);
                }
            }
        }
    }
}

/// Maximum-cardinality, then minimum-sum, partial assignment by enumeration.
fn exhaustive(dist: &[Vec<f64>], limit: f64) -> Vec<Option<usize>> {
    fn go(
        row: usize,
        dist: &[Vec<f64>],
        limit: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        best: &mut (usize, f64, Vec<Option<usize>>),
    ) {
        if row == dist.len() {
            let count = cur.iter().flatten().count();
            let sum: f64 = cur.iter().enumerate().filter_map(|(r, c)| c.map(|c| dist[r][c])).sum();
            if count > best.0 || (count == best.0 && sum < best.1) {
                *best = (count, sum, cur.clone());
            }
            return;
        }
        cur.push(None);
        go(row + 1, dist, limit, used, cur, best);
        cur.pop();
        for c in 0..used.len() {
            if !used[c] && dist[row][c] <= limit {
                used[c] = true;
                cur.push(Some(c));
                go(row + 1, dist, limit, used, cur, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let cols = dist.first().map_or(0, |r| r.len());
    let mut best = (0, f64::INFINITY, vec![None; dist.len()]);
    go(0, dist, limit, &mut vec![false; cols], &mut Vec::new(), &mut best);
    best.2
}

/// Every matched pair beats each other entry in its row and column by `margin`.
fn dominant(dist: &[Vec<f64>], assign: &[Option<usize>], margin: f64) -> bool {
    assign.iter().enumerate().all(|(r, c)| match c {
        None => true,
        Some(c) => {
            let d = dist[r][*c];
            dist[r].iter().enumerate().all(|(j, &v)| j == *c || v > d + margin)
                && dist.iter().enumerate().all(|(i, row)| i == r || row[*c] > d + margin)
        }
    })
}

fn scene_with(faces: Vec<FaceSpec>, seed: u64) -> SceneSpec {
    SceneSpec {
        fps: 25.0,
        duration_s: 8.0,
        width: 1920,
        height: 1080,
        faces,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_motion_gives_zero_deviation(
        x0 in 200.0f64..1700.0, y0 in 200.0f64..900.0,
        x1 in 200.0f64..1700.0, y1 in 200.0f64..900.0,
        h in 60.0f64..250.0,
    ) {
        let mut face = FaceSpec::stationary(Point::new(x0, y0), h);
        face.path.push(Waypoint { t_s: 8.0, x: x1, y: y1 });
        face.noise_sigma = 0.0;
        let scene = generate_scene(&scene_with(vec![face], 1)).unwrap();
        let track = PersonTrack { person_id: 0, observations: scene.observations };
        let (signal, intervals) = analyze_track(&track, &scene.meta, &DetectorConfig::default()).unwrap();
        prop_assert!(intervals.is_empty());
        // Coordinates are rounded to 1e-3 px, so the constant is not exact.
        prop_assert!(signal.c.iter().all(|&c| c.abs() < 1e-9 + 2e-3 / h));
    }

    #[test]
    fn deviation_is_nonnegative_and_consistent(seed in 0u64..1000) {
        let mut face = FaceSpec::stationary(Point::new(700.0, 500.0), 150.0);
        face.speech_segments = vec![[2.0, 4.0]];
        face.dropout_segments = vec![[5.0, 5.3], [6.0, 7.2]];
        let scene = generate_scene(&scene_with(vec![face], seed)).unwrap();
        let track = PersonTrack { person_id: 0, observations: scene.observations };
        let (s, _) = analyze_track(&track, &scene.meta, &DetectorConfig::default()).unwrap();
        for i in 0..s.len() {
            if s.valid[i] {
                prop_assert!(s.c[i] >= 0.0);
                prop_assert_eq!(s.d[i], (s.t[i] - s.t_smooth[i]).abs());
                prop_assert_eq!(s.e[i], (s.b[i] - s.b_smooth[i]).abs());
                prop_assert_eq!(s.c[i], (s.d[i] + s.e[i]) / 2.0);
            } else {
                prop_assert!(s.c[i].is_nan());
            }
        }
        // 5.0-5.3 s is an 8-frame hole (interpolated), 6.0-7.2 s is 31 frames (not).
        prop_assert!(s.valid[125..=133].iter().all(|&v| v));
        prop_assert!(s.valid[150..=180].iter().all(|&v| !v));
    }
}

#[test]
fn separability_inside_vs_outside_speech() {
    let mut face = FaceSpec::stationary(Point::new(700.0, 500.0), 150.0);
    face.speech_segments = vec![[3.0, 7.0], [12.0, 14.0]];
    let mut spec = scene_with(vec![face], 5);
    spec.duration_s = 20.0;
    let scene = generate_scene(&spec).unwrap();
    let track = PersonTrack {
        person_id: 0,
        observations: scene.observations.clone(),
    };
    let (s, _) = analyze_track(&track, &scene.meta, &DetectorConfig::default()).unwrap();
    let truth = &scene.truth[0].intervals;
    let (mut inside, mut outside): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (i, &c) in s.c.iter().enumerate() {
        let f = i as u64;
        if truth.iter().any(|t| t.start_frame <= f && f <= t.end_frame) {
            inside.push(c);
        } else {
            outside.push(c);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mi, mo) = (median(&mut inside), median(&mut outside));
    assert!(mi >= 3.0 * mo, "inside {mi} outside {mo}");
}

#[test]
fn generated_scenes_pass_reader_validation() {
    let mut a = FaceSpec::stationary(Point::new(300.0, 500.0), 120.0);
    a.path.push(Waypoint {
        t_s: 8.0,
        x: 500.0,
        y: 450.0,
    });
    a.speech_segments = vec![[1.0, 3.0]];
    a.dropout_segments = vec![[4.0, 4.5]];
    let b = FaceSpec {
        face_height_end_px: Some(200.0),
        ..FaceSpec::stationary(Point::new(1400.0, 600.0), 150.0)
    };
    let spec = scene_with(vec![a, b], 77);
    let scene = generate_scene(&spec).unwrap();
    let mut buf = Vec::new();
    write_landmark_file(&mut buf, &scene.meta, &scene.observations).unwrap();
    let (m, back) = read_landmark_file(&buf[..]).unwrap();
    assert_eq!(m, scene.meta);
    assert_eq!(back, scene.observations);
}
