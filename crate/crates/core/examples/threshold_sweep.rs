//! Sweeps the speaking threshold over held-out synthetic scenes and prints a
//! markdown table. Usage: `cargo run --release --example threshold_sweep`.

use lipdet::bench::evaluate_scene;
use lipdet::synth::{benchmark_scene, generate_scene, BenchmarkParams};
use lipdet::DetectorConfig;

/// Seeds disjoint from the acceptance suite (which uses 0..25).
const SEEDS: std::ops::Range<u64> = 1000..1025;
const THRESHOLDS: [f64; 12] = [
    0.002, 0.003, 0.004, 0.005, 0.0075, 0.01, 0.0125, 0.015, 0.02, 0.025, 0.03, 0.05,
];

fn main() {
    let params = BenchmarkParams::default();
    let scenes: Vec<_> = SEEDS
        .map(|s| generate_scene(&benchmark_scene(s, &params)).expect("valid benchmark spec"))
        .collect();
    let segments: usize = scenes.iter().flat_map(|s| &s.truth).map(|t| t.intervals.len()).sum();
    let silent: usize = scenes
        .iter()
        .flat_map(|s| &s.truth)
        .filter(|t| t.intervals.is_empty())
        .count();
    println!(
        "seeds {}..{}, {} truth segments, {} silent faces\n",
        SEEDS.start, SEEDS.end, segments, silent
    );
    println!("| T | min IoU | mean IoU | segments IoU<0.8 | silent-face intervals | spurious intervals |");
    println!("|---|---|---|---|---|---|");
    for t in THRESHOLDS {
        let cfg = DetectorConfig {
            threshold: t,
            ..Default::default()
        };
        let (mut min, mut sum, mut n, mut below, mut silent_hits, mut spurious) = (1.0f64, 0.0, 0, 0, 0, 0);
        for scene in &scenes {
            let eval = evaluate_scene(scene, &cfg).expect("pipeline runs");
            for f in &eval.faces {
                for &iou in &f.score.per_segment {
                    min = min.min(iou);
                    sum += iou;
                    n += 1;
                    if iou < 0.8 {
                        below += 1;
                    }
                }
            }
            silent_hits += eval.silent_face_intervals();
            spurious += eval.spurious_intervals();
        }
        println!(
            "| {t} | {min:.3} | {:.3} | {below} | {silent_hits} | {spurious} |",
            sum / n.max(1) as f64
        );
    }
}
