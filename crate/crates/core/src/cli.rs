//! `lipdet` command-line interface.
//!
//! Exit codes: 0 success, 1 internal failure, 2 invalid input, 3 invalid
//! configuration.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::detector::analyze_tracks;
use crate::format::{read_landmark_file, write_debug_signals, write_landmark_file, write_results, write_track_report};
use crate::landmarks::Point;
use crate::synth::{generate_scene, write_truth, FaceSpec, SceneSpec};
use crate::tracker::build_tracks;
use crate::types::{DetectorConfig, FaceObservation, SpeakingInterval, VideoMeta};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "lipdet",
    version,
    about = "Detect speaking persons from facial landmark trajectories"
)]
pub struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track faces and write speaking intervals per person.
    Detect(DetectArgs),
    /// Group faces into tracks and report their spans.
    Track(TrackArgs),
    /// Generate a synthetic landmark file with ground truth.
    Synth(SynthArgs),
    /// Dump the per-frame lip signals of one person as CSV.
    Signals(SignalsArgs),
}

/// Overrides for tracker settings. Unset flags fall back to the config file,
/// then to the built-in defaults.
#[derive(Debug, Args, Default, Clone)]
pub struct TrackerFlags {
    /// Largest mouth-center jump between frames, in face heights [default: 0.5]
    #[arg(long = "max-dist", value_name = "F")]
    pub max_dist: Option<f64>,
    /// Frames a face may be missing before its track is closed [default: 25 frames]
    #[arg(long = "max-gap", value_name = "FRAMES")]
    pub max_gap: Option<u64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct DetectorFlags {
    /// Speaking threshold on the combined lip deviation, in face heights [default: 0.01]
    #[arg(long, value_name = "T")]
    pub threshold: Option<f64>,
    /// Smoothing/accumulation window [default: 2.0 s]
    #[arg(long = "window-s", value_name = "S")]
    pub window_s: Option<f64>,
    /// Merge speaking runs separated by at most this long [default: 0.3 s]
    #[arg(long = "merge-gap-s", value_name = "S")]
    pub merge_gap_s: Option<f64>,
    /// Drop intervals shorter than this [default: 0.5 s]
    #[arg(long = "min-dur-s", value_name = "S")]
    pub min_dur_s: Option<f64>,
    /// Longest run of missing frames bridged by interpolation [default: 12 frames]
    #[arg(long = "interp-max-gap", value_name = "FRAMES")]
    pub interp_max_gap: Option<u64>,
    /// Landmark used for the upper-lip signal [default: 51]
    #[arg(long = "upper-lip", value_name = "INDEX")]
    pub upper_lip: Option<usize>,
    /// Landmark used for the lower-lip signal [default: 57]
    #[arg(long = "lower-lip", value_name = "INDEX")]
    pub lower_lip: Option<usize>,
    #[command(flatten)]
    pub tracker: TrackerFlags,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Landmark file
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,
    /// Results file, `-` for stdout
    #[arg(short, long, value_name = "FILE", default_value = "-")]
    pub output: PathBuf,
    /// TOML file with detector settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: DetectorFlags,
    /// Worker threads for per-track analysis [default: available cores]
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,
    /// Track report, `-` for stdout
    #[arg(short, long, value_name = "FILE", default_value = "-")]
    pub output: PathBuf,
    /// TOML file with detector settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrackerFlags,
}

#[derive(Debug, Args)]
pub struct SignalsArgs {
    /// Landmark file
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,
    /// Track id as reported by `detect` or `track`
    #[arg(long, value_name = "ID")]
    pub person: u64,
    /// CSV output, `-` for stdout
    #[arg(short, long, value_name = "FILE", default_value = "-")]
    pub output: PathBuf,
    /// TOML file with detector settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: DetectorFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON scene spec; without it a single stationary face is generated from
    /// the inline flags below
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Landmark file to write, `-` for stdout
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// Ground-truth file to write
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Overrides the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame rate of an inline scene [default: 25]
    #[arg(long, default_value_t = 25.0, hide_default_value = true)]
    pub fps: f64,
    /// Length of an inline scene [default: 10 s]
    #[arg(long = "duration-s", default_value_t = 10.0, value_name = "S", hide_default_value = true)]
    pub duration_s: f64,
    /// Speech segment START:END in seconds (repeatable)
    #[arg(long = "speak", value_name = "START:END", value_parser = parse_segment)]
    pub speak: Vec<[f64; 2]>,
    /// Face height of an inline scene [default: 150 px]
    #[arg(long = "face-height", default_value_t = 150.0, value_name = "PX", hide_default_value = true)]
    pub face_height: f64,
}

fn parse_segment(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok([parse(a)?, parse(b)?])
}

impl DetectorFlags {
    fn apply(&self, cfg: &mut DetectorConfig) {
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.window_s {
            cfg.window_s = v;
        }
        if let Some(v) = self.merge_gap_s {
            cfg.merge_gap_s = v;
        }
        if let Some(v) = self.min_dur_s {
            cfg.min_duration_s = v;
        }
        if let Some(v) = self.interp_max_gap {
            cfg.interp_max_gap = v;
        }
        if let Some(v) = self.upper_lip {
            cfg.upper_lip_index = v;
        }
        if let Some(v) = self.lower_lip {
            cfg.lower_lip_index = v;
        }
        self.tracker.apply(cfg);
    }
}

impl TrackerFlags {
    fn apply(&self, cfg: &mut DetectorConfig) {
        if let Some(v) = self.max_dist {
            cfg.tracker.max_dist_factor = v;
        }
        if let Some(v) = self.max_gap {
            cfg.tracker.max_gap = v;
        }
    }
}

/// Defaults, then the optional TOML file, then flags.
pub fn resolve_config(
    file: Option<&Path>,
    apply_flags: impl FnOnce(&mut DetectorConfig),
) -> Result<DetectorConfig, CliError> {
    let mut cfg = match file {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => DetectorConfig::default(),
    };
    apply_flags(&mut cfg);
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn load_landmarks(path: &Path) -> Result<(VideoMeta, Vec<FaceObservation>), CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (meta, obs) = read_landmark_file(BufReader::new(file)).map_err(|e| match e {
        crate::format::FormatError::Io(io) => CliError::Input(format!("{}: {io}", path.display())),
        other => CliError::Input(format!("{}: {other}", path.display())),
    })?;
    log::info!("{}: {} observations at {} fps", path.display(), obs.len(), meta.fps);
    Ok((meta, obs))
}

fn open_output(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let file = File::create(path).map_err(|e| internal(format!("{}: {e}", path.display())))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

pub fn cmd_detect(args: &DetectArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args.config.as_deref(), |c| args.flags.apply(c))?;
    let jobs = match args.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let (meta, obs) = load_landmarks(&args.input)?;
    let tracks = build_tracks(&obs, &cfg.tracker).map_err(|e| CliError::Input(e.to_string()))?;
    let analyses = analyze_tracks(&tracks, &meta, &cfg, jobs).map_err(internal)?;
    let intervals: Vec<SpeakingInterval> = analyses.iter().flat_map(|a| a.intervals.iter().copied()).collect();
    log::info!("{} tracks, {} speaking intervals", tracks.len(), intervals.len());
    let summaries: Vec<_> = tracks.iter().map(|t| t.summary()).collect();
    write_results(open_output(&args.output)?, &summaries, &intervals).map_err(internal)
}

pub fn cmd_track(args: &TrackArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args.config.as_deref(), |c| args.flags.apply(c))?;
    let (_, obs) = load_landmarks(&args.input)?;
    let tracks = build_tracks(&obs, &cfg.tracker).map_err(|e| CliError::Input(e.to_string()))?;
    let summaries: Vec<_> = tracks.iter().map(|t| t.summary()).collect();
    write_track_report(open_output(&args.output)?, &summaries).map_err(internal)
}

pub fn cmd_signals(args: &SignalsArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args.config.as_deref(), |c| args.flags.apply(c))?;
    let (meta, obs) = load_landmarks(&args.input)?;
    let tracks = build_tracks(&obs, &cfg.tracker).map_err(|e| CliError::Input(e.to_string()))?;
    let track = tracks.iter().find(|t| t.person_id == args.person).ok_or_else(|| {
        let ids: Vec<String> = tracks.iter().map(|t| t.person_id.to_string()).collect();
        CliError::Input(format!(
            "unknown person id {} (known: [{}])",
            args.person,
            ids.join(", ")
        ))
    })?;
    let (signal, _) = crate::detector::analyze_track(track, &meta, &cfg).map_err(internal)?;
    write_debug_signals(open_output(&args.output)?, &signal, meta.fps).map_err(internal)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SceneSpec>(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut face = FaceSpec::stationary(Point::new(960.0, 540.0), args.face_height);
            face.speech_segments = args.speak.clone();
            SceneSpec {
                fps: args.fps,
                duration_s: args.duration_s,
                width: 1920,
                height: 1080,
                faces: vec![face],
                seed: 0,
            }
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let scene = generate_scene(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    write_landmark_file(open_output(&args.output)?, &scene.meta, &scene.observations).map_err(internal)?;
    let truth = File::create(&args.truth).map_err(|e| internal(format!("{}: {e}", args.truth.display())))?;
    write_truth(BufWriter::new(truth), &spec, &scene.truth).map_err(internal)?;
    log::info!(
        "wrote {} observations for {} faces",
        scene.observations.len(),
        spec.faces.len()
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Track(a) => cmd_track(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Signals(a) => cmd_signals(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn segment_flag() {
        assert_eq!(parse_segment("2:4").unwrap(), [2.0, 4.0]);
        assert_eq!(parse_segment(" 1.5 : 3 ").unwrap(), [1.5, 3.0]);
        assert!(parse_segment("2-4").is_err());
        assert!(parse_segment("a:4").is_err());
    }

    #[test]
    fn precedence_defaults_file_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "threshold = 0.02\nwindow_s = 3.0\n").unwrap();
        let flags = DetectorFlags {
            threshold: Some(0.05),
            ..Default::default()
        };
        let cfg = resolve_config(Some(&path), |c| flags.apply(c)).unwrap();
        assert_eq!(cfg.threshold, 0.05);
        assert_eq!(cfg.window_s, 3.0);
        assert_eq!(cfg.merge_gap_s, 0.3);

        std::fs::write(&path, "threshold = \"high\"\n").unwrap();
        let err = resolve_config(Some(&path), |_| {}).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let bad = DetectorFlags {
            window_s: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(resolve_config(None, |c| bad.apply(c)).unwrap_err().exit_code(), 3);
    }
}
