use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use clap::{Args, Parser, Subcommand};
use pianotrace_core::align::{align_performance, downmix_mean, read_wav, resample, write_wav, AudioBuffer};
use pianotrace_core::avfilter::{filter_performance, MissingHandPolicy, SetCombine};
use pianotrace_core::fingering::{parse_fingering_jsonl, run_pipeline, FingeringAnnotation, FingeringRow, NoteAnnotation, Summary};
use pianotrace_core::geometry::KeyboardMapper;
use pianotrace_core::hand::FingerId;
use pianotrace_core::loudness::{compute_targets, integrated_loudness, normalize_to, LoudnessError, LoudnessReport};
use pianotrace_core::metrics::{fingering_precision, frame_metrics, note_metrics, FingeringReport, FrameMetrics, MatchMode, FRAME_HOP_S};
use pianotrace_core::midi::{apply_sustain_extension, NoteEvent, Performance};
use pianotrace_core::synth::{pink_noise, practice_scene, PracticeOptions};
use serde::{Deserialize, Serialize};

use crate::bundle::{load_geometry, load_landmarks, load_midi, read_text, save_midi, write_file, write_synthetic_bundle, BundlePaths};
use crate::config::Config;
use crate::error::{Result, ServiceError};
use crate::export::{export_annotation, ExportOptions, ExportReport, FingeringFormat};
use crate::session::{Session, STATE_FILE};

#[derive(Debug, Parser)]
#[command(name = "pianotrace", version, about = "Piano performance annotation: alignment, loudness, fingering, onset filtering, evaluation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align a MIDI transcription to its audio recording.
    Align(AlignArgs),
    /// Normalize recordings to per-file loudness targets from their renditions.
    Loudness(LoudnessArgs),
    /// Automatic fingering and the annotation server.
    #[command(subcommand)]
    Fingering(FingeringCommand),
    /// Drop transcribed onsets no visible fingertip could have played.
    Avfilter(AvfilterArgs),
    /// Transcription and fingering evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Export a session's fingering and per-hand MIDI.
    Export(ExportArgs),
    /// Write a synthetic recording bundle.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    /// Directory holding performance.mid, landmarks.jsonl, geometry.json and optionally frames/.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub midi: Option<PathBuf>,
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
}

impl BundleArgs {
    fn is_empty(&self) -> bool {
        self.bundle.is_none() && self.midi.is_none() && self.landmarks.is_none() && self.geometry.is_none()
    }

    pub fn paths(&self) -> Result<BundlePaths> {
        let mut paths = match &self.bundle {
            Some(dir) => BundlePaths::in_dir(dir),
            None => {
                let need = |p: &Option<PathBuf>, flag: &str| {
                    p.clone().ok_or_else(|| ServiceError::Validation(format!("--{flag} is required without --bundle")))
                };
                BundlePaths {
                    midi: need(&self.midi, "midi")?,
                    landmarks: need(&self.landmarks, "landmarks")?,
                    geometry: need(&self.geometry, "geometry")?,
                    frames_dir: None,
                }
            }
        };
        if let Some(p) = &self.midi {
            paths.midi = p.clone();
        }
        if let Some(p) = &self.landmarks {
            paths.landmarks = p.clone();
        }
        if let Some(p) = &self.geometry {
            paths.geometry = p.clone();
        }
        if let Some(p) = &self.frames_dir {
            paths.frames_dir = Some(p.clone());
        }
        Ok(paths)
    }
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub recording: PathBuf,
    #[arg(long)]
    pub midi: PathBuf,
    /// Rendition audio of the MIDI; rendered with sinusoids when absent.
    #[arg(long)]
    pub rendition: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub band_s: Option<f64>,
    /// Also write the warping path as JSON.
    #[arg(long)]
    pub path_out: Option<PathBuf>,
    /// Also dump both feature matrices into this directory.
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoudnessArgs {
    /// JSON manifest: {"files": [{"recording": ..., "rendition": ... | "rendition_lufs": ...}]}.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub global_target: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum FingeringCommand {
    /// Run the fingering pipeline and write fingering plus per-hand MIDI.
    Run(FingeringRunArgs),
    /// Serve an annotation session over HTTP, creating it if needed.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FingeringRunArgs {
    #[command(flatten)]
    pub bundle: BundleArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FingeringFormat::Jsonl)]
    pub format: FingeringFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[command(flatten)]
    pub bundle: BundleArgs,
    #[arg(long)]
    pub bind: Option<SocketAddr>,
}

#[derive(Debug, Args)]
pub struct AvfilterArgs {
    #[arg(long)]
    pub midi: PathBuf,
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub geometry: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Decision log (JSON lines).
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub candidate_range: Option<usize>,
    #[arg(long, value_parser = parse_combine)]
    pub combine: Option<SetCombine>,
    #[arg(long, value_parser = parse_policy)]
    pub missing_hand_policy: Option<MissingHandPolicy>,
    /// Video length in frames (defaults to the last landmark frame + 1).
    #[arg(long)]
    pub n_frames: Option<usize>,
}

fn parse_combine(s: &str) -> std::result::Result<SetCombine, String> {
    match s {
        "union" => Ok(SetCombine::Union),
        "intersection" => Ok(SetCombine::Intersection),
        _ => Err("expected union or intersection".into()),
    }
}

fn parse_policy(s: &str) -> std::result::Result<MissingHandPolicy, String> {
    match s {
        "keep" => Ok(MissingHandPolicy::Keep),
        "filter-with-available" => Ok(MissingHandPolicy::FilterWithAvailable),
        _ => Err("expected keep or filter-with-available".into()),
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Note and frame metrics for reference/estimate MIDI pairs.
    Transcription(EvalTranscriptionArgs),
    /// Precision of automatic fingering labels.
    Fingering(EvalFingeringArgs),
}

#[derive(Debug, Args)]
pub struct EvalTranscriptionArgs {
    /// Reference MIDI; repeat for several pairs.
    #[arg(long, required = true)]
    pub reference: Vec<PathBuf>,
    /// Estimated MIDI, paired with --reference by position.
    #[arg(long, required = true)]
    pub estimate: Vec<PathBuf>,
    /// Extend offsets of both sides through the sustain pedal first.
    #[arg(long)]
    pub pedal_extension: bool,
    #[arg(long)]
    pub onset_tolerance: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalFingeringArgs {
    /// Reference fingering (JSON lines).
    #[arg(long)]
    pub reference: PathBuf,
    /// Estimated fingering (JSON lines).
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub first: Option<usize>,
    /// Finger pair counted as equivalent, e.g. 1-2; repeatable.
    #[arg(long, value_parser = parse_pair)]
    pub substitution: Vec<(u8, u8)>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(u8, u8), String> {
    let (a, b) = s.split_once('-').ok_or("expected A-B")?;
    let f = |x: &str| x.trim().parse::<u8>().ok().filter(|v| (1..=5).contains(v)).ok_or(format!("bad finger {x:?}"));
    Ok((f(a)?, f(b)?))
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub session: PathBuf,
    /// Defaults to <session>/export.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FingeringFormat::Jsonl)]
    pub format: FingeringFormat,
    /// Export even with pending notes; they are written unlabeled.
    #[arg(long)]
    pub allow_partial: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 180.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.25)]
    pub note_s: f64,
    /// Append a two-finger hover note and a note with no hands in view.
    #[arg(long)]
    pub ambiguous_tail: bool,
    /// Also write rendition.wav and a delayed, noisy recording.wav.
    #[arg(long)]
    pub audio: bool,
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value).expect("report serializes") + "\n")
}

pub fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Align(a) => align(a, &config),
        Command::Loudness(a) => loudness(a, &config),
        Command::Fingering(FingeringCommand::Run(a)) => fingering_run(a, &config),
        Command::Fingering(FingeringCommand::Serve(a)) => serve(a, &config),
        Command::Avfilter(a) => avfilter(a, &config),
        Command::Eval(EvalCommand::Transcription(a)) => eval_transcription(a, &config),
        Command::Eval(EvalCommand::Fingering(a)) => eval_fingering(a, &config),
        Command::Export(a) => export(a),
        Command::Synth(a) => synth(a),
    }
}

fn read_audio(path: &Path) -> Result<AudioBuffer> {
    read_wav(path).map_err(|e| ServiceError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) })
}

fn mono_at(audio: &AudioBuffer, rate: u32) -> Vec<f32> {
    resample(&downmix_mean(audio), audio.sample_rate, rate)
}

#[derive(Debug, Serialize)]
struct AlignReport {
    cost: f64,
    radius: usize,
    rendition_frames: usize,
    recording_frames: usize,
    clamped_events: usize,
    lengthened_notes: usize,
}

fn align(a: AlignArgs, config: &Config) -> Result<()> {
    let p = load_midi(&a.midi)?;
    let cqt = &config.cqt;
    let recording = mono_at(&read_audio(&a.recording)?, cqt.sample_rate);
    let rendition = a.rendition.as_deref().map(read_audio).transpose()?.map(|r| mono_at(&r, cqt.sample_rate));
    let band_s = a.band_s.unwrap_or(config.align.band_s);
    let al = align_performance(&p, &recording, rendition.as_deref(), cqt, band_s).map_err(ServiceError::pipeline)?;
    save_midi(&a.out, &al.warped.performance)?;
    if let Some(path) = &a.path_out {
        write_json(path, &serde_json::json!({ "n": al.dtw.path.n, "m": al.dtw.path.m, "points": al.dtw.path.points }))?;
    }
    if let Some(dir) = &a.features_dir {
        std::fs::create_dir_all(dir).map_err(ServiceError::io(dir))?;
        for (name, seq) in [("rendition.cqt", &al.rendition), ("recording.cqt", &al.recording)] {
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(ServiceError::io(&path))?);
            seq.write_to(&mut f).map_err(ServiceError::io(&path))?;
        }
    }
    print_json(&AlignReport {
        cost: al.dtw.cost,
        radius: al.dtw.radius,
        rendition_frames: al.rendition.n_frames,
        recording_frames: al.recording.n_frames,
        clamped_events: al.warped.clamped_events,
        lengthened_notes: al.warped.lengthened_notes,
    });
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Manifest {
    files: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    recording: PathBuf,
    rendition: Option<PathBuf>,
    rendition_lufs: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FileLoudnessReport {
    recording: PathBuf,
    output: PathBuf,
    rendition_lufs: f64,
    #[serde(flatten)]
    report: LoudnessReport,
}

fn loudness_error(path: &Path, e: LoudnessError) -> ServiceError {
    match e {
        LoudnessError::TooShort(_) | LoudnessError::NoChannels | LoudnessError::RaggedChannels => {
            ServiceError::Validation(format!("{}: {e}", path.display()))
        }
        _ => ServiceError::Pipeline(format!("{}: {e}", path.display())),
    }
}

fn loudness(a: LoudnessArgs, config: &Config) -> Result<()> {
    let manifest: Manifest = serde_json::from_str(&read_text(&a.manifest)?).map_err(|e| ServiceError::parse(&a.manifest)(e.to_string()))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let mut rendition_lufs = Vec::new();
    for f in &manifest.files {
        let l = match (&f.rendition, f.rendition_lufs) {
            (_, Some(l)) => l,
            (Some(r), None) => {
                let path = resolve(r);
                let audio = read_audio(&path)?;
                integrated_loudness(&audio.channels, audio.sample_rate).map_err(|e| loudness_error(&path, e))?
            }
            (None, None) => {
                return Err(ServiceError::parse(&a.manifest)(format!("{}: needs rendition or rendition_lufs", f.recording.display())))
            }
        };
        rendition_lufs.push(l);
    }
    let global = a.global_target.unwrap_or(config.loudness.global_target_lufs);
    let targets = compute_targets(&rendition_lufs, global).map_err(|e| loudness_error(&a.manifest, e))?;

    std::fs::create_dir_all(&a.out_dir).map_err(ServiceError::io(&a.out_dir))?;
    let mut reports = Vec::new();
    for ((f, &target), &rl) in manifest.files.iter().zip(&targets).zip(&rendition_lufs) {
        let path = resolve(&f.recording);
        let audio = read_audio(&path)?;
        let measured = integrated_loudness(&audio.channels, audio.sample_rate).map_err(|e| loudness_error(&path, e))?;
        let (channels, report) = normalize_to(&audio.channels, measured, target).map_err(|e| loudness_error(&path, e))?;
        let stem = path.file_stem().map_or_else(|| "recording".into(), |s| s.to_string_lossy().into_owned());
        let output = a.out_dir.join(format!("{stem}.wav"));
        write_wav(&output, &AudioBuffer { sample_rate: audio.sample_rate, channels })
            .map_err(|e| ServiceError::Io { path: output.clone(), source: std::io::Error::other(e.to_string()) })?;
        let file_report = FileLoudnessReport { recording: path, output, rendition_lufs: rl, report };
        write_json(&a.out_dir.join(format!("{stem}.loudness.json")), &file_report)?;
        reports.push(file_report);
    }
    print_json(&reports);
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunReport {
    summary: Summary,
    export: ExportReport,
}

fn fingering_run(a: FingeringRunArgs, config: &Config) -> Result<()> {
    let bundle = a.bundle.paths()?.load()?;
    let out = run_pipeline(&bundle.landmarks, &bundle.performance, &bundle.geometry, &config.fingering).map_err(ServiceError::pipeline)?;
    let opts = ExportOptions { out_dir: a.out, format: a.format, allow_partial: true };
    let export = export_annotation(&bundle.performance, &out.annotation, &opts)?;
    print_json(&RunReport { summary: out.summary, export });
    Ok(())
}

fn serve(a: ServeArgs, config: &Config) -> Result<()> {
    let session = if a.session.join(STATE_FILE).exists() {
        if !a.bundle.is_empty() {
            log::warn!("session exists; bundle flags are ignored");
        }
        Session::open(&a.session)?
    } else if a.bundle.is_empty() {
        return Err(ServiceError::Validation(format!("no session in {}; pass bundle paths to create one", a.session.display())));
    } else {
        Session::create(&a.session, &a.bundle.paths()?, config.fingering)?
    };
    let addr = match a.bind {
        Some(addr) => addr,
        None => config.serve.bind.parse().map_err(|e| ServiceError::Validation(format!("bind address {:?}: {e}", config.serve.bind)))?,
    };
    eprintln!("session {} ({} pending) at http://{addr}", session.state().session_id, session.pending_count());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Io { path: a.session.clone(), source: e })?;
    runtime
        .block_on(crate::http::serve(Arc::new(RwLock::new(session)), addr))
        .map_err(|e| ServiceError::Io { path: PathBuf::from(addr.to_string()), source: e })
}

fn avfilter(a: AvfilterArgs, config: &Config) -> Result<()> {
    let mut cfg = config.avfilter.clone();
    if let Some(v) = a.fps {
        cfg.fps = v;
    }
    if let Some(v) = a.candidate_range {
        cfg.candidate_range = v;
    }
    if let Some(v) = a.combine {
        cfg.set_combine = v;
    }
    if let Some(v) = a.missing_hand_policy {
        cfg.missing_hand_policy = v;
    }
    if !(cfg.fps > 0.0 && cfg.fps.is_finite()) {
        return Err(ServiceError::Validation(format!("fps must be positive, got {}", cfg.fps)));
    }
    let p = load_midi(&a.midi)?;
    let landmarks = load_landmarks(&a.landmarks)?;
    let geometry = load_geometry(&a.geometry)?;
    let mapper = KeyboardMapper::new(geometry).map_err(|e| ServiceError::parse(&a.geometry)(e.to_string()))?;
    let out = filter_performance(&p, &landmarks, &mapper, &cfg, a.n_frames).map_err(ServiceError::pipeline)?;
    save_midi(&a.out, &out.performance)?;
    write_file(&a.log, out.log_jsonl())?;
    print_json(&serde_json::json!({
        "input_notes": p.notes.len(),
        "kept_notes": out.performance.notes.len(),
        "discarded_notes": p.notes.len() - out.performance.notes.len(),
    }));
    Ok(())
}

#[derive(Debug, Serialize)]
struct Scores {
    precision: f64,
    recall: f64,
    f1: f64,
    matched: usize,
}

#[derive(Debug, Serialize)]
struct TranscriptionReport {
    reference: PathBuf,
    estimate: PathBuf,
    reference_notes: usize,
    estimate_notes: usize,
    onset: Scores,
    onset_offset: Scores,
    onset_velocity: Scores,
    frame: FrameMetrics,
}

fn eval_notes(p: &Performance, pedal: Option<u8>) -> Vec<NoteEvent> {
    match pedal {
        Some(threshold) => apply_sustain_extension(p, threshold),
        None => p.notes.clone(),
    }
}

fn eval_transcription(a: EvalTranscriptionArgs, config: &Config) -> Result<()> {
    if a.reference.len() != a.estimate.len() {
        return Err(ServiceError::Validation(format!(
            "{} references but {} estimates; pass them in pairs",
            a.reference.len(),
            a.estimate.len()
        )));
    }
    let tol = a.onset_tolerance.unwrap_or(config.eval.onset_tolerance_s);
    let pedal = (a.pedal_extension || config.eval.pedal_extension).then_some(config.eval.pedal_threshold);
    let mut reports = Vec::new();
    for (rp, ep) in a.reference.iter().zip(&a.estimate) {
        let r = eval_notes(&load_midi(rp)?, pedal);
        let e = eval_notes(&load_midi(ep)?, pedal);
        let scores = |mode| {
            let m = note_metrics(&r, &e, mode, tol);
            Scores { precision: m.precision, recall: m.recall, f1: m.f1, matched: m.pairs.len() }
        };
        reports.push(TranscriptionReport {
            reference: rp.clone(),
            estimate: ep.clone(),
            reference_notes: r.len(),
            estimate_notes: e.len(),
            onset: scores(MatchMode::Onset),
            onset_offset: scores(MatchMode::Offset),
            onset_velocity: scores(MatchMode::Velocity),
            frame: frame_metrics(&r, &e, FRAME_HOP_S),
        });
    }
    match &a.out {
        Some(path) => write_json(path, &reports),
        None => {
            print_json(&reports);
            Ok(())
        }
    }
}

fn rows_to_annotation(rows: &[FingeringRow]) -> FingeringAnnotation {
    let entries = rows
        .iter()
        .map(|r| NoteAnnotation {
            status: r.status,
            label: r.label(),
            candidates: r.candidates.clone(),
            max_score: r.max_score,
            ..NoteAnnotation::pending(r.note_id, r.onset_s, r.pitch)
        })
        .collect();
    FingeringAnnotation { entries }
}

fn eval_fingering(a: EvalFingeringArgs, config: &Config) -> Result<()> {
    let parse = |p: &Path| -> Result<Vec<FingeringRow>> { parse_fingering_jsonl(&read_text(p)?).map_err(|e| ServiceError::parse(p)(e.to_string())) };
    let reference = parse(&a.reference)?;
    let mut estimate = parse(&a.estimate)?;
    estimate.sort_by(|x, y| x.onset_s.total_cmp(&y.onset_s).then(x.note_id.cmp(&y.note_id)));
    let by_id: std::collections::HashMap<u32, Option<FingerId>> = reference.iter().map(|r| (r.note_id, r.label())).collect();
    let mut missing = Vec::new();
    let truth: Vec<Option<FingerId>> = estimate
        .iter()
        .map(|e| {
            by_id.get(&e.note_id).copied().unwrap_or_else(|| {
                missing.push(e.note_id);
                None
            })
        })
        .collect();
    if !missing.is_empty() {
        log::warn!("{} estimated notes have no reference row", missing.len());
    }
    let subs = if a.substitution.is_empty() { config.eval.substitutions.clone() } else { a.substitution };
    let n_first = a.first.unwrap_or(config.eval.fingering_first_notes);
    let report: FingeringReport = fingering_precision(&truth, &rows_to_annotation(&estimate), n_first, &subs);
    match &a.out {
        Some(path) => write_json(path, &report),
        None => {
            print_json(&report);
            Ok(())
        }
    }
}

fn export(a: ExportArgs) -> Result<()> {
    let session = Session::open(&a.session)?;
    let report = session.export(a.out.as_deref(), a.format, a.allow_partial)?;
    print_json(&report);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    if !(a.duration > 0.0 && a.note_s > 0.0) {
        return Err(ServiceError::Validation("duration and note length must be positive".into()));
    }
    let opts = PracticeOptions { duration_s: a.duration, note_s: a.note_s, ambiguous_tail: a.ambiguous_tail, ..Default::default() };
    let scene = practice_scene(&opts);
    let paths = write_synthetic_bundle(&a.out, &scene)?;
    if a.audio {
        let rate = pianotrace_core::align::FEATURE_SAMPLE_RATE;
        let rendition = pianotrace_core::align::render_sinusoidal(&scene.performance(), rate);
        let delay = (0.5 * f64::from(rate)) as usize;
        let noise = pink_noise(7, rendition.len() + delay, 0.01);
        let recording: Vec<f32> = (0..rendition.len() + delay)
            .map(|i| if i >= delay { rendition[i - delay] } else { 0.0 } + noise[i])
            .collect();
        for (name, samples) in [("rendition.wav", rendition), ("recording.wav", recording)] {
            let path = a.out.join(name);
            write_wav(&path, &AudioBuffer::mono(rate, samples))
                .map_err(|e| ServiceError::Io { path: path.clone(), source: std::io::Error::other(e.to_string()) })?;
        }
    }
    print_json(&serde_json::json!({ "bundle": paths, "notes": scene.notes.len(), "frames": scene.n_frames() }));
    Ok(())
}
