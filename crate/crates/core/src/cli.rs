//! Command-line front end. Exit codes: 0 on success, 1 when inputs cannot
//! be loaded or tracking fails, 2 for usage and configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::benchmark::{evaluate, sequence_curves};
use crate::dataset::{
    encode_png, load_sequence, synthesize_sequence, write_results, write_sequence, GroundTruthPolicy, ResultLog,
    Sequence, SynthSpec,
};
use crate::geometry::Rect;
use crate::optimizer::ModelMode;
use crate::overlay;
use crate::selftest;
use crate::tracker::{FrameOutput, TrackerConfig, TrackerState};

/// Environment variable naming the default benchmark dataset root.
pub const DATASET_ENV: &str = "LMCF_DATASET";

pub const EXIT_OK: i32 = 0;
pub const EXIT_LOAD: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lmcf", version, about = "Large-margin correlation filter tracker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track one OTB-layout sequence and write a result log.
    Track(TrackArgs),
    /// Run one-pass evaluation over every sequence under a dataset root.
    Bench(BenchArgs),
    /// Check the Fourier-domain solver against dense references.
    Selftest(SelftestArgs),
    /// Write a synthetic fixture in OTB layout.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TrackerFlags {
    /// `key = value` configuration file; unset keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Detect at the previous position only.
    #[arg(long)]
    pub no_multimodal: bool,
    /// Update the model on every frame regardless of confidence.
    #[arg(long)]
    pub always_update: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Linear,
    KernelLinear,
    KernelGaussian,
}

impl From<ModeArg> for ModelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => ModelMode::Linear,
            ModeArg::KernelLinear => ModelMode::KernelLinear,
            ModeArg::KernelGaussian => ModelMode::KernelGaussian,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    /// Sequence directory (`img/` plus `groundtruth_rect.txt`).
    #[arg(long)]
    pub seq: PathBuf,
    /// Result log; defaults to `<sequence>.jsonl` in the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrackerFlags,
    /// Write annotated PNG frames into this directory.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Initial box `x,y,w,h` (0-indexed), overriding the first annotation.
    #[arg(long, value_parser = parse_box)]
    pub init: Option<Rect>,
    /// Record per-frame latency in the log.
    #[arg(long)]
    pub timing: bool,
    /// Worker threads for re-detection.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Root holding one OTB-layout directory per sequence.
    #[arg(long, env = DATASET_ENV)]
    pub dataset: PathBuf,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated sequence names to keep.
    #[arg(long, value_delimiter = ',')]
    pub filter: Option<Vec<String>>,
    #[command(flatten)]
    pub flags: TrackerFlags,
    /// Record per-frame latency (reported as FPS).
    #[arg(long)]
    pub timing: bool,
    /// Worker threads; sequences are tracked in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    Translate,
    ScaleRamp,
    Occlude,
    Distractor,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKindArg,
    /// Output sequence directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Override the fixture length.
    #[arg(long)]
    pub length: Option<usize>,
}

fn parse_box(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] if w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite() => Ok(Rect::new(x, y, w, h)),
        [_, _, _, _] => Err("box must be finite with positive width and height".into()),
        _ => Err(format!("expected x,y,w,h, got {} values", v.len())),
    }
}

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Load(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Load(_) => EXIT_LOAD,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Load(e.into())
    }
}

type CmdResult = Result<(), Failure>;

/// Parse arguments, run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Track(a) => cmd_track(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Selftest(a) => cmd_selftest(&a),
        Command::Synth(a) => cmd_synth(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Load(e)) = &f;
            eprintln!("error: {e:#}");
            f.code()
        }
    }
}

/// Defaults, then the config file, then command-line overrides.
pub fn build_config(flags: &TrackerFlags) -> Result<TrackerConfig, Failure> {
    let mut config = match &flags.config {
        Some(path) => TrackerConfig::load(path).map_err(|e| match e {
            crate::Error::Io(io) => Failure::Load(anyhow!(io).context(format!("reading {}", path.display()))),
            other => Failure::Usage(other.into()),
        })?,
        None => TrackerConfig::default(),
    };
    if let Some(m) = flags.mode {
        config.mode = m.into();
    }
    if flags.no_multimodal {
        config.multimodal = false;
    }
    if flags.always_update {
        config.always_update = true;
    }
    config.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(config)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if jobs == Some(0) {
        return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Load(e.into()))
}

/// Per-frame outputs plus the wall-clock time spent inside the tracker.
pub struct TrackRun {
    pub records: Vec<FrameOutput>,
    pub elapsed_s: f64,
}

/// Track a loaded sequence, calling `each` with every frame and its output.
pub fn track_sequence(
    seq: &Sequence,
    init: Rect,
    config: TrackerConfig,
    timing: bool,
    mut each: impl FnMut(usize, &crate::image::Image, &FrameOutput) -> anyhow::Result<()>,
) -> anyhow::Result<TrackRun> {
    let mut records = Vec::with_capacity(seq.len());
    let mut elapsed_s = 0.0;
    let mut state: Option<TrackerState> = None;
    for (i, frame) in seq.frame_iter().enumerate() {
        let frame = frame?;
        let start = Instant::now();
        let mut out = match state.as_mut() {
            None => {
                let (s, out) = TrackerState::init(&frame, init, config)?;
                state = Some(s);
                out
            }
            Some(s) => s.step(&frame)?,
        };
        let dt = start.elapsed().as_secs_f64();
        elapsed_s += dt;
        if timing {
            out.latency_ms = Some(dt * 1e3);
        }
        each(i, &frame, &out)?;
        records.push(out);
    }
    Ok(TrackRun { records, elapsed_s })
}

pub fn cmd_track(args: &TrackArgs) -> CmdResult {
    let config = build_config(&args.flags)?;
    let pool = thread_pool(args.jobs)?;
    let policy = if args.init.is_some() {
        GroundTruthPolicy::Optional
    } else {
        GroundTruthPolicy::Required
    };
    let loaded = load_sequence(&args.seq, policy).with_context(|| format!("loading {}", args.seq.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let seq = loaded.sequence;
    let init = match args.init {
        Some(b) => b,
        None => seq.init_box()?,
    };
    if let Some(dir) = &args.overlay {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let run = pool.install(|| {
        track_sequence(&seq, init, config, args.timing, |i, frame, out| {
            if let Some(dir) = &args.overlay {
                let truth = seq.ground_truth.get(i).copied().flatten();
                let img = overlay::render(frame, out, truth.as_ref());
                encode_png(&img, &dir.join(format!("{:04}.png", i + 1)))?;
            }
            Ok(())
        })
    })?;
    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.jsonl", seq.name)));
    let log = ResultLog {
        sequence: seq.name.clone(),
        config,
        records: run.records,
    };
    write_results(&log, &out_path).with_context(|| format!("writing {}", out_path.display()))?;
    println!("{}", track_summary(&seq, &log, run.elapsed_s));
    Ok(())
}

fn track_summary(seq: &Sequence, log: &ResultLog, elapsed_s: f64) -> String {
    let n = log.records.len();
    let updates = log.records.iter().filter(|r| r.updated).count();
    let fps = if elapsed_s > 0.0 {
        n as f64 / elapsed_s
    } else {
        f64::INFINITY
    };
    let mut s = format!(
        "{}: {n} frames, mean FPS {fps:.1}, update rate {:.3}",
        seq.name,
        updates as f64 / n.max(1) as f64
    );
    let pred: Vec<Rect> = log.records.iter().map(|r| r.bbox).collect();
    if let Some(c) = sequence_curves(&pred, &seq.ground_truth) {
        s.push_str(&format!(", precision@20 {:.3}, AUC {:.3}", c.precision_at_20, c.auc));
    }
    s
}

fn sequence_dirs(root: &Path, filter: Option<&[String]>) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("reading dataset root {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("img").is_dir())
        .filter(|p| {
            filter.is_none_or(|names| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                names.iter().any(|f| f == name)
            })
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(anyhow!("no sequences found under {}", root.display()));
    }
    Ok(dirs)
}

pub fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let config = build_config(&args.flags)?;
    let pool = thread_pool(args.jobs)?;
    let dirs = sequence_dirs(&args.dataset, args.filter.as_deref())?;
    let mut sequences = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let loaded =
            load_sequence(dir, GroundTruthPolicy::Required).with_context(|| format!("loading {}", dir.display()))?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        sequences.push(loaded.sequence);
    }
    let logs: Vec<ResultLog> = pool.install(|| {
        sequences
            .par_iter()
            .map(|seq| {
                let init = seq.init_box()?;
                let run = track_sequence(seq, init, config, args.timing, |_, _, _| Ok(()))
                    .with_context(|| format!("tracking {}", seq.name))?;
                Ok(ResultLog {
                    sequence: seq.name.clone(),
                    config,
                    records: run.records,
                })
            })
            .collect::<anyhow::Result<_>>()
    })?;
    let results_dir = args.out.join("results");
    for log in &logs {
        write_results(log, &results_dir.join(format!("{}.jsonl", log.sequence)))?;
    }
    let report = evaluate(&logs, &sequences)?;
    report.write(&args.out)?;
    print!("{}", report.summary());
    Ok(())
}

pub fn cmd_selftest(args: &SelftestArgs) -> CmdResult {
    if args.instances == 0 {
        return Err(Failure::Usage(anyhow!("--instances must be at least 1")));
    }
    let start = Instant::now();
    let checks = selftest::run(args.instances, args.seed)?;
    let mut failed = 0;
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed());
        println!(
            "{verdict}  {}  ({} cases, max error {:.2e}, tolerance {:.0e})",
            c.name, c.instances, c.max_error, c.tolerance
        );
    }
    println!(
        "{} of {} checks passed in {:.2} s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        return Err(Failure::Load(anyhow!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

pub fn synth_spec(kind: SynthKindArg, seed: u64, length: Option<usize>) -> SynthSpec {
    let mut spec = match kind {
        SynthKindArg::Translate => SynthSpec::translate_fixture(seed),
        SynthKindArg::ScaleRamp => SynthSpec::scale_ramp_fixture(seed),
        SynthKindArg::Occlude => SynthSpec::occlusion_fixture(seed),
        SynthKindArg::Distractor => SynthSpec::distractor_fixture(seed),
    };
    if let Some(n) = length {
        spec.length = n;
    }
    spec
}

pub fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let spec = synth_spec(args.kind, args.seed, args.length);
    let synthetic = synthesize_sequence(&spec).map_err(|e| Failure::Usage(e.into()))?;
    write_sequence(&synthetic.sequence, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    std::fs::write(args.out.join("spec.json"), serde_json::to_string_pretty(&spec)?)?;
    println!(
        "wrote {} frames of {} to {}",
        synthetic.sequence.len(),
        synthetic.sequence.name,
        args.out.display()
    );
    Ok(())
}
