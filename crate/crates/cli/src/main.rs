use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gesture_fidelity::data_model::{load_manifest, validate_dataset, Condition, HandSelector, DEFAULT_CONFIDENCE_THRESHOLD};
use gesture_fidelity::diversity::TsneConfig;
use gesture_fidelity::hand_geometry::DEFAULT_BINS;
use gesture_fidelity::kinematics::LandmarkAggregation;
use gesture_fidelity::prompt_forge::{
    emit_generation_jobs, expected_videos, scan_frame_refs, write_jobs, JobOptions, PromptSpec, DEFAULT_DURATION_S,
    DEFAULT_SAMPLES,
};
use gesture_fidelity::report::{run_sections, OutputFormat, ReportError, RunConfig, SectionKind, Status, DEFAULT_ALPHAS};

const THREADS_VAR: &str = "GESTURE_FIDELITY_THREADS";

#[derive(Parser)]
#[command(name = "gesture-fidelity", version, about = "Fidelity metrics for synthetic gesture-video datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that every file a manifest references loads and is consistent.
    Validate(ValidateArgs),
    /// Velocity, acceleration and jerk per condition.
    Kinematics {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        kin: KinematicsArgs,
    },
    /// Joint-angle KL divergence and EMD per finger joint.
    Angles {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        angles: AngleArgs,
    },
    /// Hand confidence, FID, FVD and CLIP similarity per condition.
    Frechet {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        frechet: FrechetArgs,
    },
    /// Per-video VAS/PAS, GAS at each alpha, and iso-GAS lines.
    Alignment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        alignment: AlignmentArgs,
    },
    /// t-SNE projection of pose embeddings with per-condition ellipses.
    Diversity {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tsne: TsneArgs,
    },
    /// Compose structured prompts and write a generation job manifest.
    Prompts(PromptArgs),
    /// Every section plus provenance.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        kin: KinematicsArgs,
        #[command(flatten)]
        angles: AngleArgs,
        #[command(flatten)]
        frechet: FrechetArgs,
        #[command(flatten)]
        alignment: AlignmentArgs,
        #[command(flatten)]
        tsne: TsneArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Real dataset manifest.
    #[arg(long)]
    real: PathBuf,
    /// Synthetic dataset manifest.
    #[arg(long)]
    synth: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Seed for the t-SNE initialisation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only these synthetic conditions (comma separated).
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<Condition>>,
    /// Landmarks below this palm-detection confidence are dropped.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    confidence_threshold: f64,
    /// Hand policy when a manifest does not name the pointing hand. `both`
    /// pools both hands for joint angles and uses the more confident hand
    /// for motion and pose.
    #[arg(long, value_enum, default_value_t = HandArg::Both)]
    hand: HandArg,
}

#[derive(Args)]
struct KinematicsArgs {
    /// How the 21 landmark derivative norms collapse per frame.
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    aggregation: AggregationArg,
}

#[derive(Args)]
struct AngleArgs {
    /// Histogram bins over [0, 180] degrees.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
}

#[derive(Args)]
struct FrechetArgs {
    /// Average synthetic embeddings over the samples of each prompt.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    group_average: Switch,
}

#[derive(Args)]
struct AlignmentArgs {
    /// GAS weights on PAS (comma separated or repeated).
    #[arg(long = "alpha", value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
    alphas: Vec<f64>,
}

#[derive(Args)]
struct TsneArgs {
    #[arg(long, default_value_t = TsneConfig::default().perplexity)]
    perplexity: f64,
    #[arg(long, default_value_t = TsneConfig::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = TsneConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TsneConfig::default().initial_momentum)]
    initial_momentum: f64,
    #[arg(long, default_value_t = TsneConfig::default().final_momentum)]
    final_momentum: f64,
    #[arg(long, default_value_t = TsneConfig::default().momentum_switch)]
    momentum_switch: usize,
    #[arg(long, default_value_t = TsneConfig::default().early_exaggeration)]
    early_exaggeration: f64,
    #[arg(long, default_value_t = TsneConfig::default().exaggeration_iterations)]
    exaggeration_iterations: usize,
    /// Project the real videos together with the synthetic ones.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    include_real: Switch,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, required_unless_present = "synth")]
    real: Option<PathBuf>,
    #[arg(long)]
    synth: Option<PathBuf>,
    /// Also write `validation.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    confidence_threshold: f64,
}

#[derive(Args)]
struct PromptArgs {
    /// Object names, comma separated, or a file with one name per line.
    #[arg(long, required = true, value_delimiter = ',')]
    objects: Vec<String>,
    /// Conditions to generate (default: all synthetic conditions).
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<Condition>>,
    /// Prompt template JSON (default: the bundled pointing template).
    #[arg(long)]
    template: Option<PathBuf>,
    /// Directory with `<object>/[<condition>/]{start,end}.png`.
    #[arg(long)]
    frames_dir: PathBuf,
    /// Output directory for `jobs.json`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u32,
    /// Clip length in seconds.
    #[arg(long, default_value_t = DEFAULT_DURATION_S)]
    duration: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum HandArg {
    MostConfident,
    Left,
    Right,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Mean,
    Max,
    WristOnly,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("{THREADS_VAR}: {e}")))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(args) => validate(args),
        Command::Prompts(args) => prompts(args),
        Command::Kinematics { data, kin } => {
            let mut cfg = base_config(&data);
            cfg.aggregation = kin.aggregation.into();
            sections(&cfg, &[SectionKind::Table2])
        }
        Command::Angles { data, angles } => {
            let mut cfg = base_config(&data);
            cfg.bins = angles.bins;
            sections(&cfg, &[SectionKind::Table3])
        }
        Command::Frechet { data, frechet } => {
            let mut cfg = base_config(&data);
            cfg.group_average = frechet.group_average.on();
            sections(&cfg, &[SectionKind::Table1])
        }
        Command::Alignment { data, alignment } => {
            let mut cfg = base_config(&data);
            cfg.alphas = alignment.alphas;
            sections(&cfg, &[SectionKind::Alignment])
        }
        Command::Diversity { data, tsne } => {
            let mut cfg = base_config(&data);
            tsne.apply(&mut cfg);
            sections(&cfg, &[SectionKind::Diversity])
        }
        Command::Report { data, kin, angles, frechet, alignment, tsne } => {
            let mut cfg = base_config(&data);
            cfg.aggregation = kin.aggregation.into();
            cfg.bins = angles.bins;
            cfg.group_average = frechet.group_average.on();
            cfg.alphas = alignment.alphas;
            tsne.apply(&mut cfg);
            sections(&cfg, &SectionKind::ALL)
        }
    }
}

fn base_config(data: &DataArgs) -> RunConfig {
    let mut cfg = RunConfig::new(&data.real, &data.synth, &data.out);
    cfg.format = data.format;
    cfg.conditions = data.conditions.clone();
    cfg.confidence_threshold = data.confidence_threshold;
    cfg.hand_selector = data.hand.into();
    cfg.tsne.seed = data.seed;
    cfg
}

fn sections(cfg: &RunConfig, wanted: &[SectionKind]) -> Result<(), Failure> {
    let report = run_sections(cfg, wanted)?;
    let mut failed = Vec::new();
    for (name, status) in &report.provenance.sections {
        match status {
            Status::Ok => println!("{name}: ok"),
            Status::Skipped { reason } if reason == "not requested" => {}
            Status::Skipped { reason } => println!("{name}: skipped ({reason})"),
            Status::Failed { error } => {
                println!("{name}: failed ({error})");
                failed.push(name.as_str());
            }
        }
    }
    for w in &report.provenance.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", report.provenance.files.len(), cfg.output_dir.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!("failed sections: {}", failed.join(", "))))
    }
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&args.confidence_threshold) {
        return Err(Failure::Usage(format!("confidence threshold {} outside [0, 1]", args.confidence_threshold)));
    }
    let mut reports = Vec::new();
    for path in [&args.real, &args.synth].into_iter().flatten() {
        let manifest = load_manifest(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        reports.push(validate_dataset(&manifest, args.confidence_threshold));
    }
    let mut failures = 0;
    for r in &reports {
        let bad: Vec<_> = r.failures().collect();
        println!("{}: {} checks, {} failed", r.dataset, r.entries.len(), bad.len());
        for e in &bad {
            println!("  {} {}: {}", e.video_id.as_deref().unwrap_or("-"), e.check, e.detail);
        }
        failures += bad.len();
    }
    if let Some(out) = &args.out {
        write_json(out, "validation.json", &reports)?;
    }
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Data(format!("{failures} validation failures")))
    }
}

fn prompts(args: PromptArgs) -> Result<(), Failure> {
    let data = |e: gesture_fidelity::prompt_forge::PromptError| Failure::Data(e.to_string());
    let spec = match &args.template {
        Some(p) => PromptSpec::load(p).map_err(data)?,
        None => PromptSpec::default_template(),
    };
    let objects = read_objects(&args.objects)?;
    let conditions = args.conditions.unwrap_or_else(|| Condition::SYNTHETIC.to_vec());
    let refs = scan_frame_refs(&args.frames_dir, &objects, &conditions);
    let opts = JobOptions { samples: args.samples, duration_s: args.duration };
    let jobs = emit_generation_jobs(&spec, &objects, &conditions, &refs, opts).map_err(data)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Data(format!("{}: {e}", args.out.display())))?;
    let path = args.out.join("jobs.json");
    write_jobs(&jobs, &path).map_err(data)?;
    println!("{} prompts, {} expected videos -> {}", jobs.len(), expected_videos(&jobs), path.display());
    Ok(())
}

/// A single existing file argument is read as one object name per line.
fn read_objects(values: &[String]) -> Result<Vec<String>, Failure> {
    if let [single] = values {
        let path = Path::new(single);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{single}: {e}")))?;
            return Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect());
        }
    }
    Ok(values.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Data(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    std::fs::write(dir.join(name), text + "\n").map_err(io)
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

impl From<HandArg> for HandSelector {
    fn from(h: HandArg) -> Self {
        match h {
            HandArg::MostConfident => HandSelector::MostConfident,
            HandArg::Left => HandSelector::Left,
            HandArg::Right => HandSelector::Right,
            HandArg::Both => HandSelector::Both,
        }
    }
}

impl From<AggregationArg> for LandmarkAggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Mean => LandmarkAggregation::Mean,
            AggregationArg::Max => LandmarkAggregation::Max,
            AggregationArg::WristOnly => LandmarkAggregation::WristOnly,
        }
    }
}

impl TsneArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let seed = cfg.tsne.seed;
        cfg.tsne = TsneConfig {
            perplexity: self.perplexity,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            initial_momentum: self.initial_momentum,
            final_momentum: self.final_momentum,
            momentum_switch: self.momentum_switch,
            early_exaggeration: self.early_exaggeration,
            exaggeration_iterations: self.exaggeration_iterations,
            seed,
        };
        cfg.tsne_include_real = self.include_real.on();
    }
}
