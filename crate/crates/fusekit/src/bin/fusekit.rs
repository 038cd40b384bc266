use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fusekit::core::fusion::{apply_plan, fit_plan};
use fusekit::core::synth::{CheckpointRange, ForgetCohort, LearnPhase, NoiseKind, TrajectorySpec};
use fusekit::core::{CheckpointSource, EpsilonGrid, FitConfig, FitMode, SubsetMask};
use fusekit::harness::{bench, make_split, BenchConfig, Method, SplitMode, SplitSpec, SubsetSpec};
use fusekit::inspect::inspect;
use fusekit::plan_file::{load_plan, save_plan};
use fusekit::synthetic::{load_spec, write_synthetic};
use fusekit::{open_log, validate_log, DiskLog};

const EXIT_INVALID: u8 = 1;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "fusekit", version, about = "Checkpoint forgetting analysis and knowledge fusion over prediction logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every invariant of a log directory.
    Validate { log: PathBuf },
    /// Generate a synthetic log with a ground-truth sidecar.
    Synth(SynthArgs),
    /// Forget/learning curves, retention and mistake histograms.
    Inspect(InspectArgs),
    /// Fit a fusion plan on a validation split.
    Fuse(FuseArgs),
    /// Apply a fusion plan and write per-example predictions.
    Apply(ApplyArgs),
    /// Compare fusion against baselines over seeded splits.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON trajectory spec; overrides every generator flag.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    examples: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 30)]
    checkpoints: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Symmetric)]
    noise_kind: NoiseArg,
    /// Share of examples learned and then forgotten.
    #[arg(long, default_value_t = 0.0)]
    forget_fraction: f64,
    /// Last checkpoint index by which ordinary examples are learned.
    #[arg(long, default_value_t = 9)]
    learn_end: usize,
    #[arg(long, default_value_t = 15)]
    forget_start: usize,
    #[arg(long, default_value_t = 20)]
    forget_end: usize,
    #[arg(long, default_value_t = 0.7)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Symmetric,
    Asymmetric,
}

#[derive(Args)]
struct InspectArgs {
    log: PathBuf,
    /// `all`, `val:SEED[:FRAC]` or `test:SEED[:FRAC]`.
    #[arg(long, default_value = "all", value_parser = parse_subset)]
    subset: SubsetSpec,
    /// Output path; `.json` for a single report, otherwise CSV tables.
    #[arg(long)]
    out: PathBuf,
    /// Add the large-loss balance series (needs clean labels).
    #[arg(long)]
    loss_balance: bool,
    /// Loss threshold for the balance series; defaults to ln C.
    #[arg(long, requires = "loss_balance")]
    loss_threshold: Option<f64>,
    /// Also draw the curves as an SVG line chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Iterative,
}

#[derive(Args)]
struct FitArgs {
    /// Window half-width around each fused checkpoint.
    #[arg(long, default_value_t = 1)]
    w: usize,
    /// Weight grid spacing.
    #[arg(long, default_value = "0.01", value_parser = parse_grid)]
    grid: EpsilonGrid,
    #[arg(long, value_enum, default_value_t = ModeArg::Iterative)]
    mode: ModeArg,
    /// Keep fitting after a round picks weight zero, until no candidates remain.
    #[arg(long)]
    exhaust: bool,
    /// Upper bound on plan steps.
    #[arg(long)]
    max_steps: Option<usize>,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            window: self.w,
            grid: self.grid,
            mode: match self.mode {
                ModeArg::Single => FitMode::Single,
                ModeArg::Iterative => FitMode::Iterative,
            },
            exhaust: self.exhaust,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Args)]
struct FuseArgs {
    log: PathBuf,
    #[arg(long, default_value_t = 0)]
    val_seed: u64,
    /// Validation share of the examples; 1 fits on every example.
    #[arg(long, default_value_t = 0.5)]
    val_frac: f64,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    log: PathBuf,
    plan: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_subset)]
    subset: SubsetSpec,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    log: PathBuf,
    #[arg(long, default_value = "single,horizontal,fixed,es,kf", value_parser = parse_methods)]
    methods: MethodList,
    /// Number of seeds, counting up from --first-seed.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 0.5)]
    val_frac: f64,
    /// Fit and evaluate on every example instead of splitting.
    #[arg(long)]
    shared_split: bool,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_subset(s: &str) -> Result<SubsetSpec, String> {
    s.parse().map_err(|e: fusekit::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<EpsilonGrid, String> {
    EpsilonGrid::parse_step(s).map_err(|e| e.to_string())
}

#[derive(Clone)]
struct MethodList(Vec<Method>);

fn parse_methods(s: &str) -> Result<MethodList, String> {
    Method::parse_list(s).map(MethodList).map_err(|e| e.to_string())
}

/// Failure carrying a process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_DATA, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::from(format!("{}: {e}", path.display())))
}

fn run_validate(dir: &Path) -> Outcome {
    let report = validate_log(dir);
    print!("{report}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_INVALID, message: format!("{} violation(s)", report.violations.len()) })
    }
}

fn run_synth(args: &SynthArgs) -> Outcome {
    let spec = match &args.spec {
        Some(path) => load_spec(path)?,
        None => {
            let learn = CheckpointRange::new(0, args.learn_end);
            let cohorts = if args.forget_fraction > 0.0 {
                vec![ForgetCohort {
                    fraction: args.forget_fraction,
                    learn,
                    forget: CheckpointRange::new(args.forget_start, args.forget_end),
                }]
            } else {
                Vec::new()
            };
            TrajectorySpec {
                examples: args.examples,
                classes: args.classes,
                checkpoints: args.checkpoints,
                noise_rate: args.noise_rate,
                noise_kind: if args.noise_rate > 0.0 {
                    match args.noise_kind {
                        NoiseArg::Symmetric => NoiseKind::Symmetric,
                        NoiseArg::Asymmetric => NoiseKind::Asymmetric,
                    }
                } else {
                    NoiseKind::None
                },
                learn: vec![LearnPhase { share: 1.0, range: learn }],
                cohorts,
                confidence: args.confidence,
                seed: args.seed,
                ..TrajectorySpec::default()
            }
        }
    };
    write_synthetic(&spec, &args.out)?;
    println!("wrote {} checkpoints of {} examples to {}", spec.checkpoints, spec.examples, args.out.display());
    Ok(())
}

fn run_inspect(args: &InspectArgs) -> Outcome {
    let log = open_log(&args.log)?;
    let subset = args.subset.resolve(log.n_examples())?;
    let balance = args.loss_balance.then_some(args.loss_threshold);
    let report = inspect(&log, &subset, balance)?;
    for path in report.write(&args.out, args.svg.as_deref())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_fuse(args: &FuseArgs) -> Outcome {
    let log = open_log(&args.log)?;
    let all = SubsetMask::all(log.n_examples());
    let val = if args.val_frac == 1.0 {
        all
    } else {
        make_split(&all, SplitSpec { seed: args.val_seed, val_fraction: args.val_frac })?.0
    };
    let mut outcome = fit_plan(&log, &val, &args.fit.config())?;
    outcome.plan.meta.seed = Some(args.val_seed);
    save_plan(&args.out, &outcome.plan)?;
    let plan = &outcome.plan;
    let steps: Vec<String> =
        plan.steps.iter().map(|s| format!("({}, {})", s.epoch, plan.grid.format(s.epsilon_units))).collect();
    println!("plan [{}]", steps.join(", "));
    println!("validation accuracy {} -> {}", outcome.base_accuracy(), outcome.fused_accuracy());
    Ok(())
}

fn run_apply(args: &ApplyArgs) -> Outcome {
    let log = open_log(&args.log)?;
    let plan = load_plan(&args.plan)?;
    let subset = args.subset.resolve(log.n_examples())?;
    let fused = apply_plan(&log, &plan, &subset)?;
    let labels = log.labels();
    let mut out = String::from("index,label,pred");
    for c in 0..log.n_classes() {
        write!(out, ",p{c}").unwrap();
    }
    out.push('\n');
    for (j, i) in subset.iter().enumerate() {
        write!(out, "{i},{},{}", labels[i], fused.predictions[j]).unwrap();
        for p in fused.probs.row(j) {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    write_text(&args.out, &out)?;
    println!("accuracy {}", fused.accuracy(labels));
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Outcome {
    let log: DiskLog = open_log(&args.log)?;
    let config = BenchConfig {
        methods: args.methods.0.clone(),
        seeds: (args.first_seed..args.first_seed + args.seeds).collect(),
        split: if args.shared_split { SplitMode::Shared } else { SplitMode::Random { val_fraction: args.val_frac } },
        fit: args.fit.config(),
    };
    let report = bench(&log, &config)?;
    write_text(&args.out, &report.to_json())?;
    for m in &report.methods {
        println!("{:<12} {:.4} ± {:.4}", m.method, m.mean, m.ste);
    }
    println!("{:<12} {:.4}", "improvement", report.improvement.value);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { log } => run_validate(log),
        Command::Synth(a) => run_synth(a),
        Command::Inspect(a) => run_inspect(a),
        Command::Fuse(a) => run_fuse(a),
        Command::Apply(a) => run_apply(a),
        Command::Bench(a) => run_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
