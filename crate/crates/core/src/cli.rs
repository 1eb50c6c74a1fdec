//! `lrdtool` command line: `analyze`, `gen`, `shuffle` and `queue`.
//!
//! Exit codes: 0 on success, 2 for usage, I/O or input errors, 3 when a
//! computation on valid input fails (for example too few points to fit).

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::fmt::sig6;
use crate::hurst::{self, HurstError};
use crate::queue::{self, QueueError};
use crate::shuffle::{self, ShuffleError, ShuffleKind, ShuffleSpec};
use crate::stats::{self, StatsError};
use crate::synth::{self, Seed, SynthError, TrainSourceParams};
use crate::trace::{self, InterarrivalSeries, PacketRecord, TraceError, PACKET_CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lrdtool", version, about = "Variance-time analysis, traffic synthesis, shuffles and queue sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the Hurst coefficient of a packet CSV or interarrival file.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic trace.
    Gen(GenArgs),
    /// Transform an interarrival file.
    Shuffle(ShuffleArgs),
    /// Sweep utilization through a trace-driven single-server queue.
    Queue(QueueArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Variance-time CSV destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report destination (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Bin width in seconds.
    #[arg(long, default_value_t = trace::DEFAULT_DELTA)]
    pub delta: f64,
    /// Choose the bin width so that bins hold this many packets on average
    /// (overrides --delta).
    #[arg(long)]
    pub target_mean: Option<f64>,
    #[arg(long, default_value_t = hurst::DEFAULT_M_MIN)]
    pub m_min: usize,
    /// Largest aggregation level in the fit (default n/10).
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Keep only traffic between two nodes, `a,b`.
    #[arg(long)]
    pub pair: Option<String>,
    /// With --pair, keep only a->b.
    #[arg(long)]
    pub unidirectional: bool,
    /// Sort packet CSV rows by timestamp instead of rejecting disorder.
    #[arg(long)]
    pub sort: bool,
    /// Classification tolerance above 1/2.
    #[arg(long, default_value_t = hurst::DEFAULT_CLASSIFY_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Poisson,
    Uniform,
    Train,
    Trains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Interarrival,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    /// Packets to generate (split evenly across sources for `trains`).
    #[arg(short = 'n', long = "packets", default_value_t = 1_000_000)]
    pub n: usize,
    /// Base seed; source i of `trains` uses seed + i unless --seeds is given.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Arrivals per time unit (poisson).
    #[arg(long, default_value_t = 0.25)]
    pub rate: f64,
    /// Smallest gap (uniform).
    #[arg(long, default_value_t = 0.0)]
    pub low: f64,
    /// Largest gap, exclusive (uniform).
    #[arg(long, default_value_t = 8.0)]
    pub high: f64,
    #[arg(long, default_value_t = 250.0)]
    pub intertrain: f64,
    #[arg(long, default_value_t = 50.0)]
    pub cars: f64,
    #[arg(long, default_value_t = 25.0)]
    pub intercar: f64,
    /// Number of identical sources (trains).
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// Per-source parameters `intertrain:cars:intercar,...` (trains).
    #[arg(long)]
    pub params: Option<String>,
    /// Per-source seeds `s1,s2,...` (trains).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Seconds per generator time unit.
    #[arg(long, default_value_t = 0.001)]
    pub time_unit: f64,
    #[arg(long, value_enum, default_value_t = TraceFormat::Interarrival)]
    pub format: TraceFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShuffleKindArg {
    Full,
    External,
    Internal,
    Markov1,
}

#[derive(Debug, Args)]
pub struct ShuffleArgs {
    pub kind: ShuffleKindArg,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Block size (external, internal).
    #[arg(short = 'm', long = "block")]
    pub m: Option<usize>,
    /// Quantile bins (markov1).
    #[arg(long, default_value_t = shuffle::DEFAULT_QUANTILE_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Approx {
    Kingman,
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Sweep CSV; rows are appended, the header is written once.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "A")]
    pub label: String,
    /// Explicit utilization grid `r1,r2,...` (overrides the range flags).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub rho_min: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rho_step: f64,
    #[arg(long, default_value_t = queue::DEFAULT_WARMUP)]
    pub warmup: f64,
    /// Emit an analytic curve instead of simulating.
    #[arg(long, value_enum)]
    pub approx: Option<Approx>,
    /// Normalized delay defining the knee.
    #[arg(long, default_value_t = queue::DEFAULT_KNEE_THRESHOLD)]
    pub threshold: f64,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    fn compute(message: impl Into<String>) -> Self {
        CliError { code: EXIT_COMPUTE, message: message.into() }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<HurstError> for CliError {
    fn from(e: HurstError) -> Self {
        CliError::compute(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::compute(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<ShuffleError> for CliError {
    fn from(e: ShuffleError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<QueueError> for CliError {
    fn from(e: QueueError) -> Self {
        match e {
            QueueError::InvalidGrid(_)
            | QueueError::InvalidUtilization(_)
            | QueueError::InvalidWarmup(_)
            | QueueError::InvalidInput(_)
            | QueueError::TooFewSamples { .. } => CliError::input(e.to_string()),
            _ => CliError::compute(e.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(stderr, "{}", e.render());
            return EXIT_INPUT;
        }
        // --help and --version
        Err(e) => {
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, stdout),
        Command::Gen(a) => cmd_gen(&a, stdout),
        Command::Shuffle(a) => cmd_shuffle(&a, stdout),
        Command::Queue(a) => cmd_queue(&a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn is_packet_csv(text: &str) -> bool {
    text.lines().next().map(|l| l.trim_end_matches('\r')) == Some(PACKET_CSV_HEADER)
}

fn read_interarrivals(path: &Path) -> Result<InterarrivalSeries, CliError> {
    let text = read_text(path)?;
    if is_packet_csv(&text) {
        let trace = trace::parse_packet_csv(text.as_bytes(), false)?;
        return Ok(trace::to_interarrivals(&trace)?);
    }
    Ok(trace::parse_interarrival_file(text.as_bytes())?)
}

/// Runs `f` against the named file, or stdout when no path is given.
fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| CliError::input(format!("bad {what} {item:?}")))
        })
        .collect()
}

pub fn cmd_analyze(args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = read_text(&args.input)?;
    let timestamps = if is_packet_csv(&text) {
        let mut trace = trace::parse_packet_csv(text.as_bytes(), args.sort)?;
        if let Some(pair) = &args.pair {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| CliError::input(format!("--pair expects `a,b`, got {pair:?}")))?;
            trace = trace::filter_pair(&trace, a.trim(), b.trim(), !args.unidirectional)?;
        }
        trace.timestamps()
    } else {
        if args.pair.is_some() {
            return Err(CliError::input("--pair needs a packet CSV input"));
        }
        trace::parse_interarrival_file(text.as_bytes())?.timestamps()
    };
    if timestamps.len() < 2 {
        return Err(TraceError::TooFewPackets(timestamps.len()).into());
    }
    let delta = match args.target_mean {
        Some(k) if k > 0.0 && k.is_finite() => {
            let span = timestamps[timestamps.len() - 1] - timestamps[0];
            k * span / (timestamps.len() - 1) as f64
        }
        Some(k) => return Err(CliError::input(format!("--target-mean must be positive, got {k}"))),
        None => args.delta,
    };
    let counts = trace::to_counts(&timestamps, delta)?;
    let analysis = hurst::analyze(&counts, args.m_min, args.m_max)?;

    if let Some(path) = &args.output {
        with_output(Some(path), stdout, |w| stats::write_variance_time_csv(w, &analysis.curve))?;
    }
    let class = match hurst::classify(&analysis.estimate, args.tolerance) {
        hurst::DependenceClass::LongRange => "long_range",
        hurst::DependenceClass::ShortRangeOrIndependent => "short_range_or_independent",
    };
    with_output(args.report.as_deref(), stdout, |w| {
        hurst::write_report(w, &analysis)?;
        writeln!(w, "class={class}")
    })
}

fn train_sources(args: &GenArgs) -> Result<Vec<(TrainSourceParams, usize, Seed)>, CliError> {
    let params: Vec<TrainSourceParams> = match &args.params {
        Some(list) => list
            .split(',')
            .map(|item| {
                let parts: Vec<f64> = parse_list(&item.replace(':', ","), "train parameter")?;
                match parts.as_slice() {
                    [it, cars, ic] => Ok(TrainSourceParams::new(*it, *cars, *ic)?),
                    _ => Err(CliError::input(format!("train parameters {item:?} need intertrain:cars:intercar"))),
                }
            })
            .collect::<Result<_, _>>()?,
        None => {
            if args.pairs == 0 {
                return Err(CliError::input("--pairs must be at least 1"));
            }
            vec![TrainSourceParams::new(args.intertrain, args.cars, args.intercar)?; args.pairs]
        }
    };
    let seeds: Vec<Seed> = match &args.seeds {
        Some(list) => parse_list::<u64>(list, "seed")?.into_iter().map(Seed).collect(),
        None => (0..params.len() as u64).map(|i| Seed(args.seed).offset(i)).collect(),
    };
    if seeds.len() != params.len() {
        return Err(CliError::input(format!("{} seeds for {} sources", seeds.len(), params.len())));
    }
    let counts = synth::split_evenly(args.n, params.len());
    Ok(params
        .into_iter()
        .zip(counts)
        .zip(seeds)
        .map(|((p, n), s)| (p, n, s))
        .collect())
}

pub fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(args.time_unit > 0.0 && args.time_unit.is_finite()) {
        return Err(CliError::input(format!("--time-unit must be positive, got {}", args.time_unit)));
    }
    let seed = Seed(args.seed);
    // (timestamp in generator units, stream index)
    let tagged: Vec<(f64, usize)> = match args.kind {
        GenKind::Poisson => tag(synth::gen_poisson(args.rate, args.n, seed)?),
        GenKind::Uniform => tag(synth::gen_uniform(args.low, args.high, args.n, seed)?),
        GenKind::Train => {
            let p = TrainSourceParams::new(args.intertrain, args.cars, args.intercar)?;
            tag(synth::gen_train(&p, args.n, seed)?)
        }
        GenKind::Trains => {
            let sources = train_sources(args)?;
            let streams = synth::gen_train_streams(&sources)?;
            synth::superpose_indexed(&streams)?
        }
    };
    let scaled: Vec<(f64, usize)> = tagged.into_iter().map(|(t, i)| (t * args.time_unit, i)).collect();
    match args.format {
        TraceFormat::Interarrival => {
            let ts: Vec<f64> = scaled.iter().map(|(t, _)| *t).collect();
            let series = trace::timestamps_to_interarrivals(&ts)?;
            with_output(args.output.as_deref(), stdout, |w| trace::write_interarrival_file(w, &series))
        }
        TraceFormat::Csv => {
            let records: Vec<PacketRecord> = scaled
                .into_iter()
                .map(|(t, i)| PacketRecord {
                    timestamp: t,
                    src: format!("src_{i}"),
                    dst: format!("dst_{i}"),
                    length: 0,
                })
                .collect();
            with_output(args.output.as_deref(), stdout, |w| trace::write_packet_csv(w, &records))
        }
    }
}

fn tag(ts: Vec<f64>) -> Vec<(f64, usize)> {
    ts.into_iter().map(|t| (t, 0)).collect()
}

pub fn cmd_shuffle(args: &ShuffleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let block = |name: &str| {
        args.m
            .ok_or_else(|| CliError::input(format!("{name} shuffle needs -m <block size>")))
    };
    let kind = match args.kind {
        ShuffleKindArg::Full => ShuffleKind::Full,
        ShuffleKindArg::External => ShuffleKind::External { m: block("external")? },
        ShuffleKindArg::Internal => ShuffleKind::Internal { m: block("internal")? },
        ShuffleKindArg::Markov1 => ShuffleKind::Markov1 { quantile_bins: args.bins },
    };
    let series = read_interarrivals(&args.input)?;
    let out = ShuffleSpec { kind, seed: Seed(args.seed) }.apply(&series)?;
    with_output(args.output.as_deref(), stdout, |w| trace::write_interarrival_file(w, &out))
}

pub fn cmd_queue(args: &QueueArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let grid = match &args.grid {
        Some(g) => parse_list::<f64>(g, "utilization")?,
        None => queue::rho_grid(args.rho_min, args.rho_max, args.rho_step),
    };
    let series = read_interarrivals(&args.input)?;
    let curve = match args.approx {
        Some(Approx::Kingman) => queue::sweep_kingman(&series, &grid, &args.label)?,
        None => queue::sweep(&series, &grid, args.warmup, &args.label)?,
    };
    let knee = queue::knee(&curve, args.threshold)?;
    let knee_text = knee.utilization().map_or_else(|| "none".to_string(), sig6);

    match &args.output {
        Some(path) => {
            let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            if fresh {
                writeln!(w, "{}", queue::SWEEP_CSV_HEADER)?;
            }
            queue::write_sweep_rows(&mut w, &curve)?;
            w.flush()?;
            writeln!(stdout, "label={}", args.label)?;
            writeln!(stdout, "knee={knee_text}")?;
        }
        None => {
            writeln!(stdout, "{}", queue::SWEEP_CSV_HEADER)?;
            queue::write_sweep_rows(stdout, &curve)?;
            writeln!(stderr, "knee={knee_text}")?;
        }
    }
    Ok(())
}

/// Reads an interarrival or packet CSV file as an interarrival series.
pub fn load_interarrivals(path: &Path) -> Result<InterarrivalSeries, CliError> {
    read_interarrivals(path)
}
