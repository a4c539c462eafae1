//! `pkgsum`: build and evaluate personalized knowledge graph summaries.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use pkgsum_core::eval::{autoregressive_run_observed, sweep, Budget, EvalMethod, EvalReport, RunSettings, SweepAxis};
use pkgsum_core::io::write_atomic;
use pkgsum_core::{
    export_pkg, generate_workload, load_kg, load_metaqa_queries, DiffusionParams, ExportFormat, KgFormat,
    KnowledgeGraph, LoadReport, Pkg, QueryLog,
};

#[derive(Parser, Debug)]
#[command(name = "pkgsum", version, about = "Adaptive personalized knowledge graph summaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a KG and print its size.
    Ingest {
        #[command(flatten)]
        kg: KgArgs,
    },
    /// Generate one query log per user.
    GenQueries(GenArgs),
    /// Evaluate summarizers on query logs and write a CSV report.
    Run(RunArgs),
    /// Repeat a run across values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Guess from the extension and the first data line.
    Auto,
    Tab3,
    Ntriples,
    Pipe3,
}

#[derive(Args, Debug)]
struct KgArgs {
    /// KG file.
    #[arg(long)]
    kg: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long, default_value_t = 10)]
    users: usize,
    #[arg(long, default_value_t = 20)]
    topics: usize,
    #[arg(long, default_value_t = 10)]
    per_topic: usize,
    /// Sample from MetaQA-style questions instead of random KG lookups.
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Directory receiving `user_NN.tsv` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    All,
    Apex2,
    Apex2n,
    Glimpse,
    Ppr,
}

impl MethodArg {
    fn methods(self) -> Vec<EvalMethod> {
        match self {
            MethodArg::All => EvalMethod::ALL.to_vec(),
            MethodArg::Apex2 => vec![EvalMethod::Apex2],
            MethodArg::Apex2n => vec![EvalMethod::Apex2N],
            MethodArg::Glimpse => vec![EvalMethod::Glimpse],
            MethodArg::Ppr => vec![EvalMethod::Ppr],
        }
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Query-log directory (one file per user, read in name order) or a single log file.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    /// Decay per timestamp.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Diffusion strength.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Diffusion hops.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Budget as a fraction of the KG's triples.
    #[arg(long, default_value_t = 1e-4)]
    kappa: f64,
    /// Budget in triples; overrides --kappa.
    #[arg(long)]
    budget: Option<usize>,
    /// Re-summarization interval of the baselines.
    #[arg(long, default_value_t = 9)]
    r_interval: u64,
    /// Rebuild interval of the incremental summaries.
    #[arg(long, default_value_t = 1)]
    r_apex: u64,
    /// PageRank restart probability.
    #[arg(long, default_value_t = 0.85)]
    restart: f64,
    /// GLIMPSE sampling tolerance.
    #[arg(long, default_value_t = 1e-3)]
    glimpse_epsilon: f64,
    /// Heat at or below this value is dropped.
    #[arg(long, default_value_t = 1e-9)]
    eps_ths: f64,
    #[arg(long)]
    seed: u64,
    /// Evaluate users one at a time (steadier timings).
    #[arg(long)]
    serial: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl EvalArgs {
    fn settings(&self) -> RunSettings {
        RunSettings {
            budget: match self.budget {
                Some(k) => Budget::Fixed(k),
                None => Budget::Ratio(self.kappa),
            },
            params: DiffusionParams { alpha: self.alpha, d: self.d, gamma: self.gamma, eps_ths: self.eps_ths },
            r_apex: self.r_apex,
            r_interval: self.r_interval,
            glimpse_epsilon: self.glimpse_epsilon,
            restart: self.restart,
            seed: self.seed,
            parallel: !self.serial,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Write each summary as DOT into this directory.
    #[arg(long)]
    dot_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// gamma, kappa, alpha, d or r-apex.
    #[arg(long)]
    axis: String,
    /// Comma-separated values, or `start..end:step` (end inclusive).
    #[arg(long)]
    values: String,
}

fn detect_format(path: &Path) -> Result<KgFormat> {
    if path.extension().is_some_and(|e| e == "nt") {
        return Ok(KgFormat::NTriples);
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = None;
    for line in io::BufRead::lines(BufReader::new(file)) {
        let line = line?;
        if !line.trim().is_empty() && !line.starts_with('#') {
            first = Some(line);
            break;
        }
    }
    Ok(match first.as_deref() {
        Some(l) if l.contains('\t') => KgFormat::Tab3,
        Some(l) if l.contains('|') => KgFormat::Pipe3,
        Some(l) if l.trim_start().starts_with('<') => KgFormat::NTriples,
        _ => KgFormat::Tab3,
    })
}

fn load(args: &KgArgs) -> Result<(KnowledgeGraph, LoadReport)> {
    let format = match args.format {
        FormatArg::Auto => detect_format(&args.kg)?,
        FormatArg::Tab3 => KgFormat::Tab3,
        FormatArg::Ntriples => KgFormat::NTriples,
        FormatArg::Pipe3 => KgFormat::Pipe3,
    };
    let file = File::open(&args.kg).with_context(|| format!("opening {}", args.kg.display()))?;
    load_kg(BufReader::new(file), format).with_context(|| format!("loading {}", args.kg.display()))
}

fn open_kg(args: &KgArgs) -> Result<KnowledgeGraph> {
    let (kg, report) = load(args)?;
    info!(
        "{}: {} entities, {} relations, {} triples ({} lines skipped, {} duplicates)",
        args.kg.display(),
        kg.entity_count(),
        kg.relation_count(),
        kg.triple_count(),
        report.skipped_lines,
        report.duplicate_triples
    );
    Ok(kg)
}

fn cmd_ingest(args: &KgArgs) -> Result<()> {
    let (kg, report) = load(args)?;
    let mut out = io::stdout().lock();
    writeln!(out, "entities\t{}", kg.entity_count())?;
    writeln!(out, "relations\t{}", kg.relation_count())?;
    writeln!(out, "triples\t{}", kg.triple_count())?;
    writeln!(out, "skipped\t{}", report.skipped_lines)?;
    writeln!(out, "duplicates\t{}", report.duplicate_triples)?;
    Ok(())
}

fn cmd_gen_queries(args: &GenArgs) -> Result<()> {
    let kg = open_kg(&args.kg)?;
    let logs = match &args.questions {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let pool = load_metaqa_queries(BufReader::new(file), &kg)?;
            info!(
                "{} questions over {} topics ({} unparsable, {} dropped)",
                pool.question_count(),
                pool.topics.len(),
                pool.unparsable,
                pool.dropped
            );
            pool.sample_workload(args.users, args.topics, args.per_topic, args.seed)?
        }
        None => generate_workload(&kg, args.users, args.topics, args.per_topic, args.seed)?,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let width = logs.len().saturating_sub(1).to_string().len().max(2);
    for (user, log) in logs.iter().enumerate() {
        let path = args.out.join(format!("user_{user:0width$}.tsv"));
        write_atomic(&path, |w| log.write(&kg, w)).with_context(|| format!("writing {}", path.display()))?;
    }
    info!("wrote {} logs to {}", logs.len(), args.out.display());
    Ok(())
}

fn read_logs(kg: &KnowledgeGraph, path: &Path) -> Result<Vec<QueryLog>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        files.retain(|p| p.is_file() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')));
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no query logs in {}", path.display());
    }
    files
        .iter()
        .map(|f| {
            let file = File::open(f).with_context(|| format!("opening {}", f.display()))?;
            QueryLog::read(kg, BufReader::new(file)).with_context(|| format!("reading {}", f.display()))
        })
        .collect()
}

fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_atomic(path, |w| report.write_csv(w)).with_context(|| format!("writing {}", path.display()))
}

fn write_dot(dir: &Path, kg: &KnowledgeGraph, method: EvalMethod, user: usize, t: u64, pkg: &Pkg) -> io::Result<()> {
    let path = dir.join(format!("{}_u{user:02}_t{t:04}.dot", method.to_string().to_lowercase()));
    write_atomic(&path, |w| export_pkg(pkg, kg, ExportFormat::Dot, w))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let kg = open_kg(&args.eval.kg)?;
    let logs = read_logs(&kg, &args.eval.queries)?;
    let settings = args.eval.settings();
    fs::create_dir_all(&args.eval.out).with_context(|| format!("creating {}", args.eval.out.display()))?;
    if let Some(dir) = &args.dot_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut reports = Vec::new();
    for method in args.eval.method.methods() {
        info!("running {method} on {} users", logs.len());
        let report = match &args.dot_dir {
            Some(dir) => {
                let observe = |user: usize, t: u64, pkg: &Pkg| -> pkgsum_core::Result<()> {
                    Ok(write_dot(dir, &kg, method, user, t, pkg)?)
                };
                autoregressive_run_observed(&kg, &logs, method, &settings, Some(&observe))?
            }
            None => autoregressive_run_observed(&kg, &logs, method, &settings, None)?,
        };
        reports.push(report);
    }
    let report = EvalReport::merge(reports);
    write_report(&report, &args.eval.out.join("report.csv"))?;
    report.write_table(&mut io::stdout().lock())?;
    Ok(())
}

/// Parses `0.1,0.5,1` or `0.1..1.0:0.1` (inclusive end).
fn parse_values(spec: &str) -> Result<Vec<f64>> {
    if let Some((range, step)) = spec.split_once(':') {
        let (lo, hi) = range.split_once("..").context("range must look like start..end:step")?;
        let (lo, hi, step): (f64, f64, f64) = (lo.trim().parse()?, hi.trim().parse()?, step.trim().parse()?);
        if step.is_nan() || step <= 0.0 || hi < lo {
            bail!("bad range {spec:?}");
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        // Round away the accumulated float error of lo + i * step.
        return Ok((0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect());
    }
    spec.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?}"))).collect()
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let axis: SweepAxis = args.axis.parse()?;
    let values = parse_values(&args.values)?;
    let kg = open_kg(&args.eval.kg)?;
    let logs = read_logs(&kg, &args.eval.queries)?;
    fs::create_dir_all(&args.eval.out).with_context(|| format!("creating {}", args.eval.out.display()))?;
    let results = sweep(&kg, &logs, &args.eval.method.methods(), axis, &values, &args.eval.settings())?;
    let mut out = io::stdout().lock();
    for (value, report) in &results {
        write_report(report, &args.eval.out.join(format!("report_{axis}_{value}.csv")))?;
        writeln!(out, "{axis} = {value}")?;
        report.write_table(&mut out)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { kg } => cmd_ingest(&kg),
        Command::GenQueries(args) => cmd_gen_queries(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PKGSUM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
