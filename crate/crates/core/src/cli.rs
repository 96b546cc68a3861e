//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{oscillation_period, Oscillation};
use crate::scenario::{builtin_names, builtin_scenario, parse_scenario, ParseError, Scenario};
use crate::sim::{SimError, SimSummary, Simulator};
use crate::trace::{parse_csv, CsvTraceWriter, TraceParseError, TraceRecord, TraceSink};

#[derive(Debug, Parser)]
#[command(
    name = "rttroute",
    version,
    about = "RTT-metric overlay routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Run(RunArgs),
    /// Oscillation statistics of a trace file.
    Analyze(AnalyzeArgs),
    /// List built-in scenarios.
    List,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Name of a built-in scenario.
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    builtin: Option<String>,
    /// Path to a scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the scenario horizon, seconds. Scripted events at or past
    /// the new horizon are dropped.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the trace sample period, seconds.
    #[arg(long)]
    sample_period: Option<f64>,
    /// Trace destination; stdout when absent. With `--runs` above 1 the seed
    /// is appended to the file name.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of consecutive seeds to run in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Report route oscillation of this node...
    #[arg(long, requires = "dest")]
    node: Option<String>,
    /// ...towards this destination.
    #[arg(long, requires = "node")]
    dest: Option<String>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    node: String,
    #[arg(long)]
    dest: String,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("unknown built-in scenario {0:?} (try `rttroute list`)")]
    UnknownBuiltin(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Trace {
        path: PathBuf,
        source: TraceParseError,
    },
    #[error("trace output: {0}")]
    Output(io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Output(_) => 2,
            _ => 1,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::List => {
            for name in builtin_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(a: &RunArgs) -> Result<Scenario, CliError> {
    let mut sc = if let Some(name) = &a.builtin {
        builtin_scenario(name).ok_or_else(|| CliError::UnknownBuiltin(name.clone()))?
    } else {
        let path = a.scenario.clone().expect("clap enforces one source");
        let text = fs::read_to_string(&path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        parse_scenario(&text).map_err(|source| CliError::Parse { path, source })?
    };
    if let Some(h) = a.horizon {
        // A shortened run simply never reaches the later events.
        sc.config.horizon_s = h;
        sc.events.retain(|e| e.time_s < h);
    }
    if let Some(p) = a.sample_period {
        sc.config.sample_period_s = p;
    }
    sc.validate().map_err(SimError::from)?;
    Ok(sc)
}

fn out_path(base: &Path, seed: u64, runs: u64) -> PathBuf {
    if runs == 1 {
        return base.to_path_buf();
    }
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{seed}"));
    base.with_file_name(name)
}

/// Collects ROUTE rows for the oscillation report while forwarding every
/// record to the writer.
struct Tee<'a, W: Write> {
    csv: CsvTraceWriter<W>,
    routes: Option<(&'a str, &'a str, Vec<TraceRecord>)>,
}

impl<W: Write> TraceSink for Tee<'_, W> {
    fn record(&mut self, record: TraceRecord) {
        if let (
            Some((node, dest, keep)),
            TraceRecord::Route {
                node: n,
                destination,
                ..
            },
        ) = (&mut self.routes, &record)
        {
            if n == node && destination == dest {
                keep.push(record.clone());
            }
        }
        self.csv.record(record);
    }
}

fn run_one<W: Write>(
    sc: &Scenario,
    seed: u64,
    out: W,
    focus: Option<(&str, &str)>,
) -> Result<(SimSummary, Option<Oscillation>), CliError> {
    let sim = Simulator::new(sc, seed)?;
    let mut tee = Tee {
        csv: CsvTraceWriter::new(out),
        routes: focus.map(|(n, d)| (n, d, Vec::new())),
    };
    let summary = sim.run(&mut tee);
    let osc = tee
        .routes
        .as_ref()
        .map(|(n, d, recs)| oscillation_period(recs, n, d));
    tee.csv.finish().map_err(CliError::Output)?;
    Ok((summary, osc))
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let sc = load(&a)?;
    let focus = a.node.as_deref().zip(a.dest.as_deref());
    let seeds: Vec<u64> = (0..a.runs).map(|i| a.seed.wrapping_add(i)).collect();

    let results: Vec<Result<(SimSummary, Option<Oscillation>), CliError>> = match &a.out {
        None if a.runs == 1 => {
            let stdout = io::stdout();
            vec![run_one(&sc, a.seed, BufWriter::new(stdout.lock()), focus)]
        }
        None => std::thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let sc = &sc;
                    s.spawn(move || run_one(sc, seed, io::sink(), focus))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread"))
                .collect()
        }),
        Some(base) => std::thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let path = out_path(base, seed, a.runs);
                    let sc = &sc;
                    s.spawn(move || {
                        let file = fs::File::create(&path).map_err(CliError::Output)?;
                        run_one(sc, seed, BufWriter::new(file), focus)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread"))
                .collect()
        }),
    };

    // Reports go to stderr when the trace itself is on stdout.
    let mut report: Box<dyn Write> = if a.out.is_none() && a.runs == 1 {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    };
    for (seed, r) in seeds.iter().zip(results) {
        let (summary, osc) = r?;
        write_report(&mut report, *seed, &summary, osc.as_ref(), focus)
            .map_err(CliError::Output)?;
    }
    Ok(())
}

fn write_report(
    w: &mut dyn Write,
    seed: u64,
    s: &SimSummary,
    osc: Option<&Oscillation>,
    focus: Option<(&str, &str)>,
) -> io::Result<()> {
    writeln!(
        w,
        "seed {seed}: protocol packets sent {} dropped {}",
        s.protocol_packets_sent, s.protocol_packets_dropped
    )?;
    for (i, f) in s.flows.iter().enumerate() {
        writeln!(
            w,
            "  flow {i}: emitted {} delivered {} dropped {} in flight {}",
            f.emitted,
            f.delivered,
            f.dropped(),
            f.in_flight
        )?;
    }
    if let (Some(o), Some((n, d))) = (osc, focus) {
        write_oscillation(w, n, d, o)?;
    }
    Ok(())
}

fn write_oscillation(w: &mut dyn Write, node: &str, dest: &str, o: &Oscillation) -> io::Result<()> {
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.1} s"));
    writeln!(
        w,
        "  {node} -> {dest}: {} switches, mean period {}, min period {}",
        o.switch_times.len(),
        fmt(o.mean_period_s),
        fmt(o.min_period_s)
    )
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.input).map_err(|source| CliError::Read {
        path: a.input.clone(),
        source,
    })?;
    let records = parse_csv(&text).map_err(|source| CliError::Trace {
        path: a.input.clone(),
        source,
    })?;
    let o = oscillation_period(&records, &a.node, &a.dest);
    let mut out = io::stdout().lock();
    write_oscillation(&mut out, &a.node, &a.dest, &o).map_err(CliError::Output)?;
    for t in &o.switch_times {
        writeln!(out, "  switch at {t:.6}").map_err(CliError::Output)?;
    }
    Ok(())
}
