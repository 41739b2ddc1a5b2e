//! Command-line front end: chain/encoding parameters from flags or a
//! `key=value` config file, figure-style sweeps to CSV, protocol and
//! verification reports to JSON.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical-invariant
//! failure (a verification check out of tolerance).

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use magnon::chain::{propagator, ChainParams};
use magnon::encoding::{BlochState, EncodingName, LogicalEncoding};
use magnon::error::Error as LibError;
use magnon::fidelity::{FidelityTrace, Peak, DEFAULT_PEAK_PROMINENCE};
use magnon::protocol::{dual_chain_protocol, memory_protocol};
use magnon::sweep::{
    average_fidelity_series, avg_fidelity_vs_length, fidelity_site_traces, max_fidelity_surface,
    max_fidelity_vs_length, transfer_trace, AxisValues, SweepResult, SweepSpec, TimeGrid,
};
use magnon::verify::run_equivalence_suite;

use config::{effective, effective_opt, Config};
use output::{float, int, text, write_csv, write_json, Cell};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

fn lib_err(e: LibError) -> CliError {
    match e {
        LibError::NotNormalized(_) | LibError::ZeroNorm | LibError::SectorOverflow { .. } => {
            CliError::Numerical(e.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "magnon",
    version,
    about = "Quantum-state transfer through an unmodulated XY spin chain",
    after_help = "Flags override config-file values; config files are plain key=value lines."
)]
struct Cli {
    /// Plain-text key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the one-magnon propagator matrix at a fixed time
    Propagator(PropagatorArgs),
    /// Fidelity trace of one encoded transfer
    Trace(TraceArgs),
    /// Maximum fidelity vs chain length per encoding
    Fig1(Fig1Args),
    /// Maximum fidelity over chain length and Bloch angle
    Fig2(Fig2Args),
    /// Per-site fidelity traces of the singlet state on one chain
    Fig3(Fig3Args),
    /// Optimized Bloch-averaged fidelity vs chain length
    Fig4(Fig4Args),
    /// Bloch-averaged fidelity trace for one chain
    AvgFidelity(AvgFidelityArgs),
    /// Swap-to-memory reliability protocol
    ProtocolMemory(ProtocolMemoryArgs),
    /// Dual-chain confirmation protocol
    ProtocolDual(ProtocolDualArgs),
    /// Cross-check the analytic paths against dense exact evolution
    VerifyOracle(VerifyOracleArgs),
}

#[derive(Args)]
struct PropagatorArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Output CSV path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    n: Option<usize>,
    /// two-qubit | three-qubit-1 | three-qubit-2 | four-qubit | vacuum-singlet
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Receiving-block end site (chain end if omitted)
    #[arg(long)]
    site: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Peak list JSON path
    #[arg(long)]
    peaks_out: Option<PathBuf>,
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Comma-separated encoding names
    #[arg(long)]
    encodings: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Argmax summary JSON path
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct Fig2Args {
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Angle grid resolution: theta = k pi / steps, k = 0..=steps
    #[arg(long)]
    theta_steps: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct Fig3Args {
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated block-end sites (a default spread if omitted)
    #[arg(long)]
    sites: Option<String>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    peaks_out: Option<PathBuf>,
}

#[derive(Args)]
struct Fig4Args {
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    n_step: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    h_max: Option<f64>,
    #[arg(long)]
    dh: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct AvgFidelityArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Fixed field value (ignored with --optimize-h)
    #[arg(long)]
    h: Option<f64>,
    /// Maximize over the field grid at each time
    #[arg(long)]
    optimize_h: bool,
    #[arg(long)]
    h_max: Option<f64>,
    #[arg(long)]
    dh: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolMemoryArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Comma-separated swap times (first two transit peaks if omitted)
    #[arg(long)]
    swaps: Option<String>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolDualArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Wait time before decode (the first transit peak if omitted)
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyOracleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Ok(raw) = std::env::var("MAGNON_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let config = match &cli.config {
        None => Config::default(),
        Some(path) => match Config::load(path) {
            Ok(c) => c,
            Err(CliError::Validation(msg)) => {
                eprintln!("error: {msg}");
                return 1;
            }
            Err(CliError::Numerical(msg)) => {
                eprintln!("error: {msg}");
                return 2;
            }
        },
    };
    match dispatch(cli.command, &config) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command, config: &Config) -> Result<(), CliError> {
    match command {
        Command::Propagator(a) => cmd_propagator(a, config),
        Command::Trace(a) => cmd_trace(a, config),
        Command::Fig1(a) => cmd_fig1(a, config),
        Command::Fig2(a) => cmd_fig2(a, config),
        Command::Fig3(a) => cmd_fig3(a, config),
        Command::Fig4(a) => cmd_fig4(a, config),
        Command::AvgFidelity(a) => cmd_avg_fidelity(a, config),
        Command::ProtocolMemory(a) => cmd_protocol_memory(a, config),
        Command::ProtocolDual(a) => cmd_protocol_dual(a, config),
        Command::VerifyOracle(a) => cmd_verify_oracle(a, config),
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Validation(format!("{what} is required (flag or config)")))
}

fn out_path(cli: Option<PathBuf>, config: &Config, key: &str) -> Option<PathBuf> {
    cli.or_else(|| config.get_raw(key).map(PathBuf::from))
}

fn parse_encoding(name: &str) -> Result<LogicalEncoding, CliError> {
    let kind: EncodingName = name.parse().map_err(lib_err)?;
    Ok(LogicalEncoding::new(kind))
}

fn parse_comma_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| CliError::Validation(format!("bad {what} entry '{s}': {e}")))
        })
        .collect()
}

fn time_grid(
    t_max: Option<f64>,
    dt: Option<f64>,
    config: &Config,
) -> Result<TimeGrid, CliError> {
    let t_max = effective(t_max, config, "t_max", 100.0)?;
    let dt = effective(dt, config, "dt", 0.05)?;
    TimeGrid::span(t_max, dt).map_err(lib_err)
}

fn chain(
    n: usize,
    j: Option<f64>,
    h: Option<f64>,
    config: &Config,
) -> Result<ChainParams, CliError> {
    let j = effective(j, config, "j", 1.0)?;
    let h = effective(h, config, "h", 1.0)?;
    ChainParams::new(n, j, 0.0, h).map_err(lib_err)
}

/// The dominant transit peaks of a trace: the global maximum, then the best
/// peak of each later round trip (reflection ripples excluded).
fn transit_peaks(trace: &FidelityTrace, count: usize) -> Vec<Peak> {
    let mut out: Vec<Peak> = Vec::new();
    while out.len() < count {
        let next = trace
            .peaks
            .iter()
            .filter(|p| out.iter().all(|q| (p.time - q.time).abs() > 10.0))
            .max_by(|a, b| a.value.total_cmp(&b.value));
        match next {
            Some(&p) if p.value > 1e-6 => out.push(p),
            _ => break,
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out
}

fn singlet_transit_peaks(params: &ChainParams, count: usize) -> Result<Vec<Peak>, CliError> {
    let span = 100.0f64.max(2.5 * params.n_sites as f64);
    let grid = TimeGrid::span(span, 0.05).map_err(lib_err)?;
    let enc = LogicalEncoding::new(EncodingName::VacuumSinglet);
    let trace = transfer_trace(
        params,
        &enc,
        &BlochState::one(),
        params.n_sites,
        &grid,
        DEFAULT_PEAK_PROMINENCE,
    )
    .map_err(lib_err)?;
    Ok(transit_peaks(&trace, count))
}

fn sweep_rows<'a>(result: &'a SweepResult) -> impl Iterator<Item = Vec<Cell>> + 'a {
    let shape = result.shape();
    let total: usize = shape.iter().product();
    (0..total).map(move |flat| {
        let mut idx = Vec::with_capacity(shape.len());
        let mut rest = flat;
        for &dim in shape.iter().rev() {
            idx.push(rest % dim);
            rest /= dim;
        }
        idx.reverse();
        let mut row: Vec<Cell> = Vec::new();
        for (axis, &i) in result.axes.iter().zip(&idx) {
            match &axis.values {
                AxisValues::Numbers(v) => {
                    if axis.name == "n" {
                        row.push(int(v[i] as usize));
                    } else {
                        row.push(float(v[i]));
                    }
                }
                AxisValues::Labels(v) => row.push(text(v[i].clone())),
            }
        }
        let record = &result.records[flat];
        row.push(float(record.value));
        row.push(float(record.t_star));
        if let Some(h) = record.h_star {
            row.push(float(h));
        }
        row
    })
}

fn cmd_propagator(a: PropagatorArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&["n", "t", "j", "h", "out"])?;
    let n = require(effective_opt(a.n, config, "n")?, "--n")?;
    let t = require(effective_opt(a.t, config, "t")?, "--t")?;
    let params = chain(n, a.j, a.h, config)?;
    let prop = propagator(&params, t);
    let out = out_path(a.out, config, "out");
    let rows = (1..=n).flat_map(|j| (1..=n).map(move |l| (j, l))).map(|(j, l)| {
        let f = prop.entry(j, l);
        vec![int(j), int(l), float(f.re), float(f.im)]
    });
    write_csv(out.as_ref(), &["j", "l", "re", "im"], rows)
}

fn cmd_trace(a: TraceArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n",
        "encoding",
        "theta",
        "phi",
        "site",
        "t_max",
        "dt",
        "j",
        "h",
        "prominence",
        "out",
        "peaks_out",
    ])?;
    let n = require(effective_opt(a.n, config, "n")?, "--n")?;
    let encoding_name = effective(a.encoding, config, "encoding", "vacuum-singlet".to_string())?;
    let encoding = parse_encoding(&encoding_name)?;
    let theta = effective(a.theta, config, "theta", std::f64::consts::PI)?;
    let phi = effective(a.phi, config, "phi", 0.0)?;
    let bloch = BlochState::new(theta, phi).map_err(lib_err)?;
    let site = effective(a.site, config, "site", n)?;
    let grid = time_grid(a.t_max, a.dt, config)?;
    let prominence = effective(a.prominence, config, "prominence", DEFAULT_PEAK_PROMINENCE)?;
    let params = chain(n, a.j, a.h, config)?;
    let trace =
        transfer_trace(&params, &encoding, &bloch, site, &grid, prominence).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(
        out.as_ref(),
        &["t", "F"],
        trace
            .times
            .iter()
            .zip(&trace.values)
            .map(|(&t, &f)| vec![float(t), float(f)]),
    )?;
    if let Some(path) = out_path(a.peaks_out, config, "peaks_out") {
        let peaks: Vec<_> = trace
            .peaks
            .iter()
            .enumerate()
            .map(|(k, p)| json!({"k": k + 1, "t_k": p.time, "F_k": p.value}))
            .collect();
        write_json(Some(&path), &json!({"site": site, "peaks": peaks}))?;
    }
    Ok(())
}

fn cmd_fig1(a: Fig1Args, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n_min", "n_max", "encodings", "theta", "phi", "t_max", "dt", "j", "h", "out", "summary",
    ])?;
    let n_max = effective(a.n_max, config, "n_max", 50)?;
    let n_min = effective(a.n_min, config, "n_min", 4.min(n_max))?;
    if n_min > n_max {
        return Err(CliError::Validation("n_min exceeds n_max".into()));
    }
    let names = effective(
        a.encodings,
        config,
        "encodings",
        "two-qubit,three-qubit-1,three-qubit-2,four-qubit".to_string(),
    )?;
    let encodings = names
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_encoding)
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = SweepSpec::length_sweep(encodings, (n_min..=n_max).collect());
    spec.theta_grid = vec![effective(a.theta, config, "theta", std::f64::consts::FRAC_PI_2)?];
    spec.phi = effective(a.phi, config, "phi", 0.0)?;
    spec.time_grid = time_grid(a.t_max, a.dt, config)?;
    spec.j_xy = effective(a.j, config, "j", 1.0)?;
    spec.h_field = effective(a.h, config, "h", 1.0)?;
    let result = max_fidelity_vs_length(&spec).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(out.as_ref(), &["encoding", "n", "f_max", "t_star"], sweep_rows(&result))?;
    if let Some(path) = out_path(a.summary, config, "summary") {
        let mut entries = Vec::new();
        for (e, enc) in spec.encodings.iter().enumerate() {
            for (i, &n) in spec.chain_lengths.iter().enumerate() {
                let r = result.record(&[e, i]);
                entries.push(json!({
                    "encoding": enc.name().to_string(),
                    "n": n,
                    "f_max": r.value,
                    "t_star": r.t_star,
                }));
            }
        }
        write_json(Some(&path), &json!(entries))?;
    }
    Ok(())
}

fn cmd_fig2(a: Fig2Args, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n_min", "n_max", "theta_steps", "t_max", "dt", "j", "h", "out", "summary",
    ])?;
    let n_max = effective(a.n_max, config, "n_max", 50)?;
    let n_min = effective(a.n_min, config, "n_min", 6.min(n_max))?;
    if n_min > n_max {
        return Err(CliError::Validation("n_min exceeds n_max".into()));
    }
    let steps = effective(a.theta_steps, config, "theta_steps", 60)?;
    if steps == 0 {
        return Err(CliError::Validation("theta_steps must be positive".into()));
    }
    let mut spec = SweepSpec::surface_sweep((n_min..=n_max).collect());
    spec.theta_grid = (0..=steps).map(|k| k as f64 * std::f64::consts::PI / steps as f64).collect();
    spec.time_grid = time_grid(a.t_max, a.dt, config)?;
    spec.j_xy = effective(a.j, config, "j", 1.0)?;
    spec.h_field = effective(a.h, config, "h", 1.0)?;
    let result = max_fidelity_surface(&spec).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(out.as_ref(), &["n", "theta", "f_max", "t_star"], sweep_rows(&result))?;
    if let Some(path) = out_path(a.summary, config, "summary") {
        let mut entries = Vec::new();
        for (i, &n) in spec.chain_lengths.iter().enumerate() {
            let mut best = 0usize;
            for k in 0..spec.theta_grid.len() {
                if result.record(&[i, k]).value > result.record(&[i, best]).value {
                    best = k;
                }
            }
            let r = result.record(&[i, best]);
            entries.push(json!({
                "n": n,
                "theta_star": spec.theta_grid[best],
                "f_max": r.value,
                "t_star": r.t_star,
            }));
        }
        write_json(Some(&path), &json!(entries))?;
    }
    Ok(())
}

fn default_trace_sites(n: usize) -> Vec<usize> {
    let mut sites: Vec<usize> = [3, n / 4, n / 2, 3 * n / 4, n]
        .into_iter()
        .filter(|&s| (3..=n).contains(&s))
        .collect();
    sites.sort_unstable();
    sites.dedup();
    sites
}

fn cmd_fig3(a: Fig3Args, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n", "sites", "t_max", "dt", "j", "h", "prominence", "out", "peaks_out",
    ])?;
    let n = effective(a.n, config, "n", 48)?;
    let sites = match effective_opt::<String>(a.sites, config, "sites")? {
        Some(raw) => parse_comma_list::<usize>(&raw, "site")?,
        None => default_trace_sites(n),
    };
    let mut spec = SweepSpec::trace_sweep(n, sites);
    spec.time_grid = time_grid(a.t_max, a.dt, config)?;
    spec.j_xy = effective(a.j, config, "j", 1.0)?;
    spec.h_field = effective(a.h, config, "h", 1.0)?;
    spec.peak_prominence = effective(a.prominence, config, "prominence", DEFAULT_PEAK_PROMINENCE)?;
    let traces = fidelity_site_traces(&spec).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(
        out.as_ref(),
        &["site", "t", "F"],
        traces.iter().flat_map(|(site, trace)| {
            trace
                .times
                .iter()
                .zip(&trace.values)
                .map(move |(&t, &f)| vec![int(*site), float(t), float(f)])
        }),
    )?;
    if let Some(path) = out_path(a.peaks_out, config, "peaks_out") {
        let entries: Vec<_> = traces
            .iter()
            .map(|(site, trace)| {
                let peaks: Vec<_> = trace
                    .peaks
                    .iter()
                    .enumerate()
                    .map(|(k, p)| json!({"k": k + 1, "t_k": p.time, "F_k": p.value}))
                    .collect();
                json!({"site": site, "peaks": peaks})
            })
            .collect();
        write_json(Some(&path), &json!(entries))?;
    }
    Ok(())
}

fn cmd_fig4(a: Fig4Args, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n_min", "n_max", "n_step", "t_max", "dt", "h_max", "dh", "j", "out", "summary",
    ])?;
    let n_max = effective(a.n_max, config, "n_max", 80)?;
    let n_min = effective(a.n_min, config, "n_min", 5.min(n_max))?;
    let n_step = effective(a.n_step, config, "n_step", 5)?;
    if n_min > n_max || n_step == 0 {
        return Err(CliError::Validation("need n_min <= n_max and n_step > 0".into()));
    }
    let h_max = effective(a.h_max, config, "h_max", 2.0)?;
    let dh = effective(a.dh, config, "dh", 0.05)?;
    if dh <= 0.0 || h_max < 0.0 {
        return Err(CliError::Validation("need h_max >= 0 and dh > 0".into()));
    }
    let lengths: Vec<usize> = (n_min..=n_max).step_by(n_step).collect();
    let mut spec = SweepSpec::average_sweep(lengths);
    spec.time_grid = time_grid(a.t_max, a.dt, config)?;
    let field_count = (h_max / dh).round() as usize;
    spec.field_grid = (0..=field_count).map(|i| i as f64 * dh).collect();
    spec.j_xy = effective(a.j, config, "j", 1.0)?;
    let result = avg_fidelity_vs_length(&spec).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(
        out.as_ref(),
        &["scheme", "n", "f_av", "t_star", "h_star"],
        sweep_rows(&result),
    )?;
    if let Some(path) = out_path(a.summary, config, "summary") {
        let mut entries = Vec::new();
        for (s, scheme) in ["single-spin", "vacuum-singlet"].iter().enumerate() {
            for (i, &n) in spec.chain_lengths.iter().enumerate() {
                let r = result.record(&[s, i]);
                entries.push(json!({
                    "scheme": scheme,
                    "n": n,
                    "f_av": r.value,
                    "t_star": r.t_star,
                    "h_star": r.h_star,
                }));
            }
        }
        write_json(Some(&path), &json!(entries))?;
    }
    Ok(())
}

fn cmd_avg_fidelity(a: AvgFidelityArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&[
        "n", "t_max", "dt", "h", "optimize_h", "h_max", "dh", "j", "out", "summary",
    ])?;
    let n = require(effective_opt(a.n, config, "n")?, "--n")?;
    let grid = time_grid(a.t_max, a.dt, config)?;
    let optimize = a.optimize_h || config.get_parsed::<bool>("optimize_h")?.unwrap_or(false);
    let params = chain(n, a.j, a.h, config)?;
    let field_grid = if optimize {
        let h_max = effective(a.h_max, config, "h_max", 2.0)?;
        let dh = effective(a.dh, config, "dh", 0.05)?;
        if dh <= 0.0 || h_max < 0.0 {
            return Err(CliError::Validation("need h_max >= 0 and dh > 0".into()));
        }
        let count = (h_max / dh).round() as usize;
        Some((0..=count).map(|i| i as f64 * dh).collect::<Vec<f64>>())
    } else {
        None
    };
    let series = average_fidelity_series(&params, &grid, field_grid.as_deref()).map_err(lib_err)?;

    let out = out_path(a.out, config, "out");
    write_csv(
        out.as_ref(),
        &["t", "f_av", "h"],
        series
            .iter()
            .enumerate()
            .map(|(i, &(f, h))| vec![float(grid.at(i)), float(f), float(h)]),
    )?;
    if let Some(path) = out_path(a.summary, config, "summary") {
        let mut best = 0usize;
        for (i, pair) in series.iter().enumerate() {
            if pair.0 > series[best].0 {
                best = i;
            }
        }
        write_json(
            Some(&path),
            &json!({
                "n": n,
                "f_av_max": series[best].0,
                "t_star": grid.at(best),
                "h_star": series[best].1,
                "optimized_over_field": optimize,
            }),
        )?;
    }
    Ok(())
}

fn cmd_protocol_memory(a: ProtocolMemoryArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&["n", "theta", "phi", "swaps", "j", "h", "out"])?;
    let n = effective(a.n, config, "n", 48)?;
    let theta = effective(a.theta, config, "theta", std::f64::consts::PI)?;
    let phi = effective(a.phi, config, "phi", 0.0)?;
    let bloch = BlochState::new(theta, phi).map_err(lib_err)?;
    let params = chain(n, a.j, a.h, config)?;
    let swaps = match effective_opt::<String>(a.swaps, config, "swaps")? {
        Some(raw) => parse_comma_list::<f64>(&raw, "swap time")?,
        None => {
            let peaks = singlet_transit_peaks(&params, 2)?;
            if peaks.is_empty() {
                return Err(CliError::Validation(
                    "no transit peaks found; pass --swaps explicitly".into(),
                ));
            }
            peaks.iter().map(|p| p.time).collect()
        }
    };
    let enc = LogicalEncoding::new(EncodingName::VacuumSinglet);
    let result = memory_protocol(&params, &enc, &bloch, &swaps).map_err(lib_err)?;
    let report = json!({
        "n": n,
        "theta": theta,
        "phi": phi,
        "swap_times": result.swap_times,
        "etas": result.success_probabilities,
        "cumulative_failure": result.cumulative_failure,
        "cumulative_success": result.cumulative_success(),
    });
    write_json(out_path(a.out, config, "out").as_ref(), &report)
}

fn cmd_protocol_dual(a: ProtocolDualArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&["n", "theta", "phi", "t", "j", "h", "out"])?;
    let n = effective(a.n, config, "n", 48)?;
    let theta = effective(a.theta, config, "theta", std::f64::consts::FRAC_PI_2)?;
    let phi = effective(a.phi, config, "phi", 0.0)?;
    let bloch = BlochState::new(theta, phi).map_err(lib_err)?;
    let params = chain(n, a.j, a.h, config)?;
    let t_wait = match effective_opt(a.t, config, "t")? {
        Some(t) => t,
        None => {
            let peaks = singlet_transit_peaks(&params, 1)?;
            peaks
                .first()
                .ok_or_else(|| {
                    CliError::Validation("no transit peak found; pass --t explicitly".into())
                })?
                .time
        }
    };
    let outcome = dual_chain_protocol(&params, &bloch, t_wait).map_err(lib_err)?;
    let report = json!({
        "n": n,
        "theta": theta,
        "phi": phi,
        "t_wait": t_wait,
        "p_confirm": outcome.confirm_probability,
        "f_conditioned": outcome.conditioned_fidelity,
        "f_unconditioned": outcome.unconditioned_fidelity,
        "outcome_probabilities": outcome.outcome_probabilities.to_vec(),
        "leakage_weight": outcome.leakage_weight,
    });
    write_json(out_path(a.out, config, "out").as_ref(), &report)
}

fn cmd_verify_oracle(a: VerifyOracleArgs, config: &Config) -> Result<(), CliError> {
    config.restrict_to(&["n", "trials", "seed", "out"])?;
    let n = effective(a.n, config, "n", 8)?;
    let trials = effective(a.trials, config, "trials", 50)?;
    let seed = effective(a.seed, config, "seed", 7)?;
    let report = run_equivalence_suite(n, trials, seed).map_err(lib_err)?;
    for check in &report.checks {
        println!(
            "[{}] {}: max deviation {:.3e} (tolerance {:.0e})",
            if check.passed() { "PASS" } else { "FAIL" },
            check.name,
            check.max_deviation,
            check.tolerance
        );
    }
    if let Some(path) = out_path(a.out, config, "out") {
        let checks: Vec<_> = report
            .checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "max_deviation": c.max_deviation,
                    "tolerance": c.tolerance,
                    "passed": c.passed(),
                })
            })
            .collect();
        write_json(
            Some(&path),
            &json!({
                "n": report.n_sites,
                "trials": report.trials,
                "seed": report.seed,
                "checks": checks,
                "all_passed": report.all_passed(),
            }),
        )?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Numerical("oracle equivalence deviations exceed tolerance".into()))
    }
}
