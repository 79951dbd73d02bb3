//! Command-line front end: `kernel`, `simulate`, `validate` and `relax`.
//!
//! Parameters come from flags and from an optional flat `key = value` file
//! (`--config-file`); flags win. Exit codes: 0 success, 1 numerical failure
//! or failed validation, 2 configuration error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::configspace::{equidistant_config, Configuration};
use crate::error::{Error, Result};
use crate::harness::suite::{run_all, run_check, CheckResult, SuiteSize};
use crate::harness::{relaxation_scan, RelaxationGrid};
use crate::kernel::{eq_circle_kernel, extended_hermite, extended_laguerre, extended_sine, write_correlation_csv, write_kernel_csv, CorrelationKernel};
use crate::sde::{simulate_interacting, Scheme, SdeConfig};
use crate::transition::ProcessSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "NCDK_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "ncdk", version, about = "Correlation kernels, simulation and validation for noncolliding diffusions")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config_file: Option<PathBuf>,

    /// Worker threads (overrides NCDK_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Kernel or one-point density values on a grid, as CSV.
    Kernel(KernelArgs),
    /// Simulate the interacting system; summary or full path dump.
    Simulate(SimulateArgs),
    /// Run a named validation check or the full suite; JSON report.
    Validate(ValidateArgs),
    /// Distance of the shifted circle kernel from equilibrium, as CSV.
    Relax(RelaxArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessName {
    Dyson,
    Besq,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKernel {
    /// Circle equilibrium (CUE) kernel; needs --r and --n.
    Cue,
    /// Extended sine kernel; needs --rho.
    Sine,
    /// Extended Hermite kernel; needs --n.
    Hermite,
    /// Extended Laguerre kernel; needs --n and --nu.
    Laguerre,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ProcessArgs {
    #[arg(long, value_enum)]
    pub process: Option<ProcessName>,
    /// BESQ index ν.
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
    /// Circle radius.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Start configuration, e.g. `-1,0,1`, `0*3`, or `equidistant` (circle, with --n).
    #[arg(long, allow_hyphen_values = true)]
    pub config: Option<String>,
    /// Particle count for named kernels and `--config equidistant`.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct KernelArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, value_enum)]
    pub named: Option<NamedKernel>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Position grid `a:b:n` used for both x and y.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Density for the sine kernel.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Common drift b (line and circle).
    #[arg(long, default_value_t = 0.0)]
    pub drift: f64,
    /// Write ρ_1(t, x) on the grid instead of kernel values.
    #[arg(long)]
    pub density: bool,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Euler,
    Adaptive,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SchemeName::Adaptive)]
    pub scheme: SchemeName,
    /// Extra record times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub record: Vec<f64>,
    /// Full path dump (CSV); without it a per-particle summary is printed.
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Named check (see `--list`).
    #[arg(long, conflicts_with = "all")]
    pub check: Option<String>,
    #[arg(long)]
    pub all: bool,
    /// Reduced Monte Carlo sizes.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Print the check names and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RelaxArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long)]
    pub n: Option<usize>,
    /// Shifts T, comma separated; defaults to 0, 2, 5, 10, 15, 20 in units of r²/N.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Vec<f64>,
    /// Positions per axis of the evaluation grid.
    #[arg(long, default_value_t = 12)]
    pub positions: usize,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

/// Parse `a:b:n` into `n` equispaced points from `a` to `b` inclusive.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("grid must be a:b:n, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() || (n > 1 && a >= b) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// Read a flat `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

/// Insert file entries as flags right after the subcommand, so that flags
/// given later on the command line override them.
fn splice_config_file(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config-file=") {
            path = Some(p.to_string());
        } else if a == "--config-file" {
            path = args.get(i + 1).cloned();
        }
    }
    let Some(path) = path else { return Ok(args) };
    let entries = read_config_file(Path::new(&path))?;
    let sub = args
        .iter()
        .position(|a| ["kernel", "simulate", "validate", "relax"].contains(&a.as_str()))
        .ok_or_else(|| Error::Config("a subcommand is required".into()))?;
    let mut flags = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => flags.push(format!("--{k}")),
            "false" => {}
            _ => flags.push(format!("--{k}={v}")),
        }
    }
    let mut out = args[..=sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn comment_line(cli: &Cli) -> String {
    format!("ncdk {VERSION} {}", serde_json::to_string(cli).unwrap_or_default())
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Config(format!("missing --{flag}")))
}

fn build_system(p: &ProcessArgs) -> Result<(ProcessSpec, Configuration)> {
    let process = need(&p.process, "process")?;
    let raw = need(&p.config, "config")?;
    let config = if raw.trim() == "equidistant" {
        if process != ProcessName::Circle {
            return Err(Error::Config("--config equidistant needs --process circle".into()));
        }
        equidistant_config(p.r, need(&p.n, "n")?).map_err(|e| Error::Config(e.to_string()))?
    } else {
        raw.parse::<Configuration>()?
    };
    let spec = match process {
        ProcessName::Dyson => Ok(ProcessSpec::bm()),
        ProcessName::Besq => ProcessSpec::besq(p.nu),
        ProcessName::Circle => ProcessSpec::circle(p.r, config.total()),
    }
    .map_err(|e| Error::Config(e.to_string()))?;
    if let Some(n) = p.n {
        if n != config.total() {
            return Err(Error::Config(format!("--n {n} disagrees with the configuration size {}", config.total())));
        }
    }
    Ok((spec, config))
}

fn cmd_kernel(cli: &Cli, a: &KernelArgs) -> Result<()> {
    let grid = parse_grid(&need(&a.grid, "grid")?)?;
    let t = need(&a.t, "t")?;
    let comment = comment_line(cli);
    if let Some(named) = a.named {
        let s = need(&a.s, "s")?;
        let n = a.process.n;
        let eval: Box<dyn Fn(f64, f64) -> Result<f64>> = match named {
            NamedKernel::Cue => {
                let n = need(&n, "n")?;
                let r = a.process.r;
                Box::new(move |x, y| Ok(eq_circle_kernel(r, n, t - s, y - x)))
            }
            NamedKernel::Sine => {
                let rho = need(&a.rho, "rho")?;
                Box::new(move |x, y| Ok(extended_sine(rho, t - s, y - x)))
            }
            NamedKernel::Hermite => {
                let n = need(&n, "n")?;
                Box::new(move |x, y| extended_hermite(n, s, x, t, y))
            }
            NamedKernel::Laguerre => {
                let n = need(&n, "n")?;
                let nu = a.process.nu;
                Box::new(move |x, y| extended_laguerre(nu, n, s, x, t, y))
            }
        };
        let mut out = open_output(&a.output)?;
        writeln!(out, "# {comment}")?;
        writeln!(out, "s,x,t,y,K")?;
        for &x in &grid {
            for &y in &grid {
                writeln!(out, "{s:.16e},{x:.16e},{t:.16e},{y:.16e},{:.16e}", eval(x, y)?)?;
            }
        }
        out.flush()?;
        return Ok(());
    }
    let (spec, config) = build_system(&a.process)?;
    let k = CorrelationKernel::new(spec, config)?
        .with_drift(a.drift)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut out = open_output(&a.output)?;
    if a.density {
        let rows: Vec<Vec<(f64, f64)>> = grid.iter().map(|&x| vec![(t, x)]).collect();
        write_correlation_csv(&mut out, &comment, &k, &rows)?;
    } else {
        let s = need(&a.s, "s")?;
        let points: Vec<(f64, f64, f64, f64)> =
            grid.iter().flat_map(|&x| grid.iter().map(move |&y| (s, x, t, y))).collect();
        write_kernel_csv(&mut out, &comment, &k, &points)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let (spec, config) = build_system(&a.process)?;
    let scheme = match a.scheme {
        SchemeName::Euler => Scheme::Euler,
        SchemeName::Adaptive => Scheme::EulerAdaptive,
    };
    let cfg = SdeConfig::new(a.dt, a.t_end, a.paths, a.seed)?.with_scheme(scheme).with_record(&a.record)?;
    let ens = simulate_interacting(&spec, &config, &cfg)?;
    let st = ens.stats;
    eprintln!(
        "paths={} base_steps={} halvings={} failed_paths={}",
        ens.paths(),
        st.base_steps,
        st.halvings,
        st.failed_paths
    );
    let comment = comment_line(cli);
    let mut out = open_output(&a.output)?;
    if a.output.is_some() {
        ens.write_csv(&mut out, &comment)?;
    } else {
        writeln!(out, "# {comment}")?;
        writeln!(out, "t,particle,mean,variance,paths")?;
        for (ti, t) in ens.times.iter().enumerate() {
            for j in 0..ens.particles() {
                let mut acc = crate::stats::Accumulator::default();
                for p in ens.ok_paths() {
                    acc.push(ens.value(p, j, ti));
                }
                let e = acc.estimate();
                let var = e.stderr * e.stderr * e.samples as f64;
                writeln!(out, "{t:.16e},{j},{:.16e},{var:.16e},{}", e.mean, e.samples)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Returns whether every check passed.
fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    if a.list {
        for n in crate::harness::suite::CHECK_NAMES {
            println!("{n}");
        }
        return Ok(true);
    }
    let size = if a.fast { SuiteSize::Fast } else { SuiteSize::Full };
    let results: Vec<CheckResult> = match (&a.check, a.all) {
        (Some(name), false) => vec![run_check(name, size, a.seed)?],
        (None, true) => run_all(size, a.seed),
        _ => return Err(Error::Config("give --check NAME or --all".into())),
    };
    for r in &results {
        eprintln!("{}", r.summary());
    }
    let mut out = open_output(&a.output)?;
    serde_json::to_writer_pretty(&mut out, &results).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(results.iter().all(|r| r.pass))
}

fn cmd_relax(cli: &Cli, a: &RelaxArgs) -> Result<()> {
    let n = need(&a.n, "n")?;
    if n == 0 || a.r <= 0.0 || a.positions == 0 {
        return Err(Error::Config("relax needs --n >= 1, --r > 0 and --positions >= 1".into()));
    }
    let shifts: Vec<f64> = if a.shifts.is_empty() {
        crate::harness::suite::RELAXATION_SHIFTS.iter().map(|s| s * a.r * a.r / n as f64).collect()
    } else {
        a.shifts.clone()
    };
    let rows = relaxation_scan(a.r, n, &shifts, &RelaxationGrid::standard(a.r, n, a.positions))?;
    let mut out = open_output(&a.output)?;
    writeln!(out, "# {}", comment_line(cli))?;
    writeln!(out, "T,distance")?;
    for row in rows {
        writeln!(out, "{:.16e},{:.16e}", row.shift, row.distance)?;
    }
    out.flush()?;
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        // a pool already built (repeated in-process runs) keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) => 2,
        _ => 1,
    }
}

/// Run the CLI on `args` (including the program name); returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let args = match splice_config_file(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let matches = match Cli::command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return 2;
    }
    let result = match &cli.command {
        Command::Kernel(a) => cmd_kernel(&cli, a).map(|_| true),
        Command::Simulate(a) => cmd_simulate(&cli, a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
        Command::Relax(a) => cmd_relax(&cli, a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-4:4:81").unwrap().len(), 81);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        for bad in ["1:0:5", "0:1", "a:1:2", "0:1:0"] {
            assert!(matches!(parse_grid(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn config_file_entries_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\npaths = 10\nt_end=0.5\nfast = true\nlist = false\n").unwrap();
        let args: Vec<String> = ["ncdk", "simulate", "--config-file", p.to_str().unwrap(), "--paths", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = splice_config_file(args).unwrap();
        assert_eq!(out[2..5], ["--fast".to_string(), "--paths=10".into(), "--t-end=0.5".into()]);
        assert_eq!(out.last().unwrap(), "3");
    }

    #[test]
    fn flags_override_file_values() {
        let args = ["ncdk", "simulate", "--paths=10", "--process", "dyson", "--config", "0", "--paths", "3"];
        let cli = Cli::try_parse_from(args).unwrap();
        let Command::Simulate(s) = cli.command else { panic!() };
        assert_eq!(s.paths, 3);
    }

    #[test]
    fn equidistant_shorthand() {
        let p = ProcessArgs { process: Some(ProcessName::Circle), nu: 0.0, r: 1.0, config: Some("equidistant".into()), n: Some(4) };
        let (spec, cfg) = build_system(&p).unwrap();
        assert_eq!(spec.particles, 4);
        assert_eq!(cfg.total(), 4);
    }
}
