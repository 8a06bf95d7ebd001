//! Command-line front end: target generation, compilation, verification,
//! and sweep experiments, with versioned decimal-text file formats for
//! matrices and gate sequences and CSV output for sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::decompose::{decompose, plan_stats, DEFAULT_PRUNE_TOL, DEFAULT_UNITARITY_TOL};
use crate::fockops::{fidelity, ComplexMatrix, C64};
use crate::synth::{sequence_stats, synthesize, Gate, GateSequence, SynthesisOptions};
use crate::targets::{haar_random, qft};
use crate::verify::{
    clamp_for_report, fit_slope, log_spaced, simulate, sweep_givens, sweep_qft, SweepRecord,
    XField,
};
use crate::Error;

pub const MATRIX_FORMAT: &str = "qsnapc-matrix";
pub const SEQUENCE_FORMAT: &str = "qsnapc-sequence";
pub const FORMAT_VERSION: u32 = 1;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;

/// CLI-level failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: msg.into() }
    }
    fn numeric(msg: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: msg.into() }
    }
    fn format(msg: impl Into<String>) -> Self {
        Self { code: EXIT_FORMAT, message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::numeric(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "qsnapc",
    about = "Compile d-dimensional unitaries into SNAP and displacement gate sequences",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a target unitary and write it as a matrix file
    Gen {
        /// Target family
        #[arg(value_enum)]
        kind: GenKind,
        /// Active dimension (QFT block size); defaults to dim
        #[arg(long)]
        n: Option<usize>,
        /// Full qudit dimension
        #[arg(long)]
        dim: usize,
        /// RNG seed (haar only)
        #[arg(long)]
        seed: Option<u64>,
        /// Output matrix file
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a matrix file into a SNAP/displacement sequence file
    Compile {
        /// Input matrix file
        input: PathBuf,
        /// Output sequence file
        #[arg(long)]
        out: PathBuf,
        /// Rotation split factor
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Disable fusion of adjacent same-kind gates
        #[arg(long)]
        no_merge: bool,
        #[arg(long, default_value_t = DEFAULT_UNITARITY_TOL)]
        unitarity_tol: f64,
        #[arg(long, default_value_t = DEFAULT_PRUNE_TOL)]
        prune_tol: f64,
    },
    /// Simulate a sequence file and compare it against a target matrix
    Verify {
        /// Sequence file
        sequence: PathBuf,
        /// Target matrix file
        target: PathBuf,
        /// Maximum accepted infidelity
        #[arg(long, default_value_t = 1e-2)]
        budget: f64,
    },
    /// Run a scaling experiment and write its records as CSV
    Sweep {
        #[command(subcommand)]
        experiment: SweepCommand,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GenKind {
    Qft,
    Haar,
}

#[derive(Args, Debug)]
pub struct SweepCommon {
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for sweep points (0 = automatic)
    #[arg(long, env = "QSNAPC_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Record wall-clock timings in the CSV (off keeps reruns byte-identical)
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
pub enum SweepCommand {
    /// Infidelity of single V_k blocks against Givens rotations over a theta grid
    Givens {
        #[arg(long)]
        dim: usize,
        /// Levels: "0..13" (inclusive), "0,5,9", or a single index
        #[arg(long)]
        k: String,
        /// Number of log-spaced theta points
        #[arg(long, default_value_t = 20)]
        theta_grid: usize,
        #[arg(long, default_value_t = std::f64::consts::PI / 100.0)]
        theta_min: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta_max: f64,
        #[command(flatten)]
        common: SweepCommon,
    },
    /// Full-QFT infidelity versus the rotation split factor m
    Qft {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        /// Comma-separated split factors, e.g. "1,2,4,8,16,32,64"
        #[arg(long)]
        m: String,
        #[command(flatten)]
        common: SweepCommon,
    },
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen { kind, n, dim, seed, out } => cmd_gen(kind, n, dim, seed, &out),
        Command::Compile { input, out, m, no_merge, unitarity_tol, prune_tol } => {
            cmd_compile(&input, &out, m, !no_merge, unitarity_tol, prune_tol)
        }
        Command::Verify { sequence, target, budget } => cmd_verify(&sequence, &target, budget),
        Command::Sweep { experiment } => cmd_sweep(experiment),
    }
}

pub fn cmd_gen(
    kind: GenKind,
    n: Option<usize>,
    dim: usize,
    seed: Option<u64>,
    out: &Path,
) -> CliResult {
    let matrix = match kind {
        GenKind::Qft => {
            let n = n.unwrap_or(dim);
            if n > dim {
                return Err(CliError::usage(format!("N exceeds dim: N={n}, dim={dim}")));
            }
            qft(n, dim).map_err(|e| CliError::usage(e.to_string()))?
        }
        GenKind::Haar => haar_random(dim, seed.unwrap_or(0))
            .map_err(|e| CliError::usage(e.to_string()))?,
    };
    write_matrix(out, &matrix)?;
    println!("dim={dim}");
    println!("checksum={}", matrix.checksum());
    Ok(())
}

pub fn cmd_compile(
    input: &Path,
    out: &Path,
    m: usize,
    merge: bool,
    unitarity_tol: f64,
    prune_tol: f64,
) -> CliResult {
    let matrix = read_matrix(input)?;
    let t0 = Instant::now();
    let plan = decompose(&matrix, unitarity_tol, prune_tol).map_err(|e| match e {
        Error::NonUnitary { .. } => CliError::numeric(e.to_string()),
        other => CliError::numeric(other.to_string()),
    })?;
    let options = SynthesisOptions { m, merge, prune_tol };
    let seq = synthesize(&plan, &options)?;
    let compile_seconds = t0.elapsed().as_secs_f64();

    write_sequence(out, &seq, &options, &plan.source_checksum)?;

    let pstats = plan_stats(&plan);
    let sstats = sequence_stats(&seq);
    println!("dim={}", seq.dim);
    println!("source_checksum={}", plan.source_checksum);
    println!("plan_snap_steps={}", pstats.snap_count);
    println!("plan_givens_steps={}", pstats.givens_count);
    println!("plan_multiply_adds={}", plan.multiply_adds);
    println!("m={m}");
    println!("merge={merge}");
    println!("gate_count={}", sstats.gate_count);
    println!("snap_count={}", sstats.snap_count);
    println!("displacement_count={}", sstats.displacement_count);
    println!("max_abs_alpha={:.16e}", sstats.max_abs_alpha);
    println!("total_abs_alpha={:.16e}", sstats.total_abs_alpha);
    println!("compile_seconds={compile_seconds:.6}");
    Ok(())
}

pub fn cmd_verify(seq_path: &Path, target_path: &Path, budget: f64) -> CliResult {
    let (seq, header) = read_sequence(seq_path)?;
    let target = read_matrix(target_path)?;
    if seq.dim != target.dim() {
        return Err(CliError::numeric(format!(
            "dimension mismatch: sequence dim {} vs target dim {}",
            seq.dim,
            target.dim()
        )));
    }
    let t0 = Instant::now();
    let u = simulate(&seq)?;
    let eps = 1.0 - fidelity(&u, &target)?;
    let simulate_seconds = t0.elapsed().as_secs_f64();

    println!("dim={}", seq.dim);
    println!("gate_count={}", seq.len());
    println!("source_checksum={}", header.source_checksum);
    println!("target_checksum={}", target.checksum());
    println!("infidelity_raw={eps:.16e}");
    println!("infidelity_clamped={:.16e}", clamp_for_report(eps.max(0.0)));
    println!("simulate_seconds={simulate_seconds:.6}");
    println!("budget={budget:.16e}");
    if eps > budget {
        return Err(CliError::numeric(format!(
            "infidelity {eps:.3e} exceeds budget {budget:.3e}"
        )));
    }
    Ok(())
}

pub fn cmd_sweep(experiment: SweepCommand) -> CliResult {
    match experiment {
        SweepCommand::Givens { dim, k, theta_grid, theta_min, theta_max, common } => {
            if theta_grid < 2 || theta_min <= 0.0 || theta_max <= theta_min {
                return Err(CliError::usage("invalid theta grid parameters"));
            }
            let k_list = parse_index_list(&k)?;
            let thetas = log_spaced(theta_min, theta_max, theta_grid);
            let records = in_pool(common.jobs, || sweep_givens(dim, &k_list, &thetas))?;
            write_sweep_csv(&common.out, &records, common.timings)?;
            for &kk in &k_list {
                let per_k: Vec<SweepRecord> = records
                    .iter()
                    .filter(|r| r.k == Some(kk))
                    .cloned()
                    .collect();
                match fit_slope(&per_k, XField::Theta, (theta_min, theta_max)) {
                    Ok(fit) => println!("slope_k{kk}={:.6}", fit.slope),
                    Err(e) => println!("slope_k{kk}=unavailable ({e})"),
                }
            }
            Ok(())
        }
        SweepCommand::Qft { n, dim, m, common } => {
            let m_list = parse_index_list(&m)?;
            if m_list.iter().any(|&m| m == 0) {
                return Err(CliError::usage("split factors must be >= 1"));
            }
            let records = in_pool(common.jobs, || sweep_qft(n, dim, &m_list))?;
            write_sweep_csv(&common.out, &records, common.timings)?;
            let max_m = *m_list.iter().max().unwrap() as f64;
            match fit_slope(&records, XField::M, (8.0, max_m)) {
                Ok(fit) => {
                    println!("slope={:.6}", fit.slope);
                    println!("slope_window_m_min={}", fit.domain.0.round());
                    println!("slope_window_m_max={}", fit.domain.1.round());
                }
                Err(e) => println!("slope=unavailable ({e})"),
            }
            Ok(())
        }
    }
}

fn in_pool<T>(
    jobs: usize,
    f: impl FnOnce() -> crate::Result<T> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    if jobs == 1 {
        return f().map_err(CliError::from);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))?;
    pool.install(f).map_err(CliError::from)
}

/// Parse "a..b" (inclusive), "a,b,c", or a single integer.
fn parse_index_list(s: &str) -> Result<Vec<usize>, CliError> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad range start in '{s}'")))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad range end in '{s}'")))?;
        if hi < lo {
            return Err(CliError::usage(format!("empty range '{s}'")));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad index '{part}'")))
        })
        .collect()
}

// ---- file formats ----

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> CliResult {
    let dim = m.dim();
    let mut out = String::with_capacity(dim * dim * 52 + 64);
    writeln!(out, "{MATRIX_FORMAT} {FORMAT_VERSION}").unwrap();
    writeln!(out, "dim {dim}").unwrap();
    for z in m.entries() {
        writeln!(out, "{:.16e} {:.16e}", z.re, z.im).unwrap();
    }
    fs::write(path, out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    expect_header(lines.next(), MATRIX_FORMAT, path)?;
    let dim = parse_kv_line(lines.next(), "dim", path)?;
    if dim < 2 {
        return Err(CliError::format(format!(
            "{}: dim {dim} out of range",
            path.display()
        )));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let re = parse_float(parts.next(), path)?;
        let im = parse_float(parts.next(), path)?;
        if parts.next().is_some() {
            return Err(CliError::format(format!(
                "{}: trailing tokens on entry line",
                path.display()
            )));
        }
        data.push(C64::new(re, im));
    }
    if data.len() != dim * dim {
        return Err(CliError::format(format!(
            "{}: payload has {} entries, header declares dim {dim} ({} expected)",
            path.display(),
            data.len(),
            dim * dim
        )));
    }
    ComplexMatrix::from_rows(dim, data).map_err(|e| CliError::format(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct SequenceHeader {
    pub dim: usize,
    pub m: usize,
    pub merge: bool,
    pub prune_tol: f64,
    pub source_checksum: String,
}

pub fn write_sequence(
    path: &Path,
    seq: &GateSequence,
    options: &SynthesisOptions,
    source_checksum: &str,
) -> CliResult {
    let mut out = String::new();
    writeln!(out, "{SEQUENCE_FORMAT} {FORMAT_VERSION}").unwrap();
    writeln!(out, "dim {}", seq.dim).unwrap();
    writeln!(out, "m {}", options.m).unwrap();
    writeln!(out, "merge {}", options.merge).unwrap();
    writeln!(out, "prune_tol {:.16e}", options.prune_tol).unwrap();
    writeln!(out, "source {source_checksum}").unwrap();
    writeln!(out, "gates {}", seq.len()).unwrap();
    for gate in &seq.gates {
        match gate {
            Gate::Snap(phases) => {
                out.push_str("snap");
                for p in phases {
                    write!(out, " {p:.16e}").unwrap();
                }
                out.push('\n');
            }
            Gate::Disp(alpha) => writeln!(out, "disp {alpha:.16e}").unwrap(),
        }
    }
    fs::write(path, out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn read_sequence(path: &Path) -> Result<(GateSequence, SequenceHeader), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    expect_header(lines.next(), SEQUENCE_FORMAT, path)?;
    let dim: usize = parse_kv_line(lines.next(), "dim", path)?;
    let m: usize = parse_kv_line(lines.next(), "m", path)?;
    let merge_raw = parse_kv_str(lines.next(), "merge", path)?;
    let merge = match merge_raw.as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(CliError::format(format!(
                "{}: bad merge flag '{other}'",
                path.display()
            )))
        }
    };
    let prune_raw = parse_kv_str(lines.next(), "prune_tol", path)?;
    let prune_tol: f64 = prune_raw
        .parse()
        .map_err(|_| CliError::format(format!("{}: bad prune_tol", path.display())))?;
    let source_checksum = parse_kv_str(lines.next(), "source", path)?;
    let count: usize = parse_kv_line(lines.next(), "gates", path)?;

    let mut gates = Vec::with_capacity(count);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("snap") => {
                let phases: Result<Vec<f64>, CliError> =
                    parts.map(|t| parse_float(Some(t), path)).collect();
                let phases = phases?;
                if phases.len() != dim {
                    return Err(CliError::format(format!(
                        "{}: snap gate has {} phases, dim is {dim}",
                        path.display(),
                        phases.len()
                    )));
                }
                gates.push(Gate::Snap(phases));
            }
            Some("disp") => {
                let alpha = parse_float(parts.next(), path)?;
                if parts.next().is_some() {
                    return Err(CliError::format(format!(
                        "{}: trailing tokens on disp line",
                        path.display()
                    )));
                }
                gates.push(Gate::Disp(alpha));
            }
            Some(tag) => {
                return Err(CliError::format(format!(
                    "{}: unknown gate tag '{tag}'",
                    path.display()
                )))
            }
            None => unreachable!(),
        }
    }
    if gates.len() != count {
        return Err(CliError::format(format!(
            "{}: {} gates found, header declares {count}",
            path.display(),
            gates.len()
        )));
    }
    Ok((
        GateSequence { dim, gates },
        SequenceHeader { dim, m, merge, prune_tol, source_checksum },
    ))
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord], timings: bool) -> CliResult {
    let mut out = String::new();
    out.push_str(
        "experiment,dim,N,k,m,theta,infidelity_raw,infidelity_clamped,gate_count,compile_seconds,simulate_seconds\n",
    );
    for r in records {
        let theta = r.theta.map(|t| format!("{t:.16e}")).unwrap_or_default();
        let n = r.n.map(|v| v.to_string()).unwrap_or_default();
        let k = r.k.map(|v| v.to_string()).unwrap_or_default();
        let m = r.m.map(|v| v.to_string()).unwrap_or_default();
        let (tc, ts) = if timings {
            (format!("{:.6}", r.compile_seconds), format!("{:.6}", r.simulate_seconds))
        } else {
            ("0".to_string(), "0".to_string())
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{:.16e},{:.16e},{},{},{}",
            r.experiment.as_str(),
            r.dim,
            n,
            k,
            m,
            theta,
            r.infidelity,
            clamp_for_report(r.infidelity.max(0.0)),
            r.gate_count,
            tc,
            ts
        )
        .unwrap();
    }
    fs::write(path, out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn expect_header(line: Option<&str>, format: &str, path: &Path) -> CliResult {
    let line = line.ok_or_else(|| CliError::format(format!("{}: empty file", path.display())))?;
    let mut parts = line.split_whitespace();
    let tag = parts.next().unwrap_or("");
    if tag != format {
        return Err(CliError::format(format!(
            "{}: not a {format} file (found '{tag}')",
            path.display()
        )));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::format(format!("{}: missing format version", path.display())))?;
    if version != FORMAT_VERSION {
        return Err(CliError::format(format!(
            "{}: unsupported {format} version {version} (supported: {FORMAT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

fn parse_kv_str(line: Option<&str>, key: &str, path: &Path) -> Result<String, CliError> {
    let line = line.ok_or_else(|| {
        CliError::format(format!("{}: missing '{key}' header line", path.display()))
    })?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(CliError::format(format!(
            "{}: expected '{key}' header line, found '{line}'",
            path.display()
        )));
    }
    let value = parts
        .next()
        .ok_or_else(|| CliError::format(format!("{}: missing value for '{key}'", path.display())))?;
    Ok(value.to_string())
}

fn parse_kv_line(line: Option<&str>, key: &str, path: &Path) -> Result<usize, CliError> {
    let raw = parse_kv_str(line, key, path)?;
    raw.parse()
        .map_err(|_| CliError::format(format!("{}: bad value for '{key}'", path.display())))
}

fn parse_float(token: Option<&str>, path: &Path) -> Result<f64, CliError> {
    let token = token
        .ok_or_else(|| CliError::format(format!("{}: missing numeric token", path.display())))?;
    let v: f64 = token
        .parse()
        .map_err(|_| CliError::format(format!("{}: bad number '{token}'", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::format(format!(
            "{}: non-finite number '{token}'",
            path.display()
        )));
    }
    Ok(v)
}
