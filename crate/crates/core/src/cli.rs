//! Command-line front end: configuration files, JSONL traces, reports and
//! CSV exports.
//!
//! A trace file has the run manifest on its first line and one step record
//! per following line. Nothing in a trace depends on wall-clock time or on
//! the thread count, so equal configurations give byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    self, beurling_integral_check, capacity_radius, dimension_identity_report, growth_exponent,
    log_spaced_steps, replay_spectra, thresholds, Check, CheckStatus, ProfileSampler,
    VerificationReport, DEFAULT_ALPHAS,
};
use crate::growth::{grow, replay_steps, GrowthConfig, GrowthError, GrowthTrace, StepRecord};
use crate::lattice::Dim;
use crate::oracle::{enumerate_dbm_with, lemma_sweep, EnumerateOptions, OracleError};
use crate::walkers::WalkStats;

/// Trace format version written by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub seed: u64,
    pub config: GrowthConfig,
    /// Always null: wall-clock times would break byte-identical reruns.
    pub timestamps: Option<Timestamps>,
    pub walk_stats: WalkStats,
    /// Set when the run aborted; the steps up to the failure follow.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    pub fn new(trace: &GrowthTrace, aborted: Option<String>) -> RunManifest {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: trace.config.seed,
            config: trace.config.clone(),
            timestamps: None,
            walk_stats: trace.walk_stats,
            aborted,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed")]
    ChecksFailed,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::ChecksFailed => exit::CHECK_FAILED,
            CliError::Runtime(_) | CliError::Io { .. } => exit::RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses and validates a configuration file.
pub fn load_config(text: &str) -> Result<GrowthConfig, CliError> {
    let cfg: GrowthConfig =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok(cfg)
}

/// Serializes a trace: manifest line, then one line per step.
pub fn write_trace(trace: &GrowthTrace, aborted: Option<String>, mut w: impl Write) -> std::io::Result<()> {
    let manifest = RunManifest::new(trace, aborted);
    serde_json::to_writer(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    for s in &trace.steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn trace_to_string(trace: &GrowthTrace, aborted: Option<String>) -> String {
    let mut buf = Vec::new();
    write_trace(trace, aborted, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty trace file")]
    Empty,
    #[error("line 1: {0}")]
    Manifest(String),
    #[error("unsupported schema_version {0} (this build reads {SCHEMA_VERSION})")]
    Schema(u64),
    #[error("line {line}: {msg}")]
    Step { line: usize, msg: String },
    #[error("replaying the attachments failed: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a trace, rebuilding the final cluster from the attachments.
pub fn read_trace(r: impl Read) -> Result<(RunManifest, GrowthTrace), TraceError> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or(TraceError::Empty)??;
    // Check the version before the rest of the manifest, so newer files are
    // refused rather than misread.
    let raw: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| TraceError::Manifest(e.to_string()))?;
    let version = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| TraceError::Manifest("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(TraceError::Schema(version));
    }
    let manifest: RunManifest =
        serde_json::from_value(raw).map_err(|e| TraceError::Manifest(e.to_string()))?;
    let mut steps = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: StepRecord = serde_json::from_str(&line).map_err(|e| TraceError::Step {
            line: i + 2,
            msg: e.to_string(),
        })?;
        if s.n != steps.len() as u64 + 1 {
            return Err(TraceError::Step {
                line: i + 2,
                msg: format!("expected step {}, found {}", steps.len() + 1, s.n),
            });
        }
        steps.push(s);
    }
    let final_cluster = replay_steps(manifest.config.dimension, &steps)
        .map_err(|e| TraceError::Replay(e.to_string()))?;
    let trace = GrowthTrace {
        config: manifest.config.clone(),
        steps,
        final_cluster,
        walk_stats: manifest.walk_stats,
    };
    Ok((manifest, trace))
}

pub fn load_trace(path: &Path) -> Result<(RunManifest, GrowthTrace), CliError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    read_trace(f).map_err(|e| match e {
        TraceError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

#[derive(Debug, Parser)]
#[command(name = "dbm-lab", version, about = "Lattice DBM-η / DLA growth laboratory")]
pub struct Cli {
    /// Worker threads (speed only; results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow a cluster and write its JSONL trace.
    Grow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a trace against the radius, capacity, Beurling and Makarov bounds.
    Verify {
        trace: PathBuf,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Profiles per decade of n recomputed for the spectral checks.
        #[arg(long, default_value_t = 4)]
        profiles_per_decade: usize,
        /// Walkers per recomputed profile (default: max(10⁴, 20·|∂A|), at most 2·10⁵).
        #[arg(long)]
        samples: Option<u64>,
        /// Seed for the recomputed profiles (default: the run seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact distribution of the cluster after a few steps.
    Oracle {
        #[arg(long)]
        dimension: u8,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        strict_eden: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flat CSV views of a trace.
    Export {
        trace: PathBuf,
        #[arg(long, value_enum)]
        what: Series,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Walkers per recomputed profile for `spectra`.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Capacity-increment ratios over all small lattice animals.
    LemmaSweep {
        #[arg(long)]
        dimension: u8,
        #[arg(long)]
        max_sites: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Series {
    RadiusSeries,
    Spectra,
    Increments,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(io_err(p)),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)
                .and_then(|_| so.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn dim_arg(d: u8) -> Result<Dim, CliError> {
    Dim::from_value(d as usize).ok_or_else(|| CliError::Usage(format!("dimension must be 2 or 3, got {d}")))
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second initialization (e.g. from tests) keeps the first pool,
        // which is harmless since results do not depend on it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Grow { config, out, seed } => cmd_grow(&config, out.as_deref(), seed),
        Command::Verify {
            trace,
            out,
            profiles_per_decade,
            samples,
            seed,
        } => {
            let (_, t) = load_trace(&trace)?;
            let mut sampler = ProfileSampler::new(seed.unwrap_or(t.config.seed));
            sampler.samples = samples;
            sampler.max_samples = Some(200_000);
            let report = verify_trace(&t, &sampler, profiles_per_decade)?;
            let json = serde_json::to_vec_pretty(&report).expect("report serializes");
            if let Some(p) = &out {
                fs::write(p, &json).map_err(io_err(p))?;
            }
            print!("{}", report.table());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::ChecksFailed)
            }
        }
        Command::Oracle {
            dimension,
            eta,
            depth,
            strict_eden,
            out,
        } => {
            let dim = dim_arg(dimension)?;
            let opts = EnumerateOptions {
                strict_eden,
                cache: None,
            };
            let d = enumerate_dbm_with(dim, eta, depth, &opts).map_err(|e| match e {
                OracleError::TooDeep { .. } | OracleError::BadEta(_) => CliError::Usage(e.to_string()),
                other => CliError::Runtime(other.to_string()),
            })?;
            let mut json = serde_json::to_vec_pretty(&d).expect("distribution serializes");
            json.push(b'\n');
            emit(out.as_deref(), &json)
        }
        Command::Export {
            trace,
            what,
            out,
            samples,
        } => {
            let (_, t) = load_trace(&trace)?;
            let mut sampler = ProfileSampler::new(t.config.seed);
            sampler.samples = samples;
            let csv = export_csv(&t, what, &sampler)?;
            emit(out.as_deref(), csv.as_bytes())
        }
        Command::LemmaSweep {
            dimension,
            max_sites,
            out,
        } => {
            let dim = dim_arg(dimension)?;
            let t = lemma_sweep(dim, max_sites).map_err(|e| match e {
                OracleError::TooManySites { .. } => CliError::Usage(e.to_string()),
                other => CliError::Runtime(other.to_string()),
            })?;
            let mut json = serde_json::to_vec_pretty(&t).expect("table serializes");
            json.push(b'\n');
            emit(out.as_deref(), &json)
        }
    }
}

fn cmd_grow(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(config).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let mut cfg: GrowthConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    match grow(&cfg) {
        Ok(t) => emit(out, trace_to_string(&t, None).as_bytes()),
        Err(e) => {
            let msg = e.to_string();
            if let Some(partial) = e.partial() {
                emit(out, trace_to_string(partial, Some(msg.clone())).as_bytes())?;
            }
            Err(match e {
                GrowthError::Config(_) => CliError::Usage(msg),
                _ => CliError::Runtime(msg),
            })
        }
    }
}

/// Steps at which profiles are recomputed: the capacity checkpoints when
/// the run has them, thinned to about `per_decade` per decade of `n`.
fn profile_steps(t: &GrowthTrace, per_decade: usize) -> Vec<u64> {
    let n = t.steps.len() as u64;
    let grid = log_spaced_steps(n, 10, per_decade);
    let every = t.config.capacity_checkpoint_every;
    if every == 0 {
        return grid;
    }
    let mut v: Vec<u64> = grid
        .iter()
        .map(|&g| ((g + every / 2) / every * every).clamp(every, n / every * every))
        .filter(|&g| g >= 1)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Every applicable check on one trace. Checks needing full profiles
/// recompute them at log-spaced steps by replay.
pub fn verify_trace(
    t: &GrowthTrace,
    sampler: &ProfileSampler,
    per_decade: usize,
) -> Result<VerificationReport, CliError> {
    let cfg = &t.config;
    let mut report = analysis::theorem_margin(t);
    report.checks.push(analysis::slope_check(t));

    // Capacity against log-radius.
    if cfg.dimension == Dim::Two {
        let cr = capacity_radius(t);
        let mut c = Check {
            name: "capacity_radius".into(),
            anchor: "planar capacity: |Cap(A) - (2/pi) ln R(A)| bounded".into(),
            bound: format!("max gap <= {}", thresholds::CAPACITY_RADIUS_GAP),
            value: None,
            threshold: None,
            margin: None,
            status: CheckStatus::InsufficientData,
            details: Default::default(),
        };
        if !cr.points.is_empty() {
            c.value = Some(cr.max_gap);
            c.threshold = Some(thresholds::CAPACITY_RADIUS_GAP);
            c.margin = Some(thresholds::CAPACITY_RADIUS_GAP - cr.max_gap);
            let trending = match (cr.mid_gap, cr.last_gap) {
                (Some(m), Some(l)) => {
                    c.details.insert("mid_decade_gap".into(), m);
                    c.details.insert("last_decade_gap".into(), l);
                    l > m + thresholds::CAPACITY_TREND_SLACK
                }
                _ => false,
            };
            c.status = if cfg.eta == 1.0 {
                if cr.max_gap <= thresholds::CAPACITY_RADIUS_GAP && !trending {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                }
            } else {
                // Calibrated on DLA only.
                CheckStatus::Report
            };
        }
        report.checks.push(c);
    }

    // Integral Beurling estimate and the internal mean inequality.
    let start = if cfg.dimension == Dim::Two {
        thresholds::BEURLING_BAND_START
    } else {
        20.0
    };
    let mut beur = Check {
        name: "integral_beurling".into(),
        anchor: "integral Beurling: (prod omega)^{1/m} <= C m^{-1/2} (times Cap^{-1/2} in 3D)".into(),
        bound: format!(
            "sqrt(m) * geometric mean <= {} for m >= {}",
            thresholds::BEURLING_RATIO,
            thresholds::BEURLING_MIN_COUNT
        ),
        value: None,
        threshold: None,
        margin: None,
        status: CheckStatus::InsufficientData,
        details: Default::default(),
    };
    let mut amgm = Check {
        name: "am_gm".into(),
        anchor: "geometric mean <= root mean square of the same entries".into(),
        bound: "holds exactly".into(),
        value: None,
        threshold: None,
        margin: None,
        status: CheckStatus::InsufficientData,
        details: Default::default(),
    };
    if let Ok(b) = beurling_integral_check(t, start) {
        beur.details.insert("in_band".into(), b.in_band as f64);
        beur.details.insert("measured".into(), b.m as f64);
        beur.details.insert("missing".into(), b.missing as f64);
        beur.details.insert("zero_estimates".into(), b.zero_estimates as f64);
        beur.details.insert("coverage".into(), b.coverage());
        amgm.status = if b.am_gm_holds {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        if b.m > 0 {
            amgm.value = Some(b.geometric_mean / b.root_mean_square);
        }
        let sup = b.sup_from(thresholds::BEURLING_MIN_COUNT);
        if b.coverage() >= thresholds::MIN_COVERAGE && b.m >= thresholds::BEURLING_MIN_COUNT {
            if let Some(s) = sup {
                beur.value = Some(s);
                if cfg.dimension == Dim::Two && cfg.eta == 1.0 {
                    beur.threshold = Some(thresholds::BEURLING_RATIO);
                    beur.margin = Some(thresholds::BEURLING_RATIO - s);
                    beur.status = if s <= thresholds::BEURLING_RATIO {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    };
                } else {
                    beur.status = CheckStatus::Report;
                }
            }
        }
    }
    report.checks.push(beur);
    report.checks.push(amgm);

    // Spectral checks on recomputed profiles.
    let steps = profile_steps(t, per_decade);
    let spectra = replay_spectra(t, &steps, sampler, &alphas_for(cfg.eta))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    match cfg.dimension {
        Dim::Two => {
            let mut worst: Option<f64> = None;
            for (s, mak, _) in &spectra {
                if s.radius >= thresholds::BEURLING_BAND_START {
                    let v = mak.abs() / s.radius.ln().ln();
                    worst = Some(worst.map_or(v, |w: f64| w.max(v)));
                }
            }
            let mut c = Check {
                name: "makarov".into(),
                anchor: "discrete Makarov: |sum omega ln omega + ln R| <= C ln ln R".into(),
                bound: format!("ratio <= {}", thresholds::MAKAROV_RATIO),
                value: None,
                threshold: None,
                margin: None,
                status: CheckStatus::InsufficientData,
                details: Default::default(),
            };
            if let Some(w) = worst {
                c.value = Some(w);
                if cfg.eta == 1.0 {
                    c.threshold = Some(thresholds::MAKAROV_RATIO);
                    c.margin = Some(thresholds::MAKAROV_RATIO - w);
                    c.status = if w <= thresholds::MAKAROV_RATIO {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    };
                } else {
                    c.status = CheckStatus::Report;
                }
            }
            report.checks.push(c);
        }
        Dim::Three => {
            let mut worst: Option<f64> = None;
            for (s, _, maxw) in &spectra {
                if s.radius >= 20.0 {
                    let v = maxw * s.radius / s.radius.ln().sqrt();
                    worst = Some(worst.map_or(v, |w: f64| w.max(v)));
                }
            }
            let mut c = Check {
                name: "beurling_3d".into(),
                anchor: "3D Beurling: max omega <= C (ln R)^{1/2} / R".into(),
                bound: format!("max omega * R / sqrt(ln R) <= {}", thresholds::BEURLING_3D),
                value: None,
                threshold: None,
                margin: None,
                status: CheckStatus::InsufficientData,
                details: Default::default(),
            };
            if let Some(w) = worst {
                c = Check {
                    value: Some(w),
                    threshold: Some(thresholds::BEURLING_3D),
                    margin: Some(thresholds::BEURLING_3D - w),
                    status: if w <= thresholds::BEURLING_3D {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    },
                    ..c
                };
            }
            report.checks.push(c);
        }
    }

    // The dimension identity is heuristic and only reported.
    let reports: Vec<_> = spectra.into_iter().map(|s| s.0).collect();
    let n = t.steps.len() as u64;
    let beta = growth_exponent(t, (n / 10).max(1), n).ok().map(|f| f.slope);
    let mut dim_check = Check {
        name: "dimension_identity".into(),
        anchor: "D(eta) = tau(eta+2) - tau(eta); tau(eta+2) >= (eta+2)/2; tau(eta) <= eta - 1".into(),
        bound: "reported, not asserted".into(),
        value: None,
        threshold: None,
        margin: None,
        status: CheckStatus::InsufficientData,
        details: Default::default(),
    };
    if let Ok(d) = dimension_identity_report(&reports, cfg.eta, beta) {
        if !d.scales.is_empty() {
            dim_check.value = Some(d.dimension_estimate);
            dim_check.status = CheckStatus::Report;
            if let Some(ib) = d.inverse_growth_exponent {
                dim_check.details.insert("inverse_growth_exponent".into(), ib);
            }
            dim_check.details.insert("lower_bound_margin".into(), d.lower_bound_margin);
            dim_check.details.insert("upper_bound_margin".into(), d.upper_bound_margin);
            dim_check.details.insert("low_confidence".into(), f64::from(u8::from(d.low_confidence)));
        }
    }
    report.checks.push(dim_check);
    Ok(report)
}

/// The default exponents plus `η` and `η + 2`.
fn alphas_for(eta: f64) -> Vec<f64> {
    let mut a = DEFAULT_ALPHAS.to_vec();
    for x in [eta, eta + 2.0] {
        if !a.iter().any(|&y| (y - x).abs() < 1e-12) {
            a.push(x);
        }
    }
    a.sort_by(f64::total_cmp);
    a
}

/// CSV export of one series; missing values are empty fields.
pub fn export_csv(t: &GrowthTrace, what: Series, sampler: &ProfileSampler) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let res: Result<(), csv::Error> = (|| {
        match what {
            Series::RadiusSeries => {
                w.write_record(["n", "radius"])?;
                for s in &t.steps {
                    w.write_record([s.n.to_string(), s.r.to_string()])?;
                }
            }
            Series::Increments => {
                // delta_cap needs capacities at both n − 1 and n.
                w.write_record(["n", "omega_hat", "delta_cap"])?;
                for (i, s) in t.steps.iter().enumerate() {
                    let prev = if i == 0 { None } else { t.steps[i - 1].cap };
                    let delta = match (prev, s.cap) {
                        (Some(a), Some(b)) => Some(b - a),
                        _ => None,
                    };
                    w.write_record([s.n.to_string(), opt(s.omega), opt(delta)])?;
                }
            }
            Series::Spectra => {
                w.write_record(["checkpoint_n", "R", "alpha", "sum", "tau_hat"])?;
                let steps = profile_steps(t, 4);
                let spectra = replay_spectra(t, &steps, sampler, &alphas_for(t.config.eta))
                    .map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))?;
                for (s, _, _) in spectra {
                    for i in 0..s.alphas.len() {
                        w.write_record([
                            s.n.unwrap_or(0).to_string(),
                            s.radius.to_string(),
                            s.alphas[i].to_string(),
                            s.sums[i].to_string(),
                            s.tau_hat[i].to_string(),
                        ])?;
                    }
                }
            }
        }
        Ok(())
    })();
    res.map_err(|e| CliError::Runtime(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            if !matches!(e, CliError::ChecksFailed) {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
