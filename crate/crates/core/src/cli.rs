//! `corectl`: striping, failure injection, recovery, degraded reads and the
//! analysis tables from the command line.
//!
//! Store commands work on a directory written by [`Cluster::save`]. Byte
//! counts are printed as exact integers and ratios with four decimals.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{
    bandwidth_ratio_table, census, census_sampled, emit_csv, mttf, mttf_monte_carlo, mttf_sweep,
    write_csv, CsvTable, MarkovParams, Scheme, DEFAULT_CENSUS_BUDGET,
};
use crate::cluster::{
    default_block_size, store::METADATA_FILE, BlockRole, Cluster, PipelineConfig, RecoveryMode,
    RecoveryOptions, RelayerConfig,
};
use crate::codes::{build_code, CodeKind};
use crate::recovery::{FailurePattern, RecoveryEngine};

pub const STORE_ENV: &str = "CORE_STORE";
const DEFAULT_SYMBOL_SIZE: usize = 8192;
const BYTES_PER_GBPS: f64 = 1.25e8;
const BYTES_PER_TB: f64 = 1e12;

#[derive(Debug, Parser)]
#[command(name = "corectl", version, about = "Concurrent failure recovery for regenerating codes")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = STORE_ENV, default_value = "core-store")]
    pub store: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Core,
    Conventional,
}

impl From<SchemeArg> for RecoveryMode {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Core => RecoveryMode::Core,
            SchemeArg::Conventional => RecoveryMode::Conventional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MttfSchemeArg {
    Core,
    Conventional,
    Both,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ExecArgs {
    /// Worker threads for the recovery pipeline; 0 runs sequentially.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Node hosting the relayer.
    #[arg(long)]
    pub relayer: Option<usize>,
    /// Leave downloads from the relayer's own node out of the ledger.
    #[arg(long, requires = "relayer")]
    pub exempt_local: bool,
}

impl ExecArgs {
    fn options(&self, scheme: SchemeArg) -> RecoveryOptions {
        let mut o = RecoveryOptions::new(scheme.into());
        o.pipeline = if self.workers == 0 {
            PipelineConfig::sequential()
        } else {
            PipelineConfig::pipelined(self.workers)
        };
        o.relayer = RelayerConfig {
            host: self.relayer,
            count_local: !self.exempt_local,
        };
        o
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stripe a file into the store, creating the store if needed.
    Encode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "msr")]
        code: CodeKind,
        /// Block size in bytes; must be a multiple of the strip size.
        /// Defaults to 64 MiB rounded down to such a multiple.
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SYMBOL_SIZE)]
        symbol_size: usize,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Mark nodes as failed and drop their data.
    Fail {
        /// Comma-separated node indices.
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<usize>,
    },
    /// Rebuild every failed node.
    Recover {
        #[arg(long, value_enum, default_value = "core")]
        scheme: SchemeArg,
        /// Write the per-node traffic ledger as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Read a block (degraded if its node failed) or a whole file.
    Read {
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        block: Option<u64>,
        #[arg(long)]
        file: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "core")]
        scheme: SchemeArg,
        /// Write the traffic ledger of a degraded block read as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Classify failure patterns as good or bad.
    Census {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Comma-separated pattern sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<usize>,
        /// Largest exhaustive enumeration allowed.
        #[arg(long, default_value_t = DEFAULT_CENSUS_BUDGET)]
        budget: u64,
        /// Sample this many patterns instead of enumerating.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also print the bad patterns.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bandwidth ratio of concurrent to conventional recovery per t.
    Ratios {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean time to data loss. List flags sweep over every combination.
    Mttf {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Node failure rate per year.
        #[arg(long, value_delimiter = ',', default_value = "0.25")]
        lambda: Vec<f64>,
        /// Repair bandwidth in Gbps.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        bandwidth: Vec<f64>,
        /// Node capacity in TB.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        capacity: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        scheme: MttfSchemeArg,
        /// Add a Monte-Carlo estimate with this many trials.
        #[arg(long)]
        monte_carlo: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the store.
    Info,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli, out)
}

fn load(store: &Path) -> Result<Cluster> {
    if !store.join(METADATA_FILE).exists() {
        bail!("no store at {} (run `encode` first)", store.display());
    }
    Ok(Cluster::load(store)?)
}

fn emit<T: CsvTable + ?Sized>(table: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => emit_csv(table, p)?,
        None => write_csv(table, &mut *out)?,
    }
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let store = cli.store.as_path();
    match cli.command {
        Command::Encode {
            n,
            k,
            code,
            block_size,
            symbol_size,
            input,
        } => {
            let data = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut cluster = if store.join(METADATA_FILE).exists() {
                let c = Cluster::load(store)?;
                let spec = c.spec();
                if (spec.n(), spec.k(), spec.kind(), spec.symbol_size()) != (n, k, code, symbol_size) {
                    bail!(
                        "store {} holds a ({},{}) {} code with symbol size {}",
                        store.display(),
                        spec.n(),
                        spec.k(),
                        spec.kind(),
                        spec.symbol_size()
                    );
                }
                if block_size.is_some_and(|b| b != c.block_size()) {
                    bail!("store {} uses block size {}", store.display(), c.block_size());
                }
                c
            } else {
                let spec = build_code(n, k, code, symbol_size)?;
                let bs = block_size.unwrap_or_else(|| default_block_size(&spec));
                Cluster::create(spec, bs)?
            };
            let ids = cluster.stripe_file(&data)?;
            cluster.save(store)?;
            let file = cluster.files().len() - 1;
            let entry = &cluster.files()[file];
            writeln!(out, "file {file}: {} bytes, padding {} bytes", entry.length, entry.padding)?;
            writeln!(out, "blocks {}..={}", ids[0], ids[ids.len() - 1])?;
        }
        Command::Fail { nodes } => {
            let mut cluster = load(store)?;
            let pattern = FailurePattern::new(nodes, cluster.n())?;
            cluster.fail_nodes(&pattern)?;
            cluster.save(store)?;
            writeln!(out, "failed nodes: {}", FailurePattern::new(cluster.failed(), cluster.n())?)?;
        }
        Command::Recover { scheme, report, exec } => {
            let mut cluster = load(store)?;
            let ledger = cluster.run_recovery(&exec.options(scheme))?;
            cluster.save(store)?;
            write!(out, "{}", ledger.summary())?;
            if let Some(p) = report {
                emit_csv(&ledger, &p)?;
            }
        }
        Command::Read {
            block,
            file,
            out: dest,
            scheme,
            report,
            exec,
        } => {
            let cluster = load(store)?;
            let opts = exec.options(scheme);
            let bytes = match (block, file) {
                (Some(id), _) => {
                    let (bytes, ledger) = cluster.degraded_read(id, &opts)?;
                    if let Some(p) = report {
                        emit_csv(&ledger, &p)?;
                    }
                    bytes
                }
                (None, Some(f)) => cluster.read_file(f, &opts)?,
                (None, None) => bail!("give --block or --file"),
            };
            match dest {
                Some(p) => std::fs::write(&p, &bytes).with_context(|| format!("writing {}", p.display()))?,
                None => out.write_all(&bytes)?,
            }
        }
        Command::Census {
            n,
            k,
            t,
            budget,
            samples,
            seed,
            list,
            out: dest,
        } => {
            let engine = RecoveryEngine::new(build_code(n, k, CodeKind::Msr, 1)?.into());
            if let Some(samples) = samples {
                writeln!(out, "n,k,t,samples,bad_patterns,bad_fraction,ci_low,ci_high")?;
                for &t in &t {
                    let r = census_sampled(&engine, t, samples, seed)?;
                    writeln!(
                        out,
                        "{},{},{},{},{},{:.6},{:.6},{:.6}",
                        r.n, r.k, r.t, r.samples, r.bad_count, r.bad_fraction, r.ci_low, r.ci_high
                    )?;
                }
            } else {
                let reports = t
                    .iter()
                    .map(|&t| census(&engine, t, budget))
                    .collect::<Result<Vec<_>, _>>()?;
                emit(reports.as_slice(), dest.as_deref(), out)?;
                if list {
                    for r in &reports {
                        for p in &r.bad_patterns {
                            writeln!(out, "bad t={}: {p}", r.t)?;
                        }
                    }
                }
            }
        }
        Command::Ratios { n, k, out: dest } => {
            let table = bandwidth_ratio_table(n, k)?;
            emit(&table, dest.as_deref(), out)?;
        }
        Command::Mttf {
            n,
            k,
            lambda,
            bandwidth,
            capacity,
            scheme,
            monte_carlo,
            seed,
            out: dest,
        } => {
            let mut points = Vec::new();
            for &l in &lambda {
                for &b in &bandwidth {
                    for &c in &capacity {
                        points.push(MarkovParams {
                            n,
                            k,
                            lambda: l,
                            bandwidth: b * BYTES_PER_GBPS,
                            capacity: c * BYTES_PER_TB,
                            scheme: Scheme::Core,
                        });
                    }
                }
            }
            let single = match scheme {
                MttfSchemeArg::Both => None,
                MttfSchemeArg::Core => Some(Scheme::Core),
                MttfSchemeArg::Conventional => Some(Scheme::Conventional),
            };
            match (single, monte_carlo) {
                (None, None) => emit(&mttf_sweep(&points)?, dest.as_deref(), out)?,
                _ => {
                    let schemes = single.map_or(vec![Scheme::Core, Scheme::Conventional], |s| vec![s]);
                    let mut w: Box<dyn Write> = match &dest {
                        Some(p) => Box::new(
                            std::fs::File::create(p).with_context(|| format!("writing {}", p.display()))?,
                        ),
                        None => Box::new(&mut *out),
                    };
                    write!(w, "n,k,lambda_per_year,bandwidth_bytes_per_s,capacity_bytes,scheme,mttf_years")?;
                    if monte_carlo.is_some() {
                        write!(w, ",mc_mean_years,mc_stderr_years")?;
                    }
                    writeln!(w)?;
                    for p in &points {
                        for &s in &schemes {
                            let p = p.with_scheme(s);
                            write!(
                                w,
                                "{n},{k},{},{},{},{s},{:e}",
                                p.lambda,
                                p.bandwidth,
                                p.capacity,
                                mttf(&p)?
                            )?;
                            if let Some(trials) = monte_carlo {
                                let (mean, se) = mttf_monte_carlo(&p, trials, seed)?;
                                write!(w, ",{mean:e},{se:e}")?;
                            }
                            writeln!(w)?;
                        }
                    }
                }
            }
        }
        Command::Info => {
            let cluster = load(store)?;
            let spec = cluster.spec();
            writeln!(
                out,
                "code: ({},{}) {} r={} symbol_size={} strip={} bytes",
                spec.n(),
                spec.k(),
                spec.kind(),
                spec.r(),
                spec.symbol_size(),
                spec.strip_bytes()
            )?;
            writeln!(out, "block size: {} bytes", cluster.block_size())?;
            writeln!(out, "stripes: {}", cluster.stripe_count())?;
            for (i, f) in cluster.files().iter().enumerate() {
                writeln!(out, "file {i}: {} bytes, padding {} bytes, groups {}", f.length, f.padding, f.groups)?;
            }
            let blocks = cluster.blocks();
            let parity = blocks.iter().filter(|b| b.role == BlockRole::Parity).count();
            writeln!(out, "blocks: {} ({} parity)", blocks.len(), parity)?;
            let failed = cluster.failed();
            if failed.is_empty() {
                writeln!(out, "failed nodes: none")?;
            } else {
                writeln!(out, "failed nodes: {}", FailurePattern::new(failed, cluster.n())?)?;
            }
        }
    }
    Ok(())
}
