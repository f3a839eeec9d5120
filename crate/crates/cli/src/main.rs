use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ascc_core::checks::validate_scenario;
use ascc_core::distortion::{fit_logistic, synthetic_table};
use ascc_core::driver::{weight_vectors, SweepPoint};
use ascc_core::link_sim::{generate_fit_dataset, linspace, read_samples, simulate_link, write_samples};
use ascc_core::report::write_csv;
use ascc_core::{jrpb_solve, sweep_power, sweep_weights, zf_waterfilling_baseline, DistortionTable, LogisticRow, Scenario, TaskKind};

#[derive(Parser)]
#[command(name = "ascc", version, about = "Joint rate, power and beamforming for mixed data/semantic MISO downlinks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Data,
    Semantic,
}

impl From<Kind> for TaskKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Data => TaskKind::Data,
            Kind::Semantic => TaskKind::Semantic,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize rates, powers and beams for a scenario.
    Solve {
        scenario: PathBuf,
        /// CSV destination; without it the CSV goes to stdout and the summary to stderr.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve over a grid of power budgets.
    SweepPower {
        scenario: PathBuf,
        /// `start:stop:count`, in watts.
        #[arg(long)]
        grid: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve over a grid of first-user weights; the rest share the remainder.
    SweepWeights {
        scenario: PathBuf,
        /// `start:stop:count` or a comma-separated list, within [0, 1].
        #[arg(long)]
        grid: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Zero-forcing beams with waterfilling powers.
    Baseline {
        scenario: PathBuf,
        /// Fixed channel rates, one per user; omitted means rates are optimized.
        #[arg(long, value_delimiter = ',')]
        rc: Option<Vec<f64>>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fit a logistic row to `log10_ber,distortion` samples.
    Fit {
        samples: PathBuf,
        #[arg(long)]
        floor: f64,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Source rate the fitted row belongs to.
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Insert the row into this table file (created if missing).
        #[arg(long)]
        append: Option<PathBuf>,
    },
    /// Run the invariant checks on a scenario.
    Validate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte-Carlo packet simulation of the finite-blocklength link.
    Simulate {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        rc: f64,
        #[arg(long)]
        blocklength: u32,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a logistic curve with Gaussian noise, as fitting input.
    GenSamples {
        #[arg(long)]
        floor: f64,
        #[arg(long)]
        span: f64,
        #[arg(long)]
        slope: f64,
        #[arg(long, allow_negative_numbers = true)]
        midpoint: f64,
        /// log10-BER grid `start:stop:count`.
        #[arg(long, default_value = "-9:-1:41", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in synthetic distortion tables.
    SynthTable {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, n] => {
            let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
            let n: usize = n.trim().parse()?;
            if n == 0 {
                bail!("grid needs at least one point");
            }
            Ok(linspace(a, b, n))
        }
        [_] => spec
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value {v:?}")))
            .collect(),
        _ => bail!("grid must be start:stop:count or a comma-separated list"),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

/// Writes CSV to `out`, or to stdout when absent. The summary goes wherever
/// the CSV does not.
fn emit(k: usize, points: &[SweepPoint], out: Option<&Path>) -> Result<()> {
    let summary: String = points
        .iter()
        .map(|p| match &p.outcome {
            Ok(r) => r.summary(),
            Err(e) => format!("P_max = {}, weights = {:?}: failed: {e}\n", p.p_max, p.weights),
        })
        .collect();
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(BufWriter::new(f), k, points)?;
            let mut so = io::stdout().lock();
            write!(so, "{summary}")?;
            writeln!(so, "CSV written to {}", path.display())?;
        }
        None => {
            write_csv(io::stdout().lock(), k, points)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Solve { scenario, out } => {
            let scn = load(&scenario)?;
            let report = jrpb_solve(&scn)?;
            report.revalidate(&scn)?;
            emit(scn.system.n_users(), &[report.into()], out.as_deref())?;
        }
        Cmd::SweepPower { scenario, grid, out } => {
            let scn = load(&scenario)?;
            let points = sweep_power(&scn, &parse_range(&grid)?)?;
            emit(scn.system.n_users(), &points, out.as_deref())?;
        }
        Cmd::SweepWeights { scenario, grid, out } => {
            let scn = load(&scenario)?;
            let weights = weight_vectors(scn.system.weights(), &parse_range(&grid)?)?;
            let points = sweep_weights(&scn, &weights)?;
            emit(scn.system.n_users(), &points, out.as_deref())?;
        }
        Cmd::Baseline { scenario, rc, out } => {
            let scn = load(&scenario)?;
            let report = zf_waterfilling_baseline(&scn, rc.as_deref())?;
            emit(scn.system.n_users(), &[report.into()], out.as_deref())?;
        }
        Cmd::Fit {
            samples,
            floor,
            kind,
            rate,
            append,
        } => {
            let file = File::open(&samples).with_context(|| format!("opening {}", samples.display()))?;
            let pts: Vec<(f64, f64)> = read_samples(file)?.iter().map(|s| (s.log10_ber, s.distortion)).collect();
            let fit = fit_logistic(&pts, floor)?;
            let row = fit.into_row(rate, floor);
            writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&row)?)?;
            writeln!(io::stdout().lock(), "mse {:.3e} after {} evaluations", fit.mse, fit.evaluations)?;
            if let Some(path) = append {
                let table = append_row(&path, kind.into(), row)?;
                for w in table.warnings() {
                    eprintln!("warning: {w}");
                }
                writeln!(io::stdout().lock(), "table {} now has {} rows", path.display(), table.rows().len())?;
            }
        }
        Cmd::Validate { scenario, seed } => {
            let scn = load(&scenario)?;
            let results = validate_scenario(&scn, seed.unwrap_or(scn.solver.seed))?;
            let mut ok = true;
            for r in &results {
                writeln!(io::stdout().lock(), "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
                ok &= r.passed;
            }
            return Ok(ok);
        }
        Cmd::Simulate {
            gamma,
            rc,
            blocklength,
            packets,
            seed,
        } => {
            let run = simulate_link(gamma, rc, blocklength, packets, seed, None)?;
            writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&run)?)?;
        }
        Cmd::GenSamples {
            floor,
            span,
            slope,
            midpoint,
            grid,
            sigma,
            seed,
            out,
        } => {
            let row = LogisticRow {
                rate: 0.0,
                floor,
                span,
                slope,
                midpoint,
            };
            let samples = generate_fit_dataset(&row, &parse_range(&grid)?, sigma, seed)?;
            let mut buf = Vec::new();
            write_samples(&samples, &mut buf)?;
            write_text(out.as_deref(), std::str::from_utf8(&buf)?)?;
        }
        Cmd::SynthTable { kind, rows, out } => {
            let table = synthetic_table(kind.into(), rows)?;
            write_text(out.as_deref(), &(table.to_json()? + "\n"))?;
        }
    }
    Ok(true)
}

fn append_row(path: &Path, kind: TaskKind, row: LogisticRow) -> Result<DistortionTable> {
    let mut rows: Vec<LogisticRow> = if path.exists() {
        // read the rows directly: a pending one-row file is not a valid table yet
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let file_kind: TaskKind = serde_json::from_value(v["kind"].clone()).context("table kind")?;
        if file_kind != kind {
            bail!("{} holds a {file_kind} table, not {kind}", path.display());
        }
        serde_json::from_value(v["rows"].clone()).context("table rows")?
    } else {
        Vec::new()
    };
    if rows.iter().any(|r| r.rate == row.rate) {
        bail!("table already has a row at rate {}", row.rate);
    }
    rows.push(row);
    rows.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    if rows.len() < 2 {
        // a table needs two rows; keep the first one pending on disk
        std::fs::write(path, serde_json::to_string_pretty(&serde_json::json!({"kind": kind, "rows": rows}))? + "\n")?;
        bail!("row saved; a table needs at least two rows before it can be used");
    }
    let table = DistortionTable::new(kind, rows)?;
    std::fs::write(path, table.to_json()? + "\n")?;
    Ok(table)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
