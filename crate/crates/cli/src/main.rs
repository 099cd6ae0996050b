//! Command-line front end for `kme-recal`.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on numerical
//! failures (factorization, degenerate bandwidth heuristics).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use kme_recal::discrete_lab::run_property_suite;
use kme_recal::harness::{
    empiricalize, evaluate, synth_bimodal, EvalConfig, EvaluationReport, GaussianBaseline, PitRecalibrator,
    PredictionRecord, DEFAULT_GRID_SIZE, DEFAULT_SYNTH_N,
};
use kme_recal::{pit_values, CalibrationMap, EmpiricalDistribution, KernelConfig};

const MAP_CONFIG_FILE: &str = "map.json";
const MAP_DATA_FILE: &str = "calibration.jsonl";

#[derive(Parser)]
#[command(
    name = "kme-recal",
    version,
    about = "Kernel-embedding recalibration of probabilistic regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bandwidth {
    Median,
    Explicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ckme,
    Pit,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the bimodal synthetic dataset as `x,y` CSV.
    Synth {
        #[arg(long, default_value_t = DEFAULT_SYNTH_N)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the Gaussian baseline on `train` and predict every row of `data`.
    Baseline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a calibration map and store what is needed to re-fit it.
    Fit {
        #[arg(long)]
        cal: PathBuf,
        #[arg(long, default_value_t = kme_recal::kernels::DEFAULT_RIDGE)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Bandwidth::Median)]
        bandwidth: Bandwidth,
        /// EDK scale, required with `--bandwidth explicit`.
        #[arg(long)]
        edk_bandwidth_sq: Option<f64>,
        /// Laplace length scale, required with `--bandwidth explicit`.
        #[arg(long)]
        target_bandwidth: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid_size: usize,
        #[arg(long)]
        map_out: PathBuf,
    },
    /// Recalibrate predictions with a stored map.
    Apply {
        #[arg(long)]
        map: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Ckme)]
        method: Method,
    },
    /// Mean CRPS plus SKCE and PIT/KS calibration tests.
    Evaluate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        n_null: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report of a reference run for relative CRPS.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid_size: usize,
        /// Subsample at most this many records for the SKCE test.
        #[arg(long)]
        skce_max_n: Option<usize>,
        /// Per-record CRPS table.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact discrete-world property checks.
    Lab {
        #[arg(long, default_value_t = 50)]
        worlds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Contents of `map.json`.
#[derive(Debug, Serialize, Deserialize)]
struct StoredMap {
    kernel: KernelConfig,
    grid_size: usize,
    seed: u64,
    n: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct XyRow {
    x: f64,
    y: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .filter_map(|c| c.downcast_ref::<kme_recal::Error>())
                .any(kme_recal::Error::is_numerical);
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { n, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<XyRow> = synth_bimodal(n, &mut rng)
                .into_iter()
                .map(|(x, y)| XyRow { x, y })
                .collect();
            write_csv(&out, &rows)
        }
        Command::Baseline { train, data, out } => {
            let train: Vec<(f64, f64)> = read_csv(&train)?.into_iter().map(|r| (r.x, r.y)).collect();
            let model = GaussianBaseline::fit(&train)?;
            let records: Vec<PredictionRecord> =
                read_csv(&data)?.into_iter().map(|r| model.predict(r.x, r.y)).collect();
            write_jsonl(&out, &records)
        }
        Command::Fit {
            cal,
            lambda,
            bandwidth,
            edk_bandwidth_sq,
            target_bandwidth,
            seed,
            grid_size,
            map_out,
        } => {
            let records = read_jsonl(&cal)?;
            let kernel = match bandwidth {
                Bandwidth::Median => KernelConfig::median_heuristic(lambda)?,
                Bandwidth::Explicit => {
                    let (Some(s), Some(t)) = (edk_bandwidth_sq, target_bandwidth) else {
                        bail!("--bandwidth explicit needs --edk-bandwidth-sq and --target-bandwidth");
                    };
                    KernelConfig::explicit(s, t, lambda)?
                }
            };
            let (dists, ys) = to_dists(&records, grid_size)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = CalibrationMap::fit(dists, ys, &kernel, &mut rng)?;
            fs::create_dir_all(&map_out).with_context(|| format!("creating {}", map_out.display()))?;
            write_jsonl(&map_out.join(MAP_DATA_FILE), &records)?;
            let stored = StoredMap {
                kernel: *map.config(),
                grid_size,
                seed,
                n: map.len(),
            };
            write_json(&map_out.join(MAP_CONFIG_FILE), &stored)
        }
        Command::Apply {
            map,
            input,
            out,
            method,
        } => {
            let stored: StoredMap = read_json(&map.join(MAP_CONFIG_FILE))?;
            let cal = read_jsonl(&map.join(MAP_DATA_FILE))?;
            let (cal_dists, cal_y) = to_dists(&cal, stored.grid_size)?;
            let records = read_jsonl(&input)?;
            let (dists, _) = to_dists(&records, stored.grid_size)?;
            let recalibrated: Vec<EmpiricalDistribution> = match method {
                Method::Ckme => {
                    let mut rng = ChaCha8Rng::seed_from_u64(stored.seed);
                    CalibrationMap::fit(cal_dists, cal_y, &stored.kernel, &mut rng)?.recalibrate_batch(&dists)?
                }
                Method::Pit => {
                    let r = PitRecalibrator::fit(&pit_values(&cal_dists, &cal_y)?)?;
                    dists.iter().map(|q| r.apply(q)).collect()
                }
            };
            let out_records: Vec<PredictionRecord> = records
                .iter()
                .zip(&recalibrated)
                .map(|(r, d)| PredictionRecord::from_distribution(r.y, d, r.x.clone()))
                .collect();
            write_jsonl(&out, &out_records)
        }
        Command::Evaluate {
            input,
            alpha,
            n_null,
            seed,
            reference,
            grid_size,
            skce_max_n,
            scores,
            out,
        } => {
            let records = read_jsonl(&input)?;
            let (dists, ys) = to_dists(&records, grid_size)?;
            let reference_crps = match reference {
                Some(path) => Some(read_json::<EvaluationReport>(&path)?.mean_crps),
                None => None,
            };
            let config = EvalConfig {
                alpha,
                n_null,
                seed,
                skce_max_n,
                reference_crps,
            };
            let report = evaluate(&dists, &ys, &config)?;
            if let Some(path) = scores {
                #[derive(Serialize)]
                struct ScoreRow {
                    index: usize,
                    y: f64,
                    crps: f64,
                }
                let rows = dists
                    .iter()
                    .zip(&ys)
                    .enumerate()
                    .map(|(index, (q, &y))| {
                        Ok(ScoreRow {
                            index,
                            y,
                            crps: q.crps(y)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                write_csv(&path, &rows)?;
            }
            println!(
                "mean_crps={:.6} skce_p={:.4} ks_p={:.4}",
                report.mean_crps, report.skce.p_value, report.ks.p_value
            );
            write_json(&out, &report)
        }
        Command::Lab { worlds, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let summary = run_property_suite(worlds, &mut rng)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if !summary.passed() {
                bail!("{} property check(s) failed", summary.failures.len());
            }
            Ok(())
        }
    }
}

fn to_dists(records: &[PredictionRecord], grid_size: usize) -> Result<(Vec<EmpiricalDistribution>, Vec<f64>)> {
    let mut dists = Vec::with_capacity(records.len());
    let mut ys = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        r.validate().with_context(|| format!("record {}", i + 1))?;
        dists.push(empiricalize(&r.pred, grid_size).with_context(|| format!("record {}", i + 1))?);
        ys.push(r.y);
    }
    Ok((dists, ys))
}

fn read_jsonl(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        records.push(rec);
    }
    Ok(records)
}

fn write_jsonl(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<Vec<XyRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    reader
        .deserialize()
        .map(|r| r.with_context(|| format!("reading {}", path.display())))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
