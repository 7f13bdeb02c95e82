//! CSV, manifest and plot-data writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::stats::fmt_sig;
use super::HarnessError;
use crate::agent::{AgentConfig, Algorithm, RunMetrics};
use crate::gridworld::GridConfig;
use crate::probe::ProbeSpec;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn run_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("run_{}_seed{seed}.csv", algorithm.name())
}

pub fn aggregate_file_name(algorithm: Algorithm) -> String {
    format!("aggregate_{}.csv", algorithm.name())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Csv { path: path.to_path_buf(), message: e.to_string() }
}

pub fn run_header(probes: &[ProbeSpec]) -> Vec<String> {
    let mut header: Vec<String> = ["episode", "return", "smoothed_return", "loss", "epsilon", "cer_size"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(probes.iter().flat_map(ProbeSpec::columns));
    header
}

pub fn write_run_csv(
    path: &Path,
    metrics: &RunMetrics,
    smoothed: &[f64],
    probes: &[ProbeSpec],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(run_header(probes)).map_err(csv_err(path))?;
    for i in 0..metrics.episodes() {
        let mut row = vec![
            i.to_string(),
            fmt_sig(metrics.returns[i]),
            fmt_sig(smoothed[i]),
            fmt_sig(metrics.losses[i]),
            fmt_sig(metrics.epsilons[i]),
            metrics.cer_sizes[i].to_string(),
        ];
        for pair in &metrics.probes[i] {
            row.extend(pair.iter().map(|&q| fmt_sig(q)));
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_aggregate_csv(
    path: &Path,
    mean: &[f64],
    std: &[f64],
    band: &[f64],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["episode", "mean", "std", "band"]).map_err(csv_err(path))?;
    for i in 0..mean.len() {
        w.write_record([i.to_string(), fmt_sig(mean[i]), fmt_sig(std[i]), fmt_sig(band[i])])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub csv_schema_version: u32,
    pub experiment: u8,
    pub oracle_optimum: f64,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub smoothing_window: usize,
    pub jobs: usize,
    pub total_wall_clock_secs: f64,
    pub grid: GridConfig,
    pub agent: AgentConfig,
    pub probes: Vec<ProbeSpec>,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunEntry {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub status: String,
    pub file: Option<String>,
    pub final_smoothed_return: Option<f64>,
    pub wall_clock_secs: Option<f64>,
    pub error: Option<String>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), HarnessError> {
    let text = toml::to_string(manifest)
        .map_err(|e| HarnessError::Config(format!("cannot serialize manifest: {e}")))?;
    fs::write(path, text).map_err(io_err(path))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err(path))?;
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| HarnessError::Csv {
                    path: path.to_path_buf(),
                    message: format!("not a number: `{v}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Converts the CSVs in `dir` into whitespace-separated `.dat` files in
/// `out`: one curve file per aggregate, plus the per-episode seed mean of
/// every probe column for each algorithm that recorded probes.
pub fn plotdata(dir: &Path, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::new();

    for path in entries.iter().filter(|p| stem_has_prefix(p, "aggregate_")) {
        let alg = stem(path).trim_start_matches("aggregate_").to_string();
        let (_, rows) = read_table(path)?;
        let target = out.join(format!("curve_{alg}.dat"));
        let mut text = String::from("# episode mean lower upper\n");
        for row in &rows {
            let (episode, mean, band) = (row[0], row[1], row[3]);
            text.push_str(&format!(
                "{} {} {} {}\n",
                episode,
                fmt_sig(mean),
                fmt_sig(mean - band),
                fmt_sig(mean + band)
            ));
        }
        fs::write(&target, text).map_err(io_err(&target))?;
        written.push(target);
    }

    let mut algorithms: Vec<String> = entries
        .iter()
        .filter(|p| stem_has_prefix(p, "run_"))
        .filter_map(|p| stem(p).strip_prefix("run_")?.rsplit_once("_seed").map(|(a, _)| a.to_string()))
        .collect();
    algorithms.sort();
    algorithms.dedup();
    for alg in algorithms {
        let prefix = format!("run_{alg}_seed");
        let mut header = Vec::new();
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let mut count = 0usize;
        for path in entries.iter().filter(|p| stem_has_prefix(p, &prefix)) {
            let (h, rows) = read_table(path)?;
            if h.len() <= 6 {
                continue;
            }
            if count == 0 {
                header = h[6..].to_vec();
                sums = rows.iter().map(|r| r[6..].to_vec()).collect();
            } else {
                for (acc, row) in sums.iter_mut().zip(&rows) {
                    for (a, v) in acc.iter_mut().zip(&row[6..]) {
                        *a += v;
                    }
                }
                sums.truncate(rows.len());
            }
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let target = out.join(format!("probes_{alg}.dat"));
        let mut text = format!("# episode {}\n", header.join(" "));
        for (i, acc) in sums.iter().enumerate() {
            text.push_str(&i.to_string());
            for v in acc {
                text.push(' ');
                text.push_str(&fmt_sig(v / count as f64));
            }
            text.push('\n');
        }
        fs::write(&target, text).map_err(io_err(&target))?;
        written.push(target);
    }
    Ok(written)
}

fn stem(path: &Path) -> &str {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("")
}

fn stem_has_prefix(path: &Path, prefix: &str) -> bool {
    stem(path).starts_with(prefix)
}
