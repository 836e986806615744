//! Whole runs: data loading, the round loop and CSV metrics.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::harness::config::ExperimentConfig;
use crate::harness::mnist::load_mnist;
use crate::harness::partition::digits_for;
use crate::harness::pipeline::FlState;
use crate::learning::{evaluate, Dataset};
use crate::{Error, Result};

/// One CSV line. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub round: u64,
    pub method: String,
    pub seed: u64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub wall_time_seconds: f64,
}

/// Loads MNIST and restricts both splits to the digits the clients use,
/// keeping at most the configured number of samples per digit.
pub fn load_data(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let (train, test) = load_mnist(&config.mnist_dir)?;
    let digits = digits_for(config.clients)?;
    let limit = |d: Dataset, per: Option<usize>| match per {
        Some(n) => d.take_per_digit(n),
        None => d,
    };
    Ok((
        limit(train.filter_digits(&digits), config.train_per_digit),
        limit(test.filter_digits(&digits), config.test_per_digit),
    ))
}

/// Runs `config.rounds` rounds on in-memory data, evaluating after each.
pub fn run_rounds(config: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<Vec<MetricsRow>> {
    let mut state = FlState::new(config, train)?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.rounds as usize);
    for _ in 0..config.rounds {
        let outcome = state.step()?;
        let (acc, loss) = evaluate(&state.model, &state.theta, test)?;
        let wall = if config.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        log::info!(
            "{} seed {} round {}: accuracy {acc:.4}, loss {loss:.4}",
            config.method,
            config.seed,
            outcome.round
        );
        rows.push(MetricsRow {
            round: outcome.round,
            method: config.method.to_string(),
            seed: config.seed,
            test_accuracy: acc,
            test_loss: loss,
            wall_time_seconds: wall,
        });
    }
    Ok(rows)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_owned(),
            source,
        })?;
    }
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Loads data, runs every round and writes the CSV to `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let (train, test) = load_data(config)?;
    let rows = run_rounds(config, &train, &test)?;
    write_metrics(&config.output, &rows)?;
    Ok(rows)
}

/// Repeats [`run_experiment`] for each seed. Output files get a `-seed<N>`
/// suffix before the extension.
pub fn sweep(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<MetricsRow>> {
    let mut all = Vec::new();
    for &seed in seeds {
        let cfg = ExperimentConfig {
            seed,
            output: seeded_output(&config.output, seed),
            ..config.clone()
        };
        all.extend(run_experiment(&cfg)?);
    }
    Ok(all)
}

fn seeded_output(path: &Path, seed: u64) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-seed{seed}"),
    };
    path.with_file_name(name)
}
