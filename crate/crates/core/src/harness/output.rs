//! CSV artifact writers. Reals use Rust's shortest round-trip formatting, so
//! identical values give identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::experiment::RunArtifacts;
use crate::resnet::{EllipseDataset, EpochRecord, ProbabilityGrid, VerletNet};

pub fn real(v: f64) -> String {
    format!("{v}")
}

fn to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Writes a CSV file from a header and rows of already-formatted fields.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> io::Result<PathBuf>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// `traces.csv` (when recorded), `metrics.csv`, `summary.csv`, `failures.csv`.
pub fn write_particle_artifacts(art: &RunArtifacts, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let dim = art.config.dim;
    if art.config.traces_enabled() {
        let mut header = vec!["run".to_string(), "agent".into(), "iter".into()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = art.runs.iter().flat_map(|r| {
            r.traces.iter().flat_map(move |(iter, flat)| {
                flat.chunks_exact(dim).enumerate().map(move |(agent, x)| {
                    let mut row = vec![r.run.to_string(), agent.to_string(), iter.to_string()];
                    row.extend(x.iter().map(|&v| real(v)));
                    row
                })
            })
        });
        files.push(write_csv(&dir.join("traces.csv"), &header, rows)?);
    }
    let metrics = art.runs.iter().flat_map(|r| {
        r.metrics
            .iter()
            .map(move |m| vec![r.run.to_string(), m.iter.to_string(), real(m.best), real(m.worst)])
    });
    files.push(write_csv(
        &dir.join("metrics.csv"),
        &["run", "iter", "best_dist", "worst_dist"],
        metrics,
    )?);
    let summary = art
        .summary
        .iter()
        .map(|s| vec![s.iter.to_string(), real(s.median_best), real(s.median_worst)]);
    files.push(write_csv(
        &dir.join("summary.csv"),
        &["iter", "median_best", "median_worst"],
        summary,
    )?);
    let failures = art
        .failures()
        .map(|(run, f)| vec![run.to_string(), f.iteration.to_string(), f.message.clone()]);
    files.push(write_csv(
        &dir.join("failures.csv"),
        &["run", "iteration", "error"],
        failures,
    )?);
    Ok(files)
}

pub fn write_dataset(data: &EllipseDataset, path: &Path) -> io::Result<PathBuf> {
    let rows = data.samples.iter().map(|s| {
        vec![
            real(s.point[0]),
            real(s.point[1]),
            s.label.to_string(),
            s.split.as_str().to_string(),
        ]
    });
    write_csv(path, &["x", "y", "label", "split"], rows)
}

pub fn write_grid(grid: &ProbabilityGrid, path: &Path) -> io::Result<PathBuf> {
    let rows = grid.iter().map(|(x, y, p)| vec![real(x), real(y), real(p)]);
    write_csv(path, &["x", "y", "prob"], rows)
}

pub fn write_loss_curve(curve: &[EpochRecord], path: &Path) -> io::Result<PathBuf> {
    let rows = curve
        .iter()
        .map(|r| vec![r.epoch.to_string(), real(r.train_loss), real(r.test_acc)]);
    write_csv(path, &["epoch", "train_loss", "test_acc"], rows)
}

pub fn write_params(net: &VerletNet, path: &Path) -> io::Result<PathBuf> {
    let rows = net
        .params
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), real(v)]);
    write_csv(path, &["index", "value"], rows)
}

/// Reads a parameter vector written by [`write_params`].
pub fn read_params(path: &Path) -> io::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(to_io)?;
    let mut params = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(to_io)?;
        let bad = || {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: bad row {}", path.display(), k + 2),
            )
        };
        let index: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let value: f64 = record.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if index != k {
            return Err(bad());
        }
        params.push(value);
    }
    Ok(params)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> io::Result<Vec<crate::resnet::Sample>> {
    use crate::resnet::{Sample, Split};
    let mut r = csv::Reader::from_path(path).map_err(to_io)?;
    let mut out = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(to_io)?;
        let bad = || {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: bad row {}", path.display(), k + 2),
            )
        };
        let num = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        let label = match record.get(2) {
            Some("0") => 0,
            Some("1") => 1,
            _ => return Err(bad()),
        };
        let split = match record.get(3) {
            Some("train") => Split::Train,
            Some("test") => Split::Test,
            _ => return Err(bad()),
        };
        out.push(Sample {
            point: [num(0)?, num(1)?],
            label,
            split,
        });
    }
    Ok(out)
}
