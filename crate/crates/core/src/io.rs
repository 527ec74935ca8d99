//! File formats.
//!
//! * Matrices: headerless CSV, one row per line, 17 significant digits.
//! * Covariances: `<name>.csv` plus a sidecar `<name>.json` holding `{"p_t", "p_s"}`.
//! * Sample sets: `<name>.csv` (one sample per row) plus `{"p_t", "p_s", "n", "seed"}`.
//! * Estimates: a directory with `sigma_hat.csv`, `l_hat.csv`, `s_hat.csv`, `diagnostics.json`,
//!   plus `theta_hat.csv` and `gamma_hat.csv` (covariance domain, with sidecars).
//! * Benchmarks: CSV with header `estimator,n,replicate,seed,mse,prediction_loss,converged,error,wall_time_s`;
//!   empty fields mean "not applicable".

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BenchmarkRow;
use crate::rearrange::{Dims, StCovariance};
use crate::solver::{Diagnostics, EstimateDomain, RegParams, RobustKronEstimate};
use crate::synth::SampleSet;

/// Full double precision, 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{}:{}: '{f}': {e}", path.display(), line + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "{}:{}: expected {} fields, found {}",
                    path.display(),
                    line + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no rows", path.display())));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `foo/bar.csv` → `foo/bar.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDescriptor {
    pub p_t: usize,
    pub p_s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub p_t: usize,
    pub p_s: usize,
    pub n: usize,
    pub seed: u64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `path` and its dimension sidecar.
pub fn write_covariance(path: &Path, m: &DMatrix<f64>, dims: Dims) -> Result<()> {
    write_matrix_csv(path, m)?;
    write_json(&sidecar_path(path), &CovarianceDescriptor { p_t: dims.p_t, p_s: dims.p_s })
}

pub fn read_covariance(path: &Path) -> Result<StCovariance> {
    let desc: CovarianceDescriptor = read_json(&sidecar_path(path))?;
    let dims = Dims::new(desc.p_t, desc.p_s)?;
    StCovariance::new(dims, read_matrix_csv(path)?)
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    write_matrix_csv(path, samples.data())?;
    let dims = samples.dims();
    write_json(
        &sidecar_path(path),
        &SampleDescriptor { p_t: dims.p_t, p_s: dims.p_s, n: samples.n(), seed: samples.seed() },
    )
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let desc: SampleDescriptor = read_json(&sidecar_path(path))?;
    let data = read_matrix_csv(path)?;
    if data.nrows() != desc.n {
        return Err(Error::Parse(format!(
            "{}: descriptor says n={}, file has {} rows",
            path.display(),
            desc.n,
            data.nrows()
        )));
    }
    SampleSet::new(Dims::new(desc.p_t, desc.p_s)?, data, desc.seed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub p_t: usize,
    pub p_s: usize,
    pub params: RegParams,
    pub domain: EstimateDomain,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

pub fn write_estimate(dir: &Path, est: &RobustKronEstimate) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_covariance(&dir.join("sigma_hat.csv"), est.sigma_hat.matrix(), est.dims)?;
    write_matrix_csv(&dir.join("l_hat.csv"), &est.l_hat)?;
    write_matrix_csv(&dir.join("s_hat.csv"), &est.s_hat)?;
    write_covariance(&dir.join("theta_hat.csv"), est.theta_hat().matrix(), est.dims)?;
    write_covariance(&dir.join("gamma_hat.csv"), est.gamma_hat().matrix(), est.dims)?;
    let record = EstimateRecord {
        p_t: est.dims.p_t,
        p_s: est.dims.p_s,
        params: est.params,
        domain: est.domain,
        diagnostics: est.diagnostics.clone(),
    };
    write_json(&dir.join("diagnostics.json"), &record)
}

pub const BENCHMARK_HEADER: [&str; 9] =
    ["estimator", "n", "replicate", "seed", "mse", "prediction_loss", "converged", "error", "wall_time_s"];

pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(BENCHMARK_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.estimator.clone(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            fmt_f64(r.mse),
            r.prediction_loss.map(fmt_f64).unwrap_or_default(),
            r.converged.map(|c| c.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
            fmt_f64(r.wall_time_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
