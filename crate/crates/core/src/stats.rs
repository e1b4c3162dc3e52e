//! Ensemble prior statistics and covariance diagnostics.
//!
//! Prior means use divisor N, covariance blocks use divisor N−1, computed
//! from the same ensemble means. The full (obs+fcst) covariance equals
//! `AᵀA / (N−1)` with `A` the row-centered ensemble matrix; the blocks are
//! slices of that product.

use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::timeseries::WindowLayout;

/// Relative symmetry tolerance for covariance inputs.
pub const SYMMETRY_RTOL: f64 = 1e-12;
/// Eigenvalues above `-EIGEN_CLAMP_RTOL * trace` are treated as round-off
/// negatives and clamped to zero.
pub const EIGEN_CLAMP_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("ensemble needs at least 2 members, got {n}")]
    EnsembleTooSmall { n: usize },
    #[error("ensemble row {row} has width {found}, layout expects {expected}")]
    RowWidthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite ensemble entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: |C - Cᵀ| max deviation {max_dev:e} exceeds tolerance")]
    Asymmetric { max_dev: f64 },
    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("non-numeric cell `{cell}` at row {row} of {path}")]
    NonNumericCell {
        path: String,
        row: usize,
        cell: String,
    },
    #[error("empty matrix file {path}")]
    EmptyMatrix { path: String },
    #[error("ragged matrix file {path}: row {row} has {found} columns, expected {expected}")]
    RaggedMatrix {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// N weekly realizations restricted to a layout's obs+fcst hours, obs first.
#[derive(Debug, Clone)]
pub struct WeeklyEnsemble {
    data: DMatrix<f64>,
    layout: WindowLayout,
}

impl WeeklyEnsemble {
    /// Builds the ensemble from full 168-hour week vectors, restricting each
    /// to the layout's observation hours followed by its forecast hours.
    pub fn from_weeks(weeks: &[Vec<f64>], layout: WindowLayout) -> Result<Self, StatsError> {
        let n = weeks.len();
        if n < 2 {
            return Err(StatsError::EnsembleTooSmall { n });
        }
        let w = layout.width();
        let mut data = DMatrix::zeros(n, w);
        for (i, week) in weeks.iter().enumerate() {
            let (obs, fcst) = crate::timeseries::extract_window(week, &layout).map_err(|_| {
                StatsError::RowWidthMismatch {
                    row: i,
                    expected: crate::timeseries::WEEK_HOURS,
                    found: week.len(),
                }
            })?;
            for (j, v) in obs.iter().chain(fcst.iter()).enumerate() {
                if !v.is_finite() {
                    return Err(StatsError::NonFinite { row: i, col: j });
                }
                data[(i, j)] = *v;
            }
        }
        Ok(Self { data, layout })
    }

    /// Builds the ensemble from rows already restricted to the window
    /// (obs hours first, then forecast hours).
    pub fn from_rows(rows: &[Vec<f64>], layout: WindowLayout) -> Result<Self, StatsError> {
        let n = rows.len();
        if n < 2 {
            return Err(StatsError::EnsembleTooSmall { n });
        }
        let w = layout.width();
        let mut data = DMatrix::zeros(n, w);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != w {
                return Err(StatsError::RowWidthMismatch {
                    row: i,
                    expected: w,
                    found: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(StatsError::NonFinite { row: i, col: j });
                }
                data[(i, j)] = *v;
            }
        }
        Ok(Self { data, layout })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn layout(&self) -> &WindowLayout {
        &self.layout
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Ensemble rows as plain vectors (for report serialization).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.data.row(i).iter().copied().collect())
            .collect()
    }
}

/// Prior mean vectors and covariance blocks of the joint (obs, fcst) window.
#[derive(Debug, Clone)]
pub struct PriorStatistics {
    pub mean_obs: DVector<f64>,
    pub mean_fcst: DVector<f64>,
    pub k_oo: DMatrix<f64>,
    pub k_of: DMatrix<f64>,
    pub k_ff: DMatrix<f64>,
    pub layout: Option<WindowLayout>,
}

impl PriorStatistics {
    pub fn obs_len(&self) -> usize {
        self.mean_obs.len()
    }

    pub fn fcst_len(&self) -> usize {
        self.mean_fcst.len()
    }

    /// Reassembles the full (obs+fcst) covariance from the blocks.
    pub fn full_covariance(&self) -> DMatrix<f64> {
        let no = self.obs_len();
        let nf = self.fcst_len();
        let mut c = DMatrix::zeros(no + nf, no + nf);
        c.view_mut((0, 0), (no, no)).copy_from(&self.k_oo);
        c.view_mut((0, no), (no, nf)).copy_from(&self.k_of);
        c.view_mut((no, 0), (nf, no)).copy_from(&self.k_of.transpose());
        c.view_mut((no, no), (nf, nf)).copy_from(&self.k_ff);
        c
    }
}

/// Componentwise arithmetic mean over ensemble rows, split by the layout.
pub fn ensemble_mean(ens: &WeeklyEnsemble) -> (DVector<f64>, DVector<f64>) {
    let mean = row_mean(ens.data());
    let no = ens.layout().obs_len();
    let nf = ens.layout().fcst_len();
    (
        DVector::from_iterator(no, mean.iter().take(no).copied()),
        DVector::from_iterator(nf, mean.iter().skip(no).take(nf).copied()),
    )
}

/// Sample covariance (divisor N−1) of the rows of `rows`.
pub fn covariance_of_rows(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rows.nrows();
    assert!(n >= 2, "covariance needs at least 2 rows");
    let mean = row_mean(rows);
    let mut centered = rows.clone();
    for i in 0..n {
        for j in 0..rows.ncols() {
            centered[(i, j)] -= mean[j];
        }
    }
    centered.transpose() * centered / (n as f64 - 1.0)
}

/// Prior means and covariance blocks of the ensemble (divisor N−1).
pub fn ensemble_covariance(ens: &WeeklyEnsemble) -> PriorStatistics {
    let no = ens.layout().obs_len();
    let nf = ens.layout().fcst_len();
    let full = covariance_of_rows(ens.data());
    let (mean_obs, mean_fcst) = ensemble_mean(ens);
    PriorStatistics {
        mean_obs,
        mean_fcst,
        k_oo: full.view((0, 0), (no, no)).into(),
        k_of: full.view((0, no), (no, nf)).into(),
        k_ff: full.view((no, no), (nf, nf)).into(),
        layout: Some(*ens.layout()),
    }
}

fn row_mean(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    (0..m.ncols())
        .map(|j| m.column(j).iter().sum::<f64>() / n)
        .collect()
}

/// Eigenvalues of a symmetric matrix, sorted descending. Negative values
/// within round-off of zero (magnitude ≤ 1e-9·trace) are clamped to 0.
pub fn eigenspectrum(c: &DMatrix<f64>) -> Result<Vec<f64>, StatsError> {
    if c.nrows() != c.ncols() {
        return Err(StatsError::NotSquare {
            nrows: c.nrows(),
            ncols: c.ncols(),
        });
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let mut max_dev: f64 = 0.0;
    for i in 0..c.nrows() {
        for j in i + 1..c.ncols() {
            max_dev = max_dev.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if max_dev > SYMMETRY_RTOL * scale {
        return Err(StatsError::Asymmetric { max_dev });
    }
    // symmetrize before factorization to strip accumulation asymmetry
    let sym = (c + c.transpose()) * 0.5;
    let trace: f64 = sym.trace();
    let clamp = EIGEN_CLAMP_RTOL * trace.abs();
    let mut eigs: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    for e in &mut eigs {
        if *e < 0.0 && -*e <= clamp {
            *e = 0.0;
        }
    }
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

/// Fraction of total spectral mass captured by the top `k` eigenvalues.
/// Returns 1 when the total is 0.
pub fn spectral_energy(eigs: &[f64], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let total: f64 = eigs.iter().sum();
    if total == 0.0 {
        return 1.0;
    }
    let top: f64 = eigs.iter().take(k).sum();
    top / total
}

/// Writes a dense matrix as headerless row-major CSV. Shortest round-trip
/// float formatting, so [`import_matrix`] recovers bitwise-equal values.
pub fn export_covariance(c: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<(), StatsError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| StatsError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    for i in 0..c.nrows() {
        let line = (0..c.ncols())
            .map(|j| format!("{}", c[(i, j)]))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}").map_err(|source| StatsError::Io {
            path: path_str.clone(),
            source,
        })?;
    }
    out.flush().map_err(|source| StatsError::Io {
        path: path_str,
        source,
    })?;
    Ok(())
}

/// Reads a dense headerless CSV matrix written by [`export_covariance`].
pub fn import_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>, StatsError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| StatsError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| StatsError::NonNumericCell {
                path: path_str.clone(),
                row: i + 1,
                cell: cell.to_string(),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(StatsError::RaggedMatrix {
                    path: path_str,
                    row: i + 1,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(StatsError::EmptyMatrix { path: path_str });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}
