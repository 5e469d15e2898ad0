//! Ordered records produced by the engine: trajectories (per round trip) and
//! spectra (per detuning).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::Plane;

/// Table of metric rows keyed by a sweep variable (`tau` or `alpha`).
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    /// Column names; the first column is the sweep variable.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Series {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn sweep_name(&self) -> &str {
        &self.columns[0]
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Analysis(format!("no column named `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }
}

/// Intensity image captured during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub plane: Plane,
    pub intensity: Array2<f64>,
}

/// Result of a pulsed run: one row per round trip `tau = 1..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub series: Series,
    /// Metrics of the injected state at `tau = 0`.
    pub initial: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// Result of a steady-state scan: one row per detuning.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub series: Series,
    /// `(alpha, relative residual)` from full-field re-checks.
    pub verified: Vec<(f64, f64)>,
    pub snapshots: Vec<Snapshot>,
}
