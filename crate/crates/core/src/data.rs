//! Two-phase samples: observations `(x_i, y_i, delta_i)` split at a known
//! change index `k` into the first phase `1..=k` and the second `k+1..=n`.

use crate::error::{Error, Result};

/// One observation; `y = None` marks a missing response.
#[derive(Debug, Clone)]
pub struct Row {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

/// The two phases of the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    First,
    Second,
}

/// A two-phase dataset with a fixed change index.
///
/// Responses of unobserved rows are stored as an arbitrary finite
/// placeholder (0.0 through [`Dataset::new`]); every estimator ignores them.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f64>, // row-major, n * p
    y: Vec<f64>,
    observed: Vec<bool>,
    p: usize,
    n: usize,
    k: usize,
}

impl Dataset {
    /// Build a dataset from rows; missingness is read off `y.is_none()`.
    pub fn new(p: usize, rows: &[Row], k: usize) -> Result<Self> {
        let n = rows.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut observed = Vec::with_capacity(n);
        for row in rows {
            if row.x.len() != p {
                return Err(Error::InvalidArgument(format!(
                    "row has {} regressors, expected {p}",
                    row.x.len()
                )));
            }
            x.extend_from_slice(&row.x);
            match row.y {
                Some(v) => {
                    y.push(v);
                    observed.push(true);
                }
                None => {
                    y.push(0.0);
                    observed.push(false);
                }
            }
        }
        Self::from_parts(p, x, y, observed, k)
    }

    /// Raw constructor. `y` entries for unobserved rows may hold any finite
    /// placeholder; they never enter an estimate.
    pub fn from_parts(
        p: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        observed: Vec<bool>,
        k: usize,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be at least 1".into()));
        }
        let n = y.len();
        if x.len() != n * p || observed.len() != n {
            return Err(Error::InvalidArgument(
                "x/y/delta lengths are inconsistent".into(),
            ));
        }
        if n < 2 || k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "change index k = {k} must satisfy 1 <= k < n = {n}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "regressors" });
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(Error::NonFinite { context: "responses" });
            }
        }
        Ok(Dataset {
            x,
            y,
            observed,
            p,
            n,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    /// Selection indicator: true iff the response was observed.
    pub fn delta(&self, i: usize) -> bool {
        self.observed[i]
    }

    /// Row indices of a phase.
    pub fn phase_indices(&self, phase: Phase) -> std::ops::Range<usize> {
        match phase {
            Phase::First => 0..self.k,
            Phase::Second => self.k..self.n,
        }
    }

    pub fn phase_len(&self, phase: Phase) -> usize {
        match phase {
            Phase::First => self.k,
            Phase::Second => self.n - self.k,
        }
    }

    /// Number of observed responses in a phase.
    pub fn observed_count(&self, phase: Phase) -> usize {
        self.phase_indices(phase)
            .filter(|&i| self.observed[i])
            .count()
    }

    /// True when every response is observed.
    pub fn fully_observed(&self) -> bool {
        self.observed.iter().all(|&d| d)
    }
}
