//! Wynn's epsilon algorithm for partial-sum sequences.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest difference the table may divide by.
pub const DIFFERENCE_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WynnEstimate {
    pub estimate: f64,
    pub error: f64,
    /// Index of the even column the estimate was taken from.
    pub column: usize,
    /// Last partial sum, unaccelerated.
    pub raw: f64,
}

/// Triangular epsilon table. `columns[k][n]` holds `eps_k^(n)`; column 0 is
/// the input sequence.
#[derive(Debug, Clone)]
pub struct EpsilonTable {
    columns: Vec<Vec<f64>>,
}

impl EpsilonTable {
    /// Builds the full table. An entry that would need a division by a
    /// difference below [`DIFFERENCE_GUARD`] is stored as NaN, and so is
    /// everything built from it.
    pub fn new(partials: &[f64]) -> Result<Self> {
        if partials.len() < 3 {
            return Err(Error::DegenerateSequence(partials.len()));
        }
        let mut columns = vec![partials.to_vec()];
        let zeros = vec![0.0; partials.len() + 1];
        while columns.last().expect("nonempty").len() >= 2 {
            let k = columns.len() - 1;
            let cur = &columns[k];
            // eps_{-1} is identically zero
            let prev = if k == 0 { &zeros } else { &columns[k - 1] };
            let next = (0..cur.len() - 1)
                .map(|n| {
                    let d = cur[n + 1] - cur[n];
                    if d.is_nan() || d.abs() < DIFFERENCE_GUARD {
                        return f64::NAN;
                    }
                    let v = prev[n + 1] + 1.0 / d;
                    if v.is_finite() {
                        v
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            columns.push(next);
        }
        Ok(Self { columns })
    }

    pub fn column(&self, k: usize) -> Option<&[f64]> {
        self.columns.get(k).map(Vec::as_slice)
    }

    /// Number of columns built, counting the input column.
    pub fn depth(&self) -> usize {
        self.columns.len()
    }

    /// Estimate from the even column (up to `max_column`) whose trailing
    /// entries agree best. The error of a column is the sum of the last two
    /// differences along it, or the single last difference when only two
    /// entries are usable. A column with a single entry is compared with the
    /// previous even column. Deep columns of a nearly converged sequence are
    /// dominated by rounding, so the deepest usable column is often not the
    /// most accurate one.
    pub fn estimate(&self, max_column: Option<usize>) -> WynnEstimate {
        let mut top = self.columns.len() - 1;
        if let Some(cap) = max_column {
            top = top.min(cap);
        }
        let mut best: Option<(f64, usize)> = None;
        for k in (2..=top).step_by(2) {
            let col = &self.columns[k];
            let single = || {
                // a one-entry column is compared with the previous even column
                let x = col.first().filter(|x| x.is_finite())?;
                let y = self.columns[k - 2].last().filter(|y| y.is_finite())?;
                (col.len() == 1).then(|| (x - y).abs())
            };
            if let Some(err) = column_error(col).or_else(single) {
                if best.is_none_or(|(e, _)| err < e) {
                    best = Some((err, k));
                }
            }
        }
        let raw = *self.columns[0].last().expect("nonempty");
        match best {
            Some((error, column)) => WynnEstimate {
                estimate: *self.columns[column].last().expect("nonempty"),
                error,
                column,
                raw,
            },
            None => WynnEstimate {
                estimate: raw,
                error: column_error(&self.columns[0]).unwrap_or(f64::INFINITY),
                column: 0,
                raw,
            },
        }
    }
}

fn column_error(col: &[f64]) -> Option<f64> {
    let n = col.len();
    if n < 2 || !col[n - 1].is_finite() || !col[n - 2].is_finite() {
        return None;
    }
    let d1 = (col[n - 1] - col[n - 2]).abs();
    match n.checked_sub(3).map(|i| col[i]) {
        Some(x) if x.is_finite() => Some(d1 + (col[n - 2] - x).abs()),
        _ => Some(d1),
    }
}

/// Accelerates a sequence of partial sums.
pub fn wynn_epsilon(partials: &[f64]) -> Result<WynnEstimate> {
    Ok(EpsilonTable::new(partials)?.estimate(None))
}

/// Like [`wynn_epsilon`] with the even column capped at `max_column`.
pub fn wynn_epsilon_capped(partials: &[f64], max_column: usize) -> Result<WynnEstimate> {
    Ok(EpsilonTable::new(partials)?.estimate(Some(max_column)))
}
