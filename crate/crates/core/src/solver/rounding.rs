//! Rounding of the relaxed selection matrix to a valid binary one.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frontend::SelectionMatrix;

/// Bisection on a threshold until exactly one allowed entry of `column`
/// exceeds it. Ties at the top are broken towards the lower row index.
fn threshold_pick(column: &[f64], allowed: &[bool]) -> Option<usize> {
    let above = |eps: f64| -> Vec<usize> {
        (0..column.len())
            .filter(|&i| allowed[i] && column[i] >= eps)
            .collect()
    };
    if !allowed.iter().any(|&a| a) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match above(mid).len() {
            1 => return above(mid).first().copied(),
            0 => hi = mid,
            _ => lo = mid,
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    // equal maxima cannot be separated by any threshold
    above(lo).first().copied()
}

/// Per-column threshold rounding with row conflicts resolved in favour of the
/// larger relaxed entry; the losing column re-thresholds without that row.
pub fn round_selection(relaxed: &DMatrix<f64>) -> Result<SelectionMatrix> {
    let (n, s) = relaxed.shape();
    if n < s {
        return Err(Error::Config(format!("cannot assign {s} chains to {n} codewords")));
    }
    if let Some(v) = relaxed.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Rounding(format!("entry {v} outside [0, 1]")));
    }
    let columns: Vec<Vec<f64>> = relaxed.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut allowed = vec![vec![true; n]; s];
    let mut holder: Vec<Option<usize>> = vec![None; n];
    let mut pending: Vec<usize> = (0..s).rev().collect();
    while let Some(j) = pending.pop() {
        let row = threshold_pick(&columns[j], &allowed[j])
            .ok_or_else(|| Error::Rounding(format!("column {j} has no row left")))?;
        match holder[row] {
            None => holder[row] = Some(j),
            Some(i) => {
                let j_wins = columns[j][row] > columns[i][row] || (columns[j][row] == columns[i][row] && j < i);
                let loser = if j_wins {
                    holder[row] = Some(j);
                    i
                } else {
                    j
                };
                allowed[loser][row] = false;
                pending.push(loser);
            }
        }
    }
    let mut rows = vec![0; s];
    for (row, h) in holder.iter().enumerate() {
        if let Some(j) = h {
            rows[*j] = row;
        }
    }
    SelectionMatrix::from_assignment(n, &rows)
}
