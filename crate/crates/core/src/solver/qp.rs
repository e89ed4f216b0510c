//! Small dense convex QP: `min 1/2 z^T Q z - b^T z` subject to lower bounds
//! on a subset of coordinates and an optional zero-sum constraint on another
//! subset. Solved by a primal active-set method; `Q` must be positive definite.

use nalgebra::{DMatrix, DVector};

/// Bound and equality structure of the direction problem.
#[derive(Debug, Clone)]
pub struct QpConstraints {
    /// `Some(l)` imposes `z_i >= l`; `l` must be `<= 0` so that `z = 0` is feasible.
    pub lower: Vec<Option<f64>>,
    /// Coordinates whose sum is held at zero.
    pub zero_sum: Vec<usize>,
}

const MAX_ITERS: usize = 500;

pub fn solve(q: &DMatrix<f64>, b: &DVector<f64>, cons: &QpConstraints) -> Option<DVector<f64>> {
    let n = b.len();
    let mut z = DVector::zeros(n);
    let in_sum: Vec<bool> = {
        let mut v = vec![false; n];
        cons.zero_sum.iter().for_each(|&i| v[i] = true);
        v
    };
    // working set: coordinates pinned to their bound
    let mut pinned: Vec<bool> = cons.lower.iter().map(|l| matches!(l, Some(l) if *l == 0.0)).collect();

    for _ in 0..MAX_ITERS {
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        let sum_free: Vec<usize> = free.iter().copied().filter(|&i| in_sum[i]).collect();
        let eq = !sum_free.is_empty();
        let m = free.len() + usize::from(eq);
        let grad = q * &z - b;

        let mut step = DVector::zeros(n);
        let mut nu = 0.0;
        if m > 0 {
            let mut kkt = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (a, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    kkt[(a, c)] = q[(i, j)];
                }
                rhs[a] = -grad[i];
                if eq && in_sum[i] {
                    kkt[(a, m - 1)] = 1.0;
                    kkt[(m - 1, a)] = 1.0;
                }
            }
            let sol = kkt.lu().solve(&rhs)?;
            for (a, &i) in free.iter().enumerate() {
                step[i] = sol[a];
            }
            if eq {
                nu = sol[m - 1];
            }
        }

        let scale = 1.0 + z.amax();
        if step.amax() <= 1e-14 * scale {
            // multipliers of pinned bounds: grad_i + nu [i in sum] = w_i >= 0
            let mut worst = None;
            let mut worst_val = -1e-13 * (1.0 + b.amax());
            for i in (0..n).filter(|&i| pinned[i]) {
                let w = grad[i] + if in_sum[i] { nu } else { 0.0 };
                if w < worst_val {
                    worst_val = w;
                    worst = Some(i);
                }
            }
            match worst {
                Some(i) => pinned[i] = false,
                None => return Some(z),
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut block = None;
        for &i in &free {
            if let Some(l) = cons.lower[i] {
                if step[i] < 0.0 {
                    let t = (l - z[i]) / step[i];
                    if t < alpha {
                        alpha = t.max(0.0);
                        block = Some(i);
                    }
                }
            }
        }
        z.axpy(alpha, &step, 1.0);
        if let Some(i) = block {
            z[i] = cons.lower[i].unwrap_or(z[i]);
            pinned[i] = true;
        }
    }
    None
}
