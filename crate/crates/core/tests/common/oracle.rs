//! Independent primal solver for the surrogate subproblems: an augmented
//! Lagrangian outer loop whose inner problems are solved by accelerated
//! projected gradient over the coordinate boxes. Shares no code with the
//! library's dual method; only the problem data are read.

use shc_core::solver::dual::{CouplingKind, Domain, SurrogateQp};

pub struct Primal {
    pub x: Vec<f64>,
    /// `cost . x`, or the largest surrogate value for the epigraph form.
    pub value: f64,
    pub violation: f64,
}

struct Problem<'a> {
    qp: &'a SurrogateQp,
    /// Minimize `max_k f_k` through an extra variable `t` with `f_k <= t`.
    epigraph: bool,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.qp.center.len()
    }

    fn project(&self, z: &mut [f64]) {
        for (t, d) in self.qp.domains.iter().enumerate() {
            z[t] = match *d {
                Domain::Interval(lo, hi) => z[t].clamp(lo, hi),
                Domain::Free => z[t],
                Domain::Fixed => self.qp.center[t],
            };
        }
    }

    fn f(&self, k: usize, z: &[f64]) -> (f64, Vec<f64>) {
        let qp = self.qp;
        let n = self.n();
        let mut value = qp.offsets[k];
        let mut grad = vec![0.0; z.len()];
        for t in 0..n {
            let d = z[t] - qp.center[t];
            value += qp.kappa[k][t] * d + qp.tau[k] * d * d;
            grad[t] = qp.kappa[k][t] + 2.0 * qp.tau[k] * d;
        }
        if self.epigraph {
            value -= z[n];
            grad[n] = -1.0;
        }
        (value, grad)
    }

    fn objective(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n();
        let mut grad = vec![0.0; z.len()];
        if self.epigraph {
            grad[n] = 1.0;
            return (z[n], grad);
        }
        let value = (0..n).map(|t| self.qp.cost[t] * z[t]).sum();
        grad[..n].copy_from_slice(&self.qp.cost);
        (value, grad)
    }

    /// Inequality values `g <= 0` followed by equality values `h = 0`, with gradients.
    fn constraints(&self, z: &[f64]) -> (Vec<(f64, Vec<f64>)>, Vec<(f64, Vec<f64>)>) {
        let mut ineq: Vec<(f64, Vec<f64>)> = (0..self.qp.offsets.len()).map(|k| self.f(k, z)).collect();
        let mut eq = Vec::new();
        for c in &self.qp.couplings {
            let mut grad = vec![0.0; z.len()];
            let mut value = -c.rhs;
            for &t in &c.coords {
                value += z[t];
                grad[t] = 1.0;
            }
            match c.kind {
                CouplingKind::AtMost => ineq.push((value, grad)),
                CouplingKind::Equal => eq.push((value, grad)),
            }
        }
        (ineq, eq)
    }

    fn violation(&self, z: &[f64]) -> f64 {
        let (ineq, eq) = self.constraints(z);
        let a = ineq.iter().map(|(g, _)| g.max(0.0)).fold(0.0, f64::max);
        let b = eq.iter().map(|(h, _)| h.abs()).fold(0.0, f64::max);
        a.max(b)
    }

    /// Augmented Lagrangian value; its gradient is written into `grad`.
    fn augmented(&self, z: &[f64], mu: &[f64], nu: &[f64], rho: f64, grad: &mut [f64]) -> f64 {
        let (mut value, g0) = self.objective(z);
        grad.copy_from_slice(&g0);
        let (ineq, eq) = self.constraints(z);
        for ((g, dg), m) in ineq.iter().zip(mu) {
            let s = (m + rho * g).max(0.0);
            value += (s * s - m * m) / (2.0 * rho);
            if s > 0.0 {
                grad.iter_mut().zip(dg).for_each(|(a, b)| *a += s * b);
            }
        }
        for ((h, dh), v) in eq.iter().zip(nu) {
            value += v * h + 0.5 * rho * h * h;
            grad.iter_mut().zip(dh).for_each(|(a, b)| *a += (v + rho * h) * b);
        }
        value
    }

    /// Accelerated projected gradient with backtracking and adaptive restart,
    /// stopped when the gradient mapping falls below `tol`. Both tests use
    /// gradients only, so they stay meaningful below the rounding level of
    /// the function values.
    fn inner(&self, start: &[f64], mu: &[f64], nu: &[f64], rho: f64, tol: f64) -> Vec<f64> {
        let dim = start.len();
        let mut x = start.to_vec();
        self.project(&mut x);
        let mut y = x.clone();
        let mut gy = vec![0.0; dim];
        let mut gc = vec![0.0; dim];
        let mut cand = vec![0.0; dim];
        let mut momentum = 1.0f64;
        let mut lip = 1.0f64;
        for _ in 0..20_000 {
            self.augmented(&y, mu, nu, rho, &mut gy);
            let sq = loop {
                for t in 0..dim {
                    cand[t] = y[t] - gy[t] / lip;
                }
                self.project(&mut cand);
                self.augmented(&cand, mu, nu, rho, &mut gc);
                let sq: f64 = cand.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                let dg: f64 = gc.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum();
                if dg <= lip * lip * sq {
                    break sq;
                }
                lip *= 2.0;
            };
            let mapping = lip * sq.sqrt();
            // restart when the step opposes the momentum direction
            let opposed: f64 = (0..dim).map(|t| (y[t] - cand[t]) * (cand[t] - x[t])).sum();
            if opposed > 0.0 {
                momentum = 1.0;
            }
            let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / m_next;
            for t in 0..dim {
                y[t] = cand[t] + beta * (cand[t] - x[t]);
            }
            x.copy_from_slice(&cand);
            momentum = m_next;
            lip *= 0.95;
            if mapping < tol {
                break;
            }
        }
        x
    }
}

fn solve(problem: &Problem<'_>, start: Vec<f64>) -> Primal {
    let (ineq, eq) = problem.constraints(&start);
    let mut mu = vec![0.0; ineq.len()];
    let mut nu = vec![0.0; eq.len()];
    let mut rho = 10.0;
    let mut tol = 1e-4;
    let mut x = start;
    let mut last_violation = f64::INFINITY;
    for _ in 0..60 {
        x = problem.inner(&x, &mu, &nu, rho, tol);
        let (ineq, eq) = problem.constraints(&x);
        mu.iter_mut().zip(&ineq).for_each(|(m, (g, _))| *m = (*m + rho * g).max(0.0));
        nu.iter_mut().zip(&eq).for_each(|(v, (h, _))| *v += rho * h);
        let violation = problem.violation(&x);
        if violation < 1e-11 && tol <= 1e-10 {
            break;
        }
        if violation > 0.25 * last_violation {
            rho = (rho * 4.0).min(1e4);
        }
        tol = (tol * 0.1).max(1e-10);
        last_violation = violation;
    }
    let violation = problem.violation(&x);
    let value = problem.objective(&x).0;
    x.truncate(problem.n());
    Primal { x, value, violation }
}

/// `min cost . x` subject to every surrogate `f_k <= 0` and the couplings.
pub fn objective_oracle(qp: &SurrogateQp) -> Primal {
    solve(&Problem { qp, epigraph: false }, qp.center.clone())
}

/// `min max_k f_k` subject to the couplings.
pub fn feasibility_oracle(qp: &SurrogateQp) -> Primal {
    let mut start = qp.center.clone();
    start.push(qp.max_surrogate(&qp.center));
    solve(&Problem { qp, epigraph: true }, start)
}
