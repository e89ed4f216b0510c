//! Lagrange dual solution of the convex surrogate subproblems.
//!
//! Both subproblems share one structure over real coordinates `x`:
//!
//! ```text
//! f_k(x) = offset_k + kappa_k . (x - x0) + tau_k |x - x0|^2
//! ```
//!
//! with per-coordinate domains (interval, free or fixed) and a handful of
//! linear coupling constraints `sum_{t in set} x_t (<= | =) rhs`. Dualizing the
//! rate and coupling constraints leaves a Lagrangian that is separable per
//! coordinate with the shared quadratic weight `a = sum_k lambda_k tau_k`, so
//! for fixed multipliers the minimizer is a projected scalar formula.
//!
//! The dual function is concave and piecewise quadratic. The default method is
//! a projected Newton ascent using its generalized Hessian
//! `-(1/2a) G_F G_F^T`, where `G` stacks the constraint gradients at the
//! minimizer restricted to coordinates strictly inside their domain. Plain
//! projected subgradient ascent is available as an alternative.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{self, QpConstraints};

/// Feasible set of one real coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval(f64, f64),
    Free,
    /// Pinned to the expansion point.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingKind {
    AtMost,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub coords: Vec<usize>,
    pub kind: CouplingKind,
    pub rhs: f64,
}

/// Convex quadratic surrogate problem over real coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateQp {
    pub center: Vec<f64>,
    pub domains: Vec<Domain>,
    pub offsets: Vec<f64>,
    pub kappa: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// Linear objective weights, used in objective mode only.
    pub cost: Vec<f64>,
    pub couplings: Vec<Coupling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Minimize `cost . x` subject to `f_k <= 0`.
    Objective,
    /// Minimize `max_k f_k`.
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMethod {
    Newton,
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualOptions {
    pub method: DualMethod,
    pub tolerance: f64,
    /// Accepted residual when no further ascent is numerically possible.
    pub stall_tolerance: f64,
    /// Newton regularization per unit of dual gradient norm.
    pub damping: f64,
    pub max_iterations: usize,
    /// Initial step of the subgradient method, scaled by `1/sqrt(t+1)`.
    pub subgradient_step: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            method: DualMethod::Newton,
            tolerance: 1e-9,
            stall_tolerance: 1e-6,
            damping: 1e-2,
            max_iterations: 500,
            subgradient_step: 1.0,
        }
    }
}

impl DualOptions {
    pub fn subgradient() -> Self {
        Self {
            method: DualMethod::Subgradient,
            tolerance: 1e-7,
            max_iterations: 5000,
            ..Self::default()
        }
    }
}

/// Multipliers: one per rate constraint, then one per coupling constraint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DualState {
    pub rate_multipliers: Vec<f64>,
    pub coupling_multipliers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub x: Vec<f64>,
    pub dual: DualState,
    /// Objective value (`cost . x`) or the max surrogate value in feasibility mode.
    pub value: f64,
    pub max_violation: f64,
    pub iterations: usize,
    /// Closed-form primal minimizations performed.
    pub evaluations: usize,
    pub hessian_builds: usize,
}

#[derive(Debug, Clone)]
pub struct DualFailure {
    pub iterations: usize,
    pub residual: f64,
    pub best: Vec<f64>,
}

impl SurrogateQp {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn surrogate(&self, k: usize, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for ((xi, ci), ki) in x.iter().zip(&self.center).zip(&self.kappa[k]) {
            let d = xi - ci;
            lin += ki * d;
            quad += d * d;
        }
        self.offsets[k] + lin + self.tau[k] * quad
    }

    pub fn coupling_residual(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.couplings[i];
        c.coords.iter().map(|&t| x[t]).sum::<f64>() - c.rhs
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of the coupling constraints and domains.
    pub fn coupling_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, c) in self.couplings.iter().enumerate() {
            let r = self.coupling_residual(i, x);
            worst = worst.max(match c.kind {
                CouplingKind::AtMost => r.max(0.0),
                CouplingKind::Equal => r.abs(),
            });
        }
        for ((xi, d), ci) in x.iter().zip(&self.domains).zip(&self.center) {
            worst = worst.max(match *d {
                Domain::Interval(lo, hi) => (lo - xi).max(xi - hi).max(0.0),
                Domain::Free => 0.0,
                Domain::Fixed => (xi - ci).abs(),
            });
        }
        worst
    }

    pub fn max_surrogate(&self, x: &[f64]) -> f64 {
        (0..self.constraint_count())
            .map(|k| self.surrogate(k, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) {
        let n = self.dim();
        assert_eq!(self.domains.len(), n);
        assert_eq!(self.cost.len(), n);
        assert_eq!(self.kappa.len(), self.offsets.len());
        assert_eq!(self.tau.len(), self.offsets.len());
        assert!(self.kappa.iter().all(|k| k.len() == n));
        assert!(self.tau.iter().all(|&t| t > 0.0));
    }
}

/// Lagrangian minimizer and derived quantities at one multiplier vector.
struct Evaluation {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    quad_weight: f64,
    /// Coordinates strictly inside their domain.
    interior: Vec<bool>,
}

struct Dual<'a> {
    qp: &'a SurrogateQp,
    mode: Mode,
    members: Vec<Vec<usize>>,
    evaluations: Cell<usize>,
    hessian_builds: Cell<usize>,
}

impl<'a> Dual<'a> {
    fn new(qp: &'a SurrogateQp, mode: Mode) -> Self {
        let mut members = vec![Vec::new(); qp.dim()];
        for (i, c) in qp.couplings.iter().enumerate() {
            for &t in &c.coords {
                members[t].push(i);
            }
        }
        Self {
            qp,
            mode,
            members,
            evaluations: Cell::new(0),
            hessian_builds: Cell::new(0),
        }
    }

    fn k(&self) -> usize {
        self.qp.constraint_count()
    }

    fn len(&self) -> usize {
        self.k() + self.qp.couplings.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Option<Evaluation> {
        self.evaluations.set(self.evaluations.get() + 1);
        let qp = self.qp;
        let k = self.k();
        let lambda = &theta[..k];
        let coupling = &theta[k..];
        let a: f64 = lambda.iter().zip(&qp.tau).map(|(l, t)| l * t).sum();
        let n = qp.dim();
        let mut x = vec![0.0; n];
        let mut interior = vec![false; n];
        for t in 0..n {
            let x0 = qp.center[t];
            let mut b = if self.mode == Mode::Objective { qp.cost[t] } else { 0.0 };
            for (l, kap) in lambda.iter().zip(&qp.kappa) {
                b += l * kap[t];
            }
            for &i in &self.members[t] {
                b += coupling[i];
            }
            x[t] = match qp.domains[t] {
                Domain::Fixed => x0,
                Domain::Free if a > 0.0 => {
                    interior[t] = true;
                    x0 - b / (2.0 * a)
                }
                Domain::Free if b == 0.0 => x0,
                Domain::Free => return None,
                Domain::Interval(lo, hi) if a > 0.0 => {
                    let v = x0 - b / (2.0 * a);
                    interior[t] = v > lo && v < hi;
                    v.clamp(lo, hi)
                }
                Domain::Interval(lo, hi) => {
                    if b > 0.0 {
                        lo
                    } else if b < 0.0 {
                        hi
                    } else {
                        x0.clamp(lo, hi)
                    }
                }
            };
        }
        let mut grad = Vec::with_capacity(self.len());
        let mut value = if self.mode == Mode::Objective { qp.objective(&x) } else { 0.0 };
        for (j, l) in lambda.iter().enumerate() {
            let f = qp.surrogate(j, &x);
            value += l * f;
            grad.push(f);
        }
        for (i, m) in coupling.iter().enumerate() {
            let r = qp.coupling_residual(i, &x);
            value += m * r;
            grad.push(r);
        }
        Some(Evaluation {
            x,
            value,
            grad,
            quad_weight: a,
            interior,
        })
    }

    /// Negated generalized Hessian `(1/2a) G_F G_F^T`.
    fn curvature(&self, ev: &Evaluation) -> DMatrix<f64> {
        self.hessian_builds.set(self.hessian_builds.get() + 1);
        let m = self.len();
        if ev.quad_weight <= 0.0 {
            return DMatrix::zeros(m, m);
        }
        let qp = self.qp;
        let free: Vec<usize> = (0..qp.dim()).filter(|&t| ev.interior[t]).collect();
        let mut g = DMatrix::zeros(m, free.len());
        for (col, &t) in free.iter().enumerate() {
            let d = ev.x[t] - qp.center[t];
            for k in 0..self.k() {
                g[(k, col)] = qp.kappa[k][t] + 2.0 * qp.tau[k] * d;
            }
            for &i in &self.members[t] {
                g[(self.k() + i, col)] = 1.0;
            }
        }
        (&g * g.transpose()) / (2.0 * ev.quad_weight)
    }

    fn project(&self, theta: &mut [f64]) {
        let k = self.k();
        match self.mode {
            Mode::Objective => theta[..k].iter_mut().for_each(|l| *l = l.max(0.0)),
            Mode::Feasibility => project_simplex(&mut theta[..k]),
        }
        for (m, c) in theta[k..].iter_mut().zip(&self.qp.couplings) {
            if c.kind == CouplingKind::AtMost {
                *m = m.max(0.0);
            }
        }
    }

    /// Whether `trial` keeps the quadratic weight away from zero. In objective
    /// mode `a = 0` is only optimal when the cheapest point is feasible, which
    /// is ruled out before the ascent starts, and near `a = 0` the
    /// Lagrangian minimizer runs off along the free coordinates.
    fn keeps_weight(&self, ev: &Evaluation, trial: &[f64]) -> bool {
        if self.mode == Mode::Feasibility {
            return true;
        }
        let a: f64 = trial[..self.k()].iter().zip(&self.qp.tau).map(|(l, t)| l * t).sum();
        a >= 0.1 * ev.quad_weight
    }

    /// Primal infeasibility and duality gap of the Lagrangian minimizer.
    fn residual(&self, theta: &[f64], ev: &Evaluation) -> (f64, f64, f64) {
        let qp = self.qp;
        let coupling_viol = qp.coupling_violation(&ev.x);
        match self.mode {
            Mode::Objective => {
                let obj = qp.objective(&ev.x);
                let rate_viol = ev.grad[..self.k()].iter().fold(0.0f64, |w, f| w.max(*f));
                let gap = (obj - ev.value).abs();
                let _ = theta;
                (rate_viol.max(coupling_viol), gap / (1.0 + obj.abs()), obj)
            }
            Mode::Feasibility => {
                let xi = qp.max_surrogate(&ev.x);
                (coupling_viol, (xi - ev.value).abs() / (1.0 + xi.abs()), xi)
            }
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - shift).max(0.0));
}

fn initial_theta(dual: &Dual<'_>, warm: Option<&DualState>) -> Vec<f64> {
    let k = dual.k();
    let mut theta = vec![0.0; dual.len()];
    match warm {
        Some(w)
            if w.rate_multipliers.len() == k
                && w.coupling_multipliers.len() == dual.qp.couplings.len() =>
        {
            theta[..k].copy_from_slice(&w.rate_multipliers);
            theta[k..].copy_from_slice(&w.coupling_multipliers);
        }
        _ => {
            let init = match dual.mode {
                Mode::Objective => 1.0,
                Mode::Feasibility => 1.0 / k.max(1) as f64,
            };
            theta[..k].iter_mut().for_each(|l| *l = init);
        }
    }
    dual.project(&mut theta);
    // a vanishing multiplier sum leaves the quadratic weight at zero
    if theta[..k].iter().sum::<f64>() <= 1e-12 {
        let init = match dual.mode {
            Mode::Objective => 1.0,
            Mode::Feasibility => 1.0 / k.max(1) as f64,
        };
        theta[..k].iter_mut().for_each(|l| *l = init);
    }
    theta
}

struct Best {
    score: (f64, f64),
    x: Vec<f64>,
}

impl Best {
    fn offer(&mut self, viol: f64, value: f64, x: &[f64]) {
        if (viol, value) < self.score {
            self.score = (viol, value);
            self.x = x.to_vec();
        }
    }
}

fn split(dual: &Dual<'_>, theta: &[f64]) -> DualState {
    DualState {
        rate_multipliers: theta[..dual.k()].to_vec(),
        coupling_multipliers: theta[dual.k()..].to_vec(),
    }
}

/// Solve the surrogate problem in `mode` through its Lagrange dual.
pub fn solve(
    qp: &SurrogateQp,
    mode: Mode,
    options: &DualOptions,
    warm: Option<&DualState>,
) -> Result<DualSolution, DualFailure> {
    qp.validate();
    assert!(qp.constraint_count() > 0, "surrogate problem without constraints");
    if mode == Mode::Objective {
        if let Some(sol) = cheapest_point(qp, options)? {
            return Ok(sol);
        }
    }
    let dual = Dual::new(qp, mode);
    let mut theta = initial_theta(&dual, warm);
    match options.method {
        DualMethod::Newton => newton(&dual, &mut theta, options),
        DualMethod::Subgradient => subgradient(&dual, &mut theta, options),
    }
}

/// When the surrogates can be met with every costed coordinate at its lower
/// bound, that point is optimal and the objective dual is degenerate
/// (`lambda = 0`), so it is found through the feasibility problem instead.
fn cheapest_point(qp: &SurrogateQp, options: &DualOptions) -> Result<Option<DualSolution>, DualFailure> {
    let mut floor = qp.clone();
    let mut any = false;
    for (d, &c) in floor.domains.iter_mut().zip(&qp.cost) {
        if c > 0.0 {
            if let Domain::Interval(lo, _) = *d {
                *d = Domain::Interval(lo, lo);
                any = true;
            }
        }
    }
    if !any {
        return Ok(None);
    }
    let dual = Dual::new(&floor, Mode::Feasibility);
    let mut theta = initial_theta(&dual, None);
    let sol = match options.method {
        DualMethod::Newton => newton(&dual, &mut theta, options),
        DualMethod::Subgradient => subgradient(&dual, &mut theta, options),
    }?;
    if sol.value > 0.0 {
        return Ok(None);
    }
    Ok(Some(DualSolution {
        value: qp.objective(&sol.x),
        dual: DualState {
            rate_multipliers: vec![0.0; qp.constraint_count()],
            coupling_multipliers: vec![0.0; qp.couplings.len()],
        },
        ..sol
    }))
}

fn converged(viol: f64, gap: f64, tol: f64) -> bool {
    viol <= tol && gap <= tol
}

fn newton(dual: &Dual<'_>, theta: &mut Vec<f64>, options: &DualOptions) -> Result<DualSolution, DualFailure> {
    let tol = options.tolerance;
    let k = dual.k();
    let mut best = Best {
        score: (f64::INFINITY, f64::INFINITY),
        x: dual.qp.center.clone(),
    };
    let mut ev = dual.evaluate(theta).ok_or_else(|| DualFailure {
        iterations: 0,
        residual: f64::INFINITY,
        best: dual.qp.center.clone(),
    })?;
    let mut residual = f64::INFINITY;
    // lowest-residual iterate, returned if ascent stalls near roundoff
    let mut closest: Option<(f64, DualSolution)> = None;
    let mut flat = 0;
    let mut damping = options.damping;
    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        let (viol, gap, value) = dual.residual(theta, &ev);
        best.offer(viol, value, &ev.x);
        residual = viol.max(gap);
        let solution = |x: &[f64]| DualSolution {
            x: x.to_vec(),
            dual: split(dual, theta),
            value,
            max_violation: viol,
            iterations: it,
            evaluations: dual.evaluations.get(),
            hessian_builds: dual.hessian_builds.get(),
        };
        if converged(viol, gap, tol) {
            return Ok(solution(&ev.x));
        }
        // coupling sums are only needed to roundoff-level accuracy before rounding
        let rate_viol = match dual.mode {
            Mode::Objective => ev.grad[..k].iter().fold(0.0f64, |w, f| w.max(*f)),
            Mode::Feasibility => 0.0,
        };
        let stalled_ok = rate_viol.max(gap) <= options.stall_tolerance
            && dual.qp.coupling_violation(&ev.x) <= 10.0 * options.stall_tolerance;
        if stalled_ok && closest.as_ref().map_or(true, |(r, _)| residual < *r) {
            closest = Some((residual, solution(&ev.x)));
        }

        let curv = dual.curvature(&ev);
        let max_diag = (0..curv.nrows()).map(|i| curv[(i, i)]).fold(0.0, f64::max);
        let gnorm = ev.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let reg = if max_diag > 0.0 { 1e-10 * max_diag + damping * gnorm } else { 1.0 };
        let q = curv + DMatrix::identity(dual.len(), dual.len()) * reg;
        let grad = DVector::from_column_slice(&ev.grad);
        let mut lower = vec![None; dual.len()];
        for (i, l) in lower.iter_mut().enumerate() {
            let bounded = i < k || dual.qp.couplings[i - k].kind == CouplingKind::AtMost;
            if bounded {
                *l = Some(-theta[i]);
            }
        }
        let cons = QpConstraints {
            lower,
            zero_sum: if dual.mode == Mode::Feasibility { (0..k).collect() } else { Vec::new() },
        };

        let next = match qp::solve(&q, &grad, &cons).and_then(|step| line_search(dual, theta, &ev, step.as_slice())) {
            Some((t, e, full, ratio)) => {
                // gain beyond the quadratic model means the damping overstates curvature
                if full && ratio > 0.75 {
                    damping = (damping * 0.1).max(1e-12);
                } else if !full {
                    damping = (damping * 4.0).min(options.damping * 1e4);
                }
                Some((t, e))
            }
            None => gradient_step(dual, theta, &ev),
        };
        match next {
            Some((t, e)) => {
                flat = if e.value - ev.value <= 1e-15 * ev.value.abs() { flat + 1 } else { 0 };
                *theta = t;
                ev = e;
                if flat >= 5 && closest.is_some() {
                    break;
                }
            }
            None => break,
        }
    }
    if let Some((_, sol)) = closest {
        return Ok(sol);
    }
    Err(DualFailure {
        iterations,
        residual,
        best: best.x,
    })
}

/// Armijo backtracking along `step`. Also reports whether the full step was
/// taken and the realized gain relative to the first-order prediction.
fn line_search(dual: &Dual<'_>, theta: &[f64], ev: &Evaluation, step: &[f64]) -> Option<(Vec<f64>, Evaluation, bool, f64)> {
    let slope: f64 = step.iter().zip(&ev.grad).map(|(s, g)| s * g).sum();
    if !(slope > 0.0) {
        return None;
    }
    let mut s = 1.0;
    for _ in 0..60 {
        let mut trial: Vec<f64> = theta.iter().zip(step).map(|(t, d)| t + s * d).collect();
        dual.project(&mut trial);
        if !dual.keeps_weight(ev, &trial) {
            s *= 0.5;
            continue;
        }
        if let Some(e) = dual.evaluate(&trial) {
            if e.value >= ev.value + 1e-4 * s * slope {
                let ratio = (e.value - ev.value) / (s * slope);
                return Some((trial, e, s == 1.0, ratio));
            }
        }
        s *= 0.5;
    }
    None
}

/// Projected gradient step with backtracking, used when the Newton step stalls.
fn gradient_step(dual: &Dual<'_>, theta: &[f64], ev: &Evaluation) -> Option<(Vec<f64>, Evaluation)> {
    let mut s = 1.0;
    for _ in 0..80 {
        let mut trial: Vec<f64> = theta.iter().zip(&ev.grad).map(|(t, g)| t + s * g).collect();
        dual.project(&mut trial);
        let moved: f64 = trial.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
        if moved == 0.0 {
            return None;
        }
        if !dual.keeps_weight(ev, &trial) {
            s *= 0.5;
            continue;
        }
        if let Some(e) = dual.evaluate(&trial) {
            let lin: f64 = trial.iter().zip(theta).zip(&ev.grad).map(|((a, b), g)| (a - b) * g).sum();
            if e.value > ev.value && e.value >= ev.value + 1e-4 * lin.min(moved / s) {
                return Some((trial, e));
            }
        }
        s *= 0.5;
    }
    None
}

fn subgradient(dual: &Dual<'_>, theta: &mut Vec<f64>, options: &DualOptions) -> Result<DualSolution, DualFailure> {
    let tol = options.tolerance;
    let mut best = Best {
        score: (f64::INFINITY, f64::INFINITY),
        x: dual.qp.center.clone(),
    };
    let mut best_solution: Option<DualSolution> = None;
    let mut residual = f64::INFINITY;
    for it in 0..options.max_iterations {
        let Some(ev) = dual.evaluate(theta) else {
            // unbounded minimizer: push the rate multipliers up
            theta[..dual.k()].iter_mut().for_each(|l| *l += options.subgradient_step);
            dual.project(theta);
            continue;
        };
        let (viol, gap, value) = dual.residual(theta, &ev);
        best.offer(viol, value, &ev.x);
        residual = residual.min(viol.max(gap));
        if viol <= tol && best_solution.as_ref().is_none_or(|b| value < b.value) {
            best_solution = Some(DualSolution {
                x: ev.x.clone(),
                dual: split(dual, theta),
                value,
                max_violation: viol,
                iterations: it,
                evaluations: dual.evaluations.get(),
                hessian_builds: dual.hessian_builds.get(),
            });
        }
        let mut g = ev.grad.clone();
        if dual.mode == Mode::Feasibility {
            let mean = g[..dual.k()].iter().sum::<f64>() / dual.k() as f64;
            g[..dual.k()].iter_mut().for_each(|v| *v -= mean);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if converged(viol, gap, tol) || norm <= tol {
            break;
        }
        let step = options.subgradient_step / ((it + 1) as f64).sqrt() / norm;
        theta.iter_mut().zip(&g).for_each(|(t, g)| *t += step * g);
        dual.project(theta);
    }
    best_solution.ok_or(DualFailure {
        iterations: options.max_iterations,
        residual,
        best: best.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(center: f64, domain: Domain, offset: f64, kappa: f64, tau: f64, cost: f64) -> SurrogateQp {
        SurrogateQp {
            center: vec![center],
            domains: vec![domain],
            offsets: vec![offset],
            kappa: vec![vec![kappa]],
            tau: vec![tau],
            cost: vec![cost],
            couplings: vec![],
        }
    }

    #[test]
    fn closed_form_clamps_to_interval() {
        // a = 1, b = -2 at center 0: minimizer 1 lies on the upper bound
        let qp = single(0.0, Domain::Interval(0.0, 1.0), -10.0, -2.0, 1.0, 0.0);
        let dual = Dual::new(&qp, Mode::Feasibility);
        let ev = dual.evaluate(&[1.0]).unwrap();
        assert_eq!(ev.x, vec![1.0]);
        assert!(!ev.interior[0]);
    }

    #[test]
    fn inactive_constraint_gives_zero_power() {
        // f(p) = -1 - 0.5 (p - 1) + 0.01 (p - 1)^2 <= 0 holds at p = 0
        let qp = single(1.0, Domain::Interval(0.0, 10.0), -1.0, -0.5, 0.01, 1.0);
        let sol = solve(&qp, Mode::Objective, &DualOptions::default(), None).unwrap();
        assert_close!(sol.x[0], 0.0, 1e-12);
        assert_close!(sol.dual.rate_multipliers[0], 0.0, 1e-12);
    }

    #[test]
    fn binding_scalar_constraint() {
        // f(p) = 1 - (p - 0) + 0.1 p^2 <= 0: smallest root of 0.1 p^2 - p + 1
        let qp = single(0.0, Domain::Interval(0.0, 10.0), 1.0, -1.0, 0.1, 1.0);
        let sol = solve(&qp, Mode::Objective, &DualOptions::default(), None).unwrap();
        let root = (1.0 - (1.0f64 - 0.4).sqrt()) / 0.2;
        assert_close!(sol.x[0], root, 1e-8);
    }

    #[test]
    fn single_constraint_feasibility_is_projected_minimizer() {
        let qp = single(0.5, Domain::Interval(0.0, 1.0), 0.3, -4.0, 1.0, 0.0);
        let sol = solve(&qp, Mode::Feasibility, &DualOptions::default(), None).unwrap();
        assert_close!(sol.x[0], 1.0, 1e-12);
        assert_close!(sol.value, qp.surrogate(0, &[1.0]), 1e-12);
    }

    #[test]
    fn centered_quadratics_stay_at_center() {
        let qp = SurrogateQp {
            center: vec![0.2, -0.3],
            domains: vec![Domain::Free, Domain::Interval(-1.0, 1.0)],
            offsets: vec![0.4, -0.1],
            kappa: vec![vec![0.0; 2], vec![0.0; 2]],
            tau: vec![0.5, 2.0],
            cost: vec![0.0; 2],
            couplings: vec![],
        };
        let sol = solve(&qp, Mode::Feasibility, &DualOptions::default(), None).unwrap();
        assert!((sol.x[0] - 0.2).abs() < 1e-9 && (sol.x[1] + 0.3).abs() < 1e-9);
        assert_close!(sol.value, 0.4, 1e-9);
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_simplex(&mut v);
        v.iter().for_each(|x| assert_close!(*x, 1.0 / 3.0, 1e-15));
        let mut v = vec![2.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn equality_coupling_respected() {
        // two interval coordinates that must sum to one
        let qp = SurrogateQp {
            center: vec![0.0, 0.0],
            domains: vec![Domain::Interval(0.0, 1.0); 2],
            offsets: vec![0.0],
            kappa: vec![vec![-1.0, 0.0]],
            tau: vec![1.0],
            cost: vec![0.0; 2],
            couplings: vec![Coupling {
                coords: vec![0, 1],
                kind: CouplingKind::Equal,
                rhs: 1.0,
            }],
        };
        let sol = solve(&qp, Mode::Feasibility, &DualOptions::default(), None).unwrap();
        // minimize -x0 + x0^2 + x1^2 on x0 + x1 = 1: x0 = 3/4
        assert_close!(sol.x[0], 0.75, 1e-8);
        assert_close!(sol.x[1], 0.25, 1e-8);
    }

    #[test]
    fn subgradient_agrees_loosely() {
        let qp = single(0.0, Domain::Interval(0.0, 10.0), 1.0, -1.0, 0.1, 1.0);
        let exact = solve(&qp, Mode::Objective, &DualOptions::default(), None).unwrap();
        let opts = DualOptions {
            tolerance: 1e-6,
            max_iterations: 20000,
            ..DualOptions::subgradient()
        };
        let approx = solve(&qp, Mode::Objective, &opts, None).unwrap();
        assert!((approx.value - exact.value).abs() < 1e-2, "{} vs {}", approx.value, exact.value);
    }
}
