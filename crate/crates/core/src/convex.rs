//! Log-barrier interior-point solver for smooth convex programs
//!
//! ```text
//! min f0(x)  s.t.  g_i(x) <= 0,  l <= x <= u
//! ```
//!
//! described by value/gradient/Hessian oracles. Each stage minimizes
//! `t f0 - sum log(-g_i) - sum log(box slack)` by damped Newton; `t` grows by
//! a fixed factor until the duality-gap bound `m / t` drops below tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A twice-differentiable function of `x`.
pub trait SmoothFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the full gradient into `out` (same length as `x`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Adds `scale * Hessian(x)` into `h`.
    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>);
    /// Indices where the gradient can be nonzero; `None` means all.
    fn support(&self) -> Option<&[usize]> {
        None
    }
}

/// `0.5 x'Qx + c'x + r`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub r: f64,
}

impl SmoothFn for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.q * &x)) + self.c.dot(&x) + self.r
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let xv = DVector::from_column_slice(x);
        let g = &self.q * xv + &self.c;
        out.copy_from_slice(g.as_slice());
    }

    fn add_hessian(&self, _x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        *h += &self.q * scale;
    }
}

/// `a'x + b`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub a: Vec<f64>,
    pub b: f64,
}

impl SmoothFn for Affine {
    fn value(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }

    fn add_hessian(&self, _x: &[f64], _scale: f64, _h: &mut DMatrix<f64>) {}
}

pub struct ConvexProgram<'a> {
    pub dim: usize,
    pub objective: Box<dyn SmoothFn + 'a>,
    pub constraints: Vec<Box<dyn SmoothFn + 'a>>,
    pub start: Vec<f64>,
    /// Per-coordinate `(lower, upper)`, infinite sides allowed.
    pub bounds: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target bound on `m / t`.
    pub tol: f64,
    /// Barrier growth factor per stage.
    pub growth: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
    /// Stop as soon as the objective falls below this value.
    pub stop_below: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, growth: 10.0, max_newton_per_stage: 100, max_stages: 60, stop_below: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub objective: f64,
    /// Largest `g_i(x)` (negative when strictly feasible).
    pub max_violation: f64,
    pub stages: usize,
    pub newton_steps: usize,
    pub status: SolveStatus,
    pub final_t: f64,
    /// Barrier values visited within each stage.
    pub trace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    /// `|mu_i g_i|` per constraint.
    pub complementarity: Vec<f64>,
}

impl ConvexProgram<'_> {
    fn bound_pairs(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.bounds
            .iter()
            .flat_map(|b| b.iter().enumerate().map(|(i, (l, u))| (i, *l, *u)))
    }

    fn num_barrier_terms(&self) -> usize {
        self.constraints.len()
            + self
                .bound_pairs()
                .map(|(_, l, u)| l.is_finite() as usize + u.is_finite() as usize)
                .sum::<usize>()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = self.constraints.iter().map(|g| g.value(x)).fold(f64::NEG_INFINITY, f64::max);
        for (i, l, u) in self.bound_pairs() {
            worst = worst.max(l - x[i]).max(x[i] - u);
        }
        worst
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && self.bound_pairs().all(|(i, l, u)| x[i] > l && x[i] < u)
            && self.constraints.iter().all(|g| g.value(x) < 0.0)
    }

    /// Barrier value, `+inf` outside the strict interior.
    fn barrier(&self, x: &[f64], t: f64) -> f64 {
        let mut phi = t * self.objective.value(x);
        for g in &self.constraints {
            let v = g.value(x);
            if !(v < 0.0) {
                return f64::INFINITY;
            }
            phi -= (-v).ln();
        }
        for (i, l, u) in self.bound_pairs() {
            if l.is_finite() {
                if !(x[i] > l) {
                    return f64::INFINITY;
                }
                phi -= (x[i] - l).ln();
            }
            if u.is_finite() {
                if !(x[i] < u) {
                    return f64::INFINITY;
                }
                phi -= (u - x[i]).ln();
            }
        }
        if phi.is_nan() { f64::INFINITY } else { phi }
    }

    /// Gradient and Hessian of the barrier.
    fn barrier_derivatives(&self, x: &[f64], t: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let n = self.dim;
        let mut buf = vec![0.0; n];
        grad.fill(0.0);
        hess.fill(0.0);
        self.objective.gradient(x, &mut buf);
        for i in 0..n {
            grad[i] = t * buf[i];
        }
        self.objective.add_hessian(x, t, hess);
        for g in &self.constraints {
            let v = g.value(x);
            let inv = -1.0 / v;
            g.gradient(x, &mut buf);
            match g.support() {
                Some(idx) => {
                    for &i in idx {
                        grad[i] += inv * buf[i];
                    }
                    let w = inv * inv;
                    for &i in idx {
                        let gi = w * buf[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for &j in idx {
                            hess[(i, j)] += gi * buf[j];
                        }
                    }
                }
                None => {
                    let gv = DVector::from_column_slice(&buf);
                    grad.axpy(inv, &gv, 1.0);
                    hess.ger(inv * inv, &gv, &gv, 1.0);
                }
            }
            g.add_hessian(x, inv, hess);
        }
        for (i, l, u) in self.bound_pairs() {
            if l.is_finite() {
                let d = x[i] - l;
                grad[i] -= 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
            if u.is_finite() {
                let d = u - x[i];
                grad[i] += 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
        }
    }
}

/// Newton direction from a Jacobi-scaled Cholesky solve with a Levenberg
/// boost on failure.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let d = hess[(i, i)];
            if d > 0.0 && d.is_finite() { 1.0 / d.sqrt() } else { 1.0 }
        }),
    );
    let mut scaled = hess.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = -grad.component_mul(&scale);
    let mut boost = 0.0;
    for _ in 0..20 {
        let mut m = scaled.clone();
        if boost > 0.0 {
            for i in 0..n {
                m[(i, i)] += boost;
            }
        }
        if let Some(chol) = m.cholesky() {
            let y = chol.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&scale));
            }
        }
        boost = if boost == 0.0 { 1e-12 } else { boost * 100.0 };
    }
    None
}

/// Solve by the barrier method from the program's start point.
pub fn solve(program: &ConvexProgram, opts: &SolveOptions) -> Result<SolveReport> {
    let n = program.dim;
    if program.start.len() != n {
        return Err(Error::Domain(format!("start has length {}, expected {n}", program.start.len())));
    }
    let mut x = program.start.clone();
    if !program.strictly_feasible(&x) {
        return Err(Error::NotStrictlyFeasible { max_violation: program.max_violation(&x) });
    }
    let m = program.num_barrier_terms() as f64;
    let f_start = program.objective.value(&x);
    let mut t = if m > 0.0 { (m / f_start.abs().max(1e-300)).max(1.0) } else { 1.0 };
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut report = SolveReport {
        solution: x.clone(),
        objective: f_start,
        max_violation: program.max_violation(&x),
        stages: 0,
        newton_steps: 0,
        status: SolveStatus::MaxIter,
        final_t: t,
        trace: Vec::new(),
    };
    let mut trial = vec![0.0; n];
    'stages: for _ in 0..opts.max_stages {
        report.stages += 1;
        let mut phi = program.barrier(&x, t);
        let mut stage_trace = vec![phi];
        for _ in 0..opts.max_newton_per_stage {
            program.barrier_derivatives(&x, t, &mut grad, &mut hess);
            let Some(dx) = newton_direction(&grad, &hess) else {
                report.status = SolveStatus::NumericalFailure;
                report.trace.push(stage_trace);
                break 'stages;
            };
            let slope = grad.dot(&dx);
            if -slope / 2.0 <= 1e-18 || slope >= 0.0 {
                break;
            }
            // Inside the quadratic region a full step is trusted even when
            // round-off hides the decrease of the barrier value.
            let local = -slope / 2.0 < 1e-6;
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                for i in 0..n {
                    trial[i] = x[i] + s * dx[i];
                }
                let cand = program.barrier(&trial, t);
                let tiny_rise = local && s == 1.0 && cand <= phi + 1e-13 * phi.abs();
                if cand <= phi + 0.25 * s * slope || tiny_rise {
                    x.copy_from_slice(&trial);
                    phi = cand;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
            report.newton_steps += 1;
            stage_trace.push(phi);
            let negligible = (0..n).all(|i| (s * dx[i]).abs() <= 1e-15 * x[i].abs().max(1e-300));
            if local && negligible {
                break;
            }
            if let Some(stop) = opts.stop_below {
                if program.objective.value(&x) < stop {
                    report.trace.push(stage_trace);
                    report.status = SolveStatus::Optimal;
                    break 'stages;
                }
            }
        }
        report.trace.push(stage_trace);
        if m == 0.0 || m / t <= opts.tol {
            report.status = SolveStatus::Optimal;
            break;
        }
        t *= opts.growth;
    }
    report.final_t = t;
    report.objective = program.objective.value(&x);
    report.max_violation = program.max_violation(&x);
    report.solution = x;
    Ok(report)
}

/// KKT residuals at `x` with barrier multipliers `mu_i = -1 / (t g_i)`.
pub fn check_kkt(program: &ConvexProgram, x: &[f64], t: f64) -> KktResiduals {
    let n = program.dim;
    let mut buf = vec![0.0; n];
    let mut r = vec![0.0; n];
    program.objective.gradient(x, &mut r);
    let mut complementarity = Vec::with_capacity(program.constraints.len());
    for g in &program.constraints {
        let v = g.value(x);
        let mu = -1.0 / (t * v);
        g.gradient(x, &mut buf);
        for i in 0..n {
            r[i] += mu * buf[i];
        }
        complementarity.push((mu * v).abs());
    }
    for (i, l, u) in program.bound_pairs() {
        if l.is_finite() {
            r[i] -= 1.0 / (t * (x[i] - l));
        }
        if u.is_finite() {
            r[i] += 1.0 / (t * (u - x[i]));
        }
    }
    KktResiduals { stationarity: r.iter().map(|v| v * v).sum::<f64>().sqrt(), complementarity }
}

/// `inner(x[..n]) - x[n]`.
struct Shifted<'a> {
    inner: &'a dyn SmoothFn,
    n: usize,
    support: Option<Vec<usize>>,
}

impl SmoothFn for Shifted<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&x[..self.n]) - x[self.n]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(&x[..self.n], &mut out[..self.n]);
        out[self.n] = -1.0;
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        let mut inner = DMatrix::zeros(self.n, self.n);
        self.inner.add_hessian(&x[..self.n], scale, &mut inner);
        let mut view = h.view_mut((0, 0), (self.n, self.n));
        view += inner;
    }

    fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }
}

/// Objective `x[n]` of the phase-I program.
struct LastCoordinate {
    n: usize,
    idx: [usize; 1],
}

impl SmoothFn for LastCoordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.n]
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.n] = 1.0;
    }

    fn add_hessian(&self, _x: &[f64], _scale: f64, _h: &mut DMatrix<f64>) {}

    fn support(&self) -> Option<&[usize]> {
        Some(&self.idx)
    }
}

/// A point with every constraint at most `-margin`, found by minimizing the
/// largest constraint value from `start`. `start` must lie strictly inside
/// the bounds.
pub fn find_strictly_feasible(
    constraints: &[Box<dyn SmoothFn + '_>],
    bounds: Option<&[(f64, f64)]>,
    start: &[f64],
    margin: f64,
) -> Result<Vec<f64>> {
    let n = start.len();
    let worst = constraints.iter().map(|g| g.value(start)).fold(f64::NEG_INFINITY, f64::max);
    if worst < -margin {
        return Ok(start.to_vec());
    }
    let shifted: Vec<Box<dyn SmoothFn + '_>> = constraints
        .iter()
        .map(|g| {
            let support = g.support().map(|s| s.iter().copied().chain(std::iter::once(n)).collect());
            Box::new(Shifted { inner: g.as_ref(), n, support }) as Box<dyn SmoothFn + '_>
        })
        .collect();
    let mut x0 = start.to_vec();
    x0.push(worst + 1.0);
    let mut b: Vec<(f64, f64)> = match bounds {
        Some(b) => b.to_vec(),
        None => vec![(f64::NEG_INFINITY, f64::INFINITY); n],
    };
    // Keep the auxiliary variable bounded below so the program stays bounded.
    b.push((-2.0 * margin - 1.0, f64::INFINITY));
    let program = ConvexProgram {
        dim: n + 1,
        objective: Box::new(LastCoordinate { n, idx: [n] }),
        constraints: shifted,
        start: x0,
        bounds: Some(b),
    };
    let opts = SolveOptions { stop_below: Some(-margin), tol: 1e-6, ..SolveOptions::default() };
    let report = solve(&program, &opts)?;
    let x = report.solution[..n].to_vec();
    let worst = constraints.iter().map(|g| g.value(&x)).fold(f64::NEG_INFINITY, f64::max);
    if worst < 0.0 {
        Ok(x)
    } else {
        Err(Error::NotStrictlyFeasible { max_violation: worst })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_1d(center: f64) -> Quadratic {
        // (x - c)^2 = 0.5 * 2 x^2 - 2 c x + c^2
        Quadratic { q: DMatrix::from_element(1, 1, 2.0), c: DVector::from_element(1, -2.0 * center), r: center * center }
    }

    #[test]
    fn active_bound_1d() {
        let p = ConvexProgram {
            dim: 1,
            objective: Box::new(quad_1d(3.0)),
            constraints: vec![Box::new(Affine { a: vec![1.0], b: -2.0 })],
            start: vec![0.0],
            bounds: None,
        };
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.solution[0] - 2.0).abs() < 1e-6, "{:?}", r.solution);
        assert!(r.max_violation < 0.0);
    }

    #[test]
    fn unconstrained_quadratic() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let p = ConvexProgram {
            dim: 3,
            objective: Box::new(Quadratic { q: q.clone(), c: -b.clone(), r: 0.0 }),
            constraints: vec![],
            start: vec![0.0; 3],
            bounds: None,
        };
        let r = solve(&p, &SolveOptions::default()).unwrap();
        let exact = q.cholesky().unwrap().solve(&b);
        for i in 0..3 {
            assert!((r.solution[i] - exact[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = ConvexProgram {
            dim: 1,
            objective: Box::new(quad_1d(3.0)),
            constraints: vec![Box::new(Affine { a: vec![1.0], b: -2.0 })],
            start: vec![2.0],
            bounds: None,
        };
        assert!(matches!(solve(&p, &SolveOptions::default()), Err(Error::NotStrictlyFeasible { .. })));
    }

    #[test]
    fn box_bounds_respected() {
        let p = ConvexProgram {
            dim: 1,
            objective: Box::new(quad_1d(-5.0)),
            constraints: vec![],
            start: vec![0.5],
            bounds: Some(vec![(0.0, 1.0)]),
        };
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert!(r.solution[0] > 0.0 && r.solution[0] < 1e-6);
    }

    #[test]
    fn kkt_with_no_constraints_is_gradient_norm() {
        let p = ConvexProgram {
            dim: 1,
            objective: Box::new(quad_1d(3.0)),
            constraints: vec![],
            start: vec![0.0],
            bounds: None,
        };
        let k = check_kkt(&p, &[1.0], 1.0);
        assert!((k.stationarity - 4.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_smaller_at_optimum() {
        let p = ConvexProgram {
            dim: 1,
            objective: Box::new(quad_1d(3.0)),
            constraints: vec![Box::new(Affine { a: vec![1.0], b: -2.0 })],
            start: vec![0.0],
            bounds: None,
        };
        let r = solve(&p, &SolveOptions::default()).unwrap();
        let at_opt = check_kkt(&p, &r.solution, r.final_t);
        let elsewhere = check_kkt(&p, &[0.5], r.final_t);
        assert!(at_opt.stationarity <= 1e-6);
        assert!(elsewhere.stationarity > at_opt.stationarity);
    }

    #[test]
    fn barrier_decreases_within_stages() {
        let p = ConvexProgram {
            dim: 2,
            objective: Box::new(Quadratic {
                q: DMatrix::identity(2, 2),
                c: DVector::from_row_slice(&[-4.0, -1.0]),
                r: 0.0,
            }),
            constraints: vec![
                Box::new(Affine { a: vec![1.0, 1.0], b: -2.0 }),
                Box::new(Quadratic { q: DMatrix::identity(2, 2) * 2.0, c: DVector::zeros(2), r: -3.0 }),
            ],
            start: vec![0.0, 0.0],
            bounds: None,
        };
        let r = solve(&p, &SolveOptions::default()).unwrap();
        for stage in &r.trace {
            for w in stage.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn phase_one_finds_interior() {
        // x0 + x1 <= -1 and x0 >= -3 from the infeasible origin.
        let cons: Vec<Box<dyn SmoothFn>> = vec![
            Box::new(Affine { a: vec![1.0, 1.0], b: 1.0 }),
            Box::new(Affine { a: vec![-1.0, 0.0], b: -3.0 }),
        ];
        let x = find_strictly_feasible(&cons, None, &[0.0, 0.0], 1e-3).unwrap();
        assert!(cons.iter().all(|g| g.value(&x) < 0.0));
        let empty: Vec<Box<dyn SmoothFn>> = vec![
            Box::new(Affine { a: vec![1.0], b: 1.0 }),
            Box::new(Affine { a: vec![-1.0], b: 1.0 }),
        ];
        assert!(find_strictly_feasible(&empty, None, &[0.0], 1e-3).is_err());
    }
}
