//! Compute-capacity subproblem.
//!
//! With extraction ratios, powers and rates frozen, choose the base-station
//! frequencies `f` and user frequencies `g`:
//!
//! ```text
//! min  sum_k kappa (y1_k f_k^2 + y2_k g_k^2)
//! s.t. y1_k / f_k + c_k + y2_k / g_k <= T,  sum_k f_k <= F,  0 < g_k <= g_max_k
//! ```
//!
//! Solved in the dual. For fixed multipliers the primal minimizer is a
//! positive cubic root for `f` and a clamped cube root for `g`; the
//! multipliers follow projected ascent steps along the constraint residuals.

use crate::error::{Block, Error, Result};
use crate::model::{private_rate_for, Allocation, ChannelSet, Scheme, SystemConfig};

const RESIDUAL_RTOL: f64 = 1e-6;
/// Residual the ascent aims for before stopping; Newton-like steps make the
/// extra accuracy cheap.
const TARGET_RTOL: f64 = 1e-11;
const MAX_ITER: usize = 100_000;
/// `g` returned for an inactive deadline multiplier, relative to `g_max`.
pub const G_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityContext {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Transmission time `max{(Z rho + o)/(r + a), K0/a0}` per user.
    pub fixed_time: Vec<f64>,
    pub deadline_s: f64,
    pub kappa: f64,
    pub f_max_hz: f64,
    pub g_max_hz: Vec<f64>,
}

impl CapacityContext {
    pub fn from_allocation(
        scheme: Scheme,
        alloc: &Allocation,
        channels: &ChannelSet,
        cfg: &SystemConfig,
    ) -> Result<Self> {
        let k_users = cfg.num_users;
        let t0 = if scheme.has_common_stream() { cfg.knowledge_bits / alloc.a[0] } else { 0.0 };
        let mut ctx = Self {
            y1: Vec::with_capacity(k_users),
            y2: Vec::with_capacity(k_users),
            fixed_time: Vec::with_capacity(k_users),
            deadline_s: cfg.deadline_s,
            kappa: cfg.kappa,
            f_max_hz: cfg.f_max_hz,
            g_max_hz: cfg.users.iter().map(|u| u.g_max_hz).collect(),
        };
        for k in 0..k_users {
            let u = &cfg.users[k];
            ctx.y1.push(u.extraction_cycles(alloc.rho[k])?);
            ctx.y2.push(u.recovery_cycles(alloc.rho[k])?);
            let mut link = private_rate_for(scheme, alloc, channels, cfg, k);
            if scheme.has_common_stream() {
                link += alloc.a[k + 1];
            }
            ctx.fixed_time.push((alloc.payload_bits(scheme, cfg, k) / link).max(t0));
        }
        Ok(ctx)
    }

    pub fn num_users(&self) -> usize {
        self.y1.len()
    }

    fn slack(&self, k: usize) -> f64 {
        self.deadline_s - self.fixed_time[k]
    }

    pub fn objective(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.num_users())
            .map(|k| self.kappa * (self.y1[k] * f[k] * f[k] + self.y2[k] * g[k] * g[k]))
            .sum()
    }

    pub fn latency(&self, k: usize, f: f64, g: f64) -> f64 {
        self.y1[k] / f + self.fixed_time[k] + self.y2[k] / g
    }

    /// Smallest `f_k` meeting the deadline at `g = g_max`, or `None`.
    fn min_frequency(&self, k: usize) -> Option<f64> {
        let room = self.slack(k) - self.y2[k] / self.g_max_hz[k];
        (room > 0.0).then(|| self.y1[k] / room)
    }

    /// Exact feasibility test: every user meets the deadline at `g_max` and
    /// the minimal frequencies fit in the budget.
    pub fn check_feasible(&self) -> Result<()> {
        let mins: Vec<Option<f64>> = (0..self.num_users()).map(|k| self.min_frequency(k)).collect();
        let bad: Vec<usize> = mins.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(k, _)| k).collect();
        if !bad.is_empty() {
            return Err(Error::InfeasibleDeadline { block: Block::Capacity, users: bad });
        }
        let total: f64 = mins.iter().map(|m| m.unwrap()).sum();
        if total > self.f_max_hz * (1.0 + 1e-12) {
            return Err(Error::InfeasibleDeadline {
                block: Block::Capacity,
                users: (0..self.num_users()).collect(),
            });
        }
        Ok(())
    }
}

/// Positive root of `2 kappa y1 f^3 + lambda3 f^2 - lambda2 y1 = 0`; zero when
/// `lambda2 = 0` (deadline multiplier inactive).
pub fn solve_f(lambda2: f64, lambda3: f64, y1: f64, kappa: f64) -> f64 {
    if lambda2 <= 0.0 || y1 <= 0.0 {
        return 0.0;
    }
    let a = 2.0 * kappa * y1;
    let c = lambda2 * y1;
    let poly = |f: f64| (a * f + lambda3) * f * f - c;
    let mut f = (lambda2 / (2.0 * kappa)).cbrt();
    if lambda3 > 0.0 {
        f = f.min((c / lambda3).sqrt());
    }
    // The cubic is increasing and convex on f > 0, so Newton from the
    // upper bound decreases monotonically onto the root.
    for _ in 0..100 {
        let p = poly(f);
        if p <= 0.0 {
            break;
        }
        let dp = (3.0 * a * f + 2.0 * lambda3) * f;
        let next = f - p / dp;
        if !(next > 0.0) {
            break;
        }
        if (f - next) <= 1e-15 * f {
            f = next;
            break;
        }
        f = next;
    }
    // Guard against round-off leaving the iterate left of the root.
    if poly(f) < 0.0 {
        let (mut lo, mut hi) = (f, f * 2.0);
        while poly(hi) < 0.0 {
            hi *= 2.0;
        }
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if poly(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        f = hi;
    }
    f
}

/// `min{(lambda2 / (2 kappa))^(1/3), g_max}`, floored at `G_FLOOR * g_max`.
pub fn solve_g(lambda2: f64, kappa: f64, g_max: f64) -> f64 {
    if lambda2 <= 0.0 {
        return g_max * G_FLOOR;
    }
    (lambda2 / (2.0 * kappa)).cbrt().min(g_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda2: Vec<f64>,
    pub lambda3: f64,
    pub iterations: usize,
    /// Largest relative constraint residual per iteration.
    pub residual_history: Vec<f64>,
    /// Dual objective per iteration.
    pub dual_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub objective: f64,
    pub state: DualState,
}

struct Primal {
    f: Vec<f64>,
    g: Vec<f64>,
    /// Latency residuals `t_k - T`.
    s: Vec<f64>,
    /// Budget residual `sum f - F`.
    s0: f64,
    dual: f64,
}

fn primal(ctx: &CapacityContext, mu: &[f64], nu: f64) -> Primal {
    let k_users = ctx.num_users();
    let mut f = Vec::with_capacity(k_users);
    let mut g = Vec::with_capacity(k_users);
    let mut s = Vec::with_capacity(k_users);
    let mut dual = 0.0;
    for k in 0..k_users {
        let fk = solve_f(mu[k], nu, ctx.y1[k], ctx.kappa);
        let gk = solve_g(mu[k], ctx.kappa, ctx.g_max_hz[k]);
        let sk = ctx.latency(k, fk, gk) - ctx.deadline_s;
        dual += ctx.kappa * (ctx.y1[k] * fk * fk + ctx.y2[k] * gk * gk) + mu[k] * sk;
        f.push(fk);
        g.push(gk);
        s.push(sk);
    }
    let s0 = f.iter().sum::<f64>() - ctx.f_max_hz;
    dual += nu * s0;
    Primal { f, g, s, s0, dual }
}

/// Ascent direction preconditioned by the dual Hessian. The Hessian is an
/// arrow matrix (diagonal in the deadline multipliers, coupled through the
/// budget multiplier) and is inverted by a Schur complement.
fn direction(ctx: &CapacityContext, mu: &[f64], nu: f64, pr: &Primal, budget_active: bool) -> (Vec<f64>, f64) {
    let k_users = ctx.num_users();
    let mut diag = vec![0.0; k_users];
    let mut coupling = vec![0.0; k_users];
    let mut corner = 0.0;
    for k in 0..k_users {
        let (f, g) = (pr.f[k], pr.g[k]);
        let y1 = ctx.y1[k];
        let d = (6.0 * ctx.kappa * y1 * f + 2.0 * nu) * f;
        let mut a = y1 * y1 / (f * f * d);
        if g < ctx.g_max_hz[k] {
            a += ctx.y2[k] / (3.0 * mu[k] * g);
        }
        diag[k] = a;
        coupling[k] = y1 / d;
        corner += f * f / d;
    }
    if !budget_active {
        return ((0..k_users).map(|k| pr.s[k] / diag[k]).collect(), 0.0);
    }
    let schur = corner - (0..k_users).map(|k| coupling[k] * coupling[k] / diag[k]).sum::<f64>();
    let rhs = pr.s0 + (0..k_users).map(|k| coupling[k] * pr.s[k] / diag[k]).sum::<f64>();
    let d0 = if schur > 1e-12 * corner { rhs / schur } else { pr.s0 / corner };
    let dk = (0..k_users).map(|k| (pr.s[k] + coupling[k] * d0) / diag[k]).collect();
    (dk, d0)
}

fn step(mu: &[f64], nu: f64, dk: &[f64], d0: f64, size: f64) -> (Vec<f64>, f64) {
    let mu_new = mu
        .iter()
        .zip(dk)
        .map(|(m, d)| (m + size * d).clamp(m / 10.0, m * 10.0))
        .collect();
    let target = (nu + size * d0).max(0.0);
    let nu_new = if nu > 0.0 { target.min(10.0 * nu).max(if target == 0.0 { 0.0 } else { nu / 10.0 }) } else { target };
    (mu_new, nu_new)
}

fn max_residual(ctx: &CapacityContext, pr: &Primal, nu: f64) -> f64 {
    let t = ctx.deadline_s;
    let lat = pr.s.iter().map(|s| s.abs() / t).fold(0.0, f64::max);
    let budget = if nu > 0.0 { pr.s0.abs() } else { pr.s0.max(0.0) } / ctx.f_max_hz;
    lat.max(budget)
}

/// Dual ascent on the deadline and budget multipliers.
pub fn dual_ascent(ctx: &CapacityContext) -> Result<CapacitySolution> {
    ctx.check_feasible()?;
    let k_users = ctx.num_users();
    let share = ctx.f_max_hz / k_users as f64;
    let mut mu = vec![2.0 * ctx.kappa * share.powi(3); k_users];
    let mut nu = 0.0;
    let mut pr = primal(ctx, &mu, nu);
    let mut state = DualState {
        lambda2: mu.clone(),
        lambda3: nu,
        iterations: 0,
        residual_history: vec![max_residual(ctx, &pr, nu)],
        dual_history: vec![pr.dual],
        converged: false,
    };
    for t in 1..=MAX_ITER {
        let residual = max_residual(ctx, &pr, nu);
        let previous = state.residual_history[state.residual_history.len().saturating_sub(2)];
        let stalled = t > 1 && residual > 0.5 * previous;
        if residual <= TARGET_RTOL || (residual <= RESIDUAL_RTOL && stalled) {
            break;
        }
        let budget_active = nu > 0.0 || pr.s0 > 0.0;
        let (dk, d0) = direction(ctx, &mu, nu, &pr, budget_active);
        let slope: f64 = dk.iter().zip(&pr.s).map(|(d, s)| d * s).sum::<f64>() + d0 * pr.s0;
        // Backtrack on the dual objective; fall back to a diminishing step.
        let mut size = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let (m, n) = step(&mu, nu, &dk, d0, size);
            let cand = primal(ctx, &m, n);
            if cand.dual >= pr.dual + 1e-4 * size * slope.min(0.0).abs().min(slope.abs()) {
                accepted = Some((m, n, cand));
                break;
            }
            size *= 0.5;
        }
        if accepted.is_none() && residual <= RESIDUAL_RTOL {
            break;
        }
        let (m, n, cand) = accepted.unwrap_or_else(|| {
            let (m, n) = step(&mu, nu, &dk, d0, 1.0 / (t as f64).sqrt());
            let cand = primal(ctx, &m, n);
            (m, n, cand)
        });
        mu = m;
        nu = n;
        pr = cand;
        state.iterations = t;
        state.residual_history.push(max_residual(ctx, &pr, nu));
        state.dual_history.push(pr.dual);
    }
    state.converged = max_residual(ctx, &pr, nu) <= RESIDUAL_RTOL;
    state.lambda2 = mu;
    state.lambda3 = nu;
    let (f, g) = repair(ctx, pr.f, pr.g);
    let objective = ctx.objective(&f, &g);
    Ok(CapacitySolution { f, g, objective, state })
}

/// Lift `f` on any user whose deadline is still violated.
fn repair(ctx: &CapacityContext, mut f: Vec<f64>, mut g: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    for k in 0..ctx.num_users() {
        if ctx.latency(k, f[k], g[k]) <= ctx.deadline_s {
            continue;
        }
        let mut room = ctx.slack(k) - ctx.y2[k] / g[k];
        if room <= 0.0 {
            g[k] = ctx.g_max_hz[k];
            room = ctx.slack(k) - ctx.y2[k] / g[k];
        }
        f[k] = ctx.y1[k] / room;
    }
    (f, g)
}
