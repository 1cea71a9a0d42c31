//! Per-user extraction-ratio subproblem.
//!
//! With compute, power and rates frozen, each user solves
//!
//! ```text
//! min_rho  J(rho) = kappa f^2 y1(rho) + p (Z rho + o) / R + kappa g^2 y2(rho)
//! s.t.     y1(rho)/f + max{(Z rho + o)/R, t0} + y2(rho)/g <= T,  Gamma <= rho <= 1
//! ```
//!
//! where `R = r + a` is the user's link rate, `t0 = K0/a0` the knowledge
//! broadcast time and `o` any extra bits carried on the private link (the
//! knowledge update itself when there is no common stream). The max splits
//! `[Gamma, 1]` at `rho_bar = (t0 R - o) / Z`; on each side the problem is
//! smooth and convex and is solved by bisection on the Lagrangian
//! derivative, with the multiplier found by an outer bisection.

use crate::error::{Block, Error, Result};
use crate::model::{
    private_rate_for, Allocation, ChannelSet, Scheme, SystemConfig, UserProfile,
};

const RHO_TOL: f64 = 1e-8;
const LATENCY_RTOL: f64 = 1e-6;
const LAMBDA_RTOL: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionContext {
    pub profile: UserProfile,
    pub kappa: f64,
    pub deadline_s: f64,
    pub f: f64,
    pub g: f64,
    /// Private-stream power of the user.
    pub p: f64,
    /// `r_k + a_k` in bit/s.
    pub link_rate: f64,
    /// `K0 / a0`, zero when there is no common stream.
    pub broadcast_time: f64,
    /// Bits added to the private payload on top of `Z rho`.
    pub overhead_bits: f64,
}

impl ExtractionContext {
    /// RSMA context from the raw rate quantities.
    #[allow(clippy::too_many_arguments)]
    pub fn rsma(
        profile: UserProfile,
        kappa: f64,
        deadline_s: f64,
        f: f64,
        g: f64,
        p: f64,
        a: f64,
        a0: f64,
        r: f64,
        knowledge_bits: f64,
    ) -> Self {
        Self {
            profile,
            kappa,
            deadline_s,
            f,
            g,
            p,
            link_rate: r + a,
            broadcast_time: knowledge_bits / a0,
            overhead_bits: 0.0,
        }
    }

    /// Context of user `k` frozen at `alloc`.
    pub fn from_allocation(
        scheme: Scheme,
        alloc: &Allocation,
        channels: &ChannelSet,
        cfg: &SystemConfig,
        k: usize,
    ) -> Self {
        let r = private_rate_for(scheme, alloc, channels, cfg, k);
        let (link_rate, broadcast_time, overhead_bits) = if scheme.has_common_stream() {
            (r + alloc.a[k + 1], cfg.knowledge_bits / alloc.a[0], 0.0)
        } else {
            (r, 0.0, cfg.knowledge_bits)
        };
        Self {
            profile: cfg.users[k].clone(),
            kappa: cfg.kappa,
            deadline_s: cfg.deadline_s,
            f: alloc.f[k],
            g: alloc.g[k],
            p: alloc.p[k + 1],
            link_rate,
            broadcast_time,
            overhead_bits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        let positive = [
            ("f", self.f),
            ("g", self.g),
            ("link rate", self.link_rate),
            ("kappa", self.kappa),
            ("deadline", self.deadline_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("extraction context: {name} must be positive, got {v}")));
            }
        }
        if !(self.p >= 0.0 && self.broadcast_time >= 0.0 && self.overhead_bits >= 0.0) {
            return Err(Error::Domain("extraction context: negative power or time".into()));
        }
        if !self.broadcast_time.is_finite() {
            return Err(Error::Domain("extraction context: a0 must be positive".into()));
        }
        Ok(())
    }

    fn transmission_time(&self, rho: f64) -> f64 {
        (self.profile.graph_bits * rho + self.overhead_bits) / self.link_rate
    }

    /// Per-user objective (the knowledge-broadcast energy is constant and
    /// omitted).
    pub fn objective(&self, rho: f64) -> f64 {
        let u = &self.profile;
        self.kappa * self.f * self.f * u.extraction_cycles_unchecked(rho)
            + self.p * self.transmission_time(rho)
            + self.kappa * self.g * self.g * u.recovery_cycles_unchecked(rho)
    }

    /// True latency with the max over both transmission terms.
    pub fn latency(&self, rho: f64) -> f64 {
        let u = &self.profile;
        u.extraction_cycles_unchecked(rho) / self.f
            + self.transmission_time(rho).max(self.broadcast_time)
            + u.recovery_cycles_unchecked(rho) / self.g
    }

    fn branch_latency(&self, rho: f64, branch: Branch) -> f64 {
        let u = &self.profile;
        let t2 = match branch {
            Branch::A => self.transmission_time(rho),
            Branch::B => self.broadcast_time,
        };
        u.extraction_cycles_unchecked(rho) / self.f + t2 + u.recovery_cycles_unchecked(rho) / self.g
    }

    fn latency_slope(&self, rho: f64, branch: Branch) -> f64 {
        let u = &self.profile;
        let mut d = u.extraction_slope(rho) / self.f + u.recovery_slope(rho) / self.g;
        if branch == Branch::A {
            d += u.graph_bits / self.link_rate;
        }
        d
    }

    /// Intersection of the branch's region with `[Gamma, 1]`, or `None`.
    pub fn region(&self, branch: Branch) -> Option<(f64, f64)> {
        let bar = branch_threshold(self);
        let (lo, hi) = match branch {
            Branch::A => (bar.max(self.profile.gamma_min), 1.0),
            Branch::B => (self.profile.gamma_min, bar.min(1.0)),
        };
        (lo <= hi).then_some((lo, hi))
    }
}

/// Which side of the max in the latency is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Payload transmission dominates: `rho >= rho_bar`.
    A,
    /// Knowledge broadcast dominates: `rho < rho_bar`.
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionSolution {
    pub rho_star: f64,
    pub lambda1: f64,
    pub branch: Branch,
    pub objective: f64,
    pub latency: f64,
}

/// `rho_bar = (t0 (r + a) - o) / Z`; equals `K0 (a + r) / (a0 Z)` under RSMA.
pub fn branch_threshold(ctx: &ExtractionContext) -> f64 {
    (ctx.broadcast_time * ctx.link_rate - ctx.overhead_bits) / ctx.profile.graph_bits
}

/// Derivative of the Lagrangian in `rho` on the given branch.
pub fn stationarity(rho: f64, lambda: f64, branch: Branch, ctx: &ExtractionContext) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, 1]")));
    }
    Ok(stationarity_unchecked(rho, lambda, branch, ctx))
}

fn stationarity_unchecked(rho: f64, lambda: f64, branch: Branch, ctx: &ExtractionContext) -> f64 {
    let u = &ctx.profile;
    ctx.kappa * ctx.f * ctx.f * u.extraction_slope(rho)
        + ctx.p * u.graph_bits / ctx.link_rate
        + ctx.kappa * ctx.g * ctx.g * u.recovery_slope(rho)
        + lambda * ctx.latency_slope(rho, branch)
}

/// Root of an increasing function on `[lo, hi]`, clamped to the interval.
fn bisect_increasing(mut lo: f64, mut hi: f64, tol: f64, d: impl Fn(f64) -> f64) -> f64 {
    if d(lo) >= 0.0 {
        return lo;
    }
    if d(hi) <= 0.0 {
        return hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `J + lambda * latency_branch` over the branch region.
pub fn solve_rho_given_lambda(lambda: f64, branch: Branch, ctx: &ExtractionContext) -> Option<f64> {
    let (lo, hi) = ctx.region(branch)?;
    Some(bisect_increasing(lo, hi, RHO_TOL, |r| stationarity_unchecked(r, lambda, branch, ctx)))
}

/// Multiplier of the deadline on the branch; `Ok(None)` when the region is
/// empty, an error when the deadline cannot be met on it.
pub fn solve_lambda(branch: Branch, ctx: &ExtractionContext) -> Result<Option<f64>> {
    let Some((lo, hi)) = ctx.region(branch) else {
        return Ok(None);
    };
    let t = ctx.deadline_s;
    let lat = |lambda: f64| {
        let rho = bisect_increasing(lo, hi, RHO_TOL, |r| stationarity_unchecked(r, lambda, branch, ctx));
        ctx.branch_latency(rho, branch)
    };
    if lat(0.0) <= t {
        return Ok(Some(0.0));
    }
    let fastest = bisect_increasing(lo, hi, RHO_TOL, |r| ctx.latency_slope(r, branch));
    if ctx.branch_latency(fastest, branch) > t * (1.0 + LATENCY_RTOL) {
        return Err(Error::InfeasibleDeadline { block: Block::Extraction, users: vec![] });
    }
    let mut lambda_lo = 0.0;
    let mut lambda_hi = 1.0;
    while lat(lambda_hi) > t {
        lambda_lo = lambda_hi;
        lambda_hi *= 2.0;
        if lambda_hi > LAMBDA_MAX {
            return Err(Error::InfeasibleDeadline { block: Block::Extraction, users: vec![] });
        }
    }
    for _ in 0..200 {
        let l_hi = lat(lambda_hi);
        if t - l_hi <= LAMBDA_RTOL * t || lambda_hi - lambda_lo <= 1e-15 * lambda_hi {
            break;
        }
        let mid = 0.5 * (lambda_lo + lambda_hi);
        if lat(mid) > t {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
        }
    }
    Ok(Some(lambda_hi))
}

fn branch_solution(branch: Branch, ctx: &ExtractionContext) -> Result<Option<ExtractionSolution>> {
    let lambda = match solve_lambda(branch, ctx) {
        Ok(Some(l)) => l,
        Ok(None) => return Ok(None),
        Err(Error::InfeasibleDeadline { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let rho = solve_rho_given_lambda(lambda, branch, ctx).expect("region checked");
    Ok(Some(ExtractionSolution {
        rho_star: rho,
        lambda1: lambda,
        branch,
        objective: ctx.objective(rho),
        latency: ctx.latency(rho),
    }))
}

/// Optimal extraction ratio of one user.
pub fn solve_extraction(ctx: &ExtractionContext) -> Result<ExtractionSolution> {
    ctx.validate()?;
    let bar = branch_threshold(ctx);
    let a = branch_solution(Branch::A, ctx)?;
    let b = branch_solution(Branch::B, ctx)?;
    match (a, b) {
        (None, None) => Err(Error::InfeasibleDeadline { block: Block::Extraction, users: vec![] }),
        (Some(s), None) | (None, Some(s)) => Ok(s),
        (Some(sa), Some(sb)) => {
            let a_ok = sa.rho_star >= bar;
            let b_ok = sb.rho_star < bar;
            if a_ok != b_ok {
                return Ok(if a_ok { sa } else { sb });
            }
            Ok(best_candidate(ctx, bar, sa, sb))
        }
    }
}

/// Exhaustive pick among the branch solutions and the region endpoints.
fn best_candidate(
    ctx: &ExtractionContext,
    bar: f64,
    sa: ExtractionSolution,
    sb: ExtractionSolution,
) -> ExtractionSolution {
    let gamma = ctx.profile.gamma_min;
    let limit = ctx.deadline_s * (1.0 + LATENCY_RTOL);
    let mut best = if sa.objective <= sb.objective { sa.clone() } else { sb.clone() };
    for rho in [bar.clamp(gamma, 1.0), gamma, 1.0] {
        let latency = ctx.latency(rho);
        let objective = ctx.objective(rho);
        if latency <= limit && objective < best.objective {
            let branch = if rho >= bar { Branch::A } else { Branch::B };
            best = ExtractionSolution { rho_star: rho, lambda1: 0.0, branch, objective, latency };
        }
    }
    // The endpoint candidates carry no multiplier; reuse the branch one
    // when the winner coincides with a branch solution.
    for s in [&sa, &sb] {
        if s.rho_star == best.rho_star {
            best.lambda1 = s.lambda1;
        }
    }
    best
}
