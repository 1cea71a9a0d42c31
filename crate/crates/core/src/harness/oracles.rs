//! Independent reference solvers and the validation suites built on them.
//!
//! Each suite draws seeded random instances, solves them with the library
//! and with a brute-force or textbook reference, and records the worst
//! disagreement. Suites are deterministic in their seeds.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::capacity::{dual_ascent, CapacityContext, CapacitySolution};
use crate::convex::{self, Affine, ConvexProgram, Quadratic, SmoothFn, SolveOptions};
use crate::error::{Error, Result};
use crate::extraction::{solve_extraction, stationarity, ExtractionContext, ExtractionSolution};
use crate::model::{energy_for, feasibility_for, Allocation, ChannelSet, Scheme, SystemConfig, UserProfile};
use crate::orchestrator::{initialize, SolverOptions};
use crate::sca::{self, ScaIterate, ScaOptions};

/// How much of each suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::Parse(format!("unknown validation level '{other}' (quick|full)"))),
        }
    }
}

/// Result of one suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// One message per failed case.
    pub failures: Vec<String>,
    /// Largest observed value of the suite's headline error measure.
    pub worst: f64,
    pub elapsed: Duration,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: Vec::new(), worst: 0.0, elapsed: Duration::ZERO }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn observe(&mut self, err: f64) {
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    /// Outcome without timing, for comparing runs.
    pub fn fingerprint(&self) -> String {
        format!("{}|{}|{:?}|{:e}", self.name, self.cases, self.failures, self.worst)
    }
}

impl std::fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<12} cases={:<4} worst={:.3e} failures={} ({:.1?})",
            self.name,
            self.cases,
            self.worst,
            self.failures.len(),
            self.elapsed
        )
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub suites: Vec<SuiteOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteOutcome::passed)
    }

    pub fn fingerprint(&self) -> Vec<String> {
        self.suites.iter().map(SuiteOutcome::fingerprint).collect()
    }
}

fn timed(mut f: impl FnMut() -> SuiteOutcome) -> SuiteOutcome {
    let clock = Instant::now();
    let mut out = f();
    out.elapsed = clock.elapsed();
    out
}

/// Runs every suite at the given level.
pub fn validate(level: Level) -> ValidationReport {
    let (ext, cap, cvx, sca_rand, sca_grid) = match level {
        Level::Quick => (20, 10, 5, 3, 3),
        Level::Full => (100, 50, 20, 20, 10),
    };
    ValidationReport {
        suites: vec![
            extraction_suite(ext),
            capacity_suite(cap),
            convex_suite(cvx),
            sca_monotone_suite(sca_rand),
            sca_grid_suite(sca_grid),
        ],
    }
}

// ---------------------------------------------------------------------------
// Extraction

/// Best ratio on the grid `Gamma, Gamma + step, ..., 1` among points meeting
/// the deadline, with the true max-branch objective and latency.
pub fn extraction_grid(ctx: &ExtractionContext, step: f64) -> Option<(f64, f64)> {
    let gamma = ctx.profile.gamma_min;
    let n = ((1.0 - gamma) / step).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=n + 1 {
        let rho = if i > n { 1.0 } else { gamma + i as f64 * step };
        if ctx.latency(rho) > ctx.deadline_s {
            continue;
        }
        let j = ctx.objective(rho);
        if best.is_none_or(|(_, b)| j < b) {
            best = Some((rho, j));
        }
    }
    best
}

fn random_profile(rng: &mut ChaCha8Rng) -> UserProfile {
    UserProfile {
        distance_km: 0.1,
        graph_bits: rng.random_range(5e6..2e7),
        base_cycles: rng.random_range(5e8..2e9),
        c1: rng.random_range(5e7..2e8),
        c2: rng.random_range(0.3..0.7),
        c3: 2,
        c4: rng.random_range(5e7..2e8),
        c5: rng.random_range(0.5..1.5),
        gamma_min: rng.random_range(0.1..0.5),
        g_max_hz: 2e9,
    }
}

/// Random extraction context. `tight` places the deadline strictly between
/// the least reachable latency and the latency of the unconstrained optimum.
pub fn random_extraction_context(seed: u64, tight: bool) -> ExtractionContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = ExtractionContext {
        profile: random_profile(&mut rng),
        kappa: 1e-28,
        deadline_s: 1.0,
        f: rng.random_range(1e9..1e10),
        g: rng.random_range(5e8..2e9),
        p: rng.random_range(0.01..0.5),
        link_rate: rng.random_range(1e7..2e8),
        broadcast_time: if rng.random_bool(0.5) { rng.random_range(0.01..0.3) } else { 0.0 },
        overhead_bits: if rng.random_bool(0.5) { 5e5 } else { 0.0 },
    };
    let u: f64 = rng.random_range(0.1..0.9);
    // Latency is convex in rho, so its maximum sits at an endpoint.
    let worst = ctx.latency(ctx.profile.gamma_min).max(ctx.latency(1.0));
    ctx.deadline_s = 10.0 * worst;
    if tight {
        let (rho_free, _) = extraction_grid(&ctx, 1e-4).expect("loose deadline admits every ratio");
        let at_free = ctx.latency(rho_free);
        let gamma = ctx.profile.gamma_min;
        let least = (0..=10_000).map(|i| ctx.latency(gamma + (1.0 - gamma) * i as f64 / 1e4)).fold(f64::INFINITY, f64::min);
        ctx.deadline_s = least + u * (at_free - least);
    }
    ctx
}

fn check_extraction(out: &mut SuiteOutcome, ctx: &ExtractionContext, sol: &ExtractionSolution, tag: &str, two_sided: bool) {
    let Some((rho_grid, obj_grid)) = extraction_grid(ctx, 1e-5) else {
        out.check(false, || format!("{tag}: grid found no feasible ratio"));
        return;
    };
    let drho = (sol.rho_star - rho_grid).abs();
    let rel = (sol.objective - obj_grid) / obj_grid.abs();
    out.observe(drho);
    out.check(drho <= 1e-3, || format!("{tag}: rho {} vs grid {rho_grid}", sol.rho_star));
    let obj_ok = if two_sided { rel.abs() <= 1e-6 } else { rel <= 1e-6 };
    out.check(obj_ok, || format!("{tag}: objective {} vs grid {obj_grid} (rel {rel:e})", sol.objective));

    let t = ctx.deadline_s;
    let lat = ctx.latency(sol.rho_star);
    let lam = sol.lambda1;
    out.check(lam >= 0.0, || format!("{tag}: negative multiplier {lam}"));
    out.check(lat <= t * (1.0 + 1e-6), || format!("{tag}: latency {lat} over deadline {t}"));
    let cs = (lam * (lat - t)).abs();
    out.check(cs <= 1e-6 * (lam * t).max(1.0), || format!("{tag}: complementary slackness {cs:e}"));
    // Stationarity only holds away from the clamps and the branch kink.
    if let Some((lo, hi)) = ctx.region(sol.branch) {
        if sol.rho_star > lo + 1e-6 && sol.rho_star < hi - 1e-6 {
            if let Ok(d) = stationarity(sol.rho_star, lam, sol.branch, ctx) {
                let scale = ctx.objective(sol.rho_star).max(lam * t);
                out.check(d.abs() <= 1e-6 * scale, || format!("{tag}: stationarity residual {d:e}"));
            }
        }
    }
}

/// Extraction against the grid oracle: `cases` contexts with a slack
/// deadline (seeds `0..cases`) and `cases` with a binding one.
pub fn extraction_suite(cases: usize) -> SuiteOutcome {
    extraction_suite_with(cases, solve_extraction)
}

pub fn extraction_suite_with(cases: usize, solver: fn(&ExtractionContext) -> Result<ExtractionSolution>) -> SuiteOutcome {
    timed(|| {
        let mut out = SuiteOutcome::new("extraction");
        for seed in 0..cases as u64 {
            for tight in [false, true] {
                let ctx = random_extraction_context(seed + if tight { 10_000 } else { 0 }, tight);
                let tag = format!("seed {seed}{}", if tight { " tight" } else { "" });
                out.cases += 1;
                match solver(&ctx) {
                    Ok(sol) => check_extraction(&mut out, &ctx, &sol, &tag, !tight),
                    Err(e) => out.check(false, || format!("{tag}: {e}")),
                }
            }
        }
        out
    })
}

// ---------------------------------------------------------------------------
// Capacity

/// Least energy over a log-spaced grid of `g_k` with `points` values per
/// user, refined by zooming around the best cell. For fixed `g_k` the best
/// `f_k` is the smallest one meeting the deadline, since energy and budget
/// use both grow with `f_k`.
pub fn capacity_grid(ctx: &CapacityContext, points: usize, zooms: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let k = ctx.num_users();
    let lower: Vec<f64> = (0..k)
        .map(|i| ctx.y2[i] / (ctx.deadline_s - ctx.fixed_time[i]))
        .collect();
    let mut ranges: Vec<(f64, f64)> = (0..k).map(|i| (lower[i] * (1.0 + 1e-9), ctx.g_max_hz[i])).collect();
    if ranges.iter().any(|(lo, hi)| !(lo < hi)) {
        return None;
    }
    let evaluate = |g: &[f64]| -> Option<(Vec<f64>, f64)> {
        let mut f = Vec::with_capacity(k);
        for i in 0..k {
            let room = ctx.deadline_s - ctx.fixed_time[i] - ctx.y2[i] / g[i];
            if room <= 0.0 {
                return None;
            }
            f.push(ctx.y1[i] / room);
        }
        (f.iter().sum::<f64>() <= ctx.f_max_hz).then(|| {
            let obj = ctx.objective(&f, g);
            (f, obj)
        })
    };
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for _ in 0..=zooms {
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(lo, hi)| {
                let (a, b) = (lo.ln(), hi.ln());
                // Endpoints exact: a binding budget can leave only `hi` feasible.
                (0..points)
                    .map(|j| match j {
                        0 => lo,
                        j if j == points - 1 => hi,
                        j => (a + (b - a) * j as f64 / (points - 1) as f64).exp(),
                    })
                    .collect()
            })
            .collect();
        let mut index = vec![0usize; k];
        loop {
            let g: Vec<f64> = (0..k).map(|i| axes[i][index[i]]).collect();
            if let Some((f, obj)) = evaluate(&g) {
                if best.as_ref().is_none_or(|b| obj < b.2) {
                    best = Some((f, g, obj));
                }
            }
            let mut i = 0;
            while i < k {
                index[i] += 1;
                if index[i] < points {
                    break;
                }
                index[i] = 0;
                i += 1;
            }
            if i == k {
                break;
            }
        }
        let (_, g, _) = best.as_ref()?;
        // Zoom to two cells either side of the best point.
        ranges = (0..k)
            .map(|i| {
                let (lo, hi) = ranges[i];
                let ratio = (hi / lo).powf(2.0 / (points - 1) as f64);
                ((g[i] / ratio).max(lo), (g[i] * ratio).min(hi))
            })
            .collect();
    }
    best
}

/// Random feasible capacity context with one or two users; odd seeds make
/// the frequency budget bind.
pub fn random_capacity_context(seed: u64) -> CapacityContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = if rng.random_bool(0.5) { 1 } else { 2 };
    let mut ctx = CapacityContext {
        y1: (0..k).map(|_| rng.random_range(5e8..3e9)).collect(),
        y2: (0..k).map(|_| rng.random_range(5e7..5e8)).collect(),
        fixed_time: (0..k).map(|_| rng.random_range(0.0..0.5)).collect(),
        deadline_s: 1.0,
        kappa: 1e-28,
        f_max_hz: 1e12,
        g_max_hz: (0..k).map(|_| rng.random_range(1e9..4e9)).collect(),
    };
    if seed % 2 == 1 {
        // Budget between the least feasible total and the unconstrained use.
        let least: f64 = (0..k)
            .map(|i| ctx.y1[i] / (ctx.deadline_s - ctx.fixed_time[i] - ctx.y2[i] / ctx.g_max_hz[i]))
            .sum();
        let free = dual_ascent(&ctx).map(|s| s.f.iter().sum::<f64>()).unwrap_or(2.0 * least);
        ctx.f_max_hz = least + rng.random_range(0.1..0.9) * (free - least);
    }
    ctx
}

fn check_capacity(out: &mut SuiteOutcome, ctx: &CapacityContext, sol: &CapacitySolution, tag: &str) {
    let Some((_, _, grid)) = capacity_grid(ctx, 200, 3) else {
        out.check(false, || format!("{tag}: grid found no feasible point"));
        return;
    };
    let rel = (sol.objective - grid) / grid;
    out.observe(rel.abs());
    out.check(rel.abs() <= 1e-3, || format!("{tag}: objective {} vs grid {grid} (rel {rel:e})", sol.objective));
    let t = ctx.deadline_s;
    for i in 0..ctx.num_users() {
        let lat = ctx.latency(i, sol.f[i], sol.g[i]);
        let lam = sol.state.lambda2[i];
        out.check(lat <= t * (1.0 + 1e-6), || format!("{tag}: user {i} latency {lat}"));
        let cs = (lam * (lat - t)).abs();
        out.check(cs <= 1e-6 * (lam * t).max(1.0), || format!("{tag}: user {i} slackness {cs:e}"));
    }
    let total: f64 = sol.f.iter().sum();
    let nu = sol.state.lambda3;
    out.check(total <= ctx.f_max_hz * (1.0 + 1e-6), || format!("{tag}: budget {total} over {}", ctx.f_max_hz));
    let cs = (nu * (total - ctx.f_max_hz)).abs();
    out.check(cs <= 1e-6 * (nu * ctx.f_max_hz).max(1.0), || format!("{tag}: budget slackness {cs:e}"));
}

/// Capacity against the grid oracle on `cases` random contexts.
pub fn capacity_suite(cases: usize) -> SuiteOutcome {
    capacity_suite_with(cases, dual_ascent)
}

pub fn capacity_suite_with(cases: usize, solver: fn(&CapacityContext) -> Result<CapacitySolution>) -> SuiteOutcome {
    timed(|| {
        let mut out = SuiteOutcome::new("capacity");
        for seed in 0..cases as u64 {
            let ctx = random_capacity_context(seed);
            let tag = format!("seed {seed} K={}", ctx.num_users());
            out.cases += 1;
            match solver(&ctx) {
                Ok(sol) => check_capacity(&mut out, &ctx, &sol, &tag),
                Err(e) => out.check(false, || format!("{tag}: {e}")),
            }
        }
        out
    })
}

// ---------------------------------------------------------------------------
// Convex core

/// Strictly convex quadratic over a ball, with extra affine constraints that
/// are slack at the optimum. The optimum is planted through the KKT
/// conditions: on the sphere with a positive multiplier when `active`,
/// inside the ball otherwise.
pub struct PlantedProgram {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub cuts: Vec<(DVector<f64>, f64)>,
    pub optimum: DVector<f64>,
}

impl PlantedProgram {
    pub fn random(seed: u64, dim: usize, active: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { rng.random_range(-1.0..1.0) };
        let a = DMatrix::from_fn(dim, dim, |_, _| normal());
        let q = a.transpose() * &a + DMatrix::identity(dim, dim) * 0.5;
        let center = DVector::from_fn(dim, |_, _| normal());
        let radius = 1.0 + normal().abs();
        let dir = DVector::from_fn(dim, |_, _| normal()).normalize();
        let (optimum, mu) = if active {
            (&center + &dir * radius, 0.5 + normal().abs())
        } else {
            (&center + &dir * (0.5 * radius), 0.0)
        };
        // Gradient of |x - center|^2 - r^2 is 2 (x - center).
        let c = -(&q * &optimum) - (&optimum - &center) * (2.0 * mu);
        let cuts = (0..3)
            .map(|_| {
                let n = DVector::from_fn(dim, |_, _| normal());
                let b = n.dot(&optimum).max(n.dot(&center)) + 0.5 + normal().abs();
                (n, b)
            })
            .collect();
        Self { q, c, center, radius, cuts, optimum }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn program(&self) -> ConvexProgram<'static> {
        let n = self.center.len();
        let mut constraints: Vec<Box<dyn SmoothFn>> = vec![Box::new(Quadratic {
            q: DMatrix::identity(n, n) * 2.0,
            c: -&self.center * 2.0,
            r: self.center.norm_squared() - self.radius * self.radius,
        })];
        for (a, b) in &self.cuts {
            constraints.push(Box::new(Affine { a: a.as_slice().to_vec(), b: -b }));
        }
        ConvexProgram {
            dim: n,
            objective: Box::new(Quadratic { q: self.q.clone(), c: self.c.clone(), r: 0.0 }),
            constraints,
            start: self.center.as_slice().to_vec(),
            bounds: None,
        }
    }

    /// Projected gradient on the ball alone. The cuts are slack at the
    /// optimum, so dropping them leaves it unchanged.
    pub fn projected_gradient(&self, iters: usize) -> DVector<f64> {
        let step = 1.0 / self.q.symmetric_eigenvalues().max();
        let project = |x: DVector<f64>| {
            let d = &x - &self.center;
            let norm = d.norm();
            if norm <= self.radius { x } else { &self.center + d * (self.radius / norm) }
        };
        let mut x = self.center.clone();
        for _ in 0..iters {
            let grad = &self.q * &x + &self.c;
            let next = project(&x - grad * step);
            let moved = (&next - &x).norm();
            x = next;
            if moved <= 1e-15 * (1.0 + x.norm()) {
                break;
            }
        }
        x
    }
}

/// Planted programs solved by the barrier method and by projected gradient.
pub fn convex_suite(cases: usize) -> SuiteOutcome {
    timed(|| {
        let mut out = SuiteOutcome::new("convex");
        let opts = SolveOptions { tol: 1e-12, ..SolveOptions::default() };
        for seed in 0..cases as u64 {
            let planted = PlantedProgram::random(seed, 10, seed % 2 == 0);
            let program = planted.program();
            let tag = format!("seed {seed}");
            out.cases += 1;
            let report = match convex::solve(&program, &opts) {
                Ok(r) => r,
                Err(e) => {
                    out.check(false, || format!("{tag}: {e}"));
                    continue;
                }
            };
            let x = DVector::from_column_slice(&report.solution);
            let err = (&x - &planted.optimum).norm();
            out.observe(err);
            out.check(err <= 1e-6, || format!("{tag}: distance to planted optimum {err:e}"));
            out.check(report.max_violation < 0.0, || format!("{tag}: final iterate on the boundary"));
            let interior = report.trace.iter().flatten().all(|v| v.is_finite());
            out.check(interior, || format!("{tag}: barrier left the interior"));
            let reference = planted.projected_gradient(200_000);
            let (a, b) = (planted.objective(&x), planted.objective(&reference));
            let rel = (a - b).abs() / b.abs().max(1.0);
            out.check(rel <= 1e-5, || format!("{tag}: barrier {a} vs projected gradient {b}"));
        }
        out
    })
}

// ---------------------------------------------------------------------------
// SCA

fn feasible_start(scheme: Scheme, cfg: &SystemConfig, ch: &ChannelSet) -> Option<Allocation> {
    let init = initialize(scheme, cfg, ch, 0);
    if feasibility_for(scheme, &init, ch, cfg).feasible {
        return Some(init);
    }
    // Same ratios at the lightest payload, then the compute refit.
    crate::orchestrator::solve_scheme(scheme, cfg, ch, &SolverOptions { max_outer: 1, ..Default::default() })
        .ok()
        .map(|s| s.allocation)
}

/// SCA on default-size instances: true energy never increases across
/// accepted rounds, and every decoded round satisfies the original
/// constraints.
pub fn sca_monotone_suite(cases: usize) -> SuiteOutcome {
    timed(|| {
        let mut out = SuiteOutcome::new("sca");
        let opts = ScaOptions::default();
        for seed in 0..cases as u64 {
            let (cfg, ch) = match ScenarioConfig::default().build(seed) {
                Ok(v) => v,
                Err(e) => {
                    out.check(false, || format!("seed {seed}: {e}"));
                    continue;
                }
            };
            for scheme in [Scheme::Rsma, Scheme::Sdma] {
                let tag = format!("seed {seed} {scheme}");
                let Some(start) = feasible_start(scheme, &cfg, &ch) else {
                    out.check(false, || format!("{tag}: no feasible start"));
                    continue;
                };
                out.cases += 1;
                match sca::solve_sca(scheme, &start, &ch, &cfg, &opts) {
                    Ok(rep) => {
                        let rise = rep.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                        out.observe(rise.max(0.0));
                        out.check(rise <= 1e-9, || format!("{tag}: energy rose by {rise:e}"));
                        let ok = feasibility_for(scheme, &rep.allocation, &ch, &cfg).feasible;
                        out.check(ok, || format!("{tag}: final allocation infeasible"));
                    }
                    Err(e) => out.check(false, || format!("{tag}: {e}")),
                }
                // Every round's decoded point, accepted or not.
                let mut current = start;
                for round in 0..3 {
                    let iterate = ScaIterate::from_allocation(scheme, &current, &ch, &cfg);
                    let Ok(mut sub) = sca::build_subproblem(scheme, &iterate, &current, &ch, &cfg) else { break };
                    let Ok(x0) =
                        convex::find_strictly_feasible(&sub.program.constraints, sub.program.bounds.as_deref(), &sub.program.start, opts.margin)
                    else {
                        break;
                    };
                    sub.program.start = x0;
                    let Ok(rep) = convex::solve(&sub.program, &opts.barrier) else { break };
                    let next = sub.decode(&rep.solution, &current);
                    let ok = feasibility_for(scheme, &next, &ch, &cfg).feasible;
                    out.check(ok, || format!("{tag}: round {round} decoded point infeasible"));
                    current = next;
                }
            }
        }
        out
    })
}

/// Least transmit energy of a one-user, one-antenna RSMA link over a grid
/// of `(p0, p1)`, with the rate split solved in closed form per point.
/// Returns `(energy, p0, p1)`.
pub fn single_link_grid(cfg: &SystemConfig, gain: f64, bits: f64, tau: f64, points: usize, zooms: usize) -> Option<(f64, f64, f64)> {
    let b = cfg.bandwidth_hz;
    let noise = cfg.noise_power_w;
    let k0 = cfg.knowledge_bits;
    let energy = |p0: f64, p1: f64| -> Option<f64> {
        if p0 + p1 > cfg.p_max_w {
            return None;
        }
        let r = b * (1.0 + p1 * gain / noise).log2();
        let c0 = b * (1.0 + p0 * gain / (p1 * gain + noise)).log2();
        // a0 + a1 = c0; minimize p1 L / (r + a1) + p0 K0 / a0.
        let lo = k0 / tau;
        let hi = c0 - (bits / tau - r).max(0.0);
        if lo > hi {
            return None;
        }
        let s = (p0 * k0 / (p1 * bits)).sqrt();
        let a0 = if s.is_finite() { (s * (r + c0) / (1.0 + s)).clamp(lo, hi) } else { hi };
        let a1 = c0 - a0;
        Some(p1 * bits / (r + a1) + p0 * k0 / a0)
    };
    let pmax = cfg.p_max_w;
    let mut ranges = [(pmax * 1e-7, pmax), (pmax * 1e-15, pmax)];
    let mut best: Option<(f64, f64, f64)> = None;
    for _ in 0..=zooms {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let (a, z) = (f64::ln(lo), f64::ln(hi));
            (0..points).map(|j| (a + (z - a) * j as f64 / (points - 1) as f64).exp()).collect()
        };
        let (x0, x1) = (axis(ranges[0]), axis(ranges[1]));
        for &p0 in &x0 {
            for &p1 in &x1 {
                if let Some(e) = energy(p0, p1) {
                    if best.is_none_or(|(bst, _, _)| e < bst) {
                        best = Some((e, p0, p1));
                    }
                }
            }
        }
        let (_, p0, p1) = best?;
        let shrink = |(lo, hi): (f64, f64), v: f64| {
            let ratio = (hi / lo).powf(2.0 / (points - 1) as f64);
            ((v / ratio).max(lo), (v * ratio).min(hi))
        };
        ranges = [shrink(ranges[0], p0), shrink(ranges[1], p1)];
    }
    best
}

/// SCA against the grid oracle on one-user, one-antenna RSMA links, with
/// extraction and compute frozen at a feasible start.
pub fn sca_grid_suite(cases: usize) -> SuiteOutcome {
    timed(|| {
        let mut out = SuiteOutcome::new("sca-grid");
        let opts = ScaOptions { rel_tol: 1e-7, max_iter: 300, ..ScaOptions::default() };
        let scenario = ScenarioConfig { num_users: 1, num_antennas: 1, ..ScenarioConfig::default() };
        for seed in 0..cases as u64 {
            let tag = format!("seed {seed}");
            let Ok((cfg, ch)) = scenario.build(seed) else {
                out.check(false, || format!("{tag}: scenario"));
                continue;
            };
            let Some(start) = feasible_start(Scheme::Rsma, &cfg, &ch) else {
                out.check(false, || format!("{tag}: no feasible start"));
                continue;
            };
            out.cases += 1;
            let u = &cfg.users[0];
            let rho = start.rho[0];
            let tau = cfg.deadline_s
                - u.extraction_cycles(rho).unwrap_or(f64::INFINITY) / start.f[0]
                - u.recovery_cycles(rho).unwrap_or(f64::INFINITY) / start.g[0];
            let gain = ch.h[0][0].norm_sqr();
            let bits = start.payload_bits(Scheme::Rsma, &cfg, 0);
            let Some((grid, _, _)) = single_link_grid(&cfg, gain, bits, tau, 300, 4) else {
                out.check(false, || format!("{tag}: grid found no feasible point"));
                continue;
            };
            match sca::solve_sca(Scheme::Rsma, &start, &ch, &cfg, &opts) {
                Ok(rep) => {
                    let e = energy_for(Scheme::Rsma, &rep.allocation, &ch, &cfg).map(|e| e.transmission());
                    let e = e.unwrap_or(f64::INFINITY);
                    let rel = (e - grid) / grid;
                    out.observe(rel.abs());
                    out.check(rel.abs() <= 1e-3, || format!("{tag}: SCA {e} vs grid {grid} (rel {rel:e})"));
                }
                Err(e) => out.check(false, || format!("{tag}: {e}")),
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parses() {
        assert_eq!("quick".parse::<Level>().unwrap(), Level::Quick);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("fast".parse::<Level>().is_err());
    }

    #[test]
    fn extraction_oracle_agrees() {
        let out = extraction_suite(5);
        assert!(out.passed(), "{:?}", out.failures);
    }

    #[test]
    fn extraction_oracle_catches_wrong_solver() {
        fn nudged(ctx: &ExtractionContext) -> Result<ExtractionSolution> {
            let mut s = solve_extraction(ctx)?;
            s.rho_star = (s.rho_star + 0.01).min(1.0);
            s.objective = ctx.objective(s.rho_star);
            Ok(s)
        }
        assert!(!extraction_suite_with(5, nudged).passed());
    }

    #[test]
    fn capacity_oracle_agrees() {
        let out = capacity_suite(6);
        assert!(out.passed(), "{:?}", out.failures);
    }

    #[test]
    fn capacity_oracle_catches_wrong_solver() {
        fn overclocked(ctx: &CapacityContext) -> Result<CapacitySolution> {
            let mut s = dual_ascent(ctx)?;
            s.f.iter_mut().for_each(|f| *f *= 1.01);
            s.objective = ctx.objective(&s.f, &s.g);
            Ok(s)
        }
        assert!(!capacity_suite_with(6, overclocked).passed());
    }

    #[test]
    fn capacity_grid_single_user_closed_form() {
        // Idle budget and a loose g cap: f = g = (y1 + y2) / (T - c).
        let ctx = CapacityContext {
            y1: vec![1e9],
            y2: vec![3e8],
            fixed_time: vec![0.2],
            deadline_s: 1.0,
            kappa: 1e-28,
            f_max_hz: 1e12,
            g_max_hz: vec![1e10],
        };
        let (f, g, _) = capacity_grid(&ctx, 200, 3).unwrap();
        let exact = 1.3e9 / 0.8;
        assert!((f[0] - exact).abs() <= 1e-4 * exact && (g[0] - exact).abs() <= 1e-4 * exact);
    }

    #[test]
    fn planted_optimum_is_kkt() {
        for active in [true, false] {
            let p = PlantedProgram::random(3, 6, active);
            let x = p.projected_gradient(200_000);
            assert!((&x - &p.optimum).norm() < 1e-7, "active={active}");
        }
    }

    #[test]
    fn convex_oracle_agrees() {
        let out = convex_suite(4);
        assert!(out.passed(), "{:?}", out.failures);
    }

    #[test]
    fn grid_split_matches_brute_force() {
        // The closed-form split against a scan over a0 at one power pair.
        let mut cfg = crate::model::tests::system(1);
        cfg.num_antennas = 1;
        let (gain, bits, tau) = (1e-9 * 1e-1 / cfg.noise_power_w * cfg.noise_power_w * 1e2, 3e6, 0.6);
        let (e, p0, p1) = single_link_grid(&cfg, gain, bits, tau, 60, 0).unwrap();
        let b = cfg.bandwidth_hz;
        let r = b * (1.0 + p1 * gain / cfg.noise_power_w).log2();
        let c0 = b * (1.0 + p0 * gain / (p1 * gain + cfg.noise_power_w)).log2();
        let mut brute = f64::INFINITY;
        for i in 1..200_000 {
            let a0 = c0 * i as f64 / 200_000.0;
            let a1 = c0 - a0;
            if cfg.knowledge_bits / a0 <= tau && bits / (r + a1) <= tau {
                brute = brute.min(p1 * bits / (r + a1) + p0 * cfg.knowledge_bits / a0);
            }
        }
        assert!(e <= brute * (1.0 + 1e-12) && brute <= e * (1.0 + 1e-4), "{e} vs {brute}");
    }

    #[test]
    fn quick_suites_deterministic() {
        let a = sca_grid_suite(1);
        let b = sca_grid_suite(1);
        assert!(a.passed(), "{:?}", a.failures);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}
