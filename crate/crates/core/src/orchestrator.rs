//! Block-coordinate descent over extraction, compute and communication, plus
//! initialization, multi-start and the FDMA/SDMA comparators.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity::{dual_ascent, CapacityContext};
use crate::error::{Block, Error, Result};
use crate::extraction::{solve_extraction, ExtractionContext};
use crate::model::{
    common_rate, energy_for, feasibility_for, gain, normalized, Allocation, ChannelSet, EnergyBreakdown,
    Scheme, SystemConfig,
};
use crate::sca::{self, solve_sca, ScaOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when an outer pass lowers the energy by less than this fraction.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Number of starting points; the first is the deterministic default.
    pub restarts: usize,
    pub sca: ScaOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { outer_tol: 1e-3, max_outer: 50, restarts: 1, sca: ScaOptions::default() }
    }
}

/// Energies after each block of one outer pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassRecord {
    pub after_extraction: f64,
    pub after_capacity: f64,
    pub after_communication: f64,
    pub capacity_iterations: usize,
    pub sca_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Total energy at the start and after every outer pass.
    pub energy: Vec<f64>,
    pub passes: Vec<PassRecord>,
    pub converged: bool,
    pub wall_time: Duration,
}

impl RunTrace {
    pub fn outer_iterations(&self) -> usize {
        self.passes.len()
    }
}

#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub scheme: Scheme,
    pub allocation: Allocation,
    pub energy: EnergyBreakdown,
    pub trace: RunTrace,
    /// Index of the winning start.
    pub restart: usize,
}

fn sum_channels(channels: &ChannelSet) -> Vec<Complex64> {
    let n = channels.num_antennas();
    channels.h.iter().fold(vec![Complex64::new(0.0, 0.0); n], |acc, h| {
        acc.iter().zip(h).map(|(a, b)| a + b).collect()
    })
}

/// Starting allocation. `seed = 0` gives the deterministic default
/// (matched-filter beams, half the power on the common stream, even splits);
/// other seeds perturb powers, splits, ratios and beams.
pub fn initialize(scheme: Scheme, cfg: &SystemConfig, channels: &ChannelSet, seed: u64) -> Allocation {
    let k = cfg.num_users;
    let kf = k as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturb = seed != 0;

    let mut w = vec![normalized(&sum_channels(channels))];
    for h in &channels.h {
        if perturb {
            let noisy: Vec<Complex64> = h
                .iter()
                .map(|c| {
                    let jitter = Complex64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
                    c * (Complex64::new(1.0, 0.0) + jitter)
                })
                .collect();
            w.push(normalized(&noisy));
        } else {
            w.push(normalized(h));
        }
    }

    let weights: Vec<f64> =
        (0..k).map(|_| if perturb { rng.random_range(0.5..1.5) } else { 1.0 }).collect();
    let total_weight: f64 = weights.iter().sum();
    let common_share = match scheme {
        Scheme::Rsma => {
            if perturb {
                rng.random_range(0.2..0.8)
            } else {
                0.5
            }
        }
        _ => 0.0,
    };
    let mut p = vec![common_share * cfg.p_max_w];
    p.extend(weights.iter().map(|wk| (1.0 - common_share) * cfg.p_max_w * wk / total_weight));

    let rho = cfg
        .users
        .iter()
        .map(|u| {
            if perturb {
                rng.random_range(u.gamma_min.max(0.3)..=1.0)
            } else {
                u.gamma_min.max(0.5)
            }
        })
        .collect();

    let mut alloc = Allocation {
        rho,
        f: vec![cfg.f_max_hz / kf; k],
        g: cfg.users.iter().map(|u| u.g_max_hz).collect(),
        p,
        a: vec![0.0; k + 1],
        w,
    };
    if scheme.has_common_stream() {
        let c0 = common_rate(&alloc, channels, cfg);
        let first = if perturb { rng.random_range(0.3..0.7) } else { 0.5 };
        alloc.a[0] = first * c0;
        for j in 1..=k {
            alloc.a[j] = (1.0 - first) * c0 / kf;
        }
    }
    alloc
}

fn total_energy(scheme: Scheme, alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    if !feasibility_for(scheme, alloc, channels, cfg).feasible {
        return f64::INFINITY;
    }
    energy_for(scheme, alloc, channels, cfg).map(|e| e.total).unwrap_or(f64::INFINITY)
}

/// Extraction block: every user's ratio with everything else frozen.
fn extraction_block(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<Allocation> {
    let mut out = alloc.clone();
    for k in 0..cfg.num_users {
        let ctx = ExtractionContext::from_allocation(scheme, alloc, channels, cfg, k);
        match solve_extraction(&ctx) {
            Ok(sol) => out.rho[k] = sol.rho_star,
            Err(Error::InfeasibleDeadline { block, .. }) => {
                return Err(Error::InfeasibleDeadline { block, users: vec![k] })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn capacity_block(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(Allocation, usize)> {
    let ctx = CapacityContext::from_allocation(scheme, alloc, channels, cfg)?;
    let sol = dual_ascent(&ctx)?;
    let mut out = alloc.clone();
    out.f = sol.f;
    out.g = sol.g;
    Ok((out, sol.state.iterations))
}

/// Least FDMA powers meeting every deadline with matched-filter beams:
/// `p = (noise / |h|^2) (2^(L / (B tau)) - 1)` per band.
pub fn fdma_power_block(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<Allocation> {
    let scheme = Scheme::Fdma;
    let band = cfg.bandwidth_for(scheme);
    let noise = cfg.noise_for(scheme);
    let mut out = alloc.clone();
    let mut short = Vec::new();
    for k in 0..cfg.num_users {
        let u = &cfg.users[k];
        let tau = cfg.deadline_s
            - u.extraction_cycles(alloc.rho[k])? / alloc.f[k]
            - u.recovery_cycles(alloc.rho[k])? / alloc.g[k];
        if !(tau > 0.0) {
            short.push(k);
            continue;
        }
        let w = normalized(&channels.h[k]);
        let g = gain(&channels.h[k], &w);
        let bits = alloc.payload_bits(scheme, cfg, k);
        out.p[k + 1] = noise / g * (bits / (band * tau) * std::f64::consts::LN_2).exp_m1();
        out.w[k + 1] = w;
    }
    if !short.is_empty() {
        return Err(Error::InfeasibleDeadline { block: Block::Communication, users: short });
    }
    out.p[0] = 0.0;
    let used: f64 = out.p[1..].iter().sum();
    if used > cfg.p_max_w * (1.0 + 1e-12) {
        return Err(Error::InfeasibleDeadline {
            block: Block::Communication,
            users: (0..cfg.num_users).collect(),
        });
    }
    Ok(out)
}

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..120 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// FDMA counterpart of the time-aware start: each band picks its airtime
/// `t` to minimize `p(t) t + w / (T - t)^2`, with a multiplier on the
/// shared power budget found by bisection.
fn fdma_time_split(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig, tau: &[f64]) -> Option<Allocation> {
    let scheme = Scheme::Fdma;
    let band = cfg.bandwidth_for(scheme);
    let noise = cfg.noise_for(scheme);
    let mut bands = Vec::with_capacity(cfg.num_users);
    for k in 0..cfg.num_users {
        let u = &cfg.users[k];
        let y = u.extraction_cycles(alloc.rho[k]).ok()? + u.recovery_cycles(alloc.rho[k]).ok()?;
        let c = noise / gain(&channels.h[k], &normalized(&channels.h[k]));
        let bits = alloc.payload_bits(scheme, cfg, k) * std::f64::consts::LN_2 / band;
        // Shortest airtime reachable with the whole budget.
        let t_lo = bits / (cfg.p_max_w / c).ln_1p();
        if !(t_lo < tau[k]) {
            return None;
        }
        bands.push((c, bits, cfg.kappa * y.powi(3), t_lo, tau[k]));
    }
    let power = |c: f64, bits: f64, t: f64| c * (bits / t).exp_m1();
    let split = |mu: f64| -> Vec<f64> {
        bands
            .iter()
            .map(|&(c, bits, w, lo, hi)| {
                let cost = |t: f64| power(c, bits, t) * (t + mu) + w / (cfg.deadline_s - t).powi(2);
                golden_min(cost, lo, hi)
            })
            .collect()
    };
    let used = |t: &[f64]| -> f64 { bands.iter().zip(t).map(|(&(c, bits, ..), &t)| power(c, bits, t)).sum() };
    let mut times = split(0.0);
    if used(&times) > cfg.p_max_w {
        let (mut lo, mut hi) = (0.0, 1.0);
        while used(&split(hi)) > cfg.p_max_w {
            hi *= 4.0;
            if hi > 1e12 {
                return None;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if used(&split(mid)) > cfg.p_max_w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        times = split(hi);
    }
    let mut out = alloc.clone();
    for (k, (&(c, bits, ..), &t)) in bands.iter().zip(&times).enumerate() {
        out.p[k + 1] = power(c, bits, t);
        out.w[k + 1] = normalized(&channels.h[k]);
    }
    out.p[0] = 0.0;
    feasibility_for(scheme, &out, channels, cfg).radio.then_some(out)
}

fn communication_block(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &SolverOptions,
) -> Result<(Allocation, usize)> {
    match scheme {
        Scheme::Fdma => Ok((fdma_power_block(alloc, channels, cfg)?, 1)),
        _ => {
            let rep = solve_sca(scheme, alloc, channels, cfg, &opts.sca)?;
            Ok((rep.allocation, rep.iterations))
        }
    }
}

/// Alternates the three blocks from a feasible `init`. A block result is
/// kept only if it is feasible and does not raise the total energy.
pub fn algorithm1(
    scheme: Scheme,
    cfg: &SystemConfig,
    channels: &ChannelSet,
    init: &Allocation,
    opts: &SolverOptions,
) -> Result<(Allocation, RunTrace)> {
    let clock = Instant::now();
    let mut current = init.clone();
    let mut energy = total_energy(scheme, &current, channels, cfg);
    if !energy.is_finite() {
        let users = feasibility_for(scheme, &current, channels, cfg)
            .deadline
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > 0.0)
            .map(|(k, _)| k)
            .collect();
        return Err(Error::InfeasibleDeadline { block: Block::Initialization, users });
    }
    let mut trace = RunTrace { energy: vec![energy], passes: Vec::new(), converged: false, wall_time: Duration::ZERO };

    let accept = |candidate: Allocation, current: &mut Allocation, energy: &mut f64| {
        let e = total_energy(scheme, &candidate, channels, cfg);
        if e <= *energy {
            *current = candidate;
            *energy = e;
        }
    };

    for _ in 0..opts.max_outer {
        let before = energy;
        let candidate = extraction_block(scheme, &current, channels, cfg)?;
        accept(candidate, &mut current, &mut energy);
        let after_extraction = energy;

        let (candidate, capacity_iterations) = capacity_block(scheme, &current, channels, cfg)?;
        accept(candidate, &mut current, &mut energy);
        let after_capacity = energy;

        let (candidate, sca_iterations) = communication_block(scheme, &current, channels, cfg, opts)?;
        accept(candidate, &mut current, &mut energy);

        trace.passes.push(PassRecord {
            after_extraction,
            after_capacity,
            after_communication: energy,
            capacity_iterations,
            sca_iterations,
        });
        trace.energy.push(energy);
        if before - energy < opts.outer_tol * before {
            trace.converged = true;
            break;
        }
    }
    trace.wall_time = clock.elapsed();
    Ok((current, trace))
}

/// Refits the compute block of a start, so that no frequency is left at an
/// inactive cap. An infeasible start is then pushed toward feasibility:
/// smallest payloads, shortest transmissions, and a second refit.
fn repair(scheme: Scheme, alloc: Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Option<Allocation> {
    let feasible = |a: &Allocation| feasibility_for(scheme, a, channels, cfg).feasible;
    let fit = |a: Allocation| -> Option<Allocation> {
        if let Ok((fitted, _)) = capacity_block(scheme, &a, channels, cfg) {
            if feasible(&fitted) {
                return Some(fitted);
            }
        }
        feasible(&a).then_some(a)
    };
    if let Some(a) = fit(alloc.clone()) {
        return Some(a);
    }
    // Smallest payloads, then the shortest airtime the radio allows.
    let mut light = alloc;
    for (rho, u) in light.rho.iter_mut().zip(&cfg.users) {
        *rho = u.gamma_min;
    }
    let moved = match scheme {
        Scheme::Fdma => fdma_power_block(&light, channels, cfg).ok()?,
        _ => sca::reach_deadlines(scheme, &light, channels, cfg, &ScaOptions::default()).ok()?.allocation,
    };
    fit(moved)
}

/// Airtime caps for the warm start. The loose caps leave room for
/// extraction at the full budget and nothing else; the tight ones assume
/// an even budget split and `g_max`, widened to the current budget where
/// that is larger.
fn airtime_caps(alloc: &Allocation, cfg: &SystemConfig, tight: bool) -> Option<Vec<f64>> {
    let current = sca::transmission_budget(alloc, cfg).ok()?;
    let even = cfg.f_max_hz / cfg.num_users as f64;
    let mut caps = Vec::with_capacity(cfg.num_users);
    for (k, u) in cfg.users.iter().enumerate() {
        let y1 = u.extraction_cycles(alloc.rho[k]).ok()?;
        let cap = if tight {
            let y2 = u.recovery_cycles(alloc.rho[k]).ok()?;
            (cfg.deadline_s - y1 / even - y2 / u.g_max_hz).max(current[k])
        } else {
            cfg.deadline_s - y1 / cfg.f_max_hz
        };
        caps.push(cap);
    }
    Some(caps)
}

/// Moves a feasible start toward a better split of the deadline between
/// transmitting and computing, then refits the frequencies. Loose airtime
/// caps come first, so a `g_max` that never binds cannot steer the
/// result; tight caps are the fallback. Returns `init` when neither
/// lowers the energy.
fn warm_start(
    scheme: Scheme,
    init: Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &ScaOptions,
) -> Allocation {
    let base = total_energy(scheme, &init, channels, cfg);
    for tight in [false, true] {
        let Some(caps) = airtime_caps(&init, cfg, tight) else { break };
        let moved = match scheme {
            Scheme::Fdma => fdma_time_split(&init, channels, cfg, &caps),
            _ => sca::solve_sca_time_aware(scheme, &init, channels, cfg, opts, &caps).ok().map(|r| r.allocation),
        };
        let Some(moved) = moved else { continue };
        if let Ok((fitted, _)) = capacity_block(scheme, &moved, channels, cfg) {
            if total_energy(scheme, &fitted, channels, cfg) < base {
                return fitted;
            }
        }
    }
    init
}

/// Best feasible result of `scheme` over `opts.restarts` starting points.
pub fn solve_scheme(
    scheme: Scheme,
    cfg: &SystemConfig,
    channels: &ChannelSet,
    opts: &SolverOptions,
) -> Result<SchemeSolution> {
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    cfg.validate()?;
    let mut best: Option<SchemeSolution> = None;
    for restart in 0..opts.restarts {
        let init = initialize(scheme, cfg, channels, restart as u64);
        let Some(init) = repair(scheme, init, channels, cfg) else { continue };
        let init = warm_start(scheme, init, channels, cfg, &opts.sca);
        let Ok((allocation, trace)) = algorithm1(scheme, cfg, channels, &init, opts) else { continue };
        let energy = energy_for(scheme, &allocation, channels, cfg)?;
        if best.as_ref().is_none_or(|b| energy.total < b.energy.total) {
            best = Some(SchemeSolution { scheme, allocation, energy, trace, restart });
        }
    }
    best.ok_or(Error::AllRestartsInfeasible { restarts: opts.restarts })
}
