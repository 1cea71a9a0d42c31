//! Successive convex approximation of the communication block.
//!
//! Powers and beams are merged into composite beams `v = sqrt(p) w`, so
//! every stream contributes `||v||^2` to the power budget and
//! `||v||^2 * bits / rate` to the energy. SINR constraints are split with
//! slacks (`gamma`, `alpha` for private streams, `eta`, `beta` for the
//! common one) and their nonconvex parts replaced by inner approximations
//! around the current point. Each round solves the resulting convex program
//! with the barrier solver; the surrogate is tight at the expansion point,
//! so the true energy never increases.
//!
//! Internally channels are scaled by `sqrt(P_max / noise)`, beams by
//! `1 / sqrt(P_max)` and rates by `1 / B`, which keeps every quantity O(1).

mod layout;
mod terms;

pub use layout::Layout;
pub use terms::{
    interference_bound_common, interference_bound_private, linearize_common_signal,
    linearize_private_signal, AirtimeBound, ComputeProxy, RateBound, SparseQuadratic, SumFn, Overrun,
    TransmitEnergy,
};

use num_complex::Complex64;

use crate::convex::{self, ConvexProgram, SmoothFn, SolveOptions};
use crate::error::{Block, Error, Result};
use crate::model::{
    self, energy_for, feasibility_for, normalized, timing_for, Allocation, ChannelSet, Scheme, SystemConfig,
    FEASIBILITY_TOL,
};

/// Lower bound on the SINR slacks, keeping expansion points nondegenerate.
const SINR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub max_iter: usize,
    /// Stop once the relative energy decrease of a round falls below this.
    pub rel_tol: f64,
    /// Phase-I target: every scaled constraint at most `-margin`.
    pub margin: f64,
    pub barrier: SolveOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iter: 30,
            rel_tol: 1e-4,
            margin: 1e-7,
            barrier: SolveOptions { tol: 1e-8, ..SolveOptions::default() },
        }
    }
}

/// Expansion point in physical units. `v[0]` is the common composite beam
/// (zero without a common stream), `a[0]` the knowledge-update rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub v: Vec<Vec<Complex64>>,
    /// Private rates (bit/s).
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Private interference plus noise (W).
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    /// Common-stream interference plus noise (W).
    pub beta: Vec<f64>,
}

impl ScaIterate {
    /// Tight slacks at `alloc`. Private beams are rotated so that
    /// `h_k^H v_k` is real and nonnegative.
    pub fn from_allocation(
        scheme: Scheme,
        alloc: &Allocation,
        channels: &ChannelSet,
        cfg: &SystemConfig,
    ) -> Self {
        let users = cfg.num_users;
        let noise = cfg.noise_power_w;
        let mut v = Vec::with_capacity(users + 1);
        v.push(if scheme.has_common_stream() {
            alloc.w[0].iter().map(|c| c * alloc.p[0].sqrt()).collect()
        } else {
            vec![Complex64::new(0.0, 0.0); cfg.num_antennas]
        });
        for k in 0..users {
            let z: Complex64 = inner(&channels.h[k], &alloc.w[k + 1]);
            let rot = if z.norm() > 0.0 { z.conj() / z.norm() } else { Complex64::new(1.0, 0.0) };
            v.push(alloc.w[k + 1].iter().map(|c| c * rot * alloc.p[k + 1].sqrt()).collect());
        }
        let mut out = ScaIterate {
            v,
            r: Vec::with_capacity(users),
            a: if scheme.has_common_stream() { alloc.a.clone() } else { Vec::new() },
            gamma: Vec::with_capacity(users),
            alpha: Vec::with_capacity(users),
            eta: Vec::new(),
            beta: Vec::new(),
        };
        for k in 0..users {
            let h = &channels.h[k];
            let private: Vec<f64> = (0..users).map(|j| inner(h, &out.v[j + 1]).norm_sqr()).collect();
            let total: f64 = private.iter().sum();
            let alpha = total - private[k] + noise;
            let gamma = private[k] / alpha;
            out.gamma.push(gamma);
            out.alpha.push(alpha);
            out.r.push(cfg.bandwidth_hz * gamma.ln_1p() / std::f64::consts::LN_2);
            if scheme.has_common_stream() {
                let beta = total + noise;
                out.eta.push(inner(h, &out.v[0]).norm_sqr() / beta);
                out.beta.push(beta);
            }
        }
        out
    }
}

fn inner(h: &[Complex64], v: &[Complex64]) -> Complex64 {
    h.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Why [`solve_sca`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStop {
    /// Relative decrease below tolerance.
    Converged,
    /// The subproblem solution did not lower the true energy.
    NoImprovement,
    /// No strictly feasible point of the surrogate was found.
    NoInterior,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct ScaReport {
    pub allocation: Allocation,
    /// True total energy after each accepted round, starting point first.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stop: ScaStop,
}

/// Convex surrogate around an expansion point, plus what is needed to map
/// its solution back to an allocation.
pub struct Subproblem {
    pub layout: Layout,
    pub program: ConvexProgram<'static>,
    /// Energy unit of the scaled objective (J).
    pub energy_scale: f64,
    beam_scale: f64,
    rate_scale: f64,
}

impl Subproblem {
    /// Powers, beams and common split decoded from a solution vector.
    /// Compute variables are copied from `base`.
    pub fn decode(&self, x: &[f64], base: &Allocation) -> Allocation {
        let l = &self.layout;
        let mut out = base.clone();
        for s in 0..=l.users {
            if s == 0 && !l.common {
                continue;
            }
            let u = l.read_beam(x, s);
            out.p[s] = self.beam_scale * self.beam_scale * model::norm(&u).powi(2);
            out.w[s] = normalized(&u);
        }
        if l.common {
            for j in 0..=l.users {
                out.a[j] = self.rate_scale * x[l.a(j)];
            }
        }
        out
    }
}

/// Remaining time for transmission once extraction and recovery are fixed.
pub(crate) fn transmission_budget(alloc: &Allocation, cfg: &SystemConfig) -> Result<Vec<f64>> {
    let mut tau = Vec::with_capacity(cfg.num_users);
    let mut short = Vec::new();
    for k in 0..cfg.num_users {
        let u = &cfg.users[k];
        let t = cfg.deadline_s
            - u.extraction_cycles(alloc.rho[k])? / alloc.f[k]
            - u.recovery_cycles(alloc.rho[k])? / alloc.g[k];
        if !(t > 0.0) {
            short.push(k);
        }
        tau.push(t);
    }
    if short.is_empty() {
        Ok(tau)
    } else {
        Err(Error::InfeasibleDeadline { block: Block::Communication, users: short })
    }
}

/// What a round minimizes.
#[derive(Debug, Clone, PartialEq)]
enum Goal {
    /// Transmit energy under the deadline left by the frozen compute.
    Energy,
    /// Transmit energy plus `w_k / (T - t_k)^2`, the least compute energy
    /// for a transmission time `t_k`, with `t_k <= caps_k`. The frozen
    /// frequencies play no part.
    TimeAware { weights: Vec<f64>, caps: Vec<f64> },
    /// Shrinks the largest overrun of the budget left at the current
    /// frequencies, with `sum_k exp(sharpness (t_k - tau_k) / T)`.
    Reach { sharpness: f64 },
}

/// Builds the convex surrogate of the communication block at `iterate`.
/// `alloc` supplies the frozen extraction ratios and frequencies.
pub fn build_subproblem(
    scheme: Scheme,
    iterate: &ScaIterate,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<Subproblem> {
    build(scheme, iterate, alloc, channels, cfg, &Goal::Energy)
}

fn build(
    scheme: Scheme,
    iterate: &ScaIterate,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    goal: &Goal,
) -> Result<Subproblem> {
    if scheme == Scheme::Fdma {
        return Err(Error::Domain("FDMA has no beamforming subproblem".into()));
    }
    let users = cfg.num_users;
    let common = scheme.has_common_stream();
    let timed = !matches!(goal, Goal::Energy);
    let mut layout = Layout::new(users, cfg.num_antennas, common);
    if timed {
        layout = layout.with_times();
    }
    let noise = cfg.noise_power_w;
    let beam_scale = cfg.p_max_w.sqrt();
    let rate_scale = cfg.bandwidth_hz;
    let gain_scale = (cfg.p_max_w / noise).sqrt();
    let h: Vec<Vec<Complex64>> =
        channels.h.iter().map(|hk| hk.iter().map(|c| c * gain_scale).collect()).collect();
    let tau = match goal {
        Goal::TimeAware { caps, .. } => caps.clone(),
        _ => transmission_budget(alloc, cfg)?,
    };

    // Start point with slack margins off the tight values.
    let n = layout.dim();
    let mut x = vec![0.0; n];
    for s in 0..=users {
        if s == 0 && !common {
            continue;
        }
        let u: Vec<Complex64> = iterate.v[s].iter().map(|c| c / beam_scale).collect();
        layout.write_beam(&mut x, s, &u);
    }
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    let a0_floor = cfg.knowledge_bits / (10.0 * cfg.deadline_s) / rate_scale;
    for k in 0..users {
        x[layout.r(k)] = iterate.r[k] / rate_scale;
        x[layout.gamma(k)] = 0.9 * iterate.gamma[k];
        x[layout.alpha(k)] = 1.05 * iterate.alpha[k] / noise;
        bounds[layout.r(k)].0 = 0.0;
        bounds[layout.gamma(k)].0 = SINR_FLOOR;
        bounds[layout.alpha(k)].0 = 0.0;
        if common {
            x[layout.eta(k)] = 0.9 * iterate.eta[k];
            x[layout.beta(k)] = 1.05 * iterate.beta[k] / noise;
            bounds[layout.eta(k)].0 = SINR_FLOOR;
            bounds[layout.beta(k)].0 = 0.0;
        }
    }
    if common {
        for j in 0..=users {
            x[layout.a(j)] = iterate.a[j] / rate_scale;
            bounds[layout.a(j)].0 = if j == 0 { a0_floor } else { 0.0 };
        }
    }
    let airtime = if timed { timing_for(scheme, alloc, channels, cfg)?.t2 } else { Vec::new() };
    if timed {
        for k in 0..users {
            x[layout.t(k)] = 1.02 * airtime[k];
            bounds[layout.t(k)].0 = 0.0;
            bounds[layout.t(k)].1 = 2.0 * x[layout.t(k)].max(cfg.deadline_s);
        }
    }
    for (xi, (l, _)) in x.iter_mut().zip(&bounds) {
        if l.is_finite() {
            let gap = 1e-9 + 1e-6 * l.abs();
            *xi = xi.max(l + gap);
        }
    }

    let mut cons: Vec<Box<dyn SmoothFn>> = Vec::new();
    let log2_1p = |v: f64| v.ln_1p() / std::f64::consts::LN_2;
    for k in 0..users {
        let gamma_n = iterate.gamma[k].max(SINR_FLOOR);
        let alpha_n = iterate.alpha[k] / noise;
        let scale = 1.0 / log2_1p(gamma_n).max(1e-3);
        cons.push(Box::new(RateBound::new(vec![layout.r(k)], layout.gamma(k), scale)));
        cons.push(Box::new(linearize_private_signal(&layout, &h[k], k, gamma_n, alpha_n)?));
        cons.push(Box::new(interference_bound_private(&layout, &h[k], k, 1.0, alpha_n)));
        if common {
            let eta_n = iterate.eta[k].max(SINR_FLOOR);
            let beta_n = iterate.beta[k] / noise;
            let scale = 1.0 / log2_1p(eta_n).max(1e-3);
            let split: Vec<usize> = (0..=users).map(|j| layout.a(j)).collect();
            cons.push(Box::new(RateBound::new(split, layout.eta(k), scale)));
            let z = inner(&h[k], &layout.read_beam(&x, 0));
            cons.push(Box::new(linearize_common_signal(&layout, &h[k], k, z, beta_n, eta_n)?));
            cons.push(Box::new(interference_bound_common(&layout, &h[k], k, 1.0, beta_n)));
        }
        let mut rates = vec![layout.r(k)];
        if common {
            rates.push(layout.a(k + 1));
        }
        let bits = alloc.payload_bits(scheme, cfg, k) / rate_scale;
        if timed {
            let t_scale = 1.0 / cfg.deadline_s;
            cons.push(Box::new(AirtimeBound::new(rates, layout.t(k), bits, t_scale)));
            if common {
                let k0 = cfg.knowledge_bits / rate_scale;
                cons.push(Box::new(AirtimeBound::new(vec![layout.a(0)], layout.t(k), k0, t_scale)));
            }
            if !matches!(goal, Goal::Reach { .. }) {
                let mut cap = SparseQuadratic::new(vec![layout.t(k)]);
                cap.add_linear(layout.t(k), 1.0);
                cap.add_constant(-tau[k]);
                cap.scale(t_scale);
                cons.push(Box::new(cap));
            }
            continue;
        }
        // Payload must arrive within the time left after computing.
        let need = bits / tau[k];
        let mut lat = SparseQuadratic::new(rates.clone());
        for &i in &rates {
            lat.add_linear(i, -1.0);
        }
        lat.add_constant(need);
        lat.scale(1.0 / need);
        cons.push(Box::new(lat));
        if common {
            let need0 = cfg.knowledge_bits / (rate_scale * tau[k]);
            let mut lat0 = SparseQuadratic::new(vec![layout.a(0)]);
            lat0.add_linear(layout.a(0), -1.0);
            lat0.add_constant(need0);
            lat0.scale(1.0 / need0);
            cons.push(Box::new(lat0));
        }
    }
    let beams: Vec<usize> = (if common { 0 } else { 1 }..=users).flat_map(|s| layout.beam_range(s)).collect();
    let mut power = SparseQuadratic::new(beams.clone());
    for &i in &beams {
        power.add_product(i, i, 1.0);
    }
    power.add_constant(-1.0);
    cons.push(Box::new(power));

    let energy_scale = match goal {
        Goal::TimeAware { .. } => merit(scheme, goal, alloc, channels, cfg),
        _ => energy_for(scheme, alloc, channels, cfg)?.transmission(),
    }
    .clamp(1e-12, f64::MAX);
    // A light energy term in reach mode keeps the beams from drifting.
    let weight = if matches!(goal, Goal::Reach { .. }) { 1e-3 } else { 1.0 };
    let unit = weight * cfg.p_max_w / (rate_scale * energy_scale);
    let mut transmit = TransmitEnergy::default();
    for k in 0..users {
        let mut den = vec![layout.r(k)];
        if common {
            den.push(layout.a(k + 1));
        }
        transmit.push(layout.beam_range(k + 1), den, unit * alloc.payload_bits(scheme, cfg, k));
    }
    if common {
        transmit.push(layout.beam_range(0), vec![layout.a(0)], unit * cfg.knowledge_bits);
    }
    let objective: Box<dyn SmoothFn> = match goal {
        Goal::Energy => Box::new(transmit),
        Goal::TimeAware { weights, .. } => Box::new(SumFn(vec![
            Box::new(transmit),
            Box::new(ComputeProxy {
                times: (0..users).map(|k| layout.t(k)).collect(),
                weights: weights.iter().map(|w| w / energy_scale).collect(),
                deadline: cfg.deadline_s,
            }),
        ])),
        Goal::Reach { sharpness } => {
            let sharpness = sharpness / cfg.deadline_s;
            let times: Vec<usize> = (0..users).map(|k| layout.t(k)).collect();
            let worst = times.iter().zip(&tau).map(|(&i, c)| x[i] - c).fold(f64::NEG_INFINITY, f64::max);
            // Offsetting the caps by the current overrun keeps values near one.
            let caps = tau.iter().map(|c| c + worst).collect();
            Box::new(SumFn(vec![Box::new(transmit), Box::new(Overrun { times, caps, sharpness })]))
        }
    };

    Ok(Subproblem {
        layout,
        program: ConvexProgram { dim: n, objective, constraints: cons, start: x, bounds: Some(bounds) },
        energy_scale,
        beam_scale,
        rate_scale,
    })
}

/// Quantity a round must not increase. Infinite when infeasible, except
/// for deadlines in reach mode.
fn merit(scheme: Scheme, goal: &Goal, alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let feasible = || feasibility_for(scheme, alloc, channels, cfg).feasible;
    let (Ok(e), Ok(t)) = (energy_for(scheme, alloc, channels, cfg), timing_for(scheme, alloc, channels, cfg)) else {
        return f64::INFINITY;
    };
    match goal {
        Goal::Energy if feasible() => e.total,
        Goal::TimeAware { weights, caps } => {
            let within = t.t2.iter().zip(caps).all(|(t2, c)| *t2 <= c + FEASIBILITY_TOL * cfg.deadline_s);
            if !within || !feasibility_for(scheme, alloc, channels, cfg).radio {
                return f64::INFINITY;
            }
            let compute: f64 = weights.iter().zip(&t.t2).map(|(w, t2)| w / (cfg.deadline_s - t2).powi(2)).sum();
            e.transmission() + compute
        }
        Goal::Reach { sharpness } => {
            let Ok(tau) = transmission_budget(alloc, cfg) else { return f64::INFINITY };
            t.t2.iter().zip(&tau).map(|(t2, c)| (sharpness * (t2 - c) / cfg.deadline_s).exp()).sum()
        }
        _ => f64::INFINITY,
    }
}

/// Runs SCA rounds from the feasible allocation `start`, updating powers,
/// beams and the common split with extraction and compute frozen.
pub fn solve_sca(
    scheme: Scheme,
    start: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &ScaOptions,
) -> Result<ScaReport> {
    run(scheme, start, channels, cfg, opts, &Goal::Energy)
}

/// SCA rounds that trade transmit energy against the compute energy that
/// shorter transmissions save, with the compute split idealized as
/// `kappa (y1 + y2)^3 / s^2` for `s` seconds of computing. Transmission
/// times stay below `caps`; the frequencies of `start` are ignored, so the
/// result may miss deadlines at those frequencies. Used to pick a starting
/// point; the trace records this proxy, not the model energy.
pub fn solve_sca_time_aware(
    scheme: Scheme,
    start: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &ScaOptions,
    caps: &[f64],
) -> Result<ScaReport> {
    let mut weights = Vec::with_capacity(cfg.num_users);
    for (u, &rho) in cfg.users.iter().zip(&start.rho) {
        let y = u.extraction_cycles(rho)? + u.recovery_cycles(rho)?;
        weights.push(cfg.kappa * y.powi(3));
    }
    if caps.len() != cfg.num_users || caps.iter().any(|c| !(*c > 0.0 && *c < cfg.deadline_s)) {
        return Err(Error::Domain("airtime caps must lie in (0, T), one per user".into()));
    }
    run(scheme, start, channels, cfg, opts, &Goal::TimeAware { weights, caps: caps.to_vec() })
}

/// SCA rounds that shorten transmissions until every deadline holds at
/// the frozen frequencies. Powers and the common split stay feasible
/// throughout; returns the first allocation meeting all deadlines, or the
/// last iterate when none does.
pub fn reach_deadlines(
    scheme: Scheme,
    start: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &ScaOptions,
) -> Result<ScaReport> {
    run(scheme, start, channels, cfg, opts, &Goal::Reach { sharpness: 20.0 })
}

fn run(
    scheme: Scheme,
    start: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &ScaOptions,
    goal: &Goal,
) -> Result<ScaReport> {
    let mut current = start.clone();
    let mut value = merit(scheme, goal, &current, channels, cfg);
    if !value.is_finite() {
        return Err(Error::InfeasibleDeadline {
            block: Block::Communication,
            users: (0..cfg.num_users).collect(),
        });
    }
    let mut trace = vec![value];
    let mut stop = ScaStop::MaxIter;
    let mut iterations = 0;
    let reach = matches!(goal, Goal::Reach { .. });
    let met = |a: &Allocation| reach && feasibility_for(scheme, a, channels, cfg).feasible;
    if met(&current) {
        return Ok(ScaReport { allocation: current, trace, iterations, stop: ScaStop::Converged });
    }
    for _ in 0..opts.max_iter {
        iterations += 1;
        let mut iterate = ScaIterate::from_allocation(scheme, &current, channels, cfg);
        if scheme.has_common_stream() && iterate.v[0].iter().all(|c| c.norm_sqr() == 0.0) {
            // Seed a silent common stream so its gain can be linearized.
            let w0 = normalized(&channels.h.iter().fold(vec![Complex64::new(0.0, 0.0); cfg.num_antennas], |acc, h| {
                acc.iter().zip(h).map(|(a, b)| a + b).collect()
            }));
            let p0 = 1e-6 * cfg.p_max_w;
            iterate.v[0] = w0.iter().map(|c| c * p0.sqrt()).collect();
        }
        let mut sub = build(scheme, &iterate, &current, channels, cfg, goal)?;
        let interior = convex::find_strictly_feasible(
            &sub.program.constraints,
            sub.program.bounds.as_deref(),
            &sub.program.start,
            opts.margin,
        );
        let Ok(x0) = interior else {
            stop = ScaStop::NoInterior;
            break;
        };
        sub.program.start = x0;
        let Ok(report) = convex::solve(&sub.program, &opts.barrier) else {
            stop = ScaStop::NoInterior;
            break;
        };
        let candidate = sub.decode(&report.solution, &current);
        let next = merit(scheme, goal, &candidate, channels, cfg);
        if !(next <= value) {
            stop = ScaStop::NoImprovement;
            break;
        }
        // Compute energy is frozen here, so progress is measured against
        // the part a round can change.
        let scale = match goal {
            Goal::Energy => energy_for(scheme, &current, channels, cfg).map(|e| e.transmission()).unwrap_or(value),
            _ => value,
        };
        let decrease = (value - next) / scale;
        current = candidate;
        value = next;
        trace.push(value);
        if met(&current) || (!reach && decrease < opts.rel_tol) {
            stop = ScaStop::Converged;
            break;
        }
    }
    Ok(ScaReport { allocation: current, trace, iterations, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, ChannelOptions};

    pub(crate) fn start_allocation(scheme: Scheme, channels: &ChannelSet, cfg: &SystemConfig) -> Allocation {
        let k = cfg.num_users;
        let sum = channels.h.iter().fold(vec![Complex64::new(0.0, 0.0); cfg.num_antennas], |acc, h| {
            acc.iter().zip(h).map(|(a, b)| a + b).collect()
        });
        let mut w = vec![normalized(&sum)];
        w.extend(channels.h.iter().map(|h| normalized(h)));
        let mut p = vec![cfg.p_max_w / 2.0];
        p.extend(std::iter::repeat_n(cfg.p_max_w / (2.0 * k as f64), k));
        let mut alloc = Allocation {
            rho: vec![0.5; k],
            f: vec![cfg.f_max_hz / k as f64; k],
            g: cfg.users.iter().map(|u| u.g_max_hz).collect(),
            p,
            a: vec![0.0; k + 1],
            w,
        };
        if scheme.has_common_stream() {
            let c0 = model::common_rate(&alloc, channels, cfg);
            alloc.a[0] = c0 / 2.0;
            for j in 1..=k {
                alloc.a[j] = c0 / (2.0 * k as f64);
            }
        } else {
            alloc.p[0] = 0.0;
            for j in 1..=k {
                alloc.p[j] = cfg.p_max_w / k as f64;
            }
        }
        alloc
    }

    fn scenario(k: usize, n: usize, seed: u64) -> (SystemConfig, ChannelSet) {
        let mut cfg = crate::model::tests::system(k);
        cfg.num_antennas = n;
        let d: Vec<f64> = (0..k).map(|i| 0.1 + 0.08 * i as f64).collect();
        let ch = generate_channels(&cfg, &d, seed, ChannelOptions::default()).unwrap();
        (cfg, ch)
    }

    #[test]
    fn subproblem_dimension() {
        let (cfg, ch) = scenario(5, 4, 1);
        let alloc = start_allocation(Scheme::Rsma, &ch, &cfg);
        let it = ScaIterate::from_allocation(Scheme::Rsma, &alloc, &ch, &cfg);
        let sub = build_subproblem(Scheme::Rsma, &it, &alloc, &ch, &cfg).unwrap();
        assert_eq!(sub.program.dim, 79);
        assert!(build_subproblem(Scheme::Fdma, &it, &alloc, &ch, &cfg).is_err());
    }

    #[test]
    fn iterate_is_tight_and_rotated() {
        let (cfg, ch) = scenario(3, 4, 2);
        let alloc = start_allocation(Scheme::Rsma, &ch, &cfg);
        let it = ScaIterate::from_allocation(Scheme::Rsma, &alloc, &ch, &cfg);
        for k in 0..3 {
            let z = inner(&ch.h[k], &it.v[k + 1]);
            assert!(z.im.abs() <= 1e-12 * z.norm() && z.re > 0.0);
            let sinr = model::private_sinr(&alloc, &ch, &cfg, k);
            assert!((it.gamma[k] - sinr).abs() <= 1e-9 * sinr);
            assert!(it.alpha[k] >= cfg.noise_power_w);
            let c = model::common_sinr(&alloc, &ch, &cfg, k);
            assert!((it.eta[k] - c).abs() <= 1e-9 * c);
        }
    }

    #[test]
    fn decode_round_trips_start() {
        let (cfg, ch) = scenario(2, 3, 3);
        let alloc = start_allocation(Scheme::Rsma, &ch, &cfg);
        let it = ScaIterate::from_allocation(Scheme::Rsma, &alloc, &ch, &cfg);
        let sub = build_subproblem(Scheme::Rsma, &it, &alloc, &ch, &cfg).unwrap();
        let back = sub.decode(&sub.program.start, &alloc);
        for s in 0..3 {
            assert!((back.p[s] - alloc.p[s]).abs() < 1e-12);
            assert!((model::gain(&ch.h[0], &back.w[s]) - model::gain(&ch.h[0], &alloc.w[s])).abs() < 1e-20);
        }
    }

    #[test]
    fn rsma_trace_monotone_and_feasible() {
        for seed in 0..3 {
            let (cfg, ch) = scenario(3, 4, seed);
            let alloc = start_allocation(Scheme::Rsma, &ch, &cfg);
            assert!(feasibility_for(Scheme::Rsma, &alloc, &ch, &cfg).feasible);
            let rep = solve_sca(Scheme::Rsma, &alloc, &ch, &cfg, &ScaOptions::default()).unwrap();
            for w in rep.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
            }
            assert!(rep.trace.len() > 1, "no progress: {:?}", rep.stop);
            let first = rep.trace[0];
            let last = *rep.trace.last().unwrap();
            assert!(last < first);
            assert!(feasibility_for(Scheme::Rsma, &rep.allocation, &ch, &cfg).feasible);
            eprintln!("seed {seed}: {:?} {} iters {:?}", rep.stop, rep.iterations, rep.trace);
        }
    }

    #[test]
    fn sdma_trace_monotone_and_feasible() {
        let (cfg, ch) = scenario(3, 4, 5);
        let alloc = start_allocation(Scheme::Sdma, &ch, &cfg);
        let rep = solve_sca(Scheme::Sdma, &alloc, &ch, &cfg, &ScaOptions::default()).unwrap();
        for w in rep.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
        }
        assert!(*rep.trace.last().unwrap() < rep.trace[0]);
        assert!(feasibility_for(Scheme::Sdma, &rep.allocation, &ch, &cfg).feasible);
        assert_eq!(rep.allocation.p[0], 0.0);
        eprintln!("sdma: {:?} {:?}", rep.stop, rep.trace);
    }
}
