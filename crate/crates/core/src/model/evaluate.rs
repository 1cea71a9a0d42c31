use super::rates::{common_rate_per_user, private_rate_for};
use super::{norm, Allocation, ChannelSet, Scheme, SystemConfig};
use crate::error::{Error, Result};

/// Relative tolerance used by [`feasibility`].
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingBreakdown {
    /// Extraction time at the base station.
    pub t1: Vec<f64>,
    /// Payload transmission time.
    pub t21: Vec<f64>,
    /// Knowledge-update broadcast time (zero without a common stream).
    pub t0: f64,
    pub t2: Vec<f64>,
    /// Recovery time at the user.
    pub t3: Vec<f64>,
    pub total: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub e20: f64,
    pub e3: Vec<f64>,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn compute(&self) -> f64 {
        self.e1.iter().sum::<f64>() + self.e3.iter().sum::<f64>()
    }

    pub fn transmission(&self) -> f64 {
        self.e2.iter().sum::<f64>() + self.e20
    }
}

fn checked_div(num: f64, den: f64, quantity: impl FnOnce() -> String) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::DivideByZero { quantity: quantity() });
    }
    Ok(num / den)
}

/// RSMA timing.
pub fn timing(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<TimingBreakdown> {
    timing_for(Scheme::Rsma, alloc, channels, cfg)
}

pub fn timing_for(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<TimingBreakdown> {
    let k_users = cfg.num_users;
    let t0 = if scheme.has_common_stream() {
        checked_div(cfg.knowledge_bits, alloc.a[0], || "t0 (common knowledge rate a0)".into())?
    } else {
        0.0
    };
    let mut out = TimingBreakdown {
        t1: Vec::with_capacity(k_users),
        t21: Vec::with_capacity(k_users),
        t0,
        t2: Vec::with_capacity(k_users),
        t3: Vec::with_capacity(k_users),
        total: Vec::with_capacity(k_users),
    };
    for k in 0..k_users {
        let user = &cfg.users[k];
        let rho = alloc.rho[k];
        let y1 = user.extraction_cycles(rho)?;
        let y2 = user.recovery_cycles(rho)?;
        let t1 = checked_div(y1, alloc.f[k], || format!("t1 of user {k} (f = 0)"))?;
        let mut link = private_rate_for(scheme, alloc, channels, cfg, k);
        if scheme.has_common_stream() {
            link += alloc.a[k + 1];
        }
        let t21 = checked_div(alloc.payload_bits(scheme, cfg, k), link, || {
            format!("t21 of user {k} (r + a = 0)")
        })?;
        let t3 = checked_div(y2, alloc.g[k], || format!("t3 of user {k} (g = 0)"))?;
        let t2 = t21.max(t0);
        out.t1.push(t1);
        out.t21.push(t21);
        out.t2.push(t2);
        out.t3.push(t3);
        out.total.push(t1 + t2 + t3);
    }
    Ok(out)
}

/// RSMA energy.
pub fn energy(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<EnergyBreakdown> {
    energy_for(Scheme::Rsma, alloc, channels, cfg)
}

pub fn energy_for(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<EnergyBreakdown> {
    let timing = timing_for(scheme, alloc, channels, cfg)?;
    let mut e1 = Vec::with_capacity(cfg.num_users);
    let mut e2 = Vec::with_capacity(cfg.num_users);
    let mut e3 = Vec::with_capacity(cfg.num_users);
    for k in 0..cfg.num_users {
        let user = &cfg.users[k];
        let rho = alloc.rho[k];
        e1.push(cfg.kappa * user.extraction_cycles_unchecked(rho) * alloc.f[k] * alloc.f[k]);
        e2.push(timing.t21[k] * alloc.p[k + 1]);
        e3.push(cfg.kappa * user.recovery_cycles_unchecked(rho) * alloc.g[k] * alloc.g[k]);
    }
    let e20 = if scheme.has_common_stream() { timing.t0 * alloc.p[0] } else { 0.0 };
    let total = e1.iter().zip(&e2).zip(&e3).map(|((a, b), c)| a + b + c).sum::<f64>() + e20;
    Ok(EnergyBreakdown { e1, e2, e20, e3, total })
}

/// Signed constraint residuals; a residual `<= 0` means satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `t_k - T` per user (infinite when timing is undefined).
    pub deadline: Vec<f64>,
    /// `a0 + sum a - c_k` per user (RSMA only, empty otherwise).
    pub common_rate: Vec<f64>,
    /// `sum f - F^max`.
    pub compute: f64,
    /// `sum p - P^max`.
    pub power: f64,
    /// `| ||w_k|| - 1 |` per stream.
    pub beam_norm: Vec<f64>,
    /// `max(Gamma - rho, rho - 1)` per user.
    pub rho_bounds: Vec<f64>,
    /// `max(-g, g - g_max)` per user.
    pub g_bounds: Vec<f64>,
    /// Most negative of `p`, `a`, `f` (as `-min`).
    pub nonnegativity: f64,
    /// Every constraint except the deadlines holds.
    pub radio: bool,
    pub feasible: bool,
}

pub fn feasibility(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> FeasibilityReport {
    feasibility_for(Scheme::Rsma, alloc, channels, cfg)
}

pub fn feasibility_for(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> FeasibilityReport {
    let tol = FEASIBILITY_TOL;
    let deadline: Vec<f64> = match timing_for(scheme, alloc, channels, cfg) {
        Ok(t) => t.total.iter().map(|tk| tk - cfg.deadline_s).collect(),
        Err(_) => vec![f64::INFINITY; cfg.num_users],
    };
    let on_time = deadline.iter().all(|r| *r <= tol * cfg.deadline_s);
    let mut feasible = true;

    let mut common = Vec::new();
    if scheme.has_common_stream() {
        let split: f64 = alloc.a.iter().sum();
        for k in 0..cfg.num_users {
            let ck = common_rate_per_user(alloc, channels, cfg, k);
            let r = split - ck;
            feasible &= r <= tol * ck.max(1.0);
            common.push(r);
        }
    }

    let compute = alloc.f.iter().sum::<f64>() - cfg.f_max_hz;
    feasible &= compute <= tol * cfg.f_max_hz;
    let power_used: f64 = match scheme {
        Scheme::Rsma => alloc.p.iter().sum(),
        _ => alloc.p[1..].iter().sum(),
    };
    let power = power_used - cfg.p_max_w;
    feasible &= power <= tol * cfg.p_max_w;

    let beam_norm: Vec<f64> = alloc.w.iter().map(|w| (norm(w) - 1.0).abs()).collect();
    feasible &= beam_norm.iter().all(|r| *r <= tol);

    let rho_bounds: Vec<f64> = alloc
        .rho
        .iter()
        .zip(&cfg.users)
        .map(|(r, u)| (u.gamma_min - r).max(r - 1.0))
        .collect();
    feasible &= rho_bounds.iter().all(|r| *r <= tol);

    let g_bounds: Vec<f64> = alloc
        .g
        .iter()
        .zip(&cfg.users)
        .map(|(g, u)| (-g).max(g - u.g_max_hz))
        .collect();
    feasible &= alloc.g.iter().all(|g| *g > 0.0);
    feasible &= g_bounds.iter().zip(&cfg.users).all(|(r, u)| *r <= tol * u.g_max_hz);

    let min_value = alloc
        .p
        .iter()
        .chain(&alloc.a)
        .chain(&alloc.f)
        .fold(f64::INFINITY, |m, v| m.min(*v));
    let nonnegativity = -min_value;
    feasible &= nonnegativity <= 0.0;

    FeasibilityReport {
        deadline,
        common_rate: common,
        compute,
        power,
        beam_norm,
        rho_bounds,
        g_bounds,
        nonnegativity,
        radio: feasible,
        feasible: feasible && on_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{common_rate, UserProfile};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn user() -> UserProfile {
        UserProfile {
            distance_km: 0.1,
            graph_bits: 2e6,
            base_cycles: 1e9,
            c1: 1e8,
            c2: 0.5,
            c3: 2,
            c4: 1e8,
            c5: 1.0,
            gamma_min: 0.3,
            g_max_hz: 2e9,
        }
    }

    fn cfg() -> SystemConfig {
        let mut cfg = SystemConfig {
            num_users: 1,
            num_antennas: 2,
            bandwidth_hz: 2e7,
            noise_density_dbm_hz: -174.0,
            noise_power_w: 0.0,
            p_max_w: 1.0,
            f_max_hz: 2e9,
            kappa: 1e-28,
            deadline_s: 2.0,
            knowledge_bits: 1e5,
            users: vec![user()],
        };
        cfg.refresh_noise();
        cfg
    }

    /// One user with private SINR 1 (r = 2e7 bit/s) and common SINR 1.
    fn alloc(cfg: &SystemConfig) -> (Allocation, ChannelSet) {
        let gain = cfg.noise_power_w / 0.1;
        let ch = ChannelSet::new(vec![vec![c(gain.sqrt(), 0.0), c(0.0, 0.0)]]).unwrap();
        let a = Allocation {
            rho: vec![0.5],
            f: vec![1e9],
            g: vec![1e9],
            p: vec![0.2, 0.1],
            a: vec![1e6, 0.0],
            w: vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        };
        (a, ch)
    }

    #[test]
    fn timing_examples() {
        let cfg = cfg();
        let (a, ch) = alloc(&cfg);
        let t = timing(&a, &ch, &cfg).unwrap();
        // y1 = 1e9 at rho = 0.5 and f = 1e9.
        assert!((t.t1[0] - 1.0).abs() < 1e-12);
        // Z rho = 1e6 bits over r + a = 2e7.
        assert!((t.t21[0] - 0.05).abs() < 1e-12);
        assert!((t.t0 - 0.1).abs() < 1e-12);
        assert!((t.t2[0] - 0.1).abs() < 1e-12);
        // y2 = 2e8 at g = 1e9 -> 0.2 s
        assert!((t.t3[0] - 0.2).abs() < 1e-12);
        assert!((t.total[0] - 1.3).abs() < 1e-12);
        assert_eq!(t.t2[0], t.t21[0].max(t.t0));
    }

    #[test]
    fn energy_examples() {
        let cfg = cfg();
        let (a, ch) = alloc(&cfg);
        let e = energy(&a, &ch, &cfg).unwrap();
        assert!((e.e1[0] - 0.1).abs() < 1e-12);
        assert!((e.e2[0] - 5e-3).abs() < 1e-12);
        assert!((e.e20 - 0.02).abs() < 1e-12);
        // kappa * y2 * g^2 = 1e-28 * 2e8 * 1e18
        assert!((e.e3[0] - 0.02).abs() < 1e-12);
        let sum = e.e1[0] + e.e2[0] + e.e3[0] + e.e20;
        assert!((e.total - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn timing_division_by_zero_names_quantity() {
        let cfg = cfg();
        let (mut a, ch) = alloc(&cfg);
        a.a[0] = 0.0;
        match timing(&a, &ch, &cfg) {
            Err(Error::DivideByZero { quantity }) => assert!(quantity.contains("a0")),
            other => panic!("unexpected {other:?}"),
        }
        let (mut a, _) = alloc(&cfg);
        a.f[0] = 0.0;
        assert!(matches!(timing(&a, &ch, &cfg), Err(Error::DivideByZero { .. })));
    }

    #[test]
    fn deadline_boundary_is_feasible() {
        let mut cfg = cfg();
        let (a, ch) = alloc(&cfg);
        cfg.deadline_s = timing(&a, &ch, &cfg).unwrap().total[0];
        let rep = feasibility(&a, &ch, &cfg);
        assert!(rep.deadline[0].abs() < 1e-15);
        assert!(rep.feasible, "{rep:?}");
    }

    #[test]
    fn common_rate_excess_is_infeasible() {
        let mut cfg = cfg();
        // Narrow band so one bit/s exceeds the relative tolerance.
        cfg.bandwidth_hz = 1e4;
        cfg.refresh_noise();
        let gain = cfg.noise_power_w / 0.1;
        let ch = ChannelSet::new(vec![vec![c(gain.sqrt(), 0.0), c(0.0, 0.0)]]).unwrap();
        let mut a = alloc(&cfg).0;
        a.w[0] = vec![c(1.0, 0.0), c(0.0, 0.0)];
        a.w[1] = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let c0 = common_rate(&a, &ch, &cfg);
        a.a = vec![c0 / 2.0, c0 / 2.0 + 1.0];
        let rep = feasibility(&a, &ch, &cfg);
        assert!((rep.common_rate[0] - 1.0).abs() < 1e-9);
        assert!(!rep.feasible);
    }

    #[test]
    fn compute_residual() {
        let cfg = cfg();
        let (mut a, ch) = alloc(&cfg);
        a.f = vec![cfg.f_max_hz / 2.0];
        let rep = feasibility(&a, &ch, &cfg);
        assert_eq!(rep.compute, -cfg.f_max_hz / 2.0);
    }

    proptest::proptest! {
        /// Per-user energy derivative in rho matches a central difference.
        #[test]
        fn energy_rho_derivative(rho in 0.35f64..0.95, f in 5e8f64..3e9, g in 5e8f64..2e9) {
            let cfg = cfg();
            let (mut a, ch) = alloc(&cfg);
            a.f = vec![f];
            a.g = vec![g];
            a.rho = vec![rho];
            let u = &cfg.users[0];
            let link = crate::model::private_rate(&a, &ch, &cfg, 0) + a.a[1];
            let analytic = cfg.kappa * f * f * u.extraction_slope(rho)
                + a.p[1] * u.graph_bits / link
                + cfg.kappa * g * g * u.recovery_slope(rho);
            let h = 1e-6;
            let mut lo = a.clone();
            lo.rho = vec![rho - h];
            let mut hi = a.clone();
            hi.rho = vec![rho + h];
            let fd = (energy(&hi, &ch, &cfg).unwrap().total - energy(&lo, &ch, &cfg).unwrap().total) / (2.0 * h);
            proptest::prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3));
        }
    }
}
