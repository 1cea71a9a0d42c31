//! Domain types and the closed-form physical quantities of the downlink:
//! SINR-based rates, timing, energy and constraint residuals.
//!
//! Users are indexed `0..K`. Stream-indexed vectors (`p`, `a`, `w`) have
//! `K + 1` entries: index 0 is the common stream, index `k + 1` is the
//! private stream of user `k`.

mod channel;
mod evaluate;
mod rates;

pub use channel::{generate_channels, pathloss_db, ChannelOptions};
pub use evaluate::{
    energy, energy_for, feasibility, feasibility_for, timing, timing_for, EnergyBreakdown,
    FeasibilityReport, TimingBreakdown, FEASIBILITY_TOL,
};
pub use rates::{
    common_rate, common_rate_per_user, gain, private_rate, private_rate_for, private_sinr,
    common_sinr,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiple-access scheme used for the downlink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Rate splitting: common stream carries the knowledge update and
    /// per-user rate shares, private streams carry the rest.
    Rsma,
    /// Orthogonal bands of width B/K, one beam per user, no common stream.
    Fdma,
    /// Spatial multiplexing of private streams only; the knowledge update is
    /// appended to every private payload.
    Sdma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rsma, Scheme::Sdma, Scheme::Fdma];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rsma => "RSMA",
            Scheme::Fdma => "FDMA",
            Scheme::Sdma => "SDMA",
        }
    }

    pub fn has_common_stream(self) -> bool {
        matches!(self, Scheme::Rsma)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rsma" => Ok(Scheme::Rsma),
            "fdma" => Ok(Scheme::Fdma),
            "sdma" => Ok(Scheme::Sdma),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Semantic workload of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub distance_km: f64,
    /// Total extractable semantic bits of the user's graph.
    pub graph_bits: f64,
    /// Graph-construction cycles, independent of the extraction ratio.
    pub base_cycles: f64,
    pub c1: f64,
    pub c2: f64,
    /// Even exponent of the extraction-cost curve.
    pub c3: u32,
    pub c4: f64,
    pub c5: f64,
    /// Minimum extraction ratio meeting the accuracy floor.
    pub gamma_min: f64,
    pub g_max_hz: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance_km", self.distance_km),
            ("graph_bits", self.graph_bits),
            ("base_cycles", self.base_cycles),
            ("c1", self.c1),
            ("c4", self.c4),
            ("c5", self.c5),
            ("g_max_hz", self.g_max_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c2 > 0.0 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!("c2 must lie in (0,1), got {}", self.c2)));
        }
        if self.c3 < 2 || !self.c3.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "c3 must be an even integer >= 2, got {}",
                self.c3
            )));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma_min must lie in (0,1], got {}",
                self.gamma_min
            )));
        }
        Ok(())
    }

    /// Extraction cycles `y3 + c1 (rho - c2)^c3`.
    pub fn extraction_cycles(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("extraction ratio {rho} outside (0,1]")));
        }
        Ok(self.extraction_cycles_unchecked(rho))
    }

    pub(crate) fn extraction_cycles_unchecked(&self, rho: f64) -> f64 {
        self.base_cycles + self.c1 * (rho - self.c2).powi(self.c3 as i32)
    }

    /// Recovery cycles `c4 rho^(-c5)`.
    pub fn recovery_cycles(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("extraction ratio {rho} must be positive")));
        }
        Ok(self.recovery_cycles_unchecked(rho))
    }

    pub(crate) fn recovery_cycles_unchecked(&self, rho: f64) -> f64 {
        self.c4 * rho.powf(-self.c5)
    }

    /// Derivative of the extraction cycles with respect to rho.
    pub(crate) fn extraction_slope(&self, rho: f64) -> f64 {
        self.c1 * self.c3 as f64 * (rho - self.c2).powi(self.c3 as i32 - 1)
    }

    /// Derivative of the recovery cycles with respect to rho (negative).
    pub(crate) fn recovery_slope(&self, rho: f64) -> f64 {
        -self.c4 * self.c5 * rho.powf(-self.c5 - 1.0)
    }
}

/// Free function form of [`UserProfile::extraction_cycles`].
pub fn extraction_cycles(rho: f64, profile: &UserProfile) -> Result<f64> {
    profile.extraction_cycles(rho)
}

/// Free function form of [`UserProfile::recovery_cycles`].
pub fn recovery_cycles(rho: f64, profile: &UserProfile) -> Result<f64> {
    profile.recovery_cycles(rho)
}

/// Converts a noise density in dBm/Hz and a bandwidth into watts.
pub fn noise_power_w(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_w(density_dbm_hz) * bandwidth_hz
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_power_w: f64,
    pub p_max_w: f64,
    pub f_max_hz: f64,
    pub kappa: f64,
    pub deadline_s: f64,
    pub knowledge_bits: f64,
    pub users: Vec<UserProfile>,
}

impl SystemConfig {
    /// Recomputes `noise_power_w` from the density and bandwidth.
    pub fn refresh_noise(&mut self) {
        self.noise_power_w = noise_power_w(self.noise_density_dbm_hz, self.bandwidth_hz);
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_antennas == 0 {
            return Err(Error::InvalidConfig("num_users and num_antennas must be positive".into()));
        }
        if self.users.len() != self.num_users {
            return Err(Error::InvalidConfig(format!(
                "users list has {} entries, num_users is {}",
                self.users.len(),
                self.num_users
            )));
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_w", self.noise_power_w),
            ("p_max_w", self.p_max_w),
            ("f_max_hz", self.f_max_hz),
            ("kappa", self.kappa),
            ("deadline_s", self.deadline_s),
            ("knowledge_bits", self.knowledge_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let expected = noise_power_w(self.noise_density_dbm_hz, self.bandwidth_hz);
        if ((self.noise_power_w - expected) / expected).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "noise_power_w {} inconsistent with density and bandwidth ({expected})",
                self.noise_power_w
            )));
        }
        for u in &self.users {
            u.validate()?;
        }
        Ok(())
    }

    /// Noise power seen by one user's receiver under the given scheme.
    pub fn noise_for(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Fdma => self.noise_power_w / self.num_users as f64,
            _ => self.noise_power_w,
        }
    }

    /// Bandwidth available to one user's link under the given scheme.
    pub fn bandwidth_for(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Fdma => self.bandwidth_hz / self.num_users as f64,
            _ => self.bandwidth_hz,
        }
    }
}

/// Per-user complex channel vectors (linear amplitude gain).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn new(h: Vec<Vec<Complex64>>) -> Result<Self> {
        let set = Self { h };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h.first().map(Vec::len).unwrap_or(0);
        for (k, hk) in self.h.iter().enumerate() {
            if hk.len() != n || n == 0 {
                return Err(Error::InvalidConfig(format!("channel {k} has inconsistent length")));
            }
            if hk.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::InvalidConfig(format!("channel {k} has non-finite entries")));
            }
            if hk.iter().all(|c| c.norm_sqr() == 0.0) {
                return Err(Error::InvalidConfig(format!("channel {k} is all zero")));
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.h.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.h.first().map(Vec::len).unwrap_or(0)
    }
}

/// One full decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Stream powers in W, index 0 common.
    pub p: Vec<f64>,
    /// Rates in bit/s: `a[0]` knowledge update, `a[k + 1]` user k's common share.
    pub a: Vec<f64>,
    /// Unit-norm beamformers, index 0 common.
    pub w: Vec<Vec<Complex64>>,
}

impl Allocation {
    pub fn num_users(&self) -> usize {
        self.rho.len()
    }

    /// Payload bits of user k that travel on its own link (private stream
    /// plus common share under RSMA, the whole payload otherwise).
    pub fn payload_bits(&self, scheme: Scheme, cfg: &SystemConfig, k: usize) -> f64 {
        let z = self.rho[k] * cfg.users[k].graph_bits;
        if scheme.has_common_stream() {
            z
        } else {
            z + cfg.knowledge_bits
        }
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalized(v: &[Complex64]) -> Vec<Complex64> {
    let n = norm(v);
    if n == 0.0 {
        let mut e = vec![Complex64::new(0.0, 0.0); v.len()];
        if let Some(first) = e.first_mut() {
            *first = Complex64::new(1.0, 0.0);
        }
        return e;
    }
    v.iter().map(|c| c / n).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn profile() -> UserProfile {
        UserProfile {
            distance_km: 0.1,
            graph_bits: 1e7,
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

    pub(crate) fn system(k: usize) -> SystemConfig {
        let mut cfg = SystemConfig {
            num_users: k,
            num_antennas: 4,
            bandwidth_hz: 2e7,
            noise_density_dbm_hz: -174.0,
            noise_power_w: 0.0,
            p_max_w: 1.0,
            f_max_hz: 5e10,
            kappa: 1e-28,
            deadline_s: 1.0,
            knowledge_bits: 5e5,
            users: vec![profile(); k],
        };
        cfg.refresh_noise();
        cfg
    }

    #[test]
    fn extraction_cycles_examples() {
        let p = profile();
        assert_eq!(extraction_cycles(0.5, &p).unwrap(), 1e9);
        assert!((extraction_cycles(1.0, &p).unwrap() - 1.025e9).abs() < 1e-3);
        assert!((extraction_cycles(0.25, &p).unwrap() - 1.00625e9).abs() < 1e-3);
        assert!(extraction_cycles(0.0, &p).is_err());
        assert!(extraction_cycles(1.2, &p).is_err());
    }

    #[test]
    fn recovery_cycles_examples() {
        let mut p = profile();
        assert_eq!(recovery_cycles(1.0, &p).unwrap(), 1e8);
        assert!((recovery_cycles(0.5, &p).unwrap() - 2e8).abs() < 1e-6);
        p.c5 = 2.0;
        assert!((recovery_cycles(0.1, &p).unwrap() - 1e10).abs() < 1e-3);
        assert!(recovery_cycles(0.0, &p).is_err());
        assert!(recovery_cycles(-0.1, &p).is_err());
    }

    #[test]
    fn profile_rejects_odd_exponent() {
        let mut p = profile();
        p.c3 = 3;
        assert!(p.validate().is_err());
        p.c3 = 4;
        assert!(p.validate().is_ok());
        p.c2 = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_w(30.0) - 1.0).abs() < 1e-12);
        assert!((w_to_dbm(0.1) - 20.0).abs() < 1e-12);
        let n = noise_power_w(-174.0, 2e7);
        assert!((n - 10f64.powf(-20.4) * 2e7).abs() / n < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn extraction_cycles_convex(ra in 0.01f64..1.0, rb in 0.01f64..1.0, th in 0.0f64..1.0) {
            let p = profile();
            let mid = th * ra + (1.0 - th) * rb;
            let lhs = p.extraction_cycles(mid).unwrap();
            let rhs = th * p.extraction_cycles(ra).unwrap() + (1.0 - th) * p.extraction_cycles(rb).unwrap();
            proptest::prop_assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0));
        }
    }
}
