use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{ChannelSet, SystemConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOptions {
    /// Log-normal shadowing standard deviation in dB; 0 disables it.
    pub shadowing_std_db: f64,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self { shadowing_std_db: 4.0 }
    }
}

/// Pathloss in dB at distance `d_km`.
pub fn pathloss_db(d_km: f64) -> f64 {
    128.1 + 37.6 * d_km.log10()
}

/// Rayleigh channels with pathloss and log-normal shadowing, one per
/// distance. Deterministic in `seed`.
pub fn generate_channels(
    cfg: &SystemConfig,
    distances_km: &[f64],
    seed: u64,
    opts: ChannelOptions,
) -> Result<ChannelSet> {
    if let Some(d) = distances_km.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    if !(opts.shadowing_std_db >= 0.0) {
        return Err(Error::Domain("shadowing standard deviation must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shadow = Normal::new(0.0, opts.shadowing_std_db).expect("validated std");
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = Vec::with_capacity(distances_km.len());
    for &d in distances_km {
        let x: f64 = if opts.shadowing_std_db > 0.0 { shadow.sample(&mut rng) } else { 0.0 };
        let amp = 10f64.powf(-(pathloss_db(d) + x) / 10.0).sqrt();
        let hk: Vec<Complex64> = (0..cfg.num_antennas)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * half, im * half) * amp
            })
            .collect();
        h.push(hk);
    }
    ChannelSet::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> SystemConfig {
        let mut c = crate::model::tests::system(1);
        c.num_antennas = n;
        c
    }

    #[test]
    fn pathloss_at_100m() {
        let gain = 10f64.powf(-pathloss_db(0.1) / 10.0);
        assert!((gain - 10f64.powf(-9.05)).abs() < 1e-22);
        assert!((gain - 8.91e-10).abs() / 8.91e-10 < 1e-3);
    }

    #[test]
    fn deterministic_per_seed() {
        let c = cfg(4);
        let d = [0.1, 0.3, 0.45];
        let a = generate_channels(&c, &d, 7, ChannelOptions::default()).unwrap();
        let b = generate_channels(&c, &d, 7, ChannelOptions::default()).unwrap();
        let other = generate_channels(&c, &d, 8, ChannelOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_nonpositive_distance() {
        let c = cfg(2);
        assert!(generate_channels(&c, &[0.1, 0.0], 1, ChannelOptions::default()).is_err());
        assert!(generate_channels(&c, &[-1.0], 1, ChannelOptions::default()).is_err());
    }

    #[test]
    fn small_scale_power_mean() {
        let n = 4;
        let c = cfg(n);
        let d = vec![0.1; 10_000];
        let opts = ChannelOptions { shadowing_std_db: 0.0 };
        let ch = generate_channels(&c, &d, 42, opts).unwrap();
        let pl = 10f64.powf(-pathloss_db(0.1) / 10.0);
        let mean = ch
            .h
            .iter()
            .map(|hk| hk.iter().map(|z| z.norm_sqr()).sum::<f64>() / pl)
            .sum::<f64>()
            / d.len() as f64;
        assert!((mean - n as f64).abs() < 0.05 * n as f64, "mean {mean}");
    }
}
