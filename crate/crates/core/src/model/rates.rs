use num_complex::Complex64;

use super::{Allocation, ChannelSet, Scheme, SystemConfig};

/// `|h^H w|^2`.
pub fn gain(h: &[Complex64], w: &[Complex64]) -> f64 {
    h.iter()
        .zip(w)
        .map(|(hi, wi)| hi.conj() * wi)
        .sum::<Complex64>()
        .norm_sqr()
}

/// SINR of the common stream at user k; all private streams interfere.
pub fn common_sinr(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig, k: usize) -> f64 {
    let h = &channels.h[k];
    let signal = alloc.p[0] * gain(h, &alloc.w[0]);
    let interference: f64 = (1..alloc.p.len())
        .map(|j| alloc.p[j] * gain(h, &alloc.w[j]))
        .sum();
    signal / (interference + cfg.noise_power_w)
}

/// Rate at which user k can decode the common stream (bit/s).
pub fn common_rate_per_user(
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    k: usize,
) -> f64 {
    cfg.bandwidth_hz * (1.0 + common_sinr(alloc, channels, cfg, k)).log2()
}

/// Common-stream rate decodable by every user: the minimum over users.
pub fn common_rate(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    (0..channels.num_users())
        .map(|k| common_rate_per_user(alloc, channels, cfg, k))
        .fold(f64::INFINITY, f64::min)
}

/// SINR of user k's private stream after the common stream is cancelled.
pub fn private_sinr(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig, k: usize) -> f64 {
    let h = &channels.h[k];
    let signal = alloc.p[k + 1] * gain(h, &alloc.w[k + 1]);
    let interference: f64 = (0..channels.num_users())
        .filter(|&j| j != k)
        .map(|j| alloc.p[j + 1] * gain(h, &alloc.w[j + 1]))
        .sum();
    signal / (interference + cfg.noise_power_w)
}

/// Private rate of user k (bit/s) under the RSMA/SDMA signal model.
pub fn private_rate(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig, k: usize) -> f64 {
    cfg.bandwidth_hz * (1.0 + private_sinr(alloc, channels, cfg, k)).log2()
}

/// Private rate of user k under the given scheme. FDMA users occupy
/// disjoint bands of width B/K, so there is no inter-user interference.
pub fn private_rate_for(
    scheme: Scheme,
    alloc: &Allocation,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    k: usize,
) -> f64 {
    match scheme {
        Scheme::Rsma | Scheme::Sdma => private_rate(alloc, channels, cfg, k),
        Scheme::Fdma => {
            let snr = alloc.p[k + 1] * gain(&channels.h[k], &alloc.w[k + 1]) / cfg.noise_for(scheme);
            cfg.bandwidth_for(scheme) * (1.0 + snr).log2()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserProfile;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(k: usize, n: usize, b: f64, noise: f64) -> SystemConfig {
        let user = UserProfile {
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
        };
        SystemConfig {
            num_users: k,
            num_antennas: n,
            bandwidth_hz: b,
            noise_density_dbm_hz: -174.0,
            noise_power_w: noise,
            p_max_w: 1.0,
            f_max_hz: 1e10,
            kappa: 1e-28,
            deadline_s: 1.0,
            knowledge_bits: 1e5,
            users: vec![user; k],
        }
    }

    fn alloc(p: Vec<f64>, w: Vec<Vec<Complex64>>) -> Allocation {
        let k = p.len() - 1;
        Allocation {
            rho: vec![0.5; k],
            f: vec![1e9; k],
            g: vec![1e9; k],
            p,
            a: vec![1e6; k + 1],
            w,
        }
    }

    #[test]
    fn common_rate_unit_sinr() {
        // p0 |h^H w0|^2 = sigma^2 with the private stream orthogonal.
        let cfg = cfg(1, 2, 2e7, 1e-10);
        let ch = ChannelSet::new(vec![vec![c(1e-5, 0.0), c(0.0, 0.0)]]).unwrap();
        let a = alloc(vec![1.0, 0.5], vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        assert!((common_rate_per_user(&a, &ch, &cfg, 0) - 2e7).abs() < 1e-6);
    }

    #[test]
    fn common_rate_zero_power() {
        let cfg = cfg(1, 2, 2e7, 1e-10);
        let ch = ChannelSet::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let a = alloc(vec![0.0, 0.5], vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        assert_eq!(common_rate_per_user(&a, &ch, &cfg, 0), 0.0);
    }

    #[test]
    fn common_rate_hand_evaluated() {
        // h=(1,0), w0=(1,0), w1=(0,1): SINR = 0.1 / 1e-10 = 1e9.
        let cfg = cfg(1, 2, 2e7, 1e-10);
        let ch = ChannelSet::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let a = alloc(vec![0.1, 0.5], vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        let expected = 2e7 * (1.0f64 + 1e9).log2();
        assert!((common_rate_per_user(&a, &ch, &cfg, 0) - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn private_rate_examples() {
        let cfg = cfg(2, 2, 2e7, 1e-10);
        let ch = ChannelSet::new(vec![
            vec![c(1e-5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1e-5, 0.0)],
        ])
        .unwrap();
        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let e2 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        // user 0: p1 * 1e-10 = sigma^2 -> SINR 1
        let a = alloc(vec![0.3, 1.0, 3.0], vec![e1.clone(), e1.clone(), e2.clone()]);
        assert!((private_rate(&a, &ch, &cfg, 0) - 2e7).abs() < 1e-6);
        // user 1: orthogonal beams, p2 * 1e-10 = 3 sigma^2 -> SINR 3
        assert!((private_rate(&a, &ch, &cfg, 1) - 4e7).abs() < 1e-6);
    }

    #[test]
    fn common_rate_is_minimum() {
        let cfg = cfg(2, 2, 2e7, 1e-10);
        let ch = ChannelSet::new(vec![
            vec![c(1e-5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(2e-5, 0.0)],
        ])
        .unwrap();
        let w0 = crate::model::normalized(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let a = alloc(vec![1.0, 0.1, 0.1], vec![w0, vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        let c0 = common_rate(&a, &ch, &cfg);
        for k in 0..2 {
            assert!(c0 <= common_rate_per_user(&a, &ch, &cfg, k));
        }
        assert_eq!(c0, common_rate_per_user(&a, &ch, &cfg, 0).min(common_rate_per_user(&a, &ch, &cfg, 1)));
    }

    proptest::proptest! {
        #[test]
        fn rate_monotonicity(p0 in 0.01f64..2.0, p1 in 0.01f64..2.0, p2 in 0.01f64..2.0, dp in 0.0f64..1.0,
                             re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let cfg = cfg(2, 2, 2e7, 1e-10);
            let ch = ChannelSet::new(vec![
                vec![c(1e-5, 0.0), c(re * 1e-5, im * 1e-5)],
                vec![c(im * 1e-5, 0.0), c(1e-5, re * 1e-5)],
            ]).unwrap();
            let w = vec![
                crate::model::normalized(&[c(1.0, 0.3), c(0.2, 1.0)]),
                crate::model::normalized(&[c(1.0, 0.0), c(re, im)]),
                crate::model::normalized(&[c(im, re), c(1.0, 0.0)]),
            ];
            let base = alloc(vec![p0, p1, p2], w.clone());
            let mut more_common = base.clone();
            more_common.p[0] += dp;
            let mut more_private = base.clone();
            more_private.p[2] += dp;
            let tol = 1e-9;
            proptest::prop_assert!(common_rate_per_user(&more_common, &ch, &cfg, 0) >= common_rate_per_user(&base, &ch, &cfg, 0) - tol);
            proptest::prop_assert!(common_rate_per_user(&more_private, &ch, &cfg, 0) <= common_rate_per_user(&base, &ch, &cfg, 0) + tol);
            proptest::prop_assert!(private_rate(&more_private, &ch, &cfg, 1) >= private_rate(&base, &ch, &cfg, 1) - tol);
            proptest::prop_assert!(private_rate(&more_private, &ch, &cfg, 0) <= private_rate(&base, &ch, &cfg, 0) + tol);
        }

        #[test]
        fn doubling_bandwidth_doubles_rates(p0 in 0.01f64..2.0, p1 in 0.01f64..2.0) {
            let mut cfg1 = cfg(1, 2, 1e7, 1e-10);
            let ch = ChannelSet::new(vec![vec![c(1e-5, 2e-6), c(-3e-6, 1e-5)]]).unwrap();
            let a = alloc(vec![p0, p1], vec![
                crate::model::normalized(&[c(1.0, 0.0), c(1.0, 0.0)]),
                crate::model::normalized(&[c(1.0, 0.0), c(0.0, 1.0)]),
            ]);
            let r1 = private_rate(&a, &ch, &cfg1, 0);
            let c1 = common_rate_per_user(&a, &ch, &cfg1, 0);
            cfg1.bandwidth_hz = 2e7;
            proptest::prop_assert!((private_rate(&a, &ch, &cfg1, 0) - 2.0 * r1).abs() <= 1e-9 * r1);
            proptest::prop_assert!((common_rate_per_user(&a, &ch, &cfg1, 0) - 2.0 * c1).abs() <= 1e-9 * c1.max(1.0));
        }
    }
}
