use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ScenarioConfig, SweepParam};
use crate::error::Result;
use crate::model::{dbm_to_w, generate_channels, noise_power_w, ChannelOptions, ChannelSet, SystemConfig, UserProfile};

/// Stream used for channel draws, kept apart from the user draws so that
/// changing the user model leaves channels untouched.
const CHANNEL_STREAM: u64 = 0x5eed_c4a7;

impl ScenarioConfig {
    /// Copy with one swept parameter set to `value`.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Self {
        let mut out = self.clone();
        match param {
            SweepParam::PMaxDbm => out.p_max_dbm = value,
            SweepParam::BandwidthHz => out.bandwidth_hz = value,
            SweepParam::DataBits => {
                out.graph_bits *= value;
                out.base_cycles *= value;
                if let Some(users) = &mut out.users {
                    for u in users {
                        u.graph_bits *= value;
                        u.base_cycles *= value;
                    }
                }
            }
            SweepParam::GMaxHz => {
                out.g_max_hz = value;
                if let Some(users) = &mut out.users {
                    for u in users {
                        u.g_max_hz = value;
                    }
                }
            }
        }
        out
    }

    fn draw_users(&self, rng: &mut ChaCha8Rng) -> Vec<UserProfile> {
        (0..self.num_users)
            .map(|_| {
                let distance_km = rng.random_range(self.distance_min_km..=self.distance_max_km);
                let spread = rng.random_range(-self.graph_bits_spread..=self.graph_bits_spread);
                UserProfile {
                    distance_km,
                    graph_bits: self.graph_bits * (1.0 + spread),
                    base_cycles: self.base_cycles,
                    c1: self.c1,
                    c2: self.c2,
                    c3: self.c3,
                    c4: self.c4,
                    c5: self.c5,
                    gamma_min: self.gamma_min,
                    g_max_hz: self.g_max_hz,
                }
            })
            .collect()
    }

    /// System configuration and channels for one seed.
    pub fn build(&self, seed: u64) -> Result<(SystemConfig, ChannelSet)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = match &self.users {
            Some(u) => u.clone(),
            None => self.draw_users(&mut rng),
        };
        let cfg = SystemConfig {
            num_users: users.len(),
            num_antennas: self.num_antennas,
            bandwidth_hz: self.bandwidth_hz,
            noise_density_dbm_hz: self.noise_density_dbm_hz,
            noise_power_w: noise_power_w(self.noise_density_dbm_hz, self.bandwidth_hz),
            p_max_w: dbm_to_w(self.p_max_dbm),
            f_max_hz: self.f_max_hz,
            kappa: self.kappa,
            deadline_s: self.deadline_s,
            knowledge_bits: self.knowledge_bits,
            users,
        };
        cfg.validate()?;
        let distances: Vec<f64> = cfg.users.iter().map(|u| u.distance_km).collect();
        let opts = ChannelOptions { shadowing_std_db: self.shadowing_std_db };
        let channels = generate_channels(&cfg, &distances, seed ^ CHANNEL_STREAM, opts)?;
        Ok((cfg, channels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_ranges() {
        let sc = ScenarioConfig::default();
        let (cfg, ch) = sc.build(3).unwrap();
        assert_eq!(cfg.num_users, 5);
        assert_eq!(ch.num_antennas(), 4);
        assert!((cfg.p_max_w - 1.0).abs() < 1e-12);
        for u in &cfg.users {
            assert!((0.05..=0.5).contains(&u.distance_km));
            assert!((0.8e7..=1.2e7).contains(&u.graph_bits));
        }
    }

    #[test]
    fn sweeps_share_geometry() {
        let sc = ScenarioConfig::default();
        let (a, ha) = sc.build(9).unwrap();
        let (b, hb) = sc.with_param(SweepParam::BandwidthHz, 5e6).build(9).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.users, b.users);
        assert!(b.noise_power_w < a.noise_power_w);
        let (c, _) = sc.with_param(SweepParam::DataBits, 2.0).build(9).unwrap();
        for (x, y) in a.users.iter().zip(&c.users) {
            assert!((y.graph_bits - 2.0 * x.graph_bits).abs() < 1e-6);
            assert_eq!(y.base_cycles, 2.0 * x.base_cycles);
        }
    }
}
