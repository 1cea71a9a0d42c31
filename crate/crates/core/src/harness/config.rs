use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scheme, UserProfile};
use crate::orchestrator::SolverOptions;

/// Scenario constants. Users are drawn per seed unless `users` lists them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub p_max_dbm: f64,
    pub f_max_hz: f64,
    pub kappa: f64,
    pub deadline_s: f64,
    pub knowledge_bits: f64,
    pub distance_min_km: f64,
    pub distance_max_km: f64,
    pub shadowing_std_db: f64,
    pub graph_bits: f64,
    /// Relative spread of per-user graph sizes (uniform, +-).
    pub graph_bits_spread: f64,
    pub base_cycles: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: u32,
    pub c4: f64,
    pub c5: f64,
    pub gamma_min: f64,
    pub g_max_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<UserProfile>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 5,
            num_antennas: 4,
            bandwidth_hz: 20e6,
            noise_density_dbm_hz: -174.0,
            p_max_dbm: 30.0,
            f_max_hz: 50e9,
            kappa: 1e-28,
            deadline_s: 1.0,
            knowledge_bits: 5e5,
            distance_min_km: 0.05,
            distance_max_km: 0.5,
            shadowing_std_db: 4.0,
            graph_bits: 1e7,
            graph_bits_spread: 0.2,
            base_cycles: 1e9,
            c1: 1e8,
            c2: 0.5,
            c3: 2,
            c4: 1e8,
            c5: 1.0,
            gamma_min: 0.3,
            g_max_hz: 2e9,
            users: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub outer_tol: f64,
    pub max_outer: usize,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { outer_tol: d.outer_tol, max_outer: d.max_outer, restarts: d.restarts }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            restarts: self.restarts,
            ..SolverOptions::default()
        }
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    PMaxDbm,
    BandwidthHz,
    /// Multiplier on every user's graph size and base cycles.
    DataBits,
    GMaxHz,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PMaxDbm => "p_max_dbm",
            SweepParam::BandwidthHz => "bandwidth_hz",
            SweepParam::DataBits => "data_bits",
            SweepParam::GMaxHz => "g_max_hz",
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_max_dbm" => Ok(SweepParam::PMaxDbm),
            "bandwidth_hz" => Ok(SweepParam::BandwidthHz),
            "data_bits" => Ok(SweepParam::DataBits),
            "g_max_hz" => Ok(SweepParam::GMaxHz),
            other => Err(Error::Parse(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default)]
    pub plot: bool,
    /// Record wall-clock time per point. Off by default so that repeated
    /// runs write identical files.
    #[serde(default)]
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("sweep grid must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one scheme".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// Default configuration with a power sweep attached, as written by
    /// `init-config`.
    pub fn example() -> Self {
        Self {
            sweep: Some(SweepSpec {
                param: SweepParam::PMaxDbm,
                values: vec![20.0, 25.0, 30.0, 35.0, 40.0],
                schemes: Scheme::ALL.to_vec(),
                seeds: (0..20).collect(),
                output: PathBuf::from("out/p_max.csv"),
                plot: true,
                timing: false,
            }),
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = HarnessConfig::example();
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("p_max_dbm"));
        assert_eq!(HarnessConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = HarnessConfig::from_toml("[scenario]\nnum_users = 5\nnum_antennas = 2\nbandwidth_hz = 1e7\nnoise_density_dbm_hz = -174\np_max_dbm = 30\nf_max_hz = 5e10\nkappa = 1e-28\ndeadline_s = 1\nknowledge_bits = 5e5\ndistance_min_km = 0.05\ndistance_max_km = 0.5\nshadowing_std_db = 4\ngraph_bits = 1e7\ngraph_bits_spread = 0.2\nbase_cycles = 1e9\nc1 = 1e8\nc2 = 0.5\nc3 = 2\nc4 = 1e8\nc5 = 1\ngamma_min = 0.3\ng_max_hz = 2e9\n").unwrap();
        assert_eq!(cfg.scenario.num_antennas, 2);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert!(HarnessConfig::from_toml("[scenario]\nbogus = 1\n").is_err());
    }

    #[test]
    fn sweep_grid_checks() {
        let mut s = HarnessConfig::example().sweep.unwrap();
        assert!(s.validate().is_ok());
        s.values = vec![1.0, 1.0];
        assert!(s.validate().is_err());
        s.values = vec![];
        assert!(s.validate().is_err());
    }
}
