use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ScenarioConfig, SolverConfig, SweepParam, SweepSpec};
use crate::error::{Error, Result};
use crate::model::Scheme;
use crate::orchestrator::solve_scheme;

/// Environment variable that sets the worker-pool size.
pub const WORKERS_ENV: &str = "SEMCOM_WORKERS";

/// One solved point, or the median over seeds when `seed` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub seed: Option<u64>,
    pub param: SweepParam,
    pub value: f64,
    pub total_energy_j: f64,
    pub e1_j: f64,
    pub e2_j: f64,
    pub e20_j: f64,
    pub e3_j: f64,
    pub outer_iters: usize,
    pub feasible: bool,
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    fn infeasible(scheme: Scheme, seed: u64, param: SweepParam, value: f64) -> Self {
        Self {
            scheme,
            seed: Some(seed),
            param,
            value,
            total_energy_j: f64::INFINITY,
            e1_j: f64::INFINITY,
            e2_j: f64::INFINITY,
            e20_j: f64::INFINITY,
            e3_j: f64::INFINITY,
            outer_iters: 0,
            feasible: false,
            wall_ms: None,
        }
    }

    pub fn is_median(&self) -> bool {
        self.seed.is_none()
    }
}

/// Rows of a sweep in canonical order: by scheme, then value, then seed,
/// with each median row after its members.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<ResultRow>,
}

impl SweepTable {
    /// Median total energy of `scheme` at `value`.
    pub fn median(&self, scheme: Scheme, value: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.is_median() && r.scheme == scheme && r.value == value)
            .map(|r| r.total_energy_j)
    }

    /// Median total energy of `scheme` at every grid value, in grid order.
    pub fn medians(&self, scheme: Scheme) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.is_median() && r.scheme == scheme).map(|r| (r.value, r.total_energy_j)).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.is_median())
    }
}

/// Median of the member rows. Rows are ranked by total energy (infeasible
/// ones last); energies come from the middle row, or the mean of the two
/// middle rows, so the components still add up to the total.
pub fn median_row(members: &[ResultRow]) -> Result<ResultRow> {
    let first = members.first().ok_or_else(|| Error::Domain("median of no rows".into()))?;
    let mut sorted: Vec<&ResultRow> = members.iter().collect();
    sorted.sort_by(|a, b| a.total_energy_j.total_cmp(&b.total_energy_j));
    let n = sorted.len();
    let middle: Vec<&ResultRow> = if n % 2 == 1 { vec![sorted[n / 2]] } else { vec![sorted[n / 2 - 1], sorted[n / 2]] };
    let mean = |f: fn(&ResultRow) -> f64| middle.iter().map(|r| f(r)).sum::<f64>() / middle.len() as f64;
    let mut iters: Vec<usize> = members.iter().map(|r| r.outer_iters).collect();
    iters.sort_unstable();
    let mut walls: Vec<f64> = members.iter().filter_map(|r| r.wall_ms).collect();
    walls.sort_by(f64::total_cmp);
    Ok(ResultRow {
        scheme: first.scheme,
        seed: None,
        param: first.param,
        value: first.value,
        total_energy_j: mean(|r| r.total_energy_j),
        e1_j: mean(|r| r.e1_j),
        e2_j: mean(|r| r.e2_j),
        e20_j: mean(|r| r.e20_j),
        e3_j: mean(|r| r.e3_j),
        outer_iters: iters[(n - 1) / 2],
        feasible: middle.iter().all(|r| r.feasible),
        wall_ms: (walls.len() == n).then(|| walls[(n - 1) / 2]),
    })
}

/// Solved points shared between sweeps, keyed by the full scenario, the
/// solver settings, the scheme and the seed. Sweeps over different
/// parameters meet at the default scenario; this avoids solving it twice.
#[derive(Debug, Default)]
pub struct SolveCache {
    entries: Mutex<HashMap<String, ResultRow>>,
}

impl SolveCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(scenario: &ScenarioConfig, solver: &SolverConfig, scheme: Scheme, seed: u64) -> String {
        format!("{scenario:?}|{solver:?}|{scheme}|{seed}")
    }

    fn get(&self, key: &str) -> Option<ResultRow> {
        self.entries.lock().expect("cache lock").get(key).cloned()
    }

    fn insert(&self, key: String, row: ResultRow) {
        self.entries.lock().expect("cache lock").insert(key, row);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Worker count from the environment, defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn solve_point(
    scenario: &ScenarioConfig,
    solver: &SolverConfig,
    scheme: Scheme,
    seed: u64,
    param: SweepParam,
    value: f64,
    timing: bool,
) -> ResultRow {
    let clock = Instant::now();
    let solved = scenario.build(seed).and_then(|(cfg, ch)| solve_scheme(scheme, &cfg, &ch, &solver.options()));
    let wall_ms = timing.then(|| clock.elapsed().as_secs_f64() * 1e3);
    match solved {
        Ok(sol) => ResultRow {
            scheme,
            seed: Some(seed),
            param,
            value,
            total_energy_j: sol.energy.total,
            e1_j: sol.energy.e1.iter().sum(),
            e2_j: sol.energy.e2.iter().sum(),
            e20_j: sol.energy.e20,
            e3_j: sol.energy.e3.iter().sum(),
            outer_iters: sol.trace.outer_iterations(),
            feasible: true,
            wall_ms,
        },
        Err(_) => ResultRow { wall_ms, ..ResultRow::infeasible(scheme, seed, param, value) },
    }
}

/// Solves every (scheme, seed, value) of `spec` and appends one median row
/// per (scheme, value). Failed points become infeasible rows.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig, solver: &SolverConfig) -> Result<SweepTable> {
    run_sweep_cached(spec, base, solver, &SolveCache::new())
}

/// [`run_sweep`] reusing and filling `cache`.
pub fn run_sweep_cached(
    spec: &SweepSpec,
    base: &ScenarioConfig,
    solver: &SolverConfig,
    cache: &SolveCache,
) -> Result<SweepTable> {
    spec.validate()?;
    let mut schemes = spec.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let mut jobs = Vec::new();
    for &scheme in &schemes {
        for &value in &spec.values {
            for &seed in &seeds {
                jobs.push((scheme, value, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Output(format!("worker pool: {e}")))?;
    let points: Vec<ResultRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(scheme, value, seed)| {
                let scenario = base.with_param(spec.param, value);
                let key = SolveCache::key(&scenario, solver, scheme, seed);
                let row = match cache.get(&key) {
                    Some(hit) => hit,
                    None => {
                        let row = solve_point(&scenario, solver, scheme, seed, spec.param, value, spec.timing);
                        cache.insert(key, row.clone());
                        row
                    }
                };
                ResultRow { param: spec.param, value, ..row }
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(points.len() + schemes.len() * spec.values.len());
    for group in points.chunk_by(|a, b| a.scheme == b.scheme && a.value == b.value) {
        rows.extend_from_slice(group);
        rows.push(median_row(group)?);
    }
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, total: f64) -> ResultRow {
        ResultRow {
            scheme: Scheme::Rsma,
            seed: Some(seed),
            param: SweepParam::PMaxDbm,
            value: 30.0,
            total_energy_j: total,
            e1_j: total * 0.5,
            e2_j: total * 0.1,
            e20_j: total * 0.1,
            e3_j: total * 0.3,
            outer_iters: seed as usize,
            feasible: total.is_finite(),
            wall_ms: None,
        }
    }

    #[test]
    fn median_odd_and_even() {
        let m = median_row(&[row(0, 3.0), row(1, 1.0), row(2, 2.0)]).unwrap();
        assert_eq!(m.total_energy_j, 2.0);
        assert!(m.is_median() && m.feasible);
        let m = median_row(&[row(0, 4.0), row(1, 1.0), row(2, 2.0), row(3, 3.0)]).unwrap();
        assert_eq!(m.total_energy_j, 2.5);
        let parts = m.e1_j + m.e2_j + m.e20_j + m.e3_j;
        assert!((parts - m.total_energy_j).abs() <= 1e-12);
        assert_eq!(m.outer_iters, 1);
    }

    #[test]
    fn infeasible_rows_rank_last() {
        let m = median_row(&[row(0, f64::INFINITY), row(1, 1.0), row(2, 2.0)]).unwrap();
        assert_eq!(m.total_energy_j, 2.0);
        let m = median_row(&[row(0, f64::INFINITY), row(1, f64::INFINITY), row(2, 2.0)]).unwrap();
        assert!(m.total_energy_j.is_infinite() && !m.feasible);
        assert!(median_row(&[]).is_err());
    }

    fn small_spec() -> (SweepSpec, ScenarioConfig) {
        let scenario = ScenarioConfig { num_users: 2, num_antennas: 2, ..Default::default() };
        let spec = SweepSpec {
            param: SweepParam::BandwidthHz,
            values: vec![1e7, 2e7],
            schemes: vec![Scheme::Fdma, Scheme::Sdma],
            seeds: vec![1, 0],
            output: "unused.csv".into(),
            plot: false,
            timing: false,
        };
        (spec, scenario)
    }

    #[test]
    fn sweep_counts_and_order() {
        let (spec, scenario) = small_spec();
        let cache = SolveCache::new();
        let table = run_sweep_cached(&spec, &scenario, &SolverConfig::default(), &cache).unwrap();
        assert_eq!(table.points().count(), 8);
        assert_eq!(table.rows.len(), 12);
        assert_eq!(cache.len(), 8);
        let order: Vec<(Scheme, f64, Option<u64>)> = table.rows.iter().map(|r| (r.scheme, r.value, r.seed)).collect();
        assert_eq!(order[0], (Scheme::Fdma, 1e7, Some(0)));
        assert_eq!(order[2], (Scheme::Fdma, 1e7, None));
        assert_eq!(order[11], (Scheme::Sdma, 2e7, None));
        for r in table.points().filter(|r| r.feasible) {
            let parts = r.e1_j + r.e2_j + r.e20_j + r.e3_j;
            assert!((parts - r.total_energy_j).abs() <= 1e-9 * r.total_energy_j);
        }
        let again = run_sweep_cached(&spec, &scenario, &SolverConfig::default(), &cache).unwrap();
        assert_eq!(again, table);
        assert_eq!(run_sweep(&spec, &scenario, &SolverConfig::default()).unwrap(), table);
    }

    #[test]
    fn failed_points_become_rows() {
        let (mut spec, mut scenario) = small_spec();
        scenario.deadline_s = 1e-3;
        spec.schemes = vec![Scheme::Fdma];
        let table = run_sweep(&spec, &scenario, &SolverConfig::default()).unwrap();
        assert!(table.points().all(|r| !r.feasible && r.total_energy_j.is_infinite()));
        assert!(table.medians(Scheme::Fdma).iter().all(|(_, m)| m.is_infinite()));
    }
}
