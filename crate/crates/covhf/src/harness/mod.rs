//! Experiment runner: named Monte Carlo experiments over simulated
//! scenarios, with deterministic replication seeding, worker-pool
//! parallelism, and persisted results.
//!
//! Replication `i` of an experiment depends only on
//! `(master_seed, i, scenario)`: its scenario seed is
//! `replication_seed(master_seed, i)` regardless of execution order or
//! the number of worker threads. `COVHF_THREADS` caps the worker count.

mod experiments;
mod record;

pub use record::{Check, RepOutcome, ResultRecord, CSV_SCHEMA_VERSION, RECORD_SCHEMA_VERSION};

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avar::AvarError;
use crate::baselines::BaselineError;
use crate::preavg::{EstimatorConfig, PreavgError};
use crate::simulate::{ScenarioSpec, SimError};
use crate::sync::SyncError;
use crate::weightfn::{WeightError, WeightScheme};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Preavg(#[from] PreavgError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Avar(#[from] AvarError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Bias/RMSE of the estimator against the true integrated covariance
    /// over a grid of `n_scale` values.
    Consistency,
    /// Regression slope of log RMSE on log n.
    Rate,
    /// Empirical coverage of the oracle confidence interval.
    CltCoverage,
    /// Previous-tick realized covariance across shrinking grids against
    /// the modified estimator.
    Epps,
    /// `sup |c_{g,g}(p,q) - ψ_{g,g}((q-p)/k_n)|` across window sizes.
    KernelLemma,
    /// One estimate with its report, baselines, and tick output.
    SingleRun,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Rate => "rate",
            ExperimentKind::CltCoverage => "clt_coverage",
            ExperimentKind::Epps => "epps",
            ExperimentKind::KernelLemma => "kernel_lemma",
            ExperimentKind::SingleRun => "single_run",
        };
        f.write_str(name)
    }
}

fn default_estimator() -> EstimatorConfig {
    // horizon_t = 0 means "use the scenario horizon"; resolved by
    // `normalized`.
    EstimatorConfig {
        horizon_t: 0.0,
        ..EstimatorConfig::default()
    }
}

fn default_replications() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("covhf_out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scenario: ScenarioSpec,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// `n_scale` grid for consistency/rate.
    #[serde(default)]
    pub n_grid: Vec<u64>,
    /// Window grid for kernel_lemma.
    #[serde(default)]
    pub kn_grid: Vec<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    /// Optional tick CSV inputs consumed by single_run instead of
    /// simulating.
    #[serde(default)]
    pub ticks_x: Option<PathBuf>,
    #[serde(default)]
    pub ticks_y: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Fills derived defaults: estimator horizon from the scenario, the
    /// per-experiment grids when left empty.
    pub fn normalized(mut self) -> Self {
        if self.estimator.horizon_t <= 0.0 {
            self.estimator.horizon_t = self.scenario.sampling.horizon();
        }
        if self.n_grid.is_empty() {
            self.n_grid = match self.experiment {
                ExperimentKind::Rate => vec![500, 2000, 8000, 32000],
                _ => vec![500, 2000, 8000],
            };
        }
        if self.kn_grid.is_empty() {
            self.kn_grid = vec![8, 16, 32];
        }
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario
            .validate()
            .map_err(HarnessError::from)?;
        self.estimator.validate().map_err(HarnessError::from)?;
        if self.replications == 0 {
            return Err(HarnessError::BadConfig(
                "replications must be at least 1".into(),
            ));
        }
        match self.experiment {
            ExperimentKind::Consistency | ExperimentKind::Rate => {
                if self.n_grid.is_empty() {
                    return Err(HarnessError::BadConfig("n_grid must be nonempty".into()));
                }
            }
            ExperimentKind::KernelLemma
                if self.kn_grid.iter().any(|&k| k < 2) => {
                    return Err(HarnessError::BadConfig(
                        "kernel_lemma windows must be at least 2".into(),
                    ));
                }
            _ => {}
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(config.normalized())
    }
}

/// Builds the replication worker pool, honoring `COVHF_THREADS`.
fn worker_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = std::env::var("COVHF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        builder = builder.num_threads(threads.max(1));
    }
    Ok(builder.build()?)
}

/// Runs the configured experiment and assembles its result record.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    let config = config.clone().normalized();
    config.validate()?;
    let scheme = WeightScheme::triangular();
    let start = Instant::now();
    let pool = worker_pool()?;
    let reps = pool.install(|| experiments::execute(&config, &scheme))?;
    let summary = experiments::summarize(&config, &reps);
    let checks = experiments::evaluate_checks(&config, &summary);
    let failures = reps.iter().filter(|r| r.error.is_some()).count();
    Ok(ResultRecord {
        schema_version: RECORD_SCHEMA_VERSION.to_string(),
        experiment: config.experiment.to_string(),
        scenario_hash: record::scenario_hash(&config),
        config,
        replications: reps,
        summary,
        checks,
        failures,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Recomputes the summary statistics from the per-replication rows of a
/// (possibly re-imported) record.
pub fn recompute_summary(
    record: &ResultRecord,
) -> std::collections::BTreeMap<String, f64> {
    experiments::summarize(&record.config, &record.replications)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{DiffusionSpec, NoiseSpec, SamplingSpec};

    pub(crate) fn tiny_config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            scenario: ScenarioSpec {
                diffusion: DiffusionSpec {
                    sigma_x: 1.0,
                    sigma_y: 1.0,
                    rho: 0.5,
                    mu_x: 0.0,
                    mu_y: 0.0,
                    phi_x: 0.0,
                    phi_y: 0.0,
                },
                noise: NoiseSpec::GaussianIid {
                    omega_x: 0.005,
                    omega_y: 0.005,
                },
                sampling: SamplingSpec::Poisson {
                    n_scale: 400,
                    p1: 1.0,
                    p2: 1.0,
                    horizon: 1.0,
                },
                seed: 7,
                fine_steps: 0,
            },
            estimator: default_estimator(),
            replications: 5,
            n_grid: vec![200, 400],
            kn_grid: vec![4, 6],
            output_dir: std::env::temp_dir().join("covhf_harness_tests"),
            master_seed: 42,
            ticks_x: None,
            ticks_y: None,
        }
    }

    #[test]
    fn single_run_is_deterministic() {
        let config = tiny_config(ExperimentKind::SingleRun);
        let mut a = run(&config).unwrap();
        let mut b = run(&config).unwrap();
        a.wall_clock_secs = 0.0;
        b.wall_clock_secs = 0.0;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn replication_results_do_not_depend_on_rep_count() {
        let mut config = tiny_config(ExperimentKind::CltCoverage);
        config.replications = 4;
        let small = run(&config).unwrap();
        config.replications = 8;
        let large = run(&config).unwrap();
        for (a, b) in small.replications.iter().zip(&large.replications) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn consistency_mean_is_near_truth_on_tiny_run() {
        let mut config = tiny_config(ExperimentKind::Consistency);
        config.replications = 20;
        config.n_grid = vec![400];
        let record = run(&config).unwrap();
        let mean = record.summary["mean_n400"];
        let se = record.summary["mc_se_n400"];
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn summary_recompute_matches_stored() {
        let config = tiny_config(ExperimentKind::CltCoverage);
        let record = run(&config).unwrap();
        let recomputed = recompute_summary(&record);
        assert_eq!(record.summary, recomputed);
    }

    #[test]
    fn near_classical_regime_recovers_truth_within_one_percent() {
        // Synchronous regular sampling without noise at large n: the mean
        // estimate lands within 1% of the true integrated covariance.
        let mut config = tiny_config(ExperimentKind::Consistency);
        config.scenario.diffusion.rho = 0.9;
        config.scenario.noise = NoiseSpec::None;
        config.scenario.sampling = SamplingSpec::Regular {
            n_scale: 32000,
            p1: 1.0,
            p2: 1.0,
            offset: 0.0,
            horizon: 1.0,
        };
        config.scenario.fine_steps = 320_000;
        config.estimator.theta = 0.3;
        config.estimator.horizon_t = 1.0;
        config.n_grid = vec![32000];
        config.replications = 400;
        config.master_seed = 314_159;
        let record = run(&config).unwrap();
        let mean = record.summary["mean_n32000"];
        let truth = record.summary["true_ic"];
        assert!(
            ((mean - truth) / truth).abs() < 0.01,
            "mean {mean} vs truth {truth}"
        );
    }

    #[test]
    fn infeasible_replications_are_counted_not_fatal() {
        // n_scale this small leaves some replications with fewer than 4
        // refresh times; those must be reported per replication.
        let mut config = tiny_config(ExperimentKind::Consistency);
        config.scenario.sampling = SamplingSpec::Poisson {
            n_scale: 4,
            p1: 1.0,
            p2: 1.0,
            horizon: 1.0,
        };
        config.n_grid = vec![4];
        config.replications = 40;
        config.master_seed = 2_718;
        let record = run(&config).unwrap();
        assert!(record.failures > 0, "expected some infeasible replications");
        assert!(record.failures < record.replications.len());
        for rep in &record.replications {
            if rep.error.is_some() {
                assert!(rep.values.is_empty());
            }
        }
        assert_eq!(record.summary["failures_n4"], record.failures as f64);
    }

    #[test]
    fn omitted_estimator_horizon_resolves_to_scenario_horizon() {
        let json = serde_json::json!({
            "experiment": "single_run",
            "scenario": {
                "diffusion": {"sigma_x": 1.0, "sigma_y": 1.0, "rho": 0.5},
                "noise": {"mode": "none"},
                "sampling": {"mode": "poisson", "n_scale": 100, "p1": 1.0, "p2": 1.0, "horizon": 2.0},
                "seed": 1
            },
            "estimator": {"theta": 0.9}
        });
        let config: ExperimentConfig = serde_json::from_value(json).unwrap();
        assert_eq!(config.estimator.horizon_t, 0.0);
        let normalized = config.normalized();
        assert_eq!(normalized.estimator.horizon_t, 2.0);
        assert_eq!(normalized.estimator.theta, 0.9);
        assert!(normalized.estimator.adjusted_psi, "struct default retained");
    }

    #[test]
    fn config_validation_rejects_zero_replications() {
        let mut config = tiny_config(ExperimentKind::Consistency);
        config.replications = 0;
        assert!(matches!(
            run(&config),
            Err(HarnessError::BadConfig(_))
        ));
    }
}
