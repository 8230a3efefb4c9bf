//! The named experiments and their summaries / self-test checks.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::record::{Check, RepOutcome};
use super::{ExperimentConfig, ExperimentKind, HarnessError};
use crate::avar::{
    gf_poisson_changepoint, integrated_variance, oracle_ci, AvarInputs, AvarSegment,
};
use crate::baselines::{hayashi_yoshida, previous_tick_rc};
use crate::preavg::{modified_phy, EstimatorConfig, ModPhyReport};
use crate::simulate::{
    generate, read_ticks_csv, replication_seed, true_ic, write_ticks_csv, NoiseSpec, SamplingSpec,
    ScenarioSpec, SimulatedScenario,
};
use crate::sync::{interpolate, overlap_matrix, OverlapOracle};
use crate::weightfn::{KernelConstants, WeightFn, WeightScheme};

/// Confidence level of the coverage experiment.
const COVERAGE_LEVEL: f64 = 0.95;

/// Grid-step ladder of the Epps experiment, in units of `1/n_scale`; the
/// last entry is the finest grid `1/(5 n)`.
const EPPS_STEP_FACTORS: [f64; 4] = [25.0, 5.0, 1.0, 0.2];

/// `n_scale` used for a kernel-lemma window: `4 k_n²`, so the deviation
/// scale `√b_n ≍ 1/k_n` shrinks as the window grows.
fn kernel_lemma_n_scale(k_n: usize) -> u64 {
    4 * (k_n * k_n) as u64
}

pub(super) fn execute(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
) -> Result<Vec<RepOutcome>, HarnessError> {
    match config.experiment {
        ExperimentKind::Consistency | ExperimentKind::Rate => grid_estimates(config, scheme),
        ExperimentKind::CltCoverage => coverage(config, scheme),
        ExperimentKind::Epps => epps(config, scheme),
        ExperimentKind::KernelLemma => kernel_lemma(config, scheme),
        ExperimentKind::SingleRun => single_run(config, scheme),
    }
}

/// Runs one simulated replication of `scenario` through the estimator.
fn estimate_replication(
    scenario: &ScenarioSpec,
    estimator: &EstimatorConfig,
    scheme: &WeightScheme,
) -> Result<(ModPhyReport, SimulatedScenario), String> {
    let sim = generate(scenario).map_err(|e| e.to_string())?;
    let report = modified_phy(&sim.x, &sim.y, scheme, estimator).map_err(|e| e.to_string())?;
    Ok((report, sim))
}

fn outcome(rep: u64, n_scale: u64, seed: u64, result: Result<BTreeMap<String, f64>, String>) -> RepOutcome {
    match result {
        Ok(values) => RepOutcome {
            rep,
            n_scale,
            seed,
            values,
            error: None,
        },
        Err(msg) => RepOutcome {
            rep,
            n_scale,
            seed,
            values: BTreeMap::new(),
            error: Some(msg),
        },
    }
}

// --- consistency / rate ----------------------------------------------------

fn grid_estimates(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
) -> Result<Vec<RepOutcome>, HarnessError> {
    let mut jobs = Vec::new();
    for &n in &config.n_grid {
        for rep in 0..config.replications as u64 {
            jobs.push((n, rep));
        }
    }
    let outcomes = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let seed = replication_seed(config.master_seed, rep);
            let scenario = ScenarioSpec {
                sampling: config.scenario.sampling.with_n_scale(n),
                ..config.scenario.clone()
            }
            .with_seed(seed);
            let result = estimate_replication(&scenario, &config.estimator, scheme).map(
                |(report, _)| {
                    let mut values = BTreeMap::new();
                    values.insert("estimate".into(), report.estimate);
                    values.insert("k_n".into(), report.k_n as f64);
                    values.insert("n_refresh".into(), report.n_refresh as f64);
                    values.insert("psi_used".into(), report.psi_used);
                    values
                },
            );
            outcome(rep, n, seed, result)
        })
        .collect();
    Ok(outcomes)
}

// --- CLT coverage ------------------------------------------------------------

/// Oracle asymptotic-variance segments of a scenario, for the window
/// constant actually used (`theta_eff = k_n √b_n`).
///
/// Noise covariance: Gaussian noise contributes `Ψ = diag(ω_x², ω_y²)`;
/// the rounding channel is summarized by its u-averaged kernel variance
/// `γ²/6` (an oracle approximation: the exact spot value depends on the
/// latent position within the grid cell).
fn avar_segments(
    scenario: &ScenarioSpec,
    theta_eff: f64,
    constants: KernelConstants,
    horizon: f64,
) -> Result<(Vec<AvarSegment>, bool), HarnessError> {
    let d = &scenario.diffusion;
    let (psi11, psi22, psi12) = match scenario.noise {
        NoiseSpec::None => (0.0, 0.0, 0.0),
        NoiseSpec::GaussianIid { omega_x, omega_y } => {
            (omega_x * omega_x, omega_y * omega_y, 0.0)
        }
        NoiseSpec::Rounding { gamma_x, gamma_y } => {
            (gamma_x * gamma_x / 6.0, gamma_y * gamma_y / 6.0, 0.0)
        }
    };
    let ic_xy = d.rho * d.sigma_x * d.sigma_y;
    let endogenous = d.phi_x != 0.0 || d.phi_y != 0.0;

    let inputs_at = |gf: crate::avar::GfValues| AvarInputs {
        ic_x: d.sigma_x * d.sigma_x,
        ic_y: d.sigma_y * d.sigma_y,
        ic_xy,
        psi11,
        psi22,
        psi12,
        chi: gf.chi,
        z_x: d.phi_x * d.phi_x * d.sigma_x * d.sigma_x,
        z_y: d.phi_y * d.phi_y * d.sigma_y * d.sigma_y,
        z_xy: d.phi_x * d.phi_y * ic_xy,
        zx_y: d.phi_x * ic_xy,
        x_zy: d.phi_y * ic_xy,
        g: gf.g,
        f1: gf.f1,
        f2: gf.f2,
        f12: gf.f12,
        theta: theta_eff,
        constants,
    };

    let segments = match scenario.sampling {
        SamplingSpec::Poisson { p1, p2, .. } => {
            let gf = gf_poisson_changepoint(p1, p1, p2, p2, f64::INFINITY, f64::INFINITY, 0.0);
            vec![AvarSegment {
                start: 0.0,
                end: horizon,
                inputs: inputs_at(gf),
            }]
        }
        SamplingSpec::PoissonChangepoint {
            p1,
            p2,
            p1_bar,
            p2_bar,
            tau1,
            tau2,
            ..
        } => {
            let mut cuts = vec![0.0];
            for tau in [tau1.min(tau2), tau1.max(tau2)] {
                if tau > 0.0 && tau < horizon && !cuts.contains(&tau) {
                    cuts.push(tau);
                }
            }
            cuts.push(horizon);
            cuts.windows(2)
                .map(|w| AvarSegment {
                    start: w[0],
                    end: w[1],
                    inputs: inputs_at(gf_poisson_changepoint(
                        p1, p1_bar, p2, p2_bar, tau1, tau2, w[0],
                    )),
                })
                .collect()
        }
        SamplingSpec::Regular { .. } => {
            return Err(HarnessError::BadConfig(
                "clt_coverage needs a Poisson sampling scheme (G/F limits are implemented for Poisson designs)".into(),
            ))
        }
    };
    Ok((segments, endogenous))
}

fn coverage(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
) -> Result<Vec<RepOutcome>, HarnessError> {
    let constants = scheme.kernel_constants()?;
    // Fail early on schemes without G/F limits.
    avar_segments(&config.scenario, 1.0, constants, config.estimator.horizon_t)?;
    let n_scale = config.scenario.sampling.n_scale();
    let b_n = 1.0 / n_scale as f64;
    let truth = true_ic(&config.scenario.diffusion, config.estimator.horizon_t);

    let outcomes = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(config.master_seed, rep);
            let scenario = config.scenario.with_seed(seed);
            let result = (|| -> Result<BTreeMap<String, f64>, String> {
                let (report, _) = estimate_replication(&scenario, &config.estimator, scheme)?;
                let theta_eff = report.k_n as f64 * b_n.sqrt();
                let (segments, endo) =
                    avar_segments(&scenario, theta_eff, constants, config.estimator.horizon_t)
                        .map_err(|e| e.to_string())?;
                let v_t = integrated_variance(&segments, config.estimator.horizon_t, endo)
                    .map_err(|e| e.to_string())?;
                let (lo, hi) = oracle_ci(report.estimate, v_t, b_n, COVERAGE_LEVEL)
                    .map_err(|e| e.to_string())?;
                let covered = (lo <= truth && truth <= hi) as u8;
                let mut values = BTreeMap::new();
                values.insert("estimate".into(), report.estimate);
                values.insert("k_n".into(), report.k_n as f64);
                values.insert("v_t".into(), v_t);
                values.insert("ci_lo".into(), lo);
                values.insert("ci_hi".into(), hi);
                values.insert("covered".into(), covered as f64);
                Ok(values)
            })();
            outcome(rep, n_scale, seed, result)
        })
        .collect();
    Ok(outcomes)
}

// --- Epps effect -------------------------------------------------------------

fn epps(config: &ExperimentConfig, scheme: &WeightScheme) -> Result<Vec<RepOutcome>, HarnessError> {
    let n_scale = config.scenario.sampling.n_scale();
    let horizon = config.estimator.horizon_t;
    let steps: Vec<f64> = EPPS_STEP_FACTORS
        .iter()
        .map(|f| f / n_scale as f64)
        .collect();
    if steps.iter().any(|&s| s >= horizon) {
        return Err(HarnessError::BadConfig(format!(
            "epps grid ladder {steps:?} does not fit inside the horizon {horizon}"
        )));
    }
    let outcomes = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(config.master_seed, rep);
            let scenario = config.scenario.with_seed(seed);
            let result = (|| -> Result<BTreeMap<String, f64>, String> {
                let (report, sim) = estimate_replication(&scenario, &config.estimator, scheme)?;
                let mut values = BTreeMap::new();
                values.insert("phy".into(), report.estimate);
                for (i, &step) in steps.iter().enumerate() {
                    let rc = previous_tick_rc(&sim.x, &sim.y, step, horizon)
                        .map_err(|e| e.to_string())?;
                    values.insert(format!("rc_{i}"), rc);
                }
                Ok(values)
            })();
            outcome(rep, n_scale, seed, result)
        })
        .collect();
    Ok(outcomes)
}

// --- kernel lemma --------------------------------------------------------------

/// `c_{α,β}(p,q)` over the whole comparison band, using the contiguous
/// row structure of the overlap matrix and prefix sums of `β`; equals
/// `discrete_c` up to summation order.
fn kernel_max_deviation(
    overlap: &OverlapOracle,
    g_arr: &[f64],
    g_prefix: &[f64],
    psi_by_offset: &[f64],
    k_n: usize,
) -> f64 {
    let n_rows = overlap.n_rows();
    let n_cols = overlap.n_cols();
    let norm = (k_n * k_n) as f64;
    let mut max_dev: f64 = 0.0;
    for p in k_n..n_rows {
        let q_lo = p.saturating_sub(2 * k_n).max(k_n);
        let q_hi = (p + 2 * k_n).min(n_cols - 1);
        for q in q_lo..=q_hi {
            let mut acc = 0.0;
            for i in (p + 1 - k_n)..=p {
                let a = g_arr[p - i];
                if a == 0.0 {
                    continue;
                }
                if let Some((row_lo, row_hi)) = overlap.row_range(i) {
                    let j_lo = row_lo.max(q + 1 - k_n).max(1);
                    let j_hi = row_hi.min(q);
                    if j_lo <= j_hi {
                        // Σ_{j=j_lo..j_hi} β((q-j)/k_n) over r = q-j.
                        acc += a * (g_prefix[q - j_lo + 1] - g_prefix[q - j_hi]);
                    }
                }
            }
            let c = acc / norm;
            let psi = psi_by_offset[q + 2 * k_n - p];
            max_dev = max_dev.max((c - psi).abs());
        }
    }
    max_dev
}

fn kernel_lemma(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
) -> Result<Vec<RepOutcome>, HarnessError> {
    let (p1, p2, horizon) = match config.scenario.sampling {
        SamplingSpec::Poisson { p1, p2, horizon, .. } => (p1, p2, horizon),
        _ => {
            return Err(HarnessError::BadConfig(
                "kernel_lemma needs a plain Poisson sampling scheme".into(),
            ))
        }
    };
    let mut jobs = Vec::new();
    for &k_n in &config.kn_grid {
        for rep in 0..config.replications as u64 {
            jobs.push((k_n, rep));
        }
    }
    // ψ_{g,g} at the offsets (q-p)/k_n, shared across replications.
    let mut psi_tables: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &k_n in &config.kn_grid {
        let table = (-(2 * k_n as i64)..=2 * k_n as i64)
            .map(|r| scheme.psi_kernel(WeightFn::G, WeightFn::G, r as f64 / k_n as f64))
            .collect();
        psi_tables.insert(k_n, table);
    }

    let outcomes = jobs
        .par_iter()
        .map(|&(k_n, rep)| {
            let seed = replication_seed(config.master_seed, rep);
            let n_scale = kernel_lemma_n_scale(k_n);
            let result = (|| -> Result<BTreeMap<String, f64>, String> {
                let sampling = SamplingSpec::Poisson {
                    n_scale,
                    p1,
                    p2,
                    horizon,
                };
                let (s, t) =
                    crate::simulate::sample_times(&sampling, seed).map_err(|e| e.to_string())?;
                let sync = interpolate(&s, &t);
                let overlap = overlap_matrix(&sync, k_n, true).map_err(|e| e.to_string())?;
                let (g_arr, _) = scheme.discrete_coeffs(k_n).map_err(|e| e.to_string())?;
                let mut g_prefix = vec![0.0; k_n + 1];
                for r in 0..k_n {
                    g_prefix[r + 1] = g_prefix[r] + g_arr[r];
                }
                let dev = kernel_max_deviation(
                    &overlap,
                    &g_arr,
                    &g_prefix,
                    &psi_tables[&k_n],
                    k_n,
                );
                let mut values = BTreeMap::new();
                values.insert("k_n".into(), k_n as f64);
                values.insert("max_dev".into(), dev);
                Ok(values)
            })();
            outcome(rep, n_scale, seed, result)
        })
        .collect();
    Ok(outcomes)
}

// --- single run ----------------------------------------------------------------

fn single_run(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
) -> Result<Vec<RepOutcome>, HarnessError> {
    let mut values = BTreeMap::new();
    let seed = config.scenario.seed;
    match (&config.ticks_x, &config.ticks_y) {
        (Some(px), Some(py)) => {
            let x = read_ticks_csv(px)?;
            let y = read_ticks_csv(py)?;
            let report = modified_phy(&x, &y, scheme, &config.estimator)?;
            values.insert("estimate".into(), report.estimate);
            values.insert("k_n".into(), report.k_n as f64);
            values.insert("n_refresh".into(), report.n_refresh as f64);
            values.insert("psi_used".into(), report.psi_used);
            values.insert("hy_baseline".into(), hayashi_yoshida(&x, &y)?);
        }
        (None, None) => {
            let sim = generate(&config.scenario)?;
            let report = modified_phy(&sim.x, &sim.y, scheme, &config.estimator)?;
            let truth = true_ic(&config.scenario.diffusion, config.estimator.horizon_t);
            values.insert("estimate".into(), report.estimate);
            values.insert("k_n".into(), report.k_n as f64);
            values.insert("n_refresh".into(), report.n_refresh as f64);
            values.insert("psi_used".into(), report.psi_used);
            values.insert("hy_baseline".into(), hayashi_yoshida(&sim.x, &sim.y)?);
            values.insert("true_ic".into(), truth);
            values.insert("error_vs_truth".into(), report.estimate - truth);
            std::fs::create_dir_all(&config.output_dir)?;
            write_ticks_csv(&config.output_dir.join("x_ticks.csv"), &sim.x)?;
            write_ticks_csv(&config.output_dir.join("y_ticks.csv"), &sim.y)?;
        }
        _ => {
            return Err(HarnessError::BadConfig(
                "single_run needs either both tick files or neither".into(),
            ))
        }
    }
    Ok(vec![RepOutcome {
        rep: 0,
        n_scale: config.scenario.sampling.n_scale(),
        seed,
        values,
        error: None,
    }])
}

// --- summaries -------------------------------------------------------------------

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub(super) fn summarize(
    config: &ExperimentConfig,
    reps: &[RepOutcome],
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let truth = true_ic(&config.scenario.diffusion, config.estimator.horizon_t);
    match config.experiment {
        ExperimentKind::Consistency | ExperimentKind::Rate => {
            out.insert("true_ic".into(), truth);
            let mut rmses = Vec::new();
            let mut ns = Vec::new();
            for &n in &config.n_grid {
                let estimates: Vec<f64> = reps
                    .iter()
                    .filter(|r| r.n_scale == n && r.error.is_none())
                    .map(|r| r.values["estimate"])
                    .collect();
                let failures = reps
                    .iter()
                    .filter(|r| r.n_scale == n && r.error.is_some())
                    .count();
                out.insert(format!("count_n{n}"), estimates.len() as f64);
                out.insert(format!("failures_n{n}"), failures as f64);
                if estimates.is_empty() {
                    continue;
                }
                let mean = mean_of(&estimates);
                let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>()
                    / estimates.len() as f64)
                    .sqrt();
                let sd = if estimates.len() > 1 {
                    (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                        / (estimates.len() - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                out.insert(format!("mean_n{n}"), mean);
                out.insert(format!("bias_n{n}"), mean - truth);
                out.insert(format!("rmse_n{n}"), rmse);
                out.insert(
                    format!("mc_se_n{n}"),
                    sd / (estimates.len() as f64).sqrt(),
                );
                rmses.push(rmse);
                ns.push(n as f64);
            }
            if config.experiment == ExperimentKind::Rate && rmses.len() >= 2 {
                let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
                let log_rmse: Vec<f64> = rmses.iter().map(|r| r.ln()).collect();
                out.insert("slope".into(), regression_slope(&log_n, &log_rmse));
            }
        }
        ExperimentKind::CltCoverage => {
            out.insert("true_ic".into(), truth);
            let ok: Vec<&RepOutcome> = reps.iter().filter(|r| r.error.is_none()).collect();
            out.insert("valid".into(), ok.len() as f64);
            out.insert("failures".into(), (reps.len() - ok.len()) as f64);
            if !ok.is_empty() {
                let covered: f64 = ok.iter().map(|r| r.values["covered"]).sum();
                out.insert("coverage".into(), covered / ok.len() as f64);
                out.insert(
                    "mean_estimate".into(),
                    mean_of(&ok.iter().map(|r| r.values["estimate"]).collect::<Vec<_>>()),
                );
                out.insert(
                    "mean_v_t".into(),
                    mean_of(&ok.iter().map(|r| r.values["v_t"]).collect::<Vec<_>>()),
                );
            }
        }
        ExperimentKind::Epps => {
            out.insert("true_ic".into(), truth);
            let ok: Vec<&RepOutcome> = reps.iter().filter(|r| r.error.is_none()).collect();
            out.insert("valid".into(), ok.len() as f64);
            out.insert("failures".into(), (reps.len() - ok.len()) as f64);
            if !ok.is_empty() {
                out.insert(
                    "mean_phy".into(),
                    mean_of(&ok.iter().map(|r| r.values["phy"]).collect::<Vec<_>>()),
                );
                let n_scale = config.scenario.sampling.n_scale() as f64;
                for (i, factor) in EPPS_STEP_FACTORS.iter().enumerate() {
                    let key = format!("rc_{i}");
                    let vals: Vec<f64> = ok.iter().map(|r| r.values[&key]).collect();
                    out.insert(format!("mean_rc_{i}"), mean_of(&vals));
                    out.insert(format!("grid_step_{i}"), factor / n_scale);
                }
            }
        }
        ExperimentKind::KernelLemma => {
            for &k_n in &config.kn_grid {
                let devs: Vec<f64> = reps
                    .iter()
                    .filter(|r| r.error.is_none() && r.values.get("k_n") == Some(&(k_n as f64)))
                    .map(|r| r.values["max_dev"])
                    .collect();
                out.insert(format!("count_kn{k_n}"), devs.len() as f64);
                if !devs.is_empty() {
                    out.insert(format!("median_max_dev_kn{k_n}"), median_of(&devs));
                }
            }
        }
        ExperimentKind::SingleRun => {
            if let Some(rep) = reps.first() {
                for (key, value) in &rep.values {
                    out.insert(key.clone(), *value);
                }
            }
        }
    }
    out
}

// --- self-test checks -----------------------------------------------------------

pub(super) fn evaluate_checks(
    config: &ExperimentConfig,
    summary: &BTreeMap<String, f64>,
) -> Vec<Check> {
    let mut checks = Vec::new();
    match config.experiment {
        ExperimentKind::Consistency => {
            for &n in &config.n_grid {
                let (Some(mean), Some(se)) = (
                    summary.get(&format!("mean_n{n}")),
                    summary.get(&format!("mc_se_n{n}")),
                ) else {
                    continue;
                };
                let z = (mean - summary["true_ic"]).abs() / se;
                checks.push(Check {
                    name: format!("mean_within_3se_n{n}"),
                    passed: z <= 3.0,
                    value: z,
                    threshold: "|mean - true_ic| / mc_se <= 3".into(),
                });
            }
            let rmses: Vec<f64> = config
                .n_grid
                .iter()
                .filter_map(|n| summary.get(&format!("rmse_n{n}")).copied())
                .collect();
            if rmses.len() >= 2 {
                let min_drop = rmses
                    .windows(2)
                    .map(|w| w[0] - w[1])
                    .fold(f64::INFINITY, f64::min);
                checks.push(Check {
                    name: "rmse_strictly_decreasing".into(),
                    passed: min_drop > 0.0,
                    value: min_drop,
                    threshold: "every consecutive RMSE drop > 0".into(),
                });
            }
        }
        ExperimentKind::Rate => {
            if let Some(&slope) = summary.get("slope") {
                checks.push(Check {
                    name: "rate_slope_in_range".into(),
                    passed: (-0.35..=-0.15).contains(&slope),
                    value: slope,
                    threshold: "slope in [-0.35, -0.15]".into(),
                });
            }
        }
        ExperimentKind::CltCoverage => {
            if let Some(&coverage) = summary.get("coverage") {
                checks.push(Check {
                    name: "coverage_in_range".into(),
                    passed: (0.91..=0.98).contains(&coverage),
                    value: coverage,
                    threshold: "95% CI coverage in [0.91, 0.98]".into(),
                });
            }
        }
        ExperimentKind::Epps => {
            let truth = summary["true_ic"];
            let finest = EPPS_STEP_FACTORS.len() - 1;
            if let Some(&rc) = summary.get(&format!("mean_rc_{finest}")) {
                checks.push(Check {
                    name: "previous_tick_attenuated".into(),
                    passed: rc < 0.6 * truth,
                    value: rc / truth,
                    threshold: "mean previous-tick RC < 0.6 true_ic at the finest grid".into(),
                });
            }
            if let Some(&phy) = summary.get("mean_phy") {
                let rel = (phy - truth).abs() / truth.abs();
                checks.push(Check {
                    name: "phy_within_15pct".into(),
                    passed: rel <= 0.15,
                    value: rel,
                    threshold: "|mean_phy - true_ic| <= 0.15 |true_ic|".into(),
                });
            }
        }
        ExperimentKind::KernelLemma => {
            let medians: Vec<f64> = config
                .kn_grid
                .iter()
                .filter_map(|k| summary.get(&format!("median_max_dev_kn{k}")).copied())
                .collect();
            if medians.len() >= 2 {
                let min_drop = medians
                    .windows(2)
                    .map(|w| w[0] - w[1])
                    .fold(f64::INFINITY, f64::min);
                checks.push(Check {
                    name: "kernel_deviation_decreasing".into(),
                    passed: min_drop > 0.0,
                    value: min_drop,
                    threshold: "median max deviation strictly decreases along kn_grid".into(),
                });
            }
        }
        ExperimentKind::SingleRun => {}
    }
    checks
}
