//! Scenario simulation with full knowledge of ground truth.
//!
//! A scenario couples a constant-coefficient bivariate diffusion, a
//! sampling scheme indexed by `n_scale`, and a noise channel. Everything
//! is a pure function of the scenario and its 64-bit seed: the seed is
//! split into independent `paths` / `times` / `noise` streams, so changing
//! the noise mode never perturbs the latent path draws.
//!
//! Latent model on `[0, horizon]`:
//!
//! `X_t = μ_x t + σ_x W¹_t`,  `Y_t = μ_y t + σ_y (ρ W¹_t + √(1-ρ²) W²_t)`
//!
//! simulated by exact Gaussian increments on a fine grid. Observations at
//! the sample times add the endogenous error
//! `b_n^{-1/2} φ (X_{S^i} - X_{S^{i-1}})` with `b_n = 1/n_scale`, then the
//! exogenous channel: i.i.d. Gaussian noise, or grid rounding
//! `𝖷 = γ ⌈(X + u)/γ⌋` with `u` uniform on `[-γ/2, γ/2]`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preavg::{PreavgError, TickSeries};
use crate::sync::SamplingDesign;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("volatilities must be positive and finite (sigma_x={0}, sigma_y={1})")]
    BadSigma(f64, f64),
    #[error("correlation must be in [-1, 1], got {0}")]
    BadRho(f64),
    #[error("noise std deviations must be nonnegative (omega_x={0}, omega_y={1})")]
    BadOmega(f64, f64),
    #[error("rounding grids must be positive (gamma_x={0}, gamma_y={1})")]
    BadGamma(f64, f64),
    #[error("sampling rates must be positive and finite")]
    BadRate,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("n_scale must be positive")]
    BadNScale,
    #[error("change point must lie in [0, horizon], got tau={tau} with horizon={horizon}")]
    BadTau { tau: f64, horizon: f64 },
    #[error("regular offset must lie in [0, horizon), got {0}")]
    BadOffset(f64),
    #[error("fine_steps = {got} is below 10x the expected tick count ({need}); raise it or use 0 for automatic choice")]
    FineStepsTooSmall { got: usize, need: usize },
    #[error("design {which} produced no arrivals on (0, {horizon}]; increase n_scale, the rate, or the horizon")]
    EmptyDesign { which: &'static str, horizon: f64 },
    #[error(transparent)]
    Tick(#[from] PreavgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("tick CSV parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Constant-coefficient latent diffusion pair with endogenous-noise
/// loadings `Z^X = φ_x X`, `Z^Y = φ_y Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    #[serde(default)]
    pub mu_x: f64,
    #[serde(default)]
    pub mu_y: f64,
    #[serde(default)]
    pub phi_x: f64,
    #[serde(default)]
    pub phi_y: f64,
}

impl DiffusionSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite())
            || !(self.sigma_y > 0.0 && self.sigma_y.is_finite())
        {
            return Err(SimError::BadSigma(self.sigma_x, self.sigma_y));
        }
        if self.rho.is_nan() || self.rho.abs() > 1.0 {
            return Err(SimError::BadRho(self.rho));
        }
        Ok(())
    }
}

/// Exogenous observation-noise channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    GaussianIid { omega_x: f64, omega_y: f64 },
    Rounding { gamma_x: f64, gamma_y: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::GaussianIid { omega_x, omega_y } => {
                if omega_x >= 0.0 && omega_y >= 0.0 && omega_x.is_finite() && omega_y.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::BadOmega(omega_x, omega_y))
                }
            }
            NoiseSpec::Rounding { gamma_x, gamma_y } => {
                if gamma_x > 0.0 && gamma_y > 0.0 && gamma_x.is_finite() && gamma_y.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::BadGamma(gamma_x, gamma_y))
                }
            }
        }
    }
}

/// Sampling scheme. Arrival rates are `n_scale · p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingSpec {
    /// Equispaced grids of step `1/(n_scale·p)`, the T grid shifted by
    /// `offset`.
    Regular {
        n_scale: u64,
        p1: f64,
        p2: f64,
        #[serde(default)]
        offset: f64,
        horizon: f64,
    },
    /// Independent homogeneous Poisson designs.
    Poisson {
        n_scale: u64,
        p1: f64,
        p2: f64,
        horizon: f64,
    },
    /// Poisson designs whose rate switches from `n·p` to `n·p_bar` at the
    /// (deterministic) change point `tau`, independently per asset.
    PoissonChangepoint {
        n_scale: u64,
        p1: f64,
        p2: f64,
        p1_bar: f64,
        p2_bar: f64,
        tau1: f64,
        tau2: f64,
        horizon: f64,
    },
}

impl SamplingSpec {
    pub fn n_scale(&self) -> u64 {
        match *self {
            SamplingSpec::Regular { n_scale, .. }
            | SamplingSpec::Poisson { n_scale, .. }
            | SamplingSpec::PoissonChangepoint { n_scale, .. } => n_scale,
        }
    }

    pub fn with_n_scale(&self, n: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SamplingSpec::Regular { n_scale, .. }
            | SamplingSpec::Poisson { n_scale, .. }
            | SamplingSpec::PoissonChangepoint { n_scale, .. } => *n_scale = n,
        }
        out
    }

    pub fn horizon(&self) -> f64 {
        match *self {
            SamplingSpec::Regular { horizon, .. }
            | SamplingSpec::Poisson { horizon, .. }
            | SamplingSpec::PoissonChangepoint { horizon, .. } => horizon,
        }
    }

    /// Expected number of ticks of the busier design.
    pub fn expected_max_ticks(&self) -> f64 {
        let n = self.n_scale() as f64;
        match *self {
            SamplingSpec::Regular { p1, p2, horizon, .. }
            | SamplingSpec::Poisson { p1, p2, horizon, .. } => n * p1.max(p2) * horizon,
            SamplingSpec::PoissonChangepoint {
                p1,
                p2,
                p1_bar,
                p2_bar,
                horizon,
                ..
            } => n * p1.max(p2).max(p1_bar).max(p2_bar) * horizon,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let horizon = self.horizon();
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SimError::BadHorizon(horizon));
        }
        if self.n_scale() == 0 {
            return Err(SimError::BadNScale);
        }
        let pos = |p: f64| p > 0.0 && p.is_finite();
        match *self {
            SamplingSpec::Regular { p1, p2, offset, .. } => {
                if !pos(p1) || !pos(p2) {
                    return Err(SimError::BadRate);
                }
                if !(0.0..horizon).contains(&offset) {
                    return Err(SimError::BadOffset(offset));
                }
            }
            SamplingSpec::Poisson { p1, p2, .. } => {
                if !pos(p1) || !pos(p2) {
                    return Err(SimError::BadRate);
                }
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
                if !pos(p1) || !pos(p2) || !pos(p1_bar) || !pos(p2_bar) {
                    return Err(SimError::BadRate);
                }
                for tau in [tau1, tau2] {
                    if !(0.0..=horizon).contains(&tau) {
                        return Err(SimError::BadTau { tau, horizon });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Full description of one simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub diffusion: DiffusionSpec,
    pub noise: NoiseSpec,
    pub sampling: SamplingSpec,
    pub seed: u64,
    /// Latent Euler grid resolution; 0 picks 50x the expected tick count.
    #[serde(default)]
    pub fine_steps: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.diffusion.validate()?;
        self.noise.validate()?;
        self.sampling.validate()?;
        if self.fine_steps != 0 {
            let need = (10.0 * self.sampling.expected_max_ticks()).ceil() as usize;
            if self.fine_steps < need {
                return Err(SimError::FineStepsTooSmall {
                    got: self.fine_steps,
                    need,
                });
            }
        }
        Ok(())
    }

    /// Grid resolution actually used: the explicit value, or 50x the
    /// expected tick count (minimum 1000).
    pub fn fine_steps_resolved(&self) -> usize {
        if self.fine_steps != 0 {
            self.fine_steps
        } else {
            ((50.0 * self.sampling.expected_max_ticks()).ceil() as usize).max(1000)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Loads and validates a scenario JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self, SimError> {
        let spec: ScenarioSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<(), SimError> {
        Ok(fs::write(path, serde_json::to_string_pretty(self)?)?)
    }
}

// --- seed splitting ------------------------------------------------------

const CHANNEL_PATHS: u64 = 1;
const CHANNEL_TIMES: u64 = 2;
const CHANNEL_NOISE: u64 = 3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scenario seed of replication `rep` under a master seed:
/// `splitmix64(master ⊕ rep·0x9E3779B97F4A7C15)`.
pub fn replication_seed(master_seed: u64, rep: u64) -> u64 {
    let mut s = master_seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut s)
}

/// Channel stream `channel ∈ {paths, times, noise}` of a scenario seed: the
/// ChaCha12 key is four splitmix64 outputs seeded by
/// `seed ⊕ channel·0xD1B54A32D192ED03`.
fn channel_rng(seed: u64, channel: u64) -> ChaCha12Rng {
    let mut s = seed ^ channel.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

// --- latent paths ---------------------------------------------------------

/// Correlated latent paths on the fine grid `k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct LatentPaths {
    pub dt: f64,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LatentPaths {
    /// Latent values at the fine-grid point nearest to `t`.
    pub fn value_at(&self, t: f64) -> (f64, f64) {
        let idx = ((t / self.dt).round() as usize).min(self.x.len() - 1);
        (self.x[idx], self.y[idx])
    }
}

/// Simulates the latent pair by exact Gaussian increments (the model has
/// constant coefficients, so there is no discretization bias in the
/// increments themselves).
pub fn simulate_latent(spec: &ScenarioSpec) -> LatentPaths {
    let d = &spec.diffusion;
    let steps = spec.fine_steps_resolved();
    let horizon = spec.sampling.horizon();
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let cross = (1.0 - d.rho * d.rho).sqrt();

    let mut rng = channel_rng(spec.seed, CHANNEL_PATHS);
    let mut x = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let (mut xv, mut yv) = (0.0, 0.0);
    x.push(xv);
    y.push(yv);
    for _ in 0..steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let dw1 = sqrt_dt * z1;
        let dw2 = sqrt_dt * z2;
        xv += d.mu_x * dt + d.sigma_x * dw1;
        yv += d.mu_y * dt + d.sigma_y * (d.rho * dw1 + cross * dw2);
        x.push(xv);
        y.push(yv);
    }
    LatentPaths { dt, horizon, x, y }
}

// --- sampling designs -----------------------------------------------------

/// Draws the two sampling designs of the scenario. A time-0 tick is
/// prepended to both designs.
pub fn sample_times(
    sampling: &SamplingSpec,
    seed: u64,
) -> Result<(SamplingDesign, SamplingDesign), SimError> {
    sampling.validate()?;
    let mut rng = channel_rng(seed, CHANNEL_TIMES);
    let n = sampling.n_scale() as f64;
    let horizon = sampling.horizon();

    let build = |times: Vec<f64>, which: &'static str| -> Result<SamplingDesign, SimError> {
        let mut all = Vec::with_capacity(times.len() + 1);
        if times.first().is_none_or(|&t| t > 0.0) {
            all.push(0.0);
        }
        all.extend(times);
        if all.len() < 2 {
            return Err(SimError::EmptyDesign { which, horizon });
        }
        Ok(SamplingDesign::new(all).expect("generated times are strictly increasing"))
    };

    match *sampling {
        SamplingSpec::Regular {
            p1, p2, offset, ..
        } => {
            let grid = |step: f64, shift: f64| {
                let mut out = Vec::new();
                let mut k = 0u64;
                loop {
                    let t = shift + k as f64 * step;
                    if t > horizon {
                        break;
                    }
                    if t > 0.0 {
                        out.push(t);
                    }
                    k += 1;
                }
                out
            };
            let s = build(grid(1.0 / (n * p1), 0.0), "S")?;
            let t = build(grid(1.0 / (n * p2), offset), "T")?;
            Ok((s, t))
        }
        SamplingSpec::Poisson { p1, p2, .. } => {
            let s = build(poisson_arrivals(&mut rng, n * p1, horizon), "S")?;
            let t = build(poisson_arrivals(&mut rng, n * p2, horizon), "T")?;
            Ok((s, t))
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
            let s = build(
                changepoint_arrivals(&mut rng, n * p1, n * p1_bar, tau1, horizon),
                "S",
            )?;
            let t = build(
                changepoint_arrivals(&mut rng, n * p2, n * p2_bar, tau2, horizon),
                "T",
            )?;
            Ok((s, t))
        }
    }
}

fn exponential(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    // 1 - U ∈ (0, 1] avoids ln(0).
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn poisson_arrivals(rng: &mut ChaCha12Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity((rate * horizon * 1.2) as usize + 8);
    let mut t = 0.0;
    loop {
        t += exponential(rng, rate);
        if t > horizon {
            break;
        }
        out.push(t);
    }
    out
}

/// Arrivals of the pre-change process strictly before `tau`, then the
/// arrivals of an independent post-change process started at `tau`.
fn changepoint_arrivals(
    rng: &mut ChaCha12Rng,
    rate_lo: f64,
    rate_hi: f64,
    tau: f64,
    horizon: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += exponential(rng, rate_lo);
        if t >= tau || t > horizon {
            break;
        }
        out.push(t);
    }
    let mut u = tau;
    loop {
        u += exponential(rng, rate_hi);
        if u > horizon {
            break;
        }
        out.push(u);
    }
    out
}

// --- observation ----------------------------------------------------------

/// `γ ⌈(value + u)/γ⌋` with `⌈x⌋` the nearest-integer rounding of the
/// round-off model (`a - 1/2 ≤ x < a + 1/2`).
pub fn round_to_grid(value: f64, gamma: f64, u: f64) -> f64 {
    gamma * ((value + u) / gamma + 0.5).floor()
}

/// Observes the latent paths at the sampled times.
///
/// The endogenous term uses the latent increment between consecutive
/// sample times scaled by `b_n^{-1/2} = √n_scale`; the first tick uses the
/// latent value at time 0 as its predecessor. The rounding channel is
/// applied to the endogenous-contaminated value, so rounded outputs always
/// lie on the grid.
pub fn observe(
    latent: &LatentPaths,
    s: &SamplingDesign,
    t: &SamplingDesign,
    spec: &ScenarioSpec,
) -> (TickSeries, TickSeries) {
    let mut rng = channel_rng(spec.seed, CHANNEL_NOISE);
    let sqrt_n = (spec.sampling.n_scale() as f64).sqrt();

    let mut observe_one = |design: &SamplingDesign, pick_x: bool| -> TickSeries {
        let phi = if pick_x {
            spec.diffusion.phi_x
        } else {
            spec.diffusion.phi_y
        };
        let mut prev = if pick_x { latent.x[0] } else { latent.y[0] };
        let mut values = Vec::with_capacity(design.len());
        for &time in design.times() {
            let (lx, ly) = latent.value_at(time);
            let lv = if pick_x { lx } else { ly };
            let endo = sqrt_n * phi * (lv - prev);
            prev = lv;
            let base = lv + endo;
            let value = match spec.noise {
                NoiseSpec::None => base,
                NoiseSpec::GaussianIid { omega_x, omega_y } => {
                    let omega = if pick_x { omega_x } else { omega_y };
                    let z: f64 = rng.sample(StandardNormal);
                    base + omega * z
                }
                NoiseSpec::Rounding { gamma_x, gamma_y } => {
                    let gamma = if pick_x { gamma_x } else { gamma_y };
                    let u = gamma * (rng.random::<f64>() - 0.5);
                    round_to_grid(base, gamma, u)
                }
            };
            values.push(value);
        }
        TickSeries::new(design.times().to_vec(), values).expect("design times are valid stamps")
    };

    let x = observe_one(s, true);
    let y = observe_one(t, false);
    (x, y)
}

/// `[X,Y]_t = ρ σ_x σ_y t` in the constant-coefficient model.
pub fn true_ic(diffusion: &DiffusionSpec, t: f64) -> f64 {
    diffusion.rho * diffusion.sigma_x * diffusion.sigma_y * t
}

/// One fully simulated scenario replication.
#[derive(Debug, Clone)]
pub struct SimulatedScenario {
    pub x: TickSeries,
    pub y: TickSeries,
    pub s: SamplingDesign,
    pub t: SamplingDesign,
    pub latent: LatentPaths,
}

/// Full pipeline: latent paths, sampling designs, observation.
pub fn generate(spec: &ScenarioSpec) -> Result<SimulatedScenario, SimError> {
    spec.validate()?;
    let latent = simulate_latent(spec);
    let (s, t) = sample_times(&spec.sampling, spec.seed)?;
    let (x, y) = observe(&latent, &s, &t, spec);
    Ok(SimulatedScenario { x, y, s, t, latent })
}

// --- tick CSV I/O ----------------------------------------------------------

/// Writes `time,value` rows with 17 significant digits.
pub fn write_ticks_csv(path: &Path, series: &TickSeries) -> Result<(), SimError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "time,value")?;
    for (t, v) in series.times().iter().zip(series.values()) {
        writeln!(w, "{t:.16e},{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ticks_csv(path: &Path) -> Result<TickSeries, SimError> {
    let content = fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "time,value" {
                return Err(SimError::Parse {
                    line: 1,
                    msg: format!("expected header 'time,value', got '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |field: Option<&str>, what: &str| -> Result<f64, SimError> {
            field
                .ok_or_else(|| SimError::Parse {
                    line: lineno + 1,
                    msg: format!("missing {what}"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| SimError::Parse {
                    line: lineno + 1,
                    msg: format!("bad {what}: {e}"),
                })
        };
        times.push(parse(parts.next(), "time")?);
        values.push(parse(parts.next(), "value")?);
    }
    Ok(TickSeries::new(times, values)?)
}
