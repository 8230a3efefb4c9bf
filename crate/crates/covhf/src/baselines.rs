//! Baseline covariance estimators: the classical Hayashi-Yoshida sum and
//! the previous-tick realized covariance, used for comparison runs and the
//! Epps-effect demonstration.

use thiserror::Error;

use crate::preavg::TickSeries;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BaselineError {
    #[error("series needs at least 2 ticks, got {0}")]
    TooFewTicks(usize),
    #[error("grid_step must be positive and smaller than the horizon (step {step}, horizon {horizon})")]
    BadGrid { step: f64, horizon: f64 },
    #[error("grid spans fewer than two usable points over the data")]
    GridTooCoarse,
}

/// Classical Hayashi-Yoshida estimator:
///
/// `Σ_{i,j} (X_{S^i} - X_{S^{i-1}})(Y_{T^j} - Y_{T^{j-1}}) 1{(S^{i-1},S^i] ∩ (T^{j-1},T^j] ≠ ∅}`.
///
/// Coincides with the realized covariance when the designs are
/// synchronous, and needs no synchronization otherwise.
pub fn hayashi_yoshida(x: &TickSeries, y: &TickSeries) -> Result<f64, BaselineError> {
    if x.len() < 2 {
        return Err(BaselineError::TooFewTicks(x.len()));
    }
    if y.len() < 2 {
        return Err(BaselineError::TooFewTicks(y.len()));
    }
    let s = x.times();
    let t = y.times();
    let xv = x.values();
    let yv = y.values();

    // (a, b] ∩ (c, d] ≠ ∅ ⟺ c < b ∧ a < d; intervals i = 1..len-1.
    let mut total = 0.0;
    let mut j_lo = 1usize;
    let mut j_hi_excl = 1usize;
    for i in 1..s.len() {
        let dx = xv[i] - xv[i - 1];
        while j_lo < t.len() && t[j_lo] <= s[i - 1] {
            j_lo += 1;
        }
        while j_hi_excl < t.len() && t[j_hi_excl - 1] < s[i] {
            j_hi_excl += 1;
        }
        for j in j_lo..j_hi_excl {
            total += dx * (yv[j] - yv[j - 1]);
        }
    }
    Ok(total)
}

/// Previous-tick realized covariance on a fixed grid of step `grid_step`
/// over `[0, horizon]`.
///
/// Both series are sampled at `k · grid_step` by last-tick carry-forward;
/// grid points before a series' first tick have no value to carry and are
/// dropped, so the sum starts at the first grid point where both series
/// are defined.
pub fn previous_tick_rc(
    x: &TickSeries,
    y: &TickSeries,
    grid_step: f64,
    horizon: f64,
) -> Result<f64, BaselineError> {
    if !(grid_step > 0.0 && grid_step < horizon && grid_step.is_finite() && horizon.is_finite()) {
        return Err(BaselineError::BadGrid {
            step: grid_step,
            horizon,
        });
    }
    if x.len() < 2 {
        return Err(BaselineError::TooFewTicks(x.len()));
    }
    if y.len() < 2 {
        return Err(BaselineError::TooFewTicks(y.len()));
    }

    let n_grid = (horizon / grid_step).floor() as usize;
    let first_defined = x.times()[0].max(y.times()[0]);

    let mut xs = PreviousTick::new(x);
    let mut ys = PreviousTick::new(y);
    let mut prev: Option<(f64, f64)> = None;
    let mut total = 0.0;
    let mut used = 0usize;
    for k in 0..=n_grid {
        let tk = k as f64 * grid_step;
        if tk > horizon || tk < first_defined {
            continue;
        }
        let xk = xs.value_at(tk);
        let yk = ys.value_at(tk);
        if let Some((xp, yp)) = prev {
            total += (xk - xp) * (yk - yp);
            used += 1;
        }
        prev = Some((xk, yk));
    }
    if used == 0 {
        return Err(BaselineError::GridTooCoarse);
    }
    Ok(total)
}

/// Forward-only last-tick cursor; grid queries must be nondecreasing.
struct PreviousTick<'a> {
    times: &'a [f64],
    values: &'a [f64],
    pos: usize,
}

impl<'a> PreviousTick<'a> {
    fn new(series: &'a TickSeries) -> Self {
        Self {
            times: series.times(),
            values: series.values(),
            pos: 0,
        }
    }

    fn value_at(&mut self, t: f64) -> f64 {
        debug_assert!(self.times[0] <= t, "query before first tick");
        while self.pos + 1 < self.times.len() && self.times[self.pos + 1] <= t {
            self.pos += 1;
        }
        self.values[self.pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn ticks(times: &[f64], values: &[f64]) -> TickSeries {
        TickSeries::new(times.to_vec(), values.to_vec()).unwrap()
    }

    fn brute_hy(x: &TickSeries, y: &TickSeries) -> f64 {
        let s = x.times();
        let t = y.times();
        let mut total = 0.0;
        for i in 1..s.len() {
            for j in 1..t.len() {
                if t[j - 1] < s[i] && s[i - 1] < t[j] {
                    total += (x.values()[i] - x.values()[i - 1]) * (y.values()[j] - y.values()[j - 1]);
                }
            }
        }
        total
    }

    fn random_walk(seed: u64, n: usize, mean_gap: f64) -> TickSeries {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let mut v = 0.0;
        let mut times = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(t);
            values.push(v);
            t += mean_gap * (0.1 + rng.random::<f64>());
            v += rng.random::<f64>() - 0.5;
        }
        TickSeries::new(times, values).unwrap()
    }

    #[test]
    fn synchronous_equals_realized_covariance() {
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xv: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let yv: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let x = ticks(&times, &xv);
        let y = ticks(&times, &yv);
        let hy = hayashi_yoshida(&x, &y).unwrap();
        let rc: f64 = (1..50)
            .map(|i| (xv[i] - xv[i - 1]) * (yv[i] - yv[i - 1]))
            .sum();
        assert_eq!(hy, rc);
    }

    #[test]
    fn constant_series_gives_zero() {
        let x = ticks(&[0.0, 1.0, 2.0], &[5.0, 5.0, 5.0]);
        let y = ticks(&[0.5, 1.5, 2.5], &[1.0, 2.0, 0.0]);
        assert_eq!(hayashi_yoshida(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn hand_example_three_by_two() {
        // ΔX = (1, 2, -1) on (0,1], (1,2], (2,3]; ΔY = (2, -1) on
        // (0,1.5], (1.5,3]. Overlaps give 1·2 + 2·2 + 2·(-1) + (-1)(-1) = 5.
        let x = ticks(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 3.0, 2.0]);
        let y = ticks(&[0.0, 1.5, 3.0], &[0.0, 2.0, 1.0]);
        assert_eq!(hayashi_yoshida(&x, &y).unwrap(), 5.0);
    }

    #[test]
    fn matches_brute_force_on_random_designs() {
        for seed in 0..8 {
            let x = random_walk(seed, 60, 0.8);
            let y = random_walk(seed + 100, 45, 1.1);
            let fast = hayashi_yoshida(&x, &y).unwrap();
            let brute = brute_hy(&x, &y);
            let scale = fast.abs().max(brute.abs()).max(1e-12);
            assert!((fast - brute).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn symmetry_and_bilinearity() {
        let x = random_walk(1, 40, 1.0);
        let y = random_walk(2, 55, 0.7);
        let xy = hayashi_yoshida(&x, &y).unwrap();
        let yx = hayashi_yoshida(&y, &x).unwrap();
        let scale = xy.abs().max(1e-12);
        assert!((xy - yx).abs() / scale < 1e-12);

        let x2 = ticks(
            x.times(),
            &x.values().iter().map(|v| 2.0 * v).collect::<Vec<_>>(),
        );
        let doubled = hayashi_yoshida(&x2, &y).unwrap();
        assert_eq!(doubled, 2.0 * xy);
    }

    #[test]
    fn previous_tick_on_aligned_grid_equals_realized_covariance() {
        let times: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let xv: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let yv: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let x = ticks(&times, &xv);
        let y = ticks(&times, &yv);
        let pt = previous_tick_rc(&x, &y, 1.0, 29.0).unwrap();
        let hy = hayashi_yoshida(&x, &y).unwrap();
        assert_eq!(pt, hy);
    }

    #[test]
    fn previous_tick_realized_variance_cross_check() {
        let x = random_walk(77, 80, 0.5);
        let horizon = x.times()[x.len() - 1];
        let step = 0.75;
        let rv = previous_tick_rc(&x, &x, step, horizon).unwrap();
        // Direct loop over the gridded series.
        let mut cursor = PreviousTick::new(&x);
        let mut grid_vals = Vec::new();
        let mut k = 0;
        loop {
            let tk = k as f64 * step;
            if tk > horizon {
                break;
            }
            if tk >= x.times()[0] {
                grid_vals.push(cursor.value_at(tk));
            }
            k += 1;
        }
        let direct: f64 = grid_vals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let scale = rv.abs().max(1e-12);
        assert!((rv - direct).abs() / scale < 1e-12);
        assert!(rv >= 0.0);
    }

    #[test]
    fn previous_tick_rejects_bad_grids() {
        let x = random_walk(3, 20, 1.0);
        let y = random_walk(4, 20, 1.0);
        assert!(matches!(
            previous_tick_rc(&x, &y, 0.0, 10.0),
            Err(BaselineError::BadGrid { .. })
        ));
        assert!(matches!(
            previous_tick_rc(&x, &y, 20.0, 10.0),
            Err(BaselineError::BadGrid { .. })
        ));
    }
}
