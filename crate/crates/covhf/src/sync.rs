//! Refresh-time synchronization of two sampling designs.
//!
//! Two assets observed at event times `(S^i)` and `(T^j)` are partially
//! synchronized by the refresh-time construction: `R^0 = S^0 ∨ T^0` and
//! `R^k = min{S^i : S^i > R^{k-1}} ∨ min{T^j : T^j > R^{k-1}}`. The
//! next-tick interpolated designs `Ŝ^k = min{S^i : S^i > R^{k-1}}` and
//! `T̂^k = min{T^j : T^j > R^{k-1}}` replace the raw designs before
//! pre-averaging; they satisfy `Ŝ^k ∨ T̂^k = R^k` and the index-ordering
//! property `Ŝ^i < T̂^j ⇒ i ≤ j`, which confines the estimator's overlap
//! indicator to the band `|i - j| ≤ k_n`.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SyncError {
    #[error("sampling design must contain at least one event time")]
    EmptyDesign,
    #[error("event times must be strictly increasing (violation at index {0})")]
    NotIncreasing(usize),
    #[error("event times must be nonnegative (got {0})")]
    NegativeTime(f64),
    #[error("event times must be finite (got index {0})")]
    NonFiniteTime(usize),
    #[error("window k_n must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("design has {got} interpolated times, need at least k_n + 1 = {need}")]
    TooFewPoints { got: usize, need: usize },
}

/// A strictly increasing, nonnegative sequence of event times.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDesign {
    times: Vec<f64>,
}

impl SamplingDesign {
    pub fn new(times: Vec<f64>) -> Result<Self, SyncError> {
        if times.is_empty() {
            return Err(SyncError::EmptyDesign);
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(SyncError::NonFiniteTime(i));
            }
            if t < 0.0 {
                return Err(SyncError::NegativeTime(t));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(SyncError::NotIncreasing(i));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Output of the refresh-time / next-tick interpolation step.
///
/// `s_hat` (and `t_hat`) may hold one more entry than `refresh`: when one
/// design still has an event after the last refresh time but the other is
/// exhausted, the surviving next tick is kept so the interpolated design
/// retains every usable event.
///
/// `s_check[k]` is the last raw S-time strictly before `s_hat[k]`. Index 0
/// has no predecessor; it is set equal to `s_hat[0]` and never used by the
/// estimator.
#[derive(Debug, Clone)]
pub struct SyncResult {
    pub refresh: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub t_hat: Vec<f64>,
    pub s_check: Vec<f64>,
    pub t_check: Vec<f64>,
    /// Index into the raw S design of each `s_hat` entry.
    pub s_hat_idx: Vec<usize>,
    /// Index into the raw T design of each `t_hat` entry.
    pub t_hat_idx: Vec<usize>,
}

/// Refresh times of two designs.
pub fn refresh_times(s: &SamplingDesign, t: &SamplingDesign) -> Vec<f64> {
    interpolate(s, t).refresh
}

/// Full next-tick interpolation to the refresh times.
pub fn interpolate(s: &SamplingDesign, t: &SamplingDesign) -> SyncResult {
    let st = s.times();
    let tt = t.times();

    let mut refresh = Vec::new();
    let mut s_hat = vec![st[0]];
    let mut t_hat = vec![tt[0]];
    let mut s_hat_idx = vec![0usize];
    let mut t_hat_idx = vec![0usize];

    refresh.push(st[0].max(tt[0]));

    // Cursors: first index strictly after the previous refresh time.
    let mut a = 0usize;
    let mut b = 0usize;
    let mut r_prev = refresh[0];
    loop {
        while a < st.len() && st[a] <= r_prev {
            a += 1;
        }
        while b < tt.len() && tt[b] <= r_prev {
            b += 1;
        }
        match (a < st.len(), b < tt.len()) {
            (true, true) => {
                s_hat.push(st[a]);
                s_hat_idx.push(a);
                t_hat.push(tt[b]);
                t_hat_idx.push(b);
                r_prev = st[a].max(tt[b]);
                refresh.push(r_prev);
            }
            (true, false) => {
                // Trailing one-sided next tick; no further refresh time.
                s_hat.push(st[a]);
                s_hat_idx.push(a);
                break;
            }
            (false, true) => {
                t_hat.push(tt[b]);
                t_hat_idx.push(b);
                break;
            }
            (false, false) => break,
        }
    }

    let s_check = check_times(st, &s_hat, &s_hat_idx);
    let t_check = check_times(tt, &t_hat, &t_hat_idx);

    SyncResult {
        refresh,
        s_hat,
        t_hat,
        s_check,
        t_check,
        s_hat_idx,
        t_hat_idx,
    }
}

fn check_times(raw: &[f64], hat: &[f64], hat_idx: &[usize]) -> Vec<f64> {
    hat.iter()
        .zip(hat_idx)
        .map(|(&h, &idx)| if idx == 0 { h } else { raw[idx - 1] })
        .collect()
}

/// Overlap indicator `K̄^{ij} = 1{[Ŝ^i, Ŝ^{i+k_n}) ∩ [T̂^j, T̂^{j+k_n}) ≠ ∅}`.
///
/// For each row `i` the true entries form a contiguous run of columns, so
/// the matrix is stored as one `(j_lo, j_hi)` interval per row. With
/// refresh-interpolated designs every run lies inside the band
/// `|i - j| ≤ k_n`.
#[derive(Debug, Clone)]
pub struct OverlapOracle {
    k_n: usize,
    n_rows: usize,
    n_cols: usize,
    /// Inclusive column interval of true entries per row; `(1, 0)` = empty.
    rows: Vec<(usize, usize)>,
}

impl OverlapOracle {
    /// Number of valid row indices `i` (windows `Ī^i` that close in-sample).
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    /// `K̄^{ij}` for `i < n_rows`, `j < n_cols`.
    pub fn kbar(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        let (lo, hi) = self.rows[i];
        lo <= j && j <= hi
    }

    /// Contiguous range of true columns in row `i`, if any.
    pub fn row_range(&self, i: usize) -> Option<(usize, usize)> {
        let (lo, hi) = self.rows[i];
        (lo <= hi).then_some((lo, hi))
    }

    pub fn row_sum(&self, i: usize) -> usize {
        match self.row_range(i) {
            Some((lo, hi)) => hi - lo + 1,
            None => 0,
        }
    }
}

/// Builds the overlap oracle for the interpolated designs of `sync`.
///
/// With `band_only` the column search is restricted to `|i - j| ≤ k_n`
/// (always valid for refresh-interpolated designs); without it every
/// column is scanned, which is what the exhaustive comparison tests use.
pub fn overlap_matrix(
    sync: &SyncResult,
    k_n: usize,
    band_only: bool,
) -> Result<OverlapOracle, SyncError> {
    if k_n < 2 {
        return Err(SyncError::WindowTooSmall(k_n));
    }
    let s = &sync.s_hat;
    let t = &sync.t_hat;
    if s.len() < k_n + 1 {
        return Err(SyncError::TooFewPoints {
            got: s.len(),
            need: k_n + 1,
        });
    }
    if t.len() < k_n + 1 {
        return Err(SyncError::TooFewPoints {
            got: t.len(),
            need: k_n + 1,
        });
    }
    let n_rows = s.len() - k_n;
    let n_cols = t.len() - k_n;

    // [a, b) ∩ [c, d) ≠ ∅  ⟺  a < d ∧ c < b
    let hit = |i: usize, j: usize| s[i] < t[j + k_n] && t[j] < s[i + k_n];

    let mut rows = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let (j_min, j_max) = if band_only {
            (i.saturating_sub(k_n), (i + k_n).min(n_cols - 1))
        } else {
            (0, n_cols - 1)
        };
        let mut lo = j_min;
        while lo <= j_max && !hit(i, lo) {
            lo += 1;
        }
        if lo > j_max {
            rows.push((1, 0));
            continue;
        }
        let mut hi = lo;
        while hi < j_max && hit(i, hi + 1) {
            hi += 1;
        }
        rows.push((lo, hi));
    }

    Ok(OverlapOracle {
        k_n,
        n_rows,
        n_cols,
        rows,
    })
}
