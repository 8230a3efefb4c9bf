//! Pre-averaging weight functions and their kernel calculus.
//!
//! A weight `g` is continuous, piecewise C¹ with a piecewise-Lipschitz
//! derivative, vanishes outside `[0,1]`, and has `ψ_HY = ∫₀¹ g ≠ 0`. Both
//! `g` and `g'` are extended by zero to the whole real line. The kernels
//!
//! `ψ_{α,β}(x) = ∫₀¹ ∫_{x+u-1}^{x+u+1} α(u) β(v) dv du`,  α, β ∈ {g, g'},
//!
//! and the constants `κ = ∫_{-2}^{2} ψ_{g,g}²`, `κ̃ = ∫ ψ_{g',g'}²`,
//! `κ̄ = ∫ ψ_{g,g'}²` drive the asymptotic variance of the estimator.
//!
//! Quadrature uses `quad_points` cells per unit interval. The inner
//! integral is read off cumulative antiderivative tables built by the
//! midpoint rule on the cell grid (with a midpoint correction for partial
//! cells); the outer integral over `u` applies two-point Gauss-Legendre
//! per cell, which is exact for per-cell cubics, so one kernel evaluation
//! costs `O(quad_points)` and is accurate to ~1e-10 for the default
//! weight. Cell boundaries align with the default weight's kinks, and the
//! irrational Gauss offsets never sample `g'` exactly at a kink.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::sync::OverlapOracle;

/// Cells per unit interval used by the default kernel quadrature.
pub const DEFAULT_QUAD_POINTS: usize = 2048;

/// |ψ_HY| below this is treated as a degenerate weight.
const PSI_HY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WeightError {
    #[error("pre-averaging window k_n must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("psi_HY is zero to quadrature tolerance (got {0:.3e}); the weight violates the admissibility condition")]
    DegenerateWeight(f64),
    #[error("coefficient arrays have length {len}, expected k_n = {k_n}")]
    CoefficientLength { len: usize, k_n: usize },
    #[error("overlap oracle was built for k_n = {oracle}, expected {expected}")]
    WindowMismatch { oracle: usize, expected: usize },
    #[error("indices (p={p}, q={q}) outside design range 1..{max_p}/1..{max_q}")]
    IndexOutOfRange {
        p: usize,
        q: usize,
        max_p: usize,
        max_q: usize,
    },
}

/// Selects which function of the scheme occupies a kernel slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFn {
    G,
    GPrime,
}

/// Kernel constants of a weight scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    /// `κ = ∫_{-2}^{2} ψ_{g,g}(x)² dx`
    pub kappa: f64,
    /// `κ̃ = ∫_{-2}^{2} ψ_{g',g'}(x)² dx`
    pub kappa_tilde: f64,
    /// `κ̄ = ∫_{-2}^{2} ψ_{g,g'}(x)² dx`
    pub kappa_bar: f64,
    /// `ψ_HY = ∫₀¹ g(x) dx`
    pub psi_hy: f64,
}

/// Offset of the two Gauss-Legendre nodes from the cell midpoint, in cell
/// widths.
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_88; // 1/(2√3)

struct KernelTables {
    h: f64,
    /// Weight values at the two Gauss nodes of each cell.
    node_g: Vec<(f64, f64)>,
    node_gp: Vec<(f64, f64)>,
    /// Cumulative cell integrals: `cum[k] = ∫₀^{kh}`, length quad_points + 1.
    cum_g: Vec<f64>,
    cum_gp: Vec<f64>,
}

/// A pre-averaging weight function together with its derivative and the
/// quadrature resolution used for its kernel integrals.
///
/// Immutable after construction; kernel tables and constants are computed
/// once on first use and shared, so a scheme is safe to use from many
/// threads.
pub struct WeightScheme {
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    g_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    quad_points: usize,
    tables: OnceLock<KernelTables>,
    constants: OnceLock<Result<KernelConstants, WeightError>>,
}

impl Default for WeightScheme {
    fn default() -> Self {
        Self::triangular()
    }
}

impl WeightScheme {
    /// The triangular weight `g(x) = x ∧ (1 - x)` at the default quadrature
    /// resolution. Its derivative is `+1` on `[0, 1/2)` and `-1` on
    /// `[1/2, 1]`, taking the stated value at the kink.
    pub fn triangular() -> Self {
        Self::triangular_with_resolution(DEFAULT_QUAD_POINTS)
    }

    pub fn triangular_with_resolution(quad_points: usize) -> Self {
        Self::new(
            |x| x.min(1.0 - x),
            |x| if x < 0.5 { 1.0 } else { -1.0 },
            quad_points,
        )
    }

    /// A custom weight. `g` and `g_prime` are only ever evaluated inside
    /// `[0,1]`; both are treated as zero outside.
    pub fn new<G, D>(g: G, g_prime: D, quad_points: usize) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(quad_points >= 8, "quad_points must be at least 8");
        Self {
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            quad_points,
            tables: OnceLock::new(),
            constants: OnceLock::new(),
        }
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    /// `g(x)`, exactly zero outside `[0,1]`.
    pub fn eval_g(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            (self.g)(x)
        } else {
            0.0
        }
    }

    /// `g'(x)`, exactly zero outside `[0,1]`.
    pub fn eval_g_prime(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            (self.g_prime)(x)
        } else {
            0.0
        }
    }

    fn eval(&self, which: WeightFn, x: f64) -> f64 {
        match which {
            WeightFn::G => self.eval_g(x),
            WeightFn::GPrime => self.eval_g_prime(x),
        }
    }

    fn tables(&self) -> &KernelTables {
        self.tables.get_or_init(|| {
            let qp = self.quad_points;
            let h = 1.0 / qp as f64;
            let mut node_g = Vec::with_capacity(qp);
            let mut node_gp = Vec::with_capacity(qp);
            let mut cum_g = Vec::with_capacity(qp + 1);
            let mut cum_gp = Vec::with_capacity(qp + 1);
            cum_g.push(0.0);
            cum_gp.push(0.0);
            let (mut acc_g, mut acc_gp) = (0.0, 0.0);
            for k in 0..qp {
                let center = (k as f64 + 0.5) * h;
                let lo = center - GAUSS_OFFSET * h;
                let hi = center + GAUSS_OFFSET * h;
                node_g.push((self.eval_g(lo), self.eval_g(hi)));
                node_gp.push((self.eval_g_prime(lo), self.eval_g_prime(hi)));
                acc_g += h * self.eval_g(center);
                acc_gp += h * self.eval_g_prime(center);
                cum_g.push(acc_g);
                cum_gp.push(acc_gp);
            }
            KernelTables {
                h,
                node_g,
                node_gp,
                cum_g,
                cum_gp,
            }
        })
    }

    /// `∫₀^y β(v) dv` for the zero-extended function, read from the
    /// cumulative table with a midpoint correction on the partial cell.
    fn antiderivative(&self, beta: WeightFn, y: f64) -> f64 {
        let t = self.tables();
        let qp = self.quad_points;
        let cum = match beta {
            WeightFn::G => &t.cum_g,
            WeightFn::GPrime => &t.cum_gp,
        };
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return cum[qp];
        }
        let k = ((y * qp as f64).floor() as usize).min(qp - 1);
        let frac = y - k as f64 * t.h;
        if frac <= 0.0 {
            cum[k]
        } else {
            cum[k] + frac * self.eval(beta, k as f64 * t.h + 0.5 * frac)
        }
    }

    /// `ψ_{α,β}(x)`; exactly zero whenever `|x| > 2`.
    pub fn psi_kernel(&self, alpha: WeightFn, beta: WeightFn, x: f64) -> f64 {
        if x.abs() > 2.0 {
            return 0.0;
        }
        let t = self.tables();
        let nodes = match alpha {
            WeightFn::G => &t.node_g,
            WeightFn::GPrime => &t.node_gp,
        };
        let h = t.h;
        let mut acc = 0.0;
        for (k, &(a_lo, a_hi)) in nodes.iter().enumerate() {
            let center = (k as f64 + 0.5) * h;
            if a_lo != 0.0 {
                let u = center - GAUSS_OFFSET * h;
                acc += a_lo
                    * (self.antiderivative(beta, x + u + 1.0)
                        - self.antiderivative(beta, x + u - 1.0));
            }
            if a_hi != 0.0 {
                let u = center + GAUSS_OFFSET * h;
                acc += a_hi
                    * (self.antiderivative(beta, x + u + 1.0)
                        - self.antiderivative(beta, x + u - 1.0));
            }
        }
        0.5 * h * acc
    }

    /// `ψ_HY = ∫₀¹ g`.
    pub fn psi_hy(&self) -> f64 {
        let t = self.tables();
        t.cum_g[self.quad_points]
    }

    /// Computes (once, then caches) the kernel constants of this scheme.
    pub fn kernel_constants(&self) -> Result<KernelConstants, WeightError> {
        self.constants
            .get_or_init(|| {
                let psi_hy = self.psi_hy();
                if psi_hy.abs() < PSI_HY_TOLERANCE {
                    return Err(WeightError::DegenerateWeight(psi_hy));
                }
                let qp = self.quad_points;
                let h = 1.0 / qp as f64;
                let cells = 4 * qp;
                let mut kappa = 0.0;
                let mut kappa_tilde = 0.0;
                let mut kappa_bar = 0.0;
                for i in 0..cells {
                    let x = -2.0 + (i as f64 + 0.5) * h;
                    let pgg = self.psi_kernel(WeightFn::G, WeightFn::G, x);
                    let pdd = self.psi_kernel(WeightFn::GPrime, WeightFn::GPrime, x);
                    let pgd = self.psi_kernel(WeightFn::G, WeightFn::GPrime, x);
                    kappa += pgg * pgg;
                    kappa_tilde += pdd * pdd;
                    kappa_bar += pgd * pgd;
                }
                Ok(KernelConstants {
                    kappa: h * kappa,
                    kappa_tilde: h * kappa_tilde,
                    kappa_bar: h * kappa_bar,
                    psi_hy,
                })
            })
            .clone()
    }

    /// Discrete weight arrays: `g_arr[p] = g(p/k_n)` and
    /// `dg_arr[p] = g((p+1)/k_n) - g(p/k_n)` for `p = 0..k_n-1`.
    pub fn discrete_coeffs(&self, k_n: usize) -> Result<(Vec<f64>, Vec<f64>), WeightError> {
        if k_n < 2 {
            return Err(WeightError::WindowTooSmall(k_n));
        }
        let kf = k_n as f64;
        let mut g_arr = Vec::with_capacity(k_n);
        let mut dg_arr = Vec::with_capacity(k_n);
        for p in 0..k_n {
            let here = self.eval_g(p as f64 / kf);
            let next = self.eval_g((p + 1) as f64 / kf);
            g_arr.push(here);
            dg_arr.push(next - here);
        }
        Ok((g_arr, dg_arr))
    }
}

/// The discrete kernel sum
///
/// `c_{α,β}(p,q) = k_n^{-2} Σ_{i=(p-k_n+1)∨1}^{p} Σ_{j=(q-k_n+1)∨1}^{q}
///                 α((p-i)/k_n) β((q-j)/k_n) K̄^{ij}`
///
/// with `α, β` given as discrete coefficient arrays of length `k_n`
/// (`alpha_arr[r] = α(r/k_n)`).
pub fn discrete_c(
    alpha_arr: &[f64],
    beta_arr: &[f64],
    overlap: &OverlapOracle,
    p: usize,
    q: usize,
    k_n: usize,
) -> Result<f64, WeightError> {
    if alpha_arr.len() != k_n {
        return Err(WeightError::CoefficientLength {
            len: alpha_arr.len(),
            k_n,
        });
    }
    if beta_arr.len() != k_n {
        return Err(WeightError::CoefficientLength {
            len: beta_arr.len(),
            k_n,
        });
    }
    if overlap.k_n() != k_n {
        return Err(WeightError::WindowMismatch {
            oracle: overlap.k_n(),
            expected: k_n,
        });
    }
    if p < 1 || q < 1 || p >= overlap.n_rows() || q >= overlap.n_cols() {
        return Err(WeightError::IndexOutOfRange {
            p,
            q,
            max_p: overlap.n_rows(),
            max_q: overlap.n_cols(),
        });
    }
    let i_lo = (p + 1).saturating_sub(k_n).max(1);
    let j_lo = (q + 1).saturating_sub(k_n).max(1);
    let mut acc = 0.0;
    for i in i_lo..=p {
        let a = alpha_arr[p - i];
        if a == 0.0 {
            continue;
        }
        for j in j_lo..=q {
            if overlap.kbar(i, j) {
                acc += a * beta_arr[q - j];
            }
        }
    }
    Ok(acc / (k_n as f64 * k_n as f64))
}
