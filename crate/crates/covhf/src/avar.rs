//! Asymptotic variance of the estimation error and oracle confidence
//! intervals.
//!
//! The CLT for the modified pre-averaged HY estimator reads
//! `b_n^{-1/4}(PHŶ - [X,Y]) → ∫ w_s dW̃_s` stably in law, with `w_s²`
//! an explicit function of the spot (co)variations, the noise covariance
//! `Ψ`, the synchronicity process `χ`, and the sampling-duration limits
//! `G, F¹, F², F^{1*2}`. Two variants are implemented: the
//! exogenous-noise-only form and the general form with endogenous noise,
//! which replaces `Ψ` by `Ψ̄` and subtracts a cross-correction.
//!
//! All spot quantities here are oracle-supplied (from simulation truth):
//! no feasible data-driven estimator of `w_s²` is provided, so
//! studentization is only available when the generating scenario is known.

use thiserror::Error;

use crate::weightfn::KernelConstants;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AvarError {
    #[error("spot covariance violates Cauchy-Schwarz: |{ic_xy}| > sqrt({ic_x} * {ic_y})")]
    CauchySchwarz { ic_xy: f64, ic_x: f64, ic_y: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("chi must lie in [0, 1], got {0}")]
    ChiOutOfRange(f64),
    #[error("endogenous fields must all be zero for the exogenous-only formula; use w_squared_endo")]
    EndogenousFieldsPresent,
    #[error("asymptotic variance came out negative ({0}); inputs are outside the theorem's range")]
    NegativeVariance(f64),
    #[error("piecewise inputs do not cover [0, {horizon}]: {msg}")]
    Coverage { horizon: f64, msg: String },
    #[error("confidence level must be in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("b_n must be positive, got {0}")]
    BadBn(f64),
    #[error("integrated variance must be nonnegative, got {0}")]
    NegativeVt(f64),
}

/// Spot inputs of the asymptotic-variance formulas at one instant.
///
/// `ic_*` are the spot (co)variations of the latent pair, `psi*` the noise
/// covariance entries, `z_*` the spot (co)variations involving the
/// endogenous-noise loads `Z^X`, `Z^Y` (`zx_y = [Z^X, Y]'`,
/// `x_zy = [X, Z^Y]'`), and `g/f1/f2/f12` the sampling-duration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvarInputs {
    pub ic_x: f64,
    pub ic_y: f64,
    pub ic_xy: f64,
    pub psi11: f64,
    pub psi22: f64,
    pub psi12: f64,
    pub chi: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub z_xy: f64,
    pub zx_y: f64,
    pub x_zy: f64,
    pub g: f64,
    pub f1: f64,
    pub f2: f64,
    pub f12: f64,
    pub theta: f64,
    pub constants: KernelConstants,
}

impl AvarInputs {
    pub fn validate(&self) -> Result<(), AvarError> {
        if self.ic_xy.abs() > (self.ic_x * self.ic_y).sqrt() * (1.0 + 1e-12) {
            return Err(AvarError::CauchySchwarz {
                ic_xy: self.ic_xy,
                ic_x: self.ic_x,
                ic_y: self.ic_y,
            });
        }
        for (name, value) in [
            ("G", self.g),
            ("F1", self.f1),
            ("F2", self.f2),
            ("F12", self.f12),
            ("theta", self.theta),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AvarError::NonPositive { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(AvarError::ChiOutOfRange(self.chi));
        }
        Ok(())
    }

    pub fn has_endogenous(&self) -> bool {
        self.z_x != 0.0
            || self.z_y != 0.0
            || self.z_xy != 0.0
            || self.zx_y != 0.0
            || self.x_zy != 0.0
    }
}

/// Exogenous-noise-only asymptotic variance:
///
/// `w² = ψ_HY^{-4} [ θκ([X]'[Y]' + [X,Y]'²) G
///       + θ^{-3} κ̃ (Ψ¹¹Ψ²² + (Ψ¹²χ)²) G^{-1}
///       + θ^{-1} κ̄ ([X]'Ψ²² + [Y]'Ψ¹¹ + 2[X,Y]'Ψ¹²χ) ]`.
pub fn w_squared_exo(inputs: &AvarInputs) -> Result<f64, AvarError> {
    inputs.validate()?;
    if inputs.has_endogenous() {
        return Err(AvarError::EndogenousFieldsPresent);
    }
    let k = &inputs.constants;
    let theta = inputs.theta;
    let noise12 = inputs.psi12 * inputs.chi;
    let term1 =
        theta * k.kappa * (inputs.ic_x * inputs.ic_y + inputs.ic_xy * inputs.ic_xy) * inputs.g;
    let term2 = k.kappa_tilde / (theta * theta * theta)
        * (inputs.psi11 * inputs.psi22 + noise12 * noise12)
        / inputs.g;
    let term3 = k.kappa_bar / theta
        * (inputs.ic_x * inputs.psi22 + inputs.ic_y * inputs.psi11
            + 2.0 * inputs.ic_xy * noise12);
    let w2 = (term1 + term2 + term3) / k.psi_hy.powi(4);
    if w2 < 0.0 {
        return Err(AvarError::NegativeVariance(w2));
    }
    Ok(w2)
}

/// General asymptotic variance with endogenous noise:
///
/// `Ψ̄¹¹ = Ψ¹¹ + [Z^X]'F¹`, `Ψ̄²² = Ψ²² + [Z^Y]'F²`,
/// `Ψ̄¹² = Ψ¹²χ + [Z^X,Z^Y]'F^{1*2}`, and the κ̄ bracket subtracts
/// `([Z^X,Y]'F¹ - [X,Z^Y]'F²)² G^{-1}`.
///
/// With all endogenous fields zero this reduces to `w_squared_exo`.
pub fn w_squared_endo(inputs: &AvarInputs) -> Result<f64, AvarError> {
    inputs.validate()?;
    let k = &inputs.constants;
    let theta = inputs.theta;
    let psi11_bar = inputs.psi11 + inputs.z_x * inputs.f1;
    let psi22_bar = inputs.psi22 + inputs.z_y * inputs.f2;
    let psi12_bar = inputs.psi12 * inputs.chi + inputs.z_xy * inputs.f12;
    let cross = inputs.zx_y * inputs.f1 - inputs.x_zy * inputs.f2;
    let correction = cross * cross / inputs.g;
    let term1 =
        theta * k.kappa * (inputs.ic_x * inputs.ic_y + inputs.ic_xy * inputs.ic_xy) * inputs.g;
    let term2 = k.kappa_tilde / (theta * theta * theta)
        * (psi11_bar * psi22_bar + psi12_bar * psi12_bar)
        / inputs.g;
    let term3 = k.kappa_bar / theta
        * (inputs.ic_x * psi22_bar + inputs.ic_y * psi11_bar
            + 2.0 * inputs.ic_xy * psi12_bar
            - correction);
    let w2 = (term1 + term2 + term3) / k.psi_hy.powi(4);
    if w2 < 0.0 {
        return Err(AvarError::NegativeVariance(w2));
    }
    Ok(w2)
}

/// Sampling-duration limits of the independent Poisson scheme with one
/// deterministic change point per asset (`χ ≡ 0` for this scheme).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfValues {
    pub g: f64,
    pub f1: f64,
    pub f2: f64,
    pub f12: f64,
    pub chi: f64,
}

/// Evaluates `G_s, F¹_s, F²_s, F^{1*2}_s` for base rates switching from
/// `p_lo` to `p_hi` at `tau` (per asset); the post-change regime applies
/// from `s = tau` on. With `tau` beyond the horizon this is the plain
/// Poisson scheme.
#[allow(clippy::too_many_arguments)]
pub fn gf_poisson_changepoint(
    p1_lo: f64,
    p1_hi: f64,
    p2_lo: f64,
    p2_hi: f64,
    tau1: f64,
    tau2: f64,
    s: f64,
) -> GfValues {
    assert!(
        p1_lo > 0.0 && p1_hi > 0.0 && p2_lo > 0.0 && p2_hi > 0.0,
        "rates must be positive"
    );
    let q1 = if s < tau1 { p1_lo } else { p1_hi };
    let q2 = if s < tau2 { p2_lo } else { p2_hi };
    GfValues {
        g: 1.0 / q1 + 1.0 / q2 - 1.0 / (q1 + q2),
        f1: 1.0 / q1,
        f2: 1.0 / q2,
        f12: 2.0 / (q1 + q2),
        chi: 0.0,
    }
}

/// One piece of a piecewise-constant inputs path.
#[derive(Debug, Clone, Copy)]
pub struct AvarSegment {
    pub start: f64,
    pub end: f64,
    pub inputs: AvarInputs,
}

/// `V_t = ∫₀ᵗ w_s² ds` for piecewise-constant inputs covering `[0, t]`.
pub fn integrated_variance(
    segments: &[AvarSegment],
    horizon: f64,
    endogenous: bool,
) -> Result<f64, AvarError> {
    if segments.is_empty() {
        return Err(AvarError::Coverage {
            horizon,
            msg: "no segments".into(),
        });
    }
    let tol = 1e-9 * horizon.max(1.0);
    if segments[0].start.abs() > tol {
        return Err(AvarError::Coverage {
            horizon,
            msg: format!("first segment starts at {}", segments[0].start),
        });
    }
    let mut total = 0.0;
    let mut cursor = 0.0;
    for seg in segments {
        if (seg.start - cursor).abs() > tol {
            return Err(AvarError::Coverage {
                horizon,
                msg: format!("gap at {cursor}: next segment starts at {}", seg.start),
            });
        }
        if seg.end <= seg.start {
            return Err(AvarError::Coverage {
                horizon,
                msg: format!("segment [{}, {}] has nonpositive length", seg.start, seg.end),
            });
        }
        let w2 = if endogenous {
            w_squared_endo(&seg.inputs)?
        } else {
            w_squared_exo(&seg.inputs)?
        };
        total += w2 * (seg.end - seg.start);
        cursor = seg.end;
    }
    if (cursor - horizon).abs() > tol {
        return Err(AvarError::Coverage {
            horizon,
            msg: format!("segments end at {cursor}"),
        });
    }
    Ok(total)
}

/// Symmetric oracle confidence interval
/// `estimate ± z_{(1+level)/2} · b_n^{1/4} · √V_t`.
pub fn oracle_ci(
    estimate: f64,
    v_t: f64,
    b_n: f64,
    level: f64,
) -> Result<(f64, f64), AvarError> {
    if !(0.0 < level && level < 1.0) {
        return Err(AvarError::BadLevel(level));
    }
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(AvarError::BadBn(b_n));
    }
    if v_t < 0.0 {
        return Err(AvarError::NegativeVt(v_t));
    }
    let z = normal_quantile(0.5 * (1.0 + level));
    let half = z * b_n.powf(0.25) * v_t.sqrt();
    Ok((estimate - half, estimate + half))
}

/// Inverse standard normal CDF (Acklam's rational approximation,
/// absolute error below 1.2e-9 on (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weightfn::WeightScheme;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use std::sync::OnceLock;

    fn constants() -> KernelConstants {
        static CACHE: OnceLock<KernelConstants> = OnceLock::new();
        *CACHE.get_or_init(|| WeightScheme::triangular().kernel_constants().unwrap())
    }

    fn exo_inputs() -> AvarInputs {
        AvarInputs {
            ic_x: 1.0,
            ic_y: 1.0,
            ic_xy: 0.0,
            psi11: 0.0,
            psi22: 0.0,
            psi12: 0.0,
            chi: 0.0,
            z_x: 0.0,
            z_y: 0.0,
            z_xy: 0.0,
            zx_y: 0.0,
            x_zy: 0.0,
            g: 1.5,
            f1: 1.0,
            f2: 1.0,
            f12: 1.0,
            theta: 1.0,
            constants: constants(),
        }
    }

    #[test]
    fn exo_noise_free_plug_in() {
        // All noise zero, ic_x = ic_y = 1, ic_xy = 0, G = 3/2, θ = 1:
        // w² = ψ_HY^{-4} κ (3/2). Independent hand evaluation below.
        let inputs = exo_inputs();
        let w2 = w_squared_exo(&inputs).unwrap();
        let hand = constants().kappa * 1.5 / 0.25f64.powi(4);
        assert!(((w2 - hand) / hand).abs() < 1e-12);
        assert!(w2 > 0.0);
    }

    #[test]
    fn cross_noise_terms_vanish_when_psi12_or_chi_is_zero() {
        let mut a = exo_inputs();
        a.psi11 = 4e-4;
        a.psi22 = 9e-4;
        a.ic_xy = 0.3;
        a.psi12 = 5e-4;
        a.chi = 0.0;
        let with_chi_zero = w_squared_exo(&a).unwrap();
        let mut b = a;
        b.psi12 = 0.0;
        b.chi = 1.0;
        let with_psi12_zero = w_squared_exo(&b).unwrap();
        assert_eq!(with_chi_zero, with_psi12_zero);
    }

    #[test]
    fn dw2_dg_matches_finite_differences() {
        let mut inputs = exo_inputs();
        inputs.psi11 = 2.5e-5;
        inputs.psi22 = 2.5e-5;
        inputs.ic_xy = 0.5;
        inputs.theta = 0.8;
        let k = constants();
        let analytic = (inputs.theta * k.kappa * (inputs.ic_x * inputs.ic_y + inputs.ic_xy.powi(2))
            - k.kappa_tilde / inputs.theta.powi(3)
                * (inputs.psi11 * inputs.psi22)
                / inputs.g.powi(2))
            / k.psi_hy.powi(4);
        let h = 1e-6;
        let mut up = inputs;
        up.g += h;
        let mut dn = inputs;
        dn.g -= h;
        let fd = (w_squared_exo(&up).unwrap() - w_squared_exo(&dn).unwrap()) / (2.0 * h);
        assert!(
            ((fd - analytic) / analytic).abs() < 1e-6,
            "fd {fd} vs analytic {analytic}"
        );
    }

    #[test]
    fn endo_reduces_to_exo_bit_for_bit() {
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let ic_x = 0.1 + rng.random::<f64>();
            let ic_y = 0.1 + rng.random::<f64>();
            let rho: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let inputs = AvarInputs {
                ic_x,
                ic_y,
                ic_xy: rho * (ic_x * ic_y).sqrt(),
                psi11: rng.random::<f64>() * 1e-3,
                psi22: rng.random::<f64>() * 1e-3,
                psi12: (rng.random::<f64>() - 0.5) * 1e-3,
                chi: rng.random::<f64>(),
                z_x: 0.0,
                z_y: 0.0,
                z_xy: 0.0,
                zx_y: 0.0,
                x_zy: 0.0,
                g: 0.5 + rng.random::<f64>(),
                f1: 0.5 + rng.random::<f64>(),
                f2: 0.5 + rng.random::<f64>(),
                f12: 0.5 + rng.random::<f64>(),
                theta: 0.3 + rng.random::<f64>(),
                constants: constants(),
            };
            let exo = w_squared_exo(&inputs).unwrap();
            let endo = w_squared_endo(&inputs).unwrap();
            assert_eq!(exo.to_bits(), endo.to_bits());
        }
    }

    #[test]
    fn exo_rejects_endogenous_fields() {
        let mut inputs = exo_inputs();
        inputs.z_x = 0.01;
        assert_eq!(
            w_squared_exo(&inputs).unwrap_err(),
            AvarError::EndogenousFieldsPresent
        );
        assert!(w_squared_endo(&inputs).is_ok());
    }

    #[test]
    fn symmetric_endogenous_correction_vanishes() {
        // zx_y · F1 = x_zy · F2 kills the subtracted term: the estimate
        // equals the same formula with the correction dropped.
        let mut inputs = exo_inputs();
        inputs.ic_xy = 0.5;
        inputs.z_x = 0.09;
        inputs.z_y = 0.09;
        inputs.z_xy = 0.045;
        inputs.zx_y = 0.15;
        inputs.x_zy = 0.15;
        let w2 = w_squared_endo(&inputs).unwrap();
        let mut no_cross = inputs;
        no_cross.zx_y = 0.0;
        no_cross.x_zy = 0.0;
        let w2_nc = w_squared_endo(&no_cross).unwrap();
        assert_eq!(w2, w2_nc);
    }

    #[test]
    fn endo_full_plug_in_matches_scripted_golden() {
        // Endogenous coverage scenario: ρ = 0.5, σ = 1, ω = 0.005,
        // φ = 0.3, unit Poisson rates (G = 3/2, F¹ = F² = F^{1*2} = 1),
        // θ = 0.8. The golden value comes from an independent scripted
        // evaluation of the formula with the frozen kernel constants.
        let (phi, rho, omega): (f64, f64, f64) = (0.3, 0.5, 0.005);
        let inputs = AvarInputs {
            ic_x: 1.0,
            ic_y: 1.0,
            ic_xy: rho,
            psi11: omega * omega,
            psi22: omega * omega,
            psi12: 0.0,
            chi: 0.0,
            z_x: phi * phi,
            z_y: phi * phi,
            z_xy: phi * phi * rho,
            zx_y: phi * rho,
            x_zy: phi * rho,
            g: 1.5,
            f1: 1.0,
            f2: 1.0,
            f12: 1.0,
            theta: 0.8,
            constants: constants(),
        };
        let w2 = w_squared_endo(&inputs).unwrap();
        let golden = 3.188_360_211_578_387;
        assert!(
            ((w2 - golden) / golden).abs() < 1e-12,
            "w² = {w2} vs golden {golden}"
        );
    }

    #[test]
    fn gf_unit_rates_hand_values() {
        let gf = gf_poisson_changepoint(1.0, 1.0, 1.0, 1.0, f64::INFINITY, f64::INFINITY, 0.3);
        assert_eq!(gf.g, 1.5);
        assert_eq!(gf.f1, 1.0);
        assert_eq!(gf.f2, 1.0);
        assert_eq!(gf.f12, 1.0);
        assert_eq!(gf.chi, 0.0);
    }

    #[test]
    fn gf_degenerate_changepoint_is_constant() {
        for s in [0.0, 0.3, 0.5, 0.7, 1.0] {
            let gf = gf_poisson_changepoint(2.0, 2.0, 3.0, 3.0, 0.5, 0.5, s);
            let base = gf_poisson_changepoint(2.0, 2.0, 3.0, 3.0, 0.5, 0.5, 0.0);
            assert_eq!(gf, base);
        }
    }

    #[test]
    fn gf_switches_exactly_at_tau() {
        let tau = 0.4;
        let before = gf_poisson_changepoint(1.0, 5.0, 1.0, 1.0, tau, 2.0, tau - 1e-12);
        let at = gf_poisson_changepoint(1.0, 5.0, 1.0, 1.0, tau, 2.0, tau);
        assert_eq!(before.f1, 1.0);
        assert_eq!(at.f1, 0.2, "post-change regime applies at s = tau");
    }

    #[test]
    fn gf_jumps_only_at_change_points() {
        let (t1, t2) = (0.3, 0.6);
        let eval = |s: f64| gf_poisson_changepoint(1.0, 2.0, 1.5, 0.5, t1, t2, s);
        let probe = [0.0, 0.1, 0.29, 0.3, 0.31, 0.45, 0.59, 0.6, 0.61, 0.9];
        for w in probe.windows(2) {
            let a = eval(w[0]);
            let b = eval(w[1]);
            let crosses = (w[0] < t1 && w[1] >= t1) || (w[0] < t2 && w[1] >= t2);
            if !crosses {
                assert_eq!(a, b, "jump without a change point in [{}, {}]", w[0], w[1]);
            } else {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn gf_inequalities_on_random_rates() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q1 = 0.05 + 5.0 * rng.random::<f64>();
            let q2 = 0.05 + 5.0 * rng.random::<f64>();
            let gf = gf_poisson_changepoint(q1, q1, q2, q2, 1.0, 1.0, 0.0);
            assert!(gf.g < gf.f1 + gf.f2);
            assert!(gf.g > gf.f1.max(gf.f2));
        }
    }

    #[test]
    fn integrated_variance_single_and_split_segments() {
        let inputs = exo_inputs();
        let horizon = 1.0;
        let single = integrated_variance(
            &[AvarSegment {
                start: 0.0,
                end: horizon,
                inputs,
            }],
            horizon,
            false,
        )
        .unwrap();
        let w2 = w_squared_exo(&inputs).unwrap();
        assert!((single - w2 * horizon).abs() < 1e-15 * w2.abs().max(1.0));

        let split = integrated_variance(
            &[
                AvarSegment {
                    start: 0.0,
                    end: 0.5,
                    inputs,
                },
                AvarSegment {
                    start: 0.5,
                    end: horizon,
                    inputs,
                },
            ],
            horizon,
            false,
        )
        .unwrap();
        assert!((split - single).abs() < 1e-12 * single.abs().max(1.0));
    }

    #[test]
    fn integrated_variance_changepoint_matches_riemann_quadrature() {
        let (p1_lo, p1_hi, p2_lo, p2_hi) = (1.0, 2.5, 1.0, 1.0);
        let (tau1, tau2) = (0.4, f64::INFINITY);
        let horizon = 1.0;
        let base = exo_inputs();
        let seg_inputs = |s: f64| {
            let gf = gf_poisson_changepoint(p1_lo, p1_hi, p2_lo, p2_hi, tau1, tau2, s);
            AvarInputs {
                g: gf.g,
                f1: gf.f1,
                f2: gf.f2,
                f12: gf.f12,
                chi: gf.chi,
                psi11: 2.5e-5,
                psi22: 2.5e-5,
                ic_xy: 0.5,
                ..base
            }
        };
        let closed = integrated_variance(
            &[
                AvarSegment {
                    start: 0.0,
                    end: tau1,
                    inputs: seg_inputs(0.0),
                },
                AvarSegment {
                    start: tau1,
                    end: horizon,
                    inputs: seg_inputs(tau1),
                },
            ],
            horizon,
            false,
        )
        .unwrap();

        let cells = 20_000;
        let dt = horizon / cells as f64;
        let mut riemann = 0.0;
        for i in 0..cells {
            let s = (i as f64 + 0.5) * dt;
            riemann += w_squared_exo(&seg_inputs(s)).unwrap() * dt;
        }
        assert!(
            ((closed - riemann) / closed).abs() < 1e-4,
            "closed {closed} vs riemann {riemann}"
        );
    }

    #[test]
    fn integrated_variance_rejects_gaps() {
        let inputs = exo_inputs();
        let err = integrated_variance(
            &[
                AvarSegment {
                    start: 0.0,
                    end: 0.4,
                    inputs,
                },
                AvarSegment {
                    start: 0.5,
                    end: 1.0,
                    inputs,
                },
            ],
            1.0,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, AvarError::Coverage { .. }));
    }

    #[test]
    fn oracle_ci_examples() {
        let (lo, hi) = oracle_ci(1.0, 0.0, 1e-4, 0.95).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));

        let (lo, hi) = oracle_ci(0.0, 4.0, 1e-4, 0.95).unwrap();
        let half = 1.959964 * 0.1 * 2.0;
        assert!((hi - half).abs() < 1e-5, "half-width {hi}");
        assert_eq!(lo, -hi);

        let (l95, h95) = oracle_ci(0.3, 2.0, 1e-4, 0.95).unwrap();
        let (l99, h99) = oracle_ci(0.3, 2.0, 1e-4, 0.99).unwrap();
        assert!(l99 < l95 && h95 < h99);
    }

    #[test]
    fn normal_quantile_sanity() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        assert!(normal_quantile(0.5).abs() < 1e-9);
        assert!((normal_quantile(0.995) - 2.575829).abs() < 1e-5);
        for p in [0.001, 0.2, 0.5, 0.9, 0.999] {
            assert!((normal_quantile(p) + normal_quantile(1.0 - p)).abs() < 1e-8);
        }
    }

    #[test]
    fn w_squared_positive_on_acceptance_grid() {
        let k = constants();
        for &theta in &[0.5, 0.8, 1.2] {
            for &rho in &[-0.8, 0.0, 0.5] {
                for &omega in &[0.0, 0.005, 0.05] {
                    for &phi in &[0.0, 0.3] {
                        let inputs = AvarInputs {
                            ic_x: 1.0,
                            ic_y: 1.0,
                            ic_xy: rho,
                            psi11: omega * omega,
                            psi22: omega * omega,
                            psi12: 0.0,
                            chi: 0.0,
                            z_x: phi * phi,
                            z_y: phi * phi,
                            z_xy: phi * phi * rho,
                            zx_y: phi * rho,
                            x_zy: phi * rho,
                            g: 1.5,
                            f1: 1.0,
                            f2: 1.0,
                            f12: 1.0,
                            theta,
                            constants: k,
                        };
                        let w2 = w_squared_endo(&inputs).unwrap();
                        assert!(w2 > 0.0, "w² = {w2} at θ={theta}, ρ={rho}, ω={omega}, φ={phi}");
                    }
                }
            }
        }
    }

    #[test]
    fn validation_catches_bad_inputs() {
        let mut inputs = exo_inputs();
        inputs.ic_xy = 2.0;
        assert!(matches!(
            w_squared_exo(&inputs).unwrap_err(),
            AvarError::CauchySchwarz { .. }
        ));
        let mut inputs = exo_inputs();
        inputs.g = 0.0;
        assert!(matches!(
            w_squared_exo(&inputs).unwrap_err(),
            AvarError::NonPositive { name: "G", .. }
        ));
        let mut inputs = exo_inputs();
        inputs.chi = 1.5;
        assert!(matches!(
            w_squared_exo(&inputs).unwrap_err(),
            AvarError::ChiOutOfRange(_)
        ));
        assert!(matches!(
            oracle_ci(0.0, 1.0, -1.0, 0.95).unwrap_err(),
            AvarError::BadBn(_)
        ));
        assert!(matches!(
            oracle_ci(0.0, 1.0, 1.0, 1.5).unwrap_err(),
            AvarError::BadLevel(_)
        ));
    }
}
