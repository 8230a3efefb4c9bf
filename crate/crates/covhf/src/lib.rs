//! Integrated covariance estimation for two assets observed
//! nonsynchronously under market microstructure noise.
//!
//! The estimator pre-averages the observed tick series over sliding
//! windows after refresh-time synchronization with next-tick
//! interpolation, then forms Hayashi-Yoshida style cross products of the
//! pre-averaged increments. The crate also ships the classical baselines,
//! a fully seeded scenario simulator with closed-form ground truth, the
//! asymptotic-variance formulas for oracle confidence intervals, and a
//! Monte Carlo experiment harness behind the `covhf` CLI.
//!
//! Module map:
//!
//! - [`weightfn`]: weight functions, ψ kernels, κ constants, discrete
//!   coefficient arrays.
//! - [`sync`]: refresh times, next-tick interpolation, overlap structure.
//! - [`preavg`]: pre-averaging and the (modified) pre-averaged HY
//!   estimator.
//! - [`baselines`]: classical Hayashi-Yoshida and previous-tick realized
//!   covariance.
//! - [`simulate`]: seeded scenario generation (diffusion, sampling,
//!   noise) and tick CSV I/O.
//! - [`avar`]: asymptotic variance `w²`, Poisson sampling limits, oracle
//!   confidence intervals.
//! - [`harness`]: named experiments, replication management, result
//!   persistence.

pub mod avar;
pub mod baselines;
pub mod harness;
pub mod preavg;
pub mod simulate;
pub mod sync;
pub mod weightfn;
