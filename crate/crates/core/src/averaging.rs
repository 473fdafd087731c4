//! Hand-coded stroboscopically averaged fields for the swept Duffing
//! oscillator, in rotating-frame Cartesian and polar variables.
//!
//! The fields below are the closed-form first- and second-order averages of
//! the rotating-frame system; the second-order field is only valid when the
//! start time is an integer number of periods, which is enforced. Both carry
//! the frozen slow phase `sweep_rate * tau^2 / 2` evaluated directly from
//! macro time.

use crate::duffing::OscillatorParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Rotating-frame amplitude and phase: `theta_hat = r cos(phi)`,
/// `v_hat = -omega0 r sin(phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    pub phi: f64,
}

/// Truncation order of the averaged field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragedOrder {
    First,
    Second,
}

/// Tolerance for deciding that `tau0` sits on the period grid.
const INTEGER_PERIOD_TOL: f64 = 1e-9;

/// Whether `tau0` is an integer number of periods (up to round-off).
pub fn starts_on_period_grid(p: &OscillatorParams) -> bool {
    let ratio = p.tau0 / p.period();
    (ratio - ratio.round()).abs() <= INTEGER_PERIOD_TOL * ratio.abs().max(1.0)
}

/// First-order averaged field in `(theta_hat, v_hat)`.
pub fn averaged1_rhs(theta_hat: f64, v_hat: f64, tau: f64, p: &OscillatorParams) -> [f64; 2] {
    let w = v_hat / p.omega0;
    let r2 = theta_hat * theta_hat + w * w;
    let (sin_c, cos_c) = (0.5 * p.sweep_rate * tau * tau).sin_cos();
    [
        -p.epsilon / (8.0 * p.omega0) * (3.0 * p.cubic * r2 * w + 4.0 * p.forcing * sin_c),
        p.epsilon / 8.0 * (3.0 * p.cubic * r2 * theta_hat + 4.0 * p.forcing * cos_c),
    ]
}

/// Second-order averaged field in `(theta_hat, v_hat)`.
///
/// Adds the epsilon^2 corrections to [`averaged1_rhs`]. Valid only when
/// `tau0` is an integer number of periods.
pub fn averaged2_rhs(
    theta_hat: f64,
    v_hat: f64,
    tau: f64,
    p: &OscillatorParams,
) -> Result<[f64; 2]> {
    if !starts_on_period_grid(p) {
        return Err(Error::InvalidAveragingStart {
            tau0: p.tau0,
            period: p.period(),
        });
    }
    Ok(averaged2_rhs_unchecked(theta_hat, v_hat, tau, p))
}

/// [`averaged2_rhs`] without the start-time check, for use inside
/// integration loops after validating the parameters once.
pub fn averaged2_rhs_unchecked(
    theta_hat: f64,
    v_hat: f64,
    tau: f64,
    p: &OscillatorParams,
) -> [f64; 2] {
    let th = theta_hat;
    let w = v_hat / p.omega0;
    let (th2, w2) = (th * th, w * w);
    let r2 = th2 + w2;
    let (sin_c, cos_c) = (0.5 * p.sweep_rate * tau * tau).sin_cos();
    let b = p.forcing;
    let g = p.cubic;
    let eps = p.epsilon;
    let w0 = p.omega0;

    let first_th = -eps / (8.0 * w0) * (3.0 * g * r2 * w + 4.0 * b * sin_c);
    let first_v = eps / 8.0 * (3.0 * g * r2 * th + 4.0 * b * cos_c);

    let k_th = 3.0 * eps * eps * g / (256.0 * w0 * w0 * w0);
    let corr_th = k_th
        * (g * (19.0 * th2 * th2 + 70.0 * th2 * w2 + 35.0 * w2 * w2) * w
            - 24.0 * b * th * w * cos_c
            + 12.0 * b * (3.0 * th2 + 5.0 * w2) * sin_c);

    let k_v = 3.0 * eps * eps * g / (256.0 * w0 * w0);
    let corr_v = k_v
        * (g * (13.0 * th2 * th2 - 38.0 * th2 * w2 - 35.0 * w2 * w2) * th
            - 72.0 * b * th * w * sin_c
            + 4.0 * b * (5.0 * th2 + 3.0 * w2) * cos_c);

    [first_th - corr_th, first_v - corr_v]
}

/// First-order averaged field in polar variables `(r, phi)`.
///
/// Requires `r > 0`: the phase equation carries a `1/r` term.
pub fn polar_averaged1_rhs(s: PolarState, tau: f64, p: &OscillatorParams) -> Result<[f64; 2]> {
    if !(s.r > 0.0) {
        return Err(Error::PolarSingularity);
    }
    let shifted = s.phi + 0.5 * p.sweep_rate * tau * tau;
    Ok([
        -p.epsilon * p.forcing / (2.0 * p.omega0) * shifted.sin(),
        -p.epsilon
            * (3.0 * p.cubic / (8.0 * p.omega0) * s.r * s.r
                + p.forcing / (2.0 * p.omega0) / s.r * shifted.cos()),
    ])
}

/// Polar coordinates of a rotating-frame state.
///
/// `r = sqrt(theta_hat^2 + (v_hat/omega0)^2)`,
/// `phi = atan2(-v_hat/omega0, theta_hat)` in `(-pi, pi]`-ish range;
/// errors on the zero vector, whose phase is undefined.
pub fn hat_to_polar(theta_hat: f64, v_hat: f64, p: &OscillatorParams) -> Result<PolarState> {
    if theta_hat == 0.0 && v_hat == 0.0 {
        return Err(Error::PhaseUndefined);
    }
    let w = v_hat / p.omega0;
    Ok(PolarState {
        r: theta_hat.hypot(w),
        phi: (-w).atan2(theta_hat),
    })
}

/// Inverse of [`hat_to_polar`].
pub fn polar_to_hat(s: PolarState, p: &OscillatorParams) -> (f64, f64) {
    (s.r * s.phi.cos(), -p.omega0 * s.r * s.phi.sin())
}
