//! Autoresonance diagnostics and the threshold experiment.
//!
//! In action/mismatch variables the averaged dynamics reduces to a particle
//! in a slowly tilting washboard potential. Locking (autoresonance) persists
//! while the potential has a well, which gives a closed-form estimate
//! [`epsilon_app`] for the smallest forcing parameter that sustains it. The
//! [`detect_autoresonance`] criterion compares the final action with the
//! quasi-static action [`solve_i0`], and [`threshold_bisection`] localizes
//! the empirical threshold inside a bracket around the estimate.

use crate::averaging::{hat_to_polar, PolarState};
use crate::duffing::{phys_to_rotating, OscillatorParams, PhysState};
use crate::error::{Error, Result};
use crate::experiment::TechniqueId;
use crate::odecore::Trajectory;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Action `I = r^2/2` and unwrapped mismatch `Phi = phi + sweep_rate*tau^2/2`
/// between the solution phase and the forcing phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionMismatch {
    pub action: f64,
    pub mismatch: f64,
}

/// Outcome of the end-of-run autoresonance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoresonanceVerdict {
    pub detected: bool,
    /// Action of the solution at the final time.
    #[serde(rename = "I_final")]
    pub i_final: f64,
    /// Quasi-static action at the final time.
    #[serde(rename = "I0_final")]
    pub i0_final: f64,
    /// `|I - I0| / I0` at the final time.
    pub relative_gap: f64,
}

/// Outcome of the threshold bisection for one `(alpha, technique)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub alpha: f64,
    pub technique: TechniqueId,
    /// Final bracket: autoresonance fails at `eps_lo`, holds at `eps_hi`.
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Bracket midpoint, reported as the threshold.
    pub eps_min: f64,
    /// Closed-form estimate for the same `alpha`.
    pub eps_app: f64,
    pub iterations: u32,
    pub wall_time_s: f64,
}

/// Detection constant: the run counts as autoresonant when the final action
/// sits within this relative distance of the quasi-static action. The value
/// is deliberately loose; captured runs end up very close to `I0` while
/// uncaptured ones fall far below it.
pub const CAPTURE_GAP: f64 = 1.0 / 3.0;

/// Initial bracket around the closed-form estimate, lower end.
pub const BRACKET_LO: f64 = 0.95;
/// Initial bracket around the closed-form estimate, upper end.
pub const BRACKET_HI: f64 = 1.10;
/// The bisection stops when the bracket is at most this wide.
pub const BRACKET_WIDTH: f64 = 1e-6;

/// Closed-form estimate of the autoresonance threshold:
/// `eps_app^2 = 2^(10/3) 3^(-5/3) B^(-4/3) gamma^(-2/3) omega0^2 alpha`.
pub fn epsilon_app(alpha: f64, p: &OscillatorParams) -> Result<f64> {
    if !(p.forcing > 0.0 && p.cubic > 0.0) {
        return Err(Error::ThresholdUndefined);
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sweep rate must be non-negative, got {alpha}"
        )));
    }
    let eps2 = 2f64.powf(10.0 / 3.0) / 3f64.powf(5.0 / 3.0)
        * p.forcing.powf(-4.0 / 3.0)
        * p.cubic.powf(-2.0 / 3.0)
        * p.omega0
        * p.omega0
        * alpha;
    Ok(eps2.sqrt())
}

/// Action and mismatch of a polar state at time `tau`.
///
/// `phi` is taken as given (callers unwrap phase sequences themselves); the
/// forcing-phase offset `sweep_rate*tau^2/2` is added analytically.
pub fn action_mismatch(s: PolarState, tau: f64, p: &OscillatorParams) -> ActionMismatch {
    ActionMismatch {
        action: 0.5 * s.r * s.r,
        mismatch: s.phi + 0.5 * p.sweep_rate * tau * tau,
    }
}

/// Quasi-static action `I0(tau)`, defined implicitly by
/// `alpha*tau - eps*(3 gamma/(4 omega0) I0 - sqrt(2) B/(4 omega0) I0^(-1/2)) = 0`.
///
/// The left side decreases strictly from `+inf` to `-inf` in `I0`, so the
/// positive root exists and is unique for every `tau`. Solved by safeguarded
/// Newton on `x = sqrt(I0)` inside a geometrically grown bracket.
pub fn solve_i0(tau: f64, p: &OscillatorParams) -> Result<f64> {
    if !(p.epsilon > 0.0 && p.forcing > 0.0 && p.cubic > 0.0) {
        return Err(Error::InvalidConfig(
            "solve_i0 requires positive epsilon, forcing and cubic coefficients".to_string(),
        ));
    }
    let drive = p.sweep_rate * tau;
    let c_lin = p.epsilon * 0.75 * p.cubic / p.omega0; // multiplies x^2
    let c_inv = p.epsilon * std::f64::consts::SQRT_2 * p.forcing / (4.0 * p.omega0); // divides x
    let g = |x: f64| drive - c_lin * x * x + c_inv / x;
    let dg = |x: f64| -2.0 * c_lin * x - c_inv / (x * x);

    // Bracket the root starting from x = 1; g is strictly decreasing.
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut guard = 0;
    if g(1.0) > 0.0 {
        while g(hi) > 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::RootSolveFailure(
                    "bracket growth did not terminate".to_string(),
                ));
            }
        }
    } else {
        while g(lo) < 0.0 {
            lo *= 0.5;
            guard += 1;
            if guard > 2000 {
                return Err(Error::RootSolveFailure(
                    "bracket shrink did not terminate".to_string(),
                ));
            }
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gx = g(x);
        // Residual measured against the scale of the implicit equation.
        if gx.abs() <= 1e-12 * p.epsilon * (x * x).max(1.0) {
            return Ok(x * x);
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / dg(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::RootSolveFailure(format!(
        "no convergence for tau = {tau}"
    )))
}

/// The value of `eps^2` at which the mismatch potential marginally develops
/// a well at the given action: below it the potential is monotone and the
/// phase cannot stay trapped at this `I0`.
pub fn well_threshold_eps2(i0: f64, alpha: f64, p: &OscillatorParams) -> Result<f64> {
    if !(i0 > 0.0) {
        return Err(Error::InvalidAction(i0));
    }
    if !(p.forcing > 0.0 && p.cubic > 0.0) {
        return Err(Error::ThresholdUndefined);
    }
    let b = p.forcing;
    let w0 = p.omega0;
    let wobble = std::f64::consts::SQRT_2 * b / (2.0 * w0) * i0.sqrt();
    let stiffness = 0.75 * p.cubic / w0 + std::f64::consts::SQRT_2 * b / (8.0 * w0) * i0.powf(-1.5);
    Ok(alpha / (wobble * stiffness))
}

/// The binding value of `eps^2` over the whole action path: trapping must
/// survive at every `I0` the sweep passes through, so the requirement is the
/// maximum of [`well_threshold_eps2`] over `I0 > 0` (the threshold tends to
/// zero at both ends and has a single interior peak).
pub fn eps2_required_for_trapping(alpha: f64, p: &OscillatorParams) -> Result<f64> {
    // Golden-section maximization on log(I0) over a generous fixed range.
    let f = |x: f64| well_threshold_eps2(x.exp(), alpha, p);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-18.0_f64, 18.0_f64);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..120 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    f(0.5 * (a + b))
}

/// Decide whether a run in physical variables locked into autoresonance.
///
/// Looks only at the final sample: converts it to rotating-frame polar
/// variables, forms the action and compares with the quasi-static action at
/// that time.
pub fn detect_autoresonance(
    traj: &Trajectory<2>,
    p: &OscillatorParams,
) -> Result<AutoresonanceVerdict> {
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".to_string()));
    }
    let tau_f = traj.last_time();
    let y_f = traj.last_state();
    if !(y_f[0].is_finite() && y_f[1].is_finite()) {
        return Err(Error::Divergence { t: tau_f });
    }
    let (th, vh) = phys_to_rotating(PhysState::from(y_f), tau_f, p);
    let polar = hat_to_polar(th, vh, p)?;
    let i_final = 0.5 * polar.r * polar.r;
    let i0_final = solve_i0(tau_f, p)?;
    let relative_gap = (i_final - i0_final).abs() / i0_final;
    Ok(AutoresonanceVerdict {
        detected: relative_gap <= CAPTURE_GAP,
        i_final,
        i0_final,
        relative_gap,
    })
}

/// Bisect the smallest forcing parameter `eps` at which `predicate` turns
/// true, starting from the bracket `[0.95, 1.10] * eps_app`.
///
/// `predicate(eps)` runs the experiment and reports the autoresonance
/// verdict; it must be false at the lower end and true at the upper end.
/// At every iteration the enclosure (false at `eps_lo`, true at `eps_hi`)
/// is maintained by construction.
pub fn threshold_bisection(
    alpha: f64,
    technique: TechniqueId,
    eps_app: f64,
    mut predicate: impl FnMut(f64) -> Result<bool>,
) -> Result<ThresholdResult> {
    let start = Instant::now();
    let mut eps_lo = BRACKET_LO * eps_app;
    let mut eps_hi = BRACKET_HI * eps_app;
    let lo_verdict = predicate(eps_lo)?;
    let hi_verdict = predicate(eps_hi)?;
    if lo_verdict || !hi_verdict {
        return Err(Error::BracketFailure {
            alpha,
            lo_verdict,
            hi_verdict,
        });
    }
    let mut iterations = 0;
    while eps_hi - eps_lo > BRACKET_WIDTH {
        let mid = 0.5 * (eps_lo + eps_hi);
        if predicate(mid)? {
            eps_hi = mid;
        } else {
            eps_lo = mid;
        }
        iterations += 1;
    }
    Ok(ThresholdResult {
        alpha,
        technique,
        eps_lo,
        eps_hi,
        eps_min: 0.5 * (eps_lo + eps_hi),
        eps_app,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Least-squares exponent of the amplitude growth law `r ~ tau^q` over a
/// window of a trajectory in physical variables.
///
/// Needs `tau_a > 0` (the fit is in log-log) and at least 20 samples in the
/// window.
pub fn growth_exponent(
    traj: &Trajectory<2>,
    window: (f64, f64),
    p: &OscillatorParams,
) -> Result<f64> {
    let (tau_a, tau_b) = window;
    if !(tau_a > 0.0 && tau_b > tau_a) {
        return Err(Error::InvalidConfig(format!(
            "growth window ({tau_a}, {tau_b}) must satisfy 0 < tau_a < tau_b"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, y) in traj.times.iter().zip(&traj.states) {
        if t < tau_a || t > tau_b {
            continue;
        }
        let (th, vh) = phys_to_rotating(PhysState::from(*y), t, p);
        let r = hat_to_polar(th, vh, p)?.r;
        xs.push(t.ln());
        ys.push(r.ln());
    }
    if xs.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window, need at least 20",
            xs.len()
        )));
    }
    Ok(least_squares_slope(&xs, &ys))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

/// Continuously unwrap a sequence of angles by choosing, for each entry, the
/// `2 pi` branch nearest its predecessor.
pub fn unwrap_angles(phis: &[f64]) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(phis.len());
    let mut offset = 0.0;
    for (i, &phi) in phis.iter().enumerate() {
        if i > 0 {
            let prev: f64 = out[i - 1];
            let mut candidate = phi + offset;
            while candidate - prev > std::f64::consts::PI {
                candidate -= two_pi;
                offset -= two_pi;
            }
            while candidate - prev < -std::f64::consts::PI {
                candidate += two_pi;
                offset += two_pi;
            }
            out.push(candidate);
        } else {
            out.push(phi);
        }
    }
    out
}
