//! The Duffing oscillator with slowly swept forcing.
//!
//! Three equivalent formulations are provided:
//!
//! - physical variables `(theta, v)` with the oscillatory right-hand side,
//! - rotating-frame variables `(theta_hat, v_hat)` obtained by factoring out
//!   the unperturbed rotation, which leaves an O(epsilon) right-hand side,
//! - the enlarged autonomous-in-phase system that additionally carries the
//!   slow time `tau_hat = epsilon * tau` so the swept phase becomes a
//!   function of the state.
//!
//! The changes of variables between them are exact 2x2 rotations.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Physical and sweep constants of the oscillator.
///
/// The model is
/// `theta'' + omega0^2 theta - epsilon*cubic*theta^3 = epsilon*forcing*cos(psi)`
/// with swept phase `psi(tau) = omega0*tau - sweep_rate*tau^2/2`, integrated
/// from `tau0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Forcing amplitude (the paper-independent drive strength).
    pub forcing: f64,
    /// Cubic restoring coefficient.
    pub cubic: f64,
    /// Small parameter multiplying both the cubic term and the forcing.
    pub epsilon: f64,
    /// Linear frequency (rad per unit time).
    pub omega0: f64,
    /// Linear sweep rate of the instantaneous forcing frequency.
    pub sweep_rate: f64,
    /// Initial time of the experiment and anchor of the rotating frame.
    pub tau0: f64,
}

impl Default for OscillatorParams {
    /// The reference configuration of the built-in experiment:
    /// forcing 2, cubic omega0^2/6, omega0 = 2 pi, start at tau0 = -1000.
    fn default() -> Self {
        let omega0 = 2.0 * std::f64::consts::PI;
        Self {
            forcing: 2.0,
            cubic: omega0 * omega0 / 6.0,
            epsilon: 0.05,
            omega0,
            sweep_rate: 1e-4,
            tau0: -1000.0,
        }
    }
}

impl OscillatorParams {
    /// Period of the unperturbed linear oscillator, `2 pi / omega0`.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega0
    }

    /// Check the basic parameter invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.sweep_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sweep_rate must be non-negative, got {}",
                self.sweep_rate
            )));
        }
        if !(self.forcing.is_finite() && self.cubic.is_finite() && self.tau0.is_finite()) {
            return Err(Error::InvalidConfig(
                "parameters must be finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// Oscillator state in physical variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysState {
    pub theta: f64,
    pub v: f64,
}

impl From<[f64; 2]> for PhysState {
    fn from(y: [f64; 2]) -> Self {
        Self { theta: y[0], v: y[1] }
    }
}

impl From<PhysState> for [f64; 2] {
    fn from(s: PhysState) -> [f64; 2] {
        [s.theta, s.v]
    }
}

/// Oscillator state in rotating-frame variables, plus the slow time.
///
/// Along exact solutions of the enlarged system, `tau_hat = epsilon * tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingState {
    pub theta_hat: f64,
    pub v_hat: f64,
    pub tau_hat: f64,
}

impl From<[f64; 3]> for RotatingState {
    fn from(y: [f64; 3]) -> Self {
        Self {
            theta_hat: y[0],
            v_hat: y[1],
            tau_hat: y[2],
        }
    }
}

impl From<RotatingState> for [f64; 3] {
    fn from(r: RotatingState) -> [f64; 3] {
        [r.theta_hat, r.v_hat, r.tau_hat]
    }
}

/// Swept forcing phase `psi = omega0*tau - sweep_rate*tau^2/2`.
///
/// The instantaneous frequency `d psi/d tau = omega0 - sweep_rate*tau`
/// crosses the linear frequency at `tau = 0`.
pub fn sweep_phase(tau: f64, p: &OscillatorParams) -> f64 {
    p.omega0 * tau - 0.5 * p.sweep_rate * tau * tau
}

/// Right-hand side of the oscillator as a first-order system in `(theta, v)`.
pub fn duffing_rhs(s: PhysState, tau: f64, p: &OscillatorParams) -> PhysState {
    // Trig arguments are taken at face value; for the spans used here
    // (|psi| up to ~4e4) this costs a few ulps of phase, far below the
    // 1e-12 tolerances of the experiments.
    let drive = p.epsilon * p.forcing * sweep_phase(tau, p).cos();
    PhysState {
        theta: s.v,
        v: -p.omega0 * p.omega0 * s.theta + p.epsilon * p.cubic * s.theta.powi(3) + drive,
    }
}

/// Rotation angle of the frame change at time `tau`.
fn frame_angle(tau: f64, p: &OscillatorParams) -> f64 {
    p.omega0 * (tau - p.tau0)
}

/// Map rotating-frame variables to physical variables at time `tau`.
///
/// At `tau = tau0` this is the identity; it preserves
/// `omega0^2 theta^2 + v^2` exactly for all times.
pub fn rotate_to_phys(theta_hat: f64, v_hat: f64, tau: f64, p: &OscillatorParams) -> PhysState {
    let (sin_w, cos_w) = frame_angle(tau, p).sin_cos();
    PhysState {
        theta: cos_w * theta_hat + sin_w / p.omega0 * v_hat,
        v: -p.omega0 * sin_w * theta_hat + cos_w * v_hat,
    }
}

/// Map physical variables to rotating-frame variables at time `tau`.
///
/// Exact inverse of [`rotate_to_phys`] at the same `tau`.
pub fn phys_to_rotating(s: PhysState, tau: f64, p: &OscillatorParams) -> (f64, f64) {
    let (sin_w, cos_w) = frame_angle(tau, p).sin_cos();
    (
        cos_w * s.theta - sin_w / p.omega0 * s.v,
        p.omega0 * sin_w * s.theta + cos_w * s.v,
    )
}

/// Right-hand side of the enlarged slow-time system in
/// `(theta_hat, v_hat, tau_hat)`.
///
/// The swept phase is reconstructed from the state as
/// `omega0*tau - (sweep_rate/epsilon^2) * tau_hat^2 / 2`, which equals
/// `sweep_phase(tau)` whenever `tau_hat = epsilon * tau`. Requires
/// `epsilon > 0`; the returned triple is the derivative of the state.
pub fn rotating_rhs(r: RotatingState, tau: f64, p: &OscillatorParams) -> Result<RotatingState> {
    if p.epsilon == 0.0 {
        return Err(Error::DegenerateSlowTime);
    }
    let (sin_w, cos_w) = frame_angle(tau, p).sin_cos();
    let theta = cos_w * r.theta_hat + sin_w / p.omega0 * r.v_hat;
    let phase = p.omega0 * tau - 0.5 * p.sweep_rate / (p.epsilon * p.epsilon) * r.tau_hat * r.tau_hat;
    let kick = p.cubic * theta.powi(3) + p.forcing * phase.cos();
    Ok(RotatingState {
        theta_hat: -p.epsilon * kick / p.omega0 * sin_w,
        v_hat: p.epsilon * kick * cos_w,
        tau_hat: p.epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use std::f64::consts::PI;

    fn reference() -> OscillatorParams {
        OscillatorParams::default()
    }

    #[test]
    fn sweep_phase_values() {
        let p = OscillatorParams {
            sweep_rate: 0.0,
            ..reference()
        };
        assert_eq!(sweep_phase(0.0, &p), 0.0);
        assert!((sweep_phase(1.0, &p) - 2.0 * PI).abs() < 1e-15);

        let p = reference(); // sweep_rate 1e-4, omega0 2 pi
        let expected = 2000.0 * PI - 50.0;
        assert!((sweep_phase(1000.0, &p) - expected).abs() < 1e-9);
    }

    #[test]
    fn rhs_at_rest_without_forcing() {
        let p = OscillatorParams {
            forcing: 0.0,
            ..reference()
        };
        let d = duffing_rhs(PhysState { theta: 0.0, v: 0.0 }, 3.7, &p);
        assert_eq!((d.theta, d.v), (0.0, 0.0));
    }

    #[test]
    fn rhs_reduces_to_linear_oscillator() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..reference()
        };
        let d = duffing_rhs(PhysState { theta: 1.0, v: 0.0 }, 0.0, &p);
        assert_eq!(d.theta, 0.0);
        assert!((d.v + 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rhs_direct_arithmetic() {
        // theta=1, v=0, tau=0: acceleration is
        // -omega0^2 + eps*gamma + eps*B (cos of the zero phase).
        let p = OscillatorParams {
            epsilon: 0.05,
            ..reference()
        };
        let d = duffing_rhs(PhysState { theta: 1.0, v: 0.0 }, 0.0, &p);
        let expected = -4.0 * PI * PI + 0.05 * (4.0 * PI * PI / 6.0) + 0.1;
        assert_eq!(d.theta, 0.0);
        assert!((d.v - expected).abs() < 1e-12);
    }

    #[test]
    fn frame_change_is_identity_at_tau0() {
        let p = reference();
        let s = rotate_to_phys(0.3, -1.4, p.tau0, &p);
        assert_eq!((s.theta, s.v), (0.3, -1.4));
        let (th, vh) = phys_to_rotating(PhysState { theta: 0.3, v: -1.4 }, p.tau0, &p);
        assert_eq!((th, vh), (0.3, -1.4));
    }

    #[test]
    fn quarter_period_rotation() {
        let p = reference();
        let s = rotate_to_phys(1.0, 0.0, p.tau0 + 0.25 * p.period(), &p);
        assert!(s.theta.abs() < 1e-12);
        assert!((s.v + p.omega0).abs() < 1e-12);
    }

    #[test]
    fn half_period_inverse_rotation() {
        let p = reference();
        let (th, vh) = phys_to_rotating(
            PhysState { theta: 1.0, v: 0.0 },
            p.tau0 + 0.5 * p.period(),
            &p,
        );
        assert!((th + 1.0).abs() < 1e-12);
        assert!(vh.abs() < 1e-11);
    }

    #[test]
    fn rotation_matches_matrix_product() {
        let p = reference();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let th: f64 = rng.gen_range(-2.0..2.0);
            let vh: f64 = rng.gen_range(-10.0..10.0);
            let tau: f64 = rng.gen_range(-1000.0..1000.0);
            let w = p.omega0 * (tau - p.tau0);
            let expected = [
                w.cos() * th + w.sin() / p.omega0 * vh,
                -p.omega0 * w.sin() * th + w.cos() * vh,
            ];
            let got = rotate_to_phys(th, vh, tau, &p);
            assert!((got.theta - expected[0]).abs() < 1e-12);
            assert!((got.v - expected[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_change_round_trip() {
        let p = reference();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let s = PhysState {
                theta: rng.gen_range(-3.0..3.0),
                v: rng.gen_range(-20.0..20.0),
            };
            let tau: f64 = rng.gen_range(-1000.0..5000.0);
            let (th, vh) = phys_to_rotating(s, tau, &p);
            let back = rotate_to_phys(th, vh, tau, &p);
            assert!((back.theta - s.theta).abs() < 1e-12);
            assert!((back.v - s.v).abs() < 1e-11);
        }
    }

    #[test]
    fn rotation_preserves_energy_form() {
        let p = reference();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..100 {
            let th: f64 = rng.gen_range(-3.0..3.0);
            let vh: f64 = rng.gen_range(-20.0..20.0);
            let tau: f64 = rng.gen_range(-1000.0..5000.0);
            let before = p.omega0 * p.omega0 * th * th + vh * vh;
            let s = rotate_to_phys(th, vh, tau, &p);
            let after = p.omega0 * p.omega0 * s.theta * s.theta + s.v * s.v;
            assert!((after - before).abs() <= 1e-12 * before.max(1.0));
        }
    }

    #[test]
    fn rotating_rhs_at_frame_origin() {
        // At tau = tau0 the frame angle is exactly zero, and tau0 is an
        // integer number of periods so the forcing phase has cosine 1.
        let p = reference();
        let r = RotatingState {
            theta_hat: 0.0,
            v_hat: 0.0,
            tau_hat: 0.0,
        };
        let d = rotating_rhs(r, p.tau0, &p).unwrap();
        assert_eq!(d.theta_hat, 0.0);
        assert!((d.v_hat - p.epsilon * p.forcing).abs() < 1e-12);
        assert_eq!(d.tau_hat, p.epsilon);
    }

    #[test]
    fn rotating_rhs_unforced_linear_case() {
        let p = OscillatorParams {
            cubic: 0.0,
            forcing: 0.0,
            ..reference()
        };
        let d = rotating_rhs(
            RotatingState {
                theta_hat: 1.3,
                v_hat: -0.4,
                tau_hat: 2.0,
            },
            17.0,
            &p,
        )
        .unwrap();
        assert_eq!((d.theta_hat, d.v_hat, d.tau_hat), (0.0, 0.0, p.epsilon));
    }

    #[test]
    fn rotating_rhs_rejects_zero_epsilon() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..reference()
        };
        let r = RotatingState {
            theta_hat: 0.0,
            v_hat: 0.0,
            tau_hat: 0.0,
        };
        assert_eq!(rotating_rhs(r, 0.0, &p), Err(Error::DegenerateSlowTime));
    }

    #[test]
    fn rotating_rhs_is_pushforward_of_physical_rhs() {
        // With tau_hat = epsilon*tau the enlarged field must equal the
        // time-derivative of phys_to_rotating along the physical flow:
        //   d(hat)/dtau = M'(tau) (theta, v) + M(tau) (theta', v').
        let p = reference();
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..50 {
            let th: f64 = rng.gen_range(-1.0..1.0);
            let vh: f64 = rng.gen_range(-5.0..5.0);
            let tau: f64 = rng.gen_range(-500.0..500.0);
            let r = RotatingState {
                theta_hat: th,
                v_hat: vh,
                tau_hat: p.epsilon * tau,
            };
            let got = rotating_rhs(r, tau, &p).unwrap();

            let s = rotate_to_phys(th, vh, tau, &p);
            let sdot = duffing_rhs(s, tau, &p);
            let w = p.omega0 * (tau - p.tau0);
            let (sin_w, cos_w) = w.sin_cos();
            // M and dM/dtau of the inverse rotation, written out.
            let m = [[cos_w, -sin_w / p.omega0], [p.omega0 * sin_w, cos_w]];
            let md = [
                [-p.omega0 * sin_w, -cos_w],
                [p.omega0 * p.omega0 * cos_w, -p.omega0 * sin_w],
            ];
            let expect_th = md[0][0] * s.theta + md[0][1] * s.v + m[0][0] * sdot.theta + m[0][1] * sdot.v;
            let expect_vh = md[1][0] * s.theta + md[1][1] * s.v + m[1][0] * sdot.theta + m[1][1] * sdot.v;
            assert!(
                (got.theta_hat - expect_th).abs() < 1e-12,
                "theta_hat rate mismatch: {} vs {}",
                got.theta_hat,
                expect_th
            );
            assert!(
                (got.v_hat - expect_vh).abs() < 1e-11,
                "v_hat rate mismatch: {} vs {}",
                got.v_hat,
                expect_vh
            );
        }
    }
}
