//! Explicit Runge–Kutta integration.
//!
//! [`adaptive_integrate`] drives Verner's efficient 6(5) embedded pair with a
//! continuous 5th-order interpolant, so requested output times are served by
//! dense output and never by bending the step-size controller. [`fixed_rk4`]
//! is the classical fixed-step method, kept as a diagnostic baseline.

use crate::error::{Error, Result};

/// Settings for the adaptive macro-integrator.
///
/// `output_times` must be strictly monotone in the direction of integration
/// and contained in the span; when empty, only the span endpoint is emitted.
#[derive(Debug, Clone)]
pub struct MacroConfig {
    /// Relative tolerance of the mixed per-component error test.
    pub rel_tol: f64,
    /// Absolute tolerance of the mixed per-component error test.
    pub abs_tol: f64,
    /// Starting step size; estimated from the initial derivative when `None`.
    pub initial_step: Option<f64>,
    /// Hard cap on attempted steps.
    pub max_steps: usize,
    /// Times at which the solution is emitted, via dense output.
    pub output_times: Vec<f64>,
    /// Safety factor of the step controller.
    pub safety: f64,
    /// Smallest allowed step shrink factor per step.
    pub min_scale: f64,
    /// Largest allowed step growth factor per step.
    pub max_scale: f64,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            initial_step: None,
            max_steps: 50_000_000,
            output_times: Vec::new(),
            safety: 0.9,
            min_scale: 0.2,
            max_scale: 10.0,
        }
    }
}

impl MacroConfig {
    /// Config with equal absolute and relative tolerances.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            ..Self::default()
        }
    }

    /// Same, plus output times.
    pub fn with_tol_and_outputs(tol: f64, output_times: Vec<f64>) -> Self {
        Self {
            output_times,
            ..Self::with_tol(tol)
        }
    }
}

/// Work counters for one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

/// Time-stamped solution samples.
///
/// `times` is strictly monotone in the direction of integration and every
/// state has the fixed dimension `N`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub stats: IntegrationStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn last_state(&self) -> [f64; N] {
        *self.states.last().expect("empty trajectory")
    }

    /// Map every state through `f`, keeping times and stats.
    pub fn map_states<const M: usize>(&self, mut f: impl FnMut(f64, &[f64; N]) -> [f64; M]) -> Trajectory<M> {
        Trajectory {
            times: self.times.clone(),
            states: self
                .times
                .iter()
                .zip(&self.states)
                .map(|(&t, y)| f(t, y))
                .collect(),
            stats: self.stats,
        }
    }
}

// Verner's "most efficient" 6(5) pair (RKV65.IIIXb): 9 stages, 6th-order
// propagated solution, embedded 5th-order error estimate, and a 5th-order
// continuous extension that needs one extra stage at the step midpoint.
const STAGES: usize = 9;
const DENSE_STAGES: usize = 10;
const ERR_EXP: f64 = 1.0 / 6.0;

#[rustfmt::skip]
const A: [[f64; STAGES]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.06, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.019239962962962962, 0.07669337037037037, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.035975, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.3186834152331484, 0.0, -5.042058063628562, 4.220674648395414, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-41.872591664327516, 0.0, 159.4325621631375, -122.11921356501003, 5.531743066200054, 0.0, 0.0, 0.0, 0.0],
    [-54.430156935316504, 0.0, 207.06725136501848, -158.61081378459, 6.991816585950242, -0.018597231062203234, 0.0, 0.0, 0.0],
    [-54.66374178728198, 0.0, 207.95280625538936, -159.2889574744995, 7.018743740796944, -0.018338785905045722, -5.119484997882099e-4, 0.0, 0.0],
    [0.03438957868357036, 0.0, 0.0, 0.2582624555633503, 0.4209371189673537, 4.40539646966931, -176.48311902429865, 172.36413340141507, 0.0],
];

#[rustfmt::skip]
const B_HIGH: [f64; STAGES] = [
    0.03438957868357036, 0.0, 0.0, 0.2582624555633503, 0.4209371189673537,
    4.40539646966931, -176.48311902429865, 172.36413340141507, 0.0,
];

#[rustfmt::skip]
const B_LOW: [f64; STAGES] = [
    0.0490996764838249, 0.0, 0.0, 0.22511122295165242, 0.4694682253029562,
    0.8065792249988868, 0.0, -0.607119489177796, 0.056861139440475696,
];

#[rustfmt::skip]
const C: [f64; STAGES] = [
    0.0, 0.06, 0.09593333333333333, 0.1439, 0.4973, 0.9725, 0.9995, 1.0, 1.0,
];

// Extra interpolation stage at the step midpoint.
const C_DENSE: f64 = 0.5;

#[rustfmt::skip]
const A_DENSE: [f64; DENSE_STAGES] = [
    0.016524159013572806, 0.0, 0.0, 0.3053128187514179, 0.2071200938201979,
    -1.293879140655123, 57.11988411588149, -55.87979207510932, 0.024830028297766014, 0.0,
];

// Interpolation weights: stage i contributes s * sum_j B_DENSE[i][j] * s^j.
#[rustfmt::skip]
const B_DENSE: [[f64; 6]; DENSE_STAGES] = [
    [1.0, -5.308169607103577, 10.18168044895868, -7.520036991611715, 0.9340485368631161, 0.746867191577065],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 6.272050253212501, -16.02618147467746, 12.844356324519618, -1.1487945044767591, -1.6831681430145498],
    [0.0, 6.876491702846304, -24.635767260846333, 33.21078648379717, -17.49461528263644, 2.4640414758066496],
    [0.0, -35.5444517105996, 165.7016170190242, -385.4635395491143, 442.43241370157017, -182.7206429912112],
    [0.0, 1918.6548566980114, -9268.121508966042, 20858.33702877255, -22645.82767158481, 8960.474176055992],
    [0.0, -1883.0698021327182, 9101.025187200634, -20473.188551959534, 22209.765551256532, -8782.1682509635],
    [0.0, 0.11902479635123643, -0.12502696705039376, 1.7799569193949991, -4.660932123043763, 2.886977374347921],
    [0.0, -8.0, 32.0, -40.0, 16.0, 0.0],
];

fn is_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Outcome of one attempted step, before acceptance.
struct StepAttempt<const N: usize> {
    y_high: [f64; N],
    err_norm: f64,
    k: [[f64; N]; STAGES],
}

/// One trial step of the embedded pair. `k0` must hold `rhs(t, y)`.
fn rk_attempt<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    k0: [f64; N],
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> StepAttempt<N> {
    let mut k = [[0.0; N]; STAGES];
    k[0] = k0;
    for i in 1..STAGES {
        let mut y_stage = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            let a = A[i][j];
            if a != 0.0 {
                for n in 0..N {
                    y_stage[n] += h * a * kj[n];
                }
            }
        }
        k[i] = rhs(t + C[i] * h, &y_stage);
    }

    let mut y_high = *y;
    let mut y_low = *y;
    for (i, ki) in k.iter().enumerate() {
        for n in 0..N {
            y_high[n] += h * B_HIGH[i] * ki[n];
            y_low[n] += h * B_LOW[i] * ki[n];
        }
    }

    let mut err_norm: f64 = 0.0;
    for n in 0..N {
        let scale = abs_tol + rel_tol * y[n].abs().max(y_high[n].abs());
        err_norm = err_norm.max(((y_high[n] - y_low[n]) / scale).abs());
    }

    StepAttempt { y_high, err_norm, k }
}

/// The extra midpoint stage required by the interpolant.
fn dense_stage<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
    k: &[[f64; N]; STAGES],
) -> [f64; N] {
    let mut y_stage = *y;
    for (i, ki) in k.iter().enumerate() {
        let a = A_DENSE[i];
        if a != 0.0 {
            for n in 0..N {
                y_stage[n] += h * a * ki[n];
            }
        }
    }
    rhs(t + C_DENSE * h, &y_stage)
}

/// Evaluate the interpolant at fraction `s` of the step from `y`.
fn dense_eval<const N: usize>(
    y: &[f64; N],
    h: f64,
    k: &[[f64; N]; STAGES],
    k_dense: &[f64; N],
    s: f64,
) -> [f64; N] {
    let mut out = *y;
    for i in 0..DENSE_STAGES {
        let b = &B_DENSE[i];
        let mut w = b[5];
        for j in (0..5).rev() {
            w = w * s + b[j];
        }
        w *= s;
        if w != 0.0 {
            let ki = if i < STAGES { &k[i] } else { k_dense };
            for n in 0..N {
                out[n] += h * w * ki[n];
            }
        }
    }
    out
}

/// Hairer-style starting step estimate; costs two extra derivative
/// evaluations.
fn initial_step<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    span_len: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let sc = |y: &[f64; N], i: usize| abs_tol + rel_tol * y[i].abs();
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..N {
        d0 += (y0[i] / sc(y0, i)).powi(2);
        d1 += (f0[i] / sc(y0, i)).powi(2);
    }
    d0 = (d0 / N as f64).sqrt();
    d1 = (d1 / N as f64).sqrt();

    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(span_len);

    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += dir * h0 * f0[i];
    }
    let f1 = rhs(t0 + dir * h0, &y1);
    let mut d2: f64 = 0.0;
    for i in 0..N {
        d2 += ((f1[i] - f0[i]) / sc(y0, i)).powi(2);
    }
    d2 = (d2 / N as f64).sqrt() / h0;

    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(ERR_EXP)
    };
    h1.min(100.0 * h0).min(span_len)
}

/// Integrate `dy/dt = rhs(t, y)` over `span` with the embedded 6(5) pair.
///
/// States are emitted at exactly `cfg.output_times` through the continuous
/// extension of each accepted step; the step sequence is chosen by the error
/// controller alone. Both directions of integration are supported.
pub fn adaptive_integrate<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    span: (f64, f64),
    cfg: &MacroConfig,
) -> Result<Trajectory<N>> {
    let (t0, t_end) = span;
    if t0 == t_end || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "degenerate span ({t0}, {t_end})"
        )));
    }
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0) {
        return Err(Error::InvalidConfig(
            "tolerances must be positive".to_string(),
        ));
    }
    if !is_finite(&y0) {
        return Err(Error::Divergence { t: t0 });
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let span_len = (t_end - t0).abs();

    // Default to endpoint-only output.
    let owned_end = [t_end];
    let outputs: &[f64] = if cfg.output_times.is_empty() {
        &owned_end
    } else {
        &cfg.output_times
    };
    for w in outputs.windows(2) {
        if (w[1] - w[0]) * dir <= 0.0 {
            return Err(Error::InvalidConfig(
                "output_times must be strictly monotone in the integration direction".to_string(),
            ));
        }
    }
    if (outputs[0] - t0) * dir < 0.0 || (t_end - outputs[outputs.len() - 1]) * dir < 0.0 {
        return Err(Error::InvalidConfig(
            "output_times must lie within the span".to_string(),
        ));
    }

    let mut traj = Trajectory::default();
    let mut t = t0;
    let mut y = y0;
    let mut k0 = rhs(t, &y);
    traj.stats.rhs_evals += 1;
    if !is_finite(&k0) {
        return Err(Error::Divergence { t });
    }

    let mut out_idx = 0;
    while out_idx < outputs.len() && (outputs[out_idx] - t0) * dir <= 0.0 {
        traj.times.push(outputs[out_idx]);
        traj.states.push(y);
        out_idx += 1;
    }

    let mut h = match cfg.initial_step {
        Some(h0) => {
            if !(h0 > 0.0) {
                return Err(Error::InvalidConfig(
                    "initial_step must be positive".to_string(),
                ));
            }
            h0.min(span_len)
        }
        None => {
            let h0 = initial_step(&mut rhs, t, &y, &k0, dir, span_len, cfg.abs_tol, cfg.rel_tol);
            traj.stats.rhs_evals += 2;
            h0
        }
    };

    let mut rejected_last = false;
    loop {
        if traj.stats.steps_accepted + traj.stats.steps_rejected >= cfg.max_steps {
            return Err(Error::BudgetExhausted {
                t,
                max_steps: cfg.max_steps,
            });
        }
        // Round-off floor relative to the current position on the time axis.
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(span_len);
        if h < h_floor {
            return Err(Error::StepSizeUnderflow { t });
        }

        let last = (t + dir * h - t_end) * dir >= 0.0;
        let h_step = if last { (t_end - t).abs() } else { h };
        let t_new = if last { t_end } else { t + dir * h_step };

        let attempt = rk_attempt(
            &mut rhs,
            t,
            &y,
            k0,
            dir * h_step,
            cfg.abs_tol,
            cfg.rel_tol,
        );
        traj.stats.rhs_evals += STAGES - 1;

        if !attempt.err_norm.is_finite() {
            return Err(Error::Divergence { t });
        }

        if attempt.err_norm <= 1.0 {
            // Accepted: serve every output time inside this step.
            let mut k_dense: Option<[f64; N]> = None;
            while out_idx < outputs.len() && (outputs[out_idx] - t_new) * dir <= 0.0 {
                let t_out = outputs[out_idx];
                let state = if t_out == t_new {
                    attempt.y_high
                } else {
                    let kd = *k_dense.get_or_insert_with(|| {
                        traj.stats.rhs_evals += 1;
                        dense_stage(&mut rhs, t, &y, dir * h_step, &attempt.k)
                    });
                    let s = (t_out - t) / (dir * h_step);
                    dense_eval(&y, dir * h_step, &attempt.k, &kd, s)
                };
                traj.times.push(t_out);
                traj.states.push(state);
                out_idx += 1;
            }

            t = t_new;
            y = attempt.y_high;
            k0 = attempt.k[STAGES - 1]; // FSAL: last stage sits at (t_new, y_high)
            traj.stats.steps_accepted += 1;
            if !is_finite(&y) {
                return Err(Error::Divergence { t });
            }

            if last {
                return Ok(traj);
            }
            let mut scale = cfg.safety * attempt.err_norm.powf(-ERR_EXP);
            scale = scale.clamp(cfg.min_scale, cfg.max_scale);
            if rejected_last {
                scale = scale.min(1.0);
            }
            rejected_last = false;
            h = h_step * scale;
        } else {
            traj.stats.steps_rejected += 1;
            rejected_last = true;
            let scale = (cfg.safety * attempt.err_norm.powf(-ERR_EXP)).max(cfg.min_scale);
            h = h_step * scale.min(1.0);
        }
    }
}

/// Classical 4th-order Runge–Kutta with a uniform step.
///
/// `h` must divide the span length to within round-off; all nodes are
/// emitted.
pub fn fixed_rk4<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    span: (f64, f64),
    h: f64,
) -> Result<Trajectory<N>> {
    let (t0, t_end) = span;
    if t0 == t_end {
        return Err(Error::InvalidConfig("degenerate span".to_string()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidConfig("step must be positive".to_string()));
    }
    let len = t_end - t0;
    let n = (len / (h * len.signum())).round();
    if n < 1.0 || ((n * h * len.signum() - len) / len).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "step {h} does not divide the span length {len}"
        )));
    }
    let n = n as usize;
    let hs = h * len.signum();

    let mut traj = Trajectory::default();
    let mut y = y0;
    traj.times.push(t0);
    traj.states.push(y);
    for i in 0..n {
        let t = t0 + i as f64 * hs;
        let k1 = rhs(t, &y);
        let mut y2 = y;
        for n in 0..N {
            y2[n] += 0.5 * hs * k1[n];
        }
        let k2 = rhs(t + 0.5 * hs, &y2);
        let mut y3 = y;
        for n in 0..N {
            y3[n] += 0.5 * hs * k2[n];
        }
        let k3 = rhs(t + 0.5 * hs, &y3);
        let mut y4 = y;
        for n in 0..N {
            y4[n] += hs * k3[n];
        }
        let k4 = rhs(t + hs, &y4);
        for n in 0..N {
            y[n] += hs / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
        }
        traj.stats.rhs_evals += 4;
        traj.stats.steps_accepted += 1;
        if !is_finite(&y) {
            return Err(Error::Divergence { t: t + hs });
        }
        let t_next = if i + 1 == n {
            t_end
        } else {
            t0 + (i + 1) as f64 * hs
        };
        traj.times.push(t_next);
        traj.states.push(y);
    }
    Ok(traj)
}
