//! Adaptive Dormand-Prince 5(4) integration with 4th-order dense output.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::trajectory::{OdeStep, Trajectory};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Blow-up threshold: the trajectory is truncated once |x| reaches it.
    pub x_max: f64,
    pub max_steps: u64,
    /// Absolute step-size floor. `None` selects 1e-13 times the horizon.
    pub min_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            x_max: 1e8,
            max_steps: 1_000_000_000,
            min_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(CoreError::Config("tolerances must be positive".into()));
        }
        if self.x_max <= 0.0 {
            return Err(CoreError::Config("x_max must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(CoreError::Config("max_steps must be at least 1".into()));
        }
        if let Some(ms) = self.min_step {
            if ms <= 0.0 {
                return Err(CoreError::Config("min_step must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn effective_min_step(&self, span: f64) -> f64 {
        self.min_step.unwrap_or(1e-13 * span)
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last row of A (FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `x' = f(t, x)` from `(t0, u0)` to `t_end`.
///
/// Local error is kept below `rel_tol`/`abs_tol` per step; each accepted step
/// stores dense-output coefficients so the trajectory can be sampled
/// anywhere. Truncates with the blow-up flag once |x| reaches `x_max`.
pub fn integrate(
    field: &ScalarField,
    u0: f64,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(CoreError::Parameter(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    if field.kind != crate::field::FieldKind::Ode {
        return Err(CoreError::Parameter(
            "integrate requires an ODE field".into(),
        ));
    }

    let span = t_end - t0;
    let min_step = cfg.effective_min_step(span);
    let mut t = t0;
    let mut x = u0;
    let mut dx = field.eval(t, x).map_err(|e| integration_err(t, x, e))?;
    let mut h = initial_step(span, x, dx, cfg);
    let mut steps: Vec<OdeStep> = Vec::new();
    let mut n_steps: u64 = 0;
    let mut blew_up = None;

    if x.abs() >= cfg.x_max {
        return Ok(Trajectory::new_ode(
            t0,
            steps,
            t0,
            x,
            dx,
            Some(t0),
            cfg.rel_tol,
        ));
    }

    while t < t_end {
        if n_steps >= cfg.max_steps {
            return Err(CoreError::Integration {
                t,
                x,
                reason: format!("max_steps ({}) exceeded", cfg.max_steps),
            });
        }
        if h < min_step {
            return Err(CoreError::Integration {
                t,
                x,
                reason: format!("step size underflow ({h} < {min_step})"),
            });
        }
        let h_trial = h.min(t_end - t);

        let mut ks = [0.0_f64; 7];
        ks[0] = dx;
        let mut stage_err: Option<CoreError> = None;
        for s in 1..7 {
            let mut acc = 0.0;
            for (j, &k) in ks.iter().enumerate().take(s) {
                acc += A[s][j] * k;
            }
            let ts = t + C[s] * h_trial;
            let xs = x + h_trial * acc;
            match field.eval(ts, xs) {
                Ok(v) => ks[s] = v,
                Err(e) => {
                    stage_err = Some(integration_err(t, x, e));
                    break;
                }
            }
        }
        if let Some(e) = stage_err {
            return Err(e);
        }

        // 5th-order solution (b == A[6]); ks[6] was evaluated at it (FSAL).
        let mut bsum = 0.0;
        for (j, &k) in ks.iter().enumerate().take(6) {
            bsum += A[6][j] * k;
        }
        let x1 = x + h_trial * bsum;

        let mut esum = 0.0;
        for (j, &k) in ks.iter().enumerate() {
            esum += E[j] * k;
        }
        let err_abs = (h_trial * esum).abs();
        let scale = cfg.abs_tol + cfg.rel_tol * x.abs().max(x1.abs());
        let err = err_abs / scale;

        if err <= 1.0 && x1.is_finite() {
            n_steps += 1;
            let ydiff = x1 - x;
            let bspl = h_trial * ks[0] - ydiff;
            let mut dsum = 0.0;
            for (j, &k) in ks.iter().enumerate() {
                dsum += D[j] * k;
            }
            let cont = [
                x,
                ydiff,
                bspl,
                ydiff - h_trial * ks[6] - bspl,
                h_trial * dsum,
            ];
            steps.push(OdeStep {
                t,
                h: h_trial,
                x,
                dx: ks[0],
                cont,
            });
            t += h_trial;
            x = x1;
            dx = ks[6];
            if x.abs() >= cfg.x_max {
                blew_up = Some(t);
                break;
            }
            let factor = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
            };
            h = h_trial * factor;
        } else if x1.is_finite() {
            h = h_trial * (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
        } else {
            h = h_trial * 0.1;
        }
    }

    Ok(Trajectory::new_ode(
        t0,
        steps,
        t,
        x,
        dx,
        blew_up,
        cfg.rel_tol,
    ))
}

fn initial_step(span: f64, x: f64, dx: f64, cfg: &IntegratorConfig) -> f64 {
    let scale = cfg.abs_tol + cfg.rel_tol * x.abs().max(1.0);
    let by_slope = if dx.abs() > 0.0 {
        0.01 * (scale / dx.abs()).powf(0.2).min(1.0) * span.min(1.0).max(1e-3)
    } else {
        1e-4 * span
    };
    by_slope.min(1e-2 * span).max(cfg.effective_min_step(span))
}

fn integration_err(t: f64, x: f64, e: CoreError) -> CoreError {
    CoreError::Integration {
        t,
        x,
        reason: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::field::ScalarField;
    use std::f64::consts::PI;

    #[test]
    fn constant_solution() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let traj = integrate(&f, 3.0, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        for t in [0.0, 2.5, 4.71, 10.0] {
            assert_eq!(traj.sample(t).unwrap(), 3.0);
        }
        assert!(traj.blew_up.is_none());
    }

    #[test]
    fn exponential_growth() {
        let f = ScalarField::ode(parse("x").unwrap(), "exp");
        let traj = integrate(&f, 1.0, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        let v = traj.sample(1.0).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn exp1_long_horizon_matches_closed_form() {
        let f = ScalarField::ode(parse("cos(sqrt(pi^2+t))/(2*sqrt(pi^2+t))").unwrap(), "exP1");
        let traj = integrate(&f, 0.0, 0.0, 1e4, &IntegratorConfig::default()).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..=100 {
            let t = 1e4 * i as f64 / 100.0;
            let exact = (PI * PI + t).sqrt().sin();
            let got = traj.sample(t).unwrap();
            worst = worst.max((got - exact).abs());
        }
        assert!(worst < 1e-6, "sup error {worst}");
    }

    #[test]
    fn exp1_dense_sample_mid_horizon() {
        let f = ScalarField::ode(parse("cos(sqrt(pi^2+t))/(2*sqrt(pi^2+t))").unwrap(), "exP1");
        let traj = integrate(&f, 0.0, 0.0, 2e3, &IntegratorConfig::default()).unwrap();
        let t = 1e3;
        let exact = (PI * PI + t).sqrt().sin();
        assert!((traj.sample(t).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn blow_up_truncates_with_flag() {
        let f = ScalarField::ode(parse("x^2").unwrap(), "blowup");
        let cfg = IntegratorConfig {
            x_max: 1e6,
            ..Default::default()
        };
        let traj = integrate(&f, 1.0, 0.0, 2.0, &cfg).unwrap();
        let t_blow = traj.blew_up.expect("should blow up");
        // x' = x^2 from 1 escapes at t = 1.
        assert!((t_blow - 1.0).abs() < 1e-3, "blow-up at {t_blow}");
        assert!(traj.final_value().abs() >= 1e6);
    }

    #[test]
    fn interpolation_exact_at_nodes() {
        let f = ScalarField::ode(parse("sin(t)*x").unwrap(), "wavy");
        let traj = integrate(&f, 1.0, 0.0, 5.0, &IntegratorConfig::default()).unwrap();
        for (t, x, _) in traj.nodes() {
            assert_eq!(traj.sample(t).unwrap(), x);
        }
    }

    #[test]
    fn domain_error_carries_state() {
        let f = ScalarField::ode(parse("sqrt(1-t)").unwrap(), "sqrt");
        let err = integrate(&f, 0.0, 0.0, 2.0, &IntegratorConfig::default()).unwrap_err();
        match err {
            CoreError::Integration { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }
}
