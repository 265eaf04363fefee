//! Solution operators: exact map iteration and the cocycle identity check.

use crate::error::{CoreError, Result};
use crate::field::{FieldKind, ScalarField};
use crate::integrator::{integrate, IntegratorConfig};
use crate::trajectory::Trajectory;

/// Exact forward iteration of `x(t+1) = f(t, x(t))` for `n` steps, with
/// blow-up detection via `cfg.x_max`.
pub fn iterate_map(
    field: &ScalarField,
    u0: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if field.kind != FieldKind::Map {
        return Err(CoreError::Parameter(
            "iterate_map requires a map field".into(),
        ));
    }
    let mut values = Vec::with_capacity(n + 1);
    values.push(u0);
    let mut x = u0;
    let mut blew_up = None;
    if x.abs() >= cfg.x_max {
        return Ok(Trajectory::new_map(0, values, Some(0.0), cfg.x_max));
    }
    for k in 0..n {
        x = field.eval(k as f64, x).map_err(|e| CoreError::MapStep {
            step: k,
            x,
            reason: e.to_string(),
        })?;
        values.push(x);
        if !x.is_finite() || x.abs() >= cfg.x_max {
            blew_up = Some((k + 1) as f64);
            break;
        }
    }
    Ok(Trajectory::new_map(0, values, blew_up, cfg.x_max))
}

/// Produces the solution trajectory of `field` (ODE or map) from `u0` over
/// `[0, horizon]`. For maps the horizon is rounded down to an iteration
/// count.
pub fn solve(field: &ScalarField, u0: f64, horizon: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    match field.kind {
        FieldKind::Ode => integrate(field, u0, 0.0, horizon, cfg),
        FieldKind::Map => iterate_map(field, u0, horizon.floor() as usize, cfg),
    }
}

/// Residual of the cocycle identity
/// `phi(t+s, u0, f) = phi(t, phi(s, u0, f), f^s)`,
/// computed by two independent integration routes.
pub fn verify_cocycle(
    field: &ScalarField,
    u0: f64,
    s: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(CoreError::Parameter("s and t must be nonnegative".into()));
    }
    match field.kind {
        FieldKind::Ode => {
            let direct = if s + t > 0.0 {
                integrate(field, u0, 0.0, s + t, cfg)?.final_value()
            } else {
                u0
            };
            let mid = if s > 0.0 {
                integrate(field, u0, 0.0, s, cfg)?.final_value()
            } else {
                u0
            };
            let shifted = field.shifted(s);
            let via = if t > 0.0 {
                integrate(&shifted, mid, 0.0, t, cfg)?.final_value()
            } else {
                mid
            };
            Ok((direct - via).abs())
        }
        FieldKind::Map => {
            let (s, t) = (s.round() as usize, t.round() as usize);
            let direct = iterate_map(field, u0, s + t, cfg)?.final_value();
            let mid = iterate_map(field, u0, s, cfg)?.final_value();
            let shifted = field.shifted(s as f64);
            let via = iterate_map(&shifted, mid, t, cfg)?.final_value();
            Ok((direct - via).abs())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    #[test]
    fn identity_map_constant() {
        let f = ScalarField::map(parse("x").unwrap(), "id");
        let traj = iterate_map(&f, 7.0, 100, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.len(), 101);
        for (_, x, _) in traj.nodes() {
            assert_eq!(x, 7.0);
        }
    }

    #[test]
    fn beverton_holt_monotone_to_capacity() {
        let f = ScalarField::map(parse("2*100*x/(100+x)").unwrap(), "bh-const");
        let traj = iterate_map(&f, 1.0, 300, &IntegratorConfig::default()).unwrap();
        let nodes = traj.nodes();
        for w in nodes.windows(2) {
            assert!(w[1].1 >= w[0].1, "sequence must be nondecreasing");
        }
        assert!((traj.final_value() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn exdp1_sum_matches_closed_form() {
        // x(k+1) = x(k) + A(k) with A(k) the increment of sin(sqrt(pi^2+k));
        // the telescoping sum gives x(k) = sin(sqrt(pi^2+k)) exactly.
        let f = ScalarField::map(
            parse("x+sin(sqrt(pi^2+t+1))-sin(sqrt(pi^2+t))").unwrap(),
            "exDP1",
        );
        let traj = iterate_map(&f, 0.0, 1000, &IntegratorConfig::default()).unwrap();
        for k in [10_usize, 100, 1000] {
            let exact = (PI * PI + k as f64).sqrt().sin();
            let got = traj.sample(k as f64).unwrap();
            assert!((got - exact).abs() < 1e-12, "k={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn map_iteration_bit_exact_reproducible() {
        let f = ScalarField::map(parse("2*(8+2*cos(pi*t))*x/((8+2*cos(pi*t))+x)").unwrap(), "bh");
        let a = iterate_map(&f, 5.0, 500, &IntegratorConfig::default()).unwrap();
        let b = iterate_map(&f, 5.0, 500, &IntegratorConfig::default()).unwrap();
        let na = a.nodes();
        let nb = b.nodes();
        assert_eq!(na.len(), nb.len());
        for (p, q) in na.iter().zip(nb.iter()) {
            assert_eq!(p.1.to_bits(), q.1.to_bits());
        }
    }

    #[test]
    fn map_blow_up_flag() {
        let f = ScalarField::map(parse("x*2").unwrap(), "doubling");
        let cfg = IntegratorConfig {
            x_max: 1e3,
            ..Default::default()
        };
        let traj = iterate_map(&f, 1.0, 100, &cfg).unwrap();
        assert!(traj.blew_up.is_some());
        assert!(traj.final_value().abs() >= 1e3);
    }

    #[test]
    fn cocycle_zero_field_exact() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let r = verify_cocycle(&f, 4.0, 1.5, 2.5, &IntegratorConfig::default()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn cocycle_exponential() {
        let f = ScalarField::ode(parse("x").unwrap(), "exp");
        let r = verify_cocycle(&f, 1.0, 1.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(r <= 1e-8, "residual {r}");
    }

    #[test]
    fn cocycle_exp1_long() {
        let f = ScalarField::ode(parse("cos(sqrt(pi^2+t))/(2*sqrt(pi^2+t))").unwrap(), "exP1");
        let r = verify_cocycle(&f, 0.0, 100.0, 100.0, &IntegratorConfig::default()).unwrap();
        assert!(r <= 1e-6, "residual {r}");
    }
}
