//! Worked examples wired up as ready-to-analyze presets.

use crate::error::{CoreError, Result};
use crate::expr::{parse, BinOp, Expr};
use crate::field::ScalarField;
use crate::period::AnalysisSettings;

pub struct Preset {
    pub name: &'static str,
    pub field: ScalarField,
    pub settings: AnalysisSettings,
    pub default_u0: f64,
}

pub const PRESET_NAMES: [&str; 5] = ["zero", "exP1", "exDP1", "logistic", "beverton-holt"];

/// Looks up a preset by name. `beverton-holt` uses the default parameters
/// `mu = 2`, `K(t) = 8 + 2 cos(pi t) + 5/(1+t)`; see [`beverton_holt`] for
/// custom ones.
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "zero" => Ok(zero()),
        "exP1" => Ok(exp1()),
        "exDP1" => Ok(exdp1()),
        "logistic" => Ok(logistic()),
        "beverton-holt" => beverton_holt(2.0, None, None),
        other => Err(CoreError::Parameter(format!(
            "unknown preset `{other}`; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// `x' = 0`: every solution is constant, hence periodic for any period.
pub fn zero() -> Preset {
    let f = parse("0").unwrap();
    let field = ScalarField::ode(f.clone(), "zero")
        .with_decomposition(f, parse("0").unwrap(), 1.0)
        .unwrap();
    Preset {
        name: "zero",
        field,
        settings: AnalysisSettings {
            tau: 1.0,
            horizon: 200.0,
            ..Default::default()
        },
        default_u0: 0.0,
    }
}

/// `x' = cos(sqrt(pi^2 + t)) / (2 sqrt(pi^2 + t))`: the right-hand side
/// decays, so the limiting equation is `x' = 0`; the solution from 0 is
/// `sin(sqrt(pi^2 + t))`, which is S-asymptotically 2pi-periodic but not
/// asymptotically periodic.
pub fn exp1() -> Preset {
    let f = parse("cos(sqrt(pi^2+t))/(2*sqrt(pi^2+t))").unwrap();
    let field = ScalarField::ode(f.clone(), "exP1")
        .with_decomposition(parse("0").unwrap(), f, 2.0 * std::f64::consts::PI)
        .unwrap();
    Preset {
        name: "exP1",
        field,
        settings: AnalysisSettings {
            tau: 2.0 * std::f64::consts::PI,
            horizon: 4e5,
            // The residual decays like tau/(2 sqrt(t)); the default s_tol
            // would demand a far longer horizon than the structure needs.
            s_tol: 1e-2,
            s_fail: 0.5,
            ..Default::default()
        },
        default_u0: 0.0,
    }
}

/// Discrete analogue of exP1: `x(t+1) = x(t) + sin(sqrt(pi^2+t+1)) -
/// sin(sqrt(pi^2+t))` with limiting map the identity and `tau = 7`.
pub fn exdp1() -> Preset {
    let f = parse("x+sin(sqrt(pi^2+t+1))-sin(sqrt(pi^2+t))").unwrap();
    let r = parse("sin(sqrt(pi^2+t+1))-sin(sqrt(pi^2+t))").unwrap();
    let field = ScalarField::map(f, "exDP1")
        .with_decomposition(parse("x").unwrap(), r, 7.0)
        .unwrap();
    Preset {
        name: "exDP1",
        field,
        settings: AnalysisSettings {
            tau: 7.0,
            horizon: 4e5,
            s_tol: 1e-2,
            s_fail: 0.5,
            ..Default::default()
        },
        default_u0: 0.0,
    }
}

/// Autonomous logistic equation `x' = x(1-x)` viewed as 1-periodic.
pub fn logistic() -> Preset {
    let f = parse("x*(1-x)").unwrap();
    let field = ScalarField::ode(f.clone(), "logistic")
        .with_decomposition(f, parse("0").unwrap(), 1.0)
        .unwrap();
    Preset {
        name: "logistic",
        field,
        settings: AnalysisSettings {
            tau: 1.0,
            horizon: 200.0,
            fixed_point_range: Some((-0.5, 1.5)),
            ..Default::default()
        },
        default_u0: 0.5,
    }
}

/// Beverton-Holt recruitment `u(t+1) = mu K(t) u / (K(t) + (mu-1) u)` with
/// asymptotically 2-periodic carrying capacity.
///
/// `k` overrides the capacity (an expression in `t`); `k_periodic` its
/// periodic part. When only `k` is given, the periodic part is obtained by
/// pushing the capacity far forward in time, which is exact whenever the
/// aperiodic component has effectively died out by `t = 1e6`.
pub fn beverton_holt(mu: f64, k: Option<&str>, k_periodic: Option<&str>) -> Result<Preset> {
    if !(mu > 1.0) {
        return Err(CoreError::Parameter(format!(
            "beverton-holt needs mu > 1, got {mu}"
        )));
    }
    let k_src = k.unwrap_or("8+2*cos(pi*t)+5/(1+t)");
    let k_expr = parse(k_src).map_err(CoreError::Parse)?;
    let kp_expr = match (k, k_periodic) {
        (_, Some(src)) => parse(src).map_err(CoreError::Parse)?,
        (None, None) => parse("8+2*cos(pi*t)").unwrap(),
        (Some(_), None) => k_expr.shift_time(1e6),
    };

    let update = |cap: &Expr| -> Expr {
        // mu*K*x / (K + (mu-1)*x)
        let num = Expr::Bin(
            BinOp::Mul,
            Box::new(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Num(mu)),
                Box::new(cap.clone()),
            )),
            Box::new(parse("x").unwrap()),
        );
        let den = Expr::Bin(
            BinOp::Add,
            Box::new(cap.clone()),
            Box::new(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Num(mu - 1.0)),
                Box::new(parse("x").unwrap()),
            )),
        );
        Expr::Bin(BinOp::Div, Box::new(num), Box::new(den))
    };

    let f = update(&k_expr);
    let p = update(&kp_expr);
    let r = Expr::Bin(BinOp::Sub, Box::new(f.clone()), Box::new(p.clone()));
    let field = ScalarField::map(f, "beverton-holt").with_decomposition(p, r, 2.0)?;
    Ok(Preset {
        name: "beverton-holt",
        field,
        settings: AnalysisSettings {
            tau: 2.0,
            // The capacity perturbation decays only like 1/t, so the
            // iterate tail needs a long run to settle below conv_tol.
            horizon: 2e6,
            fixed_point_range: Some((0.1, 30.0)),
            ..Default::default()
        },
        default_u0: 3.0,
    })
}
