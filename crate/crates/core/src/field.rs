//! Right-hand sides `f(t, x)` of scalar ODEs and difference equations,
//! optionally decomposed as a `tau`-periodic part plus a decaying remainder.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Ode,
    Map,
}

/// `f(t,x) = P(t,x) + R(t,x)` with `P` periodic of period `tau` and `R`
/// vanishing at infinity.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub periodic: Expr,
    pub decaying: Expr,
    pub tau: f64,
}

/// An evaluatable right-hand side. `time_shift` realizes the translated
/// field `f^h(t,x) = f(t+h, x)` without rewriting the expression.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub kind: FieldKind,
    pub f: Expr,
    pub decomposition: Option<Decomposition>,
    pub label: String,
    time_shift: f64,
}

impl ScalarField {
    pub fn ode(f: Expr, label: impl Into<String>) -> Self {
        ScalarField {
            kind: FieldKind::Ode,
            f,
            decomposition: None,
            label: label.into(),
            time_shift: 0.0,
        }
    }

    pub fn map(f: Expr, label: impl Into<String>) -> Self {
        ScalarField {
            kind: FieldKind::Map,
            f,
            decomposition: None,
            label: label.into(),
            time_shift: 0.0,
        }
    }

    /// Attaches the decomposition `f = P + R`. For maps, `tau` must be a
    /// positive integer.
    pub fn with_decomposition(mut self, periodic: Expr, decaying: Expr, tau: f64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(CoreError::Config("tau must be positive".into()));
        }
        if self.kind == FieldKind::Map && tau.fract() != 0.0 {
            return Err(CoreError::Config(format!(
                "tau must be a positive integer for difference equations, got {tau}"
            )));
        }
        self.decomposition = Some(Decomposition {
            periodic,
            decaying,
            tau,
        });
        Ok(self)
    }

    pub fn time_shift(&self) -> f64 {
        self.time_shift
    }

    /// Evaluates `f(t, x)` (with the stored time shift applied).
    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        let ts = t + self.time_shift;
        self.f
            .eval(ts, x)
            .map_err(|source| CoreError::Eval { t: ts, x, source })
    }

    /// Evaluates the periodic part `P(t, x)` of the decomposition.
    pub fn eval_periodic(&self, t: f64, x: f64) -> Result<f64> {
        let decomp = self.decomposition.as_ref().ok_or_else(|| {
            CoreError::Config(format!("field `{}` has no decomposition", self.label))
        })?;
        let ts = t + self.time_shift;
        decomp
            .periodic
            .eval(ts, x)
            .map_err(|source| CoreError::Eval { t: ts, x, source })
    }

    /// The translated field `f^h(t,x) := f(t+h, x)`; the decomposition is
    /// shifted consistently.
    pub fn shifted(&self, h: f64) -> ScalarField {
        let mut out = self.clone();
        out.time_shift += h;
        out
    }

    /// The limiting periodic equation `x' = P(t, x)` (or the periodic map).
    /// Falls back to the field itself when no decomposition is attached; in
    /// that case the caller is expected to have verified `tau`-periodicity.
    pub fn limiting(&self) -> ScalarField {
        match &self.decomposition {
            Some(d) => {
                let mut out = self.clone();
                out.f = d.periodic.clone();
                out.decomposition = Some(d.clone());
                out.label = format!("{} (limiting)", self.label);
                out
            }
            None => self.clone(),
        }
    }

    /// Spot-checks on a sampled grid that `f = P + R` and that `P` is
    /// `tau`-periodic, both to relative tolerance 1e-12.
    pub fn validate_decomposition(&self, t_grid: &[f64], x_grid: &[f64]) -> Result<()> {
        let decomp = self
            .decomposition
            .as_ref()
            .ok_or_else(|| CoreError::Config("no decomposition to validate".into()))?;
        for &t in t_grid {
            for &x in x_grid {
                let f = self.eval(t, x)?;
                let p = self.eval_periodic(t, x)?;
                let ts = t + self.time_shift;
                let r = decomp
                    .decaying
                    .eval(ts, x)
                    .map_err(|source| CoreError::Eval { t: ts, x, source })?;
                if (f - (p + r)).abs() > 1e-12 * (1.0 + f.abs()) {
                    return Err(CoreError::Config(format!(
                        "decomposition mismatch at (t={t}, x={x}): f={f}, P+R={}",
                        p + r
                    )));
                }
                let p_shift = self.eval_periodic(t + decomp.tau, x)?;
                if (p_shift - p).abs() > 1e-12 * (1.0 + p.abs()) {
                    return Err(CoreError::Config(format!(
                        "periodic part is not tau-periodic at (t={t}, x={x})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spot-checks `tau`-periodicity of `f` itself on a sampled grid.
    pub fn is_sampled_periodic(&self, tau: f64, t_grid: &[f64], x_grid: &[f64]) -> bool {
        for &t in t_grid {
            for &x in x_grid {
                let (Ok(a), Ok(b)) = (self.eval(t, x), self.eval(t + tau, x)) else {
                    return false;
                };
                if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                    return false;
                }
            }
        }
        true
    }
}
