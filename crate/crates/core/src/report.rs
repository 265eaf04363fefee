//! JSON report schema and CSV series writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ScalarField;
use crate::period::{AnalysisSettings, Stability, Verdict};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPointJson {
    pub u: f64,
    pub stability: Stability,
    pub transverse: bool,
    pub isolation_gap: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub s_tol: f64,
    pub s_fail: f64,
    pub conv_tol: f64,
    pub div_threshold: f64,
    pub tail_fraction: f64,
    pub root_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    #[serde(rename = "schema")]
    pub schema_version: String,
    pub label: String,
    pub verdict: Verdict,
    pub tau: f64,
    pub u0: f64,
    pub horizon: f64,
    pub residual_tail_sup: f64,
    pub iterate_tail_span: f64,
    pub iterate_limit: Option<f64>,
    pub delta: DeltaEstimate,
    pub fixed_points: Vec<FixedPointJson>,
    pub tolerances: Tolerances,
    pub notes: Vec<String>,
    /// Optional embedded chain-recurrence summary.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chain: Option<serde_json::Value>,
}

impl ClassificationReport {
    /// A report carrying only the verdict and diagnostics, used when the
    /// pipeline stops before any series exists (failed integration,
    /// blow-up).
    pub fn bare(
        field: &ScalarField,
        u0: f64,
        settings: &AnalysisSettings,
        verdict: Verdict,
        tolerances: Tolerances,
        notes: Vec<String>,
    ) -> Self {
        ClassificationReport {
            schema_version: crate::REPORT_SCHEMA_VERSION.to_string(),
            label: field.label.clone(),
            verdict,
            tau: settings.tau,
            u0,
            horizon: settings.horizon,
            residual_tail_sup: f64::NAN,
            iterate_tail_span: f64::NAN,
            iterate_limit: None,
            delta: DeltaEstimate {
                alpha: f64::NAN,
                beta: f64::NAN,
            },
            fixed_points: Vec::new(),
            tolerances,
            notes,
            chain: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::CoreError::Config(format!("report serialization: {e}")))
    }
}

/// CSV export of a residual series with header `t,r`.
pub fn write_residual_csv<W: Write>(residuals: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "t,r")?;
    for &(t, r) in residuals {
        writeln!(w, "{t:.16e},{r:.16e}")?;
    }
    Ok(())
}

/// CSV export of a period-map iterate sequence with header `k,u`.
pub fn write_iterate_csv<W: Write>(values: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "k,u")?;
    for (k, &u) in values.iter().enumerate() {
        writeln!(w, "{k},{u:.16e}")?;
    }
    Ok(())
}
