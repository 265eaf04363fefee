//! Numerical toolkit for scalar nonautonomous ODEs `x' = f(t, x)` and
//! difference equations `x(t+1) = f(t, x(t))` whose right-hand side is
//! asymptotically `tau`-periodic.
//!
//! The crate classifies bounded solutions (S-asymptotically periodic,
//! asymptotically periodic, unbounded, inconclusive), builds and analyzes
//! the period map of the limiting periodic equation, estimates limit sets,
//! computes chain-recurrence graphs over finite samples, and evaluates the
//! compact-open (Bebutov) metric on sampled functions.

pub mod bebutov;
pub mod chain;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod integrator;
pub mod period;
pub mod presets;
pub mod report;
pub mod trajectory;

pub use error::{CoreError, Result};
pub use expr::{Expr, ParseError};
pub use field::{Decomposition, FieldKind, ScalarField};
pub use integrator::IntegratorConfig;
pub use period::{AnalysisSettings, PeriodMap, Verdict};
pub use report::ClassificationReport;
pub use trajectory::Trajectory;

/// Schema version embedded in every JSON report.
pub const REPORT_SCHEMA_VERSION: &str = "report_v1";
