//! The period map of the limiting periodic equation and the classification
//! pipeline built on it.
//!
//! For an ODE the period map is `P(u) = phi(tau, u)` of `x' = P(t, x)`
//! starting at `t = 0`; for a difference equation it is the `tau`-fold
//! composition of the periodic part. Classification of the original solution
//! always uses the full field `f`; the period map only ever sees the
//! limiting equation.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dynamics::solve;
use crate::error::{CoreError, Result};
use crate::expr::{BinOp, Expr, Var};
use crate::field::{FieldKind, ScalarField};
use crate::integrator::{integrate, IntegratorConfig};
use crate::report::{ClassificationReport, DeltaEstimate, FixedPointJson, Tolerances};
use crate::trajectory::Trajectory;

// ---------------------------------------------------------------------------
// Period map
// ---------------------------------------------------------------------------

pub struct PeriodMap {
    limiting: ScalarField,
    tau: f64,
    cfg: IntegratorConfig,
    cache: Mutex<HashMap<u64, f64>>,
}

impl PeriodMap {
    /// Builds the period map from a field that either carries a
    /// decomposition or is itself (sampled-verified) `tau`-periodic.
    pub fn build(field: &ScalarField, tau: f64, cfg: IntegratorConfig) -> Result<Self> {
        if tau <= 0.0 {
            return Err(CoreError::Config("tau must be positive".into()));
        }
        if field.kind == FieldKind::Map && tau.fract() != 0.0 {
            return Err(CoreError::Config(
                "tau must be a positive integer for difference equations".into(),
            ));
        }
        let limiting = match &field.decomposition {
            Some(d) => {
                if (d.tau - tau).abs() > 1e-9 * tau.max(1.0) {
                    return Err(CoreError::Config(format!(
                        "tau mismatch: requested {tau}, decomposition has {}",
                        d.tau
                    )));
                }
                field.limiting()
            }
            None => {
                let t_grid: Vec<f64> = (0..8).map(|i| tau * i as f64 / 7.0).collect();
                let x_grid = [0.0, 0.5, 1.0, -1.0, 2.0];
                if !field.is_sampled_periodic(tau, &t_grid, &x_grid) {
                    return Err(CoreError::Config(format!(
                        "field `{}` has no decomposition and is not tau-periodic on samples",
                        field.label
                    )));
                }
                field.clone()
            }
        };
        Ok(PeriodMap {
            limiting,
            tau,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn limiting_field(&self) -> &ScalarField {
        &self.limiting
    }

    /// `P(u)`. Memoized; cached values are identical to fresh evaluation
    /// because the computation is deterministic.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if let Some(&v) = self.cache.lock().unwrap().get(&u.to_bits()) {
            return Ok(v);
        }
        let v = self.eval_uncached(u)?;
        self.cache.lock().unwrap().insert(u.to_bits(), v);
        Ok(v)
    }

    fn eval_uncached(&self, u: f64) -> Result<f64> {
        match self.limiting.kind {
            FieldKind::Ode => {
                let traj = integrate(&self.limiting, u, 0.0, self.tau, &self.cfg)?;
                if let Some(tb) = traj.blew_up {
                    return Err(CoreError::Integration {
                        t: tb,
                        x: traj.final_value(),
                        reason: "blow-up inside period map evaluation".into(),
                    });
                }
                Ok(traj.final_value())
            }
            FieldKind::Map => {
                let steps = self.tau as usize;
                let mut x = u;
                for k in 0..steps {
                    x = self.limiting.eval(k as f64, x)?;
                    if !x.is_finite() || x.abs() >= self.cfg.x_max {
                        return Err(CoreError::MapStep {
                            step: k,
                            x,
                            reason: "blow-up inside period map evaluation".into(),
                        });
                    }
                }
                Ok(x)
            }
        }
    }

    /// Preimage under the period map: time reversal for ODEs, per-step
    /// bisection inversion for strictly monotone difference maps.
    pub fn eval_reverse(&self, u: f64) -> Result<f64> {
        match self.limiting.kind {
            FieldKind::Ode => {
                // Integrate x' = -P(tau - s, x) forward over [0, tau].
                let shift = self.limiting.time_shift();
                let total = self.tau + shift;
                let reversed_time = Expr::Bin(
                    BinOp::Sub,
                    Box::new(Expr::Num(total)),
                    Box::new(Expr::Var(Var::T)),
                );
                let reversed = Expr::Neg(Box::new(self.limiting.f.replace_time(&reversed_time)));
                let rev_field = ScalarField::ode(reversed, "reversed");
                let traj = integrate(&rev_field, u, 0.0, self.tau, &self.cfg)?;
                if traj.blew_up.is_some() {
                    return Err(CoreError::Integration {
                        t: self.tau,
                        x: traj.final_value(),
                        reason: "blow-up in time-reversed integration".into(),
                    });
                }
                Ok(traj.final_value())
            }
            FieldKind::Map => {
                let steps = self.tau as usize;
                let mut y = u;
                for k in (0..steps).rev() {
                    y = invert_monotone_step(&self.limiting, k as f64, y)?;
                }
                Ok(y)
            }
        }
    }
}

/// Solves `P(k, z) = target` for `z` by bracket expansion and bisection,
/// assuming strict monotonicity in the state variable.
fn invert_monotone_step(field: &ScalarField, k: f64, target: f64) -> Result<f64> {
    let span0 = target.abs().max(1.0);
    let mut lo = target - span0;
    let mut hi = target + span0;
    let g = |z: f64| -> Result<f64> { Ok(field.eval(k, z)? - target) };
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    let mut tries = 0;
    while glo.signum() == ghi.signum() && glo != 0.0 && ghi != 0.0 {
        tries += 1;
        if tries > 60 {
            return Err(CoreError::Parameter(format!(
                "cannot bracket preimage of {target} at step {k}"
            )));
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
        glo = g(lo)?;
        ghi = g(hi)?;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 || (hi - lo) < 1e-15 * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Iterates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct IterateList {
    pub values: Vec<f64>,
    /// True when iteration stopped early (blow-up or evaluation failure).
    pub truncated: bool,
}

/// `[u0, P(u0), P^2(u0), ...]` up to `k_max` applications.
pub fn iterates(pm: &PeriodMap, u0: f64, k_max: usize) -> Result<IterateList> {
    if k_max < 1 {
        return Err(CoreError::Parameter("k_max must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(u0);
    let mut x = u0;
    let mut truncated = false;
    for _ in 0..k_max {
        match pm.eval(x) {
            Ok(v) if v.is_finite() && v.abs() < pm.cfg.x_max => {
                values.push(v);
                x = v;
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    Ok(IterateList { values, truncated })
}

// ---------------------------------------------------------------------------
// Residual series and classifiers
// ---------------------------------------------------------------------------

/// `r(t) = |phi(t+tau) - phi(t)|` sampled on a uniform grid.
pub fn residual_series(traj: &Trajectory, tau: f64, grid_step: f64) -> Result<Vec<(f64, f64)>> {
    if traj.t_end - traj.t0 <= tau {
        return Err(CoreError::Range(format!(
            "horizon {} too short for tau {tau}",
            traj.t_end - traj.t0
        )));
    }
    let step = if traj.kind == FieldKind::Map {
        grid_step.round().max(1.0)
    } else {
        grid_step
    };
    if step <= 0.0 {
        return Err(CoreError::Parameter("grid_step must be positive".into()));
    }
    let mut out = Vec::new();
    let mut t = traj.t0;
    while t + tau <= traj.t_end + 1e-9 {
        let a = traj.sample(t)?;
        let b = traj.sample((t + tau).min(traj.t_end))?;
        out.push((t, (b - a).abs()));
        t += step;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct SClassification {
    pub verdict: SVerdict,
    /// Sup of the residual over the trailing `tail_fraction` of samples.
    pub tail_sup: f64,
    /// Sup over the leading third, used as the decay reference.
    pub head_sup: f64,
}

/// S-asymptotic periodicity test on a residual series: the tail sup must be
/// below `s_tol` and must have decayed to at most half the leading-third sup.
pub fn classify_s_asymptotic(
    residuals: &[(f64, f64)],
    s_tol: f64,
    tail_fraction: f64,
    fail_threshold: f64,
) -> Result<SClassification> {
    if residuals.is_empty() {
        return Err(CoreError::Parameter("empty residual series".into()));
    }
    let n = residuals.len();
    let tail_len = ((n as f64 * tail_fraction).ceil() as usize).clamp(1, n);
    let head_len = (n / 3).max(1);
    let sup = |slice: &[(f64, f64)]| slice.iter().map(|&(_, r)| r).fold(0.0_f64, f64::max);
    let tail_sup = sup(&residuals[n - tail_len..]);
    let head_sup = sup(&residuals[..head_len]);
    let verdict = if tail_sup < s_tol && tail_sup <= 0.5 * head_sup {
        SVerdict::Pass
    } else if tail_sup >= fail_threshold {
        SVerdict::Fail
    } else {
        SVerdict::Inconclusive
    };
    Ok(SClassification {
        verdict,
        tail_sup,
        head_sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AOutcome {
    Converged(f64),
    NotConverged,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct AClassification {
    pub outcome: AOutcome,
    pub span: f64,
}

/// Convergence test on a period-map iterate tail (the sequence `phi(k tau)`).
pub fn classify_asymptotic(
    tail: &[f64],
    conv_tol: f64,
    div_threshold: f64,
) -> Result<AClassification> {
    if tail.len() < 10 {
        return Err(CoreError::Parameter(
            "iterate tail must have at least 10 entries".into(),
        ));
    }
    let span = span_of(tail);
    let outcome = if span < conv_tol {
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        AOutcome::Converged(mean)
    } else {
        let mid = tail.len() / 2;
        // Divergence must persist across two consecutive tail windows.
        if span_of(&tail[..mid]) > div_threshold && span_of(&tail[mid..]) > div_threshold {
            AOutcome::NotConverged
        } else {
            AOutcome::Inconclusive
        }
    };
    Ok(AClassification { outcome, span })
}

fn span_of(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

// ---------------------------------------------------------------------------
// Limit-set estimate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSetEstimate {
    /// Tail liminf estimate.
    pub alpha: f64,
    /// Tail limsup estimate.
    pub beta: f64,
    /// `(t_start, t_end, min, max)` over nested tail windows.
    pub windows: Vec<(f64, f64, f64, f64)>,
}

/// Min/max over nested tail windows of the trajectory; the final window is
/// the trailing half of the horizon. All windows share one sampling grid so
/// the nesting monotonicity is exact.
pub fn estimate_delta(
    traj: &Trajectory,
    n_windows: usize,
    samples_per_window: usize,
) -> Result<LimitSetEstimate> {
    if n_windows < 2 {
        return Err(CoreError::Parameter("need at least 2 windows".into()));
    }
    let total = traj.t_end - traj.t0;
    if total <= 0.0 {
        return Err(CoreError::Range("empty trajectory".into()));
    }
    let n_samples = (2 * samples_per_window).max(16);
    let mid = traj.t0 + 0.5 * total;
    let mut grid: Vec<f64> = Vec::with_capacity(n_samples);
    if traj.kind == FieldKind::Map {
        let stride = ((total as usize) / n_samples).max(1);
        let mut k = traj.t0 as i64;
        while (k as f64) <= traj.t_end {
            grid.push(k as f64);
            k += stride as i64;
        }
        let last = traj.t_end;
        if grid.last() != Some(&last) {
            grid.push(last);
        }
    } else {
        for i in 0..n_samples {
            grid.push(traj.t0 + total * i as f64 / (n_samples - 1) as f64);
        }
    }
    let values: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| traj.sample(t).map(|x| (t, x)))
        .collect::<Result<_>>()?;

    let mut windows = Vec::with_capacity(n_windows);
    for j in 0..n_windows {
        let start = traj.t0 + (mid - traj.t0) * j as f64 / (n_windows - 1) as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(t, x) in &values {
            if t >= start - 1e-12 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        windows.push((start, traj.t_end, lo, hi));
    }
    let (_, _, alpha, beta) = *windows.last().unwrap();
    Ok(LimitSetEstimate {
        alpha: alpha.min(beta),
        beta: beta.max(alpha),
        windows,
    })
}

// ---------------------------------------------------------------------------
// Fixed points and stability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    PositivelyAsymptoticallyStable,
    NegativelyAsymptoticallyStable,
    SemiStable,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointRecord {
    pub u_star: f64,
    /// |P(u*) - u*|.
    pub residual: f64,
    pub transverse: bool,
    pub stability: Stability,
    /// Distance to the nearest other fixed point found (infinite if alone).
    pub isolation_gap: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointScan {
    pub records: Vec<FixedPointRecord>,
    /// Set when most of the scan grid sits on `P(u) = u` without sign
    /// changes (e.g. the identity map): a continuum of non-transverse
    /// candidates rather than isolated roots.
    pub non_transverse_continuum: bool,
}

/// Scans `g(u) = P(u) - u` on a uniform grid, brackets sign changes, and
/// bisects each bracket down to `root_tol`. Grid points with `|g|` below
/// `root_tol` but no sign change are reported as non-transverse tangency
/// candidates (consecutive runs merged).
pub fn find_fixed_points(
    pm: &PeriodMap,
    lo: f64,
    hi: f64,
    n_grid: usize,
    root_tol: f64,
) -> Result<FixedPointScan> {
    if !(lo < hi) {
        return Err(CoreError::Parameter("need lo < hi".into()));
    }
    if n_grid < 2 {
        return Err(CoreError::Parameter("n_grid must be at least 2".into()));
    }
    let g = |u: f64| -> Option<f64> { pm.eval(u).ok().map(|p| p - u) };
    let us: Vec<f64> = (0..=n_grid)
        .map(|i| lo + (hi - lo) * i as f64 / n_grid as f64)
        .collect();
    let gs: Vec<Option<f64>> = us.iter().map(|&u| g(u)).collect();

    let mut records: Vec<FixedPointRecord> = Vec::new();
    let mut tangent_count = 0usize;
    let valid_count = gs.iter().flatten().count();

    // Strict sign changes away from zero: bracket and bisect.
    for i in 0..us.len() - 1 {
        if let (Some(gi), Some(gn)) = (gs[i], gs[i + 1]) {
            if gi.abs() >= root_tol && gn.abs() >= root_tol && gi.signum() != gn.signum() {
                if let Some(root) = bisect(&g, us[i], us[i + 1], gi, root_tol) {
                    let residual = g(root).map(f64::abs).unwrap_or(f64::NAN);
                    records.push(FixedPointRecord {
                        u_star: root,
                        residual,
                        transverse: true,
                        stability: Stability::Inconclusive,
                        isolation_gap: f64::INFINITY,
                    });
                }
            }
        }
    }

    // Maximal runs of |g| < root_tol (roots sitting on the grid, or
    // tangencies). A run bracketed by opposite signs is a transverse root;
    // otherwise it is a non-transverse candidate.
    let mut i = 0;
    while i < us.len() {
        let small = matches!(gs[i], Some(gi) if gi.abs() < root_tol);
        if !small {
            i += 1;
            continue;
        }
        let start = i;
        while i < us.len() && matches!(gs[i], Some(gi) if gi.abs() < root_tol) {
            i += 1;
        }
        let end = i; // run is [start, end)
        let left = (0..start).rev().find_map(|j| gs[j].filter(|v| v.abs() >= root_tol));
        let right = (end..us.len()).find_map(|j| gs[j].filter(|v| v.abs() >= root_tol));
        let transverse = matches!((left, right), (Some(a), Some(b)) if a.signum() != b.signum());
        let (best_u, best_g) = (start..end)
            .map(|j| (us[j], gs[j].unwrap().abs()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if !transverse {
            tangent_count += end - start;
        }
        records.push(FixedPointRecord {
            u_star: best_u,
            residual: best_g,
            transverse,
            stability: Stability::Inconclusive,
            isolation_gap: f64::INFINITY,
        });
    }

    let non_transverse_continuum = valid_count > 0 && tangent_count * 2 > valid_count;
    if non_transverse_continuum {
        // A continuum of candidates is reported by the flag, not as records.
        records.retain(|r| r.transverse);
    }

    records.sort_by(|a, b| a.u_star.partial_cmp(&b.u_star).unwrap());
    records.dedup_by(|a, b| (a.u_star - b.u_star).abs() <= root_tol.max(1e-14));
    let us_all: Vec<f64> = records.iter().map(|r| r.u_star).collect();
    for (i, rec) in records.iter_mut().enumerate() {
        let mut gap = f64::INFINITY;
        for (j, &u) in us_all.iter().enumerate() {
            if i != j {
                gap = gap.min((u - rec.u_star).abs());
            }
        }
        rec.isolation_gap = gap;
    }
    Ok(FixedPointScan {
        records,
        non_transverse_continuum,
    })
}

fn bisect(g: &dyn Fn(f64) -> Option<f64>, mut a: f64, mut b: f64, ga: f64, tol: f64) -> Option<f64> {
    let mut ga = ga;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Two-sided sign-probe stability classification at a transverse fixed
/// point, cross-checked by iterating the map (forward, and reversed for the
/// negatively stable case).
pub fn classify_stability(
    pm: &PeriodMap,
    fp: &FixedPointRecord,
    probe: f64,
    root_tol: f64,
) -> Result<Stability> {
    if probe <= 0.0 {
        return Err(CoreError::Parameter("probe must be positive".into()));
    }
    if fp.isolation_gap.is_finite() && probe >= fp.isolation_gap / 2.0 {
        return Err(CoreError::Parameter(format!(
            "probe {probe} too large for isolation gap {}",
            fp.isolation_gap
        )));
    }
    if !fp.transverse {
        return Ok(Stability::Inconclusive);
    }
    let u = fp.u_star;
    let g_minus = pm.eval(u - probe)? - (u - probe);
    let g_plus = pm.eval(u + probe)? - (u + probe);
    if g_minus.abs() < root_tol || g_plus.abs() < root_tol {
        return Ok(Stability::Inconclusive);
    }
    let tag = match (g_minus > 0.0, g_plus > 0.0) {
        (true, false) => Stability::PositivelyAsymptoticallyStable,
        (false, true) => Stability::NegativelyAsymptoticallyStable,
        _ => Stability::SemiStable,
    };
    match tag {
        Stability::PositivelyAsymptoticallyStable => {
            if !iteration_attracts(|v| pm.eval(v), u, probe) {
                return Ok(Stability::Inconclusive);
            }
        }
        Stability::NegativelyAsymptoticallyStable => {
            // Attracting under the reversed dynamics; best effort, the tag
            // stands when time reversal is unavailable.
            if let (Ok(_), Ok(_)) = (pm.eval_reverse(u - probe), pm.eval_reverse(u + probe)) {
                if !iteration_attracts(|v| pm.eval_reverse(v), u, probe) {
                    return Ok(Stability::Inconclusive);
                }
            }
        }
        _ => {}
    }
    Ok(tag)
}

fn iteration_attracts<F: Fn(f64) -> Result<f64>>(step: F, u_star: f64, probe: f64) -> bool {
    for start in [u_star - probe, u_star + probe] {
        let mut v = start;
        for _ in 0..50 {
            match step(v) {
                Ok(next) => v = next,
                Err(_) => return false,
            }
        }
        if (v - u_star).abs() >= probe.abs() {
            return false;
        }
    }
    true
}

/// Returns the pairs `(u1, u2)` with `u1 < u2` for which sampled order
/// preservation fails, i.e. `P(u1) >= P(u2) - 1e-12`.
pub fn check_monotone(pm: &PeriodMap, pairs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut violations = Vec::new();
    for &(u1, u2) in pairs {
        if !(u1 < u2) {
            return Err(CoreError::Parameter(format!(
                "pair ({u1}, {u2}) is not ordered"
            )));
        }
        let p1 = pm.eval(u1)?;
        let p2 = pm.eval(u2)?;
        if p1 >= p2 - 1e-12 {
            violations.push((u1, u2));
        }
    }
    Ok(violations)
}

// ---------------------------------------------------------------------------
// Full analysis pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "S_ASYMPTOTICALLY_PERIODIC")]
    SAsymptoticallyPeriodic,
    #[serde(rename = "ASYMPTOTICALLY_PERIODIC")]
    AsymptoticallyPeriodic,
    #[serde(rename = "NOT_ASYMPTOTICALLY_PERIODIC")]
    NotAsymptoticallyPeriodic,
    #[serde(rename = "UNBOUNDED")]
    Unbounded,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl Verdict {
    pub fn is_definite(self) -> bool {
        self != Verdict::Inconclusive
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisSettings {
    pub tau: f64,
    pub horizon: f64,
    pub cfg: IntegratorConfig,
    pub s_tol: f64,
    pub s_fail: f64,
    pub conv_tol: f64,
    pub div_threshold: f64,
    pub tail_fraction: f64,
    /// Residual sampling step; `None` selects horizon/8192 (at least 1 for
    /// maps).
    pub grid_step: Option<f64>,
    pub n_windows: usize,
    pub samples_per_window: usize,
    pub fixed_point_range: Option<(f64, f64)>,
    pub n_grid: usize,
    pub root_tol: f64,
    pub probe: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            tau: 1.0,
            horizon: 100.0,
            cfg: IntegratorConfig::default(),
            s_tol: 1e-4,
            s_fail: 1e-2,
            conv_tol: 1e-6,
            div_threshold: 1e-2,
            tail_fraction: 0.25,
            grid_step: None,
            n_windows: 4,
            samples_per_window: 8192,
            fixed_point_range: None,
            n_grid: 4096,
            root_tol: 1e-9,
            probe: 1e-3,
        }
    }
}

/// Everything `full_analysis` produces: the JSON-ready report plus the raw
/// series for CSV export.
#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub report: ClassificationReport,
    pub residuals: Vec<(f64, f64)>,
    pub iterates: Vec<f64>,
    pub trajectory: Trajectory,
}

/// The classification pipeline: solve, boundedness check, S-residual test,
/// period-map iterate convergence, limit-set estimate, fixed-point scan.
pub fn full_analysis(
    field: &ScalarField,
    u0: f64,
    settings: &AnalysisSettings,
) -> Result<AnalysisOutcome> {
    if settings.horizon < 20.0 * settings.tau {
        return Err(CoreError::Parameter(format!(
            "horizon {} must be at least 20*tau = {}",
            settings.horizon,
            20.0 * settings.tau
        )));
    }
    let mut notes: Vec<String> = Vec::new();
    let tolerances = Tolerances {
        rel_tol: settings.cfg.rel_tol,
        abs_tol: settings.cfg.abs_tol,
        s_tol: settings.s_tol,
        s_fail: settings.s_fail,
        conv_tol: settings.conv_tol,
        div_threshold: settings.div_threshold,
        tail_fraction: settings.tail_fraction,
        root_tol: settings.root_tol,
    };

    let traj = match solve(field, u0, settings.horizon, &settings.cfg) {
        Ok(t) => t,
        Err(e) => {
            notes.push(format!("integration failed: {e}"));
            return Ok(AnalysisOutcome {
                report: ClassificationReport::bare(
                    field,
                    u0,
                    settings,
                    Verdict::Inconclusive,
                    tolerances,
                    notes,
                ),
                residuals: Vec::new(),
                iterates: Vec::new(),
                trajectory: Trajectory::new_map(0, vec![u0], None, settings.cfg.x_max),
            });
        }
    };

    if let Some(tb) = traj.blew_up {
        notes.push(format!("blow-up at t={tb}"));
        return Ok(AnalysisOutcome {
            report: ClassificationReport::bare(
                field,
                u0,
                settings,
                Verdict::Unbounded,
                tolerances,
                notes,
            ),
            residuals: Vec::new(),
            iterates: Vec::new(),
            trajectory: traj,
        });
    }

    let grid_step = settings.grid_step.unwrap_or_else(|| {
        let s = settings.horizon / 8192.0;
        if field.kind == FieldKind::Map {
            s.max(1.0).round()
        } else {
            s
        }
    });
    let residuals = residual_series(&traj, settings.tau, grid_step)?;
    let s_class =
        classify_s_asymptotic(&residuals, settings.s_tol, settings.tail_fraction, settings.s_fail)?;

    // phi(k tau) of the actual solution.
    let k_max = ((traj.t_end - traj.t0) / settings.tau).floor() as usize;
    let mut iter_values = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        iter_values.push(traj.sample(traj.t0 + k as f64 * settings.tau)?);
    }
    let tail_len = ((iter_values.len() as f64 * settings.tail_fraction).ceil() as usize)
        .clamp(10.min(iter_values.len()), iter_values.len());
    let tail = &iter_values[iter_values.len() - tail_len..];
    let a_class = classify_asymptotic(tail, settings.conv_tol, settings.div_threshold)?;

    let delta = estimate_delta(&traj, settings.n_windows, settings.samples_per_window)?;

    let verdict = match (s_class.verdict, &a_class.outcome) {
        (SVerdict::Pass, AOutcome::Converged(_)) => Verdict::AsymptoticallyPeriodic,
        (SVerdict::Pass, AOutcome::NotConverged) => Verdict::NotAsymptoticallyPeriodic,
        (SVerdict::Pass, AOutcome::Inconclusive) => Verdict::SAsymptoticallyPeriodic,
        _ => Verdict::Inconclusive,
    };
    if s_class.verdict == SVerdict::Fail {
        notes.push(format!(
            "S-residual tail sup {:.3e} at or above fail threshold {:.3e}",
            s_class.tail_sup, settings.s_fail
        ));
    }

    let iterate_limit = match a_class.outcome {
        AOutcome::Converged(limit) => Some(limit),
        _ => None,
    };

    // Period map of the limiting equation: fixed points and the limit
    // consistency note.
    let mut fixed_points: Vec<FixedPointJson> = Vec::new();
    match PeriodMap::build(field, settings.tau, settings.cfg) {
        Ok(pm) => {
            if let Some(limit) = iterate_limit {
                match pm.eval(limit) {
                    Ok(p) => {
                        let res = (p - limit).abs();
                        notes.push(format!(
                            "period-map residual at iterate limit: |P(p)-p| = {res:.3e}"
                        ));
                    }
                    Err(e) => notes.push(format!("period map failed at iterate limit: {e}")),
                }
            }
            if let Some((lo, hi)) = settings.fixed_point_range {
                match find_fixed_points(&pm, lo, hi, settings.n_grid, settings.root_tol) {
                    Ok(scan) => {
                        if scan.non_transverse_continuum {
                            notes.push(
                                "non-transverse continuum: P(u) = u along most of the scan range"
                                    .into(),
                            );
                        }
                        for rec in &scan.records {
                            let probe = if rec.isolation_gap.is_finite() {
                                settings.probe.min(rec.isolation_gap / 4.0)
                            } else {
                                settings.probe
                            };
                            let stability = classify_stability(&pm, rec, probe, settings.root_tol)
                                .unwrap_or(Stability::Inconclusive);
                            fixed_points.push(FixedPointJson {
                                u: rec.u_star,
                                stability,
                                transverse: rec.transverse,
                                isolation_gap: rec.isolation_gap,
                            });
                        }
                    }
                    Err(e) => notes.push(format!("fixed-point scan failed: {e}")),
                }
            }
        }
        Err(e) => notes.push(format!("period map unavailable: {e}")),
    }

    let report = ClassificationReport {
        schema_version: crate::REPORT_SCHEMA_VERSION.to_string(),
        label: field.label.clone(),
        verdict,
        tau: settings.tau,
        u0,
        horizon: settings.horizon,
        residual_tail_sup: s_class.tail_sup,
        iterate_tail_span: a_class.span,
        iterate_limit,
        delta: DeltaEstimate {
            alpha: delta.alpha,
            beta: delta.beta,
        },
        fixed_points,
        tolerances,
        notes,
        chain: None,
    };

    Ok(AnalysisOutcome {
        report,
        residuals,
        iterates: iter_values,
        trajectory: traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::E;

    fn logistic_map() -> PeriodMap {
        let f = ScalarField::ode(parse("x*(1-x)").unwrap(), "logistic");
        PeriodMap::build(&f, 1.0, IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn identity_period_map() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let pm = PeriodMap::build(&f, 3.0, IntegratorConfig::default()).unwrap();
        for u in [-1.0, 0.0, 0.5, 2.0] {
            assert!((pm.eval(u).unwrap() - u).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_period_map_closed_form() {
        // x(t) = x0 e^t / (1 - x0 + x0 e^t), so P(0.5) = e/(1+e).
        let pm = logistic_map();
        let p = pm.eval(0.5).unwrap();
        assert!((p - E / (1.0 + E)).abs() < 1e-7, "got {p}");
    }

    #[test]
    fn beverton_holt_limiting_fixed_point() {
        let f = ScalarField::map(parse("2*100*x/(100+x)").unwrap(), "bh");
        let pm = PeriodMap::build(&f, 1.0, IntegratorConfig::default()).unwrap();
        assert!((pm.eval(100.0).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn cache_is_transparent() {
        let pm = logistic_map();
        let a = pm.eval(0.3).unwrap();
        let b = pm.eval(0.3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn iterates_of_identity_constant() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let pm = PeriodMap::build(&f, 1.0, IntegratorConfig::default()).unwrap();
        let it = iterates(&pm, 0.3, 10).unwrap();
        assert_eq!(it.values.len(), 11);
        assert!(it.values.iter().all(|&v| (v - 0.3).abs() < 1e-12));
        assert!(!it.truncated);
    }

    #[test]
    fn logistic_iterates_monotone_to_one() {
        let pm = logistic_map();
        let it = iterates(&pm, 0.5, 30).unwrap();
        for w in it.values.windows(2) {
            assert!(w[1] > w[0] - 1e-12);
        }
        assert!((it.values.last().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn logistic_equilibrium_iterates_constant() {
        let pm = logistic_map();
        let it = iterates(&pm, 1.0, 10).unwrap();
        for &v in &it.values {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_of_constant_trajectory_vanish() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let traj = integrate(&f, 3.0, 0.0, 50.0, &IntegratorConfig::default()).unwrap();
        let rs = residual_series(&traj, 5.0, 1.0).unwrap();
        assert!(rs.iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn s_classifier_edge_cases() {
        let zero: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 0.0)).collect();
        let s = classify_s_asymptotic(&zero, 1e-4, 0.25, 1e-2).unwrap();
        assert_eq!(s.verdict, SVerdict::Pass);

        let ones: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 1.0)).collect();
        let s = classify_s_asymptotic(&ones, 1e-4, 0.25, 1e-2).unwrap();
        assert_eq!(s.verdict, SVerdict::Fail);
    }

    #[test]
    fn a_classifier_constant_and_oscillating() {
        let constant = vec![2.0; 20];
        let a = classify_asymptotic(&constant, 1e-6, 1e-2).unwrap();
        assert!(matches!(a.outcome, AOutcome::Converged(v) if (v - 2.0).abs() < 1e-12));

        let osc: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = classify_asymptotic(&osc, 1e-6, 1e-1).unwrap();
        assert_eq!(a.outcome, AOutcome::NotConverged);
        assert!(a.span > 1.9);
    }

    #[test]
    fn delta_of_constant_trajectory() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let traj = integrate(&f, 4.0, 0.0, 100.0, &IntegratorConfig::default()).unwrap();
        let d = estimate_delta(&traj, 4, 256).unwrap();
        assert_eq!(d.alpha, 4.0);
        assert_eq!(d.beta, 4.0);
    }

    #[test]
    fn delta_of_decaying_trajectory() {
        let f = ScalarField::ode(parse("-x").unwrap(), "decay");
        let traj = integrate(&f, 1.0, 0.0, 60.0, &IntegratorConfig::default()).unwrap();
        let d = estimate_delta(&traj, 4, 512).unwrap();
        assert!(d.alpha.abs() < 1e-6 && d.beta.abs() < 1e-6, "{d:?}");
        // Nesting: mins nondecreasing, maxes nonincreasing.
        for w in d.windows.windows(2) {
            assert!(w[1].2 >= w[0].2);
            assert!(w[1].3 <= w[0].3);
        }
    }

    #[test]
    fn logistic_fixed_points_and_stability() {
        let pm = logistic_map();
        let scan = find_fixed_points(&pm, -0.5, 1.5, 512, 1e-12).unwrap();
        assert!(!scan.non_transverse_continuum);
        assert_eq!(scan.records.len(), 2);
        assert!(scan.records[0].u_star.abs() < 1e-9);
        assert!((scan.records[1].u_star - 1.0).abs() < 1e-9);
        let s0 = classify_stability(&pm, &scan.records[0], 0.01, 1e-12).unwrap();
        let s1 = classify_stability(&pm, &scan.records[1], 0.01, 1e-12).unwrap();
        assert_eq!(s0, Stability::NegativelyAsymptoticallyStable);
        assert_eq!(s1, Stability::PositivelyAsymptoticallyStable);
    }

    #[test]
    fn identity_scan_reports_continuum() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let pm = PeriodMap::build(&f, 1.0, IntegratorConfig::default()).unwrap();
        let scan = find_fixed_points(&pm, -1.0, 1.0, 64, 1e-9).unwrap();
        assert!(scan.non_transverse_continuum);
    }

    #[test]
    fn monotone_check() {
        let pm = logistic_map();
        let pairs: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let u = i as f64 * 0.1;
                (u, u + 0.05)
            })
            .collect();
        assert!(check_monotone(&pm, &pairs).unwrap().is_empty());

        // Order-reversing synthetic map.
        let neg = ScalarField::map(parse("-x").unwrap(), "neg");
        let pm2 = PeriodMap::build(&neg, 1.0, IntegratorConfig::default()).unwrap();
        let pairs2 = vec![(0.1, 0.2), (0.3, 0.9)];
        assert_eq!(check_monotone(&pm2, &pairs2).unwrap().len(), 2);
    }

    #[test]
    fn full_analysis_zero_field() {
        let f = ScalarField::ode(parse("0").unwrap(), "zero");
        let settings = AnalysisSettings {
            tau: 1.0,
            horizon: 100.0,
            ..Default::default()
        };
        let out = full_analysis(&f, 5.0, &settings).unwrap();
        assert_eq!(out.report.verdict, Verdict::AsymptoticallyPeriodic);
        assert!((out.report.iterate_limit.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn full_analysis_unbounded() {
        let f = ScalarField::ode(parse("x").unwrap(), "growth")
            .with_decomposition(parse("x").unwrap(), parse("0").unwrap(), 1.0)
            .unwrap();
        let settings = AnalysisSettings {
            tau: 1.0,
            horizon: 100.0,
            ..Default::default()
        };
        let out = full_analysis(&f, 1.0, &settings).unwrap();
        assert_eq!(out.report.verdict, Verdict::Unbounded);
    }
}
