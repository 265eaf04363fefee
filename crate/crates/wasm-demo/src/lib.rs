//! Browser bindings: a thin JSON-string facade over `massera-core` for the
//! static demo page. Each export parses its inputs, runs the analysis, and
//! returns either `{"ok": ...}` or `{"error": "..."}` so the JS side never
//! has to deal with exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use massera_core::bebutov::{bebutov_distance, DomainKind, SampledFunction};
use massera_core::expr::parse;
use massera_core::period::{full_analysis, iterates, PeriodMap};
use massera_core::presets;
use massera_core::FieldKind;

fn wrap<T: Serialize>(r: Result<T, String>) -> String {
    let v = match r {
        Ok(body) => serde_json::json!({ "ok": body }),
        Err(msg) => serde_json::json!({ "error": msg }),
    };
    v.to_string()
}

/// Run the full classification pipeline on a preset, with the horizon scaled
/// down so it stays interactive in the browser.
#[wasm_bindgen]
pub fn analyze_preset(name: &str, u0: f64, horizon_scale: f64) -> String {
    wrap(analyze_preset_impl(name, u0, horizon_scale))
}

fn analyze_preset_impl(
    name: &str,
    u0: f64,
    horizon_scale: f64,
) -> Result<serde_json::Value, String> {
    if !(horizon_scale > 0.0 && horizon_scale <= 1.0) {
        return Err("horizon_scale must be in (0, 1]".into());
    }
    let p = presets::preset(name).map_err(|e| e.to_string())?;
    let mut settings = p.settings;
    settings.horizon = (settings.horizon * horizon_scale).max(20.0 * settings.tau.max(1.0));
    // Skip the fixed-point scan in the browser: it multiplies the work by
    // the grid size and the verdict does not depend on it.
    settings.fixed_point_range = None;
    let out = full_analysis(&p.field, u0, &settings).map_err(|e| e.to_string())?;
    let report: serde_json::Value =
        serde_json::from_str(&out.report.to_json().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    // Downsample the trajectory for plotting.
    let n_plot = 600usize;
    let t0 = out.trajectory.t0;
    let t1 = out.trajectory.t_end;
    let mut ts = Vec::with_capacity(n_plot);
    let mut xs = Vec::with_capacity(n_plot);
    for i in 0..n_plot {
        let mut t = t0 + (t1 - t0) * i as f64 / (n_plot - 1) as f64;
        if p.field.kind == FieldKind::Map {
            t = t.round().min(t1);
        }
        ts.push(t);
        xs.push(out.trajectory.sample(t).map_err(|e| e.to_string())?);
    }
    Ok(serde_json::json!({
        "report": report,
        "plot": { "t": ts, "x": xs },
        "residual_t": out.residuals.iter().map(|r| r.0).collect::<Vec<_>>(),
        "residual_r": out.residuals.iter().map(|r| r.1).collect::<Vec<_>>(),
    }))
}

/// Sample the period map of the preset's limiting equation on [lo, hi],
/// together with a short forward orbit from u0 for a cobweb overlay.
#[wasm_bindgen]
pub fn period_map_curve(name: &str, lo: f64, hi: f64, n: usize, u0: f64) -> String {
    wrap(period_map_curve_impl(name, lo, hi, n, u0))
}

fn period_map_curve_impl(
    name: &str,
    lo: f64,
    hi: f64,
    n: usize,
    u0: f64,
) -> Result<serde_json::Value, String> {
    if !(lo < hi) || !(2..=4096).contains(&n) {
        return Err("need lo < hi and 2 <= n <= 4096".into());
    }
    let p = presets::preset(name).map_err(|e| e.to_string())?;
    let pm = PeriodMap::build(&p.field, p.settings.tau, p.settings.cfg).map_err(|e| e.to_string())?;
    let mut u = Vec::with_capacity(n);
    let mut pu = Vec::with_capacity(n);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        u.push(x);
        pu.push(pm.eval(x).map_err(|e| e.to_string())?);
    }
    let orbit = iterates(&pm, u0, 30).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "u": u,
        "p": pu,
        "orbit": orbit.values,
        "tau": p.settings.tau,
    }))
}

/// Bebutov distance between two expressions in t, sampled on [-window-1,
/// window+1].
#[wasm_bindgen]
pub fn bebutov_compare(phi: &str, psi: &str, window: f64) -> String {
    wrap(bebutov_compare_impl(phi, psi, window))
}

fn bebutov_compare_impl(phi: &str, psi: &str, window: f64) -> Result<serde_json::Value, String> {
    if !(window > 0.0 && window <= 1e4) {
        return Err("window must be in (0, 1e4]".into());
    }
    let sample = |src: &str| -> Result<SampledFunction, String> {
        let e = parse(src).map_err(|err| err.to_string())?;
        let half = window + 1.0;
        let n = 2048usize;
        let step = 2.0 * half / n as f64;
        let values = (0..=n)
            .map(|i| e.eval(-half + step * i as f64, 0.0).map_err(|err| err.to_string()))
            .collect::<Result<Vec<f64>, String>>()?;
        SampledFunction::new(DomainKind::FullLine, step, -half, values).map_err(|e| e.to_string())
    };
    let f1 = sample(phi)?;
    let f2 = sample(psi)?;
    let d = bebutov_distance(&f1, &f2, window).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "distance": d.value,
        "truncated": d.truncated,
        "window": window,
    }))
}

/// Quick syntax check so the page can flag bad expressions while typing.
#[wasm_bindgen]
pub fn check_expression(src: &str) -> String {
    match parse(src) {
        Ok(e) => wrap::<serde_json::Value>(Ok(serde_json::json!({ "formatted": e.format() }))),
        Err(e) => wrap::<serde_json::Value>(Err(format!("{e}"))),
    }
}
