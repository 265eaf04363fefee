//! The compact-open (Bebutov) metric on sampled functions:
//! `d(phi, psi) = sup_{L>0} min{ max_{|t|<=L} |phi - psi|, 1/L }`.
//!
//! `M(L) = max_{|t|<=L} |phi - psi|` is nondecreasing while `1/L` strictly
//! decreases, so the sup sits at their crossing; the crossing is found by
//! bisection in `L`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::FieldKind;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `[offset, infinity)` in principle; sampled up to the last node.
    HalfLine,
    /// Symmetric around zero.
    FullLine,
    /// Integer times only.
    Integers,
}

/// A function known through uniform samples; linear interpolation between
/// nodes for the continuous domains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledFunction {
    pub domain: DomainKind,
    /// Grid spacing (1 for integer domains).
    pub step: f64,
    /// Time of the first sample.
    pub offset: f64,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(domain: DomainKind, step: f64, offset: f64, values: Vec<f64>) -> Result<Self> {
        if step <= 0.0 {
            return Err(CoreError::Parameter("step must be positive".into()));
        }
        if values.len() < 2 {
            return Err(CoreError::Parameter("need at least 2 samples".into()));
        }
        if domain == DomainKind::Integers && (step.fract() != 0.0 || offset.fract() != 0.0) {
            return Err(CoreError::Parameter(
                "integer domains need integer step and offset".into(),
            ));
        }
        Ok(SampledFunction {
            domain,
            step,
            offset,
            values,
        })
    }

    pub fn from_trajectory(traj: &Trajectory, step: f64) -> Result<Self> {
        match traj.kind {
            FieldKind::Map => {
                let values = traj.nodes().iter().map(|&(_, x, _)| x).collect();
                SampledFunction::new(DomainKind::Integers, 1.0, traj.t0, values)
            }
            FieldKind::Ode => {
                if step <= 0.0 {
                    return Err(CoreError::Parameter("step must be positive".into()));
                }
                let n = ((traj.t_end - traj.t0) / step).floor() as usize;
                let values = (0..=n)
                    .map(|i| traj.sample(traj.t0 + i as f64 * step))
                    .collect::<Result<_>>()?;
                SampledFunction::new(DomainKind::HalfLine, step, traj.t0, values)
            }
        }
    }

    pub fn t_min(&self) -> f64 {
        self.offset
    }

    pub fn t_max(&self) -> f64 {
        self.offset + self.step * (self.values.len() - 1) as f64
    }

    /// Linear interpolation (exact lookup for integer domains).
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < self.t_min() - 1e-9 || t > self.t_max() + 1e-9 {
            return Err(CoreError::Range(format!(
                "t={t} outside sampled domain [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        let pos = (t - self.offset) / self.step;
        if self.domain == DomainKind::Integers {
            let k = pos.round();
            if (pos - k).abs() > 1e-9 {
                return Err(CoreError::Range(format!(
                    "t={t} is not a grid point of an integer-domain function"
                )));
            }
            let idx = (k as usize).min(self.values.len() - 1);
            return Ok(self.values[idx]);
        }
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    /// The time translate `t -> phi(t + h)`; samples are reused, only the
    /// grid origin moves.
    pub fn shifted(&self, h: f64) -> Result<SampledFunction> {
        if self.domain == DomainKind::Integers && h.fract() != 0.0 {
            return Err(CoreError::Parameter(
                "integer-domain functions shift by integers only".into(),
            ));
        }
        let mut out = self.clone();
        out.offset -= h;
        Ok(out)
    }

    /// CSV export with header `t,value` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        for (i, &v) in self.values.iter().enumerate() {
            let t = self.offset + self.step * i as f64;
            writeln!(w, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    /// Reads a `t,value` CSV produced by [`write_csv`](Self::write_csv);
    /// the grid must be uniform.
    pub fn read_csv<R: BufRead>(r: R, domain: DomainKind) -> Result<Self> {
        let mut ts: Vec<f64> = Vec::new();
        let mut vs: Vec<f64> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line == "t,value") {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(CoreError::Parameter(format!(
                    "line {}: expected `t,value`",
                    lineno + 1
                )));
            };
            let t: f64 = a.trim().parse().map_err(|_| {
                CoreError::Parameter(format!("line {}: bad t `{a}`", lineno + 1))
            })?;
            let v: f64 = b.trim().parse().map_err(|_| {
                CoreError::Parameter(format!("line {}: bad value `{b}`", lineno + 1))
            })?;
            ts.push(t);
            vs.push(v);
        }
        if ts.len() < 2 {
            return Err(CoreError::Parameter("need at least 2 samples".into()));
        }
        let step = ts[1] - ts[0];
        for (i, w) in ts.windows(2).enumerate() {
            let d = w[1] - w[0];
            if (d - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(CoreError::Parameter(format!(
                    "non-uniform grid between rows {} and {}",
                    i + 1,
                    i + 2
                )));
            }
        }
        SampledFunction::new(domain, step, ts[0], vs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BebutovResult {
    pub value: f64,
    /// True when the sampled domain ended before the crossing could be
    /// bracketed, so `value` is a lower bound.
    pub truncated: bool,
}

fn common_window(phi: &SampledFunction, psi: &SampledFunction) -> (f64, f64) {
    (phi.t_min().max(psi.t_min()), phi.t_max().min(psi.t_max()))
}

/// `max |phi - psi|` over `|t| <= L` intersected with the common sampled
/// domain. Evaluated on the union of both grids plus the window endpoints,
/// which is exact for piecewise-linear functions.
fn sup_difference(phi: &SampledFunction, psi: &SampledFunction, l: f64) -> Result<f64> {
    let (dom_lo, dom_hi) = common_window(phi, psi);
    let lo = (-l).max(dom_lo);
    let hi = l.min(dom_hi);
    if lo > hi {
        return Err(CoreError::Range(format!(
            "window |t| <= {l} does not meet the common domain [{dom_lo}, {dom_hi}]"
        )));
    }
    let mut sup = 0.0_f64;
    let mut probe = |t: f64| -> Result<()> {
        if phi.domain == DomainKind::Integers && (t - t.round()).abs() > 1e-9 {
            return Ok(());
        }
        sup = sup.max((phi.eval(t)? - psi.eval(t)?).abs());
        Ok(())
    };
    for f in [phi, psi] {
        let start = ((lo - f.offset) / f.step).ceil().max(0.0) as usize;
        let stop = (((hi - f.offset) / f.step).floor() as usize).min(f.values.len() - 1);
        for i in start..=stop {
            probe(f.offset + f.step * i as f64)?;
        }
    }
    if phi.domain != DomainKind::Integers || (lo - lo.round()).abs() < 1e-9 {
        probe(lo)?;
    }
    if phi.domain != DomainKind::Integers || (hi - hi.round()).abs() < 1e-9 {
        probe(hi)?;
    }
    Ok(sup)
}

/// Bebutov distance, computed up to window radius `l_cap` (capped further by
/// the common sampled domain).
pub fn bebutov_distance(
    phi: &SampledFunction,
    psi: &SampledFunction,
    l_cap: f64,
) -> Result<BebutovResult> {
    if l_cap <= 0.0 {
        return Err(CoreError::Parameter("l_cap must be positive".into()));
    }
    if phi.domain != psi.domain {
        return Err(CoreError::Parameter(
            "functions must share a domain kind".into(),
        ));
    }
    let (dom_lo, dom_hi) = common_window(phi, psi);
    if dom_lo > dom_hi {
        return Err(CoreError::Range("disjoint sampled domains".into()));
    }
    // The window |t| <= L only grows with data on both sides of 0 up to
    // min(|lo|, hi) when the domain straddles zero; beyond that M(L) is
    // constant, so larger L only shrinks 1/L.
    let data_cap = if dom_lo <= 0.0 && dom_hi >= 0.0 {
        dom_hi.max(-dom_lo)
    } else {
        dom_hi.abs().max(dom_lo.abs())
    };
    let truncated_by_data = data_cap < l_cap;
    let l_max = l_cap.min(data_cap).max(1e-9);

    let m_at = |l: f64| sup_difference(phi, psi, l);
    let g = |l: f64| -> Result<f64> { Ok(m_at(l)? - 1.0 / l) };

    let g_hi = g(l_max)?;
    if g_hi <= 0.0 {
        // No crossing inside the available window: the sup is M(l_max).
        let value = m_at(l_max)?;
        let truncated = truncated_by_data && value < 1.0 / l_max;
        return Ok(BebutovResult { value, truncated });
    }
    let mut lo = 1e-9_f64.min(l_max / 2.0);
    let mut g_lo = g(lo)?;
    while g_lo > 0.0 {
        // M(0+) already exceeds 1/lo; shrink toward zero. The distance is
        // then essentially 1/lo -> huge, bounded by M anyway.
        lo /= 10.0;
        if lo < 1e-15 {
            return Ok(BebutovResult {
                value: m_at(l_max)?,
                truncated: false,
            });
        }
        g_lo = g(lo)?;
    }
    let mut hi = l_max;
    // Resolve L to machine precision so metric identities (symmetry,
    // triangle inequality) hold to 1e-12 on the computed values.
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let l_star = 0.5 * (lo + hi);
    Ok(BebutovResult {
        value: 1.0 / l_star,
        truncated: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trichotomy {
    Less,
    Equal,
    Greater,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub relation: Trichotomy,
    /// `max_{|t| <= 1/eps} |phi - psi|`.
    pub window_sup: f64,
    pub epsilon: f64,
}

/// `d(phi, psi) < eps  <=>  max_{|t| <= 1/eps} |phi - psi| < eps`, and the
/// same with `=` and `>`. Requires the sampled domains to cover the window
/// `|t| <= 1/eps`.
pub fn check_lemma_l1(
    phi: &SampledFunction,
    psi: &SampledFunction,
    eps: f64,
) -> Result<LemmaCheck> {
    if !(eps > 0.0) {
        return Err(CoreError::Parameter("eps must be positive".into()));
    }
    let l = 1.0 / eps;
    let (dom_lo, dom_hi) = common_window(phi, psi);
    let covered = match phi.domain {
        DomainKind::FullLine | DomainKind::Integers => dom_lo <= -l && dom_hi >= l,
        DomainKind::HalfLine => dom_lo <= 0.0 && dom_hi >= l,
    };
    if !covered {
        return Err(CoreError::Range(format!(
            "sampled domain [{dom_lo}, {dom_hi}] does not cover |t| <= {l}"
        )));
    }
    let window_sup = sup_difference(phi, psi, l)?;
    let relation = if (window_sup - eps).abs() <= 1e-9 {
        Trichotomy::Equal
    } else if window_sup < eps {
        Trichotomy::Less
    } else {
        Trichotomy::Greater
    };
    Ok(LemmaCheck {
        relation,
        window_sup,
        epsilon: eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailShift {
    /// The far-tail translates settle on a constant function.
    Constant(f64),
    /// The far-tail translates settle on a nonconstant `tau`-periodic
    /// function.
    TauPeriodic,
    /// Neither within tolerance.
    Undetermined,
}

/// Looks at the translates `t -> phi(t + h)` for the shifts in `h_list`,
/// each restricted to `[0, window]`, and decides whether they approach a
/// constant or a `tau`-periodic limit.
pub fn tail_shift_classification(
    traj: &Trajectory,
    h_list: &[f64],
    window: f64,
    tau: f64,
    const_tol: f64,
) -> Result<TailShift> {
    if h_list.is_empty() {
        return Err(CoreError::Parameter("h_list must be non-empty".into()));
    }
    if window <= 0.0 || tau <= 0.0 {
        return Err(CoreError::Parameter("window and tau must be positive".into()));
    }
    for &h in h_list {
        if h < traj.t0 || h + window + tau > traj.t_end + 1e-9 {
            return Err(CoreError::Range(format!(
                "shift {h} needs data on [{h}, {}] but the trajectory ends at {}",
                h + window + tau,
                traj.t_end
            )));
        }
    }
    let n = 512usize;
    let grid: Vec<f64> = if traj.kind == FieldKind::Map {
        (0..=(window.floor() as usize)).map(|i| i as f64).collect()
    } else {
        (0..=n).map(|i| window * i as f64 / n as f64).collect()
    };

    let mut flat = 0.0_f64;
    let mut periodic_defect = 0.0_f64;
    let mut last_mean = 0.0_f64;
    for &h in h_list {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &t in &grid {
            let a = traj.sample(h + t)?;
            let b = traj.sample(h + t + tau)?;
            lo = lo.min(a);
            hi = hi.max(a);
            sum += a;
            periodic_defect = periodic_defect.max((b - a).abs());
        }
        flat = flat.max(hi - lo);
        last_mean = sum / grid.len() as f64;
    }
    if flat < const_tol {
        return Ok(TailShift::Constant(last_mean));
    }
    if periodic_defect < const_tol {
        return Ok(TailShift::TauPeriodic);
    }
    Ok(TailShift::Undetermined)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> SampledFunction {
        let step = (hi - lo) / n as f64;
        let values = (0..=n).map(|i| f(lo + step * i as f64)).collect();
        SampledFunction::new(DomainKind::FullLine, step, lo, values).unwrap()
    }

    #[test]
    fn distance_to_self_zero() {
        let phi = sampled(|t| t.sin(), -50.0, 50.0, 5000);
        let d = bebutov_distance(&phi, &phi, 40.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(!d.truncated);
    }

    #[test]
    fn constant_offset_distance() {
        // |phi - psi| = c everywhere: min{c, 1/L} has sup c once 1/L can
        // exceed c, i.e. whenever c <= 1/L at the crossing: d = c for c <= ...
        // For c = 0.5: crossing at L = 2, d = 1/2 = c exactly.
        let phi = sampled(|_| 0.0, -50.0, 50.0, 2000);
        let psi = sampled(|_| 0.5, -50.0, 50.0, 2000);
        let d = bebutov_distance(&phi, &psi, 40.0).unwrap();
        assert!((d.value - 0.5).abs() < 1e-6, "got {}", d.value);
    }

    #[test]
    fn small_constant_no_crossing() {
        // c = 0.01 and window capped at L = 40: 1/40 = 0.025 > c, so the
        // sup is just c.
        let phi = sampled(|_| 0.0, -40.0, 40.0, 2000);
        let psi = sampled(|_| 0.01, -40.0, 40.0, 2000);
        let d = bebutov_distance(&phi, &psi, 40.0).unwrap();
        assert!((d.value - 0.01).abs() < 1e-9);
        assert!(!d.truncated);
    }

    #[test]
    fn truncation_flag() {
        let phi = sampled(|_| 0.0, -5.0, 5.0, 100);
        let psi = sampled(|_| 0.01, -5.0, 5.0, 100);
        let d = bebutov_distance(&phi, &psi, 1000.0).unwrap();
        assert!((d.value - 0.01).abs() < 1e-9);
        assert!(d.truncated);
    }

    #[test]
    fn symmetry_and_triangle() {
        let f1 = sampled(|t| t.sin(), -30.0, 30.0, 3000);
        let f2 = sampled(|t| (t + 0.3).sin(), -30.0, 30.0, 3000);
        let f3 = sampled(|t| 0.5 * t.cos(), -30.0, 30.0, 3000);
        let d12 = bebutov_distance(&f1, &f2, 25.0).unwrap().value;
        let d21 = bebutov_distance(&f2, &f1, 25.0).unwrap().value;
        assert!((d12 - d21).abs() < 1e-9);
        let d13 = bebutov_distance(&f1, &f3, 25.0).unwrap().value;
        let d23 = bebutov_distance(&f2, &f3, 25.0).unwrap().value;
        assert!(d13 <= d12 + d23 + 1e-7);
    }

    #[test]
    fn lemma_l1_agrees_with_distance() {
        let f1 = sampled(|t| t.sin(), -60.0, 60.0, 6000);
        let f2 = sampled(|t| t.sin() + 0.2, -60.0, 60.0, 6000);
        let d = bebutov_distance(&f1, &f2, 50.0).unwrap().value;
        for eps in [0.05, 0.1, 0.3, 0.5] {
            let check = check_lemma_l1(&f1, &f2, eps).unwrap();
            let expect = if (d - eps).abs() <= 1e-7 {
                Trichotomy::Equal
            } else if d < eps {
                Trichotomy::Less
            } else {
                Trichotomy::Greater
            };
            assert_eq!(check.relation, expect, "eps={eps}, d={d}");
        }
    }

    #[test]
    fn lemma_requires_coverage() {
        let f1 = sampled(|t| t.sin(), -5.0, 5.0, 100);
        let f2 = sampled(|t| t.cos(), -5.0, 5.0, 100);
        assert!(check_lemma_l1(&f1, &f2, 0.01).is_err());
    }

    #[test]
    fn shift_translates() {
        let phi = sampled(|t| t, -10.0, 10.0, 200);
        let shifted = phi.shifted(3.0).unwrap();
        assert!((shifted.eval(0.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let phi = sampled(|t| t.cos(), -2.0, 2.0, 40);
        let mut buf = Vec::new();
        phi.write_csv(&mut buf).unwrap();
        let back =
            SampledFunction::read_csv(std::io::BufReader::new(&buf[..]), DomainKind::FullLine)
                .unwrap();
        assert_eq!(back.values.len(), phi.values.len());
        for (a, b) in back.values.iter().zip(phi.values.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((back.step - phi.step).abs() < 1e-12);
    }
}
