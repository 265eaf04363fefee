//! Densely sampled solutions with interpolation and blow-up flags.

use std::io::Write;

use crate::error::{CoreError, Result};
use crate::field::FieldKind;

/// One accepted integrator step with its dense-output coefficients.
#[derive(Debug, Clone, Copy)]
pub struct OdeStep {
    pub t: f64,
    pub h: f64,
    /// Solution value at the start of the step.
    pub x: f64,
    /// Derivative at the start of the step.
    pub dx: f64,
    /// Quartic interpolation coefficients over the step.
    pub cont: [f64; 5],
}

#[derive(Debug, Clone)]
pub(crate) enum TrajData {
    Ode {
        steps: Vec<OdeStep>,
        end_t: f64,
        end_x: f64,
        end_dx: f64,
    },
    Map {
        start: i64,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: FieldKind,
    pub t0: f64,
    pub t_end: f64,
    /// Set to the truncation time when |x| reached the blow-up threshold.
    pub blew_up: Option<f64>,
    pub tolerance_used: f64,
    pub(crate) data: TrajData,
}

impl Trajectory {
    pub(crate) fn new_ode(
        t0: f64,
        steps: Vec<OdeStep>,
        end_t: f64,
        end_x: f64,
        end_dx: f64,
        blew_up: Option<f64>,
        tolerance_used: f64,
    ) -> Self {
        Trajectory {
            kind: FieldKind::Ode,
            t0,
            t_end: end_t,
            blew_up,
            tolerance_used,
            data: TrajData::Ode {
                steps,
                end_t,
                end_x,
                end_dx,
            },
        }
    }

    pub(crate) fn new_map(start: i64, values: Vec<f64>, blew_up: Option<f64>, x_max: f64) -> Self {
        let t_end = start as f64 + (values.len().saturating_sub(1)) as f64;
        Trajectory {
            kind: FieldKind::Map,
            t0: start as f64,
            t_end,
            blew_up,
            tolerance_used: x_max,
            data: TrajData::Map { start, values },
        }
    }

    /// Node list as `(t, x, derivative_or_next)` triples. For maps the third
    /// entry is the successor value (NaN at the final node).
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        match &self.data {
            TrajData::Ode {
                steps,
                end_t,
                end_x,
                end_dx,
            } => {
                let mut out: Vec<(f64, f64, f64)> =
                    steps.iter().map(|s| (s.t, s.x, s.dx)).collect();
                out.push((*end_t, *end_x, *end_dx));
                out
            }
            TrajData::Map { start, values } => values
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let next = values.get(k + 1).copied().unwrap_or(f64::NAN);
                    ((*start + k as i64) as f64, v, next)
                })
                .collect(),
        }
    }

    pub fn final_value(&self) -> f64 {
        match &self.data {
            TrajData::Ode { end_x, .. } => *end_x,
            TrajData::Map { values, .. } => *values.last().expect("non-empty trajectory"),
        }
    }

    /// Interpolated value at `t`. Exact at node times; for maps, `t` must be
    /// (within 1e-9 of) an integer node.
    pub fn sample(&self, t: f64) -> Result<f64> {
        if t < self.t0 - 1e-12 || t > self.t_end + 1e-12 {
            return Err(CoreError::Range(format!(
                "t={t} outside trajectory domain [{}, {}]",
                self.t0, self.t_end
            )));
        }
        match &self.data {
            TrajData::Ode {
                steps,
                end_t,
                end_x,
                ..
            } => {
                if steps.is_empty() || t >= *end_t {
                    return Ok(*end_x);
                }
                // Last step whose start time is <= t.
                let idx = match steps.binary_search_by(|s| s.t.partial_cmp(&t).unwrap()) {
                    Ok(i) => i,
                    Err(0) => 0,
                    Err(i) => i - 1,
                };
                let step = &steps[idx];
                if t == step.t {
                    return Ok(step.x);
                }
                let theta = (t - step.t) / step.h;
                let theta1 = 1.0 - theta;
                let c = &step.cont;
                Ok(c[0] + theta * (c[1] + theta1 * (c[2] + theta * (c[3] + theta1 * c[4]))))
            }
            TrajData::Map { start, values } => {
                let k = t.round();
                if (t - k).abs() > 1e-9 {
                    return Err(CoreError::Range(format!(
                        "map trajectories are defined on integer times only, got t={t}"
                    )));
                }
                let idx = k as i64 - start;
                if idx < 0 || idx as usize >= values.len() {
                    return Err(CoreError::Range(format!("t={t} outside map trajectory")));
                }
                Ok(values[idx as usize])
            }
        }
    }

    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        match &self.data {
            TrajData::Ode { steps, .. } => steps.len() + 1,
            TrajData::Map { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CSV export with header `t,x` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x")?;
        for (t, x, _) in self.nodes() {
            writeln!(w, "{t:.16e},{x:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_map(n: usize, v: f64) -> Trajectory {
        Trajectory::new_map(0, vec![v; n], None, 1e8)
    }

    #[test]
    fn map_sample_at_nodes() {
        let traj = constant_map(5, 7.0);
        assert_eq!(traj.sample(3.0).unwrap(), 7.0);
        assert!(traj.sample(3.5).is_err());
        assert!(traj.sample(9.0).is_err());
    }

    #[test]
    fn csv_header_and_precision() {
        let traj = constant_map(2, 1.0 / 3.0);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x\n"));
        assert!(s.contains("3.3333333333333331e-1"));
    }
}
