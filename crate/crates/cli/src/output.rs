//! Schema-stable CSV and JSON writers.
//!
//! Times are written in µs with six decimals and values in scientific
//! notation with twelve significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use floquet_control::floquet::ControlModel;
use floquet_control::optimizer::TraceRow;
use serde::Serialize;

/// Columns sampled on a common time grid.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Series {
    pub fn uniform(end: f64, samples: usize) -> Self {
        let n = samples.max(2);
        let times = (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect();
        Self { times, columns: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, f: impl Fn(f64) -> f64) {
        let values = self.times.iter().map(|&t| f(t)).collect();
        self.columns.push((name.into(), values));
    }

    pub fn push_values(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.times.len(), "column length must match the time grid");
        self.columns.push((name.into(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_us");
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{t:.6}").unwrap();
            for (_, v) in &self.columns {
                write!(out, ",{:.11e}", v[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Iteration trace rows tagged with the optimization stage they belong to.
pub fn trace_csv(stages: &[(String, &[TraceRow])]) -> String {
    let mut out = String::from("stage,iter,f,f0,fp,t_f_us,grad_norm,max_amp,penalty_weight,step\n");
    for (stage, rows) in stages {
        for r in rows.iter() {
            writeln!(
                out,
                "{stage},{},{:.11e},{:.11e},{:.11e},{:.6},{:.11e},{:.11e},{:.11e},{:.11e}",
                r.iter, r.f, r.f0, r.fp, r.t_f, r.grad_norm, r.max_amp, r.penalty_weight, r.step
            )
            .unwrap();
        }
    }
    out
}

/// Control fields `f_j(t)` of each labelled pulse over its own duration.
pub fn pulse_series(pulses: &[(&str, &ControlModel)], channel_names: &[String], samples: usize) -> Series {
    let end = pulses.iter().map(|(_, m)| m.pulse_end()).fold(0.0, f64::max);
    let mut s = Series::uniform(end, samples);
    for (label, m) in pulses {
        for (j, name) in channel_names.iter().enumerate() {
            let tf = m.pulse_end();
            s.push(format!("{label}_{name}"), |t| if t <= tf { m.field(j, t) } else { 0.0 });
        }
    }
    s
}

/// `f_x1, f_y1, f_xN, f_yN` for x/y controls on the given sites.
pub fn channel_names(sites: &[usize]) -> Vec<String> {
    sites.iter().flat_map(|s| [format!("f_x{s}"), format!("f_y{s}")]).collect()
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}
