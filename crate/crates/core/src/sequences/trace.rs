use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One-dimensional experiment output: an axis, a main signal, optional
/// extra columns, and string metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub name: String,
    /// Column header of the axis including its unit, e.g. `field_T`.
    pub axis_label: String,
    pub axis: Vec<f64>,
    pub signal_label: String,
    pub signal: Vec<f64>,
    #[serde(default)]
    pub extra: Vec<(String, Vec<f64>)>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl TraceResult {
    pub fn new(
        name: &str,
        axis_label: &str,
        axis: Vec<f64>,
        signal_label: &str,
        signal: Vec<f64>,
    ) -> Self {
        TraceResult {
            name: name.to_string(),
            axis_label: axis_label.to_string(),
            axis,
            signal_label: signal_label.to_string(),
            signal,
            extra: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_column(mut self, label: &str, values: Vec<f64>) -> Self {
        self.extra.push((label.to_string(), values));
        self
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        if label == self.signal_label {
            return Some(&self.signal);
        }
        self.extra
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    /// Strictly monotonic axis and equal column lengths.
    pub fn validate(&self) -> Result<()> {
        if self.signal.len() != self.axis.len() {
            return Err(invalid("signal and axis lengths differ"));
        }
        for (l, v) in &self.extra {
            if v.len() != self.axis.len() {
                return Err(invalid(format!("column {l} has the wrong length")));
            }
        }
        let inc = self.axis.windows(2).all(|w| w[1] > w[0]);
        let dec = self.axis.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return Err(invalid("axis is not strictly monotonic"));
        }
        Ok(())
    }

    /// CSV with `# key: value` header lines, then a column header, then rows
    /// in fixed `{:.12e}` format.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# name: {}", self.name);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let mut header = vec![self.axis_label.clone(), self.signal_label.clone()];
        header.extend(self.extra.iter().map(|(l, _)| l.clone()));
        let _ = writeln!(out, "{}", header.join(","));
        for i in 0..self.axis.len() {
            let mut row = vec![
                format!("{:.12e}", self.axis[i]),
                format!("{:.12e}", self.signal[i]),
            ];
            row.extend(self.extra.iter().map(|(_, v)| format!("{:.12e}", v[i])));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }

    /// Index of the largest signal value.
    pub fn argmax(&self) -> Option<usize> {
        self.signal
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Local maxima above `rel_threshold` × global max, sorted by position.
pub fn find_peaks(axis: &[f64], signal: &[f64], rel_threshold: f64) -> Vec<(f64, f64)> {
    let max = signal.iter().fold(0.0_f64, |a, &v| a.max(v));
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 1..signal.len().saturating_sub(1) {
        let v = signal[i];
        if v >= rel_threshold * max && v > signal[i - 1] && v >= signal[i + 1] {
            out.push((axis[i], v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = TraceResult::new("demo", "time_s", vec![0.0, 1e-6], "signal", vec![1.0, -0.5])
            .with_meta("grid", "equal_area/10")
            .with_column("control", vec![0.0, 0.25]);
        t.validate().unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# name: demo");
        assert_eq!(lines[1], "# grid: equal_area/10");
        assert_eq!(lines[2], "time_s,signal,control");
        assert_eq!(
            lines[3],
            "0.000000000000e0,1.000000000000e0,0.000000000000e0"
        );
    }

    #[test]
    fn non_monotonic_rejected() {
        let t = TraceResult::new("x", "a", vec![0.0, 1.0, 1.0], "s", vec![0.0; 3]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn peaks_found() {
        let x = linspace(0.0, 10.0, 101);
        let y: Vec<f64> = x
            .iter()
            .map(|v| (-(v - 3.0f64).powi(2)).exp() + 0.5 * (-(v - 7.0f64).powi(2)).exp())
            .collect();
        let p = find_peaks(&x, &y, 0.1);
        assert_eq!(p.len(), 2);
        assert!((p[0].0 - 3.0).abs() < 1e-9 && (p[1].0 - 7.0).abs() < 1e-9);
    }
}
