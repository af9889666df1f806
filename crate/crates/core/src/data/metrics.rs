/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Per-iteration metrics file.

use std::path::Path;

use crate::consensus::IterationRecord;

use super::DataError;

pub const METRICS_HEADER: [&str; 9] = [
    "k",
    "r_norm",
    "s_norm",
    "aug_lagrangian",
    "eps_max",
    "nlp_solves",
    "linear_solves",
    "max_worker_wall_time_s",
    "mode",
];

/// One parsed line of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub aug_lagrangian: f64,
    pub eps_max: f64,
    pub nlp_solves: usize,
    pub linear_solves: usize,
    pub max_worker_wall_time_s: f64,
    pub mode: String,
}

impl MetricsRow {
    pub fn from_record(rec: &IterationRecord, record_wall_time: bool) -> Self {
        MetricsRow {
            k: rec.k,
            r_norm: rec.r_norm,
            s_norm: rec.s_norm,
            aug_lagrangian: rec.aug_lagrangian,
            eps_max: rec.eps_max,
            nlp_solves: rec.nlp_solves,
            linear_solves: rec.linear_solves,
            max_worker_wall_time_s: if record_wall_time { rec.max_worker_wall_time_s } else { 0.0 },
            mode: rec.mode_label().to_string(),
        }
    }
}

// 17 significant digits, enough to round-trip any f64.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one row per iteration. With `record_wall_time` off the timing
/// column is zeroed so that files from different runs compare bitwise.
pub fn write_metrics(records: &[IterationRecord], path: &Path, record_wall_time: bool) -> Result<(), DataError> {
    let rows: Vec<MetricsRow> = records.iter().map(|r| MetricsRow::from_record(r, record_wall_time)).collect();
    write_rows(&rows, path)
}

pub fn write_rows(rows: &[MetricsRow], path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            real(r.r_norm),
            real(r.s_norm),
            real(r.aug_lagrangian),
            real(r.eps_max),
            r.nlp_solves.to_string(),
            r.linear_solves.to_string(),
            real(r.max_worker_wall_time_s),
            r.mode.clone(),
        ])?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, DataError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(DataError::Config(format!("unexpected metrics header: {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != METRICS_HEADER.len() {
            return Err(DataError::Ragged { line, expected: METRICS_HEADER.len(), found: rec.len() });
        }
        let bad = |c: usize| DataError::NonNumeric { line, column: METRICS_HEADER[c].into(), value: rec[c].into() };
        let f = |c: usize| rec[c].parse::<f64>().map_err(|_| bad(c));
        let u = |c: usize| rec[c].parse::<usize>().map_err(|_| bad(c));
        out.push(MetricsRow {
            k: u(0)?,
            r_norm: f(1)?,
            s_norm: f(2)?,
            aug_lagrangian: f(3)?,
            eps_max: f(4)?,
            nlp_solves: u(5)?,
            linear_solves: u(6)?,
            max_worker_wall_time_s: f(7)?,
            mode: rec[8].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(k: usize, v: f64) -> MetricsRow {
        MetricsRow {
            k,
            r_norm: v,
            s_norm: v * 3.0,
            aug_lagrangian: -v / 7.0,
            eps_max: v.sqrt(),
            nlp_solves: k,
            linear_solves: 2 * k,
            max_worker_wall_time_s: 1e-5,
            mode: "mixed".into(),
        }
    }

    #[test]
    fn line_counts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics(&[], &p, true).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), METRICS_HEADER.join(",") + "\n");

        let rows: Vec<_> = (0..3).map(|k| row(k, 0.1 * k as f64 + 0.3)).collect();
        write_rows(&rows, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 4);
    }

    proptest! {
        #[test]
        fn reload_is_bitwise(bits in prop::collection::vec(any::<u64>(), 1..20)) {
            let rows: Vec<_> = bits
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let v = f64::from_bits(*b);
                    let v = if v.is_finite() { v.abs() } else { 1.25 };
                    row(k, v)
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.csv");
            write_rows(&rows, &p).unwrap();
            let back = read_metrics(&p).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in back.iter().zip(&rows) {
                for (x, y) in [
                    (a.r_norm, b.r_norm),
                    (a.s_norm, b.s_norm),
                    (a.aug_lagrangian, b.aug_lagrangian),
                    (a.eps_max, b.eps_max),
                ] {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
