//! CSV export of convergence records.
//!
//! Layout: header `meshsize,<metric columns>,Rate`, one row per mesh
//! size, floats in shortest round-trip notation with a decimal point, no
//! thousands separators, `\n` terminators. The `Rate` column carries the
//! fitted rate of the first requested metric, filled post hoc into every
//! record. Wall times are kept in memory only, so identical configurations
//! export byte-identical files.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use upwind_core::error::{Error, Result};

use crate::config::MetricKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    /// Cell width `2^-k` of the sweep point.
    pub meshsize: f64,
    /// Error per metric, aligned with the study's metric list.
    pub errors: Vec<f64>,
    /// Fitted rate of the primary metric (post hoc, same in every row).
    pub rate: f64,
    /// Seconds spent on this sweep point; not serialized.
    pub wall_time: f64,
}

pub fn export_csv(records: &[ErrorRecord], metrics: &[MetricKind], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to export".into()));
    }
    let mut out = String::new();
    out.push_str("meshsize");
    for m in metrics {
        out.push(',');
        out.push_str(m.column());
    }
    out.push_str(",Rate\n");
    for r in records {
        if r.errors.len() != metrics.len() {
            return Err(Error::InvalidConfig(
                "record has a different metric count than the header".into(),
            ));
        }
        out.push_str(&format!("{}", r.meshsize));
        for e in &r.errors {
            out.push_str(&format!(",{e}"));
        }
        out.push_str(&format!(",{}\n", r.rate));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Parses a file written by [`export_csv`]. Wall times are not stored in
/// the file and come back as zero.
pub fn parse_csv(path: &Path) -> Result<(Vec<ErrorRecord>, Vec<MetricKind>)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("empty CSV".into()))??;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.first() != Some(&"meshsize") || cols.last() != Some(&"Rate") || cols.len() < 3 {
        return Err(Error::InvalidConfig(format!("unexpected CSV header '{header}'")));
    }
    let metrics: Vec<MetricKind> = cols[1..cols.len() - 1]
        .iter()
        .map(|c| MetricKind::from_column(c))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::InvalidConfig(format!(
                "row '{row}' does not match the header width"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse number '{s}'")))
        };
        records.push(ErrorRecord {
            meshsize: parse(fields[0])?,
            errors: fields[1..fields.len() - 1]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
            rate: parse(fields[fields.len() - 1])?,
            wall_time: 0.0,
        });
    }
    Ok((records, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("upwind_csv_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn single_record_two_lines() {
        let path = tmp("single.csv");
        let records = vec![ErrorRecord {
            meshsize: 0.5,
            errors: vec![0.1],
            rate: 0.0,
            wall_time: 1.0,
        }];
        export_csv(&records, &[MetricKind::L1], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "meshsize,L1,Rate\n0.5,0.1,0\n");
    }

    #[test]
    fn seven_record_sweep_has_eight_lines() {
        let path = tmp("sweep.csv");
        let records: Vec<ErrorRecord> = (5..12)
            .map(|k| {
                let h = 2f64.powi(-k);
                ErrorRecord {
                    meshsize: h,
                    errors: vec![h.sqrt(), 0.5 * h.sqrt()],
                    rate: 0.5,
                    wall_time: 0.0,
                }
            })
            .collect();
        export_csv(&records, &[MetricKind::L1, MetricKind::Hm1], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("meshsize,L1,H-1,Rate\n"));
    }

    #[test]
    fn round_trip_is_exact() {
        let path = tmp("roundtrip.csv");
        let records: Vec<ErrorRecord> = (3..9)
            .map(|k| {
                let h = 2f64.powi(-k);
                ErrorRecord {
                    meshsize: h,
                    errors: vec![h.sqrt() * 0.731, h * std::f64::consts::PI],
                    rate: 0.4999999999,
                    wall_time: 0.0,
                }
            })
            .collect();
        let metrics = vec![MetricKind::L1, MetricKind::Kr];
        export_csv(&records, &metrics, &path).unwrap();
        let (parsed, parsed_metrics) = parse_csv(&path).unwrap();
        assert_eq!(parsed_metrics, metrics);
        assert_eq!(parsed.len(), records.len());
        for (a, b) in parsed.iter().zip(&records) {
            assert_eq!(a.meshsize, b.meshsize);
            assert_eq!(a.errors, b.errors);
            assert_eq!(a.rate, b.rate);
        }
    }
}
