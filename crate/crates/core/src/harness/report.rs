use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One metric value of one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub generator: String,
    pub epsilon: String,
    pub replica: usize,
    pub attack: String,
    pub setting: String,
    pub metric: String,
    pub value: f64,
}

pub fn format_epsilon(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".into()
    } else {
        eps.to_string()
    }
}

pub fn write_rows(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

/// Aggregate of one (generator, epsilon, attack, setting, metric) cell over
/// replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub generator: String,
    pub epsilon: String,
    pub attack: String,
    pub setting: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single replica.
    pub std: f64,
    pub median: f64,
}

/// Groups rows by cell, in order of first appearance.
pub fn summarize(rows: &[MetricRow]) -> Vec<SummaryCell> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(String, String, String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.generator.clone(),
            r.epsilon.clone(),
            r.attack.clone(),
            r.setting.clone(),
            r.metric.clone(),
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let mut v = groups.remove(&key).expect("grouped");
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            v.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
            let (generator, epsilon, attack, setting, metric) = key;
            SummaryCell { generator, epsilon, attack, setting, metric, n, mean, std, median }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(replica: usize, value: f64) -> MetricRow {
        MetricRow {
            generator: "mst".into(),
            epsilon: "1".into(),
            replica,
            attack: "tamis-mst".into(),
            setting: "target-households".into(),
            metric: "auroc".into(),
            value,
        }
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[row(0, 0.5), row(1, 0.7), row(2, 0.9), row(3, 0.6)]);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 0.675).abs() < 1e-12);
        assert!((s[0].median - 0.65).abs() < 1e-12);
        let var = [0.5f64, 0.7, 0.9, 0.6].iter().map(|x| (x - 0.675).powi(2)).sum::<f64>() / 3.0;
        assert!((s[0].std - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![row(0, 0.123456789), row(1, 1.0 / 3.0)];
        write_rows(&p, &rows).unwrap();
        assert_eq!(read_rows(&p).unwrap(), rows);
        assert_eq!(format_epsilon(f64::INFINITY), "inf");
        assert_eq!(format_epsilon(0.1), "0.1");
    }
}
