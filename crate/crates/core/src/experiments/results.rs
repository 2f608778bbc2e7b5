use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::metrics::MetricSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub series: Vec<MetricSeries>,
    pub wall_clock_secs: f64,
    /// Hash of every schema the run evaluated on.
    pub schema_hashes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// Warnings worth keeping with the results (skipped points, weak sources).
    pub notes: Vec<String>,
    /// Errors of cells that did not finish; their series are absent.
    #[serde(default)]
    pub failures: Vec<String>,
}

impl RunResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub method: String,
    pub dataset: String,
    pub setup: String,
    pub seed: u64,
    pub index: f64,
    pub concept: String,
    pub metric: String,
    pub value: f64,
}

pub const RESULT_COLUMNS: [&str; 9] = ["experiment", "method", "dataset", "setup", "seed", "index", "concept", "metric", "value"];

/// Long-format rows: one per concept, plus "average" and "task".
pub fn records(series: &[MetricSeries]) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for s in series {
        let row = |index: f64, concept: &str, value: f64| ResultRecord {
            experiment: s.experiment.clone(),
            method: s.method.clone(),
            dataset: s.dataset.clone(),
            setup: s.setup.clone(),
            seed: s.seed,
            index,
            concept: concept.to_string(),
            metric: "accuracy".into(),
            value,
        };
        for (i, &index) in s.index.iter().enumerate() {
            for (name, &v) in s.concepts.iter().zip(&s.per_concept[i]) {
                out.push(row(index, name, v));
            }
            out.push(row(index, "average", s.average[i]));
            if let Some(t) = s.task[i] {
                out.push(row(index, "task", t));
            }
        }
    }
    out
}

pub fn write_results_csv(path: &Path, rows: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in RESULT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::InvalidInput(format!("{} is missing column `{col}`", path.display())));
        }
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub dataset: String,
    pub setup: String,
    pub concept: String,
    pub metric: String,
    pub index: f64,
    pub n_seeds: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Interquartile range over seeds.
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

type CellKey = (String, String, String, String, String, String, u64);

/// Median and interquartile range over seeds for every cell.
pub fn summarize_records(rows: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("nothing to summarize".into()));
    }
    let mut cells: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.experiment.clone(),
            r.method.clone(),
            r.dataset.clone(),
            r.setup.clone(),
            r.concept.clone(),
            r.metric.clone(),
            r.index.to_bits(),
        );
        cells.entry(key).or_default().push(r.value);
    }
    let mut out: Vec<SummaryRow> = cells
        .into_iter()
        .map(|((experiment, method, dataset, setup, concept, metric, bits), mut v)| {
            v.sort_by(f64::total_cmp);
            let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
            SummaryRow {
                experiment,
                method,
                dataset,
                setup,
                concept,
                metric,
                index: f64::from_bits(bits),
                n_seeds: v.len(),
                median: quantile(&v, 0.5),
                q1,
                q3,
                iqr: q3 - q1,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.experiment, &a.method, &a.dataset, &a.setup, &a.concept, &a.metric)
            .cmp(&(&b.experiment, &b.method, &b.dataset, &b.setup, &b.concept, &b.metric))
            .then(a.index.total_cmp(&b.index))
    });
    Ok(out)
}

/// Summarizes whole runs, refusing to pool series computed on different
/// schemas under the same experiment, dataset and setup.
pub fn summarize(results: &[RunResult]) -> Result<Vec<SummaryRow>> {
    let mut hashes: BTreeMap<(String, String, String), String> = BTreeMap::new();
    for s in results.iter().flat_map(|r| &r.series) {
        let key = (s.experiment.clone(), s.dataset.clone(), s.setup.clone());
        if let Some(h) = hashes.insert(key.clone(), s.schema_hash.clone()) {
            if h != s.schema_hash {
                return Err(Error::InvalidInput(format!(
                    "mixed schemas for {}/{}/{}: {h} and {}",
                    key.0, key.1, key.2, s.schema_hash
                )));
            }
        }
    }
    let series: Vec<MetricSeries> = results.iter().flat_map(|r| r.series.iter().cloned()).collect();
    summarize_records(&records(&series))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetId;
    use crate::experiments::config::ExperimentKind;

    fn series(seed: u64, hash: &str, acc: f64) -> MetricSeries {
        let mut s = MetricSeries::new("data_efficiency", "cbm", "dsprites", "shape", seed, hash, "fraction", vec!["shape".into()]);
        s.push(0.5, vec![acc], Some(acc)).unwrap();
        s
    }

    fn run(series: Vec<MetricSeries>) -> RunResult {
        RunResult {
            config: ExperimentConfig::new(ExperimentKind::DataEfficiency, DatasetId::Dsprites),
            series,
            wall_clock_secs: 0.0,
            schema_hashes: vec![],
            artifacts: vec![],
            notes: vec![],
            failures: vec![],
        }
    }

    #[test]
    fn median_and_spread() {
        let r = run(vec![series(0, "h", 0.5), series(1, "h", 0.7), series(2, "h", 0.6)]);
        let rows = summarize(&[r]).unwrap();
        let shape = rows.iter().find(|r| r.concept == "shape").unwrap();
        assert_eq!(shape.n_seeds, 3);
        assert!((shape.median - 0.6).abs() < 1e-12);
        assert!((shape.iqr - 0.1).abs() < 1e-12);
        let single = summarize(&[run(vec![series(0, "h", 0.5)])]).unwrap();
        assert!(single.iter().all(|r| r.iqr == 0.0));
    }

    #[test]
    fn rows_are_sorted_and_deterministic() {
        let mut a = series(0, "h", 0.5);
        a.method = "wvae".into();
        let r = run(vec![a, series(0, "h", 0.9)]);
        let rows = summarize(&[r.clone()]).unwrap();
        assert_eq!(rows, summarize(&[r]).unwrap());
        let keys: Vec<_> = rows.iter().map(|r| (r.method.clone(), r.concept.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys[0], ("cbm".to_string(), "average".to_string()));
    }

    #[test]
    fn mixed_schemas_rejected() {
        assert!(summarize(&[run(vec![series(0, "a", 0.5), series(1, "b", 0.5)])]).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        let rows = records(&[series(0, "h", 0.25), series(1, "h", 1.0 / 3.0)]);
        write_results_csv(&p, &rows).unwrap();
        assert_eq!(read_results_csv(&p).unwrap(), rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("experiment,method,dataset,setup,seed,index,concept,metric,value"));
        std::fs::write(&p, "experiment,value\nx,1\n").unwrap();
        assert!(read_results_csv(&p).unwrap_err().to_string().contains("method"));
    }
}
