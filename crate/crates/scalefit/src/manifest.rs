//! Run manifests: which files to read, which metrics and budgets to analyse,
//! and where to write.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use scalefit_core::{BaselineStats, FitConfig, RunRecord};
use serde::Deserialize;

use crate::error::InputError;
use crate::io;

/// Paths are resolved against the manifest's own directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub runs: Vec<PathBuf>,
    pub baselines: Option<PathBuf>,
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub budgets: Vec<f64>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a manifest points at, parsed.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub records: Vec<RunRecord>,
    pub baselines: BTreeMap<String, BaselineStats>,
    pub config: FitConfig,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, InputError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| InputError::Io { path: path.into(), source })?;
        let mut m: RunManifest =
            serde_json::from_str(&text).map_err(|source| InputError::Json { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        m.runs.iter_mut().for_each(resolve);
        m.baselines.iter_mut().for_each(resolve);
        m.config.iter_mut().for_each(resolve);
        m.out.iter_mut().for_each(resolve);
        Ok(m)
    }

    /// Reads and validates every referenced file before any analysis runs.
    pub fn load(&self) -> Result<Inputs, InputError> {
        if self.runs.is_empty() {
            return Err(InputError::usage("no run-record files given"));
        }
        let records = io::read_all_runs(&self.runs)?;
        let baselines = match &self.baselines {
            Some(p) => io::read_baselines(p)?,
            None => BTreeMap::new(),
        };
        let config = match &self.config {
            Some(p) => io::read_fit_config(p)?,
            None => FitConfig::default(),
        };
        for metric in &self.metrics {
            if !records.iter().any(|r| r.metrics.contains_key(metric)) {
                return Err(InputError::usage(format!("metric `{metric}` appears in no run record")));
            }
        }
        if let Some(&b) = self.budgets.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return Err(InputError::usage(format!("compute budget {b} is not positive")));
        }
        Ok(Inputs { records, baselines, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn relative_paths_follow_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("exp");
        fs::create_dir(&sub).unwrap();
        fs::write(sub.join("runs.csv"), "N,D,seed,loss\n1e6,1e8,0,3.0\n").unwrap();
        fs::write(sub.join("base.json"), r#"{"loss":{"mean":2.0,"std":0.1,"direction":"lower-better"}}"#)
            .unwrap();
        fs::write(sub.join("cfg.json"), r#"{"hop_count":5}"#).unwrap();
        fs::write(
            sub.join("m.json"),
            r#"{"runs":["runs.csv"],"baselines":"base.json","metrics":["loss"],"budgets":[6e14],"config":"cfg.json"}"#,
        )
        .unwrap();
        let m = RunManifest::read(&sub.join("m.json")).unwrap();
        assert_eq!(m.runs, [sub.join("runs.csv")]);
        let inputs = m.load().unwrap();
        assert_eq!(inputs.records.len(), 1);
        assert_eq!(inputs.config.hop_count, 5);
        assert_eq!(inputs.baselines["loss"].mean, 2.0);
    }

    #[test]
    fn unknown_metric_is_rejected_before_analysis() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("runs.csv"), "N,D,seed,loss\n1e6,1e8,0,3.0\n").unwrap();
        let m = RunManifest { runs: vec![dir.path().join("runs.csv")], metrics: vec!["acc".into()], ..Default::default() };
        assert!(m.load().unwrap_err().to_string().contains("acc"));
    }
}
