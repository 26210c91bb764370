//! Long-format evaluation reports.

use super::classify::RatioScores;
use super::cluster::ClusteringScores;
use super::metrics::mean_std;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub const NMI_NORMALIZATION: &str = "arithmetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MacroF1,
    MicroF1,
    Nmi,
    Ari,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MacroF1 => "macro_f1",
            Metric::MicroF1 => "micro_f1",
            Metric::Nmi => "nmi",
            Metric::Ari => "ari",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub setting: String,
    pub ratio: Option<f64>,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

/// Rows of `(setting, ratio, metric) → mean, std` plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: String,
    pub seed: u64,
    pub config_hash: String,
    pub nmi_normalization: String,
    pub rows: Vec<MetricRow>,
    /// Free-form remarks such as resampled splits.
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    task: &'a str,
    setting: &'a str,
    ratio: Option<f64>,
    metric: &'a str,
    mean: f64,
    std: f64,
    repeats: usize,
    seed: u64,
    config_hash: &'a str,
}

impl EvalReport {
    pub fn new(task: impl Into<String>, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            seed,
            config_hash: config_hash.into(),
            nmi_normalization: NMI_NORMALIZATION.into(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_classification(&mut self, setting: &str, scores: &[RatioScores]) {
        for s in scores {
            for (metric, values) in [(Metric::MacroF1, &s.macro_f1), (Metric::MicroF1, &s.micro_f1)] {
                let (mean, std) = mean_std(values);
                self.rows.push(MetricRow { setting: setting.into(), ratio: Some(s.ratio), metric, mean, std, repeats: values.len() });
            }
            if s.resampled > 0 {
                self.notes.push(format!("{setting}: {} split(s) redrawn at ratio {} for a missing class", s.resampled, s.ratio));
            }
        }
    }

    pub fn add_clustering(&mut self, setting: &str, scores: &ClusteringScores) {
        for (metric, values) in [(Metric::Nmi, &scores.nmi), (Metric::Ari, &scores.ari)] {
            let (mean, std) = mean_std(values);
            self.rows.push(MetricRow { setting: setting.into(), ratio: None, metric, mean, std, repeats: values.len() });
        }
        if scores.empty_reinits > 0 {
            self.notes.push(format!("{setting}: {} empty cluster(s) reinitialised", scores.empty_reinits));
        }
    }

    pub fn get(&self, setting: &str, metric: Metric, ratio: Option<f64>) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.setting == setting && r.metric == metric && r.ratio == ratio)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow {
                task: &self.task,
                setting: &r.setting,
                ratio: r.ratio,
                metric: r.metric.as_str(),
                mean: r.mean,
                std: r.std,
                repeats: r.repeats,
                seed: self.seed,
                config_hash: &self.config_hash,
            })
            .expect("in-memory CSV write");
        }
        if self.rows.is_empty() {
            return "task,setting,ratio,metric,mean,std,repeats,seed,config_hash\n".into();
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let _ = writeln!(s, "seed: {}  config: {}  nmi normalization: {}", self.seed, self.config_hash, self.nmi_normalization);
        let width = self.rows.iter().map(|r| r.setting.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(s, "{:<width$}  {:>5}  {:<8}  {:>7}  {:>7}  {:>3}", "setting", "ratio", "metric", "mean", "std", "n");
        for r in &self.rows {
            let ratio = r.ratio.map_or("-".to_string(), |v| format!("{v}"));
            let _ = writeln!(
                s,
                "{:<width$}  {:>5}  {:<8}  {:>7.4}  {:>7.4}  {:>3}",
                r.setting,
                ratio,
                r.metric.as_str(),
                r.mean,
                r.std,
                r.repeats
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }

    /// Writes `<stem>.csv`, `<stem>.txt` and `<stem>.json` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.txt")), self.summary())?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self).expect("report serializes"))
    }
}
