//! Multi-seed experiment runner and report writer.
//!
//! A run is one `(delta, seed)` cell of an [`ExperimentSpec`]. Runs are
//! independent and internally single-threaded; [`run_ablation`] spreads them
//! over a bounded worker pool and collects results in grid order, so reports
//! do not depend on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dyadic::{evaluate, DyadicScheme, FairnessRecord, GroupPolicy, DEFAULT_THRESHOLD};
use crate::embedding::{embed, WalkConfig};
use crate::error::{Error, Result};
use crate::fairdrop::{check_delta, DropoutMode};
use crate::gcn::{train_link_predictor, LinkPredictorRun, TrainConfig};
use crate::graph::{load_dataset, split_edges, Dataset};
use crate::rb::{rb_report, LogisticProbe, RbReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "FAIRDROP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Embed,
    #[serde(alias = "gcn-linkpred")]
    Gcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    None,
    Edgedrop,
    Fairdrop,
}

impl ModeKind {
    pub fn with_delta(self, delta: f64, edgedrop_p: f64) -> DropoutMode {
        match self {
            ModeKind::None => DropoutMode::None,
            ModeKind::Edgedrop => DropoutMode::EdgeDrop { p: edgedrop_p },
            ModeKind::Fairdrop => DropoutMode::FairDrop { delta },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnSettings {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
}

impl Default for GcnSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            lr: d.lr,
            hidden: d.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSettings {
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub p: f64,
    pub q: f64,
    /// Also score link RB over the graph's edges.
    pub link_rb: bool,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        let d = WalkConfig::default();
        Self {
            dim: d.dim,
            walks_per_node: d.walks_per_node,
            walk_length: d.walk_length,
            window: d.window,
            negatives: d.negatives,
            epochs: d.epochs,
            lr: d.lr,
            p: d.p,
            q: d.q,
            link_rb: true,
        }
    }
}

impl EmbedSettings {
    pub fn walk_config(&self, seed: u64) -> WalkConfig {
        WalkConfig {
            dim: self.dim,
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            lr: self.lr,
            p: self.p,
            q: self.q,
            seed,
            ..WalkConfig::default()
        }
    }
}

fn default_deltas() -> Vec<f64> {
    vec![0.25]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_mode() -> ModeKind {
    ModeKind::Fairdrop
}

fn default_edgedrop_p() -> f64 {
    0.5
}

fn default_schemes() -> Vec<DyadicScheme> {
    DyadicScheme::ALL.to_vec()
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub task: Task,
    pub edges: PathBuf,
    pub attrs: PathBuf,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_mode")]
    pub mode: ModeKind,
    #[serde(default = "default_edgedrop_p")]
    pub edgedrop_p: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<DyadicScheme>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub skip_deficient: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub gcn: GcnSettings,
    #[serde(default)]
    pub embed: EmbedSettings,
}

impl ExperimentSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: Self = serde_json::from_str(&text)?;
        // relative dataset paths resolve against the spec's directory
        if let Some(base) = path.parent() {
            for p in [&mut spec.edges, &mut spec.attrs, &mut spec.output_dir]
                .into_iter()
                .chain(spec.features.as_mut())
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "delta grid and seed list must be nonempty".into(),
            ));
        }
        for &d in &self.deltas {
            check_delta(d)?;
        }
        if !(0.0..=1.0).contains(&self.edgedrop_p) {
            return Err(Error::InvalidParameter(format!(
                "edgedrop_p {} outside [0, 1]",
                self.edgedrop_p
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.task == Task::Gcn && self.schemes.is_empty() {
            return Err(Error::InvalidParameter("no dyadic schemes selected".into()));
        }
        Ok(())
    }

    pub fn policy(&self) -> GroupPolicy {
        if self.skip_deficient {
            GroupPolicy::SkipDeficient
        } else {
            GroupPolicy::Strict
        }
    }

    pub fn gcn_config(&self, delta: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.gcn.epochs,
            lr: self.gcn.lr,
            hidden: self.gcn.hidden,
            mode: self.mode.with_delta(delta, self.edgedrop_p),
            seed,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Outcome of one `(delta, seed)` cell. Contains no timing so reruns
/// serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub task: Task,
    pub mode: ModeKind,
    pub delta: f64,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Flat metric map, e.g. `auc` or `mixed.delta_dp`.
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fairness: Vec<FairnessRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<RbReport>,
}

impl RunRecord {
    pub fn file_name(&self) -> String {
        format!("run_delta{:.4}_seed{}.json", self.delta, self.seed)
    }

    fn failed(spec: &ExperimentSpec, delta: f64, seed: u64, err: &Error) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task: spec.task,
            mode: spec.mode,
            delta,
            seed,
            status: RunStatus::Failed,
            error: Some(err.to_string()),
            metrics: BTreeMap::new(),
            fairness: Vec::new(),
            rb: None,
        }
    }
}

/// Fairness metrics of a trained link predictor under each scheme.
pub fn gcn_metrics(
    run: &LinkPredictorRun,
    dataset: &Dataset,
    schemes: &[DyadicScheme],
    policy: GroupPolicy,
) -> Result<(BTreeMap<String, f64>, Vec<FairnessRecord>)> {
    let mut metrics = BTreeMap::new();
    let mut records = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let r = evaluate(&run.batch, &run.test_pairs, &dataset.attrs, scheme, policy)?;
        metrics.insert("auc".to_string(), r.auc);
        metrics.insert("accuracy".to_string(), r.accuracy);
        let name = scheme.as_str();
        metrics.insert(format!("{name}.delta_dp"), r.delta_dp);
        metrics.insert(format!("{name}.delta_tpr"), r.delta_tpr);
        metrics.insert(format!("{name}.delta_fpr"), r.delta_fpr);
        metrics.insert(format!("{name}.delta_eo"), r.delta_eo);
        records.push(r);
    }
    Ok((metrics, records))
}

/// Executes a single cell on an already loaded dataset.
pub fn run_one(spec: &ExperimentSpec, dataset: &Dataset, delta: f64, seed: u64) -> Result<RunRecord> {
    let mut record = RunRecord {
        schema_version: SCHEMA_VERSION,
        task: spec.task,
        mode: spec.mode,
        delta,
        seed,
        status: RunStatus::Ok,
        error: None,
        metrics: BTreeMap::new(),
        fairness: Vec::new(),
        rb: None,
    };
    match spec.task {
        Task::Gcn => {
            let split = split_edges(&dataset.graph, spec.test_fraction, seed)?;
            let run = train_link_predictor(
                &split,
                dataset.graph.n(),
                dataset.features.as_ref(),
                &dataset.attrs,
                &spec.gcn_config(delta, seed),
            )?;
            let (metrics, fairness) = gcn_metrics(&run, dataset, &spec.schemes, spec.policy())?;
            record.metrics = metrics;
            record.fairness = fairness;
        }
        Task::Embed => {
            let mode = spec.mode.with_delta(delta, spec.edgedrop_p);
            let z = embed(&dataset.graph, &dataset.attrs, mode, &spec.embed.walk_config(seed))?;
            let edges = spec.embed.link_rb.then(|| dataset.graph.edges());
            let rb = rb_report(&z, edges, &dataset.attrs, &LogisticProbe::default(), seed)?;
            record.metrics.insert("node_rb".into(), rb.node_rb);
            record.metrics.insert("node_rb_macro".into(), rb.node_rb_macro);
            if let (Some(w), Some(m)) = (rb.link_rb, rb.link_rb_macro) {
                record.metrics.insert("link_rb".into(), w);
                record.metrics.insert("link_rb_macro".into(), m);
            }
            record.rb = Some(rb);
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub delta: f64,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    /// Grid order: deltas outer, seeds inner.
    pub records: Vec<RunRecord>,
    pub timings: Vec<RunTiming>,
}

impl AblationOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.status == RunStatus::Failed)
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Worker count from `FAIRDROP_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every cell of the grid on `dataset` with up to `workers` threads.
pub fn run_grid(spec: &ExperimentSpec, dataset: &Dataset, workers: usize) -> Result<AblationOutcome> {
    spec.validate()?;
    let cells: Vec<(f64, u64)> = spec
        .deltas
        .iter()
        .flat_map(|&d| spec.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let slots: Mutex<Vec<Option<(RunRecord, RunTiming)>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(delta, seed)) = cells.get(i) else {
                    break;
                };
                let start = Instant::now();
                let record = run_one(spec, dataset, delta, seed)
                    .unwrap_or_else(|e| RunRecord::failed(spec, delta, seed, &e));
                let timing = RunTiming {
                    delta,
                    seed,
                    seconds: start.elapsed().as_secs_f64(),
                };
                slots.lock().expect("worker panicked")[i] = Some((record, timing));
            });
        }
    });
    let (records, timings) = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|slot| slot.expect("every cell is claimed"))
        .unzip();
    Ok(AblationOutcome { records, timings })
}

/// Loads the spec's dataset, runs the grid and writes the report.
pub fn run_ablation(spec: &ExperimentSpec) -> Result<AblationOutcome> {
    spec.validate()?;
    let dataset = load_dataset(&spec.edges, &spec.attrs, spec.features.as_ref())?;
    let outcome = run_grid(spec, &dataset, worker_count())?;
    write_report(&spec.output_dir, &outcome.records)?;
    write_timings(&spec.output_dir, &outcome.timings)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

/// Statistics for one delta over its successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub delta: f64,
    pub n: usize,
    pub failed: usize,
    pub single_run: bool,
    pub metrics: BTreeMap<String, MetricStats>,
}

impl AggregateRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }
}

/// One row per delta in ascending order; metrics keyed by name.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    deltas
        .into_iter()
        .map(|delta| {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.delta == delta).collect();
            let ok: Vec<&RunRecord> = cell
                .iter()
                .copied()
                .filter(|r| r.status == RunStatus::Ok)
                .collect();
            let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in &ok {
                for (k, &v) in &r.metrics {
                    by_metric.entry(k).or_default().push(v);
                }
            }
            let metrics = by_metric
                .into_iter()
                .map(|(k, values)| {
                    let (mean, std) = mean_std(&values);
                    (k.to_string(), MetricStats { mean, std })
                })
                .collect();
            AggregateRow {
                delta,
                n: ok.len(),
                failed: cell.len() - ok.len(),
                single_run: ok.len() == 1,
                metrics,
            }
        })
        .collect()
}

/// Mean and `n - 1` standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub runs: usize,
    pub failures: Vec<FailedRun>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub delta: f64,
    pub seed: u64,
    pub error: String,
}

pub const RUNS_DIR: &str = "runs";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TIMINGS_CSV: &str = "timings.csv";

/// Writes `runs/*.json`, `aggregate.csv` and `summary.json` under `dir`.
pub fn write_report(dir: &Path, records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Empty("run records".into()));
    }
    let runs = dir.join(RUNS_DIR);
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    for r in records {
        let path = runs.join(r.file_name());
        let text = serde_json::to_string_pretty(r)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let rows = aggregate(records);
    let path = dir.join(AGGREGATE_CSV);
    write_aggregate(&path, &rows)?;

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        runs: records.len(),
        failures: records
            .iter()
            .filter(|r| r.status == RunStatus::Failed)
            .map(|r| FailedRun {
                delta: r.delta,
                seed: r.seed,
                error: r.error.clone().unwrap_or_default(),
            })
            .collect(),
        aggregate: rows,
    };
    let path = dir.join(SUMMARY_JSON);
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

pub fn write_timings(dir: &Path, timings: &[RunTiming]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = csv::Writer::from_path(dir.join(TIMINGS_CSV))?;
    for t in timings {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io(dir.join(TIMINGS_CSV), e))?;
    Ok(())
}

/// Per-run records from `dir/runs`, sorted by delta then seed.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = dir.join(RUNS_DIR);
    let mut out = Vec::new();
    for entry in fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))? {
        let path = entry.map_err(|e| Error::io(&runs, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            out.push(serde_json::from_str::<RunRecord>(&text)?);
        }
    }
    out.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.seed.cmp(&b.seed)));
    Ok(out)
}

/// Metric names in column order: the union over all rows, sorted.
fn metric_columns(rows: &[AggregateRow]) -> Vec<&str> {
    let mut names: Vec<&str> = rows
        .iter()
        .flat_map(|r| r.metrics.keys().map(String::as_str))
        .collect();
    names.sort_unstable();
    names.dedup();
    names
}

/// `delta,n,failed,single_run` then `<metric>_mean,<metric>_std` per metric.
/// Metrics missing from a row are left empty.
pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let names = metric_columns(rows);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["delta".to_string(), "n".into(), "failed".into(), "single_run".into()];
    for name in &names {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.delta.to_string(),
            row.n.to_string(),
            row.failed.to_string(),
            row.single_run.to_string(),
        ];
        for name in &names {
            match row.metrics.get(*name) {
                Some(m) => {
                    rec.push(m.mean.to_string());
                    rec.push(m.std.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let bad = |reason: String| Error::MalformedLine {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    if header.len() < 4 || (header.len() - 4) % 2 != 0 {
        return Err(bad(format!("{} columns", header.len())));
    }
    let names: Vec<String> = header
        .iter()
        .skip(4)
        .step_by(2)
        .map(|h| h.strip_suffix("_mean").map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("metric columns must come in _mean/_std pairs".into()))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse_err = |field: &str| Error::MalformedLine {
            path: path.to_path_buf(),
            line,
            reason: format!("cannot parse {field:?}"),
        };
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| parse_err(&rec[k]));
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| parse_err(&rec[k]));
        let mut metrics = BTreeMap::new();
        for (j, name) in names.iter().enumerate() {
            let k = 4 + 2 * j;
            if rec[k].is_empty() {
                continue;
            }
            metrics.insert(name.clone(), MetricStats { mean: num(k)?, std: num(k + 1)? });
        }
        rows.push(AggregateRow {
            delta: num(0)?,
            n: int(1)?,
            failed: int(2)?,
            single_run: rec[3].parse().map_err(|_| parse_err(&rec[3]))?,
            metrics,
        });
    }
    Ok(rows)
}
