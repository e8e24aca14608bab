//! Command implementations behind the `minishrink` binary.
//!
//! Each command returns plain data so that it can be exercised without a
//! process boundary; the `write_*` helpers persist that data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use minishrink::device::{self, Device, Measurement, UsrOrientation};
use minishrink::evaluation::{
    self, percentage_change, CostModel, EvaluationCache, Evaluator, ExternalEvaluator, Problem,
    SimulatedEvaluator,
};
use minishrink::feature_model::{AppSpec, FeatureId, FeatureModel, RomPolicy};
use minishrink::indicators::{
    cliffs_delta, ideal_nadir, mann_whitney_u, pfs_contribution, NormalizedFront,
};
use minishrink::search::{self, Algorithm, SearchParams};
use serde::{Deserialize, Serialize};

/// A failed command, split by the exit status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Unreadable, malformed or inconsistent inputs.
    Input(String),
    /// The evaluator could not produce a measurement.
    Evaluator(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 3,
            Failure::Evaluator(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "invalid input: {m}"),
            Failure::Evaluator(m) => write!(f, "evaluation failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<minishrink::Error> for Failure {
    fn from(e: minishrink::Error) -> Self {
        match e {
            minishrink::Error::Evaluator(_) | minishrink::Error::Contract(_) => {
                Failure::Evaluator(e.to_string())
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

fn output_error(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Input(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorChoice {
    Simulated,
    /// Command line of an external build-and-measure tool.
    External(String),
}

impl FromStr for EvaluatorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            _ if s == "simulated" => Ok(Self::Simulated),
            Some(("external", cmd)) if !cmd.trim().is_empty() => Ok(Self::External(cmd.into())),
            _ => Err(format!("expected 'simulated' or 'external:CMD', got '{s}'")),
        }
    }
}

pub fn parse_rom_policy(s: &str) -> Result<RomPolicy, String> {
    match s {
        "deactivate" => Ok(RomPolicy::Deactivate),
        "activate_all_reset" | "activate-all-reset" => Ok(RomPolicy::ActivateAllReset),
        other => Err(format!("unknown ROM policy '{other}'")),
    }
}

/// Inputs shared by every command.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: PathBuf,
    pub devices: Option<PathBuf>,
    pub costs: Option<PathBuf>,
    pub evaluator: EvaluatorChoice,
    /// Seed of the simulated evaluator's measurement noise.
    pub noise_seed: u64,
    /// Repetitions per external measurement.
    pub measure_runs: usize,
    pub timeout: Duration,
    pub rom_policy: Option<RomPolicy>,
    pub orientation: UsrOrientation,
    pub parallel: usize,
    pub cache: Option<PathBuf>,
}

impl Setup {
    pub fn new(model: impl Into<PathBuf>) -> Self {
        Self {
            model: model.into(),
            devices: None,
            costs: None,
            evaluator: EvaluatorChoice::Simulated,
            noise_seed: 0,
            measure_runs: evaluation::DEFAULT_RUNS,
            timeout: evaluation::DEFAULT_TIMEOUT,
            rom_policy: None,
            orientation: UsrOrientation::default(),
            parallel: 1,
            cache: None,
        }
    }

    pub fn load_model(&self) -> Result<Arc<FeatureModel>, Failure> {
        let mut model = FeatureModel::load(&self.model)?;
        if let Some(policy) = self.rom_policy {
            model = model.with_rom_policy(policy);
        }
        Ok(Arc::new(model))
    }

    pub fn load_devices(&self) -> Result<Vec<Device>, Failure> {
        let path = self
            .devices
            .as_ref()
            .ok_or_else(|| Failure::Input("a device catalog (--devices) is required".into()))?;
        Ok(device::load_devices(path)?)
    }

    /// Builds the configured evaluator. A `bench` sweep passes
    /// `characterize` so the simulated evaluator measures features that
    /// are invalid on their own.
    pub fn evaluator(
        &self,
        model: &Arc<FeatureModel>,
        runs: usize,
        characterize: bool,
    ) -> Result<Arc<dyn Evaluator>, Failure> {
        match &self.evaluator {
            EvaluatorChoice::Simulated => {
                let path = self.costs.as_ref().ok_or_else(|| {
                    Failure::Input("the simulated evaluator needs a cost model (--costs)".into())
                })?;
                let sim = SimulatedEvaluator::new(model.clone(), CostModel::load(path)?, self.noise_seed)?;
                Ok(Arc::new(if characterize { sim.characterization() } else { sim }))
            }
            EvaluatorChoice::External(cmd) => {
                let ext = ExternalEvaluator::new(model.clone(), cmd, runs)?.with_timeout(self.timeout);
                Ok(Arc::new(ext))
            }
        }
    }

    pub fn cache(&self) -> Result<Arc<EvaluationCache>, Failure> {
        Ok(Arc::new(match evaluation::cache_path(self.cache.clone()) {
            Some(path) => EvaluationCache::persistent(path)?,
            None => EvaluationCache::new(),
        }))
    }

    fn problem(
        &self,
        model: &Arc<FeatureModel>,
        app: AppSpec,
        devices: &[Device],
        evaluator: &Arc<dyn Evaluator>,
        cache: &Arc<EvaluationCache>,
    ) -> Result<Problem, Failure> {
        Ok(Problem::new(model.clone(), app, devices.to_vec(), evaluator.clone())?
            .with_orientation(self.orientation)
            .with_cache(cache.clone())
            .with_parallelism(self.parallel)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cs_kb: f64,
    pub mu_kb: f64,
    pub et_s: f64,
    pub udr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRow {
    pub bitstring: String,
    pub flipped: Vec<FeatureId>,
    pub metrics: Metrics,
    /// One flag per device, in catalog order.
    pub fits: Vec<bool>,
}

impl ArchiveRow {
    fn measurement(&self) -> Measurement {
        Measurement::new(self.metrics.cs_kb, self.metrics.mu_kb, self.metrics.et_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Medians over the archive of the percentage change against the
    /// baseline; absent for an empty archive.
    pub median_delta_cs: Option<f64>,
    pub median_delta_mu: Option<f64>,
    pub median_delta_et: Option<f64>,
    pub devices_before: usize,
    pub devices_after: usize,
    pub nda: i64,
}

/// Summary figures derived from archive rows and the default build.
pub fn summarize(
    rows: &[ArchiveRow],
    baseline: &Metrics,
    devices: &[Device],
) -> Result<Summary, Failure> {
    let median_delta = |pick: fn(&Metrics) -> f64| -> Result<Option<f64>, Failure> {
        let deltas = rows
            .iter()
            .map(|r| percentage_change(pick(&r.metrics), pick(baseline)))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(evaluation::median(&deltas))
    };
    let before = device::device_count(
        &[Measurement::new(baseline.cs_kb, baseline.mu_kb, baseline.et_s)],
        devices,
    );
    let measurements: Vec<Measurement> = rows.iter().map(ArchiveRow::measurement).collect();
    let after = device::device_count(&measurements, devices);
    Ok(Summary {
        median_delta_cs: median_delta(|m| m.cs_kb)?,
        median_delta_mu: median_delta(|m| m.mu_kb)?,
        median_delta_et: median_delta(|m| m.et_s)?,
        devices_before: before,
        devices_after: after,
        nda: device::nda(before, after),
    })
}

/// Result of one `optimize` run. Everything in it is a function of the
/// inputs and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub app: String,
    pub algorithm: String,
    pub seed: u64,
    pub evaluations: usize,
    pub objectives: Vec<String>,
    pub devices: Vec<String>,
    pub baseline: Metrics,
    pub archive: Vec<ArchiveRow>,
    pub summary: Summary,
}

/// Run facts that vary between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub wall_seconds: f64,
    pub evaluator_calls: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub setup: Setup,
    pub app: PathBuf,
    pub algorithm: Algorithm,
    pub params: SearchParams,
}

fn metrics_of(m: &Measurement, devices: &[Device], orientation: UsrOrientation) -> Result<Metrics, Failure> {
    Ok(Metrics {
        cs_kb: m.code_size_kb,
        mu_kb: m.memory_kb,
        et_s: m.time_s,
        udr: -device::usr(m, devices, orientation)?,
    })
}

pub fn optimize(opts: &OptimizeOptions) -> Result<(RunReport, RunTiming), Failure> {
    let started = Instant::now();
    let model = opts.setup.load_model()?;
    let app = AppSpec::load(&opts.app)?;
    let devices = opts.setup.load_devices()?;
    let evaluator = opts.setup.evaluator(&model, opts.setup.measure_runs, false)?;
    let cache = opts.setup.cache()?;
    let problem = opts.setup.problem(&model, app, &devices, &evaluator, &cache)?;
    opts.params.check()?;

    let archive = search::run(opts.algorithm, &problem, &opts.params)?;
    let base = problem.evaluate(&model.zero())?;
    if !base.measurement.feasible {
        return Err(Failure::Evaluator("the default configuration does not build".into()));
    }
    let baseline = metrics_of(&base.measurement, &devices, opts.setup.orientation)?;

    let rows = archive
        .solutions
        .iter()
        .map(|r| {
            Ok(ArchiveRow {
                bitstring: r.config.to_bitstring(),
                flipped: model.flipped_ids(&r.config),
                metrics: metrics_of(&r.measurement, &devices, opts.setup.orientation)?,
                fits: devices.iter().map(|d| device::fits(&r.measurement, d)).collect(),
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let summary = summarize(&rows, &baseline, &devices)?;

    let report = RunReport {
        app: problem.app.name.clone(),
        algorithm: opts.algorithm.to_string(),
        seed: opts.params.seed,
        evaluations: archive.evaluations,
        objectives: opts.params.objectives.as_slice().iter().map(|o| o.to_string()).collect(),
        devices: devices.iter().map(|d| d.name.clone()).collect(),
        baseline,
        archive: rows,
        summary,
    };
    let timing = RunTiming {
        wall_seconds: started.elapsed().as_secs_f64(),
        evaluator_calls: archive.evaluator_calls + base.evaluator_calls,
    };
    Ok((report, timing))
}

/// `bitstring,cs_kb,mu_kb,et_s,udr` followed by one `fits_<device>` column
/// per device.
pub fn archive_csv(report: &RunReport) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["bitstring", "cs_kb", "mu_kb", "et_s", "udr"].iter().map(|s| s.to_string()).collect();
    header.extend(report.devices.iter().map(|d| format!("fits_{d}")));
    let csv_err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for row in &report.archive {
        let m = &row.metrics;
        let mut record = vec![
            row.bitstring.clone(),
            m.cs_kb.to_string(),
            m.mu_kb.to_string(),
            m.et_s.to_string(),
            m.udr.to_string(),
        ];
        record.extend(row.fits.iter().map(|f| u8::from(*f).to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| output_error(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `report.json`, `archive.csv` and `timing.json` into `dir`.
pub fn write_optimize(report: &RunReport, timing: &RunTiming, dir: &Path) -> Result<(), Failure> {
    create_dir(dir)?;
    write_file(&dir.join("report.json"), &to_json(report))?;
    write_file(&dir.join("archive.csv"), &archive_csv(report)?)?;
    write_file(&dir.join("timing.json"), &to_json(timing))
}

/// One feature, or one dependency group, flipped on top of the defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchUnit {
    pub label: String,
    pub ids: Vec<FeatureId>,
    /// Modified value, or `vary` when group members differ.
    pub value: String,
}

/// Every feature alone, then every distinct rule member set in rule order.
pub fn bench_units(model: &FeatureModel) -> Vec<BenchUnit> {
    let mut units: Vec<BenchUnit> = model
        .features()
        .iter()
        .map(|f| BenchUnit { label: f.id.to_string(), ids: vec![f.id], value: f.modified.to_string() })
        .collect();
    let mut seen: BTreeSet<Vec<FeatureId>> = BTreeSet::new();
    for rule in model.rules() {
        let ids = rule.members();
        if !seen.insert(ids.clone()) {
            continue;
        }
        let values: BTreeSet<String> = ids
            .iter()
            .filter_map(|id| model.position(*id))
            .map(|p| model.features()[p].modified.to_string())
            .collect();
        let value = if values.len() == 1 { values.into_iter().next().unwrap() } else { "vary".into() };
        let label = ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join("_");
        units.push(BenchUnit { label, ids, value });
    }
    units
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub unit: BenchUnit,
    /// `None` for a build that failed; such rows are reported as skipped.
    pub measured: Option<(Measurement, [f64; 3])>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub setup: Setup,
    pub app: PathBuf,
    /// Repetitions per measurement.
    pub runs: usize,
}

pub fn bench(opts: &BenchOptions) -> Result<Vec<BenchRow>, Failure> {
    if opts.runs == 0 {
        return Err(Failure::Input("runs must be at least 1".into()));
    }
    let model = opts.setup.load_model()?;
    let app = AppSpec::load(&opts.app)?;
    app.check()?;
    let evaluator = opts.setup.evaluator(&model, opts.runs, true)?;
    let measure = |ids: &[FeatureId]| -> Result<Measurement, Failure> {
        let config = model.config_from_ids(ids)?;
        evaluator.measure(&config, &app).map_err(|e| Failure::Evaluator(e.to_string()))
    };
    let base = measure(&[])?;
    if !base.feasible {
        return Err(Failure::Evaluator("the default configuration does not build".into()));
    }
    bench_units(&model)
        .into_iter()
        .map(|unit| {
            let m = measure(&unit.ids)?;
            let measured = if m.feasible {
                let delta = [
                    percentage_change(m.code_size_kb, base.code_size_kb)?,
                    percentage_change(m.memory_kb, base.memory_kb)?,
                    percentage_change(m.time_s, base.time_s)?,
                ];
                Some((m, delta))
            } else {
                None
            };
            Ok(BenchRow { unit, measured })
        })
        .collect()
}

pub const BENCH_HEADER: [&str; 8] =
    ["id", "value", "cs_kb", "mu_kb", "et_s", "delta_cs", "delta_mu", "delta_et"];

/// Numeric columns of a skipped row hold `skipped`.
pub fn bench_csv(rows: &[BenchRow]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(BENCH_HEADER).map_err(csv_err)?;
    for row in rows {
        let mut record = vec![row.unit.label.clone(), row.unit.value.clone()];
        match &row.measured {
            Some((m, d)) => record.extend(
                [m.code_size_kb, m.memory_kb, m.time_s, d[0], d[1], d[2]].iter().map(f64::to_string),
            ),
            None => record.extend(std::iter::repeat("skipped".to_string()).take(6)),
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_bench(rows: &[BenchRow], dir: &Path) -> Result<(), Failure> {
    create_dir(dir)?;
    write_file(&dir.join("bench.csv"), &bench_csv(rows)?)
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub setup: Setup,
    pub apps: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    /// Independent runs per algorithm; run `r` uses seed `params.seed + r`.
    pub runs: usize,
    pub params: SearchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvRow {
    pub app: String,
    pub algorithm: String,
    pub run: usize,
    pub hv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub app: String,
    pub algorithm: String,
    pub pfs_count: usize,
    pub pfs_pct: f64,
    /// Against the first listed algorithm, or the second for the first.
    pub u_p_value: f64,
    pub cliffs_delta: f64,
    pub magnitude: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub app: String,
    pub algorithm: String,
    pub median_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    pub hv: Vec<HvRow>,
    pub summary: Vec<SummaryRow>,
    pub timing: Vec<TimingRow>,
}

/// Distinct labels for the compared algorithms; a repeated algorithm gets
/// a `#n` suffix.
pub fn algorithm_labels(algorithms: &[Algorithm]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    algorithms
        .iter()
        .map(|a| {
            let n = seen.entry(a.to_string()).or_insert(0);
            *n += 1;
            if *n == 1 { a.to_string() } else { format!("{a}#{n}") }
        })
        .collect()
}

pub fn compare(opts: &CompareOptions) -> Result<CompareReport, Failure> {
    if opts.algorithms.len() < 2 {
        return Err(Failure::Input("compare needs at least two algorithms".into()));
    }
    if opts.runs == 0 || opts.apps.is_empty() {
        return Err(Failure::Input("compare needs at least one app and one run".into()));
    }
    opts.params.check()?;
    let model = opts.setup.load_model()?;
    let devices = opts.setup.load_devices()?;
    let evaluator = opts.setup.evaluator(&model, opts.setup.measure_runs, false)?;
    let cache = opts.setup.cache()?;
    let labels = algorithm_labels(&opts.algorithms);
    let mut report = CompareReport::default();

    for app_path in &opts.apps {
        let app = AppSpec::load(app_path)?;
        let name = app.name.clone();
        let problem = opts.setup.problem(&model, app, &devices, &evaluator, &cache)?;

        // fronts[a][r] holds the objective points of run r of algorithm a.
        let mut fronts: Vec<Vec<Vec<Vec<f64>>>> = Vec::new();
        let mut seconds: Vec<Vec<f64>> = Vec::new();
        for algo in &opts.algorithms {
            let mut runs = Vec::with_capacity(opts.runs);
            let mut times = Vec::with_capacity(opts.runs);
            for r in 0..opts.runs {
                let params = SearchParams { seed: opts.params.seed + r as u64, ..opts.params.clone() };
                let started = Instant::now();
                let archive = search::run(*algo, &problem, &params)?;
                times.push(started.elapsed().as_secs_f64());
                runs.push(
                    archive
                        .solutions
                        .iter()
                        .filter_map(|s| s.objectives.as_ref().map(|o| o.select(&params.objectives)))
                        .collect(),
                );
            }
            fronts.push(runs);
            seconds.push(times);
        }

        let everything: Vec<Vec<f64>> = fronts.iter().flatten().flatten().cloned().collect();
        let bounds = ideal_nadir(&everything);
        let hv: Vec<Vec<f64>> = fronts
            .iter()
            .map(|runs| {
                runs.iter()
                    .map(|pts| match &bounds {
                        Some((ideal, nadir)) => NormalizedFront::new(pts, ideal, nadir).hypervolume(),
                        None => 0.0,
                    })
                    .collect()
            })
            .collect();
        for (label, samples) in labels.iter().zip(&hv) {
            for (run, value) in samples.iter().enumerate() {
                report.hv.push(HvRow { app: name.clone(), algorithm: label.clone(), run, hv: *value });
            }
        }

        let named: BTreeMap<String, Vec<Vec<f64>>> = labels
            .iter()
            .zip(&fronts)
            .map(|(label, runs)| (label.clone(), runs.iter().flatten().cloned().collect()))
            .collect();
        let pfs = pfs_contribution(&named)?;
        for (i, label) in labels.iter().enumerate() {
            let other = if i == 0 { 1 } else { 0 };
            let u = mann_whitney_u(&hv[i], &hv[other])?;
            let (delta, magnitude) = cliffs_delta(&hv[i], &hv[other])?;
            let contribution = pfs[label];
            report.summary.push(SummaryRow {
                app: name.clone(),
                algorithm: label.clone(),
                pfs_count: contribution.count,
                pfs_pct: contribution.percent,
                u_p_value: u.p_two_sided,
                cliffs_delta: delta,
                magnitude: magnitude.as_str().into(),
            });
            report.timing.push(TimingRow {
                app: name.clone(),
                algorithm: label.clone(),
                median_seconds: evaluation::median(&seconds[i]).unwrap_or(0.0),
            });
        }
    }
    Ok(report)
}

fn rows_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, Failure> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn hv_csv(report: &CompareReport) -> Result<String, Failure> {
    rows_csv(&report.hv, &["app", "algorithm", "run", "hv"])
}

pub fn summary_csv(report: &CompareReport) -> Result<String, Failure> {
    rows_csv(
        &report.summary,
        &["app", "algorithm", "pfs_count", "pfs_pct", "u_p_value", "cliffs_delta", "magnitude"],
    )
}

pub fn timing_csv(report: &CompareReport) -> Result<String, Failure> {
    rows_csv(&report.timing, &["app", "algorithm", "median_seconds"])
}

/// Writes `hv.csv`, `summary.csv` and `timing.csv` into `dir`.
pub fn write_compare(report: &CompareReport, dir: &Path) -> Result<(), Failure> {
    create_dir(dir)?;
    write_file(&dir.join("hv.csv"), &hv_csv(report)?)?;
    write_file(&dir.join("summary.csv"), &summary_csv(report)?)?;
    write_file(&dir.join("timing.csv"), &timing_csv(report)?)
}
