//! Turning configurations into measurements.
//!
//! Two evaluators are provided: a desk-scale surrogate that composes
//! per-feature percentage deltas, and an external command that builds and
//! measures a real interpreter. Either one sits behind [`EvaluationCache`],
//! which guarantees that a given `(app, configuration)` pair is measured at
//! most once.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::device::{Device, Measurement, ObjectiveVector, UsrOrientation};
use crate::error::{Error, EvaluatorError, Result};
use crate::feature_model::{AppSpec, Configuration, FeatureId, FeatureModel};

/// Percentage change of a median against its baseline. Negative values are
/// improvements.
pub fn percentage_change(new_median: f64, base_median: f64) -> Result<f64> {
    if base_median == 0.0 {
        return Err(Error::Contract("percentage change against a zero baseline".into()));
    }
    Ok(100.0 * (new_median - base_median) / base_median)
}

/// Median of a non-empty sample; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub cs: f64,
    pub mu: f64,
    pub et: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostModel {
    pub base_code_size_kb: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub features: BTreeMap<FeatureId, Delta>,
    #[serde(default)]
    pub groups: BTreeMap<String, Delta>,
}

impl CostModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn check(&self, model: &FeatureModel) -> Result<()> {
        if !(self.base_code_size_kb > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Validation(
                "cost model needs a positive base size and a non-negative noise".into(),
            ));
        }
        for f in model.features() {
            if !self.features.contains_key(&f.id) {
                return Err(Error::Validation(format!("cost model lacks feature {}", f.id)));
            }
        }
        for key in self.features.keys() {
            if model.position(*key).is_none() {
                return Err(Error::Validation(format!("cost model names unknown feature {key}")));
            }
        }
        for key in self.groups.keys() {
            if !model.rules().iter().any(|r| &r.rule_id == key) {
                return Err(Error::Validation(format!("cost model names unknown rule {key}")));
            }
        }
        Ok(())
    }
}

pub trait Evaluator: Send + Sync {
    fn measure(&self, config: &Configuration, app: &AppSpec) -> Result<Measurement, EvaluatorError>;
}

/// Surrogate evaluator composing tabulated percentage deltas
/// multiplicatively.
pub struct SimulatedEvaluator {
    model: Arc<FeatureModel>,
    cost: CostModel,
    /// Group delta units as (positions, delta), in rule order.
    groups: Vec<(Vec<usize>, Delta)>,
    per_feature: Vec<Delta>,
    seed: u64,
    enforce_rules: bool,
}

impl SimulatedEvaluator {
    pub fn new(model: Arc<FeatureModel>, cost: CostModel, seed: u64) -> Result<Self> {
        cost.check(&model)?;
        let groups = model
            .rules()
            .iter()
            .filter_map(|rule| {
                cost.groups.get(&rule.rule_id).map(|d| {
                    let positions =
                        rule.members().iter().filter_map(|id| model.position(*id)).collect();
                    (positions, *d)
                })
            })
            .collect();
        let per_feature = model.features().iter().map(|f| cost.features[&f.id]).collect();
        Ok(Self { model, cost, groups, per_feature, seed, enforce_rules: true })
    }

    /// Skips the rule check so that single features can be characterized on
    /// their own, the way a benchmark sweep measures them.
    pub fn characterization(mut self) -> Self {
        self.enforce_rules = false;
        self
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    /// Product of `(1 + delta / 100)` over the flipped units of `config`.
    fn factors(&self, config: &Configuration) -> (f64, f64, f64) {
        let mut covered = vec![false; config.len()];
        let (mut cs, mut mu, mut et) = (1.0, 1.0, 1.0);
        let mut apply = |d: &Delta| {
            cs *= 1.0 + d.cs / 100.0;
            mu *= 1.0 + d.mu / 100.0;
            et *= 1.0 + d.et / 100.0;
        };
        for (positions, delta) in &self.groups {
            if positions.iter().all(|&p| config.get(p) && !covered[p]) {
                apply(delta);
                for &p in positions {
                    covered[p] = true;
                }
            }
        }
        for pos in config.ones() {
            if !covered[pos] {
                apply(&self.per_feature[pos]);
            }
        }
        (cs, mu, et)
    }

    fn noise(&self, config: &Configuration, app: &AppSpec) -> (f64, f64) {
        let sigma = self.cost.noise_sigma;
        if sigma == 0.0 {
            return (1.0, 1.0);
        }
        let mut h = Fnv::new();
        h.write_u64(self.seed);
        h.write(app.name.as_bytes());
        h.write(&[0xff]);
        h.write(config.to_bitstring().as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let normal = Normal::new(0.0, sigma).expect("sigma checked non-negative");
        let mu = (1.0 + normal.sample(&mut rng)).max(0.01);
        let et = (1.0 + normal.sample(&mut rng)).max(0.01);
        (mu, et)
    }
}

impl Evaluator for SimulatedEvaluator {
    fn measure(&self, config: &Configuration, app: &AppSpec) -> Result<Measurement, EvaluatorError> {
        if config.len() != self.model.len() {
            return Err(EvaluatorError::Io(format!(
                "configuration has {} bits, model has {} features",
                config.len(),
                self.model.len()
            )));
        }
        if self.enforce_rules {
            let mask = app
                .compulsory_mask(&self.model)
                .map_err(|e| EvaluatorError::Io(e.to_string()))?;
            if !self.model.is_valid(config, &mask) {
                // Emulates a build that fails to compile.
                return Ok(Measurement::infeasible());
            }
        }
        let (cs, mu, et) = self.factors(config);
        let (noise_mu, noise_et) = self.noise(config, app);
        Ok(Measurement::new(
            self.cost.base_code_size_kb * cs,
            app.base_memory_kb * mu * noise_mu,
            app.base_time_s * et * noise_et,
        ))
    }
}

/// 64-bit FNV-1a, stable across platforms and toolchains.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Builds and measures through an external command.
///
/// The command is called as `command [args..] CFG_PATH APP_NAME RUNS`,
/// where `CFG_PATH` holds one `NAME:VALUE` line per flipped feature. On exit
/// status 0 it prints `CS_BYTES MU_BYTES ET_SECONDS` once per run; status 2
/// reports a build failure.
pub struct ExternalEvaluator {
    model: Arc<FeatureModel>,
    program: String,
    args: Vec<String>,
    runs: usize,
    timeout: Duration,
}

pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

impl ExternalEvaluator {
    /// `command` is split on whitespace into program and leading arguments.
    pub fn new(model: Arc<FeatureModel>, command: &str, runs: usize) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::Validation("empty evaluator command".into()))?;
        if runs == 0 {
            return Err(Error::Validation("runs must be at least 1".into()));
        }
        Ok(Self { model, program, args: parts.collect(), runs, timeout: DEFAULT_TIMEOUT })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Contents of the configuration file handed to the command.
    pub fn render_config(&self, config: &Configuration) -> String {
        let mut out = String::new();
        for pos in config.ones() {
            let f = &self.model.features()[pos];
            out.push_str(&format!("{}:{}\n", f.name, f.modified));
        }
        out
    }

    fn run(&self, cfg_path: &Path, app: &AppSpec) -> Result<Measurement, EvaluatorError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(cfg_path)
            .arg(&app.name)
            .arg(self.runs.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| EvaluatorError::Spawn(format!("{}: {e}", self.program)))?;

        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let status = match child.wait_timeout(self.timeout) {
            Ok(Some(status)) => status,
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(EvaluatorError::Timeout(self.timeout.as_secs()));
            }
            Err(e) => return Err(EvaluatorError::Io(e.to_string())),
        };
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        match status.code() {
            Some(0) => parse_runs(&stdout, self.runs),
            Some(2) => Ok(Measurement::infeasible()),
            code => Err(EvaluatorError::Status {
                code: code.unwrap_or(-1),
                stderr: stderr.trim().to_owned(),
            }),
        }
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_string(&mut buf);
        }
        buf
    })
}

fn parse_number(token: &str) -> Option<f64> {
    token.replace([',', '_'], "").parse().ok()
}

/// Parses `runs` lines of `CS_BYTES MU_BYTES ET_SECONDS`. Code size comes
/// from the first line; memory and time are medians. Bytes become decimal
/// kilobytes.
pub fn parse_runs(stdout: &str, runs: usize) -> Result<Measurement, EvaluatorError> {
    let mut samples = Vec::new();
    for line in stdout.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|t| parse_number(t)).collect();
        match parsed {
            Some(v) if v.len() == 3 && v.iter().all(|x| x.is_finite() && *x >= 0.0) => {
                samples.push((v[0], v[1], v[2]))
            }
            _ => return Err(EvaluatorError::Output(format!("bad line '{line}'"))),
        }
    }
    if samples.len() != runs {
        return Err(EvaluatorError::Output(format!(
            "expected {runs} measurement lines, got {}",
            samples.len()
        )));
    }
    let mem: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let time: Vec<f64> = samples.iter().map(|s| s.2).collect();
    Ok(Measurement::new(
        samples[0].0 / 1000.0,
        median(&mem).unwrap_or_default() / 1000.0,
        median(&time).unwrap_or_default(),
    ))
}

impl Evaluator for ExternalEvaluator {
    fn measure(&self, config: &Configuration, app: &AppSpec) -> Result<Measurement, EvaluatorError> {
        let mut file = tempfile::Builder::new()
            .prefix("minishrink-")
            .suffix(".cfg")
            .tempfile()
            .map_err(|e| EvaluatorError::Io(e.to_string()))?;
        file.write_all(self.render_config(config).as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| EvaluatorError::Io(e.to_string()))?;
        self.run(file.path(), app)
    }
}

type Slot = Arc<OnceLock<Result<Measurement, EvaluatorError>>>;

/// Memo table keyed by `(app name, bitstring)`.
///
/// Concurrent requests for the same unseen key block on one another so the
/// evaluator runs once per key. Successful measurements can be appended to a
/// cache file and reloaded by later processes.
#[derive(Default)]
pub struct EvaluationCache {
    slots: Mutex<HashMap<(String, String), Slot>>,
    invocations: AtomicUsize,
    hits: AtomicUsize,
    sink: Option<Mutex<File>>,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists and appends new measurements to it.
    pub fn persistent(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cache = Self::new();
        if path.exists() {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_path(path)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let mut slots = cache.slots.lock().expect("cache lock");
            for record in reader.records() {
                let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                let (key, m) = parse_cache_record(&record)
                    .ok_or_else(|| Error::Parse(format!("{}: bad cache line", path.display())))?;
                let slot: Slot = Arc::new(OnceLock::new());
                let _ = slot.set(Ok(m));
                slots.insert(key, slot);
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self { sink: Some(Mutex::new(file)), ..cache })
    }

    /// Number of times an evaluator was actually invoked through this cache.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the measurement for `config` and whether this call ran the
    /// evaluator.
    pub fn get_or_measure(
        &self,
        config: &Configuration,
        app: &AppSpec,
        evaluator: &dyn Evaluator,
    ) -> (Result<Measurement, EvaluatorError>, bool) {
        let key = (app.name.clone(), config.to_bitstring());
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock");
            slots.entry(key.clone()).or_default().clone()
        };
        let mut fresh = false;
        let result = slot
            .get_or_init(|| {
                fresh = true;
                self.invocations.fetch_add(1, Ordering::SeqCst);
                let r = evaluator.measure(config, app);
                if let (Ok(m), Some(sink)) = (&r, &self.sink) {
                    let line = format_cache_record(&key.0, &key.1, m);
                    let mut f = sink.lock().expect("cache file lock");
                    let _ = f.write_all(line.as_bytes());
                }
                r
            })
            .clone();
        if !fresh {
            self.hits.fetch_add(1, Ordering::SeqCst);
        }
        (result, fresh)
    }
}

fn format_cache_record(app: &str, bits: &str, m: &Measurement) -> String {
    if m.feasible {
        format!("{app},{bits},true,{},{},{}\n", m.code_size_kb, m.memory_kb, m.time_s)
    } else {
        format!("{app},{bits},false,,,\n")
    }
}

fn parse_cache_record(r: &csv::StringRecord) -> Option<((String, String), Measurement)> {
    if r.len() != 6 {
        return None;
    }
    let key = (r[0].to_owned(), r[1].to_owned());
    let m = match &r[2] {
        "true" => Measurement::new(r[3].parse().ok()?, r[4].parse().ok()?, r[5].parse().ok()?),
        "false" => Measurement::infeasible(),
        _ => return None,
    };
    Some((key, m))
}

/// Outcome of evaluating one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationRecord {
    pub config: Configuration,
    pub measurement: Measurement,
    /// Present iff the measurement is feasible.
    pub objectives: Option<ObjectiveVector>,
    /// Evaluator invocations this lookup caused (0 or 1).
    pub evaluator_calls: usize,
}

/// Everything needed to evaluate configurations for one application.
pub struct Problem {
    pub model: Arc<FeatureModel>,
    pub app: AppSpec,
    pub compulsory: Vec<bool>,
    pub devices: Vec<Device>,
    pub orientation: UsrOrientation,
    evaluator: Arc<dyn Evaluator>,
    cache: Arc<EvaluationCache>,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl Problem {
    pub fn new(
        model: Arc<FeatureModel>,
        app: AppSpec,
        devices: Vec<Device>,
        evaluator: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        app.check()?;
        let compulsory = app.compulsory_mask(&model)?;
        if devices.is_empty() {
            return Err(Error::Validation("no target devices".into()));
        }
        Ok(Self {
            model,
            app,
            compulsory,
            devices,
            orientation: UsrOrientation::default(),
            evaluator,
            cache: Arc::new(EvaluationCache::new()),
            pool: None,
        })
    }

    pub fn with_cache(mut self, cache: Arc<EvaluationCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_orientation(mut self, orientation: UsrOrientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Evaluates batches on `workers` threads; 1 keeps everything on the
    /// calling thread.
    pub fn with_parallelism(mut self, workers: usize) -> Result<Self> {
        self.pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Validation(e.to_string()))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(self)
    }

    pub fn cache(&self) -> &Arc<EvaluationCache> {
        &self.cache
    }

    /// Bits a search may set.
    pub fn free_bits(&self) -> usize {
        self.compulsory.iter().filter(|c| !**c).count()
    }

    pub fn is_valid(&self, config: &Configuration) -> bool {
        self.model.is_valid(config, &self.compulsory)
    }

    pub fn repair(&self, config: &Configuration) -> Configuration {
        self.model.repair(config, &self.compulsory)
    }

    /// Memoized evaluation of a valid configuration.
    pub fn evaluate(&self, config: &Configuration) -> Result<EvaluationRecord> {
        if config.len() != self.model.len() || !self.is_valid(config) {
            return Err(Error::Contract(format!("evaluate called with invalid configuration {config}")));
        }
        let (measurement, fresh) = self.cache.get_or_measure(config, &self.app, &*self.evaluator);
        let measurement = measurement?;
        let objectives = if measurement.feasible {
            Some(ObjectiveVector::from_measurement(&measurement, &self.devices, self.orientation)?)
        } else {
            None
        };
        Ok(EvaluationRecord {
            config: config.clone(),
            measurement,
            objectives,
            evaluator_calls: usize::from(fresh),
        })
    }

    /// Evaluates `configs`, possibly in parallel, returning records in input
    /// order.
    pub fn evaluate_batch(&self, configs: &[Configuration]) -> Result<Vec<EvaluationRecord>> {
        match &self.pool {
            Some(pool) if configs.len() > 1 => {
                pool.install(|| configs.par_iter().map(|c| self.evaluate(c)).collect())
            }
            _ => configs.iter().map(|c| self.evaluate(c)).collect(),
        }
    }
}

/// Location of the persisted evaluation cache: `MINISHRINK_CACHE` when set
/// and non-empty, otherwise `configured`.
pub fn cache_path(configured: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os("MINISHRINK_CACHE")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(configured)
}
