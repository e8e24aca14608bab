#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use minishrink::device::{Device, Measurement};
use minishrink::evaluation::{CostModel, Evaluator, Problem, SimulatedEvaluator};
use minishrink::feature_model::{
    AppSpec, Configuration, DependencyRule, Feature, FeatureModel, RomPolicy, Scalar,
};
use minishrink::EvaluatorError;

pub fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn shipped_model() -> Arc<FeatureModel> {
    Arc::new(FeatureModel::load(data("duktape86.json")).unwrap())
}

pub fn shipped_costs() -> CostModel {
    CostModel::load(data("duktape86-costs.json")).unwrap()
}

pub fn shipped_devices() -> Vec<Device> {
    minishrink::device::load_devices(data("devices5.json")).unwrap()
}

pub fn app(name: &str) -> AppSpec {
    AppSpec::load(data(&format!("apps/{name}.json"))).unwrap()
}

pub fn all_apps() -> Vec<AppSpec> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data("apps"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths.into_iter().map(|p| AppSpec::load(p).unwrap()).collect()
}

pub fn shipped_problem(app_name: &str) -> Problem {
    let model = shipped_model();
    let sim = SimulatedEvaluator::new(model.clone(), shipped_costs(), 0).unwrap();
    Problem::new(model, app(app_name), shipped_devices(), Arc::new(sim)).unwrap()
}

/// Plain boolean features with ids `1..=n`.
pub fn toy_features(n: u32) -> Vec<Feature> {
    (1..=n)
        .map(|id| Feature {
            id,
            name: format!("F{id}"),
            default: Scalar::Bool(true),
            modified: Scalar::Bool(false),
            category: String::new(),
        })
        .collect()
}

pub fn toy_model(n: u32, rules: Vec<DependencyRule>) -> Arc<FeatureModel> {
    Arc::new(FeatureModel::new(toy_features(n), rules, RomPolicy::Deactivate).unwrap())
}

pub fn toy_app(name: &str) -> AppSpec {
    AppSpec {
        name: name.into(),
        compulsory: BTreeSet::new(),
        base_memory_kb: 100.0,
        base_time_s: 1.0,
    }
}

pub fn dummy_device() -> Device {
    Device { name: "D".into(), memory_kb: 1000.0, storage_kb: 10_000.0, rank: 1 }
}

const CS_W: [f64; 12] = [-30., -25., -20., -16., -12., -9., -7., -5., -4., -3., -2., -1.];
const MU_W: [f64; 12] = [9., 3., 11., 2., 7., 1., 5., 13., 4., 6., 8., 10.];
const ET_W: [f64; 12] = [2., -1., 3., 5., -2., 4., 1., 2., 6., -3., 1., 2.];

/// Three conflicting integer-valued objectives over 12 unconstrained bits.
pub struct TradeoffEvaluator;

impl Evaluator for TradeoffEvaluator {
    fn measure(&self, c: &Configuration, _: &AppSpec) -> Result<Measurement, EvaluatorError> {
        Ok(tradeoff(c))
    }
}

pub fn tradeoff(c: &Configuration) -> Measurement {
    let b: Vec<f64> = c.iter().map(|x| if x { 1.0 } else { 0.0 }).collect();
    let dot = |w: &[f64; 12]| w.iter().zip(&b).map(|(w, x)| w * x).sum::<f64>();
    Measurement::new(
        1000.0 + dot(&CS_W),
        100.0 + dot(&MU_W),
        10.0 + dot(&ET_W) + 3.0 * b[0] * b[1],
    )
}

pub fn all_configs(n: usize) -> Vec<Configuration> {
    (0..1u32 << n)
        .map(|m| Configuration::from_bits((0..n).map(|i| m >> i & 1 == 1).collect()))
        .collect()
}

/// Bitstrings of the exact Pareto front of `tradeoff` over all 4096 configurations.
pub fn tradeoff_front() -> BTreeSet<String> {
    let all = all_configs(12);
    let pts: Vec<[f64; 3]> = all
        .iter()
        .map(|c| {
            let m = tradeoff(c);
            [m.code_size_kb, m.memory_kb, m.time_s]
        })
        .collect();
    let dominated = |p: &[f64; 3], q: &[f64; 3]| {
        q.iter().zip(p).all(|(a, b)| a <= b) && q.iter().zip(p).any(|(a, b)| a < b)
    };
    all.iter()
        .zip(&pts)
        .filter(|(_, p)| !pts.iter().any(|q| dominated(p, q)))
        .map(|(c, _)| c.to_bitstring())
        .collect()
}

pub fn tradeoff_problem() -> Problem {
    Problem::new(
        toy_model(12, vec![]),
        toy_app("tradeoff"),
        vec![dummy_device()],
        Arc::new(TradeoffEvaluator),
    )
    .unwrap()
}

/// Wraps an evaluator, counting calls and recording any invalid input.
pub struct Instrumented<E> {
    pub inner: E,
    pub model: Arc<FeatureModel>,
    pub calls: AtomicUsize,
    pub invalid: AtomicUsize,
}

impl<E> Instrumented<E> {
    pub fn new(inner: E, model: Arc<FeatureModel>) -> Self {
        Self { inner, model, calls: AtomicUsize::new(0), invalid: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn invalid(&self) -> usize {
        self.invalid.load(Ordering::SeqCst)
    }
}

impl<E: Evaluator> Evaluator for Instrumented<E> {
    fn measure(&self, c: &Configuration, app: &AppSpec) -> Result<Measurement, EvaluatorError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mask = app.compulsory_mask(&self.model).unwrap();
        if !self.model.is_valid(c, &mask) {
            self.invalid.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.measure(c, app)
    }
}
