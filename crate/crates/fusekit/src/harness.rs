//! Seeded validation/test splits and method comparison.

use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;

use fnv::FnvHasher;
use fusekit_core::baselines::{early_stopping, fixed_jumps, horizontal, single};
use fusekit_core::fusion::{apply_plan, fit_plan};
use fusekit_core::metrics::prediction_accuracy;
use fusekit_core::{CheckpointSource, FitConfig, FitMode, FusionPlan, SubsetMask};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_VAL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    /// Share of the universe assigned to validation, in `(0, 1)`.
    pub val_fraction: f64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec { seed, val_fraction: DEFAULT_VAL_FRACTION }
    }
}

/// Shuffles `universe` with a seeded generator; the first `ceil(f * n)` go to
/// validation and the rest to test. Both halves come back sorted.
pub fn make_split(universe: &SubsetMask, spec: SplitSpec) -> Result<(SubsetMask, SubsetMask)> {
    let n = universe.len();
    if n < 2 {
        return Err(Error::InvalidSplit(format!("universe has {n} examples, need at least 2")));
    }
    let f = spec.val_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidSplit(format!("validation fraction {f} outside (0, 1)")));
    }
    let n_val = ((f * n as f64) - 1e-9).ceil() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidSplit(format!("fraction {f} of {n} leaves an empty side")));
    }
    let mut order = universe.indices().to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let val = SubsetMask::from_indices(universe.universe(), order[..n_val].iter().copied())?;
    let test = SubsetMask::from_indices(universe.universe(), order[n_val..].iter().copied())?;
    Ok((val, test))
}

/// Which examples a command operates on.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetSpec {
    All,
    Validation(SplitSpec),
    Test(SplitSpec),
}

impl SubsetSpec {
    pub fn resolve(&self, n: usize) -> Result<SubsetMask> {
        let all = SubsetMask::all(n);
        match self {
            SubsetSpec::All => Ok(all),
            SubsetSpec::Validation(s) => Ok(make_split(&all, *s)?.0),
            SubsetSpec::Test(s) => Ok(make_split(&all, *s)?.1),
        }
    }
}

/// `all`, `val:SEED[:FRAC]` or `test:SEED[:FRAC]`.
impl FromStr for SubsetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSubset(s.to_string());
        if s == "all" {
            return Ok(SubsetSpec::All);
        }
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let seed = parts.next().ok_or_else(bad)?.parse::<u64>().map_err(|_| bad())?;
        let val_fraction = match parts.next() {
            Some(f) => f.parse::<f64>().map_err(|_| bad())?,
            None => DEFAULT_VAL_FRACTION,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        let split = SplitSpec { seed, val_fraction };
        match kind {
            "val" => Ok(SubsetSpec::Validation(split)),
            "test" => Ok(SubsetSpec::Test(split)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Single,
    Horizontal,
    FixedJumps,
    EarlyStopping,
    Fusion,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Single, Method::Horizontal, Method::FixedJumps, Method::EarlyStopping, Method::Fusion];

    pub fn name(self) -> &'static str {
        match self {
            Method::Single => "single",
            Method::Horizontal => "horizontal",
            Method::FixedJumps => "fixed",
            Method::EarlyStopping => "es",
            Method::Fusion => "kf",
        }
    }

    /// Parses a comma-separated list, keeping the given order and dropping repeats.
    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        let mut methods = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = name.parse()?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    Random { val_fraction: f64 },
    /// Every example is used for both fitting and evaluation.
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub split: SplitMode,
    pub fit: FitConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: Method::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            split: SplitMode::Random { val_fraction: DEFAULT_VAL_FRACTION },
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    /// Checkpoints the method combined for this seed.
    pub checkpoints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean: f64,
    pub ste: f64,
    pub per_seed: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub best_method: String,
    pub best_mean: f64,
    pub single_mean: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStepSummary {
    pub epoch: u64,
    pub epsilon: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub seed: u64,
    pub steps: Vec<PlanStepSummary>,
    pub checkpoints: usize,
    pub validation_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSummary {
    pub split: String,
    pub val_fraction: Option<f64>,
    pub w: usize,
    pub grid: String,
    pub mode: String,
    pub exhaust: bool,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub format_version: u32,
    pub log_digest: String,
    pub n_examples: usize,
    pub n_checkpoints: usize,
    pub seeds: Vec<u64>,
    pub config: ConfigSummary,
    pub methods: Vec<MethodSummary>,
    pub improvement: Improvement,
    pub plans: Vec<PlanSummary>,
}

impl BenchReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// FNV-1a digest of a log's shape, labels and raw stored values.
pub fn source_digest<L: CheckpointSource + ?Sized>(log: &L) -> Result<String> {
    let mut h = FnvHasher::default();
    h.write_u64(log.n_examples() as u64);
    h.write_u64(log.n_classes() as u64);
    log.epochs().iter().for_each(|&e| h.write_u64(e));
    log.labels().iter().for_each(|&y| h.write_u32(y));
    if let Some(clean) = log.clean_labels() {
        clean.iter().for_each(|&y| h.write_u32(y));
    }
    for k in 0..log.n_checkpoints() {
        log.with_checkpoint(k, |cp| cp.raw().iter().for_each(|v| h.write_u32(v.to_bits())))?;
    }
    Ok(format!("{:016x}", h.finish()))
}

/// Sample standard deviation over `n` values divided by `sqrt(n)`; 0 for one value.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn plan_steps(plan: &FusionPlan) -> Vec<PlanStepSummary> {
    plan.steps.iter().map(|s| PlanStepSummary { epoch: s.epoch, epsilon: plan.grid.format(s.epsilon_units) }).collect()
}

/// For each seed: split, fit fusion on validation, evaluate every method on
/// test. Count-parameterized baselines use as many checkpoints as the fitted
/// plan reads.
pub fn bench<L: CheckpointSource + ?Sized>(log: &L, config: &BenchConfig) -> Result<BenchReport> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidSplit("no seeds".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::UnknownMethod(String::new()));
    }
    let n = log.n_examples();
    let labels = log.labels();
    let all = SubsetMask::all(n);
    let mut results: Vec<Vec<SeedResult>> = vec![Vec::new(); config.methods.len()];
    let mut single_accs = Vec::new();
    let mut plans = Vec::new();

    for &seed in &config.seeds {
        let (val, test) = match config.split {
            SplitMode::Random { val_fraction } => make_split(&all, SplitSpec { seed, val_fraction })?,
            SplitMode::Shared => (all.clone(), all.clone()),
        };
        let mut fit = fit_plan(log, &val, &config.fit)?;
        fit.plan.meta.seed = Some(seed);
        let used = fit.plan.checkpoints_used(log)?;
        let acc = |preds: &[u32]| prediction_accuracy(labels, &test, preds);

        let single_acc = acc(&single(log, &test)?)?;
        single_accs.push(single_acc);
        for (slot, &method) in results.iter_mut().zip(&config.methods) {
            let (accuracy, checkpoints) = match method {
                Method::Single => (single_acc, 1),
                Method::Horizontal => (acc(&horizontal(log, used, &test)?)?, used),
                Method::FixedJumps => (acc(&fixed_jumps(log, used, &test)?)?, used),
                Method::EarlyStopping => (acc(&early_stopping(log, &val, &test)?.predictions)?, 1),
                Method::Fusion => (apply_plan(log, &fit.plan, &test)?.accuracy(labels), used),
            };
            slot.push(SeedResult { seed, accuracy, checkpoints });
        }
        plans.push(PlanSummary {
            seed,
            steps: plan_steps(&fit.plan),
            checkpoints: used,
            validation_size: val.len(),
            test_size: test.len(),
        });
    }

    let methods: Vec<MethodSummary> = config
        .methods
        .iter()
        .zip(results)
        .map(|(m, per_seed)| {
            let accs: Vec<f64> = per_seed.iter().map(|r| r.accuracy).collect();
            MethodSummary { method: m.name().into(), mean: mean(&accs), ste: standard_error(&accs), per_seed }
        })
        .collect();
    let single_mean = mean(&single_accs);
    let best = methods
        .iter()
        .fold(None, |best: Option<&MethodSummary>, m| match best {
            Some(b) if b.mean >= m.mean => Some(b),
            _ => Some(m),
        })
        .expect("methods nonempty");
    let improvement = Improvement {
        best_method: best.method.clone(),
        best_mean: best.mean,
        single_mean,
        value: best.mean - single_mean,
    };

    let (split, val_fraction) = match config.split {
        SplitMode::Random { val_fraction } => ("random".to_string(), Some(val_fraction)),
        SplitMode::Shared => ("shared".to_string(), None),
    };
    Ok(BenchReport {
        format_version: REPORT_FORMAT_VERSION,
        log_digest: source_digest(log)?,
        n_examples: n,
        n_checkpoints: log.n_checkpoints(),
        seeds: config.seeds.clone(),
        config: ConfigSummary {
            split,
            val_fraction,
            w: config.fit.window,
            grid: config.fit.grid.step_string(),
            mode: match config.fit.mode {
                FitMode::Single => "single".into(),
                FitMode::Iterative => "iterative".into(),
            },
            exhaust: config.fit.exhaust,
            max_steps: config.fit.max_steps,
        },
        methods,
        improvement,
        plans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusekit_core::fixtures::t4;

    #[test]
    fn split_sizes() {
        let (v, s) = make_split(&SubsetMask::all(4), SplitSpec::new(3)).unwrap();
        assert_eq!((v.len(), s.len()), (2, 2));
        assert!(v.iter().all(|i| !s.contains(i)));
        let (v, s) = make_split(&SubsetMask::all(10), SplitSpec { seed: 0, val_fraction: 0.9 }).unwrap();
        assert_eq!((v.len(), s.len()), (9, 1));
        assert!(make_split(&SubsetMask::all(1), SplitSpec::new(0)).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let all = SubsetMask::all(50);
        let a = make_split(&all, SplitSpec::new(5)).unwrap();
        assert_eq!(a, make_split(&all, SplitSpec::new(5)).unwrap());
        assert_ne!(a, make_split(&all, SplitSpec::new(6)).unwrap());
    }

    #[test]
    fn split_respects_universe() {
        let universe = SubsetMask::from_indices(20, [1, 3, 5, 7, 9, 11]).unwrap();
        let (v, s) = make_split(&universe, SplitSpec::new(1)).unwrap();
        assert_eq!(v.len() + s.len(), 6);
        assert!(v.iter().chain(s.iter()).all(|i| universe.contains(i)));
    }

    #[test]
    fn subset_spec_parses() {
        assert_eq!("all".parse::<SubsetSpec>().unwrap(), SubsetSpec::All);
        assert_eq!(
            "test:4:0.25".parse::<SubsetSpec>().unwrap(),
            SubsetSpec::Test(SplitSpec { seed: 4, val_fraction: 0.25 })
        );
        assert_eq!("val:2".parse::<SubsetSpec>().unwrap(), SubsetSpec::Validation(SplitSpec::new(2)));
        assert!("val".parse::<SubsetSpec>().is_err());
        assert!("train:1".parse::<SubsetSpec>().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        assert_eq!(Method::parse_list("single, kf,single").unwrap(), vec![Method::Single, Method::Fusion]);
        assert!(matches!(Method::parse_list("single,bagging"), Err(Error::UnknownMethod(m)) if m == "bagging"));
    }

    #[test]
    fn standard_error_formula() {
        assert_eq!(standard_error(&[0.5]), 0.0);
        // sd of [1,2,3] is 1
        assert!((standard_error(&[1.0, 2.0, 3.0]) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn shared_split_on_t4() {
        let config = BenchConfig { seeds: vec![0], split: SplitMode::Shared, ..BenchConfig::default() };
        let report = bench(&t4(), &config).unwrap();
        assert_eq!(report.method("single").unwrap().mean, 0.75);
        assert_eq!(report.method("kf").unwrap().mean, 1.0);
        assert!((report.improvement.value - 0.25).abs() < 1e-12);
        assert_eq!(report.plans[0].steps, vec![PlanStepSummary { epoch: 1, epsilon: "0.34".into() }]);
    }
}
