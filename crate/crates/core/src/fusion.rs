//! Knowledge fusion: fitting a plan of early-checkpoint blends on a validation
//! subset, and applying it at inference.
//!
//! Fitting starts from the final checkpoint. Each round picks the explorable
//! checkpoint that best recovers the current predictor's mistakes (largest
//! generalized forget fraction), averages the checkpoints in a window around
//! it, and blends that average into the current predictor with the smallest
//! grid weight that maximizes validation accuracy. Weight 0 is always on the
//! grid, so a fitted plan never lowers validation accuracy.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::checkpoint::CheckpointSource;
use crate::error::{Error, Result};
use crate::metrics::forget_against;
use crate::probs::DenseProbs;
use crate::subset::SubsetMask;

/// Largest decimal exponent a grid may need for exact fixed-point formatting.
const MAX_GRID_DIGITS: u32 = 9;

/// The weight grid `{0, 1/steps, 2/steps, ..., 1}`.
///
/// `steps` must divide a power of ten so every grid value has an exact
/// decimal representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpsilonGrid {
    steps: u32,
    digits: u32,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid { steps: 100, digits: 2 }
    }
}

impl EpsilonGrid {
    pub fn with_steps(steps: u32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid(String::from("grid needs at least one step")));
        }
        let digits = (0..=MAX_GRID_DIGITS)
            .find(|&d| 10u64.pow(d) % u64::from(steps) == 0)
            .ok_or_else(|| Error::InvalidGrid(format!("1/{steps} has no exact decimal form")))?;
        Ok(EpsilonGrid { steps, digits })
    }

    /// Parses a step written as a decimal, e.g. `"0.01"`.
    pub fn parse_step(step: &str) -> Result<Self> {
        let scaled = parse_fixed(step, MAX_GRID_DIGITS)
            .ok_or_else(|| Error::InvalidGrid(format!("cannot parse grid step {step:?}")))?;
        let unit = 10u64.pow(MAX_GRID_DIGITS);
        if scaled == 0 || scaled > unit || !unit.is_multiple_of(scaled) {
            return Err(Error::InvalidGrid(format!("grid step {step} does not divide 1")));
        }
        Self::with_steps((unit / scaled) as u32)
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Decimal digits needed to write any grid value exactly.
    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Grid value `units / steps`.
    #[inline]
    pub fn value(&self, units: u32) -> f64 {
        f64::from(units) / f64::from(self.steps)
    }

    pub fn step_string(&self) -> String {
        self.format(1)
    }

    /// Fixed-point decimal rendering of `units / steps`, e.g. `"0.34"`.
    pub fn format(&self, units: u32) -> String {
        let scale = 10u64.pow(self.digits);
        let scaled = u64::from(units) * (scale / u64::from(self.steps));
        if self.digits == 0 {
            return format!("{scaled}");
        }
        format!("{}.{:0width$}", scaled / scale, scaled % scale, width = self.digits as usize)
    }

    /// Inverse of [`EpsilonGrid::format`]; rejects values off the grid or outside `[0, 1]`.
    pub fn parse(&self, text: &str) -> Result<u32> {
        let bad = || Error::InvalidPlan(format!("epsilon {text:?} is not on the {} grid", self.step_string()));
        let scaled = parse_fixed(text, MAX_GRID_DIGITS).ok_or_else(bad)?;
        let per_unit = 10u64.pow(MAX_GRID_DIGITS) / u64::from(self.steps);
        if scaled % per_unit != 0 || scaled / per_unit > u64::from(self.steps) {
            return Err(bad());
        }
        Ok((scaled / per_unit) as u32)
    }
}

/// Parses a non-negative decimal into an integer scaled by `10^digits`.
fn parse_fixed(text: &str, digits: u32) -> Option<u64> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int.is_empty() || frac.len() > digits as usize {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int: u64 = int.parse().ok()?;
    let mut frac_scaled: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    frac_scaled *= 10u64.pow(digits - frac.len() as u32);
    int.checked_mul(10u64.pow(digits))?.checked_add(frac_scaled)
}

/// One fitted blend: the window center, by epoch id, and its weight in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionStep {
    pub epoch: u64,
    pub epsilon_units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FitMetadata {
    pub validation_digest: Option<u64>,
    pub validation_size: Option<usize>,
    pub seed: Option<u64>,
}

/// Fitted fusion hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionPlan {
    pub window: usize,
    pub grid: EpsilonGrid,
    pub steps: Vec<FusionStep>,
    pub meta: FitMetadata,
}

impl FusionPlan {
    pub fn empty(window: usize, grid: EpsilonGrid) -> Self {
        FusionPlan { window, grid, steps: Vec::new(), meta: FitMetadata::default() }
    }

    pub fn epsilon(&self, step: &FusionStep) -> f64 {
        self.grid.value(step.epsilon_units)
    }

    /// Resolves step epochs to checkpoint indices of `log` and checks the plan
    /// invariants against it.
    pub fn resolve<L: CheckpointSource + ?Sized>(&self, log: &L) -> Result<Vec<(usize, f64)>> {
        let last = log.last();
        let mut resolved = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            if step.epsilon_units > self.grid.steps() {
                return Err(Error::EpsilonOutOfRange(self.epsilon(step)));
            }
            let index = log.checkpoint_of_epoch(step.epoch)?;
            if index == last {
                return Err(Error::InvalidPlan(format!("step at final epoch {}", step.epoch)));
            }
            if let Some(&(other, _)) = resolved.iter().find(|&&(k, _): &&(usize, f64)| k.abs_diff(index) <= self.window) {
                return Err(Error::InvalidPlan(format!(
                    "steps at checkpoints {other} and {index} fall inside each other's window"
                )));
            }
            resolved.push((index, self.epsilon(step)));
        }
        Ok(resolved)
    }

    /// Distinct checkpoints the plan reads on `log`, the final one included.
    pub fn checkpoints_used<L: CheckpointSource + ?Sized>(&self, log: &L) -> Result<usize> {
        let last = log.last();
        let mut used = alloc::vec![false; last + 1];
        used[last] = true;
        for (center, _) in self.resolve(log)? {
            let (lo, hi) = window_bounds(center, self.window, last);
            used[lo..=hi].iter_mut().for_each(|u| *u = true);
        }
        Ok(used.iter().filter(|&&u| u).count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMode {
    /// One round only.
    Single,
    /// Rounds until a round selects weight 0 or nothing is left to explore.
    #[default]
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitConfig {
    pub window: usize,
    pub grid: EpsilonGrid,
    pub mode: FitMode,
    /// Keep exploring (and recording weight-0 steps) until every checkpoint is
    /// excluded, instead of stopping at the first weight-0 round.
    pub exhaust: bool,
    /// Upper bound on recorded steps.
    pub max_steps: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { window: 1, grid: EpsilonGrid::default(), mode: FitMode::Iterative, exhaust: false, max_steps: None }
    }
}

/// One recorded round of [`fit_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitRound {
    pub checkpoint: usize,
    pub forget: f64,
    pub epsilon_units: u32,
    /// Validation examples correct after the round.
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub plan: FusionPlan,
    pub rounds: Vec<FitRound>,
    /// Validation examples the final checkpoint gets right.
    pub base_correct: usize,
    /// Validation examples the fused predictor gets right.
    pub fused_correct: usize,
    pub validation_size: usize,
}

impl FitOutcome {
    pub fn base_accuracy(&self) -> f64 {
        self.base_correct as f64 / self.validation_size as f64
    }

    pub fn fused_accuracy(&self) -> f64 {
        self.fused_correct as f64 / self.validation_size as f64
    }
}

/// Fused probabilities and predictions for the members of a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedOutput {
    pub subset: SubsetMask,
    pub probs: DenseProbs,
    pub predictions: Vec<u32>,
}

impl FusedOutput {
    pub fn accuracy(&self, labels: &[u32]) -> f64 {
        let hits = self.subset.iter().zip(&self.predictions).filter(|&(i, &p)| labels[i] == p).count();
        hits as f64 / self.subset.len() as f64
    }
}

fn window_bounds(center: usize, window: usize, last: usize) -> (usize, usize) {
    (center.saturating_sub(window), center.saturating_add(window).min(last))
}

/// Unweighted mean of the checkpoints in `[center - window, center + window]`,
/// clamped to the stored range, over the members of `subset`.
pub fn window_average<L: CheckpointSource + ?Sized>(
    log: &L,
    center: usize,
    window: usize,
    subset: &SubsetMask,
) -> Result<DenseProbs> {
    let last = log.last();
    if center > last {
        return Err(Error::CheckpointOutOfRange { index: center, len: last + 1 });
    }
    subset.check_universe(log.n_examples())?;
    let (lo, hi) = window_bounds(center, window, last);
    mean_of_checkpoints(log, lo..=hi, subset)
}

/// Unweighted mean of the given checkpoints, summed in iteration order.
pub fn mean_of_checkpoints<L: CheckpointSource + ?Sized>(
    log: &L,
    checkpoints: impl IntoIterator<Item = usize>,
    subset: &SubsetMask,
) -> Result<DenseProbs> {
    let classes = log.n_classes();
    let mut acc = DenseProbs::zeros(subset.len(), classes);
    let mut row = alloc::vec![0.0; classes];
    let mut count = 0usize;
    for k in checkpoints {
        log.with_checkpoint(k, |cp| {
            for (out, i) in acc.as_mut_slice().chunks_exact_mut(classes).zip(subset.iter()) {
                cp.row_into(i, &mut row);
                out.iter_mut().zip(&row).for_each(|(o, v)| *o += v);
            }
        })?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoCheckpoints);
    }
    let denom = count as f64;
    acc.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
    Ok(acc)
}

#[inline]
fn mix(early: f64, current: f64, eps: f64) -> f64 {
    eps * early + (1.0 - eps) * current
}

fn check_blend_inputs(prob_a: &DenseProbs, prob_cur: &DenseProbs, eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    if prob_a.shape() != prob_cur.shape() {
        return Err(Error::ShapeMismatch { expected: prob_cur.shape(), actual: prob_a.shape() });
    }
    Ok(())
}

/// `eps * prob_a + (1 - eps) * prob_cur`, elementwise.
pub fn blend(prob_a: &DenseProbs, prob_cur: &DenseProbs, eps: f64) -> Result<DenseProbs> {
    let mut out = prob_cur.clone();
    blend_into(prob_a, &mut out, eps)?;
    Ok(out)
}

fn blend_into(prob_a: &DenseProbs, current: &mut DenseProbs, eps: f64) -> Result<()> {
    check_blend_inputs(prob_a, current, eps)?;
    for (c, &a) in current.as_mut_slice().iter_mut().zip(prob_a.as_slice()) {
        *c = mix(a, *c, eps);
    }
    Ok(())
}

/// Result of a weight search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonChoice {
    pub units: u32,
    pub epsilon: f64,
    pub correct: usize,
    pub accuracy: f64,
}

fn blended_correct(prob_a: &DenseProbs, prob_cur: &DenseProbs, labels: &[u32], subset: &SubsetMask, eps: f64) -> usize {
    subset
        .iter()
        .enumerate()
        .filter(|&(row, i)| {
            let a = prob_a.row(row);
            let c = prob_cur.row(row);
            crate::checkpoint::argmax(a.iter().zip(c).map(|(&a, &c)| mix(a, c, eps))) == labels[i]
        })
        .count()
}

/// Smallest grid weight maximizing accuracy of `blend(prob_a, prob_cur, eps)`
/// on `subset`. Rows of both matrices are aligned with `subset`.
pub fn search_epsilon(
    prob_cur: &DenseProbs,
    prob_a: &DenseProbs,
    labels: &[u32],
    subset: &SubsetMask,
    grid: EpsilonGrid,
) -> Result<EpsilonChoice> {
    subset.require_nonempty()?;
    check_blend_inputs(prob_a, prob_cur, 0.0)?;
    if prob_cur.rows() != subset.len() {
        return Err(Error::ShapeMismatch { expected: (subset.len(), prob_cur.classes()), actual: prob_cur.shape() });
    }
    let mut best: Option<(u32, usize)> = None;
    for units in 0..=grid.steps() {
        let correct = blended_correct(prob_a, prob_cur, labels, subset, grid.value(units));
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((units, correct));
        }
    }
    let (units, correct) = best.expect("grid contains 0");
    Ok(EpsilonChoice {
        units,
        epsilon: grid.value(units),
        correct,
        accuracy: correct as f64 / subset.len() as f64,
    })
}

fn count_correct(probs: &DenseProbs, labels: &[u32], subset: &SubsetMask) -> usize {
    subset.iter().enumerate().filter(|&(row, i)| probs.predict(row) == labels[i]).count()
}

/// Fits a fusion plan on `validation`.
pub fn fit_plan<L: CheckpointSource + ?Sized>(log: &L, validation: &SubsetMask, config: &FitConfig) -> Result<FitOutcome> {
    let n_cp = log.n_checkpoints();
    if n_cp < 2 {
        return Err(Error::TooFewCheckpoints { needed: 2, available: n_cp });
    }
    validation.require_nonempty()?;
    validation.check_universe(log.n_examples())?;
    let labels = log.labels();
    let last = log.last();
    let window = config.window;

    let mut current = DenseProbs::from_checkpoint(log, last, validation)?;
    let base_correct = count_correct(&current, labels, validation);
    let mut correct = base_correct;
    let mut explore: Vec<usize> = (0..last).collect();
    let mut steps = Vec::new();
    let mut rounds = Vec::new();

    while !explore.is_empty() {
        if config.max_steps.is_some_and(|m| steps.len() >= m) {
            break;
        }
        let forget = forget_against(&current, log, validation, &explore)?;
        let (center, peak) = forget
            .iter()
            .copied()
            .fold(None, |best: Option<(usize, f64)>, (k, f)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((k, f)),
            })
            .expect("explore is nonempty");
        explore.retain(|&k| k.abs_diff(center) > window);

        let early = window_average(log, center, window, validation)?;
        let choice = search_epsilon(&current, &early, labels, validation, config.grid)?;
        if choice.units == 0 && !config.exhaust {
            break;
        }
        blend_into(&early, &mut current, choice.epsilon)?;
        correct = count_correct(&current, labels, validation);
        debug_assert_eq!(correct, choice.correct);
        steps.push(FusionStep { epoch: log.epochs()[center], epsilon_units: choice.units });
        rounds.push(FitRound { checkpoint: center, forget: peak, epsilon_units: choice.units, correct });
        if config.mode == FitMode::Single {
            break;
        }
    }

    let plan = FusionPlan {
        window,
        grid: config.grid,
        steps,
        meta: FitMetadata {
            validation_digest: Some(validation.digest()),
            validation_size: Some(validation.len()),
            seed: None,
        },
    };
    Ok(FitOutcome { plan, rounds, base_correct, fused_correct: correct, validation_size: validation.len() })
}

/// Applies `plan` to the members of `subset`.
pub fn apply_plan<L: CheckpointSource + ?Sized>(log: &L, plan: &FusionPlan, subset: &SubsetMask) -> Result<FusedOutput> {
    subset.check_universe(log.n_examples())?;
    let steps = plan.resolve(log)?;
    let mut current = DenseProbs::from_checkpoint(log, log.last(), subset)?;
    for (center, eps) in steps {
        let early = window_average(log, center, plan.window, subset)?;
        blend_into(&early, &mut current, eps)?;
    }
    let predictions = current.predictions();
    Ok(FusedOutput { subset: subset.clone(), probs: current, predictions })
}
