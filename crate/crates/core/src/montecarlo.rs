//! Monte-Carlo experiments: coverage of every bound, rate fits, constant
//! calibration, the expectation-form check and the uniform-vs-relative
//! comparison.
//!
//! Trials run in parallel with seeds derived from `(master_seed, trial)`.
//! Per-trial results are collected in trial order and reduced sequentially,
//! so every report is a pure function of the configuration.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::bounds::{
    self, gaussian_t_for_failure, BoundInterval, BoundKind, ConstantNormMode, ConstantsConfig,
};
use crate::distributions::{self, DistributionSpec, EntryLaw, Family};
use crate::error::{Error, Result};
use crate::fmt::float;
use crate::linalg::{self, SymMatrix, Spectrum, TOL_EIG};
use crate::sandwich;
use crate::seed::derive_seed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Halfwidth of the Wilson score interval for `failures / trials`.
pub fn wilson_halfwidth(failures: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Slack allowed when checking `λᵢ(Σ̂)` against an interval.
pub fn containment_tol(value: f64, top: f64) -> f64 {
    1e-8 * value.abs() + TOL_EIG * top.abs().max(1.0)
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidInput("workers must be >= 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}"))),
    }
}

fn default_k() -> f64 {
    1.0
}

fn default_t1() -> f64 {
    2.0
}

fn default_output() -> String {
    "out".to_string()
}

fn deserialize_theorems<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BoundKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Word(String),
        List(Vec<BoundKind>),
    }
    match Repr::deserialize(d)? {
        Repr::Word(w) if w == "auto" => Ok(Vec::new()),
        Repr::Word(w) => Err(serde::de::Error::custom(format!("expected \"auto\" or a list, got \"{w}\""))),
        Repr::List(v) => Ok(v),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: DistributionSpec,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Empty means "pick with `select_theorem`". Also accepts `"auto"`.
    #[serde(default, deserialize_with = "deserialize_theorems")]
    pub theorems: Vec<BoundKind>,
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    /// Sub-gaussian norm `K` plugged into bounds that take one.
    #[serde(default = "default_k")]
    pub subgaussian_k: f64,
    /// `t₁` for the lower side of the nearly-square bound.
    #[serde(default = "default_t1")]
    pub square_t1: f64,
    #[serde(default = "default_output")]
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn new(spec: DistributionSpec, n: usize, trials: usize, master_seed: u64, t_grid: Vec<f64>) -> Self {
        Self {
            d: spec.d,
            spec,
            n,
            trials,
            master_seed,
            theorems: Vec::new(),
            t_grid,
            constants: ConstantsConfig::default(),
            subgaussian_k: 1.0,
            square_t1: 2.0,
            output_path: default_output(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidInput(format!("n and d must be >= 1, got n={}, d={}", self.n, self.d)));
        }
        if self.d != self.spec.d {
            return Err(Error::Spec(format!("config d = {} but spec d = {}", self.d, self.spec.d)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        if self.t_grid.is_empty() {
            return Err(Error::InvalidInput("t_grid must be nonempty".into()));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidInput(format!("t_grid values must be finite and >= 0, got {t}")));
        }
        if !(self.subgaussian_k > 0.0 && self.subgaussian_k.is_finite()) {
            return Err(Error::InvalidInput("subgaussian_k must be > 0".into()));
        }
        if !(self.square_t1 > 0.0 && self.square_t1.is_finite()) {
            return Err(Error::InvalidInput("square_t1 must be > 0".into()));
        }
        self.constants.validate()
    }

    /// Theorems to evaluate, after resolving `auto` and checking each one
    /// against the family and regime.
    pub fn resolved_theorems(&self) -> Result<Vec<BoundKind>> {
        let list = if self.theorems.is_empty() {
            bounds::select_theorem(&self.spec, self.n, self.d)?
        } else {
            self.theorems.clone()
        };
        for &k in &list {
            check_applicable(k, &self.spec, self.n, self.d)?;
        }
        Ok(list)
    }
}

fn has_constant_norm(spec: &DistributionSpec) -> bool {
    matches!(spec.family, Family::SphereIsotropic | Family::CoordinateBasis)
        || (spec.family == Family::SubgaussianEntries && spec.entry_law == Some(EntryLaw::Rademacher))
}

fn check_applicable(kind: BoundKind, spec: &DistributionSpec, n: usize, d: usize) -> Result<()> {
    let low = d <= n;
    let iid = matches!(spec.family, Family::GaussianSigma | Family::SubgaussianEntries);
    let ok = match kind {
        BoundKind::RealizedDeviation => true,
        BoundKind::GaussianLowDim => spec.family == Family::GaussianSigma && low,
        BoundKind::SubgaussianLowDim => spec.family != Family::BoundedNormCustom && low,
        BoundKind::BoundedNormLowDim => spec.norm_bound().is_some() && low,
        BoundKind::SubgaussianHighDim => iid && d >= n,
        BoundKind::ConstantNormHighDim => has_constant_norm(spec) && d >= n,
        BoundKind::ConstantNormExpectation => {
            return Err(Error::Spec(
                "constant_norm_expectation bounds E[λᵢ] and has no per-trial coverage; use the expectation check".into(),
            ))
        }
        BoundKind::NearlySquare => iid,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Spec(format!("{kind} does not apply to {:?} with n={n}, d={d}", spec.family)))
    }
}

/// Intervals for `kind` at deviation parameter `t`.
pub fn intervals_for(
    kind: BoundKind,
    t: f64,
    eigs: &Spectrum,
    cfg: &ExperimentConfig,
    constants: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let (n, d, k) = (cfg.n, cfg.d, cfg.subgaussian_k);
    match kind {
        BoundKind::GaussianLowDim => bounds::interval_gaussian(eigs, n, d, t),
        BoundKind::SubgaussianLowDim => bounds::interval_subgaussian_lowdim(eigs, n, d, t, k, constants),
        BoundKind::BoundedNormLowDim => {
            let m = cfg
                .spec
                .norm_bound()
                .ok_or_else(|| Error::Spec(format!("{:?} has no norm bound", cfg.spec.family)))?;
            bounds::interval_bounded_norm(eigs, n, d, m, t, constants)
        }
        BoundKind::SubgaussianHighDim => bounds::interval_highdim_subgaussian(eigs, n, d, t, k, constants),
        BoundKind::ConstantNormHighDim => {
            bounds::interval_highdim_independent(eigs, n, d, ConstantNormMode::HighProb { t }, constants)
        }
        BoundKind::NearlySquare => bounds::interval_square(eigs, n, d, cfg.square_t1, t, k, constants),
        BoundKind::RealizedDeviation | BoundKind::ConstantNormExpectation => {
            Err(Error::Spec(format!("{kind} is not parameterized by t")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub theorem: BoundKind,
    pub t: f64,
    pub theoretical_failure: f64,
    /// Fraction of trials in which at least one index left its interval.
    pub empirical_failure: f64,
    pub per_index_violations: Vec<usize>,
    pub trials: usize,
    pub wilson_halfwidth: f64,
}

impl CoverageReport {
    pub fn failures(&self) -> usize {
        (self.empirical_failure * self.trials as f64).round() as usize
    }
}

/// One evaluated `(theorem, t)` cell together with its intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCell {
    pub report: CoverageReport,
    pub intervals: Vec<BoundInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRun {
    /// The realized-deviation check, which must never fail.
    pub guardrail: CoverageReport,
    pub cells: Vec<CoverageCell>,
}

impl CoverageRun {
    pub fn reports(&self) -> Vec<CoverageReport> {
        std::iter::once(self.guardrail.clone())
            .chain(self.cells.iter().map(|c| c.report.clone()))
            .collect()
    }

    pub fn guardrail_ok(&self) -> bool {
        self.guardrail.per_index_violations.iter().all(|&v| v == 0)
    }
}

/// Per-trial output: the top `min(n, d)` eigenvalues of `Σ̂` and which
/// indices fell outside the realized-deviation sandwich.
#[derive(Debug, Clone)]
pub struct TrialSpectrum {
    pub values: Vec<f64>,
    pub realized_violations: Vec<bool>,
}

/// Sample all trials of `spec` at `n` rows. Results are in trial order.
pub fn trial_spectra(spec: &DistributionSpec, n: usize, trials: usize, master_seed: u64) -> Result<Vec<TrialSpectrum>> {
    let pop = spec.population_spectrum()?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(master_seed, trial as u64, "trial");
            let (z, x) = distributions::sample_pair(spec, n, seed)?;
            let emp = linalg::empirical_top_spectrum(&x)?;
            let top = emp.max();
            let realized = sandwich::realized_sandwich(&pop, &z)?;
            let realized_violations = realized
                .iter()
                .map(|b| {
                    let v = emp.lambda(b.index);
                    !b.contains(v, containment_tol(v, top))
                })
                .collect();
            Ok(TrialSpectrum { values: emp.values().to_vec(), realized_violations })
        })
        .collect()
}

fn violations(spectra: &[TrialSpectrum], intervals: &[BoundInterval]) -> (usize, Vec<usize>) {
    let mut per_index = vec![0usize; intervals.len()];
    let mut failed = 0;
    for s in spectra {
        let top = s.values.first().copied().unwrap_or(0.0);
        let mut any = false;
        for (slot, b) in per_index.iter_mut().zip(intervals) {
            let v = s.values[b.index - 1];
            if !b.contains(v, containment_tol(v, top)) {
                *slot += 1;
                any = true;
            }
        }
        failed += any as usize;
    }
    (failed, per_index)
}

fn report(theorem: BoundKind, t: f64, theoretical: f64, failed: usize, per_index: Vec<usize>, trials: usize) -> CoverageReport {
    CoverageReport {
        theorem,
        t,
        theoretical_failure: theoretical,
        empirical_failure: failed as f64 / trials as f64,
        per_index_violations: per_index,
        trials,
        wilson_halfwidth: wilson_halfwidth(failed, trials, Z95),
    }
}

/// Measures coverage of every selected theorem at every `t` in the grid.
/// The realized-deviation guardrail is always included.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageRun> {
    cfg.validate()?;
    let theorems = cfg.resolved_theorems()?;
    let eigs = cfg.spec.population_spectrum()?;
    let mut plan = Vec::new();
    for &kind in theorems.iter().filter(|k| **k != BoundKind::RealizedDeviation) {
        for &t in &cfg.t_grid {
            plan.push((kind, t, intervals_for(kind, t, &eigs, cfg, &cfg.constants)?));
        }
    }
    let spectra = trial_spectra(&cfg.spec, cfg.n, cfg.trials, cfg.master_seed)?;

    let count = cfg.n.min(cfg.d);
    let mut guard_idx = vec![0usize; count];
    let mut guard_failed = 0;
    for s in &spectra {
        let mut any = false;
        for (slot, &bad) in guard_idx.iter_mut().zip(&s.realized_violations) {
            if bad {
                *slot += 1;
                any = true;
            }
        }
        guard_failed += any as usize;
    }
    let guardrail = report(BoundKind::RealizedDeviation, 0.0, 0.0, guard_failed, guard_idx, cfg.trials);

    let cells = plan
        .into_iter()
        .map(|(kind, t, intervals)| {
            let (failed, per_index) = violations(&spectra, &intervals);
            let theoretical = intervals.first().map_or(f64::NAN, |b| b.failure_prob);
            CoverageCell { report: report(kind, t, theoretical, failed, per_index, cfg.trials), intervals }
        })
        .collect();
    Ok(CoverageRun { guardrail, cells })
}

/// One row per `(theorem, t)`.
pub fn summary_csv(reports: &[CoverageReport]) -> String {
    let mut out = String::from("theorem,t,theoretical_failure,empirical_failure,wilson_halfwidth,trials\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.theorem,
            float(r.t),
            float(r.theoretical_failure),
            float(r.empirical_failure),
            float(r.wilson_halfwidth),
            r.trials
        ));
    }
    out
}

/// One row per `(theorem, t, index)`.
pub fn diagnostics_csv(run: &CoverageRun) -> String {
    let mut out = String::from("theorem,t,index,lower,upper,epsilon,violations\n");
    for c in &run.cells {
        for (b, v) in c.intervals.iter().zip(&c.report.per_index_violations) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.report.theorem,
                float(c.report.t),
                b.index,
                float(b.lower),
                float(b.upper),
                float(b.epsilon),
                v
            ));
        }
    }
    for (i, v) in run.guardrail.per_index_violations.iter().enumerate() {
        out.push_str(&format!("{},0,{},,,,{}\n", BoundKind::RealizedDeviation, i + 1, v));
    }
    out
}

/// Columns `index,lower,upper,epsilon,theorem,failure_prob,vacuous_lower`.
/// Expectation-form bounds print `expectation` as their failure probability.
pub fn intervals_csv(intervals: &[BoundInterval]) -> String {
    let mut out = String::from("index,lower,upper,epsilon,theorem,failure_prob,vacuous_lower\n");
    for b in intervals {
        let fp = if b.is_expectation() { "expectation".to_string() } else { float(b.failure_prob) };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.index,
            float(b.lower),
            float(b.upper),
            float(b.epsilon),
            b.theorem,
            fp,
            b.vacuous_lower
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// rate fits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<RateFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need matching x and y with at least 3 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { x_values: x.to_vec(), y_values: y.to_vec(), slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Vary `n` at fixed `d ≤ n`; deviation of `λᵢ(Σ̂)`.
    N,
    /// Vary `d` at fixed `n ≤ d`; deviation of `(n/d)·λᵢ(Σ̂)`.
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base distribution; its `d` is replaced along a `d` sweep.
    pub spec: DistributionSpec,
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    /// `n` for a `d` sweep. Ignored for an `n` sweep, which uses `spec.d`.
    #[serde(default)]
    pub fixed: usize,
    pub trials: usize,
    pub master_seed: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// `max_i |λᵢ(Σ̂) − λᵢ(Σ)| / λᵢ(Σ)` (low-dim) or
/// `max_i |(n/d)λᵢ(Σ̂) − λᵢ(Σ)| / λᵢ(Σ)` (high-dim), median over trials.
pub fn median_max_relative_deviation(spec: &DistributionSpec, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let pop = spec.population_spectrum()?;
    let d = spec.d;
    let scale = if d > n { n as f64 / d as f64 } else { 1.0 };
    let spectra = trial_spectra(spec, n, trials, seed)?;
    let per_trial = spectra
        .iter()
        .map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let p = pop.lambda(i + 1);
                    (scale * v - p).abs() / p
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(median(per_trial))
}

pub fn run_rate_fit(cfg: &SweepConfig) -> Result<RateFit> {
    let v = &cfg.values;
    if v.len() < 4 {
        return Err(Error::InvalidInput(format!("sweep needs at least 4 grid points, got {}", v.len())));
    }
    let (lo, hi) = (*v.iter().min().unwrap(), *v.iter().max().unwrap());
    if lo == 0 || (hi as f64) < 10.0 * lo as f64 {
        return Err(Error::InvalidInput(format!("sweep grid must span a decade, got {lo}..{hi}")));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut y = Vec::with_capacity(v.len());
    for (k, &value) in v.iter().enumerate() {
        let seed = derive_seed(cfg.master_seed, k as u64, "sweep");
        let dev = match cfg.axis {
            SweepAxis::N => {
                if cfg.spec.d > value {
                    return Err(Error::Regime(format!("n sweep needs n >= d = {}, got {value}", cfg.spec.d)));
                }
                median_max_relative_deviation(&cfg.spec, value, cfg.trials, seed)?
            }
            SweepAxis::D => {
                if cfg.fixed == 0 || value < cfg.fixed {
                    return Err(Error::Regime(format!("d sweep needs d >= n = {} >= 1, got {value}", cfg.fixed)));
                }
                median_max_relative_deviation(&cfg.spec.with_dim(value)?, cfg.fixed, cfg.trials, seed)?
            }
        };
        y.push(dev);
    }
    let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
    fit_loglog(&x, &y)
}

// ---------------------------------------------------------------------------
// expectation-form check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    pub index: usize,
    /// Trial average of `(n/d)·λᵢ(Σ̂)`.
    pub mean_scaled: f64,
    /// Interval ends on the same `(n/d)` scale.
    pub lower: f64,
    pub upper: f64,
    /// `min(mean − lower, upper − mean)`; negative means outside.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub p: u32,
    pub k2p: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub rows: Vec<ExpectationRow>,
}

impl ExpectationReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(|r| r.margin >= 0.0)
    }
}

pub const MIN_EXPECTATION_TRIALS: usize = 1000;

/// Compares trial-averaged `(n/d)·λᵢ(Σ̂)` with the expectation-form
/// constant-norm bound, using an estimated `K(2p)`.
pub fn run_expectation_check(cfg: &ExperimentConfig, p: u32) -> Result<ExpectationReport> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    if d < n {
        return Err(Error::Regime(format!("expectation check needs d >= n, got n={n}, d={d}")));
    }
    if cfg.trials < MIN_EXPECTATION_TRIALS {
        return Err(Error::InsufficientSamples { got: cfg.trials, min: MIN_EXPECTATION_TRIALS });
    }
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    let k2p = distributions::estimate_kp(
        &cfg.spec,
        2 * p,
        10_000,
        d.min(16),
        derive_seed(cfg.master_seed, 0, "moments"),
    )?
    .value;
    let mode = ConstantNormMode::Expectation { p, k2p };
    let epsilon = bounds::eps_highdim_independent(n, d, mode, &cfg.constants)?.epsilon;
    let eigs = cfg.spec.population_spectrum()?;
    let intervals = bounds::interval_highdim_independent(&eigs, n, d, mode, &cfg.constants)?;

    let spectra = trial_spectra(&cfg.spec, n, cfg.trials, cfg.master_seed)?;
    let mut sums = vec![0.0; n];
    for s in &spectra {
        for (acc, v) in sums.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let scale = n as f64 / d as f64;
    let rows = intervals
        .iter()
        .zip(&sums)
        .map(|(b, sum)| {
            let mean_scaled = scale * sum / cfg.trials as f64;
            let (lower, upper) = (scale * b.lower, scale * b.upper);
            ExpectationRow { index: b.index, mean_scaled, lower, upper, margin: (mean_scaled - lower).min(upper - mean_scaled) }
        })
        .collect();
    Ok(ExpectationReport { p, k2p, epsilon, trials: cfg.trials, rows })
}

// ---------------------------------------------------------------------------
// uniform vs relative

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub n: usize,
    pub d: usize,
    pub decay: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// Failure probability for the relative bound.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub index: usize,
    pub population: f64,
    pub uniform_lower: f64,
    pub uniform_upper: f64,
    pub relative_lower: f64,
    pub relative_upper: f64,
    /// Uniform lower end is ≤ 0 while the relative one is > 0.
    pub uniform_vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    /// Median over trials of `‖Σ̂ − Σ‖₂`.
    pub spectral_deviation: f64,
    pub t: f64,
    pub rows: Vec<CompareRow>,
    /// Smallest `i` such that every index `≥ i` is flagged.
    pub threshold_index: Option<usize>,
}

/// Uniform (Weyl) intervals `λᵢ(Σ) ± ‖Σ̂ − Σ‖₂` against the Gaussian relative
/// intervals for `Σ = diag(e^{−decay·i})`.
pub fn run_uniform_vs_relative(cfg: &CompareConfig) -> Result<CompareTable> {
    let (n, d) = (cfg.n, cfg.d);
    if d == 0 || d > n {
        return Err(Error::Regime(format!("comparison needs 1 <= d <= n, got n={n}, d={d}")));
    }
    if !(cfg.decay >= 0.0 && cfg.decay.is_finite()) || cfg.trials == 0 {
        return Err(Error::InvalidInput("need decay >= 0 and trials >= 1".into()));
    }
    let diag: Vec<f64> = (1..=d).map(|i| (-cfg.decay * i as f64 / 2.0).exp()).collect();
    let spec = DistributionSpec::gaussian(SymMatrix::from_diag(&diag)?);
    let sigma = spec.population_matrix()?;
    let eigs = spec.population_spectrum()?;

    let norms: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let x = distributions::sample_x(&spec, n, derive_seed(cfg.master_seed, trial as u64, "trial"))?;
            let diff = linalg::sym_sub(&linalg::empirical_second_moment(&x), &sigma)?;
            linalg::sym_spectral_norm(&diff)
        })
        .collect::<Result<_>>()?;
    let spectral_deviation = median(norms);

    let t = gaussian_t_for_failure(cfg.delta)?;
    let relative = bounds::interval_gaussian(&eigs, n, d, t)?;
    let rows: Vec<CompareRow> = relative
        .iter()
        .map(|b| {
            let population = eigs.lambda(b.index);
            let uniform_lower = population - spectral_deviation;
            CompareRow {
                index: b.index,
                population,
                uniform_lower,
                uniform_upper: population + spectral_deviation,
                relative_lower: b.lower,
                relative_upper: b.upper,
                uniform_vacuous: uniform_lower <= 0.0 && b.lower > 0.0,
            }
        })
        .collect();
    let threshold_index = rows
        .iter()
        .rposition(|r| !r.uniform_vacuous)
        .map_or(Some(1), |last_bad| (last_bad + 1 < rows.len()).then_some(last_bad + 2));
    Ok(CompareTable { spectral_deviation, t, rows, threshold_index })
}

pub fn compare_csv(table: &CompareTable) -> String {
    let mut out = String::from(
        "index,population,uniform_lower,uniform_upper,relative_lower,relative_upper,uniform_vacuous\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index,
            float(r.population),
            float(r.uniform_lower),
            float(r.uniform_upper),
            float(r.relative_lower),
            float(r.relative_upper),
            r.uniform_vacuous
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// calibration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub spec: DistributionSpec,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationGrid {
    pub theorem: BoundKind,
    /// Required fraction of trials with every index covered.
    pub target_coverage: f64,
    pub points: Vec<GridPoint>,
    pub t: f64,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default = "default_k")]
    pub subgaussian_k: f64,
    #[serde(default = "default_t1")]
    pub square_t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEvidence {
    pub n: usize,
    pub d: usize,
    pub family: Family,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub theorem: BoundKind,
    pub constant: String,
    pub value: f64,
    pub constants: ConstantsConfig,
    pub evidence: Vec<CalibrationEvidence>,
}

/// Upper limit of the constant search.
pub const CALIBRATION_CEILING: f64 = 1e6;

/// Name of the constant that widens the intervals of `kind`, or
/// `NotCalibratable` when no such constant exists.
pub fn calibration_target(kind: BoundKind) -> Result<&'static str> {
    match kind {
        BoundKind::SubgaussianLowDim => Ok("subgaussian_low_dim"),
        BoundKind::SubgaussianHighDim => Ok("subgaussian_high_dim"),
        BoundKind::ConstantNormHighDim => Ok("constant_norm_scale"),
        BoundKind::NearlySquare => Ok("square_upper"),
        BoundKind::GaussianLowDim | BoundKind::RealizedDeviation => {
            Err(Error::NotCalibratable(format!("{kind} has no free constant")))
        }
        BoundKind::BoundedNormLowDim => Err(Error::NotCalibratable(format!(
            "{kind}: its constant only enters the failure probability"
        ))),
        BoundKind::ConstantNormExpectation => Err(Error::NotCalibratable(format!(
            "{kind} bounds an expectation, not per-trial coverage"
        ))),
    }
}

fn set_constant(c: &mut ConstantsConfig, name: &str, v: f64) {
    match name {
        "subgaussian_low_dim" => c.subgaussian_low_dim = v,
        "subgaussian_high_dim" => c.subgaussian_high_dim = v,
        "constant_norm_scale" => c.constant_norm_scale = v,
        "square_upper" => c.square_upper = v,
        other => unreachable!("not a calibration target: {other}"),
    }
}

struct CachedPoint {
    cfg: ExperimentConfig,
    eigs: Spectrum,
    spectra: Vec<TrialSpectrum>,
}

fn point_configs(grid: &CalibrationGrid, seed: u64) -> Result<Vec<ExperimentConfig>> {
    grid.points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut cfg = ExperimentConfig::new(p.spec.clone(), p.n, grid.trials, derive_seed(seed, k as u64, "grid"), vec![grid.t]);
            cfg.theorems = vec![grid.theorem];
            cfg.constants = grid.constants;
            cfg.subgaussian_k = grid.subgaussian_k;
            cfg.square_t1 = grid.square_t1;
            cfg.validate()?;
            cfg.resolved_theorems()?;
            Ok(cfg)
        })
        .collect()
}

fn cache(configs: Vec<ExperimentConfig>) -> Result<Vec<CachedPoint>> {
    configs
        .into_iter()
        .map(|cfg| {
            let eigs = cfg.spec.population_spectrum()?;
            let spectra = trial_spectra(&cfg.spec, cfg.n, cfg.trials, cfg.master_seed)?;
            Ok(CachedPoint { cfg, eigs, spectra })
        })
        .collect()
}

fn grid_coverage(points: &[CachedPoint], kind: BoundKind, t: f64, constants: &ConstantsConfig) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let iv = intervals_for(kind, t, &p.eigs, &p.cfg, constants)?;
            let (failed, _) = violations(&p.spectra, &iv);
            Ok(1.0 - failed as f64 / p.spectra.len() as f64)
        })
        .collect()
}

fn evidence(points: &[CachedPoint], cov: &[f64]) -> Vec<CalibrationEvidence> {
    points
        .iter()
        .zip(cov)
        .map(|(p, &coverage)| CalibrationEvidence { n: p.cfg.n, d: p.cfg.d, family: p.cfg.spec.family, coverage })
        .collect()
}

/// Coverage at each grid point for the given constants, on a fresh seed.
pub fn grid_coverage_at(grid: &CalibrationGrid, constants: &ConstantsConfig, seed: u64) -> Result<Vec<CalibrationEvidence>> {
    let points = cache(point_configs(grid, seed)?)?;
    let cov = grid_coverage(&points, grid.theorem, grid.t, constants)?;
    Ok(evidence(&points, &cov))
}

/// Smallest value of the theorem's free constant for which coverage reaches
/// `target_coverage` at every grid point. Spectra are sampled once; the
/// search doubles from 1 until covered, then bisects.
pub fn calibrate_constant(grid: &CalibrationGrid) -> Result<Calibration> {
    let name = calibration_target(grid.theorem)?;
    if !(grid.target_coverage > 0.0 && grid.target_coverage < 1.0) {
        return Err(Error::InvalidInput(format!("target coverage must be in (0, 1), got {}", grid.target_coverage)));
    }
    if grid.points.is_empty() || grid.trials == 0 {
        return Err(Error::InvalidInput("calibration needs grid points and trials".into()));
    }
    let points = cache(point_configs(grid, grid.master_seed)?)?;
    let kind = grid.theorem;
    let mut constants = grid.constants;
    let covered = |v: f64, c: &mut ConstantsConfig| -> Result<(bool, Vec<f64>)> {
        set_constant(c, name, v);
        let cov = grid_coverage(&points, kind, grid.t, c)?;
        Ok((cov.iter().all(|&x| x >= grid.target_coverage), cov))
    };

    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        if covered(hi, &mut constants)?.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > CALIBRATION_CEILING {
            return Err(Error::CalibrationFailed(format!(
                "{kind}: coverage {} not reached with {name} <= {CALIBRATION_CEILING}",
                grid.target_coverage
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if covered(mid, &mut constants)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, cov) = covered(hi, &mut constants)?;
    Ok(Calibration { theorem: kind, constant: name.to_string(), value: hi, constants, evidence: evidence(&points, &cov) })
}
