//! Closed-form relative deviation bounds.
//!
//! Every bound has the shape
//!
//! ```text
//!   scale · λ_{i+shift}(Σ) · lower_mult  ≤  λᵢ(Σ̂)  ≤  scale · λᵢ(Σ) · upper_mult
//! ```
//!
//! with `scale = 1, shift = 0` when `d ≤ n` and `scale = d/n, shift = d − n`
//! when `d ≥ n` (only the first `n` eigenvalues of `Σ̂` can be nonzero there).
//! Both regimes run through the same arithmetic so that at `d = n` they agree
//! bit for bit.
//!
//! Most bounds carry an absolute constant whose value is only known to exist.
//! Those live in [`ConstantsConfig`], default to 1, and can be fitted with
//! `montecarlo::calibrate_constant`.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::linalg::Spectrum;

/// Which bound produced an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Deterministic sandwich driven by the realized `‖(1/n)ZᵀZ − I‖₂` (or
    /// `‖(1/d)ZZᵀ − I‖₂` when `d ≥ n`).
    RealizedDeviation,
    /// `d ≤ n`, sub-gaussian isotropic rows.
    SubgaussianLowDim,
    /// `d ≤ n`, Gaussian rows. All constants explicit.
    GaussianLowDim,
    /// `d ≤ n`, rows with `‖z‖² ≤ m` almost surely.
    BoundedNormLowDim,
    /// `d ≥ n`, independent sub-gaussian entries.
    SubgaussianHighDim,
    /// `d ≥ n`, sub-gaussian rows with `‖z‖ = √d`, high-probability form.
    ConstantNormHighDim,
    /// `d ≥ n`, rows with `‖z‖ = √d`, bound on `E[λᵢ(Σ̂)]` via moments `K(2p)`.
    ConstantNormExpectation,
    /// Square or nearly square, i.i.d. sub-gaussian entries.
    NearlySquare,
}

impl BoundKind {
    pub const ALL: [BoundKind; 8] = [
        BoundKind::RealizedDeviation,
        BoundKind::SubgaussianLowDim,
        BoundKind::GaussianLowDim,
        BoundKind::BoundedNormLowDim,
        BoundKind::SubgaussianHighDim,
        BoundKind::ConstantNormHighDim,
        BoundKind::ConstantNormExpectation,
        BoundKind::NearlySquare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::RealizedDeviation => "realized_deviation",
            BoundKind::SubgaussianLowDim => "subgaussian_low_dim",
            BoundKind::GaussianLowDim => "gaussian_low_dim",
            BoundKind::BoundedNormLowDim => "bounded_norm_low_dim",
            BoundKind::SubgaussianHighDim => "subgaussian_high_dim",
            BoundKind::ConstantNormHighDim => "constant_norm_high_dim",
            BoundKind::ConstantNormExpectation => "constant_norm_expectation",
            BoundKind::NearlySquare => "nearly_square",
        }
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown bound `{s}`")))
    }
}

/// Absolute constants that are only known to exist. All must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    /// Scale on `K²·max(ε, ε²)` for sub-gaussian rows, `d ≤ n`.
    pub subgaussian_low_dim: f64,
    /// Tail exponent `c` in `2d·exp(−c t²)` for bounded-norm rows.
    pub bounded_norm_tail: f64,
    /// Scale on `K²·max(ε, ε²)` for sub-gaussian entries, `d ≥ n`.
    pub subgaussian_high_dim: f64,
    /// `C_K` multiplying `√(n/d)` for constant-norm rows.
    pub constant_norm_scale: f64,
    /// `c_K` in the tail `2·exp(−c_K t²)` for constant-norm rows.
    pub constant_norm_tail: f64,
    /// Rosenthal-inequality constant in the incoherence bounds.
    pub rosenthal: f64,
    /// `C_K` in the smallest-singular-value tail `(C_K/t₁)^{k}`.
    pub square_lower_scale: f64,
    /// `c_K` in the `exp(−c_K·max(n, d))` term of the nearly-square tail.
    pub square_lower_tail: f64,
    /// `C̃` on the upper side of the nearly-square bound.
    pub square_upper: f64,
    /// `C` in `E‖(1/d)ZZᵀ − I‖₂ ≤ C·√(m·log n / d)`.
    pub expectation_deviation: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            subgaussian_low_dim: 1.0,
            bounded_norm_tail: 1.0,
            subgaussian_high_dim: 1.0,
            constant_norm_scale: 1.0,
            constant_norm_tail: 1.0,
            rosenthal: 1.0,
            square_lower_scale: 1.0,
            square_lower_tail: 1.0,
            square_upper: 1.0,
            expectation_deviation: 1.0,
        }
    }
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("subgaussian_low_dim", self.subgaussian_low_dim),
            ("bounded_norm_tail", self.bounded_norm_tail),
            ("subgaussian_high_dim", self.subgaussian_high_dim),
            ("constant_norm_scale", self.constant_norm_scale),
            ("constant_norm_tail", self.constant_norm_tail),
            ("rosenthal", self.rosenthal),
            ("square_lower_scale", self.square_lower_scale),
            ("square_lower_tail", self.square_lower_tail),
            ("square_upper", self.square_upper),
            ("expectation_deviation", self.expectation_deviation),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("constant {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Admissible range for one `λᵢ(Σ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInterval {
    /// 1-based eigenvalue index.
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub theorem: BoundKind,
    /// Probability that the bound fails. `NaN` marks a bound on the
    /// expectation `E[λᵢ(Σ̂)]`, which has no failure probability.
    pub failure_prob: f64,
    /// The raw lower end was ≤ 0 and has been clamped to 0.
    pub vacuous_lower: bool,
}

impl BoundInterval {
    pub fn is_expectation(&self) -> bool {
        self.failure_prob.is_nan()
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }
}

/// `ε`, the multiplicative deviation `factor`, and the failure probability
/// (clamped to 1, with `vacuous_prob` set when clamping happened).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonFactor {
    pub epsilon: f64,
    pub factor: f64,
    pub failure_prob: f64,
    pub vacuous_prob: bool,
}

fn clamp_prob(raw: f64) -> (f64, bool) {
    if raw.is_nan() {
        return (1.0, true);
    }
    if raw >= 1.0 {
        (1.0, true)
    } else {
        (raw.max(0.0), false)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput(format!("n and d must be >= 1, got n={n}, d={d}")));
    }
    Ok(())
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("sub-gaussian norm K must be > 0, got {k}")));
    }
    Ok(())
}

fn low_dim_only(n: usize, d: usize) -> Result<()> {
    check_dims(n, d)?;
    if d > n {
        return Err(Error::Regime(format!("bound needs d <= n, got d={d}, n={n}")));
    }
    Ok(())
}

fn high_dim_only(n: usize, d: usize) -> Result<()> {
    check_dims(n, d)?;
    if d < n {
        return Err(Error::Regime(format!("bound needs d >= n, got d={d}, n={n}")));
    }
    Ok(())
}

/// Shared interval builder. Low-dim uses `count = d, shift = 0, scale = 1`;
/// high-dim uses `count = n, shift = d − n, scale = d/n`.
#[allow(clippy::too_many_arguments)]
fn build_intervals(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    lower_mult: f64,
    upper_mult: f64,
    epsilon: f64,
    theorem: BoundKind,
    failure_prob: f64,
) -> Result<Vec<BoundInterval>> {
    if eigs.len() != d {
        return Err(Error::InvalidInput(format!(
            "population spectrum has {} values but d = {d}",
            eigs.len()
        )));
    }
    let count = n.min(d);
    let shift = d - count;
    let scale = d as f64 / count as f64;
    let vacuous = lower_mult <= 0.0;
    Ok((1..=count)
        .map(|i| {
            let upper = scale * (eigs.lambda(i) * upper_mult);
            let raw_lower = scale * (eigs.lambda(i + shift) * lower_mult);
            let lower = if vacuous { 0.0 } else { raw_lower.max(0.0).min(upper) };
            BoundInterval {
                index: i,
                lower,
                upper,
                epsilon,
                theorem,
                failure_prob,
                vacuous_lower: vacuous,
            }
        })
        .collect())
}

/// Realized-deviation sandwich intervals from an observed deviation `dev`.
/// Shared by the two deterministic sandwich regimes.
pub(crate) fn realized_intervals(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    dev: f64,
) -> Result<Vec<BoundInterval>> {
    if !(dev >= 0.0 && dev.is_finite()) {
        return Err(Error::InvalidInput(format!("deviation must be >= 0, got {dev}")));
    }
    build_intervals(eigs, n, d, 1.0 - dev, 1.0 + dev, dev, BoundKind::RealizedDeviation, 0.0)
}

/// `ε = √(d/n) + t/√n`, `factor = C·K²·max(ε, ε²)`, failure `2·exp(−t²)`.
pub fn eps_lowdim_subgaussian(
    n: usize,
    d: usize,
    t: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<EpsilonFactor> {
    low_dim_only(n, d)?;
    check_t(t)?;
    check_k(k)?;
    let nf = n as f64;
    let epsilon = (d as f64 / nf).sqrt() + t / nf.sqrt();
    let factor = cfg.subgaussian_low_dim * k * k * epsilon.max(epsilon * epsilon);
    let (failure_prob, vacuous_prob) = clamp_prob(2.0 * (-t * t).exp());
    Ok(EpsilonFactor { epsilon, factor, failure_prob, vacuous_prob })
}

pub fn interval_subgaussian_lowdim(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    t: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let e = eps_lowdim_subgaussian(n, d, t, k, cfg)?;
    build_intervals(
        eigs,
        n,
        d,
        1.0 - e.factor,
        1.0 + e.factor,
        e.epsilon,
        BoundKind::SubgaussianLowDim,
        e.failure_prob,
    )
}

/// Gaussian rows: `ε = √(d/n) + t/√n`, `factor = 2ε + ε²`, failure
/// `2·exp(−t²/2)`. No free constants.
pub fn eps_gaussian(n: usize, d: usize, t: f64) -> Result<EpsilonFactor> {
    low_dim_only(n, d)?;
    check_t(t)?;
    let nf = n as f64;
    let epsilon = (d as f64 / nf).sqrt() + t / nf.sqrt();
    let factor = 2.0 * epsilon + epsilon * epsilon;
    let (failure_prob, vacuous_prob) = clamp_prob(2.0 * (-t * t / 2.0).exp());
    Ok(EpsilonFactor { epsilon, factor, failure_prob, vacuous_prob })
}

pub fn interval_gaussian(eigs: &Spectrum, n: usize, d: usize, t: f64) -> Result<Vec<BoundInterval>> {
    let e = eps_gaussian(n, d, t)?;
    build_intervals(
        eigs,
        n,
        d,
        1.0 - e.factor,
        1.0 + e.factor,
        e.epsilon,
        BoundKind::GaussianLowDim,
        e.failure_prob,
    )
}

/// `t` at which `2·exp(−t²/2)` equals `delta`.
pub fn gaussian_t_for_failure(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::InvalidInput(format!("target failure must be in (0, 2), got {delta}")));
    }
    Ok((2.0 * (2.0 / delta).ln()).sqrt())
}

/// Bounded-norm rows (`‖z‖² ≤ m`): `ε = t·√(m/n)`, `factor = max(ε, ε²)`,
/// failure `2d·exp(−c t²)`.
pub fn eps_bounded_norm(
    n: usize,
    d: usize,
    m_bound: f64,
    t: f64,
    cfg: &ConstantsConfig,
) -> Result<EpsilonFactor> {
    check_dims(n, d)?;
    check_t(t)?;
    if !(m_bound >= d as f64) || !m_bound.is_finite() {
        return Err(Error::InvalidInput(format!(
            "norm bound m must be >= d for isotropic rows, got m={m_bound}, d={d}"
        )));
    }
    let epsilon = t * (m_bound / n as f64).sqrt();
    let factor = epsilon.max(epsilon * epsilon);
    let (failure_prob, vacuous_prob) =
        clamp_prob(2.0 * d as f64 * (-cfg.bounded_norm_tail * t * t).exp());
    Ok(EpsilonFactor { epsilon, factor, failure_prob, vacuous_prob })
}

/// `t` at which `2d·exp(−c t²)` equals `delta`.
pub fn bounded_norm_t_for_failure(d: usize, delta: f64, cfg: &ConstantsConfig) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("target failure must be in (0, 1), got {delta}")));
    }
    Ok(((2.0 * d as f64 / delta).ln() / cfg.bounded_norm_tail).sqrt())
}

pub fn interval_bounded_norm(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    m_bound: f64,
    t: f64,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    low_dim_only(n, d)?;
    let e = eps_bounded_norm(n, d, m_bound, t, cfg)?;
    build_intervals(
        eigs,
        n,
        d,
        1.0 - e.factor,
        1.0 + e.factor,
        e.epsilon,
        BoundKind::BoundedNormLowDim,
        e.failure_prob,
    )
}

/// `d ≥ n`, sub-gaussian entries: `ε = √(n/d) + t/√d`,
/// `factor = C·K²·max(ε, ε²)`, failure `2·exp(−t²)`.
pub fn eps_highdim_subgaussian(
    n: usize,
    d: usize,
    t: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<EpsilonFactor> {
    high_dim_only(n, d)?;
    check_t(t)?;
    check_k(k)?;
    let df = d as f64;
    let epsilon = (n as f64 / df).sqrt() + t / df.sqrt();
    let factor = cfg.subgaussian_high_dim * k * k * epsilon.max(epsilon * epsilon);
    let (failure_prob, vacuous_prob) = clamp_prob(2.0 * (-t * t).exp());
    Ok(EpsilonFactor { epsilon, factor, failure_prob, vacuous_prob })
}

pub fn interval_highdim_subgaussian(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    t: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let e = eps_highdim_subgaussian(n, d, t, k, cfg)?;
    build_intervals(
        eigs,
        n,
        d,
        1.0 - e.factor,
        1.0 + e.factor,
        e.epsilon,
        BoundKind::SubgaussianHighDim,
        e.failure_prob,
    )
}

/// How the constant-norm (`‖z‖ = √d`) high-dimensional bound is stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConstantNormMode {
    /// Holds with probability `1 − 2·exp(−c_K t²)`.
    HighProb { t: f64 },
    /// Bounds `E[λᵢ(Σ̂)]`; `k2p` is the directional moment `K(2p)`.
    Expectation { p: u32, k2p: f64 },
}

/// `B(n, p) = C·(p / log(p+1))·n^{1/p}·max(n, n^{1/p}·K(2p)²)·log n`.
pub fn moment_budget(n: usize, p: u32, k2p: f64, cfg: &ConstantsConfig) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput(format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    if !(k2p > 0.0 && k2p.is_finite()) {
        return Err(Error::InvalidInput(format!("K(2p) must be > 0, got {k2p}")));
    }
    let nf = n as f64;
    let pf = p as f64;
    let root = nf.powf(1.0 / pf);
    Ok(cfg.rosenthal * (pf / (pf + 1.0).ln()) * root * nf.max(root * k2p * k2p) * nf.ln())
}

/// `(ε, factor, failure_prob)` for the constant-norm bound.
pub fn eps_highdim_independent(
    n: usize,
    d: usize,
    mode: ConstantNormMode,
    cfg: &ConstantsConfig,
) -> Result<EpsilonFactor> {
    high_dim_only(n, d)?;
    let df = d as f64;
    match mode {
        ConstantNormMode::HighProb { t } => {
            check_t(t)?;
            let epsilon = cfg.constant_norm_scale * (n as f64 / df).sqrt() + t / df.sqrt();
            let factor = epsilon.max(epsilon * epsilon);
            let (failure_prob, vacuous_prob) =
                clamp_prob(2.0 * (-cfg.constant_norm_tail * t * t).exp());
            Ok(EpsilonFactor { epsilon, factor, failure_prob, vacuous_prob })
        }
        ConstantNormMode::Expectation { p, k2p } => {
            let epsilon = (moment_budget(n, p, k2p, cfg)? / df).sqrt();
            Ok(EpsilonFactor { epsilon, factor: epsilon, failure_prob: f64::NAN, vacuous_prob: false })
        }
    }
}

pub fn interval_highdim_independent(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    mode: ConstantNormMode,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let e = eps_highdim_independent(n, d, mode, cfg)?;
    let kind = match mode {
        ConstantNormMode::HighProb { .. } => BoundKind::ConstantNormHighDim,
        ConstantNormMode::Expectation { .. } => BoundKind::ConstantNormExpectation,
    };
    build_intervals(eigs, n, d, 1.0 - e.factor, 1.0 + e.factor, e.epsilon, kind, e.failure_prob)
}

/// Which side of the square case is being bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquareBranch {
    /// `n ≥ d`.
    Tall,
    /// `d ≥ n`.
    Wide,
}

/// Multipliers and tail for the nearly-square bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareFactors {
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub lower_mult: f64,
    pub upper_mult: f64,
    pub failure_prob: f64,
    pub vacuous_prob: bool,
}

/// `small = min(n, d)`, `big = max(n, d)`:
/// `ε₁ = √((small−1)/big)`, `ε₂ = √(small/big) + t₂/√big`,
/// lower multiplier `(1 − ε₁)²/t₁²`, upper `1 + C̃K²·max(ε₂, ε₂²)`, failure
/// `(C_K/t₁)^{big−small+1} + exp(−c_K·big) + 2·exp(−t₂²)`.
pub fn square_factors(
    n: usize,
    d: usize,
    branch: SquareBranch,
    t1: f64,
    t2: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<SquareFactors> {
    check_dims(n, d)?;
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::InvalidInput(format!("t1 must be > 0, got {t1}")));
    }
    check_t(t2)?;
    check_k(k)?;
    let (small, big) = match branch {
        SquareBranch::Tall if n >= d => (d, n),
        SquareBranch::Wide if d >= n => (n, d),
        _ => {
            return Err(Error::Regime(format!(
                "{branch:?} branch does not apply to n={n}, d={d}"
            )))
        }
    };
    let (sf, bf) = (small as f64, big as f64);
    let eps_lower = ((sf - 1.0) / bf).sqrt();
    let eps_upper = (sf / bf).sqrt() + t2 / bf.sqrt();
    let lower_mult = (1.0 - eps_lower).powi(2) / (t1 * t1);
    let upper_mult = 1.0 + cfg.square_upper * k * k * eps_upper.max(eps_upper * eps_upper);
    let exponent = (big - small + 1) as f64;
    let raw = (cfg.square_lower_scale / t1).powf(exponent)
        + (-cfg.square_lower_tail * bf).exp()
        + 2.0 * (-t2 * t2).exp();
    let (failure_prob, vacuous_prob) = clamp_prob(raw);
    Ok(SquareFactors { eps_lower, eps_upper, lower_mult, upper_mult, failure_prob, vacuous_prob })
}

#[allow(clippy::too_many_arguments)]
pub fn interval_square_branch(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    branch: SquareBranch,
    t1: f64,
    t2: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let f = square_factors(n, d, branch, t1, t2, k, cfg)?;
    build_intervals(
        eigs,
        n,
        d,
        f.lower_mult,
        f.upper_mult,
        f.eps_upper,
        BoundKind::NearlySquare,
        f.failure_prob,
    )
}

/// Picks the tall branch when `n ≥ d`, otherwise the wide one.
pub fn interval_square(
    eigs: &Spectrum,
    n: usize,
    d: usize,
    t1: f64,
    t2: f64,
    k: f64,
    cfg: &ConstantsConfig,
) -> Result<Vec<BoundInterval>> {
    let branch = if n >= d { SquareBranch::Tall } else { SquareBranch::Wide };
    interval_square_branch(eigs, n, d, branch, t1, t2, k, cfg)
}

/// Asymptotic range `((1 − √γ)², (1 + √γ)²)` of an isotropic empirical
/// spectrum with aspect ratio `d/n → γ`.
pub fn bai_yin_range(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must be in (0, 1), got {gamma}")));
    }
    let r = gamma.sqrt();
    Ok(((1.0 - r).powi(2), (1.0 + r).powi(2)))
}

/// `|log(d/n)|` at or below this counts as nearly square.
pub const NEARLY_SQUARE_LOG_RATIO: f64 = std::f64::consts::LN_2;

/// Bounds whose assumptions are met by samples from `spec` at `(n, d)`.
/// The expectation-form bound is never auto-selected; it needs
/// trial averaging rather than per-trial coverage.
pub fn select_theorem(spec: &DistributionSpec, n: usize, d: usize) -> Result<Vec<BoundKind>> {
    check_dims(n, d)?;
    let low = d <= n;
    let mut out = Vec::new();
    let iid_entries = matches!(spec.family, Family::GaussianSigma | Family::SubgaussianEntries);
    match spec.family {
        Family::GaussianSigma => {
            out.push(if low { BoundKind::GaussianLowDim } else { BoundKind::SubgaussianHighDim })
        }
        Family::SubgaussianEntries => out.push(if low {
            BoundKind::SubgaussianLowDim
        } else {
            BoundKind::SubgaussianHighDim
        }),
        Family::SphereIsotropic | Family::CoordinateBasis => out.push(if d >= n {
            BoundKind::ConstantNormHighDim
        } else {
            BoundKind::BoundedNormLowDim
        }),
        Family::BoundedNormCustom => {
            if low {
                out.push(BoundKind::BoundedNormLowDim)
            }
        }
    }
    if iid_entries && (d as f64 / n as f64).ln().abs() <= NEARLY_SQUARE_LOG_RATIO {
        out.push(BoundKind::NearlySquare);
    }
    if out.is_empty() {
        return Err(Error::Unsupported(format!(
            "no bound covers {:?} with n={n}, d={d}",
            spec.family
        )));
    }
    Ok(out)
}
