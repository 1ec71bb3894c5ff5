//! Deterministic eigenvalue sandwiches.
//!
//! For p.s.d. `Σ` and any `Z ∈ ℝ^{n×d}`, with `k = min(n, d)`:
//!
//! ```text
//!   λ_{i+d−k}(Σ)·λ_k(ZᵀZ)  ≤  λᵢ(Σ^{1/2} ZᵀZ Σ^{1/2})  ≤  λᵢ(Σ)·λ₁(ZᵀZ)
//! ```
//!
//! Combined with Weyl's inequality this turns a bound on `‖(1/n)ZᵀZ − I‖₂`
//! (or `‖(1/d)ZZᵀ − I‖₂` when `d ≥ n`) into a per-eigenvalue relative bound
//! on `Σ̂ = (1/n)XᵀX`, `X = ZΣ^{1/2}`. The `verify_*` helpers check the two
//! eigenvalue-counting lemmas behind the sandwich numerically; they test the
//! conclusions, not the subspace constructions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{realized_intervals, BoundInterval};
use crate::error::{Error, Result};
use crate::fmt;
use crate::linalg::{self, DataMatrix, Spectrum, SymMatrix};
use crate::seed;

/// Tolerance used when checking `lower ≤ middle ≤ upper`, relative to
/// `max(1, |middle|)`.
pub const SANDWICH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `d ≤ n`
    LowDim,
    /// `d ≥ n`
    HighDim,
}

impl Regime {
    pub fn of(n: usize, d: usize) -> Self {
        if d <= n {
            Regime::LowDim
        } else {
            Regime::HighDim
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::LowDim => "LowDim",
            Regime::HighDim => "HighDim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichResult {
    /// 1-based.
    pub index: usize,
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub regime: Regime,
}

impl SandwichResult {
    pub fn holds(&self) -> bool {
        let tol = SANDWICH_TOL * self.middle.abs().max(1.0);
        self.lower <= self.middle + tol && self.middle <= self.upper + tol
    }
}

/// Everything needed to evaluate the sandwich at all indices of one
/// `(Σ, Z)` pair.
pub struct SandwichInstance {
    sigma_eigs: Spectrum,
    ztz_eigs: Spectrum,
    middle_eigs: Spectrum,
    n: usize,
    d: usize,
}

impl SandwichInstance {
    pub fn new(sigma: &SymMatrix, z: &DataMatrix) -> Result<Self> {
        let d = sigma.dim();
        if z.d() != d {
            return Err(Error::InvalidInput(format!(
                "Z has {} columns but Σ is {d}x{d}",
                z.d()
            )));
        }
        let root = linalg::psd_sqrt(sigma)?;
        let sigma_eigs = linalg::sym_eigvals_desc(sigma)?;
        let ztz = SymMatrix::new(z.as_matrix().tr_mul(z.as_matrix()))?;
        let ztz_eigs = linalg::sym_eigvals_desc(&ztz)?;
        let middle = linalg::sym_congruence(&root, &ztz)?;
        let middle_eigs = linalg::sym_eigvals_desc(&middle)?;
        Ok(Self { sigma_eigs, ztz_eigs, middle_eigs, n: z.n(), d })
    }

    pub fn k(&self) -> usize {
        self.n.min(self.d)
    }

    pub fn at(&self, i: usize) -> Result<SandwichResult> {
        let k = self.k();
        if i == 0 || i > k {
            return Err(Error::Index { index: i, max: k });
        }
        Ok(SandwichResult {
            index: i,
            lower: self.sigma_eigs.lambda(i + self.d - k) * self.ztz_eigs.lambda(k),
            middle: self.middle_eigs.lambda(i),
            upper: self.sigma_eigs.lambda(i) * self.ztz_eigs.lambda(1),
            regime: Regime::of(self.n, self.d),
        })
    }

    pub fn all(&self) -> Vec<SandwichResult> {
        (1..=self.k()).map(|i| self.at(i).expect("in range")).collect()
    }
}

/// Generalized Ostrowski sandwich at index `i` (1-based).
pub fn ostrowski_sandwich(sigma: &SymMatrix, z: &DataMatrix, i: usize) -> Result<SandwichResult> {
    let k = z.n().min(sigma.dim());
    if i == 0 || i > k {
        return Err(Error::Index { index: i, max: k });
    }
    SandwichInstance::new(sigma, z)?.at(i)
}

/// `d ≤ n`: `λᵢ(Σ̂) ∈ [λᵢ(Σ)(1 − dev), λᵢ(Σ)(1 + dev)]` with
/// `dev = ‖(1/n)ZᵀZ − I‖₂`.
pub fn relative_sandwich_lowdim(sigma_eigs: &Spectrum, dev: f64) -> Result<Vec<BoundInterval>> {
    let d = sigma_eigs.len();
    realized_intervals(sigma_eigs, d, d, dev)
}

/// `d ≥ n`: `(n/d)·λᵢ(Σ̂) ∈ [λ_{i+d−n}(Σ)(1 − dev), λᵢ(Σ)(1 + dev)]` with
/// `dev = ‖(1/d)ZZᵀ − I‖₂`, reported on the `λᵢ(Σ̂)` scale.
pub fn relative_sandwich_highdim(
    sigma_eigs: &Spectrum,
    dev: f64,
    n: usize,
    d: usize,
) -> Result<Vec<BoundInterval>> {
    if n == 0 || d < n {
        return Err(Error::Regime(format!("high-dimensional sandwich needs d >= n >= 1, got n={n}, d={d}")));
    }
    realized_intervals(sigma_eigs, n, d, dev)
}

/// The deviation that drives the realized sandwich for `Z`:
/// `‖(1/n)ZᵀZ − I_d‖₂` when `d ≤ n`, `‖(1/d)ZZᵀ − I_n‖₂` otherwise.
pub fn realized_deviation(z: &DataMatrix) -> Result<f64> {
    let (n, d) = (z.n(), z.d());
    let m = if d <= n {
        linalg::empirical_second_moment(z)
    } else {
        linalg::sym_scale(&linalg::gram(z), 1.0 / d as f64)
    };
    linalg::deviation_from_identity(&m)
}

/// Realized sandwich intervals for `λᵢ(Σ̂)`, picking the regime from `Z`.
pub fn realized_sandwich(sigma_eigs: &Spectrum, z: &DataMatrix) -> Result<Vec<BoundInterval>> {
    let dev = realized_deviation(z)?;
    if z.d() <= z.n() {
        relative_sandwich_lowdim(sigma_eigs, dev)
    } else {
        relative_sandwich_highdim(sigma_eigs, dev, z.n(), z.d())
    }
}

/// Number of eigenvalues `≥ a − tol_eig`.
pub fn count_eigs_at_least(m: &SymMatrix, a: f64) -> Result<usize> {
    let s = linalg::sym_eigvals_desc(m)?;
    Ok(count_at_least(&s, a))
}

fn norm_of(s: &Spectrum) -> f64 {
    s.max().abs().max(s.min().abs())
}

fn count_at_least(s: &Spectrum, a: f64) -> usize {
    let tol = linalg::tol_eig(norm_of(s));
    s.values().iter().filter(|&&v| v >= a - tol).count()
}

fn count_at_most(s: &Spectrum, b: f64) -> usize {
    let tol = linalg::tol_eig(norm_of(s));
    s.values().iter().filter(|&&v| v <= b + tol).count()
}

/// Outcome of one eigenvalue-counting check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountingCheck {
    /// Eigenvalues of `ZZᵀ` on the right side of the first threshold.
    pub r: usize,
    /// Eigenvalues of `Σ` on the right side of the second threshold.
    pub s: usize,
    /// Eigenvalues of `ZΣZᵀ` on the right side of the product threshold.
    pub found: usize,
    /// `max(0, r + s − d)`.
    pub required: usize,
}

impl CountingCheck {
    pub fn holds(&self) -> bool {
        self.found >= self.required
    }
}

fn counting_inputs(sigma: &SymMatrix, z: &DataMatrix) -> Result<(Spectrum, Spectrum, Spectrum)> {
    if z.d() != sigma.dim() {
        return Err(Error::InvalidInput("Z and Σ dimensions differ".into()));
    }
    let zzt = linalg::sym_eigvals_desc(&linalg::gram(z))?;
    let sig = linalg::sym_eigvals_desc(sigma)?;
    let zm = z.as_matrix();
    let prod = SymMatrix::new(zm * sigma.as_matrix() * zm.transpose())?;
    let prod = linalg::sym_eigvals_desc(&prod)?;
    Ok((zzt, sig, prod))
}

/// If `ZZᵀ` has `r` eigenvalues `≥ a₁` and `Σ` has `s` eigenvalues `≥ a₂`,
/// then `ZΣZᵀ` has at least `r + s − d` eigenvalues `≥ a₁a₂`.
/// `r` and `s` are counted strictly; the conclusion allows `tol_eig` slack.
pub fn check_variational_lower(sigma: &SymMatrix, z: &DataMatrix, a1: f64, a2: f64) -> Result<CountingCheck> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidInput(format!("thresholds must be > 0, got a1={a1}, a2={a2}")));
    }
    let (zzt, sig, prod) = counting_inputs(sigma, z)?;
    let r = zzt.values().iter().filter(|&&v| v >= a1).count();
    let s = sig.values().iter().filter(|&&v| v >= a2).count();
    let required = (r + s).saturating_sub(sigma.dim());
    let found = count_at_least(&prod, a1 * a2);
    Ok(CountingCheck { r, s, found, required })
}

pub fn verify_variational_lower(sigma: &SymMatrix, z: &DataMatrix, a1: f64, a2: f64) -> Result<bool> {
    Ok(check_variational_lower(sigma, z, a1, a2)?.holds())
}

/// If `ZZᵀ` has `r` eigenvalues `≤ b₁` and `Σ` has `s` eigenvalues `≤ b₂`,
/// then `ZΣZᵀ` has at least `r + s − d` eigenvalues `≤ b₁b₂`.
pub fn check_variational_upper(sigma: &SymMatrix, z: &DataMatrix, b1: f64, b2: f64) -> Result<CountingCheck> {
    if !(b2 > 0.0) || !(b1 >= 0.0) {
        return Err(Error::InvalidInput(format!("need b1 >= 0 and b2 > 0, got b1={b1}, b2={b2}")));
    }
    let (zzt, sig, prod) = counting_inputs(sigma, z)?;
    let r = zzt.values().iter().filter(|&&v| v <= b1).count();
    let s = sig.values().iter().filter(|&&v| v <= b2).count();
    let required = (r + s).saturating_sub(sigma.dim());
    let found = count_at_most(&prod, b1 * b2);
    Ok(CountingCheck { r, s, found, required })
}

pub fn verify_variational_upper(sigma: &SymMatrix, z: &DataMatrix, b1: f64, b2: f64) -> Result<bool> {
    Ok(check_variational_upper(sigma, z, b1, b2)?.holds())
}

/// CSV with columns `index,lower,middle,upper,regime`.
pub fn sandwich_csv(rows: &[SandwichResult]) -> String {
    let mut out = String::from("index,lower,middle,upper,regime\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.index,
            fmt::float(r.lower),
            fmt::float(r.middle),
            fmt::float(r.upper),
            r.regime.as_str()
        ));
    }
    out
}

/// Outcome of the sandwich and both counting checks on one random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceCheck {
    pub instance: usize,
    pub n: usize,
    pub d: usize,
    /// Largest `(lower − middle)` or `(middle − upper)` over all indices,
    /// divided by `max(1, |middle|)`.
    pub worst_excess: f64,
    pub sandwich_ok: bool,
    pub lower_lemma_ok: bool,
    pub upper_lemma_ok: bool,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.sandwich_ok && self.lower_lemma_ok && self.upper_lemma_ok
    }
}

/// Random `(Σ, Z)` with `n, d ∈ 1..=max_dim`: `Σ` p.s.d. of random rank with
/// column scales spread over four decades, normalized to unit spectral norm
/// (every check is homogeneous in `Σ`); `Z` standard Gaussian.
pub fn random_instance(seed: u64, max_dim: usize) -> Result<(SymMatrix, DataMatrix)> {
    if max_dim == 0 {
        return Err(Error::InvalidInput("max_dim must be >= 1".into()));
    }
    let mut rng = seed::rng_for(seed, "sandwich-instance");
    let n = rng.random_range(1..=max_dim);
    let d = rng.random_range(1..=max_dim);
    let rank = rng.random_range(1..=d);
    let mut b = DMatrix::from_fn(rank, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in b.column_iter_mut() {
        col *= 10f64.powf(rng.random_range(-2.0..2.0));
    }
    let m = b.tr_mul(&b);
    let top = linalg::sym_eigvals_desc(&SymMatrix::new(m.clone())?)?.max();
    let sigma = SymMatrix::new(m / top)?;
    let z = DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal)))?;
    Ok((sigma, z))
}

fn check_instance(instance: usize, sigma: &SymMatrix, z: &DataMatrix, rng_seed: u64) -> Result<InstanceCheck> {
    let results = SandwichInstance::new(sigma, z)?.all();
    let worst_excess = results
        .iter()
        .map(|r| {
            let s = r.middle.abs().max(1.0);
            ((r.lower - r.middle) / s).max((r.middle - r.upper) / s)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let sandwich_ok = results.iter().all(SandwichResult::holds);
    // thresholds at actual eigenvalues so the hypotheses are not vacuous
    let zzt = linalg::sym_eigvals_desc(&linalg::gram(z))?;
    let sig = linalg::sym_eigvals_desc(sigma)?;
    let mut rng = seed::rng_for(rng_seed, "sandwich-thresholds");
    let a1 = zzt.lambda(rng.random_range(1..=zzt.len())).max(1e-6);
    let a2 = sig.lambda(rng.random_range(1..=sig.len())).max(1e-6);
    Ok(InstanceCheck {
        instance,
        n: z.n(),
        d: z.d(),
        worst_excess,
        sandwich_ok,
        lower_lemma_ok: verify_variational_lower(sigma, z, a1, a2)?,
        upper_lemma_ok: verify_variational_upper(sigma, z, a1, a2)?,
    })
}

/// Runs [`random_instance`] checks for `instances` derived seeds, in
/// parallel, returning results in instance order.
pub fn validate_random(instances: usize, max_dim: usize, master_seed: u64) -> Result<Vec<InstanceCheck>> {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive_seed(master_seed, i as u64, "sandwich");
            let (sigma, z) = random_instance(s, max_dim)?;
            check_instance(i, &sigma, &z, s)
        })
        .collect()
}
