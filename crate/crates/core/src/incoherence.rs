//! Incoherence of a set of isotropic rows and the bounds built on it.
//!
//! `m = (1/d)·E max_j Σ_{k≠j} ⟨z_j, z_k⟩²` controls
//! `E‖(1/d)ZZᵀ − I‖₂` in the high-dimensional regime.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ConstantsConfig;
use crate::distributions::{sample_z, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::seed::derive_seed;

/// Above this many entries, inner products use compensated summation.
pub const COMPENSATED_THRESHOLD: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceEstimate {
    pub empirical_m: f64,
    pub trials: usize,
    pub n: usize,
    pub d: usize,
}

fn dot_plain(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

fn dot_compensated(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let v = x * y;
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// `max_j Σ_{k≠j} ⟨z_j, z_k⟩²` (not yet divided by `d`).
///
/// Each inner product is accumulated left to right over coordinates and each
/// row sum over `k` in increasing order, so the result is reproducible
/// against a plain double loop.
pub fn max_row_coherence(z: &DataMatrix) -> f64 {
    let (n, d) = (z.n(), z.d());
    let m = z.as_matrix();
    let mut rows = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            rows[i * d + j] = m[(i, j)];
        }
    }
    let dot = if n * d > COMPENSATED_THRESHOLD { dot_compensated } else { dot_plain };
    let row = |i: usize| &rows[i * d..(i + 1) * d];

    let mut sq = vec![0.0; n * n];
    for j in 0..n {
        for k in j + 1..n {
            let g = dot(row(j), row(k));
            sq[j * n + k] = g * g;
            sq[k * n + j] = g * g;
        }
    }
    let mut best = 0.0f64;
    for j in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            if k != j {
                s += sq[j * n + k];
            }
        }
        best = best.max(s);
    }
    best
}

/// Monte-Carlo estimate of `m` over `trials` independent `n`-row draws.
pub fn empirical_incoherence(
    spec: &DistributionSpec,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<IncoherenceEstimate> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("incoherence needs n >= 2, got {n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    spec.validate()?;
    let d = spec.d as f64;
    let stats: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let z = sample_z(spec, n, derive_seed(seed, t as u64, "incoherence"))?;
            Ok(max_row_coherence(&z) / d)
        })
        .collect::<Result<_>>()?;
    let empirical_m = stats.iter().fold(0.0, |a, b| a + b) / trials as f64;
    Ok(IncoherenceEstimate { empirical_m, trials, n, d: spec.d })
}

/// Minimum number of pairs for [`check_isotropic_identity`].
pub const MIN_IDENTITY_PAIRS: usize = 1000;

/// `(mean ⟨z₁, z₂⟩², mean ‖z₁‖²)` over `n_pairs` independent pairs. Both
/// equal `d` in expectation for any isotropic row law.
pub fn check_isotropic_identity(spec: &DistributionSpec, n_pairs: usize, seed: u64) -> Result<(f64, f64)> {
    if n_pairs < MIN_IDENTITY_PAIRS {
        return Err(Error::InsufficientSamples { got: n_pairs, min: MIN_IDENTITY_PAIRS });
    }
    let a = sample_z(spec, n_pairs, derive_seed(seed, 0, "identity"))?;
    let b = sample_z(spec, n_pairs, derive_seed(seed, 1, "identity"))?;
    let (a, b) = (a.as_matrix(), b.as_matrix());
    let mut inner = 0.0;
    let mut norm = 0.0;
    for i in 0..n_pairs {
        let (ra, rb) = (a.row(i), b.row(i));
        let g = ra.dot(&rb);
        inner += g * g;
        norm += ra.norm_squared();
    }
    let np = n_pairs as f64;
    Ok((inner / np, norm / np))
}

/// `C·(p / log p)·n^{1/p}·(1/d)·max(sum_sq, sum_2p^{1/p})`, where
/// `sum_sq = Σ_{j≠i} E⟨zᵢ,z_j⟩²` and `sum_2p = Σ_{j≠i} E⟨zᵢ,z_j⟩^{2p}`.
pub fn rosenthal_incoherence_bound(
    sum_sq: f64,
    sum_2p: f64,
    n: usize,
    d: usize,
    p: f64,
    cfg: &ConstantsConfig,
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("Rosenthal bound needs p > 1, got {p}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput(format!("need n, d >= 1, got n={n}, d={d}")));
    }
    if !(sum_sq >= 0.0 && sum_2p >= 0.0) {
        return Err(Error::InvalidInput("moment sums must be >= 0".into()));
    }
    let nf = n as f64;
    Ok(cfg.rosenthal * (p / p.ln()) * nf.powf(1.0 / p) / d as f64 * sum_sq.max(sum_2p.powf(1.0 / p)))
}

/// `C·(p / (log p + 1))·n^{1/p}·max(n, n^{1/p}·K(2p)²)`.
pub fn moment_incoherence_bound(n: usize, p: f64, k2p: f64, cfg: &ConstantsConfig) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) || n == 0 || !(k2p > 0.0 && k2p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need n >= 1, p >= 1, K(2p) > 0; got n={n}, p={p}, K={k2p}"
        )));
    }
    let nf = n as f64;
    let root = nf.powf(1.0 / p);
    Ok(cfg.rosenthal * (p / (p.ln() + 1.0)) * root * nf.max(root * k2p * k2p))
}

/// `C·√(m·log n / d)`, a bound on `E‖(1/d)ZZᵀ − I_n‖₂`.
pub fn expectation_deviation_bound(m_bound: f64, n: usize, d: usize, cfg: &ConstantsConfig) -> Result<f64> {
    if !(m_bound >= 0.0 && m_bound.is_finite()) || n < 2 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "need m >= 0, n >= 2, d >= 1; got m={m_bound}, n={n}, d={d}"
        )));
    }
    Ok(cfg.expectation_deviation * (m_bound * (n as f64).ln() / d as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{estimate_kp, EntryLaw};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(z: &DataMatrix) -> f64 {
        let mut best = 0.0f64;
        for j in 0..z.n() {
            let mut s = 0.0;
            for k in 0..z.n() {
                if k == j {
                    continue;
                }
                let mut g = 0.0;
                for l in 0..z.d() {
                    g += z.get(j, l) * z.get(k, l);
                }
                s += g * g;
            }
            best = best.max(s);
        }
        best
    }

    #[test]
    fn matches_double_loop_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(2..30);
            let d = rng.random_range(1..40);
            let z = DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0))).unwrap();
            assert_eq!(max_row_coherence(&z).to_bits(), naive(&z).to_bits());
        }
    }

    #[test]
    fn orthogonal_rows_have_zero_incoherence() {
        let z = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(max_row_coherence(&z), 0.0);
        let z = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        // ⟨r1,r2⟩ = 11, ⟨r1,r3⟩ = 2, ⟨r2,r3⟩ = 4 → sums 125, 137, 20
        assert_eq!(max_row_coherence(&z), 137.0);
    }

    #[test]
    fn compensated_dot_agrees_on_easy_input() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i as f64).cos()).collect();
        assert!((dot_plain(&a, &b) - dot_compensated(&a, &b)).abs() < 1e-12);
        let big = [1e16, 1.0, -1e16];
        let ones = [1.0, 1.0, 1.0];
        assert_eq!(dot_compensated(&big, &ones), 1.0);
    }

    #[test]
    fn sphere_pair_incoherence_near_one() {
        let est = empirical_incoherence(&DistributionSpec::sphere(16), 2, 10_000, 5).unwrap();
        assert!((est.empirical_m - 1.0).abs() < 0.1, "{est:?}");
        assert!(empirical_incoherence(&DistributionSpec::sphere(16), 1, 10, 5).is_err());
        let json = serde_json::to_value(est).unwrap();
        for key in ["empirical_m", "trials", "n", "d"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn incoherence_independent_of_thread_count() {
        let spec = DistributionSpec::entries(8, EntryLaw::Rademacher);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| empirical_incoherence(&spec, 5, 200, 9).unwrap());
        let b = four.install(|| empirical_incoherence(&spec, 5, 200, 9).unwrap());
        assert_eq!(a.empirical_m.to_bits(), b.empirical_m.to_bits());
    }

    #[test]
    fn rademacher_identity_against_enumeration() {
        let d = 3;
        let mut total = 0.0;
        for pattern in 0u32..64 {
            let sign = |bit: u32| if pattern >> bit & 1 == 1 { 1.0 } else { -1.0 };
            let g: f64 = (0..d as u32).map(|l| sign(l) * sign(l + 3)).sum();
            total += g * g;
        }
        let exact = total / 64.0;
        assert_eq!(exact, 3.0);
        let (inner, norm) =
            check_isotropic_identity(&DistributionSpec::entries(d, EntryLaw::Rademacher), 100_000, 2).unwrap();
        assert_eq!(norm, 3.0);
        assert!((inner - exact).abs() < 0.05 * exact, "{inner}");
    }

    #[test]
    fn identity_examples() {
        let (_, norm) = check_isotropic_identity(&DistributionSpec::sphere(7), 1000, 1).unwrap();
        assert!((norm - 7.0).abs() < 1e-12);
        let g = DistributionSpec::gaussian(crate::linalg::SymMatrix::identity(16));
        let (inner, _) = check_isotropic_identity(&g, 100_000, 3).unwrap();
        assert!((15.2..=16.8).contains(&inner), "{inner}");
        assert!(matches!(
            check_isotropic_identity(&g, 999, 3),
            Err(Error::InsufficientSamples { got: 999, min: 1000 })
        ));
    }

    #[test]
    fn rosenthal_arithmetic() {
        let cfg = ConstantsConfig::default();
        let (n, d) = (100usize, 10_000usize);
        let v = rosenthal_incoherence_bound((n * d) as f64, 1.0, n, d, 2.0, &cfg).unwrap();
        let expect = 2.0 / 2f64.ln() * 10.0 * 100.0;
        assert!((v - expect).abs() <= 1e-12 * expect);
        for p in [1.5, 3.0, 7.0] {
            let v = rosenthal_incoherence_bound((n * d) as f64, 0.0, n, d, p, &cfg).unwrap();
            let expect = p / p.ln() * (n as f64).powf(1.0 / p) * n as f64;
            assert!((v - expect).abs() <= 1e-12 * expect);
        }
        let a = rosenthal_incoherence_bound(10.0, 1e8, n, d, 2.0, &cfg).unwrap();
        let b = rosenthal_incoherence_bound(20.0, 1e8, n, d, 2.0, &cfg).unwrap();
        let c = rosenthal_incoherence_bound(20.0, 4e8, n, d, 2.0, &cfg).unwrap();
        assert!(a <= b && b <= c);
        assert!(rosenthal_incoherence_bound(1.0, 1.0, n, d, 1.0, &cfg).is_err());
    }

    #[test]
    fn moment_bound_arithmetic() {
        let cfg = ConstantsConfig::default();
        for n in [1usize, 10, 64] {
            for k in [0.5, 1.0, 2.0] {
                let v = moment_incoherence_bound(n, 1.0, k, &cfg).unwrap();
                let nf = n as f64;
                assert!((v - nf * nf * f64::max(1.0, k * k)).abs() <= 1e-12 * v);
            }
        }
        let k4 = 3f64.powf(0.25);
        let v = moment_incoherence_bound(64, 2.0, k4, &cfg).unwrap();
        let expect = 2.0 / (2f64.ln() + 1.0) * 8.0 * f64::max(64.0, 8.0 * 3f64.sqrt());
        assert!((v - expect).abs() <= 1e-12 * expect);
        // branch switch: n^{1/p}K² crosses n at K² = n^{1−1/p}
        let edge = 64f64.powf(0.5).sqrt();
        let at = moment_incoherence_bound(64, 2.0, edge, &cfg).unwrap();
        let above = moment_incoherence_bound(64, 2.0, edge * 1.1, &cfg).unwrap();
        let below = moment_incoherence_bound(64, 2.0, edge * 0.9, &cfg).unwrap();
        assert!((at - below).abs() <= 1e-12 * at && above > at);
        assert!(moment_incoherence_bound(64, 0.5, 1.0, &cfg).is_err());
        assert!(moment_incoherence_bound(64, 2.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn moment_bound_dominates_identity_term() {
        // isotropic rows: Σ_{k≠j} E⟨z_j,z_k⟩² = (n−1)d, so (1/d)·that ≤ n
        let cfg = ConstantsConfig::default();
        for n in [2usize, 10, 100] {
            for p in [1.0, 2.0, 4.0] {
                let c = moment_incoherence_bound(n, p, 1.0, &cfg).unwrap();
                assert!(c >= (n - 1) as f64);
            }
        }
    }

    #[test]
    fn sphere_incoherence_below_moment_bound() {
        let spec = DistributionSpec::sphere(2000);
        let est = empirical_incoherence(&spec, 50, 20, 4).unwrap();
        let k4 = estimate_kp(&spec, 4, 20_000, 32, 6).unwrap().value;
        let bound = moment_incoherence_bound(50, 2.0, k4, &ConstantsConfig::default()).unwrap();
        assert!(est.empirical_m <= bound, "{} > {bound}", est.empirical_m);
    }

    #[test]
    fn expectation_deviation_arithmetic() {
        let cfg = ConstantsConfig::default();
        assert_eq!(expectation_deviation_bound(0.0, 10, 10, &cfg).unwrap(), 0.0);
        let v = expectation_deviation_bound(100.0, 100, 1_000_000, &cfg).unwrap();
        assert!((v - 0.021459660262893474).abs() < 1e-12, "{v}");
        assert!((v - 0.02146).abs() < 1e-5);
        let q = expectation_deviation_bound(100.0, 100, 4_000_000, &cfg).unwrap();
        assert!((q - v / 2.0).abs() < 1e-15);
        assert!(expectation_deviation_bound(1.0, 1, 10, &cfg).is_err());
    }
}
