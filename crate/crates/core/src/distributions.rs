//! Samplers for isotropic row distributions and empirical estimators of the
//! sub-gaussian norm and directional moments.
//!
//! Samplers produce the whitened matrix `Z` directly; observations are
//! `X = Z·Σ^{1/2}` when the distribution carries a covariance factor.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DataMatrix, MatrixJson, Spectrum, SymMatrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// `z ~ N(0, I)`, observations `x = Σ^{1/2} z`.
    GaussianSigma,
    /// Uniform on the sphere of radius `√d`.
    SphereIsotropic,
    /// Independent unit-variance entries drawn from an [`EntryLaw`].
    SubgaussianEntries,
    /// `√d·e_j` with `j` uniform in `1..=d`.
    CoordinateBasis,
    /// `√m·u` (u uniform on the unit sphere) with probability `d/m`, else 0.
    /// Isotropic with `‖z‖² ≤ m` almost surely.
    BoundedNormCustom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryLaw {
    Rademacher,
    StdGaussian,
    /// Uniform on `[−√3, √3]`.
    UniformScaled,
}

impl EntryLaw {
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryLaw::StdGaussian => rng.sample(StandardNormal),
            EntryLaw::UniformScaled => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub family: Family,
    pub d: usize,
    /// `Σ^{1/2}`. Accepts either a dense matrix object or `{"diag": [...]}`.
    #[serde(default, deserialize_with = "deserialize_factor", skip_serializing_if = "Option::is_none")]
    pub sigma_factor: Option<SymMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_law: Option<EntryLaw>,
    /// Squared-norm bound `m` for [`Family::BoundedNormCustom`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_bound: Option<f64>,
    #[serde(default = "default_stream")]
    pub seed_stream: String,
}

fn default_stream() -> String {
    "rows".to_string()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FactorRepr {
    Diag { diag: Vec<f64> },
    Dense(MatrixJson),
}

fn deserialize_factor<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<SymMatrix>, D::Error> {
    let repr = Option::<FactorRepr>::deserialize(d)?;
    repr.map(|r| match r {
        FactorRepr::Diag { diag } => SymMatrix::from_diag(&diag),
        FactorRepr::Dense(m) => m.to_dmatrix().and_then(SymMatrix::new),
    })
    .transpose()
    .map_err(serde::de::Error::custom)
}

impl DistributionSpec {
    pub fn gaussian(sigma_factor: SymMatrix) -> Self {
        Self {
            family: Family::GaussianSigma,
            d: sigma_factor.dim(),
            sigma_factor: Some(sigma_factor),
            entry_law: None,
            m_bound: None,
            seed_stream: default_stream(),
        }
    }

    pub fn sphere(d: usize) -> Self {
        Self {
            family: Family::SphereIsotropic,
            d,
            sigma_factor: None,
            entry_law: None,
            m_bound: None,
            seed_stream: default_stream(),
        }
    }

    pub fn coordinate_basis(d: usize) -> Self {
        Self { family: Family::CoordinateBasis, ..Self::sphere(d) }
    }

    pub fn entries(d: usize, law: EntryLaw) -> Self {
        Self { family: Family::SubgaussianEntries, entry_law: Some(law), ..Self::sphere(d) }
    }

    pub fn bounded_norm(d: usize, m_bound: f64) -> Self {
        Self { family: Family::BoundedNormCustom, m_bound: Some(m_bound), ..Self::sphere(d) }
    }

    pub fn with_factor(mut self, factor: SymMatrix) -> Self {
        self.sigma_factor = Some(factor);
        self
    }

    /// Same spec at a different dimension. Fails if a covariance factor is
    /// attached (it is tied to the old dimension).
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        if self.sigma_factor.is_some() && d != self.d {
            return Err(Error::Spec("cannot change dimension of a spec with sigma_factor".into()));
        }
        let mut out = self.clone();
        out.d = d;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Spec("d must be >= 1".into()));
        }
        match self.family {
            Family::GaussianSigma if self.sigma_factor.is_none() => {
                return Err(Error::Spec("GaussianSigma requires sigma_factor".into()))
            }
            Family::SphereIsotropic | Family::CoordinateBasis if self.sigma_factor.is_some() => {
                return Err(Error::Spec(format!(
                    "{:?} samples whitened rows and does not take sigma_factor",
                    self.family
                )))
            }
            Family::SubgaussianEntries if self.entry_law.is_none() => {
                return Err(Error::Spec("SubgaussianEntries requires entry_law".into()))
            }
            _ => {}
        }
        if self.family != Family::SubgaussianEntries && self.entry_law.is_some() {
            return Err(Error::Spec(format!("entry_law does not apply to {:?}", self.family)));
        }
        match (self.family, self.m_bound) {
            (Family::BoundedNormCustom, None) => {
                return Err(Error::Spec("BoundedNormCustom requires m_bound".into()))
            }
            (Family::BoundedNormCustom, Some(m)) if !(m >= self.d as f64 && m.is_finite()) => {
                return Err(Error::Spec(format!("m_bound must be >= d = {}, got {m}", self.d)))
            }
            (Family::BoundedNormCustom, Some(_)) => {}
            (_, Some(_)) => {
                return Err(Error::Spec(format!("m_bound does not apply to {:?}", self.family)))
            }
            (_, None) => {}
        }
        if let Some(f) = &self.sigma_factor {
            if f.dim() != self.d {
                return Err(Error::Spec(format!(
                    "sigma_factor is {}x{} but d = {}",
                    f.dim(),
                    f.dim(),
                    self.d
                )));
            }
            let s = linalg::sym_eigvals_desc(f)?;
            if s.min() < -linalg::tol_eig(s.max().abs()) {
                return Err(Error::Spec("sigma_factor must be positive semi-definite".into()));
            }
        }
        Ok(())
    }

    /// Eigenvalues of `Σ = (Σ^{1/2})²`, descending. Identity when no factor
    /// is attached.
    pub fn population_spectrum(&self) -> Result<Spectrum> {
        match &self.sigma_factor {
            None => Spectrum::new(vec![1.0; self.d]),
            Some(f) if f.is_diagonal() => {
                Spectrum::new(f.diagonal().iter().map(|v| v * v).collect())
            }
            Some(f) => {
                let s = linalg::sym_eigvals_desc(f)?;
                Spectrum::new(s.values().iter().map(|v| v * v).collect())
            }
        }
    }

    /// `Σ` itself.
    pub fn population_matrix(&self) -> Result<SymMatrix> {
        match &self.sigma_factor {
            None => Ok(SymMatrix::identity(self.d)),
            Some(f) => SymMatrix::new(f.as_matrix() * f.as_matrix()),
        }
    }

    /// Almost-sure bound on `‖z‖²` where the family has one.
    pub fn norm_bound(&self) -> Option<f64> {
        match self.family {
            Family::SphereIsotropic | Family::CoordinateBasis => Some(self.d as f64),
            Family::BoundedNormCustom => self.m_bound,
            Family::SubgaussianEntries if self.entry_law == Some(EntryLaw::Rademacher) => {
                Some(self.d as f64)
            }
            _ => None,
        }
    }
}

fn sample_row(spec: &DistributionSpec, rng: &mut ChaCha8Rng, row: &mut [f64]) {
    let d = spec.d;
    match spec.family {
        Family::GaussianSigma => {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        Family::SubgaussianEntries => {
            let law = spec.entry_law.expect("validated");
            for v in row.iter_mut() {
                *v = law.draw(rng);
            }
        }
        Family::SphereIsotropic => sphere_row(rng, row, (d as f64).sqrt()),
        Family::CoordinateBasis => {
            row.fill(0.0);
            row[rng.random_range(0..d)] = (d as f64).sqrt();
        }
        Family::BoundedNormCustom => {
            let m = spec.m_bound.expect("validated");
            let keep: f64 = rng.random();
            if keep < d as f64 / m {
                sphere_row(rng, row, m.sqrt());
            } else {
                row.fill(0.0);
            }
        }
    }
}

fn sphere_row(rng: &mut ChaCha8Rng, row: &mut [f64], radius: f64) {
    loop {
        let mut sq = 0.0;
        for v in row.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            sq += g * g;
        }
        if sq > 0.0 {
            let s = radius / sq.sqrt();
            row.iter_mut().for_each(|v| *v *= s);
            return;
        }
    }
}

/// `n` whitened rows from `spec`. Deterministic in `(spec, n, seed)`.
pub fn sample_z(spec: &DistributionSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let d = spec.d;
    let mut rng = seed::rng_for(seed, &spec.seed_stream);
    let mut buf = vec![0.0; n * d];
    for row in buf.chunks_exact_mut(d) {
        sample_row(spec, &mut rng, row);
    }
    DataMatrix::new(DMatrix::from_row_slice(n, d, &buf))
}

/// Observations `X = Z·Σ^{1/2}`. Requires a covariance factor.
pub fn sample_x(spec: &DistributionSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    let factor = spec
        .sigma_factor
        .as_ref()
        .ok_or_else(|| Error::Spec("sample_x requires sigma_factor".into()))?;
    sample_z(spec, n, seed)?.times(factor)
}

/// `(Z, X)` for one trial; `X` is `Z` itself when there is no factor.
pub fn sample_pair(spec: &DistributionSpec, n: usize, seed: u64) -> Result<(DataMatrix, DataMatrix)> {
    let z = sample_z(spec, n, seed)?;
    let x = match &spec.sigma_factor {
        Some(f) => z.times(f)?,
        None => z.clone(),
    };
    Ok((z, x))
}

/// Moment-based estimate of a sub-gaussian norm or of `K(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// Moment order at which the maximum was attained.
    pub p: u32,
    pub value: f64,
    pub directions_used: usize,
    pub samples_used: usize,
}

/// Minimum sample count accepted by the moment estimators.
pub const MIN_MOMENT_SAMPLES: usize = 100;

/// `2·⌈ln d⌉`, at least 2.
pub fn default_p_max(d: usize) -> u32 {
    (2.0 * (d as f64).ln().ceil()).max(2.0) as u32
}

/// Coordinate axes first, then the normalized all-ones vector, then random
/// Gaussian directions, up to `count` unit vectors.
pub fn direction_net(d: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for j in 0..d.min(count) {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        out.push(e);
    }
    if out.len() < count && d > 1 {
        out.push(vec![1.0 / (d as f64).sqrt(); d]);
    }
    while out.len() < count && d > 1 {
        let mut u = vec![0.0; d];
        sphere_row(rng, &mut u, 1.0);
        out.push(u);
    }
    out
}

/// `mean_k |⟨z_k, u⟩|^p` over the rows of `z`.
pub fn directional_moment(z: &DataMatrix, u: &[f64], p: f64) -> f64 {
    let m = z.as_matrix();
    let u = nalgebra::DVector::from_column_slice(u);
    let proj = m * u;
    proj.iter().map(|v| v.abs().powf(p)).sum::<f64>() / z.n() as f64
}

fn check_estimator_inputs(n_samples: usize, n_directions: usize) -> Result<()> {
    if n_samples < MIN_MOMENT_SAMPLES {
        return Err(Error::InsufficientSamples { got: n_samples, min: MIN_MOMENT_SAMPLES });
    }
    if n_directions == 0 {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    Ok(())
}

/// Projections of `n_samples` fresh rows onto the direction net, one column
/// per direction.
fn projections(
    spec: &DistributionSpec,
    n_samples: usize,
    n_directions: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let z = sample_z(spec, n_samples, seed)?;
    let mut rng = seed::rng_for(seed, "directions");
    let net = direction_net(spec.d, n_directions, &mut rng);
    let flat: Vec<f64> = net.iter().flatten().copied().collect();
    let u = DMatrix::from_column_slice(spec.d, net.len(), &flat);
    Ok(z.as_matrix() * u)
}

fn column_moment(proj: &DMatrix<f64>, col: usize, p: f64) -> f64 {
    proj.column(col).iter().map(|v| v.abs().powf(p)).sum::<f64>() / proj.nrows() as f64
}

/// Lower estimate of `‖z‖_{ψ₂} = sup_u sup_p p^{−1/2}·(E|⟨z,u⟩|^p)^{1/p}`
/// using a finite direction net and even `p ∈ {2, 4, …, p_max}`.
pub fn estimate_psi2(
    spec: &DistributionSpec,
    n_samples: usize,
    n_directions: usize,
    p_max: u32,
    seed: u64,
) -> Result<MomentEstimate> {
    check_estimator_inputs(n_samples, n_directions)?;
    if p_max < 2 {
        return Err(Error::InvalidInput(format!("p_max must be >= 2, got {p_max}")));
    }
    let proj = projections(spec, n_samples, n_directions, seed)?;
    let mut best = MomentEstimate {
        p: 2,
        value: 0.0,
        directions_used: proj.ncols(),
        samples_used: n_samples,
    };
    for p in (2..=p_max).step_by(2) {
        let pf = p as f64;
        for c in 0..proj.ncols() {
            let v = column_moment(&proj, c, pf).powf(1.0 / pf) / pf.sqrt();
            if v > best.value {
                best.value = v;
                best.p = p;
            }
        }
    }
    Ok(best)
}

/// Lower estimate of `K(p) = sup_{‖x‖=1} (E|⟨z, x⟩|^p)^{1/p}`.
pub fn estimate_kp(
    spec: &DistributionSpec,
    p: u32,
    n_samples: usize,
    n_directions: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if p < 1 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    check_estimator_inputs(n_samples, n_directions)?;
    let proj = projections(spec, n_samples, n_directions, seed)?;
    let pf = p as f64;
    let value = (0..proj.ncols())
        .map(|c| column_moment(&proj, c, pf).powf(1.0 / pf))
        .fold(0.0, f64::max);
    Ok(MomentEstimate { p, value, directions_used: proj.ncols(), samples_used: n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{deviation_from_identity, empirical_second_moment};

    #[test]
    fn coordinate_basis_rows() {
        let spec = DistributionSpec::coordinate_basis(4);
        let z = sample_z(&spec, 100_000, 1).unwrap();
        for i in 0..100 {
            let row = z.row(i);
            let nz: Vec<f64> = row.iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz, vec![2.0]);
        }
        let dev = deviation_from_identity(&empirical_second_moment(&z)).unwrap();
        assert!(dev < 0.02, "{dev}");
    }

    #[test]
    fn sphere_rows_have_norm_sqrt_d() {
        let z = sample_z(&DistributionSpec::sphere(8), 500, 2).unwrap();
        for i in 0..z.n() {
            let sq: f64 = z.row(i).iter().map(|v| v * v).sum();
            assert!((sq.sqrt() - 8f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn rademacher_entries() {
        let z = sample_z(&DistributionSpec::entries(6, EntryLaw::Rademacher), 300, 3).unwrap();
        assert!(z.as_matrix().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn bounded_norm_rows() {
        let spec = DistributionSpec::bounded_norm(5, 12.0);
        let z = sample_z(&spec, 2000, 4).unwrap();
        for i in 0..z.n() {
            let sq: f64 = z.row(i).iter().map(|v| v * v).sum();
            assert!(sq == 0.0 || (sq - 12.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sample_x_applies_factor() {
        let spec = DistributionSpec::gaussian(SymMatrix::identity(3));
        let z = sample_z(&spec, 10, 5).unwrap();
        assert_eq!(sample_x(&spec, 10, 5).unwrap(), z);

        let f = SymMatrix::from_diag(&[2.0, 3.0]).unwrap();
        let z = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x = z.times(&f).unwrap();
        assert_eq!(x, DataMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap());

        let spec = DistributionSpec::gaussian(SymMatrix::from_diag(&[2.0, 1.0]).unwrap());
        let x = sample_x(&spec, 100_000, 6).unwrap();
        let s = empirical_second_moment(&x);
        assert!((s.get(0, 0) / 4.0 - 1.0).abs() < 0.03);
        assert!((s.get(1, 1) - 1.0).abs() < 0.03);
        assert!(matches!(sample_x(&DistributionSpec::sphere(3), 4, 0), Err(Error::Spec(_))));
    }

    #[test]
    fn spec_validation() {
        let mut g = DistributionSpec::gaussian(SymMatrix::identity(2));
        g.sigma_factor = None;
        assert!(matches!(sample_z(&g, 2, 0), Err(Error::Spec(_))));
        let s = DistributionSpec::sphere(2).with_factor(SymMatrix::identity(2));
        assert!(s.validate().is_err());
        let mut e = DistributionSpec::entries(2, EntryLaw::Rademacher);
        e.entry_law = None;
        assert!(e.validate().is_err());
        assert!(DistributionSpec::bounded_norm(4, 3.0).validate().is_err());
        let bad = DistributionSpec::gaussian(SymMatrix::from_diag(&[1.0, -1.0]).unwrap());
        assert!(bad.validate().is_err());
        let json = r#"{"family":"GaussianSigma","d":2,"sigma_factor":{"diag":[2,1]}}"#;
        let spec: DistributionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.population_spectrum().unwrap().values(), &[4.0, 1.0]);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"Nope","d":2}"#).is_err());
    }

    #[test]
    fn determinism() {
        for spec in [
            DistributionSpec::sphere(7),
            DistributionSpec::entries(7, EntryLaw::UniformScaled),
            DistributionSpec::bounded_norm(7, 20.0),
        ] {
            assert_eq!(sample_z(&spec, 33, 9).unwrap(), sample_z(&spec, 33, 9).unwrap());
            assert_ne!(sample_z(&spec, 33, 9).unwrap(), sample_z(&spec, 33, 10).unwrap());
        }
    }

    /// `E|g|^p = 2^{p/2}·Γ((p+1)/2)/√π`.
    fn gaussian_abs_moment(p: f64) -> f64 {
        2f64.powf(p / 2.0) * statrs::function::gamma::gamma((p + 1.0) / 2.0)
            / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn psi2_gaussian_scalar() {
        let spec = DistributionSpec::entries(1, EntryLaw::StdGaussian);
        let est = estimate_psi2(&spec, 100_000, 4, 8, 10).unwrap();
        let exact = (1..=4)
            .map(|k| 2.0 * k as f64)
            .map(|p| gaussian_abs_moment(p).powf(1.0 / p) / p.sqrt())
            .fold(0.0, f64::max);
        assert!((0.7..=1.1).contains(&est.value), "{est:?}");
        assert!((est.value - exact).abs() < 0.01, "{} vs {exact}", est.value);
        assert_eq!(est.directions_used, 1);
    }

    #[test]
    fn psi2_rademacher_scalar() {
        let spec = DistributionSpec::entries(1, EntryLaw::Rademacher);
        let est = estimate_psi2(&spec, 1000, 1, 10, 11).unwrap();
        assert_eq!(est.p, 2);
        assert!((est.value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn psi2_coordinate_basis_grows_with_d() {
        // exact: E|⟨z, e₁⟩|^p = d^{p/2 − 1}
        let exact = |d: f64, p: f64| d.powf(0.5 - 1.0 / p) / p.sqrt();
        let mut last = 0.0;
        for d in [4usize, 64, 1024] {
            let spec = DistributionSpec::coordinate_basis(d);
            let p_max = default_p_max(d);
            let est = estimate_psi2(&spec, 200_000, 1, p_max, 12).unwrap();
            let want = (1..=p_max / 2).map(|k| exact(d as f64, 2.0 * k as f64)).fold(0.0, f64::max);
            assert!(est.value > last);
            assert!((est.value / want - 1.0).abs() < 0.1, "d={d}: {} vs {want}", est.value);
            last = est.value;
        }
    }

    #[test]
    fn kp_examples() {
        for spec in [
            DistributionSpec::sphere(6),
            DistributionSpec::coordinate_basis(6),
            DistributionSpec::entries(6, EntryLaw::Rademacher),
            DistributionSpec::gaussian(SymMatrix::identity(6)),
            DistributionSpec::bounded_norm(6, 9.0),
        ] {
            let k2 = estimate_kp(&spec, 2, 100_000, 12, 13).unwrap();
            assert!((0.95..=1.05).contains(&k2.value), "{:?} {k2:?}", spec.family);
        }
        let g = DistributionSpec::entries(1, EntryLaw::StdGaussian);
        let k4 = estimate_kp(&g, 4, 200_000, 1, 14).unwrap();
        assert!((k4.value - 3f64.powf(0.25)).abs() < 0.02, "{k4:?}");
        assert!(matches!(estimate_kp(&g, 2, 50, 1, 0), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn rademacher_fourth_moment_on_diagonal() {
        // the four sign patterns give ⟨z, x⟩ ∈ {√2, 0, 0, −√2}: E⟨z,x⟩⁴ = 2
        let all = DataMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        let u = [0.5f64.sqrt(), 0.5f64.sqrt()];
        assert!((directional_moment(&all, &u, 4.0) - 2.0).abs() < 1e-12);
        let spec = DistributionSpec::entries(2, EntryLaw::Rademacher);
        let z = sample_z(&spec, 200_000, 15).unwrap();
        assert!((directional_moment(&z, &u, 4.0) - 2.0).abs() < 0.02);
    }

    #[test]
    fn default_p_max_values() {
        assert_eq!(default_p_max(1), 2);
        assert_eq!(default_p_max(3), 4);
        assert_eq!(default_p_max(1000), 14);
    }
}
