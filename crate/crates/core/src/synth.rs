//! Planted-subspace synthetic data generation with a reproducible seeded
//! generator, standing in for face databases at desk scale.

use nalgebra::{DMatrix, DVector};
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::norms::PNorm;
use crate::types::{ClassDataset, FeatureBank};

/// Deterministic random source: xoshiro256++ (fixed, documented constants)
/// with uniform doubles taken from the top 53 bits and normals via the
/// Box-Muller transform. The stream for a given seed is stable across
/// platforms and releases.
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1]; safe as a logarithm argument.
    fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; generates pairs, caches the second.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform_open().ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * self.uniform();
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// ±1 with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform index in 0..n without modulo bias.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let limit = u64::MAX - u64::MAX % n;
        loop {
            let x = self.inner.next_u64();
            if x < limit {
                return (x % n) as usize;
            }
        }
    }
}

/// Coefficient distribution inside the planted class subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientModel {
    /// One nonzero entry of unit magnitude at a uniform position.
    Sparse,
    /// All entries of magnitude 1/√s with uniform signs.
    Flat,
    /// Standard normal draw rescaled to unit Euclidean norm.
    Gaussian,
}

impl CoefficientModel {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "sparse" => Ok(CoefficientModel::Sparse),
            "flat" => Ok(CoefficientModel::Flat),
            "gaussian" => Ok(CoefficientModel::Gaussian),
            other => Err(Error::InvalidConfig(format!(
                "unknown coefficient model {other:?}; expected sparse, flat or gaussian"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CoefficientModel::Sparse => "sparse",
            CoefficientModel::Flat => "flat",
            CoefficientModel::Gaussian => "gaussian",
        }
    }
}

/// Parameters of a planted-subspace instance.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub rank: usize,
    pub coefficient_model: CoefficientModel,
    pub noise_sigma: f64,
    /// Target spectral coherence between planted subspaces; 0 plants mutually
    /// orthogonal subspaces.
    pub subspace_coherence: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "classes and dim must be positive".into(),
            ));
        }
        if self.rank == 0 || self.rank > self.dim {
            return Err(Error::InvalidConfig(format!(
                "rank {} must satisfy 1 <= s <= d = {}",
                self.rank, self.dim
            )));
        }
        if self.per_class < 2 {
            return Err(Error::InvalidConfig(
                "per_class must be at least 2 (one training and one test signal)".into(),
            ));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.subspace_coherence) {
            return Err(Error::InvalidConfig(
                "subspace_coherence must lie in [0, 1]".into(),
            ));
        }
        if self.subspace_coherence == 0.0 && self.rank * self.classes > self.dim {
            return Err(Error::InvalidConfig(format!(
                "mutually orthogonal subspaces need s*C <= d; got s*C = {} > d = {}",
                self.rank * self.classes,
                self.dim
            )));
        }
        if self.subspace_coherence > 0.0 && self.rank * self.classes + 1 > self.dim {
            return Err(Error::InvalidConfig(format!(
                "coherent planting needs s*C + 1 <= d; got {} > d = {}",
                self.rank * self.classes + 1,
                self.dim
            )));
        }
        Ok(())
    }
}

/// Generates (train, test, planted bank). The split is half/half per class
/// with one extra training signal when `per_class` is odd; generation is a
/// pure function of the spec.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
) -> Result<(ClassDataset, ClassDataset, FeatureBank)> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let labels: Vec<String> = (0..spec.classes).map(|i| format!("c{i}")).collect();

    let blocks = plant_subspaces(spec, &mut rng)?;
    let bank = FeatureBank::new(labels.clone(), blocks, PNorm::Two)?;

    let n_train = spec.per_class.div_ceil(2);
    let mut train_blocks = Vec::with_capacity(spec.classes);
    let mut test_blocks = Vec::with_capacity(spec.classes);
    for i in 0..spec.classes {
        let mut all = DMatrix::zeros(spec.dim, spec.per_class);
        for k in 0..spec.per_class {
            let y = draw_signal(spec, bank.block(i), &mut rng);
            all.set_column(k, &y);
        }
        train_blocks.push(all.columns(0, n_train).into_owned());
        test_blocks.push(all.columns(n_train, spec.per_class - n_train).into_owned());
    }

    let train = ClassDataset::new(labels.clone(), train_blocks)?;
    let test = ClassDataset::new(labels, test_blocks)?;
    Ok((train, test, bank))
}

/// Orthonormalizes a seeded Gaussian draw and slices it into class blocks.
/// For a positive coherence target t the first feature of every class mixes
/// its private direction with one shared direction w as
/// √(1−t)·u_i¹ + √t·w, so each cross-class Gram is diag(t, 0, …, 0) and the
/// pairwise spectral coherence is exactly t while the remaining features
/// stay mutually orthogonal.
fn plant_subspaces(spec: &SyntheticSpec, rng: &mut SeededRng) -> Result<Vec<DMatrix<f64>>> {
    let (s, c, d) = (spec.rank, spec.classes, spec.dim);
    let t = spec.subspace_coherence;
    let wanted = if t == 0.0 { s * c } else { s * c + 1 };
    let raw = DMatrix::from_fn(d, wanted, |_, _| rng.normal());
    let q = raw.qr().q();
    let mut blocks: Vec<DMatrix<f64>> = (0..c)
        .map(|i| q.columns(i * s, s).into_owned())
        .collect();
    if t > 0.0 {
        let shared = q.column(s * c);
        for block in &mut blocks {
            let mixed = block.column(0) * (1.0 - t).sqrt() + shared * t.sqrt();
            block.set_column(0, &mixed);
        }
    }
    Ok(blocks)
}

fn draw_signal(spec: &SyntheticSpec, features: &DMatrix<f64>, rng: &mut SeededRng) -> DVector<f64> {
    let s = spec.rank;
    let coeff = match spec.coefficient_model {
        CoefficientModel::Sparse => {
            let mut x = DVector::zeros(s);
            x[rng.index(s)] = rng.sign();
            x
        }
        CoefficientModel::Flat => {
            let scale = 1.0 / (s as f64).sqrt();
            DVector::from_fn(s, |_, _| rng.sign() * scale)
        }
        CoefficientModel::Gaussian => loop {
            let x = DVector::from_fn(s, |_, _| rng.normal());
            let n = x.norm();
            if n > 0.0 {
                break x / n;
            }
        },
    };
    let mut y = features * coeff;
    if spec.noise_sigma > 0.0 {
        let g = DVector::from_fn(spec.dim, |_, _| rng.normal());
        let residual = &g - features * (features.transpose() * &g);
        y += residual * spec.noise_sigma;
    }
    let n = y.norm();
    y / n
}
