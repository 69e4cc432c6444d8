//! Column normalization and rank-revealing QR embedding of the training
//! signals, with lift-back of features learned in the reduced space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{ClassDataset, FeatureBank};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Rescales every signal to unit Euclidean norm. A zero column is reported
/// with its class label and 0-based column index.
pub fn normalize_columns(data: &ClassDataset) -> Result<ClassDataset> {
    let mut classes = Vec::with_capacity(data.class_count());
    for (i, block) in data.classes().iter().enumerate() {
        let mut out = block.clone();
        for k in 0..out.ncols() {
            let norm = out.column(k).norm();
            if norm == 0.0 {
                return Err(Error::ZeroColumn {
                    class: data.labels()[i].clone(),
                    column: k,
                });
            }
            out.column_mut(k).scale_mut(1.0 / norm);
        }
        classes.push(out);
    }
    ClassDataset::new(data.labels().to_vec(), classes)
}

/// An orthonormal embedding Y ≈ Q·R with Q d×r and R upper-triangular r×N,
/// where r is the numerical rank of the stacked data.
#[derive(Debug, Clone)]
pub struct QrReduction {
    q_factor: DMatrix<f64>,
    r_factor: DMatrix<f64>,
    original_dim: usize,
    reduced_dim: usize,
}

impl QrReduction {
    pub fn q_factor(&self) -> &DMatrix<f64> {
        &self.q_factor
    }

    pub fn r_factor(&self) -> &DMatrix<f64> {
        &self.r_factor
    }

    pub fn original_dim(&self) -> usize {
        self.original_dim
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    /// Embeds a signal matrix into the reduced space: Ỹ = QᵀY.
    pub fn reduce_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.original_dim {
            return Err(Error::DimensionMismatch {
                context: "reduce_matrix rows",
                expected: self.original_dim,
                found: m.nrows(),
            });
        }
        Ok(self.q_factor.transpose() * m)
    }

    /// Embeds a whole dataset into the reduced space.
    pub fn reduce_dataset(&self, data: &ClassDataset) -> Result<ClassDataset> {
        let mut classes = Vec::with_capacity(data.class_count());
        for block in data.classes() {
            classes.push(self.reduce_matrix(block)?);
        }
        ClassDataset::new(data.labels().to_vec(), classes)
    }
}

/// Embeds the dataset into ℝ^r where r is its numerical rank. The returned
/// reduced dataset is Ỹ = QᵀY; all pairwise inner products are preserved
/// because Q spans the columns of Y.
///
/// Rank is decided from singular values (> [`RANK_REL_TOL`]·σ_max); the
/// upper-triangular R is then produced by a QR factorization of the
/// rank-truncated embedding, so Q = U_r·Q₂ keeps orthonormal columns.
pub fn qr_reduce(data: &ClassDataset) -> Result<(QrReduction, ClassDataset)> {
    let y = data.stacked();
    let d = y.nrows();
    let svd = y
        .clone()
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD of training data did not converge".into()))?;
    let sigma = &svd.singular_values;
    let sigma_max = sigma[0];
    if sigma_max == 0.0 {
        return Err(Error::Numerical("training data has rank zero".into()));
    }
    let rank = sigma.iter().filter(|s| **s > RANK_REL_TOL * sigma_max).count();
    let u = svd.u.as_ref().expect("u requested");
    let basis = u.columns(0, rank).into_owned();

    // Re-triangularize so that R = QᵀY is genuinely upper triangular.
    let embedded = basis.transpose() * &y;
    let qr = embedded.qr();
    let q_factor = &basis * qr.q();
    let r_factor = qr.r();

    let reduction = QrReduction {
        q_factor,
        r_factor,
        original_dim: d,
        reduced_dim: rank,
    };
    let reduced = reduction.reduce_dataset(data)?;
    Ok((reduction, reduced))
}

/// Maps a bank learned in the reduced space back to ℝ^d as F_i = Q·F̃_i.
/// Orthonormality survives because Q has orthonormal columns.
pub fn lift_features(reduction: &QrReduction, bank: &FeatureBank) -> Result<FeatureBank> {
    if bank.dim() != reduction.reduced_dim {
        return Err(Error::DimensionMismatch {
            context: "lift_features bank dimension",
            expected: reduction.reduced_dim,
            found: bank.dim(),
        });
    }
    let blocks = bank
        .blocks()
        .iter()
        .map(|f| &reduction.q_factor * f)
        .collect();
    FeatureBank::new(bank.labels().to_vec(), blocks, bank.pnorm())
}
