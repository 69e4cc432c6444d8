//! Shared data model: labeled signal datasets, per-class feature banks and
//! the block response grid the solver operates on.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::norms::{operator_norm, NormPair, PNorm};

/// Maximum allowed deviation of FᵀF from the identity for a valid bank.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// A d×N matrix of column signals partitioned into labeled class blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDataset {
    dim: usize,
    labels: Vec<String>,
    classes: Vec<DMatrix<f64>>,
}

impl ClassDataset {
    /// Builds a dataset, checking that all blocks share a row count and that
    /// every class holds at least one signal.
    pub fn new(labels: Vec<String>, classes: Vec<DMatrix<f64>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidConfig("dataset has no classes".into()));
        }
        if labels.len() != classes.len() {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} class blocks",
                labels.len(),
                classes.len()
            )));
        }
        let dim = classes[0].nrows();
        if dim == 0 {
            return Err(Error::InvalidConfig("signal dimension is zero".into()));
        }
        for (i, block) in classes.iter().enumerate() {
            if block.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    context: "class block row count",
                    expected: dim,
                    found: block.nrows(),
                });
            }
            if block.ncols() == 0 {
                return Err(Error::InvalidConfig(format!(
                    "class {:?} has no signals",
                    labels[i]
                )));
            }
            if block.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "class {:?} contains non-finite values",
                    labels[i]
                )));
            }
        }
        Ok(ClassDataset {
            dim,
            labels,
            classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class(&self, i: usize) -> &DMatrix<f64> {
        &self.classes[i]
    }

    pub fn classes(&self) -> &[DMatrix<f64>] {
        &self.classes
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.ncols()).collect()
    }

    pub fn total_signals(&self) -> usize {
        self.classes.iter().map(|c| c.ncols()).sum()
    }

    /// Concatenates all class blocks into the d×N data matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.total_signals());
        let mut offset = 0;
        for block in &self.classes {
            out.view_mut((0, offset), (self.dim, block.ncols()))
                .copy_from(block);
            offset += block.ncols();
        }
        out
    }

    /// Replaces every class block through `f`, keeping labels.
    pub fn map_classes(&self, mut f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        ClassDataset::new(self.labels.clone(), self.classes.iter().map(&mut f).collect())
    }
}

/// The trained model: one orthonormal d×s block per class plus the p-norm
/// used to score responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    dim: usize,
    rank: usize,
    pnorm: PNorm,
    labels: Vec<String>,
    blocks: Vec<DMatrix<f64>>,
}

impl FeatureBank {
    /// Builds a bank, enforcing the orthonormality invariant on every block.
    pub fn new(
        labels: Vec<String>,
        blocks: Vec<DMatrix<f64>>,
        pnorm: PNorm,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidConfig("feature bank has no classes".into()));
        }
        if labels.len() != blocks.len() {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} feature blocks",
                labels.len(),
                blocks.len()
            )));
        }
        let dim = blocks[0].nrows();
        let rank = blocks[0].ncols();
        if rank == 0 || rank > dim {
            return Err(Error::InvalidConfig(format!(
                "feature rank {rank} must satisfy 1 <= s <= d = {dim}"
            )));
        }
        for (i, block) in blocks.iter().enumerate() {
            if block.nrows() != dim || block.ncols() != rank {
                return Err(Error::DimensionMismatch {
                    context: "feature block shape",
                    expected: dim * rank,
                    found: block.nrows() * block.ncols(),
                });
            }
            let deviation = orthonormality_deviation(block);
            // NaN deviation must fail too
            if deviation.is_nan() || deviation > ORTHONORMALITY_TOL {
                return Err(Error::Numerical(format!(
                    "feature block {} ({:?}) violates orthonormality: \
                     max |FᵀF - I| = {deviation:.3e}",
                    i, labels[i]
                )));
            }
        }
        Ok(FeatureBank {
            dim,
            rank,
            pnorm,
            labels,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn pnorm(&self) -> PNorm {
        self.pnorm
    }

    pub fn class_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Same bank scored under a different classification norm.
    pub fn with_pnorm(&self, pnorm: PNorm) -> Self {
        let mut out = self.clone();
        out.pnorm = pnorm;
        out
    }

    /// Per-class responses F_iᵀy of a single signal.
    pub fn responses(&self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "signal dimension",
                expected: self.dim,
                found: y.len(),
            });
        }
        Ok(self.blocks.iter().map(|f| f.transpose() * y).collect())
    }

    /// C×C matrix of cross-class coherences; entry (i,j) is ‖F_jᵀF_i‖_{q,p}.
    pub fn coherence_report(&self, qp: NormPair) -> Result<DMatrix<f64>> {
        let c = self.class_count();
        let mut out = DMatrix::zeros(c, c);
        for i in 0..c {
            for j in 0..c {
                let gram = self.blocks[j].transpose() * &self.blocks[i];
                out[(i, j)] = operator_norm(&gram, qp)?;
            }
        }
        Ok(out)
    }
}

/// max |FᵀF - I| over entries.
pub fn orthonormality_deviation(block: &DMatrix<f64>) -> f64 {
    let gram = block.transpose() * block;
    let mut dev = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    dev
}

/// The (C·s)×N block matrix G with blocks G_ij = F_iᵀY_j; the variable of the
/// response-set projection. Row block i holds class-i features, column block j
/// holds class-j signals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid {
    matrix: DMatrix<f64>,
    rank: usize,
    class_sizes: Vec<usize>,
}

impl ResponseGrid {
    pub fn new(matrix: DMatrix<f64>, rank: usize, class_sizes: Vec<usize>) -> Result<Self> {
        let classes = class_sizes.len();
        let total: usize = class_sizes.iter().sum();
        if rank == 0 || classes == 0 {
            return Err(Error::InvalidConfig("empty response grid".into()));
        }
        if matrix.nrows() != classes * rank || matrix.ncols() != total {
            return Err(Error::DimensionMismatch {
                context: "response grid shape",
                expected: classes * rank * total,
                found: matrix.nrows() * matrix.ncols(),
            });
        }
        Ok(ResponseGrid {
            matrix,
            rank,
            class_sizes,
        })
    }

    /// Assembles G from feature blocks and a dataset: G_ij = F_iᵀY_j.
    pub fn from_responses(blocks: &[DMatrix<f64>], data: &ClassDataset) -> Result<Self> {
        if blocks.len() != data.class_count() {
            return Err(Error::DimensionMismatch {
                context: "response grid class count",
                expected: data.class_count(),
                found: blocks.len(),
            });
        }
        let rank = blocks[0].ncols();
        let sizes = data.class_sizes();
        let mut matrix = DMatrix::zeros(blocks.len() * rank, data.total_signals());
        for (i, f) in blocks.iter().enumerate() {
            if f.nrows() != data.dim() {
                return Err(Error::DimensionMismatch {
                    context: "feature block rows",
                    expected: data.dim(),
                    found: f.nrows(),
                });
            }
            let mut offset = 0;
            for (j, y) in data.classes().iter().enumerate() {
                matrix
                    .view_mut((i * rank, offset), (rank, sizes[j]))
                    .copy_from(&(f.transpose() * y));
                offset += sizes[j];
            }
        }
        ResponseGrid::new(matrix, rank, sizes)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn class_count(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    fn column_offset(&self, j: usize) -> usize {
        self.class_sizes[..j].iter().sum()
    }

    /// The s×n_j block G_ij.
    pub fn block_view(&self, i: usize, j: usize) -> DMatrixView<'_, f64> {
        self.matrix.view(
            (i * self.rank, self.column_offset(j)),
            (self.rank, self.class_sizes[j]),
        )
    }
}
