//! Labeling of signals through p-norm feature responses, plus the classical
//! nearest-neighbour and nearest-subspace baselines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norms::vector_pnorm;
use crate::types::{ClassDataset, FeatureBank};

/// A classification decision with its per-class evidence.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub label: String,
    /// One response value per class, in class order.
    pub scores: Vec<f64>,
    /// Best minus second-best score; equals the best score when there is a
    /// single class.
    pub margin: f64,
}

/// Linear feature selection f = A·y applied before the baseline classifiers.
#[derive(Debug, Clone)]
pub struct LinearFeatureMap {
    pub matrix: DMatrix<f64>,
}

impl LinearFeatureMap {
    pub fn identity(dim: usize) -> Self {
        LinearFeatureMap {
            matrix: DMatrix::identity(dim, dim),
        }
    }
}

/// argmax with ties broken to the lowest index.
fn decide(labels: &[String], scores: Vec<f64>) -> Prediction {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let mut second = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        if i != best && *s > second {
            second = *s;
        }
    }
    let margin = if scores.len() == 1 {
        scores[0]
    } else {
        scores[best] - second
    };
    Prediction {
        label: labels[best].clone(),
        scores,
        margin,
    }
}

fn normalized(y: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = y.norm();
    if norm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(y / norm)
}

/// Scores a signal by the p-norm of its per-class feature responses and
/// assigns the maximizing label. The signal is normalized first; labels are
/// unaffected (the scores are absolutely homogeneous) but margins become
/// comparable across signals.
pub fn classify(bank: &FeatureBank, y: &DVector<f64>) -> Result<Prediction> {
    let y = normalized(y)?;
    let responses = bank.responses(&y)?;
    let scores = responses
        .iter()
        .map(|r| vector_pnorm(r.as_slice(), bank.pnorm()))
        .collect();
    Ok(decide(bank.labels(), scores))
}

/// Nearest-neighbour baseline: the label of the training signal whose
/// features correlate maximally, score_i = ‖(AᵀA·Y_i)ᵀ y‖_∞.
pub fn nn_classify(
    train: &ClassDataset,
    map: &LinearFeatureMap,
    y: &DVector<f64>,
) -> Result<Prediction> {
    if map.matrix.ncols() != train.dim() {
        return Err(Error::DimensionMismatch {
            context: "feature map columns",
            expected: train.dim(),
            found: map.matrix.ncols(),
        });
    }
    let y = normalized(y)?;
    if y.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            context: "signal dimension",
            expected: train.dim(),
            found: y.len(),
        });
    }
    // Aᵀ(A·y) without materializing the d×d Gram matrix
    let sensed = map.matrix.transpose() * (&map.matrix * &y);
    let scores = train
        .classes()
        .iter()
        .map(|block| (block.transpose() * &sensed).abs().max())
        .collect();
    Ok(decide(train.labels(), scores))
}

/// Nearest-subspace baseline: per class an orthonormal basis Q_i of
/// span(A·Y_i) (rank-revealing QR), score_i = ‖Q_iᵀA·y‖₂.
pub fn ns_classify(
    train: &ClassDataset,
    map: &LinearFeatureMap,
    y: &DVector<f64>,
) -> Result<Prediction> {
    if map.matrix.ncols() != train.dim() {
        return Err(Error::DimensionMismatch {
            context: "feature map columns",
            expected: train.dim(),
            found: map.matrix.ncols(),
        });
    }
    let y = normalized(y)?;
    if y.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            context: "signal dimension",
            expected: train.dim(),
            found: y.len(),
        });
    }
    let mapped_y = &map.matrix * &y;
    let scores = train
        .classes()
        .iter()
        .map(|block| {
            let basis = span_basis(&(&map.matrix * block));
            match basis {
                Some(q) => (q.transpose() * &mapped_y).norm(),
                None => 0.0,
            }
        })
        .collect();
    Ok(decide(train.labels(), scores))
}

/// Orthonormal basis of the column span via column-pivoted QR, truncated at
/// the numerical rank. None for a zero block.
fn span_basis(block: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = block.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let limit = r.nrows().min(r.ncols());
    let largest = r[(0, 0)].abs();
    if largest == 0.0 {
        return None;
    }
    let mut rank = 0;
    for k in 0..limit {
        if r[(k, k)].abs() > 1e-12 * largest {
            rank = k + 1;
        } else {
            break;
        }
    }
    Some(q.columns(0, rank).into_owned())
}

/// Aggregate classification quality of a bank on a labeled test set.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub misclassified: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Labels indexing the confusion matrix rows (actual classes).
    pub actual_labels: Vec<String>,
    /// Labels indexing the confusion matrix columns (predicted classes).
    pub predicted_labels: Vec<String>,
    /// `confusion[actual][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub mean_margin: f64,
}

/// Classifies every test signal and tallies misclassifications, per-class
/// confusion counts and the mean margin.
pub fn evaluate(bank: &FeatureBank, test: &ClassDataset) -> Result<EvalSummary> {
    let actual_labels = test.labels().to_vec();
    let predicted_labels = bank.labels().to_vec();
    let mut confusion = vec![vec![0usize; predicted_labels.len()]; actual_labels.len()];
    let mut misclassified = 0;
    let mut margin_sum = 0.0;
    let mut total = 0;
    for (actual, block) in test.classes().iter().enumerate() {
        for k in 0..block.ncols() {
            let y = block.column(k).into_owned();
            let prediction = classify(bank, &y)?;
            let predicted = predicted_labels
                .iter()
                .position(|l| *l == prediction.label)
                .expect("prediction label comes from the bank");
            confusion[actual][predicted] += 1;
            if actual_labels[actual] != prediction.label {
                misclassified += 1;
            }
            margin_sum += prediction.margin;
            total += 1;
        }
    }
    Ok(EvalSummary {
        misclassified,
        total,
        accuracy: (total - misclassified) as f64 / total as f64,
        actual_labels,
        predicted_labels,
        confusion,
        mean_margin: margin_sum / total as f64,
    })
}
