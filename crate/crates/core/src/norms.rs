//! Vector p-norms and exact operator (q,p)-norms for the three supported tags.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column count above which the exact (∞,1)-norm enumeration is refused.
pub const SIGN_ENUMERATION_CAP: usize = 20;

/// Norm tag. Only 1, 2 and ∞ are meaningful for the response constraints,
/// so the tag is a closed enumeration rather than a general exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    /// Parses the command-line spelling `1`, `2` or `inf`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "1" => Ok(PNorm::One),
            "2" => Ok(PNorm::Two),
            "inf" => Ok(PNorm::Inf),
            other => Err(Error::InvalidConfig(format!(
                "unknown norm tag {other:?}; expected 1, 2 or inf"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PNorm::One => "1",
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        }
    }
}

impl std::fmt::Display for PNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An operator norm ‖M‖_{q,p} = max_{‖v‖_q = 1} ‖Mv‖_p, identified by its tag pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormPair {
    pub q: PNorm,
    pub p: PNorm,
}

impl NormPair {
    pub fn new(q: PNorm, p: PNorm) -> Self {
        NormPair { q, p }
    }

    /// Parses the command-line spelling `q,p`, e.g. `2,2` or `inf,1`.
    pub fn parse(text: &str) -> Result<Self> {
        let (q, p) = text.split_once(',').ok_or_else(|| {
            Error::InvalidConfig(format!("norm pair {text:?} must have the form q,p"))
        })?;
        Ok(NormPair::new(PNorm::parse(q)?, PNorm::parse(p)?))
    }
}

impl std::fmt::Display for NormPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.q, self.p)
    }
}

/// Returns ‖v‖_p. Empty input yields 0.
pub fn vector_pnorm(v: &[f64], p: PNorm) -> f64 {
    match p {
        PNorm::One => v.iter().map(|x| x.abs()).sum(),
        PNorm::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        PNorm::Inf => v.iter().fold(0.0, |acc, x| acc.max(x.abs())),
    }
}

/// Exact operator (q,p)-norm for the five supported pairs.
///
/// (1,∞) is the maximal absolute entry, (∞,∞) the maximal absolute row sum,
/// (1,1) the maximal absolute column sum and (2,2) the largest singular value.
/// (∞,1) has no closed form and is evaluated by enumerating sign vectors,
/// which is refused above [`SIGN_ENUMERATION_CAP`] columns.
pub fn operator_norm(m: &DMatrix<f64>, qp: NormPair) -> Result<f64> {
    match (qp.q, qp.p) {
        (PNorm::One, PNorm::Inf) => Ok(m.iter().fold(0.0, |acc, x| acc.max(x.abs()))),
        (PNorm::Inf, PNorm::Inf) => Ok((0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)),
        (PNorm::One, PNorm::One) => Ok((0..m.ncols())
            .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)),
        (PNorm::Two, PNorm::Two) => Ok(spectral_norm(m)),
        (PNorm::Inf, PNorm::One) => sign_enumeration_norm(m),
        (q, p) => Err(Error::UnsupportedNormPair {
            q: q.as_str(),
            p: p.as_str(),
        }),
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // nalgebra returns singular values in descending order.
    m.clone().svd(false, false).singular_values[0]
}

/// max over v ∈ {±1}^cols of ‖Mv‖_1; v and −v are equivalent, so the first
/// coordinate is pinned to +1.
fn sign_enumeration_norm(m: &DMatrix<f64>) -> Result<f64> {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    if cols > SIGN_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            columns: cols,
            cap: SIGN_ENUMERATION_CAP,
        });
    }
    let rows = m.nrows();
    let mut best = 0.0f64;
    let mut mv = vec![0.0f64; rows];
    for mask in 0u64..(1u64 << (cols - 1)) {
        mv.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..cols {
            let sign = if j == 0 || mask >> (j - 1) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            let col = m.column(j);
            for i in 0..rows {
                mv[i] += sign * col[i];
            }
        }
        best = best.max(mv.iter().map(|x| x.abs()).sum());
    }
    Ok(best)
}
