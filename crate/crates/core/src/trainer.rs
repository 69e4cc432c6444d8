//! Feature bank learning: eigen initialization, alternating projections
//! between the orthonormality set (per-class Procrustes) and the response
//! constraint set (forward-backward splitting), with best-pair tracking.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::norms::{vector_pnorm, PNorm};
use crate::preprocess::RANK_REL_TOL;
use crate::prox::project_grid;
use crate::types::{ClassDataset, FeatureBank, ResponseGrid};

/// Step-size rule for the forward-backward iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    /// γ = ‖G‖_F / (20‖∇f₂‖_F); reliable for small response caps.
    Conservative,
    /// γ = 1 / ‖∇f₂‖_F; makes faster progress for large response caps.
    Aggressive,
    /// Conservative when mu_fraction ≤ 0.05, aggressive otherwise.
    Auto,
}

impl StepPolicy {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "conservative" => Ok(StepPolicy::Conservative),
            "aggressive" => Ok(StepPolicy::Aggressive),
            "auto" => Ok(StepPolicy::Auto),
            other => Err(Error::InvalidConfig(format!(
                "unknown step policy {other:?}; expected conservative, aggressive or auto"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepPolicy::Conservative => "conservative",
            StepPolicy::Aggressive => "aggressive",
            StepPolicy::Auto => "auto",
        }
    }

    fn resolve(self, mu_fraction: f64) -> StepPolicy {
        match self {
            StepPolicy::Auto => {
                if mu_fraction <= 0.05 {
                    StepPolicy::Conservative
                } else {
                    StepPolicy::Aggressive
                }
            }
            fixed => fixed,
        }
    }
}

/// Training parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub pnorm: PNorm,
    /// Features per class (s).
    pub rank: usize,
    /// Without-class cap as a fraction of the within-class target β_p.
    pub mu_fraction: f64,
    pub outer_iters: usize,
    /// Relative-improvement stop for the inner iteration.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub step_policy: StepPolicy,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(pnorm: PNorm, rank: usize) -> Self {
        TrainConfig {
            pnorm,
            rank,
            mu_fraction: 0.0,
            outer_iters: 10,
            inner_tol: 1e-4,
            inner_max_iters: 500,
            step_policy: StepPolicy::Auto,
            seed: 0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.rank == 0 || self.rank > dim {
            return Err(Error::InvalidConfig(format!(
                "rank {} must satisfy 1 <= s <= d = {dim}",
                self.rank
            )));
        }
        if !(0.0..=1.0).contains(&self.mu_fraction) {
            return Err(Error::InvalidConfig(format!(
                "mu_fraction {} must lie in [0, 1]",
                self.mu_fraction
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::InvalidConfig("outer_iters must be >= 1".into()));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::InvalidConfig("inner_max_iters must be >= 1".into()));
        }
        if self.inner_tol.is_nan() || self.inner_tol <= 0.0 {
            return Err(Error::InvalidConfig("inner_tol must be > 0".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        beta_for(self.pnorm, self.rank)
    }

    pub fn mu(&self) -> f64 {
        self.mu_fraction * self.beta()
    }
}

/// Feasibility diagnostics of a bank against the training responses.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityReport {
    /// max over within-class responses of |‖F_iᵀy_i^k‖_p − β_p|.
    pub max_within_deficit: f64,
    /// max over without-class responses of max(0, ‖F_jᵀy_i^k‖_p − μ_p).
    pub max_without_excess: f64,
}

/// Bookkeeping of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Frobenius distance of the stored best pair.
    pub best_distance: f64,
    /// Pair distances in evaluation order (two per outer iteration).
    pub distance_trace: Vec<f64>,
    /// Objective values of each response-set projection call.
    pub inner_objective_traces: Vec<Vec<f64>>,
    pub feasibility: FeasibilityReport,
    /// Classes whose Procrustes input was rank deficient at least once.
    pub degenerate_classes: Vec<usize>,
    /// Grassmann bound when the configuration forces overlapping subspaces
    /// (s·C > d); None otherwise.
    pub overlap_bound: Option<f64>,
}

/// Maximal attainable within-class response of unit-norm signals under an
/// orthonormal system of s features: β₁ = √s, β₂ = 1, β_∞ = 1.
pub fn beta_for(p: PNorm, s: usize) -> f64 {
    match p {
        PNorm::One => (s as f64).sqrt(),
        PNorm::Two => 1.0,
        PNorm::Inf => 1.0,
    }
}

/// Lower bound on the maximal pairwise spectral coherence of `classes`
/// s-dimensional subspaces of ℝ^d: √max(0, (sC−d)/(d(C−1))). With
/// `classes = None` the class count goes to infinity and the bound is √(s/d).
pub fn grassmann_bound(s: usize, d: usize, classes: Option<usize>) -> f64 {
    let squared = match classes {
        None => s as f64 / d as f64,
        // fewer than two subspaces have no pairwise coherence to bound
        Some(c) if c < 2 => 0.0,
        Some(c) => {
            let c = c as f64;
            let num = s as f64 * c - d as f64;
            let den = d as f64 * (c - 1.0);
            (num / den).max(0.0)
        }
    };
    squared.sqrt()
}

/// Spectral initialization: for each class the s leading eigenvectors of
/// Y_iY_iᵀ − Σ_{j≠i} Y_jY_jᵀ, i.e. the orthonormal system that maximizes
/// within-class energy minus without-class energy. Eigenvector signs follow
/// a fixed convention (largest-magnitude entry positive) for determinism.
pub fn init_features(data: &ClassDataset, s: usize) -> Result<FeatureBank> {
    let d = data.dim();
    if s == 0 || s > d {
        return Err(Error::InvalidConfig(format!(
            "rank {s} must satisfy 1 <= s <= d = {d}"
        )));
    }
    let mut total = DMatrix::<f64>::zeros(d, d);
    let scatters: Vec<DMatrix<f64>> = data
        .classes()
        .iter()
        .map(|y| {
            let scatter = y * y.transpose();
            total += &scatter;
            scatter
        })
        .collect();

    let mut blocks = Vec::with_capacity(data.class_count());
    for (i, scatter) in scatters.iter().enumerate() {
        let contrast = scatter * 2.0 - &total;
        let eig = contrast.symmetric_eigen();
        // order eigenpairs by descending eigenvalue
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|a, b| {
            eig.eigenvalues[*b]
                .partial_cmp(&eig.eigenvalues[*a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut block = DMatrix::zeros(d, s);
        for (col, &idx) in order.iter().take(s).enumerate() {
            let mut v = eig.eigenvectors.column(idx).into_owned();
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "eigensolver produced non-finite vectors for class {i}"
                )));
            }
            let mut pivot = 0;
            for (k, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = k;
                }
            }
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            block.set_column(col, &v);
        }
        blocks.push(block);
    }
    FeatureBank::new(data.labels().to_vec(), blocks, PNorm::Two)
}

/// Result of the per-class Procrustes projection.
#[derive(Debug, Clone)]
pub struct OrthonormalProjection {
    pub blocks: Vec<DMatrix<f64>>,
    /// Classes whose input block was numerically rank deficient; their null
    /// directions were completed deterministically from the canonical basis.
    pub rank_deficient: Vec<usize>,
}

/// Projects each block independently onto the orthonormal set: the polar
/// factor U·Vᵀ of its thin SVD, the closest orthonormal system in Frobenius
/// distance. Rank-deficient blocks keep their range part and fill the null
/// directions with canonical basis vectors, lowest index first.
pub fn project_to_orthonormal(blocks: &[DMatrix<f64>]) -> Result<OrthonormalProjection> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut rank_deficient = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let (d, s) = block.shape();
        let svd = block
            .clone()
            .try_svd(true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical(format!("SVD failed on feature block {i}")))?;
        let u = svd.u.as_ref().expect("u requested");
        let v = svd.v_t.as_ref().expect("v_t requested").transpose();
        let sigma = &svd.singular_values;
        let rank = if sigma[0] == 0.0 {
            0
        } else {
            sigma.iter().filter(|x| **x > RANK_REL_TOL * sigma[0]).count()
        };
        if rank == s {
            out.push(u * v.transpose());
        } else {
            rank_deficient.push(i);
            let u1 = u.columns(0, rank);
            let v1 = v.columns(0, rank);
            let w = complete_basis(&u1.into_owned(), d, s - rank)?;
            let z = complete_basis(&v1.into_owned(), s, s - rank)?;
            out.push(u1 * v1.transpose() + w * z.transpose());
        }
    }
    Ok(OrthonormalProjection {
        blocks: out,
        rank_deficient,
    })
}

/// Extends an orthonormal set `basis` (n×k) by `count` further orthonormal
/// columns, drawn from canonical basis vectors in index order.
fn complete_basis(basis: &DMatrix<f64>, n: usize, count: usize) -> Result<DMatrix<f64>> {
    let mut extra = DMatrix::zeros(n, count);
    let mut found = 0;
    for cand in 0..n {
        if found == count {
            break;
        }
        let mut v = DMatrix::zeros(n, 1);
        v[(cand, 0)] = 1.0;
        // two Gram-Schmidt passes against basis and already accepted columns
        for _ in 0..2 {
            let proj = basis * (basis.transpose() * &v);
            v -= proj;
            if found > 0 {
                let accepted = extra.columns(0, found);
                let proj = accepted * (accepted.transpose() * &v);
                v -= proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            extra.column_mut(found).copy_from(&(v.column(0) / norm));
            found += 1;
        }
    }
    if found < count {
        return Err(Error::Numerical(
            "could not complete an orthonormal basis from canonical vectors".into(),
        ));
    }
    Ok(extra)
}

/// Result of one response-set projection.
#[derive(Debug, Clone)]
pub struct ResponseProjection {
    pub blocks: Vec<DMatrix<f64>>,
    /// f₂ value at every evaluated iterate, starting from the initial
    /// projection of the current responses.
    pub objective_trace: Vec<f64>,
    /// f₂ value of the returned iterate; never exceeds the first trace entry.
    pub final_objective: f64,
}

/// Moore-Penrose pseudoinverse with singular values below
/// [`RANK_REL_TOL`]·σ_max treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD for pseudoinverse did not converge".into()))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;
    let cutoff = RANK_REL_TOL * sigma[0];
    let mut inv = DMatrix::zeros(v_t.nrows(), u.ncols());
    for k in 0..sigma.len() {
        if sigma[k] > cutoff {
            inv[(k, k)] = 1.0 / sigma[k];
        }
    }
    Ok(v_t.transpose() * inv * u.transpose())
}

/// f₂(G) = ‖(G − Ĝ)Y†‖²_F and its gradient 2(G − Ĝ)Y†(Y†)ᵀ, with the
/// pseudoinverse factored so only rectangular products are formed.
fn objective_and_residual(
    g: &DMatrix<f64>,
    ghat_pinv: &DMatrix<f64>,
    pinv: &DMatrix<f64>,
) -> (f64, DMatrix<f64>) {
    let residual = g * pinv - ghat_pinv;
    (residual.norm_squared(), residual)
}

/// The smooth objective of the response projection, ‖(G − Ĝ)Y†‖²_F.
pub fn response_objective(g: &DMatrix<f64>, ghat: &DMatrix<f64>, pinv: &DMatrix<f64>) -> f64 {
    objective_and_residual(g, &(ghat * pinv), pinv).0
}

/// Its gradient 2(G − Ĝ)Y†(Y†)ᵀ, exactly as used by the solver.
pub fn response_gradient(
    g: &DMatrix<f64>,
    ghat: &DMatrix<f64>,
    pinv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (_, residual) = objective_and_residual(g, &(ghat * pinv), pinv);
    residual * (2.0 * pinv.transpose())
}

/// Projects the bank toward the response constraint set by forward-backward
/// splitting on ‖(G − Ĝ)Y†‖²_F over G in the constraint set, then recovers
/// the feature matrix solving FᵀY = G as F = (G·Y†)ᵀ.
///
/// Returns the iterate with the smallest objective seen, so the final
/// objective never exceeds the initial one.
pub fn project_to_response_set(
    bank: &FeatureBank,
    data: &ClassDataset,
    cfg: &TrainConfig,
    pinv: &DMatrix<f64>,
) -> Result<ResponseProjection> {
    let beta = cfg.beta();
    let mu = cfg.mu();
    let policy = cfg.step_policy.resolve(cfg.mu_fraction);

    let ghat = ResponseGrid::from_responses(bank.blocks(), data)?;
    let ghat_pinv = ghat.matrix() * pinv;

    let mut grid = project_grid(&ghat, beta, mu, cfg.pnorm);
    let (mut f_cur, mut residual) = objective_and_residual(grid.matrix(), &ghat_pinv, pinv);
    let mut trace = vec![f_cur];
    let mut best_f = f_cur;
    let mut best = grid.clone();

    for iter in 1..=cfg.inner_max_iters {
        let gradient = residual * (2.0 * pinv.transpose());
        let grad_norm = gradient.norm();
        if grad_norm == 0.0 {
            break;
        }
        let gamma = match policy {
            StepPolicy::Conservative => grid.matrix().norm() / (20.0 * grad_norm),
            StepPolicy::Aggressive => 1.0 / grad_norm,
            StepPolicy::Auto => unreachable!("resolved above"),
        };
        let stepped = ResponseGrid::new(
            grid.matrix() - gradient * gamma,
            grid.rank(),
            grid.class_sizes().to_vec(),
        )?;
        let next = project_grid(&stepped, beta, mu, cfg.pnorm);
        let (f_next, res_next) = objective_and_residual(next.matrix(), &ghat_pinv, pinv);
        if !f_next.is_finite() {
            return Err(Error::Numerical(format!(
                "response projection diverged at inner iteration {iter}"
            )));
        }
        trace.push(f_next);
        if f_next < best_f {
            best_f = f_next;
            best = next.clone();
        }
        let stop = f_cur <= 0.0 || (f_cur - f_next) / f_cur < cfg.inner_tol;
        grid = next;
        residual = res_next;
        f_cur = f_next;
        if stop {
            break;
        }
    }

    // F = (G·Y†)ᵀ, sliced back into class blocks.
    let feature_matrix = (best.matrix() * pinv).transpose();
    let s = cfg.rank;
    let blocks = (0..data.class_count())
        .map(|i| feature_matrix.columns(i * s, s).into_owned())
        .collect();
    Ok(ResponseProjection {
        blocks,
        objective_trace: trace,
        final_objective: best_f,
    })
}

fn pair_distance(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn feasibility_of(bank: &FeatureBank, data: &ClassDataset, cfg: &TrainConfig) -> FeasibilityReport {
    let beta = cfg.beta();
    let mu = cfg.mu();
    let mut within = 0.0f64;
    let mut without = 0.0f64;
    for (j, y) in data.classes().iter().enumerate() {
        for i in 0..bank.class_count() {
            let responses = bank.block(i).transpose() * y;
            for k in 0..responses.ncols() {
                let norm = vector_pnorm(responses.column(k).as_slice(), cfg.pnorm);
                if i == j {
                    within = within.max((norm - beta).abs());
                } else {
                    without = without.max((norm - mu).max(0.0));
                }
            }
        }
    }
    FeasibilityReport {
        max_within_deficit: within,
        max_without_excess: without,
    }
}

/// Learns a feature bank by alternating projections. Starting from the
/// spectral initialization, each outer iteration projects the current
/// orthonormal bank toward the response set and back, storing whichever
/// orthonormal iterate achieved the smallest pair distance so far. The
/// returned bank is always a stored orthonormal iterate.
pub fn train(data: &ClassDataset, cfg: &TrainConfig) -> Result<(FeatureBank, TrainReport)> {
    cfg.validate(data.dim())?;
    let overlap_bound = if cfg.rank * data.class_count() > data.dim() {
        Some(grassmann_bound(
            cfg.rank,
            data.dim(),
            Some(data.class_count()),
        ))
    } else {
        None
    };

    let pinv = pseudo_inverse(&data.stacked())?;
    let mut current = init_features(data, cfg.rank)?.with_pnorm(cfg.pnorm);

    let mut best_distance = f64::INFINITY;
    let mut best_bank = current.clone();
    let mut distance_trace = Vec::with_capacity(2 * cfg.outer_iters);
    let mut inner_traces = Vec::with_capacity(cfg.outer_iters);
    let mut degenerate: Vec<usize> = Vec::new();

    for _ in 0..cfg.outer_iters {
        let response = project_to_response_set(&current, data, cfg, &pinv)?;
        inner_traces.push(response.objective_trace);

        let before = pair_distance(current.blocks(), &response.blocks);
        distance_trace.push(before);
        if before < best_distance {
            best_distance = before;
            best_bank = current.clone();
        }

        let ortho = project_to_orthonormal(&response.blocks)?;
        for class in ortho.rank_deficient {
            if !degenerate.contains(&class) {
                degenerate.push(class);
            }
        }
        let next = FeatureBank::new(data.labels().to_vec(), ortho.blocks, cfg.pnorm)?;

        let after = pair_distance(next.blocks(), &response.blocks);
        distance_trace.push(after);
        if after < best_distance {
            best_distance = after;
            best_bank = next.clone();
        }
        current = next;
    }

    degenerate.sort_unstable();
    let feasibility = feasibility_of(&best_bank, data, cfg);
    let report = TrainReport {
        best_distance,
        distance_trace,
        inner_objective_traces: inner_traces,
        feasibility,
        degenerate_classes: degenerate,
        overlap_bound,
    };
    Ok((best_bank, report))
}
