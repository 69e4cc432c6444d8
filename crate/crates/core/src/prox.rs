//! Closed-form Euclidean projections onto p-norm spheres and balls for
//! p ∈ {1, 2, ∞}, applied column-wise to response grids.

use crate::norms::{vector_pnorm, PNorm};
use crate::types::ResponseGrid;

/// Equality projects onto the sphere {‖g‖_p = radius}, inequality onto the
/// ball {‖g‖_p ≤ radius}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxMode {
    Equality,
    Inequality,
}

/// One per-column projection problem.
#[derive(Debug, Clone, Copy)]
pub struct ProxSpec {
    pub p: PNorm,
    pub mode: ProxMode,
    pub radius: f64,
}

impl ProxSpec {
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        match (self.p, self.mode) {
            (PNorm::One, ProxMode::Equality) => project_l1_sphere(h, self.radius),
            (PNorm::One, ProxMode::Inequality) => project_l1_ball(h, self.radius),
            (PNorm::Two, ProxMode::Equality) => project_l2_sphere(h, self.radius),
            (PNorm::Two, ProxMode::Inequality) => project_l2_ball(h, self.radius),
            (PNorm::Inf, ProxMode::Equality) => project_linf_sphere(h, self.radius),
            (PNorm::Inf, ProxMode::Inequality) => project_linf_ball(h, self.radius),
        }
    }
}

fn sign_or_one(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Nearest point with ‖g‖₂ = β. The zero vector maps to the canonical
/// feasible point β·e₁.
pub fn project_l2_sphere(h: &[f64], beta: f64) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let norm = vector_pnorm(h, PNorm::Two);
    if norm == 0.0 {
        let mut g = vec![0.0; h.len()];
        g[0] = beta;
        return g;
    }
    let scale = beta / norm;
    h.iter().map(|x| x * scale).collect()
}

/// Nearest point with ‖g‖₂ ≤ μ.
pub fn project_l2_ball(h: &[f64], mu: f64) -> Vec<f64> {
    let norm = vector_pnorm(h, PNorm::Two);
    if norm <= mu {
        return h.to_vec();
    }
    if norm == 0.0 {
        return vec![0.0; h.len()];
    }
    let scale = mu / norm;
    h.iter().map(|x| x * scale).collect()
}

/// Nearest point with ‖g‖₁ = β. Inputs inside the sphere inflate every entry
/// by a uniform λ along its sign (zeros count as positive), which is the
/// hyperplane projection within the orthant of h; inputs outside shrink via
/// the sign-preserving soft threshold driven to the sphere.
pub fn project_l1_sphere(h: &[f64], beta: f64) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let norm = vector_pnorm(h, PNorm::One);
    if norm <= beta {
        let lambda = (beta - norm) / h.len() as f64;
        h.iter().map(|x| x + sign_or_one(*x) * lambda).collect()
    } else {
        shrink_to_l1(h, beta)
    }
}

/// Nearest point with ‖g‖₁ ≤ μ (Euclidean projection onto the ℓ1 ball).
pub fn project_l1_ball(h: &[f64], mu: f64) -> Vec<f64> {
    let norm = vector_pnorm(h, PNorm::One);
    if norm <= mu {
        return h.to_vec();
    }
    shrink_to_l1(h, mu)
}

/// Iterative soft shrink: subtract the deficit spread over the current
/// support until ‖g‖₁ lands on `target`. Entries crossing zero are removed
/// from the support, so at most len passes run; the final pass lands exactly.
fn shrink_to_l1(h: &[f64], target: f64) -> Vec<f64> {
    let mut g: Vec<f64> = h.to_vec();
    for _ in 0..=h.len() {
        let nonzero = g.iter().filter(|x| **x != 0.0).count();
        if nonzero == 0 {
            break;
        }
        let norm: f64 = g.iter().map(|x| x.abs()).sum();
        let excess = norm - target;
        if excess <= 1e-14 * (1.0 + target) {
            break;
        }
        let lambda = excess / nonzero as f64;
        for x in g.iter_mut() {
            *x = sign_or_one(*x) * (x.abs() - lambda).max(0.0);
        }
    }
    g
}

/// Nearest point with ‖g‖_∞ = β: clip everything to the ball, then pin the
/// first maximal-magnitude entry to ±β (sign of zero taken positive).
pub fn project_linf_sphere(h: &[f64], beta: f64) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let mut i_max = 0;
    for (i, x) in h.iter().enumerate() {
        if x.abs() > h[i_max].abs() {
            i_max = i;
        }
    }
    let mut g = project_linf_ball(h, beta);
    g[i_max] = sign_or_one(h[i_max]) * beta;
    g
}

/// Nearest point with ‖g‖_∞ ≤ μ: entrywise clip.
pub fn project_linf_ball(h: &[f64], mu: f64) -> Vec<f64> {
    h.iter().map(|x| x.clamp(-mu, mu)).collect()
}

/// Projects a response grid onto the response constraint set: every diagonal
/// block column onto the p-sphere of radius `beta`, every off-diagonal block
/// column onto the p-ball of radius `mu`. Columns are independent.
pub fn project_grid(grid: &ResponseGrid, beta: f64, mu: f64, p: PNorm) -> ResponseGrid {
    let s = grid.rank();
    let classes = grid.class_count();
    let sizes = grid.class_sizes().to_vec();
    let mut matrix = grid.matrix().clone();
    let sphere = ProxSpec {
        p,
        mode: ProxMode::Equality,
        radius: beta,
    };
    let ball = ProxSpec {
        p,
        mode: ProxMode::Inequality,
        radius: mu,
    };
    let mut offset = 0;
    for (j, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let mut column = matrix.column_mut(offset + k);
            let slice = column.as_mut_slice();
            for i in 0..classes {
                let spec = if i == j { sphere } else { ball };
                let rows = &mut slice[i * s..(i + 1) * s];
                let projected = spec.apply(rows);
                rows.copy_from_slice(&projected);
            }
        }
        offset += size;
    }
    ResponseGrid::new(matrix, s, sizes).expect("projection keeps the grid shape")
}
