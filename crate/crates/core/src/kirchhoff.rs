//! Exact Kirchhoff-index quantities from a dense spectral state.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{KoptError, Result};
use crate::graph::Graph;
use crate::linalg::{laplacian_matrix, DenseSpectralState, Laplacian, DEFAULT_DENSE_LIMIT};

/// `K = n · tr(L†)`.
pub fn kirchhoff_index(state: &DenseSpectralState) -> f64 {
    state.n() as f64 * state.lp().trace()
}

fn check_pair(state: &DenseSpectralState, u: usize, v: usize) -> Result<()> {
    let n = state.n();
    if u >= n {
        return Err(KoptError::NodeOutOfRange(u));
    }
    if v >= n {
        return Err(KoptError::NodeOutOfRange(v));
    }
    if u == v {
        return Err(KoptError::SelfPair(u));
    }
    Ok(())
}

pub fn effective_resistance(state: &DenseSpectralState, u: usize, v: usize) -> Result<f64> {
    check_pair(state, u, v)?;
    Ok(state.resistance(u, v))
}

/// Squared biharmonic distance `(e_u − e_v)ᵀ L²† (e_u − e_v)`.
pub fn biharmonic_sq(state: &DenseSpectralState, u: usize, v: usize) -> Result<f64> {
    check_pair(state, u, v)?;
    Ok(state.biharmonic(u, v))
}

/// Drop in `K` from adding the non-edge `(u, v)`:
/// `n · bᵀL²†b / (1 + bᵀL†b)`.
pub fn marginal_decrease(state: &DenseSpectralState, u: usize, v: usize) -> Result<f64> {
    state.check_candidate(u, v)?;
    Ok(delta_unchecked(state, u, v))
}

pub(crate) fn delta_unchecked(state: &DenseSpectralState, u: usize, v: usize) -> f64 {
    state.n() as f64 * state.biharmonic(u, v) / (1.0 + state.resistance(u, v))
}

/// Gradient of `K` in the weight of the non-edge `(u, v)`, without the
/// constant factor `n`: `bᵀL²†b`.
pub fn gradient(state: &DenseSpectralState, u: usize, v: usize) -> Result<f64> {
    state.check_candidate(u, v)?;
    Ok(state.biharmonic(u, v))
}

/// Lower bounds on the submodularity ratio and upper bounds on the
/// curvature of the Kirchhoff decrease, and the greedy guarantee they give.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lambda2: f64,
    pub gamma_lb: f64,
    pub alpha_ub: f64,
    pub ratio_lb: f64,
    /// True when `lambda2` came from Lanczos rather than a full eigensolve.
    pub estimated: bool,
}

impl BoundReport {
    pub fn from_lambda2(n: usize, lambda2: f64, estimated: bool) -> Self {
        let gamma = (lambda2 / n as f64).powi(2).min(1.0);
        let alpha = 1.0 - gamma;
        BoundReport {
            lambda2,
            gamma_lb: gamma,
            alpha_ub: alpha,
            ratio_lb: guarantee_ratio(alpha, gamma),
            estimated,
        }
    }
}

/// `(1 − e^{−αγ}) / α`, with its limit `γ` at `α = 0`.
pub fn guarantee_ratio(alpha: f64, gamma: f64) -> f64 {
    if alpha <= 1e-12 {
        gamma
    } else {
        -(-alpha * gamma).exp_m1() / alpha
    }
}

/// Bound report with exact `λ₂` for graphs within the dense limit.
pub fn spectral_bounds(graph: &Graph) -> Result<BoundReport> {
    spectral_bounds_with_limit(graph, DEFAULT_DENSE_LIMIT)
}

pub fn spectral_bounds_with_limit(graph: &Graph, limit: usize) -> Result<BoundReport> {
    graph.require_connected()?;
    let n = graph.n();
    if n > limit {
        return Err(KoptError::DenseLimit { n, limit });
    }
    if n == 1 {
        return Ok(BoundReport::from_lambda2(1, 1.0, false));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(laplacian_matrix(graph))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(BoundReport::from_lambda2(n, ev[1], false))
}

/// Bound report from a Lanczos estimate of `λ₂`, for graphs beyond the
/// dense limit.
pub fn estimated_spectral_bounds(graph: &Graph, steps: usize, seed: u64) -> Result<BoundReport> {
    graph.require_connected()?;
    let lambda2 = crate::linalg::estimate_lambda2(&Laplacian::new(graph), steps, seed);
    Ok(BoundReport::from_lambda2(graph.n(), lambda2, true))
}
