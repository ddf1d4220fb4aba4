use crate::error::{KoptError, Result};
use crate::graph::{eccentricities, prune_central_nodes, Graph};
use crate::hull::{approx_convex_hull, farthest_pair, ExtremeSubset, PointCloud};
use crate::linalg::LaplacianSolver;
use crate::sketch::{embed_nodes_cached, update_embedding, EmbeddingSketch, SolverTolerance};

use super::{check_budget, round_seed, AlgoParams, Algorithm, Diagnostics, Recorder, SelectionResult};

/// Halvings of `μ` tried when every member pair is already an edge.
const HULL_RETRIES: usize = 3;

struct Setup {
    lambda2: f64,
    tol: SolverTolerance,
    tol0: f64,
    diag: Diagnostics,
}

fn setup(graph: &Graph, params: &AlgoParams) -> Result<Setup> {
    check_budget(graph, params)?;
    let n = graph.n();
    let lambda2 = LaplacianSolver::new(graph)?.lambda2();
    let tol = params.tolerance.resolve(n, params.beta, params.delta);
    let diag = Diagnostics {
        jl_rows: Some(crate::linalg::jl_rows(n, params.beta, params.c_jl)),
        solver_tol: Some(tol.value),
        solver_tol_raw: Some(tol.raw),
        solver_tol_floored: tol.floored,
        lambda2_estimate: Some(lambda2),
        ..Diagnostics::default()
    };
    Ok(Setup {
        lambda2,
        tol,
        tol0: tol.value.min(1e-8),
        diag,
    })
}

fn embed(g: &Graph, solver: &LaplacianSolver, params: &AlgoParams, tol: f64, seed: u64) -> Result<EmbeddingSketch> {
    embed_nodes_cached(g, solver, params.beta, tol, seed, params.c_jl, params.cache_dir.as_deref())
}

/// Hull of `ids` under the current embedding, then the farthest member pair
/// that is not an edge of `g`. Halves `μ` when every pair is excluded.
fn hull_and_pair(
    g: &Graph,
    x: &EmbeddingSketch,
    ids: &[usize],
    mu: f64,
    diag: &mut Diagnostics,
) -> Result<(usize, usize, f64)> {
    let cloud = PointCloud::from_node_major(ids.to_vec(), x.t(), x.data());
    let mut mu = mu;
    for attempt in 0..=HULL_RETRIES {
        let hull = approx_convex_hull(&cloud, mu)?;
        diag.hull_sizes.push(hull.len());
        diag.hull_capped |= hull.capped;
        match farthest_pair(&cloud, &hull, |u, v| g.has_edge(u, v)) {
            Ok(p) => return Ok(p),
            Err(KoptError::HullExhausted) if attempt < HULL_RETRIES => {
                diag.hull_retries += 1;
                mu /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(KoptError::HullExhausted)
}

/// Per round: a fresh projection and embedding, an approximate hull of all
/// nodes and its farthest valid pair.
pub fn fast_grad(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    let Setup {
        lambda2, tol, mut diag, ..
    } = setup(graph, params)?;
    let mut rec = Recorder::new(graph, params)?;
    let all: Vec<usize> = (0..graph.n()).collect();
    let mut g = graph.clone();
    rec.setup_done();
    for round in 0..params.k as u64 {
        let solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
        let x = embed(&g, &solver, params, tol.value, round_seed(params.seed, round))?;
        diag.solver_iterations += x.solver_iterations();
        let (u, v, d) = hull_and_pair(&g, &x, &all, params.mu, &mut diag)?;
        drop(x);
        g.insert_edge(u, v)?;
        rec.record(u, v, d, None)?;
    }
    Ok(rec.finish(Algorithm::FastGrad, params, diag))
}

/// One embedding, updated by rank-one corrections; the hull is recomputed
/// each round over the nodes kept by eccentricity pruning.
pub fn fast_grad_plus(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    let Setup {
        lambda2,
        tol,
        tol0,
        mut diag,
    } = setup(graph, params)?;
    let mut rec = Recorder::new(graph, params)?;
    let mut ids: Vec<usize> = if params.prune {
        prune_central_nodes(graph, &eccentricities(graph)?)
    } else {
        (0..graph.n()).collect()
    };
    diag.prune_size = Some(ids.len());
    let mut g = graph.clone();
    let mut solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
    let mut x = embed(&g, &solver, params, tol.value, params.seed)?;
    diag.solver_iterations += x.solver_iterations();
    rec.setup_done();
    for _ in 0..params.k {
        let (u, v, d) = match hull_and_pair(&g, &x, &ids, params.mu, &mut diag) {
            Err(KoptError::HullExhausted) if ids.len() < g.n() => {
                // columns outside the pruned set are stale, so start over
                ids = (0..g.n()).collect();
                diag.prune_widened = true;
                x = embed(&g, &solver, params, tol.value, params.seed)?;
                diag.solver_iterations += x.solver_iterations();
                hull_and_pair(&g, &x, &ids, params.mu, &mut diag)?
            }
            r => r?,
        };
        update_embedding(&mut x, &g, &solver, (u, v), tol0, Some(&ids))?;
        g.insert_edge(u, v)?;
        solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
        rec.record(u, v, d, None)?;
    }
    Ok(rec.finish(Algorithm::FastGradPlus, params, diag))
}

/// One embedding and one hull over all nodes; each round takes the
/// farthest valid member pair and updates the member coordinates.
pub fn one_conv(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    let Setup {
        lambda2,
        tol,
        tol0,
        mut diag,
    } = setup(graph, params)?;
    let mut rec = Recorder::new(graph, params)?;
    let all: Vec<usize> = (0..graph.n()).collect();
    let mut g = graph.clone();
    let mut solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
    let mut x = embed(&g, &solver, params, tol.value, params.seed)?;
    diag.solver_iterations += x.solver_iterations();
    let hull: ExtremeSubset = {
        let cloud = PointCloud::from_node_major(all.clone(), x.t(), x.data());
        approx_convex_hull(&cloud, params.mu)?
    };
    diag.hull_sizes.push(hull.len());
    diag.hull_capped |= hull.capped;
    let mut members = hull.members.clone();
    members.sort_unstable();
    rec.setup_done();
    for _ in 0..params.k {
        let (u, v, d) = {
            let cloud = PointCloud::from_node_major(all.clone(), x.t(), x.data());
            farthest_pair(&cloud, &hull, |a, b| g.has_edge(a, b))?
        };
        update_embedding(&mut x, &g, &solver, (u, v), tol0, Some(&members))?;
        g.insert_edge(u, v)?;
        solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
        rec.record(u, v, d, None)?;
    }
    Ok(rec.finish(Algorithm::OneConv, params, diag))
}
