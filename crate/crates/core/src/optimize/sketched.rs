use crate::error::{KoptError, Result};
use crate::graph::Graph;
use crate::linalg::{jl_rows, LaplacianSolver};
use crate::sketch::{build_resistance_sketch_with, embed_nodes_with};

use super::{best_non_edge, check_budget, round_seed, AlgoParams, Algorithm, Diagnostics, Recorder, SelectionResult};

/// Greedy on sketched marginal decreases `n · b̃ / (1 + r̃)`. Each round
/// builds fresh resistance and biharmonic sketches at accuracy `ε/2`.
pub fn approx_greedy(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    check_budget(graph, params)?;
    let n = graph.n();
    let eps = params.epsilon / 2.0;
    let mut rec = Recorder::new(graph, params)?;
    let lambda2 = LaplacianSolver::new(graph)?.lambda2();
    let tol = params.tolerance.resolve(n, eps / 2.0, eps / 2.0);
    let mut diag = Diagnostics {
        jl_rows: Some(jl_rows(n, eps / 2.0, params.c_jl)),
        solver_tol: Some(tol.value),
        solver_tol_raw: Some(tol.raw),
        solver_tol_floored: tol.floored,
        lambda2_estimate: Some(lambda2),
        ..Diagnostics::default()
    };
    let mut g = graph.clone();
    rec.setup_done();
    for round in 0..params.k as u64 {
        let solver = LaplacianSolver::with_lambda2(&g, lambda2)?;
        let seed = round_seed(params.seed, round);
        let rs = build_resistance_sketch_with(&g, &solver, eps, seed, params.c_jl, tol.value)?;
        let bs = embed_nodes_with(&solver, n, eps / 2.0, tol.value, seed ^ 0xB1A5, params.c_jl)?;
        diag.solver_iterations += rs.solver_iterations() + bs.solver_iterations();
        let nf = n as f64;
        let (u, v, s) = best_non_edge(&g, |u, v| {
            let b = bs.query(u, v).unwrap_or(0.0);
            nf * b / (1.0 + rs.query_unchecked(u, v))
        })
        .ok_or(KoptError::BudgetTooLarge {
            k: params.k,
            candidates: graph.candidate_count(),
        })?;
        g.insert_edge(u, v)?;
        rec.record(u, v, s, None)?;
    }
    Ok(rec.finish(Algorithm::Approx, params, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::kirchhoff::marginal_decrease;
    use crate::linalg::pseudo_inverse;

    #[test]
    fn path3_forced_choice() {
        let r = approx_greedy(&generators::path(3), &AlgoParams::from_epsilon(1, 0.5, 3)).unwrap();
        assert_eq!(r.edges(), vec![(0, 2)]);
    }

    #[test]
    fn sketched_delta_is_close_to_exact() {
        let g = generators::connected_gnp(60, 0.08, 12);
        let eps = 0.3;
        let r = approx_greedy(&g, &AlgoParams::from_epsilon(3, eps, 1)).unwrap();
        let mut cur = g.clone();
        for step in &r.steps {
            let st = pseudo_inverse(&cur).unwrap();
            let exact = marginal_decrease(&st, step.edge.0, step.edge.1).unwrap();
            assert!((step.score / exact - 1.0).abs() <= eps, "{} vs {}", step.score, exact);
            let best = cur
                .non_edges()
                .map(|(u, v)| marginal_decrease(&st, u, v).unwrap())
                .fold(0.0, f64::max);
            assert!(exact >= (1.0 - eps) / (1.0 + eps) * best);
            cur = cur.with_edge(step.edge.0, step.edge.1).unwrap();
        }
    }

    #[test]
    fn same_seed_same_edges() {
        let g = generators::connected_gnp(40, 0.1, 2);
        let p = AlgoParams::from_epsilon(3, 0.4, 77);
        assert_eq!(approx_greedy(&g, &p).unwrap().edges(), approx_greedy(&g, &p).unwrap().edges());
    }
}
