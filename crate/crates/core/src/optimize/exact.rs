use crate::error::{KoptError, Result};
use crate::graph::Graph;
use crate::kirchhoff::{delta_unchecked, kirchhoff_index};
use crate::linalg::{pinv_matrix, pseudo_inverse_with_limit, DenseSpectralState};

use super::{best_non_edge, check_budget, AlgoParams, Algorithm, Diagnostics, Recorder, SelectionResult};

/// Most subsets the exhaustive search will evaluate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(x) => acc = x / (i + 1) as u128,
            None => return u128::MAX,
        }
    }
    acc
}

fn dense_kirchhoff(graph: &Graph) -> Result<f64> {
    Ok(graph.n() as f64 * pinv_matrix(graph)?.trace())
}

/// Optimal `k`-subset of non-edges by exhaustive search, each subset scored
/// from a fresh factorization. Ties keep the lexicographically first subset.
pub fn brute_force(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    check_budget(graph, params)?;
    let candidates: Vec<(usize, usize)> = graph.non_edges().collect();
    let k = params.k;
    let subsets = binomial(candidates.len(), k);
    if subsets > BRUTE_FORCE_LIMIT {
        return Err(KoptError::BruteForceLimit {
            subsets,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let initial = dense_kirchhoff(graph)?;
    let mut rec = Recorder::with_known(graph, params, initial);
    rec.setup_done();

    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    loop {
        let chosen: Vec<(usize, usize)> = idx.iter().map(|&i| candidates[i]).collect();
        let value = dense_kirchhoff(&graph.with_edges(&chosen)?)?;
        evaluated += 1;
        let better = match &best {
            None => true,
            Some((b, _)) => value < b - 1e-9 * b.abs(),
        };
        if better {
            best = Some((value, idx.clone()));
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && idx[i - 1] == candidates.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }

    let (_, chosen) = best.expect("at least one subset");
    let mut g = graph.clone();
    let mut prev = initial;
    for &c in &chosen {
        let (u, v) = candidates[c];
        g.insert_edge(u, v)?;
        let value = dense_kirchhoff(&g)?;
        rec.record(u, v, prev - value, Some(value))?;
        prev = value;
    }
    let diagnostics = Diagnostics {
        subsets_evaluated: Some(evaluated),
        ..Diagnostics::default()
    };
    Ok(rec.finish(Algorithm::Brute, params, diagnostics))
}

fn dense_greedy(
    graph: &Graph,
    params: &AlgoParams,
    algo: Algorithm,
    score: impl Fn(&DenseSpectralState, usize, usize) -> f64 + Sync,
) -> Result<SelectionResult> {
    check_budget(graph, params)?;
    let mut state = pseudo_inverse_with_limit(graph, params.dense_limit)?;
    let mut rec = Recorder::with_known(graph, params, kirchhoff_index(&state));
    rec.setup_done();
    for _ in 0..params.k {
        let (u, v, s) = {
            let st = &state;
            best_non_edge(st.graph(), |u, v| score(st, u, v)).ok_or(KoptError::BudgetTooLarge {
                k: params.k,
                candidates: graph.candidate_count(),
            })?
        };
        state.insert_edge(u, v)?;
        rec.record(u, v, s, Some(kirchhoff_index(&state)))?;
    }
    Ok(rec.finish(algo, params, Diagnostics::default()))
}

/// Greedy on the exact marginal decrease, maintaining `L†` and `L²†`.
pub fn deter(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    dense_greedy(graph, params, Algorithm::Deter, delta_unchecked)
}

/// Greedy on the exact gradient `bᵀL²†b`.
pub fn grad(graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    dense_greedy(graph, params, Algorithm::Grad, |st, u, v| st.biharmonic(u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::kirchhoff::spectral_bounds;
    use crate::oracle;

    fn params(k: usize) -> AlgoParams {
        AlgoParams::from_epsilon(k, 0.3, 0)
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(15, 3), 455);
        assert_eq!(binomial(4, 4), 1);
        assert!(binomial(5000, 4) > BRUTE_FORCE_LIMIT);
    }

    #[test]
    fn brute_force_examples() {
        let r = brute_force(&generators::path(3), &params(1)).unwrap();
        assert_eq!(r.edges(), vec![(0, 2)]);
        assert!((r.initial_kirchhoff.unwrap() - 4.0).abs() < 1e-10);
        assert!((r.final_kirchhoff().unwrap() - 2.0).abs() < 1e-10);
        let r = brute_force(&generators::path(4), &params(1)).unwrap();
        assert_eq!(r.edges(), vec![(0, 3)]);
        let r = brute_force(&generators::star(4), &params(1)).unwrap();
        assert_eq!(r.edges(), vec![(1, 2)]);
        assert_eq!(r.diagnostics.subsets_evaluated, Some(3));
    }

    #[test]
    fn brute_force_guard() {
        let g = generators::path(60);
        assert!(matches!(brute_force(&g, &params(4)), Err(KoptError::BruteForceLimit { .. })));
    }

    #[test]
    fn deter_on_path3() {
        let r = deter(&generators::path(3), &params(1)).unwrap();
        assert_eq!(r.edges(), vec![(0, 2)]);
        assert!((r.steps[0].score - 2.0).abs() < 1e-10);
        assert!((r.steps[0].kirchhoff.unwrap() - 2.0).abs() < 1e-10);
        let r = grad(&generators::path(3), &params(1)).unwrap();
        assert_eq!(r.edges(), vec![(0, 2)]);
    }

    /// Greedy that refactors the augmented graph for every candidate.
    fn scratch_greedy(graph: &Graph, k: usize) -> Vec<(usize, usize)> {
        let mut g = graph.clone();
        let mut out = Vec::new();
        for _ in 0..k {
            let base = oracle::kirchhoff_eigen(&g);
            let mut best: Option<(f64, (usize, usize))> = None;
            for (u, v) in g.non_edges() {
                let d = base - oracle::kirchhoff_eigen(&g.with_edge(u, v).unwrap());
                if best.map_or(true, |(b, _)| d > b * (1.0 + 1e-9)) {
                    best = Some((d, (u, v)));
                }
            }
            let (_, (u, v)) = best.unwrap();
            g = g.with_edge(u, v).unwrap();
            out.push((u, v));
        }
        out
    }

    #[test]
    fn deter_matches_scratch_greedy() {
        assert_eq!(deter(&generators::cycle(5), &params(2)).unwrap().edges(), scratch_greedy(&generators::cycle(5), 2));
        for seed in 0..5 {
            let g = generators::connected_gnp(14, 0.2, seed);
            assert_eq!(deter(&g, &params(3)).unwrap().edges(), scratch_greedy(&g, 3));
        }
    }

    #[test]
    fn grad_picks_exact_biharmonic_maximum() {
        let g = generators::connected_gnp(30, 0.12, 8);
        let r = grad(&g, &params(4)).unwrap();
        let mut cur = g.clone();
        for step in &r.steps {
            let lp = oracle::pinv_eigen(&cur);
            let bih = |u: usize, v: usize| -> f64 { (0..cur.n()).map(|i| (lp[(i, u)] - lp[(i, v)]).powi(2)).sum() };
            let max = cur.non_edges().map(|(u, v)| bih(u, v)).fold(0.0, f64::max);
            assert!(bih(step.edge.0, step.edge.1) >= max * (1.0 - 1e-9));
            cur = cur.with_edge(step.edge.0, step.edge.1).unwrap();
        }
    }

    #[test]
    fn deter_meets_guarantee_on_small_graphs() {
        for seed in 0..10 {
            let g = generators::connected_gnp(7, 0.35, seed);
            let bounds = spectral_bounds(&g).unwrap();
            for k in 1..=3.min(g.candidate_count()) {
                let d = deter(&g, &params(k)).unwrap();
                let b = brute_force(&g, &params(k)).unwrap();
                let k0 = d.initial_kirchhoff.unwrap();
                let gain = k0 - d.final_kirchhoff().unwrap();
                let best = k0 - b.final_kirchhoff().unwrap();
                assert!(gain >= bounds.ratio_lb * best - 1e-9);
                assert!(gain <= best + 1e-9);
            }
        }
    }

    #[test]
    fn full_budget_returns_every_candidate() {
        let g = generators::path(4);
        let r = deter(&g, &params(3)).unwrap();
        let mut e = r.edges();
        e.sort_unstable();
        assert_eq!(e, vec![(0, 2), (0, 3), (1, 3)]);
    }
}
