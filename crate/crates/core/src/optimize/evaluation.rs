use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;
use crate::linalg::{pinv_matrix, sm_update_pinv, LaplacianSolver};

/// Largest `n` evaluated exactly under [`Evaluation::Auto`].
const AUTO_EXACT_LIMIT: usize = 3000;
const AUTO_PROBES: usize = 16;
const PROBE_TOL: f64 = 1e-8;

/// How the Kirchhoff index is reported after each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Exact when the graph is small enough, otherwise estimated.
    Auto,
    /// Dense `L†` maintained by rank-one updates.
    Exact,
    /// Hutchinson trace estimate with fixed Rademacher probes.
    Estimate { probes: usize },
    Skip,
}

pub enum Evaluator {
    Exact {
        lp: DMatrix<f64>,
        initial: f64,
    },
    Estimate {
        graph: Graph,
        probes: Vec<Vec<f64>>,
        lambda2: f64,
        initial: f64,
    },
    /// Values supplied by a selector that tracks `L†` itself.
    External {
        initial: f64,
    },
    Skip,
}

impl Evaluator {
    pub fn new(graph: &Graph, mode: Evaluation, dense_limit: usize, seed: u64) -> Result<Self> {
        let mode = match mode {
            Evaluation::Auto if graph.n() <= AUTO_EXACT_LIMIT.min(dense_limit) => Evaluation::Exact,
            Evaluation::Auto => Evaluation::Estimate {
                probes: AUTO_PROBES,
            },
            m => m,
        };
        match mode {
            Evaluation::Exact => {
                if graph.n() > dense_limit {
                    return Err(crate::error::KoptError::DenseLimit {
                        n: graph.n(),
                        limit: dense_limit,
                    });
                }
                let lp = pinv_matrix(graph)?;
                let initial = graph.n() as f64 * lp.trace();
                Ok(Evaluator::Exact { lp, initial })
            }
            Evaluation::Estimate { probes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4b49_5243_484f_4646);
                let probes: Vec<Vec<f64>> = (0..probes.max(1))
                    .map(|_| {
                        (0..graph.n())
                            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                            .collect()
                    })
                    .collect();
                let solver = LaplacianSolver::new(graph)?;
                let lambda2 = solver.lambda2();
                let initial = hutchinson(&solver, &probes)?;
                Ok(Evaluator::Estimate {
                    graph: graph.clone(),
                    probes,
                    lambda2,
                    initial,
                })
            }
            Evaluation::Skip | Evaluation::Auto => Ok(Evaluator::Skip),
        }
    }

    pub fn initial(&self) -> Option<f64> {
        match self {
            Evaluator::Exact { initial, .. }
            | Evaluator::Estimate { initial, .. }
            | Evaluator::External { initial } => Some(*initial),
            Evaluator::Skip => None,
        }
    }

    pub fn is_estimate(&self) -> bool {
        matches!(self, Evaluator::Estimate { .. })
    }

    /// Applies the insertion and returns the new index. An exact value
    /// supplied by the caller replaces the tracked one.
    pub fn add_edge(&mut self, u: usize, v: usize, known: Option<f64>) -> Result<Option<f64>> {
        match self {
            Evaluator::Exact { lp, .. } => {
                let n = lp.nrows() as f64;
                sm_update_pinv(lp, u, v);
                Ok(Some(known.unwrap_or(n * lp.trace())))
            }
            Evaluator::Estimate {
                graph,
                probes,
                lambda2,
                ..
            } => {
                graph.insert_edge(u, v)?;
                let solver = LaplacianSolver::with_lambda2(graph, *lambda2)?;
                Ok(Some(hutchinson(&solver, probes)?))
            }
            Evaluator::External { .. } => Ok(known),
            Evaluator::Skip => Ok(None),
        }
    }
}

/// `n · mean(zᵀ L† z)`.
fn hutchinson(solver: &LaplacianSolver, probes: &[Vec<f64>]) -> Result<f64> {
    let n = probes[0].len() as f64;
    let solved = solver.solve_many(probes, PROBE_TOL)?;
    let total: f64 = probes
        .iter()
        .zip(&solved)
        .map(|(z, (x, _))| z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    Ok(n * total / probes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::oracle;

    #[test]
    fn exact_tracking_matches_recomputation() {
        let g = generators::connected_gnp(40, 0.1, 2);
        let mut ev = Evaluator::new(&g, Evaluation::Exact, 100, 0).unwrap();
        assert!((ev.initial().unwrap() - oracle::kirchhoff_eigen(&g)).abs() < 1e-8);
        let picks: Vec<_> = g.non_edges().step_by(50).take(4).collect();
        let mut k = 0.0;
        for &(u, v) in &picks {
            k = ev.add_edge(u, v, None).unwrap().unwrap();
        }
        let fresh = oracle::kirchhoff_eigen(&g.with_edges(&picks).unwrap());
        assert!((k - fresh).abs() < 1e-7 * fresh);
    }

    #[test]
    fn estimate_is_close_and_monotone() {
        let g = generators::connected_gnp(150, 0.05, 4);
        let exact = oracle::kirchhoff_eigen(&g);
        let mut ev = Evaluator::new(&g, Evaluation::Estimate { probes: 64 }, 100, 1).unwrap();
        assert!(ev.is_estimate());
        let k0 = ev.initial().unwrap();
        assert!((k0 / exact - 1.0).abs() < 0.1);
        let mut prev = k0;
        for (u, v) in g.non_edges().step_by(400).take(5).collect::<Vec<_>>() {
            let k = ev.add_edge(u, v, None).unwrap().unwrap();
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn auto_and_skip() {
        let g = generators::cycle(10);
        assert!(matches!(
            Evaluator::new(&g, Evaluation::Auto, 100, 0).unwrap(),
            Evaluator::Exact { .. }
        ));
        assert!(matches!(
            Evaluator::new(&g, Evaluation::Auto, 5, 0).unwrap(),
            Evaluator::Estimate { .. }
        ));
        let mut s = Evaluator::new(&g, Evaluation::Skip, 100, 0).unwrap();
        assert_eq!(s.initial(), None);
        assert_eq!(s.add_edge(0, 5, None).unwrap(), None);
    }
}
