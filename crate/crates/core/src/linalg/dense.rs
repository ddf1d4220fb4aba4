use nalgebra::DMatrix;

use crate::error::{KoptError, Result};
use crate::graph::Graph;

/// Largest node count accepted by the dense backend unless overridden.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

pub fn laplacian_matrix(graph: &Graph) -> DMatrix<f64> {
    let n = graph.n();
    let mut l = DMatrix::zeros(n, n);
    for u in 0..n {
        l[(u, u)] = graph.degree(u) as f64;
    }
    for (u, v) in graph.edges() {
        l[(u, v)] = -1.0;
        l[(v, u)] = -1.0;
    }
    l
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `L† = (L + J/n)^-1 - J/n` through a Cholesky factorization of the
/// (positive definite, for connected graphs) shifted Laplacian.
pub fn pinv_matrix(graph: &Graph) -> Result<DMatrix<f64>> {
    graph.require_connected()?;
    let n = graph.n();
    let shift = 1.0 / n as f64;
    let mut a = laplacian_matrix(graph);
    a.iter_mut().for_each(|x| *x += shift);
    let chol = a
        .cholesky()
        .ok_or_else(|| {
            KoptError::InvalidParameter("shifted Laplacian is not positive definite".into())
        })?;
    let mut inv = chol.inverse();
    inv.iter_mut().for_each(|x| *x -= shift);
    symmetrize(&mut inv);
    Ok(inv)
}

/// Exact `L†` and `L²†` for the current graph, kept consistent under edge
/// insertions by Sherman–Morrison updates.
#[derive(Clone, Debug)]
pub struct DenseSpectralState {
    graph: Graph,
    lp: DMatrix<f64>,
    lp2: DMatrix<f64>,
}

pub fn pseudo_inverse(graph: &Graph) -> Result<DenseSpectralState> {
    pseudo_inverse_with_limit(graph, DEFAULT_DENSE_LIMIT)
}

pub fn pseudo_inverse_with_limit(graph: &Graph, limit: usize) -> Result<DenseSpectralState> {
    if graph.n() > limit {
        return Err(KoptError::DenseLimit {
            n: graph.n(),
            limit,
        });
    }
    let lp = pinv_matrix(graph)?;
    let mut lp2 = &lp * &lp;
    symmetrize(&mut lp2);
    Ok(DenseSpectralState {
        graph: graph.clone(),
        lp,
        lp2,
    })
}

impl DenseSpectralState {
    /// Assembles a state from externally computed matrices. No consistency
    /// check is made; verification hooks use this to inject perturbations.
    pub fn from_parts(graph: Graph, lp: DMatrix<f64>, lp2: DMatrix<f64>) -> Self {
        assert_eq!(lp.shape(), (graph.n(), graph.n()));
        assert_eq!(lp2.shape(), (graph.n(), graph.n()));
        DenseSpectralState { graph, lp, lp2 }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lp(&self) -> &DMatrix<f64> {
        &self.lp
    }

    pub fn lp2(&self) -> &DMatrix<f64> {
        &self.lp2
    }

    /// `b_eᵀ L† b_e` for `e = (u, v)`.
    pub fn resistance(&self, u: usize, v: usize) -> f64 {
        quad_form(&self.lp, u, v)
    }

    /// `b_eᵀ L²† b_e` for `e = (u, v)`.
    pub fn biharmonic(&self, u: usize, v: usize) -> f64 {
        quad_form(&self.lp2, u, v)
    }

    pub(crate) fn check_candidate(&self, u: usize, v: usize) -> Result<()> {
        let n = self.n();
        if u >= n {
            return Err(KoptError::NodeOutOfRange(u));
        }
        if v >= n {
            return Err(KoptError::NodeOutOfRange(v));
        }
        if u == v {
            return Err(KoptError::SelfPair(u));
        }
        if self.graph.has_edge(u, v) {
            return Err(KoptError::EdgeExists(u.min(v), u.max(v)));
        }
        Ok(())
    }

    /// Adds edge `(u, v)`: updates `L²†` and then `L†`, both from the
    /// pre-insertion `L†`.
    pub fn insert_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_candidate(u, v)?;
        let denom = 1.0 + self.resistance(u, v);
        if !(denom > 0.0) {
            return Err(KoptError::Denominator(denom));
        }
        sm_update_pinv2(&mut self.lp2, &self.lp, u, v);
        sm_update_pinv(&mut self.lp, u, v);
        self.graph.insert_edge(u, v)?;
        Ok(())
    }
}

fn quad_form(m: &DMatrix<f64>, u: usize, v: usize) -> f64 {
    m[(u, u)] + m[(v, v)] - m[(u, v)] - m[(v, u)]
}

fn difference_column(m: &DMatrix<f64>, u: usize, v: usize) -> Vec<f64> {
    m.column(u)
        .iter()
        .zip(m.column(v).iter())
        .map(|(a, b)| a - b)
        .collect()
}

/// `L† ← L† − L† b bᵀ L† / (1 + bᵀ L† b)`, `b = e_u − e_v`. Returns the
/// denominator.
pub fn sm_update_pinv(lp: &mut DMatrix<f64>, u: usize, v: usize) -> f64 {
    let w = difference_column(lp, u, v);
    let denom = 1.0 + w[u] - w[v];
    let n = lp.nrows();
    for j in 0..n {
        let f = w[j] / denom;
        if f == 0.0 {
            continue;
        }
        let mut col = lp.column_mut(j);
        for i in 0..n {
            col[i] -= w[i] * f;
        }
    }
    denom
}

/// Rank-two update of `L²†` for the insertion of `(u, v)`. `lp` must be the
/// pseudoinverse *before* the insertion.
pub fn sm_update_pinv2(lp2: &mut DMatrix<f64>, lp: &DMatrix<f64>, u: usize, v: usize) {
    let w = difference_column(lp, u, v);
    let s = difference_column(lp2, u, v);
    let c = 1.0 + w[u] - w[v];
    let q = s[u] - s[v];
    let a = q / (c * c);
    let n = lp2.nrows();
    for j in 0..n {
        let fw = a * w[j] - s[j] / c;
        let fs = w[j] / c;
        let mut col = lp2.column_mut(j);
        for i in 0..n {
            col[i] += w[i] * fw - s[i] * fs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn path3_pseudoinverse_closed_form() {
        let lp = pinv_matrix(&generators::path(3)).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[5.0, -1.0, -4.0, -1.0, 2.0, -1.0, -4.0, -1.0, 5.0],
        ) / 9.0;
        assert!(max_abs_diff(&lp, &expected) < 1e-12);
    }

    #[test]
    fn triangle_pseudoinverse_closed_form() {
        let lp = pinv_matrix(&generators::complete(3)).unwrap();
        let expected = (DMatrix::identity(3, 3) * 3.0 - DMatrix::from_element(3, 3, 1.0)) / 9.0;
        assert!(max_abs_diff(&lp, &expected) < 1e-12);
        let l = laplacian_matrix(&generators::complete(3));
        assert!(max_abs_diff(&(&l * &lp * &l), &l) < 1e-12);
    }

    #[test]
    fn state_invariants_on_random_graphs() {
        for seed in 0..5 {
            let g = generators::connected_gnp(30, 0.15, seed);
            let st = pseudo_inverse(&g).unwrap();
            let (lp, lp2) = (st.lp(), st.lp2());
            assert!(max_abs_diff(lp, &lp.transpose()) < 1e-9);
            assert!(max_abs_diff(lp2, &lp2.transpose()) < 1e-9);
            for i in 0..g.n() {
                assert!(lp.row(i).sum().abs() < 1e-8);
                assert!(lp2.row(i).sum().abs() < 1e-8);
            }
            assert!(max_abs_diff(lp2, &(lp * lp)) < 1e-7);
            let l = laplacian_matrix(&g);
            assert!(max_abs_diff(&(&l * lp * &l), &l) < 1e-7);
            let ev = lp.clone().symmetric_eigenvalues();
            assert!(ev.iter().all(|&x| x > -1e-10));
        }
    }

    #[test]
    fn disconnected_and_limit_errors() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(pseudo_inverse(&g), Err(KoptError::Disconnected { .. })));
        let g = generators::path(10);
        assert!(matches!(
            pseudo_inverse_with_limit(&g, 5),
            Err(KoptError::DenseLimit { n: 10, limit: 5 })
        ));
    }

    #[test]
    fn path3_update_gives_triangle() {
        let mut st = pseudo_inverse(&generators::path(3)).unwrap();
        assert_relative_eq!(1.0 + st.resistance(0, 2), 3.0, epsilon = 1e-12);
        let k_before = st.lp().trace();
        st.insert_edge(0, 2).unwrap();
        let k3 = pinv_matrix(&generators::complete(3)).unwrap();
        assert!(max_abs_diff(st.lp(), &k3) < 1e-12);
        assert!(max_abs_diff(st.lp2(), &(&k3 * &k3)) < 1e-12);
        assert!(st.lp().trace() < k_before);
        assert!(matches!(st.insert_edge(2, 0), Err(KoptError::EdgeExists(0, 2))));
    }

    #[test]
    fn single_update_matches_fresh_pseudoinverse() {
        for seed in 0..20 {
            let g = generators::connected_gnp(15, 0.25, 100 + seed);
            let (u, v) = g.non_edges().nth(seed as usize % g.candidate_count()).unwrap();
            let mut st = pseudo_inverse(&g).unwrap();
            st.insert_edge(u, v).unwrap();
            let fresh = oracle::pinv_eigen(&g.with_edge(u, v).unwrap());
            assert!(max_abs_diff(st.lp(), &fresh) <= 1e-8);
        }
    }

    #[test]
    fn sequential_updates_drift_stays_small() {
        for seed in 0..20 {
            let g = generators::connected_gnp(15, 0.25, 200 + seed);
            let mut st = pseudo_inverse(&g).unwrap();
            let picks: Vec<_> = g.non_edges().step_by(3).take(5).collect();
            for &(u, v) in &picks {
                st.insert_edge(u, v).unwrap();
            }
            let fresh = oracle::pinv_eigen(&g.with_edges(&picks).unwrap());
            assert!(max_abs_diff(st.lp(), &fresh) <= 1e-6);
            assert!(max_abs_diff(st.lp2(), &(&fresh * &fresh)) <= 1e-6);
        }
    }
}
