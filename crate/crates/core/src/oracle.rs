//! Slow, independent reference computations. Each routine takes a different
//! numerical route from the production code it checks, and none of them
//! share state with the selectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::graph::Graph;
use crate::linalg::laplacian_matrix;

/// `L†` from a full eigendecomposition, dropping the zero eigenvalue.
pub fn pinv_eigen(graph: &Graph) -> DMatrix<f64> {
    let n = graph.n();
    let eig = SymmetricEigen::new(laplacian_matrix(graph));
    let mut out = DMatrix::zeros(n, n);
    let cutoff = 1e-9 * eig.eigenvalues.amax().max(1.0);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// `n · Σ 1/λᵢ` over the nonzero Laplacian eigenvalues.
pub fn kirchhoff_eigen(graph: &Graph) -> f64 {
    let ev = SymmetricEigen::new(laplacian_matrix(graph)).eigenvalues;
    let cutoff = 1e-9 * ev.amax().max(1.0);
    graph.n() as f64 * ev.iter().filter(|&&l| l > cutoff).map(|l| 1.0 / l).sum::<f64>()
}

/// Effective resistance by grounding node `v` and solving the reduced
/// system with an LU factorization.
pub fn grounded_resistance(graph: &Graph, u: usize, v: usize) -> f64 {
    if u == v {
        return 0.0;
    }
    let n = graph.n();
    let l = laplacian_matrix(graph);
    let keep: Vec<usize> = (0..n).filter(|&i| i != v).collect();
    let reduced = DMatrix::from_fn(n - 1, n - 1, |i, j| l[(keep[i], keep[j])]);
    let mut rhs = DVector::zeros(n - 1);
    let ui = keep.iter().position(|&i| i == u).expect("u kept");
    rhs[ui] = 1.0;
    let x = reduced.lu().solve(&rhs).expect("reduced Laplacian is nonsingular");
    x[ui]
}

/// `½ Σ_{i≠j} r_ij` with every resistance from a grounded solve.
pub fn kirchhoff_pair_sum(graph: &Graph) -> f64 {
    let n = graph.n();
    let mut total = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            total += grounded_resistance(graph, u, v);
        }
    }
    total
}

/// Hop distance matrix from repeated relaxation (Floyd–Warshall).
pub fn all_pairs_hops(graph: &Graph) -> Vec<Vec<u32>> {
    let n = graph.n();
    let inf = u32::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0;
        for &v in graph.neighbors(u) {
            row[v as usize] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn eccentricities_floyd(graph: &Graph) -> Vec<u32> {
    all_pairs_hops(graph)
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .collect()
}

/// Largest squared distance over all pairs, returned with its
/// lexicographically first pair.
pub fn diameter_sq(points: &[Vec<f64>]) -> (f64, (usize, usize)) {
    let mut best = (0.0, (0, 0));
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist_sq(&points[i], &points[j]);
            if d > best.0 {
                best = (d, (i, j));
            }
        }
    }
    best
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the vertices of the 2-D convex hull (Andrew's monotone
/// chain), sorted ascending. Collinear boundary points are excluded.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        (points[a][0] - points[o][0]) * (points[b][1] - points[o][1])
            - (points[a][1] - points[o][1]) * (points[b][0] - points[o][0])
    };
    let mut hull: Vec<usize> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.sort_unstable();
    hull.dedup();
    hull
}

/// Point `i` is extreme iff it is not a convex combination of the others.
/// Decided by checking containment in every simplex of up to `dim + 1`
/// other points (Carathéodory), for clouds in at most 3 dimensions.
pub fn extreme_points_brute(points: &[Vec<f64>]) -> Vec<usize> {
    let dim = points.first().map_or(0, Vec::len);
    assert!(dim <= 3, "brute-force extreme test supports at most 3 dimensions");
    (0..points.len())
        .filter(|&i| {
            let others: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
            !in_some_simplex(&points[i], points, &others, dim)
        })
        .collect()
}

fn in_some_simplex(p: &[f64], points: &[Vec<f64>], others: &[usize], dim: usize) -> bool {
    let mut chosen = Vec::new();
    subsets_contain(p, points, others, dim + 1, 0, &mut chosen)
}

fn subsets_contain(
    p: &[f64],
    points: &[Vec<f64>],
    others: &[usize],
    max: usize,
    from: usize,
    chosen: &mut Vec<usize>,
) -> bool {
    if !chosen.is_empty() && in_simplex(p, points, chosen) {
        return true;
    }
    if chosen.len() == max {
        return false;
    }
    for k in from..others.len() {
        chosen.push(others[k]);
        if subsets_contain(p, points, others, max, k + 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Barycentric membership test by least squares on the affine system.
fn in_simplex(p: &[f64], points: &[Vec<f64>], verts: &[usize]) -> bool {
    let dim = p.len();
    let k = verts.len();
    // rows: dim coordinates plus the affine constraint
    let a = DMatrix::from_fn(dim + 1, k, |r, c| if r < dim { points[verts[c]][r] } else { 1.0 });
    let mut b = DVector::zeros(dim + 1);
    for r in 0..dim {
        b[r] = p[r];
    }
    b[dim] = 1.0;
    let svd = a.clone().svd(true, true);
    let Ok(w) = svd.solve(&b, 1e-12) else {
        return false;
    };
    let resid = (&a * &w - &b).norm();
    resid < 1e-9 && w.iter().all(|&x| x >= -1e-9)
}
