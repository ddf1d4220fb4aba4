//! Jacobi-preconditioned conjugate gradients on `L` restricted to `𝟙⊥`.
//!
//! Stopping rule: with `e = x − L†b` and residual `r = b − Lx`,
//! `‖e‖_L ≤ ‖r‖₂ / √λ₂`, and `‖L†b‖_L ≥ ‖x‖_L − ‖e‖_L`. Iteration stops once
//! `η (1 + tol) ≤ tol ‖x‖_L` with `η = ‖r‖₂ / √λ̂₂`, which certifies
//! `‖e‖_L ≤ tol ‖L†b‖_L` whenever `λ̂₂ ≤ λ₂`. `λ̂₂` is half of a Lanczos
//! Ritz estimate, and `‖x‖_L² = xᵀ(b − r)` costs one dot product.
//!
//! Several right-hand sides are solved in lockstep with node-major
//! interleaved storage so that one sweep over the adjacency serves a whole
//! block.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{KoptError, Result};
use crate::graph::Graph;

/// Tolerances below this are raised to it.
pub const SOLVER_TOL_FLOOR: f64 = 1e-10;

const BLOCK: usize = 8;
const LANCZOS_STEPS: usize = 80;
const LAMBDA2_SAFETY: f64 = 0.5;

/// Compressed adjacency of a graph, applied as `L = D − A`.
#[derive(Clone, Debug)]
pub struct Laplacian {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    degree: Vec<f64>,
}

impl Laplacian {
    pub fn new(graph: &Graph) -> Self {
        let n = graph.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * graph.m());
        offsets.push(0);
        for u in 0..n {
            targets.extend_from_slice(graph.neighbors(u));
            offsets.push(targets.len());
        }
        let degree = (0..n).map(|u| graph.degree(u) as f64).collect();
        Laplacian {
            offsets,
            targets,
            degree,
        }
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn max_degree(&self) -> f64 {
        self.degree.iter().copied().fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_block::<1>(x, y);
    }

    fn apply_block<const B: usize>(&self, x: &[f64], y: &mut [f64]) {
        const ROWS: usize = 2048;
        y.par_chunks_mut(ROWS * B)
            .enumerate()
            .for_each(|(chunk, out)| {
                let first = chunk * ROWS;
                for (r, yi) in out.chunks_exact_mut(B).enumerate() {
                    let i = first + r;
                    let d = self.degree[i];
                    let mut acc = [0.0; B];
                    let xi = &x[i * B..i * B + B];
                    for c in 0..B {
                        acc[c] = d * xi[c];
                    }
                    for &j in &self.targets[self.offsets[i]..self.offsets[i + 1]] {
                        let j = j as usize * B;
                        let xj = &x[j..j + B];
                        for c in 0..B {
                            acc[c] -= xj[c];
                        }
                    }
                    yi.copy_from_slice(&acc);
                }
            });
    }
}

/// Per-solve diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Certified relative L-norm error bound at exit.
    pub bound: f64,
}

/// Reusable solver for one graph.
#[derive(Clone, Debug)]
pub struct LaplacianSolver {
    lap: Laplacian,
    lambda2: f64,
    max_iter: usize,
}

impl LaplacianSolver {
    /// Builds the operator and estimates `λ₂` by Lanczos.
    pub fn new(graph: &Graph) -> Result<Self> {
        graph.require_connected()?;
        let lap = Laplacian::new(graph);
        let lambda2 = LAMBDA2_SAFETY * estimate_lambda2(&lap, LANCZOS_STEPS, 0x5eed);
        Ok(Self::from_parts(lap, lambda2))
    }

    /// Reuses a known lower estimate of `λ₂`. Adding edges never lowers
    /// `λ₂`, so an estimate made before insertions stays valid after them.
    pub fn with_lambda2(graph: &Graph, lambda2: f64) -> Result<Self> {
        graph.require_connected()?;
        Ok(Self::from_parts(Laplacian::new(graph), lambda2))
    }

    fn from_parts(lap: Laplacian, lambda2: f64) -> Self {
        let lambda2 = lambda2.max(f64::MIN_POSITIVE);
        let kappa = 2.0 * lap.max_degree().max(1.0) / lambda2;
        let max_iter = (20.0 * kappa.sqrt() + 200.0).min(1e7) as usize;
        LaplacianSolver {
            lap,
            lambda2,
            max_iter,
        }
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.lap
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iter
    }

    /// Solves `Lx = b` (b projected onto `𝟙⊥`) to relative L-norm error
    /// `tol`. The result is orthogonal to `𝟙`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let mut out = self.solve_block::<1>(&[b], tol)?;
        Ok(out.pop().expect("one column"))
    }

    /// Solves many right-hand sides, blocked and in parallel. Output order
    /// matches input order.
    pub fn solve_many(&self, rhs: &[Vec<f64>], tol: f64) -> Result<Vec<(Vec<f64>, SolveStats)>> {
        let groups: Vec<Vec<(Vec<f64>, SolveStats)>> = rhs
            .par_chunks(BLOCK)
            .map(|chunk| {
                let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
                self.solve_block::<BLOCK>(&refs, tol)
            })
            .collect::<Result<_>>()?;
        Ok(groups.into_iter().flatten().collect())
    }

    fn solve_block<const B: usize>(
        &self,
        rhs: &[&[f64]],
        tol: f64,
    ) -> Result<Vec<(Vec<f64>, SolveStats)>> {
        if !(tol > 0.0) {
            return Err(KoptError::InvalidParameter(format!(
                "solver tolerance must be positive, got {tol}"
            )));
        }
        let tol = tol.max(SOLVER_TOL_FLOOR);
        let n = self.lap.n();
        let cols = rhs.len();
        assert!(cols <= B);
        for b in rhs {
            assert_eq!(b.len(), n, "right-hand side length");
        }

        let mut b = vec![0.0; n * B];
        for (c, col) in rhs.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                b[i * B + c] = col[i] - mean;
            }
        }
        let inv_diag: Vec<f64> = self.lap.degree.iter().map(|&d| 1.0 / d).collect();
        let sqrt_l2 = self.lambda2.sqrt();

        let mut x = vec![0.0; n * B];
        let mut r = b.clone();
        let mut z = vec![0.0; n * B];
        let mut p = vec![0.0; n * B];
        let mut q = vec![0.0; n * B];
        let mut rz = [0.0; B];
        let mut active = [false; B];
        let mut stats = [SolveStats::default(); B];

        for i in 0..n {
            for c in 0..B {
                let zi = r[i * B + c] * inv_diag[i];
                z[i * B + c] = zi;
                p[i * B + c] = zi;
                rz[c] += r[i * B + c] * zi;
            }
        }
        for c in 0..cols {
            let bnorm2: f64 = (0..n).map(|i| b[i * B + c] * b[i * B + c]).sum();
            active[c] = bnorm2 > 0.0;
        }

        let mut iter = 0;
        while active.iter().any(|&a| a) {
            if iter >= self.max_iter {
                let worst = (0..B)
                    .filter(|&c| active[c])
                    .map(|c| relative_bound(&x, &b, &r, c, n, B, sqrt_l2))
                    .fold(0.0, f64::max);
                return Err(KoptError::SolverNotConverged {
                    iterations: iter,
                    achieved: worst,
                    target: tol,
                });
            }
            iter += 1;
            self.lap.apply_block::<B>(&p, &mut q);
            let mut pq = [0.0; B];
            for i in 0..n {
                for c in 0..B {
                    pq[c] += p[i * B + c] * q[i * B + c];
                }
            }
            let mut alpha = [0.0; B];
            for c in 0..B {
                if active[c] && pq[c] > 0.0 {
                    alpha[c] = rz[c] / pq[c];
                }
            }
            let mut rmean = [0.0; B];
            for i in 0..n {
                for c in 0..B {
                    x[i * B + c] += alpha[c] * p[i * B + c];
                    r[i * B + c] -= alpha[c] * q[i * B + c];
                    rmean[c] += r[i * B + c];
                }
            }
            for c in 0..B {
                rmean[c] /= n as f64;
            }
            let mut rnorm2 = [0.0; B];
            let mut xlx = [0.0; B];
            for i in 0..n {
                for c in 0..B {
                    let k = i * B + c;
                    r[k] -= rmean[c];
                    rnorm2[c] += r[k] * r[k];
                    xlx[c] += x[k] * (b[k] - r[k]);
                }
            }
            for c in 0..B {
                if !active[c] {
                    continue;
                }
                let eta = rnorm2[c].sqrt() / sqrt_l2;
                let xnorm = xlx[c].max(0.0).sqrt();
                if eta * (1.0 + tol) <= tol * xnorm || pq[c] <= 0.0 {
                    active[c] = false;
                    stats[c] = SolveStats {
                        iterations: iter,
                        bound: if xnorm > eta { eta / (xnorm - eta) } else { 0.0 },
                    };
                }
            }
            let mut rz_new = [0.0; B];
            for i in 0..n {
                for c in 0..B {
                    let k = i * B + c;
                    let zi = r[k] * inv_diag[i];
                    z[k] = zi;
                    rz_new[c] += r[k] * zi;
                }
            }
            let mut beta = [0.0; B];
            for c in 0..B {
                if active[c] && rz[c] > 0.0 {
                    beta[c] = rz_new[c] / rz[c];
                }
                rz[c] = rz_new[c];
            }
            for k in 0..n * B {
                let c = k % B;
                if active[c] {
                    p[k] = z[k] + beta[c] * p[k];
                } else {
                    p[k] = 0.0;
                }
            }
        }

        Ok((0..cols)
            .map(|c| {
                let mut col: Vec<f64> = (0..n).map(|i| x[i * B + c]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                col.iter_mut().for_each(|v| *v -= mean);
                (col, stats[c])
            })
            .collect())
    }
}

fn relative_bound(x: &[f64], b: &[f64], r: &[f64], c: usize, n: usize, stride: usize, sqrt_l2: f64) -> f64 {
    let mut rn = 0.0;
    let mut xlx = 0.0;
    for i in 0..n {
        let k = i * stride + c;
        rn += r[k] * r[k];
        xlx += x[k] * (b[k] - r[k]);
    }
    let eta = rn.sqrt() / sqrt_l2;
    let xn = xlx.max(0.0).sqrt();
    if xn > eta {
        eta / (xn - eta)
    } else {
        f64::INFINITY
    }
}

/// One-shot solve of `Lx = b` to relative L-norm error `tol`.
pub fn lap_solve(graph: &Graph, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if b.len() != graph.n() {
        return Err(KoptError::InvalidParameter(format!(
            "right-hand side has length {}, graph has {} nodes",
            b.len(),
            graph.n()
        )));
    }
    let solver = LaplacianSolver::new(graph)?;
    Ok(solver.solve(b, tol)?.0)
}

/// Smallest Ritz value of `L` on `𝟙⊥` after `steps` Lanczos iterations with
/// full reorthogonalization. Converges to `λ₂` from above.
pub fn estimate_lambda2(lap: &Laplacian, steps: usize, seed: u64) -> f64 {
    let n = lap.n();
    if n < 2 {
        return 0.0;
    }
    let steps = steps.min(n - 1).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    project_and_normalize(&mut v);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; n];
    for j in 0..steps {
        lap.apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alphas.push(a);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            let mean = w.iter().sum::<f64>() / n as f64;
            w.iter_mut().for_each(|x| *x -= mean);
            for q in &basis {
                let h = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        if j + 1 == steps || bnorm <= 1e-10 * a.abs().max(1.0) {
            break;
        }
        betas.push(bnorm);
        basis.push(w.iter().map(|x| x / bnorm).collect());
    }

    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_and_normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}
