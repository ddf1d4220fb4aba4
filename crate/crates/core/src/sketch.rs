//! Random-projection sketches of `L†` (effective resistances) and of the
//! node embedding `X = Q L†` (biharmonic distances, hull geometry).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KoptError, Result};
use crate::graph::Graph;
use crate::linalg::{jl_matrix, jl_rows, LaplacianSolver, SignProjection, SOLVER_TOL_FLOOR};

/// Right-hand sides solved per batch while building a sketch.
const ROW_BATCH: usize = 64;

/// How the Laplacian solver tolerance is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceMode {
    /// The worst-case formula in `n`, `β`, `δ`.
    Formula,
    /// A fixed relative tolerance.
    Fixed(f64),
}

impl ToleranceMode {
    pub fn resolve(self, n: usize, beta: f64, delta: f64) -> SolverTolerance {
        match self {
            ToleranceMode::Formula => solver_tolerance(n, beta, delta),
            ToleranceMode::Fixed(tol) => SolverTolerance {
                value: tol.max(SOLVER_TOL_FLOOR),
                raw: tol,
                floored: tol < SOLVER_TOL_FLOOR,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverTolerance {
    /// Tolerance handed to the solver.
    pub value: f64,
    /// Value before flooring.
    pub raw: f64,
    pub floored: bool,
}

/// `(δ / 3n) · √(6(1−β) / (n(n²−1)(1+β)))`, floored at
/// [`SOLVER_TOL_FLOOR`].
pub fn solver_tolerance(n: usize, beta: f64, delta: f64) -> SolverTolerance {
    let nf = n as f64;
    let raw = delta / (3.0 * nf)
        * (6.0 * (1.0 - beta) / (nf * (nf * nf - 1.0) * (1.0 + beta))).sqrt();
    SolverTolerance {
        value: raw.max(SOLVER_TOL_FLOOR),
        raw,
        floored: raw < SOLVER_TOL_FLOOR,
    }
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(KoptError::InvalidParameter(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Node-major coordinates: node `i` occupies `data[i*t .. (i+1)*t]`.
fn squared_gap(data: &[f64], t: usize, u: usize, v: usize) -> f64 {
    let a = &data[u * t..(u + 1) * t];
    let b = &data[v * t..(v + 1) * t];
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_query(n: usize, u: usize, v: usize) -> Result<()> {
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

/// Solves `L z_j = rhs(j)` for `j in 0..t` and stores the solutions as
/// rows of a node-major `t × n` array. Returns the array and the total
/// number of solver iterations.
fn solve_rows(
    solver: &LaplacianSolver,
    n: usize,
    t: usize,
    tol: f64,
    rhs: impl Fn(usize) -> Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let mut data = vec![0.0; n * t];
    let mut iterations = 0;
    let mut start = 0;
    while start < t {
        let end = (start + ROW_BATCH).min(t);
        let batch: Vec<Vec<f64>> = (start..end).map(&rhs).collect();
        let solved = solver.solve_many(&batch, tol)?;
        for (off, (x, stats)) in solved.into_iter().enumerate() {
            let j = start + off;
            iterations += stats.iterations;
            for (i, xi) in x.into_iter().enumerate() {
                data[i * t + j] = xi;
            }
        }
        start = end;
    }
    Ok((data, iterations))
}

/// `Z = Q B L†` with `Q` a `t × m` sign matrix over the edges.
#[derive(Clone, Debug)]
pub struct ResistanceSketch {
    n: usize,
    t: usize,
    seed: u64,
    epsilon: f64,
    data: Vec<f64>,
    iterations: usize,
}

impl ResistanceSketch {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn solver_iterations(&self) -> usize {
        self.iterations
    }

    pub fn query(&self, u: usize, v: usize) -> Result<f64> {
        check_query(self.n, u, v)?;
        Ok(self.query_unchecked(u, v))
    }

    pub(crate) fn query_unchecked(&self, u: usize, v: usize) -> f64 {
        squared_gap(&self.data, self.t, u, v)
    }
}

/// Resistance sketch with `t = ⌈c_jl · ln n / (ε/2)²⌉` rows.
pub fn build_resistance_sketch(
    graph: &Graph,
    epsilon: f64,
    seed: u64,
    c_jl: f64,
    tol: f64,
) -> Result<ResistanceSketch> {
    check_unit_interval("epsilon", epsilon)?;
    let solver = LaplacianSolver::new(graph)?;
    build_resistance_sketch_with(graph, &solver, epsilon, seed, c_jl, tol)
}

pub(crate) fn build_resistance_sketch_with(
    graph: &Graph,
    solver: &LaplacianSolver,
    epsilon: f64,
    seed: u64,
    c_jl: f64,
    tol: f64,
) -> Result<ResistanceSketch> {
    let n = graph.n();
    let t = jl_rows(n, epsilon / 2.0, c_jl);
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let q = jl_matrix(t, edges.len(), seed);
    let (data, iterations) = solve_rows(solver, n, t, tol, |j| {
        let mut b = vec![0.0; n];
        let s = q.scale();
        for (e, &(u, v)) in edges.iter().enumerate() {
            let w = q.sign(j, e) * s;
            b[u] += w;
            b[v] -= w;
        }
        b
    })?;
    Ok(ResistanceSketch {
        n,
        t,
        seed,
        epsilon,
        data,
        iterations,
    })
}

pub fn query_resistance(sketch: &ResistanceSketch, u: usize, v: usize) -> Result<f64> {
    sketch.query(u, v)
}

/// Approximate projected coordinates `X ≈ Q L†`; column `i` is node `i`'s
/// point.
#[derive(Clone, Debug)]
pub struct EmbeddingSketch {
    n: usize,
    t: usize,
    seed: u64,
    beta: f64,
    solver_tol: f64,
    c_jl: f64,
    data: Vec<f64>,
    proj: SignProjection,
    iterations: usize,
}

impl EmbeddingSketch {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn solver_tol(&self) -> f64 {
        self.solver_tol
    }

    pub fn solver_iterations(&self) -> usize {
        self.iterations
    }

    pub fn projection(&self) -> &SignProjection {
        &self.proj
    }

    /// Node-major coordinate array.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.t..(i + 1) * self.t]
    }

    pub fn query(&self, u: usize, v: usize) -> Result<f64> {
        check_query(self.n, u, v)?;
        Ok(squared_gap(&self.data, self.t, u, v))
    }
}

/// Embedding with `t = ⌈c_jl · ln n / β²⌉` rows; row `j` solves
/// `L x = Q_j` to relative L-norm error `solver_tol`.
pub fn embed_nodes(
    graph: &Graph,
    beta: f64,
    solver_tol: f64,
    seed: u64,
    c_jl: f64,
) -> Result<EmbeddingSketch> {
    check_unit_interval("beta", beta)?;
    let solver = LaplacianSolver::new(graph)?;
    embed_nodes_with(&solver, graph.n(), beta, solver_tol, seed, c_jl)
}

pub(crate) fn embed_nodes_with(
    solver: &LaplacianSolver,
    n: usize,
    beta: f64,
    solver_tol: f64,
    seed: u64,
    c_jl: f64,
) -> Result<EmbeddingSketch> {
    let t = jl_rows(n, beta, c_jl);
    let proj = jl_matrix(t, n, seed);
    let (data, iterations) = solve_rows(solver, n, t, solver_tol, |j| proj.row(j))?;
    Ok(EmbeddingSketch {
        n,
        t,
        seed,
        beta,
        solver_tol,
        c_jl,
        data,
        proj,
        iterations,
    })
}

/// Biharmonic sketch at accuracy `ε`: an embedding with `β = ε/2` and the
/// matching formula tolerance.
pub fn build_biharmonic_sketch(
    graph: &Graph,
    epsilon: f64,
    seed: u64,
    c_jl: f64,
) -> Result<EmbeddingSketch> {
    check_unit_interval("epsilon", epsilon)?;
    let tol = solver_tolerance(graph.n(), epsilon / 2.0, epsilon / 2.0).value;
    embed_nodes(graph, epsilon / 2.0, tol, seed, c_jl)
}

pub fn query_biharmonic(sketch: &EmbeddingSketch, u: usize, v: usize) -> Result<f64> {
    sketch.query(u, v)
}

/// Sherman–Morrison update of the embedding for the insertion of `(u, v)`.
/// `graph` and `solver` describe the graph *before* the insertion. Only the
/// listed columns are updated; `None` updates every column.
pub fn update_embedding(
    sketch: &mut EmbeddingSketch,
    graph: &Graph,
    solver: &LaplacianSolver,
    edge: (usize, usize),
    tol0: f64,
    columns: Option<&[usize]>,
) -> Result<()> {
    let (u, v) = edge;
    check_query(graph.n(), u, v)?;
    if graph.has_edge(u, v) {
        return Err(KoptError::EdgeExists(u.min(v), u.max(v)));
    }
    let n = graph.n();
    let mut b = vec![0.0; n];
    b[u] = 1.0;
    b[v] = -1.0;
    let (y, _) = solver.solve(&b, tol0)?;
    let denom = 1.0 + y[u] - y[v];
    if !(denom > 0.0) {
        return Err(KoptError::Denominator(denom));
    }
    let qy = sketch.proj.apply(&y);
    let t = sketch.t;
    let mut apply = |i: usize| {
        let f = y[i] / denom;
        let col = &mut sketch.data[i * t..(i + 1) * t];
        col.iter_mut().zip(&qy).for_each(|(x, q)| *x -= q * f);
    };
    match columns {
        Some(cols) => cols.iter().for_each(|&i| apply(i)),
        None => (0..n).for_each(apply),
    }
    Ok(())
}

const CACHE_MAGIC: &[u8; 8] = b"KOPTEMB1";

/// Cache file name for an embedding of `graph` with the given parameters.
pub fn embedding_cache_key(graph: &Graph, beta: f64, solver_tol: f64, seed: u64, c_jl: f64) -> String {
    let mut h = Sha256::new();
    h.update(graph.content_hash().as_bytes());
    h.update(beta.to_le_bytes());
    h.update(solver_tol.to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update(c_jl.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_embedding(path: &Path, key: &str, sketch: &EmbeddingSketch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(key.len() as u64).to_le_bytes())?;
    w.write_all(key.as_bytes())?;
    for x in [sketch.n as u64, sketch.t as u64, sketch.seed, sketch.iterations as u64] {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in [sketch.beta, sketch.solver_tol, sketch.c_jl] {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in &sketch.data {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_embedding(path: &Path, key: &str) -> Result<EmbeddingSketch> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(KoptError::Cache(format!("{} is not an embedding cache", path.display())));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let klen = next_u64(&mut r)? as usize;
    let mut stored = vec![0u8; klen];
    r.read_exact(&mut stored)?;
    if stored != key.as_bytes() {
        return Err(KoptError::Cache("key mismatch".into()));
    }
    let n = next_u64(&mut r)? as usize;
    let t = next_u64(&mut r)? as usize;
    let seed = next_u64(&mut r)?;
    let iterations = next_u64(&mut r)? as usize;
    let beta = f64::from_bits(next_u64(&mut r)?);
    let solver_tol = f64::from_bits(next_u64(&mut r)?);
    let c_jl = f64::from_bits(next_u64(&mut r)?);
    let mut bytes = vec![0u8; n * t * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(EmbeddingSketch {
        n,
        t,
        seed,
        beta,
        solver_tol,
        c_jl,
        data,
        proj: jl_matrix(t, n, seed),
        iterations,
    })
}

/// [`embed_nodes_with`] behind a file cache in `dir`.
pub(crate) fn embed_nodes_cached(
    graph: &Graph,
    solver: &LaplacianSolver,
    beta: f64,
    solver_tol: f64,
    seed: u64,
    c_jl: f64,
    dir: Option<&Path>,
) -> Result<EmbeddingSketch> {
    let Some(dir) = dir else {
        return embed_nodes_with(solver, graph.n(), beta, solver_tol, seed, c_jl);
    };
    let key = embedding_cache_key(graph, beta, solver_tol, seed, c_jl);
    let path: PathBuf = dir.join(format!("{key}.emb"));
    if path.exists() {
        match load_embedding(&path, &key) {
            Ok(s) => return Ok(s),
            Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let sketch = embed_nodes_with(solver, graph.n(), beta, solver_tol, seed, c_jl)?;
    std::fs::create_dir_all(dir)?;
    save_embedding(&path, &key, &sketch)?;
    Ok(sketch)
}
