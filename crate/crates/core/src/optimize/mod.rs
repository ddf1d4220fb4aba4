//! Edge selectors for Kirchhoff index minimization.

mod evaluation;
mod exact;
mod hull_based;
mod sketched;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KoptError, Result};
use crate::graph::Graph;
use crate::hull::TIE_TOLERANCE;
use crate::linalg::DEFAULT_DENSE_LIMIT;
use crate::sketch::ToleranceMode;

pub use evaluation::{Evaluation, Evaluator};
pub use exact::{brute_force, deter, grad, BRUTE_FORCE_LIMIT};
pub use hull_based::{fast_grad, fast_grad_plus, one_conv};
pub use sketched::approx_greedy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "brute")]
    Brute,
    #[serde(rename = "deter")]
    Deter,
    #[serde(rename = "grad")]
    Grad,
    #[serde(rename = "approx")]
    Approx,
    #[serde(rename = "fastgrad")]
    FastGrad,
    #[serde(rename = "fastgrad+")]
    FastGradPlus,
    #[serde(rename = "oneconv")]
    OneConv,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Brute,
        Algorithm::Deter,
        Algorithm::Grad,
        Algorithm::Approx,
        Algorithm::FastGrad,
        Algorithm::FastGradPlus,
        Algorithm::OneConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::Deter => "deter",
            Algorithm::Grad => "grad",
            Algorithm::Approx => "approx",
            Algorithm::FastGrad => "fastgrad",
            Algorithm::FastGradPlus => "fastgrad+",
            Algorithm::OneConv => "oneconv",
        }
    }

    /// Deterministic without a seed.
    pub fn is_exact(self) -> bool {
        matches!(self, Algorithm::Brute | Algorithm::Deter | Algorithm::Grad)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = KoptError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| KoptError::InvalidParameter(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgoParams {
    pub k: usize,
    /// Overall accuracy; the sketch greedy uses it directly.
    pub epsilon: f64,
    /// Hull tolerance, as a fraction of the diameter estimate.
    pub mu: f64,
    /// Projection distortion.
    pub beta: f64,
    /// Solver share of the error budget.
    pub delta: f64,
    pub seed: u64,
    /// Constant in the projection row count `⌈c_jl · ln n / β²⌉`.
    pub c_jl: f64,
    /// Eccentricity pruning before the hull step of `fastgrad+`.
    pub prune: bool,
    pub tolerance: ToleranceMode,
    pub evaluation: Evaluation,
    pub dense_limit: usize,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl AlgoParams {
    /// Splits `ε` as `μ = ε/24`, `β = δ = ε/3`, with the worst-case solver
    /// tolerance.
    pub fn from_epsilon(k: usize, epsilon: f64, seed: u64) -> Self {
        AlgoParams {
            k,
            epsilon,
            mu: epsilon / 24.0,
            beta: epsilon / 3.0,
            delta: epsilon / 3.0,
            seed,
            c_jl: 1.0,
            prune: true,
            tolerance: ToleranceMode::Formula,
            evaluation: Evaluation::Auto,
            dense_limit: DEFAULT_DENSE_LIMIT,
            cache_dir: None,
        }
    }

    /// `μ = 0.01`, `β = 0.1`, fixed solver tolerance `0.1`.
    pub fn benchmark_defaults(k: usize, seed: u64) -> Self {
        AlgoParams {
            mu: 0.01,
            beta: 0.1,
            delta: 0.1,
            tolerance: ToleranceMode::Fixed(0.1),
            ..AlgoParams::from_epsilon(k, 0.3, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(KoptError::InvalidParameter(format!("{name} must lie in (0, 1), got {x}")))
            }
        };
        if self.k == 0 {
            return Err(KoptError::InvalidParameter("k must be at least 1".into()));
        }
        unit("epsilon", self.epsilon)?;
        unit("mu", self.mu)?;
        unit("beta", self.beta)?;
        unit("delta", self.delta)?;
        if !(self.c_jl > 0.0) {
            return Err(KoptError::InvalidParameter(format!("c_jl must be positive, got {}", self.c_jl)));
        }
        if let ToleranceMode::Fixed(t) = self.tolerance {
            if !(t > 0.0 && t < 1.0) {
                return Err(KoptError::InvalidParameter(format!(
                    "solver tolerance must lie in (0, 1), got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    /// Node ids, smaller first.
    pub edge: (usize, usize),
    /// The same edge in input labels.
    pub labels: (i64, i64),
    /// Kirchhoff index after this step.
    pub kirchhoff: Option<f64>,
    /// Selection score of the chosen pair (algorithm specific).
    pub score: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub jl_rows: Option<usize>,
    pub solver_tol: Option<f64>,
    pub solver_tol_raw: Option<f64>,
    pub solver_tol_floored: bool,
    pub lambda2_estimate: Option<f64>,
    pub solver_iterations: usize,
    pub hull_sizes: Vec<usize>,
    pub hull_retries: usize,
    pub hull_capped: bool,
    pub prune_size: Option<usize>,
    /// Set when the pruned set ran out of non-adjacent pairs and the hull
    /// step fell back to every node.
    pub prune_widened: bool,
    pub subsets_evaluated: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionResult {
    pub algo: Algorithm,
    pub n: usize,
    pub m: usize,
    pub initial_kirchhoff: Option<f64>,
    pub kirchhoff_estimated: bool,
    pub steps: Vec<Step>,
    /// Preprocessing time before the first round (embeddings, pruning).
    pub setup_ms: f64,
    pub total_ms: f64,
    pub params: AlgoParams,
    pub diagnostics: Diagnostics,
}

impl SelectionResult {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.steps.iter().map(|s| s.edge).collect()
    }

    pub fn final_kirchhoff(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.kirchhoff).or(self.initial_kirchhoff)
    }
}

pub fn run(algo: Algorithm, graph: &Graph, params: &AlgoParams) -> Result<SelectionResult> {
    match algo {
        Algorithm::Brute => brute_force(graph, params),
        Algorithm::Deter => deter(graph, params),
        Algorithm::Grad => grad(graph, params),
        Algorithm::Approx => approx_greedy(graph, params),
        Algorithm::FastGrad => fast_grad(graph, params),
        Algorithm::FastGradPlus => fast_grad_plus(graph, params),
        Algorithm::OneConv => one_conv(graph, params),
    }
}

fn check_budget(graph: &Graph, params: &AlgoParams) -> Result<()> {
    params.validate()?;
    graph.require_connected()?;
    let candidates = graph.candidate_count();
    if params.k > candidates {
        return Err(KoptError::BudgetTooLarge {
            k: params.k,
            candidates,
        });
    }
    Ok(())
}

/// Independent seed for round `round` of a run seeded with `seed`.
pub(crate) fn round_seed(seed: u64, round: u64) -> u64 {
    let mut z = seed ^ round.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Non-edge maximizing `score`; near-ties go to the lexicographically
/// smallest pair.
pub(crate) fn best_non_edge(graph: &Graph, score: impl Fn(usize, usize) -> f64 + Sync) -> Option<(usize, usize, f64)> {
    let n = graph.n();
    let row_best = |u: usize| -> f64 {
        let nb = graph.neighbors(u);
        let mut best = f64::NEG_INFINITY;
        let mut k = nb.partition_point(|&x| (x as usize) <= u);
        for v in u + 1..n {
            if k < nb.len() && nb[k] as usize == v {
                k += 1;
                continue;
            }
            best = best.max(score(u, v));
        }
        best
    };
    let rows: Vec<f64> = (0..n).into_par_iter().map(row_best).collect();
    let max = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let cut = if max >= 0.0 {
        max * (1.0 - TIE_TOLERANCE)
    } else {
        max * (1.0 + TIE_TOLERANCE)
    };
    for u in 0..n {
        if rows[u] < cut {
            continue;
        }
        for v in u + 1..n {
            if !graph.has_edge(u, v) {
                let s = score(u, v);
                if s >= cut {
                    return Some((u, v, s));
                }
            }
        }
    }
    None
}

/// Collects steps; evaluation work runs outside the timed sections.
pub(crate) struct Recorder<'g> {
    graph: &'g Graph,
    evaluator: Evaluator,
    steps: Vec<Step>,
    started: Instant,
    round_start: Instant,
    eval_ms: f64,
    setup_ms: f64,
}

impl<'g> Recorder<'g> {
    pub(crate) fn new(graph: &'g Graph, params: &AlgoParams) -> Result<Self> {
        let eval_start = Instant::now();
        let evaluator = Evaluator::new(graph, params.evaluation, params.dense_limit, params.seed)?;
        let eval_ms = ms(eval_start);
        let now = Instant::now();
        Ok(Recorder {
            graph,
            evaluator,
            steps: Vec::new(),
            started: now,
            round_start: now,
            eval_ms,
            setup_ms: 0.0,
        })
    }

    /// For selectors that already hold an exact `L†`: step values come
    /// from the selector instead of a second tracked matrix.
    pub(crate) fn with_known(graph: &'g Graph, params: &AlgoParams, initial: f64) -> Self {
        let evaluator = if params.evaluation == Evaluation::Skip {
            Evaluator::Skip
        } else {
            Evaluator::External { initial }
        };
        let now = Instant::now();
        Recorder {
            graph,
            evaluator,
            steps: Vec::new(),
            started: now,
            round_start: now,
            eval_ms: 0.0,
            setup_ms: 0.0,
        }
    }

    /// Marks the end of preprocessing.
    pub(crate) fn setup_done(&mut self) {
        self.setup_ms = ms(self.started);
        self.round_start = Instant::now();
    }

    /// Records the edge chosen in the current round. `known` is an exact
    /// Kirchhoff value the selector already holds.
    pub(crate) fn record(&mut self, u: usize, v: usize, score: f64, known: Option<f64>) -> Result<()> {
        let elapsed = ms(self.round_start);
        let eval_start = Instant::now();
        let (a, b) = (u.min(v), u.max(v));
        let kirchhoff = self.evaluator.add_edge(a, b, known)?;
        self.steps.push(Step {
            edge: (a, b),
            labels: (self.graph.label(a), self.graph.label(b)),
            kirchhoff,
            score,
            elapsed_ms: elapsed,
        });
        self.eval_ms += ms(eval_start);
        self.round_start = Instant::now();
        Ok(())
    }

    pub(crate) fn finish(self, algo: Algorithm, params: &AlgoParams, diagnostics: Diagnostics) -> SelectionResult {
        let setup_ms = self.setup_ms;
        let total_ms = setup_ms + self.steps.iter().map(|s| s.elapsed_ms).sum::<f64>();
        SelectionResult {
            algo,
            n: self.graph.n(),
            m: self.graph.m(),
            initial_kirchhoff: self.evaluator.initial(),
            kirchhoff_estimated: self.evaluator.is_estimate(),
            steps: self.steps,
            setup_ms,
            total_ms,
            params: params.clone(),
            diagnostics,
        }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}
