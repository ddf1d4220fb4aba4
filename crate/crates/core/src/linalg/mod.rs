//! Linear algebra backends: the dense pseudoinverse pair maintained under
//! rank-one edge insertions, an iterative Laplacian solver with an L-norm
//! error contract, and seeded random sign projections.

mod dense;
mod projection;
mod solver;

pub use dense::{
    laplacian_matrix, pseudo_inverse, pseudo_inverse_with_limit, pinv_matrix, sm_update_pinv,
    sm_update_pinv2, DenseSpectralState, DEFAULT_DENSE_LIMIT,
};
pub use projection::{jl_matrix, jl_rows, SignProjection};
pub use solver::{
    estimate_lambda2, lap_solve, Laplacian, LaplacianSolver, SolveStats, SOLVER_TOL_FLOOR,
};
