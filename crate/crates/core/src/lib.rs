//! Positive diagonal scaling of nonnegative d-mode tensors to prescribed
//! slice sums.
//!
//! Given a sparse nonnegative tensor `B` with no empty slice and positive
//! target vectors `s_1, …, s_d` with equal totals, the crate
//!
//! * decides by linear programming whether some
//!   `A = B · exp(x_{1,i_1} + … + x_{d,i_d})` has every `(k, i_k)`-slice sum
//!   equal to `s_{k,i_k}`, returning a checkable certificate when not
//!   ([`feasibility`]);
//! * computes that (unique) `A` by Newton's method on a strictly convex
//!   reduced objective ([`newton`]), with cyclic proportional fitting as a
//!   baseline ([`sinkhorn`]).

pub mod bench;
pub mod error;
pub mod feasibility;
pub mod generate;
pub mod io;
pub mod maxflow;
pub mod newton;
pub mod simplex;
pub mod sinkhorn;
pub mod subspace;
pub mod tensor;

pub use error::{Error, Result};
pub use feasibility::{check_scalability, verify_certificate, FeasibilityReport, Verdict};
pub use generate::{generate_feasible, generate_infeasible_2mode, SplitMix64};
pub use maxflow::pattern_feasible_maxflow;
pub use newton::{newton_scale, newton_scale_from, ScalingResult, SolverOptions, Status};
pub use sinkhorn::sinkhorn_scale;
pub use subspace::{build_frame, max_support_sum, Subspace, SubspaceFrame};
pub use tensor::{residual, ScalingVectors, SparseTensor, TargetSums};
