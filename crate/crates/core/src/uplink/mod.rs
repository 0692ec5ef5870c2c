//! Uplink block: band power split, MMSE decoders and IRS2 phases.

mod gamma;
mod mmse;
mod sdp;
mod rounding;
mod sdr;

pub use gamma::{optimize_gamma, GammaContext, GammaSolution, GammaStatus};
pub use mmse::mmse_decoder;
pub use sdp::{infeasible_constraints, solve_sdp, KktResiduals, SdrSolution};
pub use rounding::{normalize_lifted, recover_phases, CovertProjector, RoundingOutcome};
pub use sdr::{build_sdr_problem, hadamard_transpose, lifted, weighted_mse, SdrProblem};
