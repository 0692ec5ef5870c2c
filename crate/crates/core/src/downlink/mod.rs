//! Downlink block: time split, energy beams and IRS1 phases.

mod beta;
mod dca;
mod theta1;

pub use beta::{beta_derivative, beta_objective, optimize_beta, BetaCoefficients, BetaSolution, BetaStatus};
pub use dca::{dca_energy_beams, solve_ball_qp, BallQpSolution, DcaOutcome, DcaProblem};
pub use theta1::{optimize_theta1, Theta1Context, Theta1Outcome};
