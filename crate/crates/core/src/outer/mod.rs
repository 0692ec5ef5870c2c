//! Sum-of-ratios multipliers and the block coordinate descent driver.

mod bcd;
mod multipliers;

pub use bcd::{bcd_solve, scale_to_power, BcdOptions, BcdSolution, BlockTag, SdpStats, TraceRecord};
pub use multipliers::{
    init_multipliers, mse_weights, newton_update_multipliers, normalized_psi, optimal_volume_split, psi, NewtonStep,
    RatioMultipliers,
};
