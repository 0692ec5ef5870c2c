//! Scenario configuration and seeded channel synthesis.

mod channels;
mod config;

pub use channels::{array_response, build_channel_set, path_loss, BandChannels, ChannelSet, TrainState};
pub use config::{draw_tasks, ArrayGeometry, Band, Distances, SystemConfig, Tolerances, SPEED_OF_LIGHT};
