//! Populations of continual epsilon-greedy Q-learners routing through the
//! Braess network.
//!
//! - [`game`]: the three-route congestion game and its reference costs.
//! - [`learner`]: q-tables, epsilon-greedy choice and the two update rules.
//! - [`sim`]: synchronous repeated play, trajectories and seeded batches.
//! - [`cycles`]: period, edgeworthiness and dispersion of cost series.
//! - [`metagame`]: homogeneous sweeps and single-deviant best-response grids.
//! - [`rng`]: seed derivation for repetitions and per-agent streams.

pub mod cycles;
pub mod game;
pub mod learner;
pub mod metagame;
pub mod rng;
pub mod sim;

pub use cycles::{analyze, CycleOptions, CycleReport};
pub use game::{Action, ActionProfile, FlowCounts, GameSpec};
pub use learner::{AgentParams, InitMode, MonitoringFeedback, QTable};
pub use metagame::{AdvantageCell, AdvantageGrid, MetaGameSpec, MetaParameter};
pub use sim::{run_batch, run_simulation, BaseConfig, SimConfig, Trajectory};
