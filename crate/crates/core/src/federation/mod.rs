//! Two-stage federated training over simulated clients: a coordinator
//! samples clients, broadcasts global weights, averages the returned
//! snapshots with unweighted FedAvg, and freezes each stage's result.
//! Clients keep their rows; only serialized weights and round configs cross
//! the boundary, and every crossing is logged.

mod client;
mod config;
mod coordinator;
mod transport;
mod variants;

pub use client::{network_from_snapshot, sample_rows, Client, FrozenModel};
pub use config::{
    client_seed, init_seed, mix_seed, round_seed, sampler_seed, ArchitectureConfig,
    FederationConfig,
};
pub use coordinator::{fed_avg, Coordinator};
pub use transport::{
    Direction, MessageLog, MessageRecord, ModelUpdate, PayloadKind, RoundConfig, Stage,
};
pub use variants::{
    cluster_assignment, run_pipeline, BatteryPredictions, PipelineMode, TrainedPipeline,
    CENTRAL_ID,
};
