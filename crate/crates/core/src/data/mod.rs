//! Battery fleet data: traces, synthetic generation, CSV ingestion, feature
//! engineering, normalization and battery-level splits.

mod csv_io;
mod features;
mod normalize;
mod split;
mod synthetic;
mod trace;

pub use csv_io::{load_csv, write_fleet_csv, MANIFEST_NAME};
pub(crate) use csv_io::write_file;
pub use features::{
    compute_rul_targets, engineer_features, feature_columns, moments, FeatureConfig, FeatureMatrix,
    Moments, DEGENERATE_M2,
};
pub use normalize::{normalize, NormalizationParams, CLAMP_RANGE};
pub use split::{split_train_test, train_count};
pub use synthetic::{
    battery_id, draw_fade_params, generate_synthetic_fleet, generate_trace, FadeParams,
    SyntheticConfig,
};
pub use trace::{
    first_eol_crossing, BatteryTrace, CycleRecord, Fleet, Split, CAPACITY_CHANNEL, CHANNELS,
    END_OF_LIFE_FRACTION,
};
