//! Dataset ingestion, seeded splits, statistics, synthetic sensors and the
//! descriptor × variant result matrix.

pub mod config;
pub mod dataset;
pub mod features;
pub mod matrix;
pub mod synth;

pub use config::{ClassSource, ExperimentConfig, Region, Variant};
pub use dataset::{dataset_stats, ingest, split, stats_csv, BoxSummary, ClassStats, SampleRecord};
pub use features::{export_variant, quantize_feature, ExportedSample, FeatureStore};
pub use matrix::{run_matrix, table_csv, write_report, CellReport, CellStatus, Evaluation, Experiment, MatrixReport, TrainedCell};
pub use synth::{synth_sensors, SensorSignature, SignatureScope, SynthConfig, SynthManifest};
