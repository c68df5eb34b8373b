//! Dataset generation: configuration, ingestion of source directories,
//! deterministic parallel sample generation, streaming and previews.

pub mod config;
pub mod generate;
pub mod ingest;

pub use config::{Mode, Paths, PipelineConfig, SplitConfig, Subset};
pub use generate::{
    contact_sheet, generate_dataset, generate_sample, preview, regenerate, sample_seed, stage_rng, stream_samples,
    GeneratedSample, Manifest, ManifestEntry, Provenance, SampleStream, Stage, MANIFEST_FILE,
};
pub use ingest::{ingest, DatasetPools, IngestReport, Rejection};
