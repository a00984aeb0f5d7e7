//! Configuration, persistence and export.

pub mod binary;
pub mod config;
pub mod export;
pub mod run;

pub use binary::{read_clustering, read_ensemble, write_clustering, write_ensemble, StoredClustering};
pub use config::{parse_config, ExportConfig, FieldConfig, GridConfig, ResolvedRun, RunConfig, Task, TimeConfig};
pub use export::{export_field_csv, export_field_pgm, read_field_csv};
pub use run::{config_from_manifest, rerun, run, RunReport, MANIFEST_FILE};
