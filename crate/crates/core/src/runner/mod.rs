//! Configuration, scenario loops, diagnostics and file formats.

pub mod checks;
pub mod config;
pub mod fit;
pub mod io;
pub mod scenarios;
pub mod transform;

pub use checks::{run_check, run_checks, CheckOutcome, CheckSuite};
pub use config::{load_config, write_config, Backend, GridConfig, RunConfig, Scenario};
pub use fit::{fit_frequency, fit_samples, FitOutcome, FrequencyFit};
pub use io::{
    write_atomic, DiagnosticsSeries, Snapshot, SnapshotAxis, SnapshotMeta, CODE_VERSION,
    FORMAT_VERSION,
};
pub use scenarios::{
    list_snapshots, run_case, run_dir, simulate, simulate_quietly, spinor_snapshot, RunReport,
    Simulation,
};
pub use transform::{spinor_from_snapshot, transform_snapshot, TransformKind, TransformOptions};
