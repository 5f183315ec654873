//! End-to-end orchestration: configuration, the full
//! state -> sweep -> metrics -> tomography -> separability chain, report
//! assembly, and figure data emission.

mod config;
mod figures;
mod run;

pub use config::{HalfRange, RunConfig, StateSpec, TomoResolution};
pub use figures::{emit_figure_data, fig3_csv, fig4a_csv, fig4b_csv};
pub use run::{
    dsweep_csv, run_and_write, run_pipeline, write_run_outputs, BasisReport, DimensionReport,
    Provenance, RunReport, SepBoundSection, StateSummary, TomographyDiagnostics,
};
