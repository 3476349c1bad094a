//! Annotation sessions over recording bundles, the local HTTP service that
//! serves them, and the `pianotrace` command line.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod context;
pub mod error;
pub mod export;
pub mod http;
pub mod session;

pub use bundle::{write_synthetic_bundle, Bundle, BundlePaths};
pub use error::ServiceError;
pub use export::{export_annotation, ExportOptions, ExportReport, FingeringFormat};
pub use session::{AuditEntry, LabelOutcome, LabelRequest, Session, SessionState};
