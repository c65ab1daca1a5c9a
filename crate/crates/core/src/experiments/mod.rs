//! The forced Lorenz-63 twin experiment: attractor statistics, evidence
//! traces, and the sweep comparing evidence-based and conventional PN.

pub mod ar1_demo;
pub mod attractor;
pub mod kde;
pub mod roc;
pub mod sweep;
pub mod traces;

pub use ar1_demo::{run_ar1_demo, Ar1Demo, Ar1DemoConfig};
pub use attractor::{attractor_sample, leading_plane, project, AttractorSample};
pub use kde::{kde2d, scott_bandwidth, Grid2d, KdeGrid};
pub use roc::{roc_curve, RocCurve};
pub use sweep::{run_sweep, LabeledScore, QuintupletSummary, SweepConfig, SweepResult};
pub use traces::{evidence_figure_export, EvidenceRow};
