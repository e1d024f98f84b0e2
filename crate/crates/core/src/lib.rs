//! Numerical laboratory for the neutral Kähler geometry of the space of
//! oriented lines in Euclidean 3-space, identified with TS².
//!
//! The crate is organised around a complex graph function `η = F(ξ, ξ̄)` on a
//! polar grid over a disc in the `ξ`-plane. From `F` everything else is
//! derived: the complex slopes (shear `σ` and twist `λ`), the metric induced
//! on the graph by the neutral metric, adapted frames, the second fundamental
//! form and mean curvature, and the graph mean curvature flow with a
//! holomorphically twisted Lagrangian boundary surface.
//!
//! Companion modules map Euclidean surface patches to their normal line
//! congruences (`euclid`), provide the O(n,m) linear algebra and tilt
//! function (`onm`, `tilt`), time-step the flow (`flow`), and measure every
//! desk-scale-checkable quantity along a run (`diagnostics`).

pub mod area;
pub mod deriv;
pub mod diagnostics;
pub mod error;
pub mod euclid;
pub mod flow;
pub mod frames;
pub mod grid;
pub mod io;
pub mod metric;
pub mod onm;
pub mod slopes;
pub mod tilt;
pub mod verify;

pub use error::NkError;
pub use grid::{ComplexField, PolarGrid, RealField, SectionField};
pub use slopes::SlopeField;
pub use metric::MetricField;
pub use flow::{BoundaryMode, BoundarySurface, FlowConfig, FlowState, TerminationReason};
pub use diagnostics::{DiagnosticsRecord, IndexReport};


/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, NkError>;
