//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by grid operations, geometry, the flow solver and I/O.
#[derive(Debug, Error)]
pub enum NkError {
    #[error("non-finite value in input field")]
    NonFiniteInput,

    #[error("degenerate metric: positivity margin {min_margin:.3e} below floor {floor:.3e}")]
    DegenerateMetric { min_margin: f64, floor: f64 },

    #[error("matrix dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not pseudo-orthogonal: worst block residual {residual:.3e}")]
    NotPseudoOrthogonal { residual: f64 },

    #[error("normal form requires n >= m, got n = {n}, m = {m}")]
    NotImplementedForNLessM { n: usize, m: usize },

    #[error("multi-time constants must satisfy C3^2 > C2 > 0, C1 > 0")]
    BadConstants,

    #[error("Gauss map degenerate near (u, v) = ({u:.4}, {v:.4})")]
    GaussMapDegenerate { u: f64, v: f64 },

    #[error("normal direction hit the south pole of S^2")]
    SouthPoleHit,

    #[error("input section is not Lagrangian: max |lambda| = {max_lambda:.3e}")]
    NotLagrangian { max_lambda: f64 },

    #[error("twisted surface not positive on the working annulus: min margin {min_margin:.3e}")]
    NotPositiveOnAnnulus { min_margin: f64 },

    #[error("no compatible initial disc within positivity bounds")]
    NoCompatibleDisc,

    #[error("time step collapsed after {halvings} halvings at s = {s:.6e} (bubbling suspected: {bubbling_suspected})")]
    StepCollapse {
        s: f64,
        halvings: u32,
        bubbling_suspected: bool,
    },

    #[error("boundary curve lost star-shapedness at s = {s:.6e}")]
    BoundaryFold { s: f64 },

    #[error("boundary radius {min_r:.4e} crossed the complex-point guard {guard:.4e}")]
    ComplexPointHit { min_r: f64, guard: f64 },

    #[error("umbilic point on the transport loop")]
    UmbilicOnLoop,

    #[error("complex point (|sigma| < tol) on the Maslov loop")]
    ComplexPointOnLoop,

    #[error("accumulated angle {value:.4} is not within 0.1 of a half-integer lattice point")]
    IndexUnresolved { value: f64 },

    #[error("umbilics are not isolated on this patch (totally umbilic region)")]
    NonIsolatedUmbilics,

    #[error("config error at line {line}: {msg}")]
    ConfigError { line: usize, msg: String },

    #[error("malformed {what} file: {msg}")]
    FormatError { what: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
