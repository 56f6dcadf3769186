use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by mesh construction, assembly, solvers and steppers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A mesh violates one of its structural invariants.
    InvalidMesh(String),
    /// A named shape or its parameters are not acceptable.
    InvalidShape(String),
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// Vector or matrix dimensions do not agree.
    DimensionMismatch { expected: usize, found: usize },
    /// An element kernel produced a non-finite entry.
    Assembly { element: usize, reason: String },
    /// An element kernel is singular for the given data.
    SingularKernel { element: usize },
    /// The reference map of an element is degenerate (`det Ĥ <= 0`).
    DegenerateReference { element: usize },
    /// The area-weighted normal sum at a vertex vanishes.
    DegenerateNormal { vertex: usize },
    /// An iterative or direct solver failed.
    SolverFailure { iterations: usize, residual: f64, reason: &'static str },
    /// The mesh degenerated during a time step; the run must stop.
    MeshDegeneration { element: usize, area: f64, sigma: f64 },
    /// The fixed-point iteration of the BGN curve scheme did not converge.
    FixedPointDivergence(alloc::boxed::Box<FixedPointFailure>),
    /// The requested time lies beyond the extinction time of the exact solution.
    BeyondExtinction { time: f64, extinction: f64 },
}

/// Payload of [`Error::FixedPointDivergence`]: the last two iterates, flattened
/// as `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointFailure {
    pub iterations: usize,
    pub last_increment: f64,
    pub previous_iterate: alloc::vec::Vec<f64>,
    pub last_iterate: alloc::vec::Vec<f64>,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::InvalidShape(msg) => write!(f, "invalid shape: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Assembly { element, reason } => {
                write!(f, "assembly failed at element {element}: {reason}")
            }
            Error::SingularKernel { element } => {
                write!(f, "element {element} yields a singular kernel")
            }
            Error::DegenerateReference { element } => {
                write!(f, "reference map of element {element} is degenerate")
            }
            Error::DegenerateNormal { vertex } => {
                write!(f, "vertex normal at vertex {vertex} is undefined")
            }
            Error::SolverFailure { iterations, residual, reason } => write!(
                f,
                "solver failure after {iterations} iterations ({reason}), relative residual {residual:e}"
            ),
            Error::MeshDegeneration { element, area, sigma } => write!(
                f,
                "mesh degenerated at element {element} (area {area:e}, sigma {sigma:e})"
            ),
            Error::FixedPointDivergence(info) => write!(
                f,
                "fixed-point iteration did not converge in {} iterations (last increment {:e})",
                info.iterations, info.last_increment
            ),
            Error::BeyondExtinction { time, extinction } => {
                write!(f, "time {time} is beyond the extinction time {extinction}")
            }
        }
    }
}

impl core::error::Error for Error {}
