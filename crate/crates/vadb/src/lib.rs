//! Numerical laboratory for conformal-metric convergence experiments on
//! model manifolds with boundary.
//!
//! The library builds sequences of conformal metrics `c(x) * g0` on a small
//! zoo of model manifolds (disk, annulus, round sphere, flat torus), measures
//! them (volumes, boundary areas, graph geodesics, diameters), and assembles
//! the quantitative ingredients of a volume-above-distance-below (VADB)
//! convergence certificate: hypothesis checks, distance-distortion
//! statistics, good-set selection, and the explicit flat-distance upper
//! bound built from a glued estimate space.
//!
//! Everything is deterministic given its inputs and a seed. The crate never
//! estimates a flat or intrinsic-flat distance itself; it computes the
//! closed-form upper bound and the measured quantities that feed it.
//!
//! Entry points:
//! - [`manifold::ModelManifold`], [`metric::ConformalMetric`]: geometry.
//! - [`mesh::MeshGraph`]: geodesic engine on jittered point-cloud graphs.
//! - [`measure`]: volume and boundary-area quadrature.
//! - [`families`]: the three built-in metric families.
//! - [`collar`]: boundary collars, curve clamping, convexification.
//! - [`zspace`]: the glued estimate space and distances in it.
//! - [`verify`]: hypothesis verdicts, distortion statistics, good sets,
//!   the flat-distance bound, and the experiment runner.
//! - [`cli`]: the command-line surface used by the `vadb` binary.

pub mod families;
pub mod manifold;
pub mod measure;
pub mod mesh;
pub mod metric;
pub mod profile;
pub mod cli;
pub mod collar;
pub mod config;
pub mod report;
pub mod verify;
pub mod zspace;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror the failure surfaces of the public operations: geometric
/// domain violations, malformed inputs, parameter constraint violations,
/// construction failures, chart-range violations, and numerical-range
/// problems. I/O failures are kept separate so the CLI can map them to a
/// dedicated exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the manifold the operation was asked about.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input value is structurally invalid (non-finite, wrong length, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A named parameter violates its documented constraint.
    #[error("parameter `{name}` violates constraint: {constraint}")]
    Param { name: String, constraint: String },

    /// An operation was asked of an object that cannot support it.
    #[error("usage error: {0}")]
    Usage(String),

    /// An object could not be built from admissible inputs.
    #[error("construction error: {0}")]
    Construction(String),

    /// A point lies outside the range of validity of a chart.
    #[error("chart range error: {0}")]
    ChartRange(String),

    /// A numerical procedure left its range of validity (step underflow, ...).
    #[error("numerical range error: {0}")]
    NumericalRange(String),

    /// Filesystem failure, kept separate for exit-code mapping.
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Serialization / deserialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &str, constraint: impl Into<String>) -> Self {
        Error::Param {
            name: name.to_string(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that every coordinate is finite; used at public API boundaries.
pub(crate) fn ensure_finite(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} contains a non-finite value")))
    }
}
