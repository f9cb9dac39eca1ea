//! Spectral toolkit for the Riemannian geometry of the 2-Wasserstein space
//! of the unit circle.
//!
//! Densities, potentials and 1-form coefficients are all truncated
//! trigonometric polynomials ([`TrigPoly`]). On top of that substrate the
//! crate provides the Otto metric, Lie brackets of constant fields, the
//! Levi-Civita connection and its Christoffel symbols, Hamilton–Jacobi
//! geodesics, the flow map `E_μ`, circle optimal transport, and the
//! curvature tensor, each paired with an independent numerical oracle.

pub mod calculus;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod measure;
pub mod metric;
pub mod transport;
pub mod trigpoly;

pub use calculus::OneForm;
pub use connection::{ChristoffelReport, ChristoffelSource, ChristoffelTable, ClosedFormVariant};
pub use curvature::{CurvatureReport, CurvatureSample};
pub use error::{Error, Result};
pub use geodesic::{GeodesicPath, GeodesicReport, VelocityField};
pub use measure::{CircleMap, Density, Potential, TangentVector};
pub use metric::{BasisKind, BasisLabel, GramMatrix, MetricReport};
pub use transport::{DiscreteMeasure, DisplacementReport};
pub use trigpoly::{QuadratureGrid, TrigPoly};
