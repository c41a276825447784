//! Set-valued GNSS shadow matching built on constrained zonotopes.
//!
//! The crate is organized around a small geometry kernel and the estimation
//! pipeline on top of it:
//!
//! - [`conzono`]: constrained-zonotope algebra (Minkowski sum, intersection,
//!   pairwise convex hull, affine maps, vertex enumeration, membership).
//! - [`polygon`]: robust planar multi-polygon booleans used for ground-plane
//!   shadows and the evolving position estimate.
//! - [`mesh`] / [`map`]: triangle-mesh ingestion, building segmentation and
//!   conversion to constrained zonotopes, ground plane and area of interest.
//! - [`shadow`]: shadow directions, shadow volumes and 2-D GNSS shadows per
//!   satellite/building pair.
//! - [`runner`]: the snapshot shadow-matching estimator that refines a
//!   set-valued position by intersecting or subtracting per-satellite shadows.
//! - [`baseline`]: conventional grid-based shadow matching for comparison.
//! - [`scenario`]: satellite placement and ideal-classifier NLOS emulation.
//! - [`bench`]: the Minkowski-sum representation benchmark.

pub mod baseline;
pub mod bench;
pub mod conzono;
pub mod hull;
pub mod linalg;
pub mod lp;
pub mod map;
pub mod mesh;
pub mod polygon;
pub mod runner;
pub mod scenario;
pub mod shadow;

pub use conzono::{ConZono, VertexList};
pub use polygon::MultiPolygon2D;
