//! Reconstruction of road-network traffic conditions from sparse,
//! low-sampling-rate GPS traces, plus dynamic completion of data-deficient
//! regions with a built-in microscopic simulator.
//!
//! The crate is organized around the two phases of the pipeline:
//!
//! * phase one — [`matcher`] (travel-time relaxation), [`allocation`]
//!   (per-segment decomposition of pair gaps), [`estimation`] (convex initial
//!   estimate + iterative map-matching/EM refinement) and [`signal`]
//!   (compressed-sensing completion of weekly signals);
//! * phase two — [`demand`] (bilevel OD estimation), [`microsim`]
//!   (car-following simulator + traffic-equation propagator) and [`metaopt`]
//!   (metamodel trust-region search over turning ratios).
//!
//! [`network`] and [`traces`] hold the shared domain model and the synthetic
//! benchmark generators.

pub mod allocation;
pub mod demand;
pub mod estimation;
pub mod lp;
pub mod matcher;
pub mod metaopt;
pub mod microsim;
pub mod network;
pub mod rng;
pub mod signal;
pub mod traces;
