//! Numerical analysis of strongly competitive ODE flows.
//!
//! A flow is *competitive* when the time-reversed flow preserves a partial
//! order induced by a solid cone; it is *strongly competitive* when backward
//! time maps the order into its strict (interior) form. For such flows the
//! recurrent dynamics — the Birkhoff center — is severely constrained: it
//! lives on unordered invariant sets of codimension one, its components obey
//! an order-structure dichotomy, and in three dimensions the flow carries no
//! topological entropy.
//!
//! This crate turns those structural facts into computable, auditable
//! artifacts:
//!
//! - [`order`] / [`metrics`] — exact cone-order predicates for simplicial
//!   cones, joint cone-boundary margins, Hausdorff distance, separation index.
//! - [`scenario`] / [`integrate`] / [`equilibria`] / [`attractor`] — a small
//!   registry of competitive test systems, an adaptive Dormand–Prince 5(4)
//!   integrator for the flow `Φ_t` (forward and backward), Newton-based
//!   equilibrium censuses, Jacobian competitiveness checks, attractor
//!   bounding boxes, and backward-orbit (α-limit) classification.
//! - [`cover`] / [`transition`] — set-oriented outer approximation of the
//!   chain-recurrent set: box covers, sampled time-T transition digraphs,
//!   strongly connected components, iterative subdivision.
//! - [`recurrence`] — close returns, recurrent-time sets `N(z, θ)`, their
//!   syndetic-intersection audit, and IP-set generation/verification.
//! - [`structure`] — dichotomy classification of recurrent components,
//!   intersection-principle and limit-set audits, backward-basin labels,
//!   and the backward-limit construction of cell targets.
//! - [`cells`] — reconstruction of the invariant unordered cells `M_±(·)`
//!   as height fields over a hyperplane orthogonal to the canonical
//!   interior direction, with invariance/disjointness/containment audits.
//! - [`entropy`] — (T, ε)-spanning counts and the zero-entropy estimate.
//! - [`config`] / [`pipeline`] / [`report`] — TOML run configuration, the
//!   end-to-end pipelines behind the CLI subcommands, and deterministic
//!   CSV/text artifact writers.
//!
//! Everything is deterministic: a single `u64` seed fans out to every
//! sampling site by stable hashing, so identical configurations produce
//! byte-identical artifacts.

pub mod attractor;
pub mod cells;
pub mod config;
pub mod cover;
pub mod entropy;
pub mod equilibria;
pub mod error;
pub mod geom;
pub mod integrate;
pub mod metrics;
pub mod order;
pub mod pipeline;
pub mod recurrence;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod structure;
pub mod transition;

pub use error::{Error, Result};
