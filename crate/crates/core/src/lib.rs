//! Numerical laboratory for absolutely continuous spectrum of operators on
//! Galton-Watson trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`halfplane`]: points of the upper half-plane, the semicircle and
//!   modified Kesten-McKay transforms, and the `γ` semi-metric.
//! * [`offspring`]: offspring laws, size-biasing, extinction, skeleton
//!   decomposition and the `α_p(λ)` / `β_p(λ)` control parameters.
//! * [`tree`]: finite tree sampling, exact root resolvents, a dense linear
//!   algebra oracle and Karp-Sipser leaf removal.
//! * [`rde`]: population dynamics for the resolvent recursive distributional
//!   equations.
//! * [`contraction`]: empirical checks of the hyperbolic contraction
//!   machinery.
//! * [`forbidden`]: small-tree spectra and the excluded set `B(ε)`.
//! * [`spectra`]: density estimates, AC-mass lower bounds, Simon-Klein
//!   traces and the three replication pipelines.
//! * [`experiment`]: flat JSON configs, deterministic outputs and manifests
//!   (used by the `gwspectra` binary).
//!
//! Randomness is always drawn from counter-keyed ChaCha streams (see [`rng`])
//! so every result is independent of the worker count, and the `parallel`
//! feature only changes wall-clock time.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contraction;
pub mod error;
pub mod experiment;
pub mod forbidden;
pub mod halfplane;
pub mod offspring;
pub mod par;
pub mod quad;
pub mod rde;
pub mod rng;
pub mod spectra;
pub mod tree;

pub use error::{Error, Result};
pub use halfplane::HalfPlanePoint;
pub use num_complex::Complex64;
pub use offspring::{OffspringLaw, SkeletonSplitLaw};
pub use par::Exec;
