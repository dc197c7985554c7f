//! Learned Riemannian metrics on the multinomial simplex.
//!
//! The crate is organised bottom-up:
//!
//! * [`simplex`] – exact geometry of the simplex: the `F_λ` transformation
//!   group, the sphere map, closed-form geodesic distances, the push-forward
//!   Jacobian, Gram matrix and volume element.
//! * [`likelihood`] – the inverse-volume density, its log-partition function
//!   computed by FFT-accelerated dynamic programming, and its gradient.
//! * [`optimizer`] – maximum-likelihood estimation of the metric parameter by
//!   exponentiated-gradient ascent.
//! * [`corpus`] – tokenization, vocabulary, TF embeddings and the TFIDF / L2
//!   baselines.
//! * [`eval`] – nearest-neighbor classification and the repeated random split
//!   protocol.
//! * [`synthetic`] – a seeded generator for a two-class benchmark corpus.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod likelihood;
pub mod optimizer;
pub mod simplex;
pub mod synthetic;

pub use error::{Error, Result};
pub use simplex::{MetricParam, SimplexPoint, SpherePoint};
