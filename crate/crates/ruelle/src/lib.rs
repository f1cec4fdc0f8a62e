//! # ruelle
//!
//! A numerical workbench for the thermodynamic formalism of one-dimensional
//! lattices `Omega = M^N` whose symbol set `M` is a compact metric space
//! carrying an *a priori* measure. The continuum is replaced by a fixed
//! quadrature rule on `M`, which turns every transfer-operator integral into
//! a finite weighted sum; the discretized system is itself an instance of the
//! theory, so operator identities hold to machine precision and can be tested
//! as exact cross-checks.
//!
//! The main objects:
//!
//! * [`AprioriSpace`] — the symbol set with quadrature weights and a metric
//!   (finite alphabets and the circle).
//! * [`GridFunction`] / [`GibbsWeights`] — cylinder functions of finite depth
//!   and cylinder probability weights.
//! * [`transfer`] — the transfer operator `(L_f w)(x) = ∫ e^{f(ax)} w(ax) dν(a)`,
//!   its leading eigendata, potential normalization, Gibbs measures, the
//!   resolvent on mean-zero functions, and kernel/coboundary projections.
//! * [`thermo`] — pressure, entropy, their first and second directional
//!   derivatives, and the asymptotic variance by four independent routes.
//! * [`clt`] — a Monte Carlo verifier for the central limit theorem of
//!   Birkhoff sums under Gibbs measures.
//! * [`markovbasis`] — explicit orthonormal Haar and kernel bases for
//!   two-symbol Markov measures.
//!
//! Entropy in this crate is always taken relative to the a priori measure:
//! `h(mu_f) = -∫ f dmu_f` for a normalized potential `f`. In probability mode
//! it is nonpositive and maximal (zero) at the a priori product measure; with
//! counting weights on a finite alphabet it coincides with the usual
//! Kolmogorov–Sinai entropy.

pub mod apriori;
pub mod clt;
mod error;
pub mod fd;
pub mod funcspace;
pub mod markovbasis;
pub mod thermo;
pub mod transfer;
pub(crate) mod words;

pub use apriori::{AprioriSpace, WeightMode};
pub use error::{Error, Result};
pub use funcspace::{inner_product, GibbsWeights, GridFunction};
pub use transfer::{RpfOptions, RpfSolution, TransferMatrix};
