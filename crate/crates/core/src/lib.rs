//! Numerical laboratory for the sum generalized degrees of freedom of the MISO
//! broadcast channel with partial CSIT and arbitrary link strengths.
//!
//! * [`model`] and [`theorem`]: instances, channel sampling and the closed-form
//!   sum-GDoF values.
//! * [`budget`]: optimal split of a total CSIT budget across the links.
//! * [`scheme`]: layered rate-splitting / zero-forcing schemes simulated at
//!   finite SNR.
//! * [`ais`]: deterministic channel model and aligned-image-set enumeration.
//! * [`cli`]: the `gdof-lab` command-line front end.

pub mod ais;
pub mod budget;
pub mod cli;
pub mod error;
pub mod model;
pub mod scheme;
pub mod seed;
pub mod stats;
pub mod theorem;

pub use error::{Error, Result};
pub use model::{
    draw_channel, BoundedDensitySpec, ChannelExponents, ChannelRealization, ChannelSpec2,
    DensityFamily, Mat2, SymmetricSpecK,
};
pub use theorem::{
    classify_regime, effective_csit, sum_gdof_finite_precision, sum_gdof_k_symmetric,
    sum_gdof_two_user, sum_gdof_two_user_equivalent, Binding, GdofBreakdown, Regime,
};
