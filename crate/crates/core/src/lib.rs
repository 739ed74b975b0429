//! Comparison of a discrete-variable quantum repeater (Werner-pair
//! purification and swapping, with an N-mode teleporter to carry a
//! continuous-variable state) against a continuous-variable repeater built
//! from noiseless linear amplification and homodyne swapping.

pub mod compare;
pub mod cv;
pub mod dv;
pub mod error;
pub mod fock;
pub mod gaussian;
mod linalg;
pub mod measures;
pub mod oracle;
pub mod rate;
pub mod teleporter;
pub mod validate;

pub use error::{Error, Result};
pub use fock::{make_tmsv, ChannelSpec, FockDensity, TmsvParam, Truncation};
pub use gaussian::TwoModeCovariance;
pub use measures::{EntanglementReport, EofMethod};
