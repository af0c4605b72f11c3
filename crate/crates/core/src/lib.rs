//! Measurement incompatibility: robustness certificates, state-discrimination
//! games with pre- and post-measurement information, and explicit tasks that
//! saturate the advantage bound.

// Links the system OpenBLAS used by the SDP backend.
use openblas_src as _;

pub mod conic;
pub mod construction;
pub mod discrimination;
pub mod error;
pub mod incompatibility;
pub mod io;
pub mod linalg;
pub mod measurements;
pub mod oracle;
pub mod par;
pub mod random;

pub use error::{Error, Result};
