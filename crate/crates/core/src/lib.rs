//! Lyapunov exponents and dispersion parameters of random products of the
//! digit matrices that count binomial-type coefficients modulo 2.

pub mod catalog;
pub mod conjugate;
pub mod digitsum;
pub mod error;
pub mod exactmat;
pub mod gle;
pub mod mcsim;
pub mod numeric;
pub mod words;

pub use error::{Error, Result};
