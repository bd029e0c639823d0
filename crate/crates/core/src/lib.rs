//! Lattice Chern–Simons toolkit for SU(2) gauge fields on flat tori.
//!
//! The crate is organised bottom-up: [`lie`] holds the SU(2) core, [`forms`]
//! the discrete exterior calculus, and the remaining modules build gauge
//! theory on top of them.

pub mod cs;
pub mod error;
pub mod fields;
pub mod forms;
pub mod gauge;
pub mod holonomy;
pub mod io;
pub mod lie;
pub mod lines;
pub mod named;
pub mod rep;
pub mod spectral;

pub use error::{Error, Result};
pub use forms::{AlgebraForm, Form, ScalarForm, TorusGrid};
pub use gauge::GaugeMap;
pub use lie::{AlgebraElement, GroupElement};
