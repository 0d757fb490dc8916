//! FOAM: an Adam-style optimizer that stores its first and second moments
//! folded into block means of `2^l` adjacent columns, and restores the
//! detail lost by folding with the current gradient's residual.
//!
//! ```
//! use foam::fold::FoldSpec;
//! use foam::matrix::Matrix;
//! use foam::optim::{foam_step, FoamState, OptimizerConfig};
//!
//! let cfg = OptimizerConfig { alpha: 1.0, ..OptimizerConfig::default() };
//! let spec = FoldSpec::new(2, 8).unwrap();
//! let mut state = FoamState::new(4, spec, &cfg).unwrap();
//! assert_eq!(state.state_elements(), 16);
//!
//! let w = Matrix::zeros(4, 8);
//! let g = Matrix::filled(4, 8, 0.5);
//! let w = foam_step(&w, &g, &mut state, &cfg, 1e-3).unwrap();
//! assert!(w.as_slice().iter().all(|&x| x < 0.0));
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`], [`fold`], [`linalg`], [`rng`] and [`quant`] are the numeric
//!   building blocks.
//! * [`optim`] holds Adam, FOAM, FOAM-Mini, Adam-Mini, schedules, routing and
//!   state snapshots.
//! * [`tasks`] provides seeded desk-scale problems with exact gradients.
//! * [`diagnostics`], [`props`] and [`memory`] measure and verify.
//! * [`bench`] runs configured experiments and writes traces.

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod fold;
pub mod linalg;
pub mod matrix;
pub mod memory;
pub mod optim;
pub mod props;
pub mod quant;
pub mod rng;
pub mod tasks;

pub use error::{FoamError, Result};
pub use fold::FoldSpec;
pub use matrix::Matrix;

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/folding.md")]
    pub mod folding {}
    #[doc = include_str!("../../../book/src/residual.md")]
    pub mod residual {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    pub mod optimizers {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    pub mod quantization {}
    #[doc = include_str!("../../../book/src/memory.md")]
    pub mod memory {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub mod readme {}
