//! Spin-bath decoherence toolkit for N-V centers in nitrogen-rich diamond.
//!
//! Everything here is pure computation: first-order resonance fields,
//! cw-EPR stick and derivative spectra, thermal bath polarization and the
//! relaxation-rate models built on it, a random-telegraph Hahn-echo
//! simulator, and a damped least-squares fitter with the model registry.
//!
//! The crate is `no_std` with `alloc`. Transcendental functions come from
//! `libm` so results are bit-reproducible across platforms. File formats,
//! parallel drivers and the CLI live in the `spinbath` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is the NaN-rejecting range check used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bath;
pub mod constants;
pub mod datasets;
mod error;
pub mod fit;
pub mod pulse;
pub mod spectra;
pub mod spin;
pub mod units;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bath::{
        flip_flop_factor, polarization, t1_rate, t2_rate, BathModelParams, PolarizationPoint,
        T1Params, T2Params,
    };
    pub use crate::constants::PhysicalConstants;
    pub use crate::fit::{fit, registry, FitOptions, FitResult, ModelSpec, Series};
    pub use crate::pulse::{BathNoiseConfig, DecayTrace, Sequence};
    pub use crate::spectra::{analyze_peaks, build_sticks, convolve, FieldGrid, StickOptions};
    pub use crate::spin::{CenterKind, CenterParams, HalfInt, TransitionSpec};
    pub use crate::units::{PerMicrosecond, PerSecond};
    pub use crate::{Error, Result};
}
