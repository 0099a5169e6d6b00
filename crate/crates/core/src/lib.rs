//! Forward models and least-squares inversion for NV-detected nanoscale NMR
//! of hexagonal ice.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] enumerates the proton-dimer directions of ice I_h and
//!   rotates them into the laboratory frame.
//! * [`dipolar`] turns dimer angles into dipolar splittings and the model
//!   spectrum (Gaussian doublets for H₂O, triplets for HDO, filter envelope).
//! * [`spinsim`] is an exact dense-matrix simulator for an NV spin plus a few
//!   nuclei. It is the brute-force oracle for the analytic formulas.
//! * [`sigproc`] models the measurement chain: under-sampling, DFT,
//!   Nyquist-zone unfolding, sinusoid and Gaussian peak fits.
//! * [`fit`] inverts spectra for orientation, HDO fraction, bond length and
//!   the gyromagnetic slope.
//!
//! Frequencies are in kHz throughout, times in seconds, fields in gauss,
//! lengths in ångström and angles in degrees.

pub mod dipolar;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod lsq;
pub mod sigproc;
pub mod spinsim;

pub use dipolar::{
    coupling_parameter, hetero_splitting, splitting, synthesize_from_angles, synthesize_spectrum,
    DipolarParams, Line, PhysicalConstants, SampledCurve, SpectrumModel, SpectrumParams,
};
pub use error::{Error, Result};

pub use geometry::{CrystalOrientation, DimerSet, Frame, Sublattice, Vec3};

pub use fit::{FitResult, OrientationFitOptions};
pub use sigproc::{Peak, PeakList, Spectrum};
pub use spinsim::{PulseSequence, SpinSystem, TimeSeries};
