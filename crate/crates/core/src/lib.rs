//! Simulation and analysis toolkit for RIS-assisted wireless channels.
//!
//! The library covers the full sounding-and-characterization loop for
//! channels assisted by a reconfigurable intelligent surface (RIS):
//!
//! * [`signalgen`] — PN probe generation: m-sequences, BPSK mapping,
//!   root-raised-cosine pulse shaping, periodic autocorrelation.
//! * [`ris`] — the cascaded Tx–RIS–Rx sub-channel: per-cell geometry,
//!   optimal continuous phases, 1-bit quantization, and the coherent
//!   virtual line-of-sight (VLoS) gain for the supported reflection modes.
//! * [`channel`] — ground-truth channel synthesis: Saleh–Valenzuela
//!   cluster environments realized as tapped-delay-line impulse responses,
//!   optionally combined with the deterministic VLoS tap.
//! * [`sounder`] — the sounding chain: propagation through the channel,
//!   additive noise, correlation-based CIR estimation and back-to-back
//!   calibration.
//! * [`pdp`] — power delay profiles, multipath identification, delay
//!   dispersion parameters and wideband K-factor estimation.
//! * [`decay`] — power-law and exponential PDP decay model fitting with
//!   RMSE comparison.
//! * [`clustering`] — the bubbling cluster-start search and cluster
//!   statistics (arrival rate, inter-cluster intervals, intra-cluster
//!   delay spreads, decay factors).
//! * [`campaign`] — batch orchestration of synthetic measurement
//!   campaigns and analysis of externally recorded CIR snapshots.
//! * [`io`] — text interchange formats (CIR snapshots, PDP tables,
//!   codebook grids, ground-truth dumps).
//!
//! All randomized components are seeded explicitly and deterministic for a
//! fixed seed; campaign results are byte-identical across runs.

pub mod campaign;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod decay;
mod error;
mod fft;
pub mod io;
pub mod pdp;
pub mod ris;
pub mod signalgen;
pub mod sounder;
pub mod util;

pub use error::{Error, Result};

pub use channel::{ChannelMode, Cir, DecayModel, GroundTruth, SvParams};
pub use clustering::{BubbleParams, ClusterSet};
pub use pdp::{MultipathSet, Pdp};
pub use signalgen::{ComplexSignal, PnSequence, PulseShape};
