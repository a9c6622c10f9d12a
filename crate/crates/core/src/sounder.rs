//! Sounding chain simulation: propagation through the channel, additive
//! receiver noise, correlation-based CIR estimation and back-to-back
//! calibration.
//!
//! The probe is transmitted periodically, so propagation and correlation
//! are both circular over one period. With a unit-energy-normalized
//! reference the correlator returns channel taps at their true complex
//! amplitudes, with sidelobes bounded by the sequence autocorrelation
//! (1/K_c relative).

use crate::channel::Cir;
use crate::error::{Error, Result};
use crate::fft;
use crate::signalgen::ComplexSignal;
use crate::util::db_to_lin;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Sounder configuration.
#[derive(Debug, Clone)]
pub struct SounderConfig {
    /// Snapshots averaged per measurement point.
    pub snapshots: usize,
    /// Receiver noise power in dBm (`-inf` disables noise).
    pub noise_power_dbm: f64,
    /// Transmit power in dBm.
    pub transmit_power_dbm: f64,
    /// System dynamic range in dB.
    pub dynamic_range_db: f64,
}

impl Default for SounderConfig {
    fn default() -> Self {
        Self {
            snapshots: 10,
            noise_power_dbm: f64::NEG_INFINITY,
            transmit_power_dbm: 0.0,
            dynamic_range_db: 40.0,
        }
    }
}

impl SounderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(Error::InvalidParam("snapshot count must be >= 1".into()));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::InvalidParam("dynamic range must be positive".into()));
        }
        Ok(())
    }
}

/// Back-to-back system response used for calibration.
#[derive(Debug, Clone)]
pub struct CalibrationProfile {
    system_response: Cir,
}

impl CalibrationProfile {
    pub fn new(system_response: Cir) -> Result<Self> {
        let peak = system_response
            .taps()
            .iter()
            .map(|t| t.norm_sqr())
            .fold(0.0f64, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Degenerate(
                "calibration profile has no nonzero dominant tap".into(),
            ));
        }
        Ok(Self { system_response })
    }

    /// Identity profile (unit tap at delay 0) of a given length.
    pub fn identity(bins: usize, bin_interval_ns: f64) -> Self {
        let mut taps = vec![Complex64::new(0.0, 0.0); bins];
        taps[0] = Complex64::new(1.0, 0.0);
        Self {
            system_response: Cir::new(taps, bin_interval_ns, 0.0).expect("valid grid"),
        }
    }

    pub fn system_response(&self) -> &Cir {
        &self.system_response
    }
}

/// Spectral regularization floor for deconvolution, in dB below the peak
/// of the system response spectrum. Matches the system dynamic range.
pub const CALIBRATION_FLOOR_DB: f64 = 40.0;

/// Propagate one period of the probe through the channel.
///
/// Circular convolution over the signal length (periodic steady state)
/// plus circularly-symmetric complex Gaussian noise of the given power.
/// `noise_power_dbm = -inf` is noiseless. The CIR grid must be an integer
/// multiple of the signal sample interval.
pub fn propagate(
    x: &ComplexSignal,
    h: &Cir,
    noise_power_dbm: f64,
    rng_seed: u64,
) -> Result<ComplexSignal> {
    if x.is_empty() {
        return Err(Error::InvalidParam("empty input signal".into()));
    }
    let sample_ns = x.sample_interval() * 1e9;
    let ratio = h.bin_interval_ns() / sample_ns;
    if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::Mismatch(format!(
            "CIR bin interval {} ns is not an integer multiple of the sample interval {} ns",
            h.bin_interval_ns(),
            sample_ns
        )));
    }
    let step = ratio.round() as usize;
    let t0_samples = h.t0_ns() / sample_ns;
    if (t0_samples - t0_samples.round()).abs() > 1e-6 {
        return Err(Error::Mismatch(
            "CIR start offset is not aligned to the sample grid".into(),
        ));
    }
    let t0_samples = t0_samples.round() as usize;
    let n = x.len();
    if h.len() * step + t0_samples > n {
        return Err(Error::Mismatch(format!(
            "CIR span ({} taps x {step} samples) exceeds the signal period {n}",
            h.len()
        )));
    }

    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (k, &tap) in h.taps().iter().enumerate() {
        if tap == Complex64::new(0.0, 0.0) {
            continue;
        }
        let shift = t0_samples + k * step;
        for (i, out) in y.iter_mut().enumerate() {
            let src = (i + n - shift % n) % n;
            *out += tap * x.samples()[src];
        }
    }

    if noise_power_dbm > f64::NEG_INFINITY {
        let sigma2 = db_to_lin(noise_power_dbm);
        let comp = Normal::new(0.0, (sigma2 / 2.0).sqrt())
            .map_err(|e| Error::InvalidParam(format!("bad noise power: {e}")))?;
        let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
        for out in &mut y {
            out.re += comp.sample(&mut rng);
            out.im += comp.sample(&mut rng);
        }
    }

    ComplexSignal::new(y, x.sample_interval())
}

/// Estimate the CIR by circular cross-correlation with one reference
/// period.
///
/// Normalized by the reference energy so a unit through-channel yields a
/// unit tap. The output spans one period with the signal sample interval
/// as its bin width.
pub fn estimate_cir(y: &ComplexSignal, reference: &ComplexSignal) -> Result<Cir> {
    if y.is_empty() {
        return Err(Error::InvalidParam("empty received signal".into()));
    }
    if reference.len() < y.len() {
        return Err(Error::Mismatch(format!(
            "reference ({} samples) is shorter than one received period ({} samples)",
            reference.len(),
            y.len()
        )));
    }
    if reference.len() > y.len() {
        return Err(Error::Mismatch(format!(
            "reference ({} samples) is longer than one received period ({} samples)",
            reference.len(),
            y.len()
        )));
    }
    if (reference.sample_interval() - y.sample_interval()).abs() > 1e-9 * y.sample_interval() {
        return Err(Error::Mismatch("sample intervals differ".into()));
    }
    let energy = reference.energy();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("reference has zero energy".into()));
    }
    let mut corr = fft::circular_cross_correlation(y.samples(), reference.samples());
    let scale = 1.0 / energy;
    for c in &mut corr {
        *c *= scale;
    }
    Cir::new(corr, y.sample_interval() * 1e9, 0.0)
}

/// Remove the system response from a measured CIR by regularized
/// frequency-domain deconvolution (floor [`CALIBRATION_FLOOR_DB`] below
/// the spectral peak).
pub fn calibrate(measured: &Cir, profile: &CalibrationProfile) -> Result<Cir> {
    calibrate_with_floor(measured, profile, CALIBRATION_FLOOR_DB)
}

/// [`calibrate`] with an explicit regularization floor in dB.
pub fn calibrate_with_floor(
    measured: &Cir,
    profile: &CalibrationProfile,
    floor_db: f64,
) -> Result<Cir> {
    let sys = profile.system_response();
    if measured.len() != sys.len() {
        return Err(Error::Mismatch(format!(
            "measured CIR has {} taps, calibration profile has {}",
            measured.len(),
            sys.len()
        )));
    }
    if (measured.bin_interval_ns() - sys.bin_interval_ns()).abs() > 1e-9 * sys.bin_interval_ns() {
        return Err(Error::Mismatch("bin intervals differ".into()));
    }
    let mut spec_sys: Vec<Complex64> = sys.taps().to_vec();
    fft::forward(&mut spec_sys);
    let peak = spec_sys.iter().map(|s| s.norm_sqr()).fold(0.0f64, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Degenerate(
            "calibration profile spectrum is entirely below the regularization floor".into(),
        ));
    }
    let floor = peak * db_to_lin(-floor_db);

    let mut spec = measured.taps().to_vec();
    fft::forward(&mut spec);
    for (m, s) in spec.iter_mut().zip(&spec_sys) {
        let denom = s.norm_sqr().max(floor);
        *m = *m * s.conj() / denom;
    }
    fft::inverse(&mut spec);
    Cir::new(spec, measured.bin_interval_ns(), measured.t0_ns())
}
