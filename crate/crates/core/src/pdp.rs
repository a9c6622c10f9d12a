//! Power delay profiles, multipath identification and delay dispersion
//! parameters.
//!
//! The PDP is the per-bin snapshot average of `|h|^2`. Multipaths are
//! strict local maxima above a double threshold: 30 dB below the peak
//! (system dynamic range) or 6.6 dB above the noise floor estimated from
//! the trailing 150 bins, whichever is higher. Dispersion parameters are
//! the linear path-power sum, the power-weighted mean delay and the
//! power-weighted RMS delay spread. The wideband K-factor uses a
//! frequency-domain moment estimator averaged over sub-bands.

use crate::channel::Cir;
use crate::error::{Error, Result};
use crate::fft;
use crate::util::{lin_to_db, mean_std, normal_cdf};
use num_complex::Complex64;

/// Number of trailing bins used to estimate the noise floor.
pub const NOISE_TAIL_BINS: usize = 150;
/// Dynamic-range threshold below the maximum path power, in dB.
pub const DYNAMIC_THRESHOLD_DB: f64 = 30.0;
/// Threshold above the noise floor, in dB.
pub const NOISE_THRESHOLD_DB: f64 = 6.6;
/// K-factor report cap in dB.
pub const K_FACTOR_CAP_DB: f64 = 40.0;

/// Per-bin average power versus delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    powers: Vec<f64>,
    bin_interval_ns: f64,
    snapshot_count: usize,
}

impl Pdp {
    pub fn new(powers: Vec<f64>, bin_interval_ns: f64, snapshot_count: usize) -> Result<Self> {
        if !(bin_interval_ns > 0.0 && bin_interval_ns.is_finite()) {
            return Err(Error::InvalidParam("bin interval must be positive".into()));
        }
        if powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParam(
                "PDP powers must be finite and non-negative".into(),
            ));
        }
        if snapshot_count == 0 {
            return Err(Error::InvalidParam("snapshot count must be >= 1".into()));
        }
        Ok(Self {
            powers,
            bin_interval_ns,
            snapshot_count,
        })
    }

    /// Linear per-bin powers (mW).
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn bin_interval_ns(&self) -> f64 {
        self.bin_interval_ns
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshot_count
    }

    pub fn delay_ns(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_interval_ns
    }

    /// Bin power in dBm (`-inf` for empty bins).
    pub fn power_dbm(&self, bin: usize) -> f64 {
        lin_to_db(self.powers[bin])
    }

    /// First `bins` bins as a new PDP.
    pub fn truncated(&self, bins: usize) -> Self {
        Self {
            powers: self.powers.iter().take(bins).copied().collect(),
            bin_interval_ns: self.bin_interval_ns,
            snapshot_count: self.snapshot_count,
        }
    }

    /// Copy with every bin below `threshold` (linear) zeroed.
    pub fn mask_below(&self, threshold: f64) -> Self {
        Self {
            powers: self
                .powers
                .iter()
                .map(|&p| if p >= threshold { p } else { 0.0 })
                .collect(),
            bin_interval_ns: self.bin_interval_ns,
            snapshot_count: self.snapshot_count,
        }
    }
}

/// Average the squared magnitudes of CIR snapshots into a PDP.
pub fn compute_pdp(snapshots: &[Cir]) -> Result<Pdp> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidParam("empty snapshot list".into()))?;
    for s in snapshots {
        if s.len() != first.len() {
            return Err(Error::Mismatch("snapshots have different lengths".into()));
        }
        if (s.bin_interval_ns() - first.bin_interval_ns()).abs() > 1e-9 * first.bin_interval_ns() {
            return Err(Error::Mismatch(
                "snapshots have different bin intervals".into(),
            ));
        }
    }
    let m = snapshots.len() as f64;
    let mut powers = vec![0.0f64; first.len()];
    for s in snapshots {
        for (acc, tap) in powers.iter_mut().zip(s.taps()) {
            *acc += tap.norm_sqr() / m;
        }
    }
    Pdp::new(powers, first.bin_interval_ns(), snapshots.len())
}

/// Where multipath enumeration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Start at the maximum-power path (LoS / VLoS scenarios); earlier
    /// bins are not enumerated.
    MaxPath,
    /// Start from absolute delay 0 (NLoS scenarios).
    ZeroDelay,
}

/// Identified multipath components with threshold metadata.
#[derive(Debug, Clone)]
pub struct MultipathSet {
    paths: Vec<(f64, f64)>,
    p_min_dbm: f64,
    noise_floor_dbm: f64,
    max_power_dbm: f64,
}

impl MultipathSet {
    /// Build directly from `(delay ns, linear power)` pairs; delays must
    /// be strictly increasing.
    pub fn from_paths(
        paths: Vec<(f64, f64)>,
        p_min_dbm: f64,
        noise_floor_dbm: f64,
        max_power_dbm: f64,
    ) -> Result<Self> {
        if paths.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParam(
                "path delays must be strictly increasing".into(),
            ));
        }
        if paths.iter().any(|&(_, p)| !(p > 0.0)) {
            return Err(Error::InvalidParam("path powers must be positive".into()));
        }
        Ok(Self {
            paths,
            p_min_dbm,
            noise_floor_dbm,
            max_power_dbm,
        })
    }

    /// `(delay ns, linear power)` pairs in increasing delay order.
    pub fn paths(&self) -> &[(f64, f64)] {
        &self.paths
    }

    pub fn p_min_dbm(&self) -> f64 {
        self.p_min_dbm
    }

    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_floor_dbm
    }

    pub fn max_power_dbm(&self) -> f64 {
        self.max_power_dbm
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Identify multipath components in a PDP.
///
/// The noise floor is the mean of the trailing [`NOISE_TAIL_BINS`] bins;
/// the acceptance threshold is `max(P_max - 30 dB, N_noise + 6.6 dB)`.
/// A bin qualifies when it strictly exceeds both neighbors and meets the
/// threshold. An all-quiet PDP yields an empty set, not an error.
pub fn identify_multipaths(pdp: &Pdp, start_mode: StartMode) -> Result<MultipathSet> {
    let n = pdp.len();
    if n < NOISE_TAIL_BINS + 10 {
        return Err(Error::InvalidParam(format!(
            "PDP needs at least {} bins for noise estimation, got {n}",
            NOISE_TAIL_BINS + 10
        )));
    }
    let powers = pdp.powers();
    let noise_floor = powers[n - NOISE_TAIL_BINS..].iter().sum::<f64>() / NOISE_TAIL_BINS as f64;
    let noise_floor_dbm = lin_to_db(noise_floor);
    let p_max = powers.iter().cloned().fold(0.0f64, f64::max);
    let max_power_dbm = lin_to_db(p_max);
    let p_min_dbm =
        (max_power_dbm - DYNAMIC_THRESHOLD_DB).max(noise_floor_dbm + NOISE_THRESHOLD_DB);
    let threshold = 10f64.powf(p_min_dbm / 10.0);

    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for k in 0..n {
        let p = powers[k];
        let left_ok = k == 0 || p > powers[k - 1];
        let right_ok = k == n - 1 || p > powers[k + 1];
        if left_ok && right_ok && p >= threshold && p > 0.0 {
            candidates.push((k, p));
        }
    }

    if start_mode == StartMode::MaxPath {
        if let Some(&(k_max, _)) = candidates
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            candidates.retain(|&(k, _)| k >= k_max);
        }
    }

    let paths = candidates
        .into_iter()
        .map(|(k, p)| (pdp.delay_ns(k), p))
        .collect();
    MultipathSet::from_paths(paths, p_min_dbm, noise_floor_dbm, max_power_dbm)
}

/// Total power of the identified multipaths in dBm.
pub fn received_power(mp: &MultipathSet) -> Result<f64> {
    if mp.is_empty() {
        return Err(Error::InvalidParam("empty multipath set".into()));
    }
    Ok(lin_to_db(mp.paths().iter().map(|&(_, p)| p).sum::<f64>()))
}

/// Power-weighted mean delay in ns.
pub fn mean_delay(mp: &MultipathSet) -> Result<f64> {
    if mp.is_empty() {
        return Err(Error::InvalidParam("empty multipath set".into()));
    }
    let total: f64 = mp.paths().iter().map(|&(_, p)| p).sum();
    Ok(mp.paths().iter().map(|&(t, p)| t * p).sum::<f64>() / total)
}

/// Power-weighted RMS delay spread in ns.
pub fn rms_delay_spread(mp: &MultipathSet) -> Result<f64> {
    let mean = mean_delay(mp)?;
    let total: f64 = mp.paths().iter().map(|&(_, p)| p).sum();
    let var = mp
        .paths()
        .iter()
        .map(|&(t, p)| (t - mean) * (t - mean) * p)
        .sum::<f64>()
        / total;
    Ok(var.sqrt())
}

/// Delay-dispersion summary for one measurement point.
#[derive(Debug, Clone)]
pub struct DispersionReport {
    pub received_power_dbm: f64,
    pub max_path_power_dbm: f64,
    pub max_path_delay_ns: f64,
    pub mean_delay_ns: f64,
    pub rms_delay_spread_ns: f64,
    pub k_factor_db: f64,
    pub k_factor_capped: bool,
}

impl DispersionReport {
    pub fn from_multipaths(mp: &MultipathSet, k: KFactorEstimate) -> Result<Self> {
        let &(max_delay, max_power) = mp
            .paths()
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| Error::InvalidParam("empty multipath set".into()))?;
        Ok(Self {
            received_power_dbm: received_power(mp)?,
            max_path_power_dbm: lin_to_db(max_power),
            max_path_delay_ns: max_delay,
            mean_delay_ns: mean_delay(mp)?,
            rms_delay_spread_ns: rms_delay_spread(mp)?,
            k_factor_db: k.k_db,
            k_factor_capped: k.capped,
        })
    }
}

/// Wideband K-factor estimate.
#[derive(Debug, Clone, Copy)]
pub struct KFactorEstimate {
    pub k_db: f64,
    /// Set when the cap was applied (including the degenerate
    /// zero-variance case).
    pub capped: bool,
}

/// Moment-based wideband K-factor over frequency sub-bands.
///
/// Each snapshot CIR is transformed to the frequency domain; per
/// frequency bin the deterministic-to-diffuse ratio is estimated as
/// `|sample mean|^2 / sample variance` across snapshots, averaged within
/// each sub-band, then across sub-bands. The result is reported in dB
/// and capped at [`K_FACTOR_CAP_DB`]; a zero-variance (fully
/// deterministic) input returns the cap with `capped` set.
pub fn k_factor(snapshots: &[Cir], sub_bands: usize) -> Result<KFactorEstimate> {
    let m = snapshots.len();
    if m < 2 {
        return Err(Error::InvalidParam(
            "K-factor needs at least 2 snapshots".into(),
        ));
    }
    if sub_bands == 0 {
        return Err(Error::InvalidParam("sub-band count must be >= 1".into()));
    }
    let n = snapshots[0].len();
    if n == 0 {
        return Err(Error::InvalidParam("empty snapshots".into()));
    }
    if sub_bands > n {
        return Err(Error::InvalidParam(format!(
            "sub-band count {sub_bands} exceeds {n} frequency bins"
        )));
    }
    if snapshots.iter().any(|s| s.len() != n) {
        return Err(Error::Mismatch("snapshots have different lengths".into()));
    }

    // Frequency response per snapshot.
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for s in snapshots {
        let mut buf = s.taps().to_vec();
        fft::forward(&mut buf);
        spectra.push(buf);
    }

    let mut k_per_bin = Vec::with_capacity(n);
    for f in 0..n {
        let mean: Complex64 = spectra.iter().map(|s| s[f]).sum::<Complex64>() / m as f64;
        let var: f64 = spectra
            .iter()
            .map(|s| (s[f] - mean).norm_sqr())
            .sum::<f64>()
            / (m as f64 - 1.0);
        if var == 0.0 {
            return Ok(KFactorEstimate {
                k_db: K_FACTOR_CAP_DB,
                capped: true,
            });
        }
        k_per_bin.push(mean.norm_sqr() / var);
    }

    // Contiguous sub-bands, then the mean of sub-band means.
    let mut band_means = Vec::with_capacity(sub_bands);
    let base = n / sub_bands;
    let rem = n % sub_bands;
    let mut idx = 0;
    for b in 0..sub_bands {
        let size = base + usize::from(b < rem);
        let band = &k_per_bin[idx..idx + size];
        band_means.push(band.iter().sum::<f64>() / band.len() as f64);
        idx += size;
    }
    let k_lin = band_means.iter().sum::<f64>() / band_means.len() as f64;
    let k_db = lin_to_db(k_lin);
    if k_db > K_FACTOR_CAP_DB {
        Ok(KFactorEstimate {
            k_db: K_FACTOR_CAP_DB,
            capped: true,
        })
    } else {
        Ok(KFactorEstimate {
            k_db,
            capped: false,
        })
    }
}

/// Gaussian fit of an empirical sample with CDF tables.
#[derive(Debug, Clone)]
pub struct GaussianCdfFit {
    pub mu: f64,
    pub sigma: f64,
    /// `(value, empirical cdf)` at each sorted sample.
    pub empirical: Vec<(f64, f64)>,
    /// `(value, fitted normal cdf)` at the same points.
    pub fitted: Vec<(f64, f64)>,
}

/// Fit a Gaussian to a sample (sample mean, n-1 standard deviation) and
/// tabulate the empirical and fitted CDFs.
pub fn fit_cdf_gaussian(values: &[f64]) -> Result<GaussianCdfFit> {
    if values.len() < 2 {
        return Err(Error::InvalidParam(
            "CDF fit needs at least 2 values".into(),
        ));
    }
    let (mu, sigma) = mean_std(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let empirical: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n))
        .collect();
    let fitted: Vec<(f64, f64)> = sorted
        .iter()
        .map(|&v| {
            let cdf = if sigma == 0.0 {
                if v < mu {
                    0.0
                } else {
                    1.0
                }
            } else {
                normal_cdf((v - mu) / sigma)
            };
            (v, cdf)
        })
        .collect();
    Ok(GaussianCdfFit {
        mu,
        sigma,
        empirical,
        fitted,
    })
}
