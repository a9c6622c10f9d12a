//! Ground-truth channel synthesis.
//!
//! Stochastic cluster environments follow the Saleh–Valenzuela structure:
//! the cluster count is Poisson in the delay span, consecutive cluster
//! arrivals are separated by a shifted-exponential interval, and ray
//! powers decay either exponentially (cluster and ray decay constants) or
//! by a power law in delay. Rays carry uniform phases; amplitudes are the
//! square root of the mean power unless per-ray Rayleigh fading is
//! enabled. Realized rays are quantized onto a fixed delay grid, one
//! complex tap per bin, to form the channel impulse response.
//!
//! Conventions:
//! * the first cluster arrives at delay 0;
//! * power-law delays are referenced to 1 ns (delays below 1 ns clamp to
//!   the reference, so the first ray is never amplified);
//! * a cluster's ray train is truncated just before the next cluster
//!   start, matching the delay-interval assignment used by the clustering
//!   stage;
//! * ray arrivals are drawn continuously and then realized on the delay
//!   grid, at most one component per bin within a cluster, with the mean
//!   power following the decay law at the realized grid delay (the
//!   tapped-delay-line reading: the tap is the component);
//! * drawing zero clusters retries on the same random stream, so returned
//!   realizations always hold at least one cluster.

use crate::error::{Error, Result};
use crate::util::db_to_lin;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use std::f64::consts::TAU;

/// Channel mode under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelMode {
    WithoutRis,
    Specular,
    IntelligentQuantized,
    IntelligentContinuous,
}

impl ChannelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::WithoutRis => "without_ris",
            Self::Specular => "specular",
            Self::IntelligentQuantized => "intelligent_quantized",
            Self::IntelligentContinuous => "intelligent_continuous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "without_ris" => Ok(Self::WithoutRis),
            "specular" => Ok(Self::Specular),
            "intelligent_quantized" => Ok(Self::IntelligentQuantized),
            "intelligent_continuous" => Ok(Self::IntelligentContinuous),
            other => Err(Error::InvalidParam(format!(
                "unknown channel mode '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complex tap vector on a fixed delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    taps: Vec<Complex64>,
    bin_interval_ns: f64,
    t0_ns: f64,
}

impl Cir {
    pub fn new(taps: Vec<Complex64>, bin_interval_ns: f64, t0_ns: f64) -> Result<Self> {
        if !(bin_interval_ns > 0.0 && bin_interval_ns.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "bin interval must be positive, got {bin_interval_ns}"
            )));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidParam("CIR contains non-finite taps".into()));
        }
        Ok(Self {
            taps,
            bin_interval_ns,
            t0_ns,
        })
    }

    pub fn zeros(bins: usize, bin_interval_ns: f64) -> Self {
        Self {
            taps: vec![Complex64::new(0.0, 0.0); bins],
            bin_interval_ns,
            t0_ns: 0.0,
        }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn bin_interval_ns(&self) -> f64 {
        self.bin_interval_ns
    }

    pub fn t0_ns(&self) -> f64 {
        self.t0_ns
    }

    /// Delay of bin `k` in ns.
    pub fn delay_ns(&self, k: usize) -> f64 {
        self.t0_ns + k as f64 * self.bin_interval_ns
    }

    /// Add a complex amplitude into the bin nearest to `delay_ns`.
    pub fn add_tap(&mut self, delay_ns: f64, amplitude: Complex64) -> Result<()> {
        let k = (delay_ns - self.t0_ns) / self.bin_interval_ns;
        let bin = k.round();
        if bin < 0.0 || bin >= self.taps.len() as f64 {
            return Err(Error::OutOfRange(format!(
                "delay {delay_ns} ns outside the {}-bin observation window",
                self.taps.len()
            )));
        }
        self.taps[bin as usize] += amplitude;
        Ok(())
    }

    /// First `bins` taps as a new CIR (analysis/storage window).
    pub fn truncated(&self, bins: usize) -> Self {
        Self {
            taps: self.taps.iter().take(bins).copied().collect(),
            bin_interval_ns: self.bin_interval_ns,
            t0_ns: self.t0_ns,
        }
    }
}

/// Ray power decay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// Doubly exponential decay: `p0 * exp(-T_l / gamma_cluster) *
    /// exp(-tau / gamma_ray)`; constants in ns, `p0_db` in dB.
    Exponential {
        gamma_cluster_ns: f64,
        gamma_ray_ns: f64,
        p0_db: f64,
    },
    /// Log-delay power law: the first-ray power of a cluster at `T_l` is
    /// `eta0_db - 10 n_cluster log10(T_l)` dB and rays within a cluster
    /// fall off as `-10 n_ray log10(tau)` dB relative to the first ray.
    PowerLaw {
        n_cluster: f64,
        n_ray: f64,
        eta0_db: f64,
    },
}

/// Saleh–Valenzuela generator parameters.
#[derive(Debug, Clone)]
pub struct SvParams {
    /// Cluster arrival rate in 1/ns.
    pub cluster_rate_per_ns: f64,
    /// Ray arrival rate within a cluster in 1/ns (free-running mode).
    pub ray_rate_per_ns: f64,
    pub decay: DecayModel,
    /// Cluster generation span in ns.
    pub t_dur_ns: f64,
    /// Shifted-exponential offset of inter-cluster intervals in ns.
    pub tau0_offset_ns: f64,
    /// When set, clusters are synthesized as compact two-ray groups whose
    /// intra-cluster RMS delay spread targets a log-normal law:
    /// `10 log10(rms_ns) ~ N(mu, sigma^2)`. Separations clamp to two
    /// delay bins, the resolution below which local-maximum multipath
    /// identification cannot tell two rays apart.
    pub intra_rms_log: Option<(f64, f64)>,
    /// Per-ray Rayleigh amplitude fading (off: deterministic
    /// `sqrt(mean power)` amplitudes).
    pub rayleigh_fading: bool,
    /// CIR grid resolution in ns.
    pub bin_interval_ns: f64,
    /// CIR storage window in ns.
    pub window_ns: f64,
}

impl Default for SvParams {
    fn default() -> Self {
        Self {
            cluster_rate_per_ns: 7.1e-3,
            ray_rate_per_ns: 0.1,
            decay: DecayModel::PowerLaw {
                n_cluster: 1.0,
                n_ray: 0.88,
                eta0_db: -50.0,
            },
            t_dur_ns: 300.0,
            tau0_offset_ns: 25.0,
            intra_rms_log: None,
            rayleigh_fading: false,
            bin_interval_ns: 5.0,
            window_ns: 1500.0,
        }
    }
}

impl SvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_rate_per_ns > 0.0) || !(self.ray_rate_per_ns > 0.0) {
            return Err(Error::InvalidParam("arrival rates must be positive".into()));
        }
        if !(self.t_dur_ns > 0.0) {
            return Err(Error::InvalidParam("t_dur must be positive".into()));
        }
        if self.tau0_offset_ns < 0.0 {
            return Err(Error::InvalidParam("tau0 offset must be >= 0".into()));
        }
        match self.decay {
            DecayModel::Exponential {
                gamma_cluster_ns,
                gamma_ray_ns,
                ..
            } => {
                if !(gamma_cluster_ns > 0.0 && gamma_ray_ns > 0.0) {
                    return Err(Error::InvalidParam(
                        "decay constants must be positive".into(),
                    ));
                }
            }
            DecayModel::PowerLaw {
                n_cluster, n_ray, ..
            } => {
                if !(n_cluster > 0.0 && n_ray > 0.0) {
                    return Err(Error::InvalidParam("decay factors must be positive".into()));
                }
            }
        }
        if let Some((_, sigma)) = self.intra_rms_log {
            if sigma < 0.0 {
                return Err(Error::InvalidParam(
                    "intra-cluster sigma must be >= 0".into(),
                ));
            }
        }
        if !(self.bin_interval_ns > 0.0) || !(self.window_ns > 0.0) {
            return Err(Error::InvalidParam(
                "grid parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    fn window_bins(&self) -> usize {
        (self.window_ns / self.bin_interval_ns).round() as usize
    }
}

/// The realized cluster/ray structure behind a synthesized CIR.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Cluster first-arrival delays in ns (continuous draws), strictly
    /// increasing. The first cluster arrives at 0.
    pub cluster_starts_ns: Vec<f64>,
    /// Per-cluster rays as `(relative delay ns, mean power)` with the
    /// first ray at relative delay 0. Relative delays are grid-realized:
    /// multiples of the bin interval as placed in the CIR.
    pub clusters: Vec<Vec<(f64, f64)>>,
}

impl GroundTruth {
    /// Consecutive inter-cluster intervals in ns.
    pub fn intervals(&self) -> Vec<f64> {
        self.cluster_starts_ns
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }

    /// Power-weighted intra-cluster RMS delay spread per cluster.
    pub fn intra_rms(&self) -> Vec<f64> {
        self.intra_rms_above(f64::INFINITY)
    }

    /// Like [`Self::intra_rms`] but keeps only rays whose power is within
    /// `range_db` of the strongest ray in the realization, mirroring a
    /// measurement floor.
    pub fn intra_rms_above(&self, range_db: f64) -> Vec<f64> {
        let peak = self
            .clusters
            .iter()
            .flatten()
            .map(|&(_, p)| p)
            .fold(0.0f64, f64::max);
        let floor = if range_db.is_finite() {
            peak * db_to_lin(-range_db)
        } else {
            0.0
        };
        self.clusters
            .iter()
            .map(|rays| {
                let pts: Vec<(f64, f64)> =
                    rays.iter().copied().filter(|&(_, p)| p >= floor).collect();
                weighted_rms(&pts)
            })
            .collect()
    }
}

fn weighted_rms(points: &[(f64, f64)]) -> f64 {
    let total: f64 = points.iter().map(|&(_, p)| p).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean: f64 = points.iter().map(|&(d, p)| d * p).sum::<f64>() / total;
    let var: f64 = points
        .iter()
        .map(|&(d, p)| (d - mean) * (d - mean) * p)
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Draw a cluster count from the Poisson law `P(rate * t_dur)`.
///
/// This is the raw, unconditioned draw; [`synth_sv`] redraws until the
/// count is at least one.
pub fn sample_cluster_count<R: Rng>(params: &SvParams, rng: &mut R) -> u64 {
    let mean = params.cluster_rate_per_ns * params.t_dur_ns;
    let poisson = Poisson::new(mean).expect("validated rate");
    poisson.sample(rng) as u64
}

/// First-ray (cluster) mean power for a cluster starting at `t_l` ns.
fn cluster_power(decay: &DecayModel, t_l: f64) -> f64 {
    match *decay {
        DecayModel::Exponential {
            gamma_cluster_ns,
            p0_db,
            ..
        } => db_to_lin(p0_db) * (-t_l / gamma_cluster_ns).exp(),
        DecayModel::PowerLaw {
            n_cluster, eta0_db, ..
        } => db_to_lin(eta0_db - 10.0 * n_cluster * t_l.max(1.0).log10()),
    }
}

/// Ray mean power at relative delay `tau` ns inside a cluster whose
/// first-ray power is `p_first`.
fn ray_power(decay: &DecayModel, p_first: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return p_first;
    }
    match *decay {
        DecayModel::Exponential { gamma_ray_ns, .. } => p_first * (-tau / gamma_ray_ns).exp(),
        DecayModel::PowerLaw { n_ray, .. } => {
            p_first * db_to_lin(-10.0 * n_ray * tau.max(1.0).log10())
        }
    }
}

/// Intra-cluster RMS delay spread of a two-ray cluster `{(0, p), (d, p *
/// rel(d))}` as a function of the ray separation `d`.
fn two_ray_rms(decay: &DecayModel, d: f64) -> f64 {
    let r = ray_power(decay, 1.0, d);
    d * r.sqrt() / (1.0 + r)
}

/// Solve `two_ray_rms(d) = target` for the separation `d` by bisection on
/// the increasing branch. Targets beyond the achievable maximum clamp.
fn solve_two_ray_separation(decay: &DecayModel, target: f64) -> f64 {
    let mut reach = 1.0f64;
    let mut best = two_ray_rms(decay, reach);
    // Walk outward until the spread stops growing (exponential decay has
    // a maximum; the power law grows without bound for n_ray < 2).
    let mut d = 1.0;
    for _ in 0..64 {
        d *= 1.5;
        let v = two_ray_rms(decay, d);
        if v > best {
            best = v;
            reach = d;
        } else {
            break;
        }
        if best >= target {
            break;
        }
    }
    if best <= target {
        return reach;
    }
    let mut lo = 0.0;
    let mut hi = reach;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if two_ray_rms(decay, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Synthesize one channel realization.
///
/// Deterministic for a fixed seed. Returns the gridded CIR together with
/// the generating cluster/ray ground truth (continuous cluster starts,
/// grid-aligned ray delays).
pub fn synth_sv(params: &SvParams, rng_seed: u64) -> Result<(Cir, GroundTruth)> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);

    // Cluster count; zero draws retry on the same stream.
    let mut n_clusters = sample_cluster_count(params, &mut rng);
    let mut retries = 0;
    while n_clusters == 0 {
        retries += 1;
        if retries > 100_000 {
            return Err(Error::InvalidParam(
                "cluster rate too low: cannot draw a nonempty realization".into(),
            ));
        }
        n_clusters = sample_cluster_count(params, &mut rng);
    }

    // Cluster starts: first at 0, then shifted-exponential intervals.
    let exp_cluster = Exp::new(params.cluster_rate_per_ns).expect("validated rate");
    let mut starts = vec![0.0f64];
    for _ in 1..n_clusters {
        let interval = params.tau0_offset_ns + exp_cluster.sample(&mut rng);
        starts.push(starts.last().unwrap() + interval);
    }

    let bin = params.bin_interval_ns;
    let mut cir = Cir::zeros(params.window_bins(), bin);
    let mut clusters: Vec<Vec<(f64, f64)>> = Vec::with_capacity(starts.len());
    let exp_ray = Exp::new(params.ray_rate_per_ns).expect("validated rate");

    for (l, &t_l) in starts.iter().enumerate() {
        let p_first = cluster_power(&params.decay, t_l);
        // Ray train ends just before the next cluster start (or the end of
        // the generation span for the last cluster).
        let extent = if l + 1 < starts.len() {
            (starts[l + 1] - t_l - 0.5 * bin).max(0.0)
        } else {
            (params.t_dur_ns - t_l).max(0.0)
        };

        let mut rel_delays = vec![0.0f64];
        if let Some((mu, sigma)) = params.intra_rms_log {
            let normal = Normal::new(mu, sigma).expect("validated sigma");
            let target_rms = db_to_lin(normal.sample(&mut rng));
            // Two identifiable rays must sit at least two bins apart.
            let d = solve_two_ray_separation(&params.decay, target_rms).max(2.0 * bin);
            if d <= extent || l + 1 == starts.len() {
                rel_delays.push(d);
            }
        } else {
            let mut tau = 0.0;
            loop {
                tau += exp_ray.sample(&mut rng);
                if tau > extent {
                    break;
                }
                rel_delays.push(tau);
            }
        }

        // Realize arrivals on the delay grid, one component per bin: the
        // relative delay becomes the bin offset from the cluster's own
        // first-ray bin and the mean power follows the law there.
        let start_bin = (t_l / bin).round();
        let mut rays: Vec<(f64, f64)> = Vec::with_capacity(rel_delays.len());
        for &tau in &rel_delays {
            let rel_bins = ((t_l + tau) / bin).round() - start_bin;
            let rel_real = rel_bins * bin;
            if rays.iter().any(|&(t, _)| t == rel_real) {
                continue;
            }
            let power = ray_power(&params.decay, p_first, rel_real);
            let phase = rng.random::<f64>() * TAU;
            let amplitude = if params.rayleigh_fading {
                let comp = Normal::new(0.0, (power / 2.0).sqrt()).expect("positive power");
                let re: f64 = comp.sample(&mut rng);
                let im: f64 = comp.sample(&mut rng);
                (re * re + im * im).sqrt()
            } else {
                power.sqrt()
            };
            // Taps beyond the storage window are dropped from the CIR but
            // kept in the ground truth.
            let _ = cir.add_tap(
                (start_bin + rel_bins) * bin,
                Complex64::from_polar(amplitude, phase),
            );
            rays.push((rel_real, power));
        }
        clusters.push(rays);
    }

    Ok((
        cir,
        GroundTruth {
            cluster_starts_ns: starts,
            clusters,
        },
    ))
}

/// Combine the stochastic background with the deterministic VLoS tap.
///
/// `vlos` is `(complex amplitude, delay in seconds)` as produced by
/// [`crate::ris::cascaded_vlos_gain`]. `WithoutRis` (or a zero amplitude)
/// returns the background unchanged; otherwise the tap adds coherently at
/// its delay bin and a delay outside the observation window is an error.
pub fn compose_channel(sv: &Cir, vlos: (Complex64, f64), mode: ChannelMode) -> Result<Cir> {
    if mode == ChannelMode::WithoutRis {
        return Ok(sv.clone());
    }
    let (amp, delay_s) = vlos;
    if amp == Complex64::new(0.0, 0.0) {
        return Ok(sv.clone());
    }
    let mut out = sv.clone();
    out.add_tap(delay_s * 1e9, amp)?;
    Ok(out)
}
