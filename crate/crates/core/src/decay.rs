//! PDP decay-model fitting.
//!
//! Each PDP is normalized in power and delay relative to its first tap;
//! the normalized taps of all measurement points are pooled into a cloud.
//! Two decay models are fitted by least squares in the dB domain:
//!
//! * power law: `p_dB = eta0 - 10 n log10(tau)` (the `tau = 0` point is
//!   excluded),
//! * exponential: `p_dB = -10 tau / (gamma ln 10)`, constrained through
//!   the origin.
//!
//! The fit quality is the RMSE between data and model, which is also the
//! scatter of the dB residual.

use crate::error::{Error, Result};
use crate::pdp::Pdp;
use crate::util::{lin_to_db, ols};

/// Pooled normalized PDP taps: `(relative delay ns, relative power dB)`.
#[derive(Debug, Clone, Default)]
pub struct NormalizedPdpCloud {
    points: Vec<(f64, f64)>,
}

impl NormalizedPdpCloud {
    /// Wrap raw `(relative delay, relative power dB)` points.
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Per-delay average curve: points grouped by identical relative
    /// delay, dB powers averaged within each group, sorted by delay.
    pub fn average_curve(&self) -> Vec<(f64, f64)> {
        let mut sorted = self.points.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let delay = sorted[i].0;
            let mut sum = 0.0;
            let mut count = 0usize;
            while i < sorted.len() && sorted[i].0 == delay {
                sum += sorted[i].1;
                count += 1;
                i += 1;
            }
            out.push((delay, sum / count as f64));
        }
        out
    }
}

/// Normalize each PDP relative to its first nonzero tap and pool the taps
/// across measurement points.
///
/// Only bins within `window_ns` of delay 0 contribute. Every PDP must
/// have a nonzero tap inside the window.
pub fn normalize_and_pool(pdps: &[&Pdp], window_ns: f64) -> Result<NormalizedPdpCloud> {
    if pdps.is_empty() {
        return Err(Error::InvalidParam("no PDPs to pool".into()));
    }
    let mut points = Vec::new();
    for (idx, pdp) in pdps.iter().enumerate() {
        let max_bin = ((window_ns / pdp.bin_interval_ns()).floor() as usize).min(pdp.len() - 1);
        let first = (0..=max_bin)
            .find(|&k| pdp.powers()[k] > 0.0)
            .ok_or_else(|| {
                Error::Degenerate(format!(
                    "PDP {idx} has no nonzero tap within the {window_ns} ns window"
                ))
            })?;
        let t_first = pdp.delay_ns(first);
        let p_first_db = lin_to_db(pdp.powers()[first]);
        for k in first..=max_bin {
            let p = pdp.powers()[k];
            if p > 0.0 {
                points.push((pdp.delay_ns(k) - t_first, lin_to_db(p) - p_first_db));
            }
        }
    }
    Ok(NormalizedPdpCloud::from_points(points))
}

/// What the regression runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    /// The per-delay average curve (default reporting mode).
    AveragedCurve,
    /// Every pooled point individually (keeps the full dB scatter in the
    /// RMSE).
    PooledCloud,
}

/// Fitted decay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    PowerLaw { eta0_db: f64, n_pdp: f64 },
    Exponential { inv_gamma_per_ns: f64 },
}

/// Decay fit result.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub model: FitModel,
    pub rmse_db: f64,
}

fn select_points(cloud: &NormalizedPdpCloud, window_ns: f64, target: FitTarget) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = match target {
        FitTarget::AveragedCurve => cloud.average_curve(),
        FitTarget::PooledCloud => cloud.points().to_vec(),
    };
    pts.into_iter()
        .filter(|&(t, _)| t >= 0.0 && t <= window_ns)
        .collect()
}

/// Fit the power-law decay model over `[0, window_ns]`.
///
/// Ordinary least squares of relative power (dB) on `-10 log10(tau)`;
/// the slope is the decay factor `n`, the intercept `eta0`. Points at
/// `tau = 0` do not fit the model and are excluded.
pub fn fit_power_law(
    cloud: &NormalizedPdpCloud,
    window_ns: f64,
    target: FitTarget,
) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = select_points(cloud, window_ns, target)
        .into_iter()
        .filter(|&(t, _)| t > 0.0)
        .collect();
    let mut delays: Vec<f64> = pts.iter().map(|p| p.0).collect();
    delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    delays.dedup();
    if delays.len() < 2 {
        return Err(Error::Degenerate(
            "power-law fit needs at least 2 distinct nonzero delays".into(),
        ));
    }
    let x: Vec<f64> = pts.iter().map(|&(t, _)| -10.0 * t.log10()).collect();
    let y: Vec<f64> = pts.iter().map(|&(_, p)| p).collect();
    let (n_pdp, eta0_db) = ols(&x, &y);
    let fitted: Vec<f64> = x.iter().map(|&xi| eta0_db + n_pdp * xi).collect();
    let rmse_db = rmse(&y, &fitted)?;
    Ok(DecayFit {
        model: FitModel::PowerLaw { eta0_db, n_pdp },
        rmse_db,
    })
}

/// Fit the exponential decay model over `[0, window_ns]`.
///
/// Least squares of relative power (dB) on `-10 tau / ln 10`, through
/// the origin; the slope is `1 / gamma`.
pub fn fit_exponential(
    cloud: &NormalizedPdpCloud,
    window_ns: f64,
    target: FitTarget,
) -> Result<DecayFit> {
    let pts = select_points(cloud, window_ns, target);
    if pts.len() < 2 {
        return Err(Error::Degenerate(
            "exponential fit needs at least 2 points".into(),
        ));
    }
    let mut delays: Vec<f64> = pts.iter().map(|p| p.0).collect();
    delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    delays.dedup();
    if delays.len() < 2 {
        return Err(Error::Degenerate(
            "exponential fit needs at least 2 distinct delays".into(),
        ));
    }
    let ln10 = std::f64::consts::LN_10;
    let x: Vec<f64> = pts.iter().map(|&(t, _)| -10.0 * t / ln10).collect();
    let y: Vec<f64> = pts.iter().map(|&(_, p)| p).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let inv_gamma = if sxx == 0.0 {
        return Err(Error::Degenerate("all delays are zero".into()));
    } else {
        x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sxx
    };
    let fitted: Vec<f64> = x.iter().map(|&xi| inv_gamma * xi).collect();
    let rmse_db = rmse(&y, &fitted)?;
    Ok(DecayFit {
        model: FitModel::Exponential {
            inv_gamma_per_ns: inv_gamma,
        },
        rmse_db,
    })
}

/// Root mean squared error between two equal-length vectors.
pub fn rmse(measured: &[f64], fitted: &[f64]) -> Result<f64> {
    if measured.len() != fitted.len() {
        return Err(Error::Mismatch(format!(
            "length mismatch: {} vs {}",
            measured.len(),
            fitted.len()
        )));
    }
    if measured.is_empty() {
        return Err(Error::InvalidParam("empty vectors".into()));
    }
    let acc: f64 = measured
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((acc / measured.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::db_to_lin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn pdp_from_dbm(bins_dbm: &[(usize, f64)], len: usize) -> Pdp {
        let mut powers = vec![0.0f64; len];
        for &(k, dbm) in bins_dbm {
            powers[k] = db_to_lin(dbm);
        }
        Pdp::new(powers, 5.0, 1).unwrap()
    }

    #[test]
    fn single_tap_normalizes_to_origin() {
        let pdp = pdp_from_dbm(&[(0, -40.0)], 10);
        let cloud = normalize_and_pool(&[&pdp], 300.0).unwrap();
        assert_eq!(cloud.points(), &[(0.0, 0.0)]);
    }

    #[test]
    fn identical_pdps_share_the_average_curve() {
        let pdp = pdp_from_dbm(&[(0, -40.0), (2, -43.0), (4, -46.0)], 10);
        let one = normalize_and_pool(&[&pdp], 300.0).unwrap();
        let two = normalize_and_pool(&[&pdp, &pdp], 300.0).unwrap();
        assert_eq!(one.average_curve(), two.average_curve());
        assert_eq!(two.len(), 2 * one.len());
    }

    #[test]
    fn three_tap_normalization_by_direct_subtraction() {
        let pdp = pdp_from_dbm(&[(0, -40.0), (2, -43.0), (4, -46.0)], 10);
        let cloud = normalize_and_pool(&[&pdp], 300.0).unwrap();
        let expect = [(0.0, 0.0), (10.0, -3.0), (20.0, -6.0)];
        for ((t, p), (et, ep)) in cloud.points().iter().zip(expect) {
            assert!((t - et).abs() < 1e-12);
            assert!((p - ep).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_is_offset_invariant() {
        // A uniform dB offset before normalization disappears.
        let a = pdp_from_dbm(&[(1, -40.0), (3, -45.0), (6, -52.0)], 12);
        let b = pdp_from_dbm(&[(1, -20.0), (3, -25.0), (6, -32.0)], 12);
        let ca = normalize_and_pool(&[&a], 300.0).unwrap();
        let cb = normalize_and_pool(&[&b], 300.0).unwrap();
        for ((t1, p1), (t2, p2)) in ca.points().iter().zip(cb.points()) {
            assert!((t1 - t2).abs() < 1e-12);
            assert!((p1 - p2).abs() < 1e-9);
        }
        let fa = fit_power_law(&ca, 300.0, FitTarget::PooledCloud).unwrap();
        let fb = fit_power_law(&cb, 300.0, FitTarget::PooledCloud).unwrap();
        match (fa.model, fb.model) {
            (
                FitModel::PowerLaw {
                    eta0_db: e1,
                    n_pdp: n1,
                },
                FitModel::PowerLaw {
                    eta0_db: e2,
                    n_pdp: n2,
                },
            ) => {
                assert!((e1 - e2).abs() < 1e-9);
                assert!((n1 - n2).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    fn power_law_cloud(
        eta0: f64,
        n: f64,
        sigma: f64,
        points: usize,
        seed: u64,
    ) -> NormalizedPdpCloud {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let delay_dist = Uniform::new(1.0f64, 300.0).unwrap();
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let pts = (0..points)
            .map(|_| {
                let t = delay_dist.sample(&mut rng);
                let mut p = eta0 - 10.0 * n * t.log10();
                if sigma > 0.0 {
                    p += noise.sample(&mut rng);
                }
                (t, p)
            })
            .collect();
        NormalizedPdpCloud::from_points(pts)
    }

    #[test]
    fn noiseless_power_law_recovered_exactly() {
        let cloud = power_law_cloud(7.86, 1.80, 0.0, 500, 1);
        let fit = fit_power_law(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        match fit.model {
            FitModel::PowerLaw { eta0_db, n_pdp } => {
                assert!((eta0_db - 7.86).abs() < 1e-9);
                assert!((n_pdp - 1.80).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert!(fit.rmse_db < 1e-9);
    }

    #[test]
    fn noisy_power_law_recovery() {
        let cloud = power_law_cloud(7.86, 1.80, 6.02, 10_000, 2);
        let fit = fit_power_law(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        match fit.model {
            FitModel::PowerLaw { n_pdp, .. } => {
                assert!((n_pdp - 1.80).abs() < 0.1, "n = {n_pdp}");
            }
            _ => unreachable!(),
        }
        assert!((fit.rmse_db - 6.02).abs() < 0.3, "rmse = {}", fit.rmse_db);
    }

    #[test]
    fn two_point_power_law_fit_is_exact() {
        let cloud = NormalizedPdpCloud::from_points(vec![(10.0, -5.0), (100.0, -15.0)]);
        let fit = fit_power_law(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        assert!(fit.rmse_db < 1e-12);
    }

    #[test]
    fn noiseless_exponential_recovered_exactly() {
        let inv_gamma = 4.30e-2;
        let ln10 = std::f64::consts::LN_10;
        let pts: Vec<(f64, f64)> = (1..=60)
            .map(|k| {
                let t = 5.0 * k as f64;
                (t, -10.0 * t * inv_gamma / ln10)
            })
            .collect();
        let cloud = NormalizedPdpCloud::from_points(pts);
        let fit = fit_exponential(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        match fit.model {
            FitModel::Exponential { inv_gamma_per_ns } => {
                assert!((inv_gamma_per_ns - inv_gamma).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert!(fit.rmse_db < 1e-12);
    }

    #[test]
    fn square_law_data_prefers_power_law_model() {
        // Power-law data of slope 2 over [5, 300] ns: the exponential
        // model cannot keep up.
        let cloud = power_law_cloud(0.0, 2.0, 0.0, 2000, 3);
        let pl = fit_power_law(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        let ex = fit_exponential(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        assert!(
            pl.rmse_db < ex.rmse_db,
            "power-law rmse {} should beat exponential {}",
            pl.rmse_db,
            ex.rmse_db
        );
    }

    #[test]
    fn all_zero_powers_give_zero_rate() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64 * 5.0, 0.0)).collect();
        let cloud = NormalizedPdpCloud::from_points(pts);
        let fit = fit_exponential(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        match fit.model {
            FitModel::Exponential { inv_gamma_per_ns } => assert_eq!(inv_gamma_per_ns, 0.0),
            _ => unreachable!(),
        }
        assert_eq!(fit.rmse_db, 0.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        let zero_only = NormalizedPdpCloud::from_points(vec![(0.0, 0.0), (0.0, -1.0)]);
        assert!(fit_power_law(&zero_only, 300.0, FitTarget::PooledCloud).is_err());
        assert!(fit_exponential(&zero_only, 300.0, FitTarget::PooledCloud).is_err());
        let single = NormalizedPdpCloud::from_points(vec![(5.0, -1.0)]);
        assert!(fit_power_law(&single, 300.0, FitTarget::PooledCloud).is_err());
        assert!(fit_exponential(&single, 300.0, FitTarget::PooledCloud).is_err());
    }

    #[test]
    fn rmse_basics_and_oracle() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let a = [3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0];
        assert!((rmse(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let u = Uniform::new(-5.0f64, 5.0).unwrap();
        let x: Vec<f64> = (0..100).map(|_| u.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..100).map(|_| u.sample(&mut rng)).collect();
        let direct = (x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 100.0)
            .sqrt();
        assert_eq!(rmse(&x, &y).unwrap(), direct);
    }

    #[test]
    fn fit_rmse_matches_external_recomputation() {
        let cloud = power_law_cloud(5.0, 1.5, 3.0, 500, 11);
        let fit = fit_power_law(&cloud, 300.0, FitTarget::PooledCloud).unwrap();
        let (eta0, n) = match fit.model {
            FitModel::PowerLaw { eta0_db, n_pdp } => (eta0_db, n_pdp),
            _ => unreachable!(),
        };
        let data: Vec<f64> = cloud.points().iter().map(|&(_, p)| p).collect();
        let pred: Vec<f64> = cloud
            .points()
            .iter()
            .map(|&(t, _)| eta0 - 10.0 * n * t.log10())
            .collect();
        assert_eq!(fit.rmse_db, rmse(&data, &pred).unwrap());
    }

    #[test]
    fn model_selection_is_consistent_over_seeds() {
        // Data drawn exactly from one model fits that model at least as
        // well as the other.
        for seed in 0..100u64 {
            let pl_cloud = power_law_cloud(0.0, 1.8, 1.0, 1000, 1000 + seed);
            let pl = fit_power_law(&pl_cloud, 300.0, FitTarget::PooledCloud).unwrap();
            let ex = fit_exponential(&pl_cloud, 300.0, FitTarget::PooledCloud).unwrap();
            assert!(pl.rmse_db <= ex.rmse_db, "seed {seed}");

            let mut rng = ChaCha12Rng::seed_from_u64(2000 + seed);
            let delay = Uniform::new(0.0f64, 300.0).unwrap();
            let noise = Normal::new(0.0, 1.0).unwrap();
            let inv_gamma = 4.0e-2;
            let pts: Vec<(f64, f64)> = (0..1000)
                .map(|_| {
                    let t = delay.sample(&mut rng);
                    (
                        t,
                        -10.0 * t * inv_gamma / std::f64::consts::LN_10 + noise.sample(&mut rng),
                    )
                })
                .collect();
            let ex_cloud = NormalizedPdpCloud::from_points(pts);
            let ex2 = fit_exponential(&ex_cloud, 300.0, FitTarget::PooledCloud).unwrap();
            let pl2 = fit_power_law(&ex_cloud, 300.0, FitTarget::PooledCloud).unwrap();
            assert!(ex2.rmse_db <= pl2.rmse_db, "seed {seed}");
        }
    }
}
