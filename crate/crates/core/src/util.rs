//! Small shared helpers: dB conversions, deterministic seed derivation,
//! ordinary least squares.

/// Convert a linear power (mW) to dBm. Zero maps to `-inf`.
pub fn lin_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Convert dBm (or any dB quantity) to linear power.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Derive a child seed from a master seed and a list of label strings.
///
/// FNV-1a over the master seed bytes and the labels, finished with a
/// splitmix64 mix. Stable across platforms and releases, so campaign
/// results are reproducible regardless of execution schedule.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in master.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    for part in parts {
        // Separator byte keeps ("ab","c") distinct from ("a","bc").
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Ordinary least squares of `y` on `x` with an intercept.
///
/// Returns `(slope, intercept)`. Requires at least two distinct `x`
/// values; the caller validates.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Sample mean and sample standard deviation (n - 1 denominator).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}
