//! Internal FFT helpers built on rustfft. Single-threaded and
//! deterministic for a given input length.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (unnormalized).
pub(crate) fn forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place inverse FFT, normalized by 1/N (true inverse).
pub(crate) fn inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(buf.len());
        fft.process(buf);
    });
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Circular cross-correlation `c[k] = sum_n a[(n + k) mod N] * conj(b[n])`.
pub(crate) fn circular_cross_correlation(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.len(), b.len());
    let mut fa: Vec<Complex64> = a.to_vec();
    let mut fb: Vec<Complex64> = b.to_vec();
    forward(&mut fa);
    forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y.conj();
    }
    inverse(&mut fa);
    fa
}
