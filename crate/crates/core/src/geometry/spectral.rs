//! Shared spectral plumbing: Gauss-Legendre rules and FFT plan caching.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Exact (to roundoff) for polynomials of degree
/// <= 2n - 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Process-wide FFT plan cache. Plans are immutable and `Send + Sync`; the
/// planner itself is not, so it lives behind a mutex and is touched only on
/// cache misses.
fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap();
    let (planner, map) = &mut *guard;
    map.entry((len, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// In-place unnormalized FFT along both axes of a 2-D array
/// (sign convention: forward = exp(-2*pi*i*j*n/N)).
pub fn fft2_inplace(a: &mut Array2<Complex64>, inverse: bool) {
    let (rows, cols) = a.dim();
    let row_plan = plan(cols, inverse);
    let col_plan = plan(rows, inverse);
    let mut scratch = vec![Complex64::default(); row_plan.get_inplace_scratch_len()];
    for mut row in a.rows_mut() {
        row_plan.process_with_scratch(row.as_slice_mut().expect("contiguous row"), &mut scratch);
    }
    let mut col_buf = vec![Complex64::default(); rows];
    scratch.resize(col_plan.get_inplace_scratch_len(), Complex64::default());
    for j in 0..cols {
        for i in 0..rows {
            col_buf[i] = a[[i, j]];
        }
        col_plan.process_with_scratch(&mut col_buf, &mut scratch);
        for i in 0..rows {
            a[[i, j]] = col_buf[i];
        }
    }
}

/// In-place unnormalized FFT of every row of a 2-D array.
pub fn fft_rows_inplace(a: &mut Array2<Complex64>, inverse: bool) {
    let (_, cols) = a.dim();
    let row_plan = plan(cols, inverse);
    let mut scratch = vec![Complex64::default(); row_plan.get_inplace_scratch_len()];
    for mut row in a.rows_mut() {
        row_plan.process_with_scratch(row.as_slice_mut().expect("contiguous row"), &mut scratch);
    }
}

/// In-place unnormalized FFT of a 1-D buffer.
pub fn fft_inplace(buf: &mut [Complex64], inverse: bool) {
    let p = plan(buf.len(), inverse);
    let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
    p.process_with_scratch(buf, &mut scratch);
}
