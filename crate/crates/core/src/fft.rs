//! Discrete Fourier transforms on uniform periodic grids.
//!
//! Radix-2 Cooley-Tukey for power-of-two lengths, direct summation otherwise.
//! Forward transform uses `exp(-2 pi i j k / n)` and is unnormalized; the
//! inverse divides by `n`.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math::{cos, sin, TAU};

pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, -1.0);
    buf
}

pub fn inverse(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    transform(&mut buf, 1.0);
    let scale = 1.0 / buf.len() as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse transform keeping only the real part.
pub fn inverse_real(spectrum: &[Complex64]) -> Vec<f64> {
    inverse(spectrum).into_iter().map(|c| c.re).collect()
}

/// Signed wavenumber of FFT bin `index` on `n` points. The Nyquist bin of an
/// even grid maps to `+n/2`.
#[inline]
pub fn wavenumber(index: usize, n: usize) -> i64 {
    if index <= n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

/// `d/dx` of a periodic sample on `[0, 1)`; the Nyquist mode is dropped.
pub fn derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut spec = forward(values);
    for (i, c) in spec.iter_mut().enumerate() {
        let k = wavenumber(i, n);
        if n.is_multiple_of(2) && i == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, TAU * k as f64);
        }
    }
    inverse_real(&spec)
}

/// `d^2/dx^2` of a periodic sample on `[0, 1)`.
pub fn second_derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut spec = forward(values);
    for (i, c) in spec.iter_mut().enumerate() {
        let k = TAU * wavenumber(i, n) as f64;
        *c *= -k * k;
    }
    inverse_real(&spec)
}

fn transform(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, sign);
    } else {
        direct(buf, sign);
    }
}

fn direct(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    let twiddle: Vec<Complex64> = (0..n)
        .map(|m| {
            let th = sign * TAU * m as f64 / n as f64;
            Complex64::new(cos(th), sin(th))
        })
        .collect();
    let input = buf.to_vec();
    for (k, out) in buf.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, x) in input.iter().enumerate() {
            acc += x * twiddle[(j * k) % n];
        }
        *out = acc;
    }
}

fn radix2(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let th = sign * TAU / len as f64;
        let half = len / 2;
        let roots: Vec<Complex64> = (0..half)
            .map(|m| Complex64::new(cos(th * m as f64), sin(th * m as f64)))
            .collect();
        for start in (0..n).step_by(len) {
            for m in 0..half {
                let a = buf[start + m];
                let b = buf[start + m + half] * roots[m];
                buf[start + m] = a + b;
                buf[start + m + half] = a - b;
            }
        }
        len <<= 1;
    }
}
