//! FFT plumbing shared by the channel, ranging and sync models.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::Real;

/// Signed frequency index of DFT bin `k` for a length-`n` transform.
///
/// Bins `k >= n/2` map to `k - n`; for even `n` the Nyquist bin is negative.
#[inline]
pub fn signed_bin(k: usize, n: usize) -> isize {
    if 2 * k >= n {
        k as isize - n as isize
    } else {
        k as isize
    }
}

pub fn fft<T: Real>(data: &mut [Complex<T>]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// Inverse FFT including the `1/n` normalization.
pub fn ifft<T: Real>(data: &mut [Complex<T>]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_inverse(data.len()).process(data);
    let scale = T::one() / T::from_usize(data.len()).unwrap();
    for x in data.iter_mut() {
        *x = *x * scale;
    }
}

/// Forward FFT of `x` zero padded to `n` points.
pub fn padded_spectrum<T: Real>(x: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    buf[..x.len()].copy_from_slice(x);
    fft(&mut buf);
    buf
}

/// `e^{j phase}` evaluated in `f64` and cast back; phases here can reach
/// tens of thousands of radians, which `f32` cannot resolve.
#[inline]
pub fn cis<T: Real>(phase: f64) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(T::lit(c), T::lit(s))
}

/// Least-squares fit of `a cos(2 pi f t) + b sin(2 pi f t)` to the real part
/// of `x`; returns `(amplitude, phase)` of `amplitude * cos(2 pi f t + phase)`.
pub fn fit_real_tone<T: Real>(
    x: &[Complex<T>],
    freq: f64,
    sample_rate: f64,
    t0: f64,
) -> (f64, f64) {
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let t = t0 + k as f64 / sample_rate;
        let (s, c) = (std::f64::consts::TAU * freq * t).sin_cos();
        let y = v.re.as_f64();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        yc += y * c;
        ys += y * s;
    }
    let det = cc * ss - cs * cs;
    let a = (yc * ss - ys * cs) / det;
    let b = (ys * cc - yc * cs) / det;
    // a cos + b sin = A cos(wt + p) with A cos p = a, -A sin p = b
    ((a * a + b * b).sqrt(), (-b).atan2(a))
}
