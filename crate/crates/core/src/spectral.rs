//! Trigonometric interpolation on the uniform periodic grid
//! ζ_i = −π + 2πi/M: derivatives, antiderivatives, resampling.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(m: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    map.entry(m)
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            (p.plan_fft_forward(m), p.plan_fft_inverse(m))
        })
        .clone()
}

/// Signed wavenumber of FFT slot `j` (the Nyquist slot maps to +M/2).
#[inline]
pub fn wavenumber(j: usize, m: usize) -> f64 {
    if j <= m / 2 {
        j as f64
    } else {
        j as f64 - m as f64
    }
}

/// Coefficients c_k with z_i = Σ_k c_k e^{ik(ζ_i+π)}.
pub fn coefficients(z: &[Complex64]) -> Vec<Complex64> {
    let m = z.len();
    let mut c = z.to_vec();
    plans(m).0.process(&mut c);
    let s = 1.0 / m as f64;
    for v in &mut c {
        *v *= s;
    }
    c
}

fn synthesize(mut c: Vec<Complex64>) -> Vec<Complex64> {
    let m = c.len();
    plans(m).1.process(&mut c);
    c
}

pub fn to_complex(z: &[[f64; 2]]) -> Vec<Complex64> {
    z.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

pub fn to_points(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

/// Spectral derivative in ζ. The Nyquist mode is dropped.
pub fn derivative(z: &[Complex64]) -> Vec<Complex64> {
    let m = z.len();
    let mut c = coefficients(z);
    for (j, v) in c.iter_mut().enumerate() {
        if m % 2 == 0 && j == m / 2 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= Complex64::new(0.0, wavenumber(j, m));
        }
    }
    synthesize(c)
}

/// Second derivative in ζ.
pub fn second_derivative(z: &[Complex64]) -> Vec<Complex64> {
    let m = z.len();
    let mut c = coefficients(z);
    for (j, v) in c.iter_mut().enumerate() {
        let k = wavenumber(j, m);
        *v *= -k * k;
    }
    synthesize(c)
}

pub fn derivative_real(f: &[f64]) -> Vec<f64> {
    let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    derivative(&z).iter().map(|c| c.re).collect()
}

/// Mean of a real sequence and the zero-mean spectral antiderivative of
/// its oscillatory part.
pub fn antiderivative_real(f: &[f64]) -> (f64, Vec<f64>) {
    let m = f.len();
    let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut c = coefficients(&z);
    let mean = c[0].re;
    c[0] = Complex64::new(0.0, 0.0);
    for (j, v) in c.iter_mut().enumerate().skip(1) {
        if m % 2 == 0 && j == m / 2 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v /= Complex64::new(0.0, wavenumber(j, m));
        }
    }
    (mean, synthesize(c).iter().map(|c| c.re).collect())
}

/// Trigonometric interpolant evaluated at M·factor uniform points.
pub fn upsample(z: &[Complex64], factor: usize) -> Vec<Complex64> {
    let m = z.len();
    let n = m * factor;
    let c = coefficients(z);
    let mut big = vec![Complex64::new(0.0, 0.0); n];
    for (j, v) in c.iter().enumerate() {
        if m % 2 == 0 && j == m / 2 {
            // split the Nyquist mode symmetrically
            big[j] += 0.5 * v;
            big[n - j] += 0.5 * v;
        } else if j <= m / 2 {
            big[j] = *v;
        } else {
            big[n - (m - j)] = *v;
        }
    }
    synthesize(big)
}

/// Evaluator of the interpolant at arbitrary parameter values.
pub struct Interpolant {
    c: Vec<Complex64>,
}

impl Interpolant {
    pub fn new(z: &[Complex64]) -> Self {
        Interpolant { c: coefficients(z) }
    }

    /// (z(ζ), z′(ζ)) at parameter ζ.
    pub fn eval(&self, zeta: f64) -> (Complex64, Complex64) {
        let m = self.c.len();
        let th = zeta + PI;
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (j, c) in self.c.iter().enumerate() {
            if m % 2 == 0 && j == m / 2 {
                let k = m as f64 / 2.0;
                v += c * (k * th).cos();
                d -= c * k * (k * th).sin();
                continue;
            }
            let k = wavenumber(j, m);
            let e = Complex64::from_polar(1.0, k * th);
            v += c * e;
            d += c * e * Complex64::new(0.0, k);
        }
        (v, d)
    }
}

pub fn zeta(i: usize, m: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(m: usize, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        (0..m).map(|i| f(zeta(i, m))).collect()
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let m = 32;
        let z = samples(m, |t| Complex64::new(t.cos() + 0.3 * (3.0 * t).sin(), (2.0 * t).sin()));
        let d = derivative(&z);
        for i in 0..m {
            let t = zeta(i, m);
            let e = Complex64::new(-t.sin() + 0.9 * (3.0 * t).cos(), 2.0 * (2.0 * t).cos());
            assert!((d[i] - e).norm() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let m = 64;
        let f: Vec<f64> = (0..m).map(|i| 1.5 + (zeta(i, m)).sin() * 2.0).collect();
        let (mean, a) = antiderivative_real(&f);
        assert!((mean - 1.5).abs() < 1e-14);
        for i in 0..m {
            assert!((a[i] + 2.0 * zeta(i, m).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn upsampling_and_pointwise_interpolation() {
        let m = 16;
        let f = |t: f64| Complex64::new((t).cos() * 2.0, (t + 0.3).sin() + 0.1 * (4.0 * t).cos());
        let z = samples(m, f);
        let up = upsample(&z, 4);
        for (i, u) in up.iter().enumerate() {
            assert!((u - f(zeta(i, 4 * m))).norm() < 1e-12);
        }
        let ip = Interpolant::new(&z);
        let (v, _) = ip.eval(0.123);
        assert!((v - f(0.123)).norm() < 1e-12);
    }
}
