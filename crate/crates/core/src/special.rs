//! Bessel functions, their zeros and the gamma function.

use std::f64::consts::PI;

pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

pub fn j1(x: f64) -> f64 {
    libm::j1(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// n-th positive zero of J0 (n starts at 1).
pub fn j0_zero(n: usize) -> f64 {
    assert!(n >= 1);
    let b = (n as f64 - 0.25) * PI;
    let ib = 1.0 / (8.0 * b);
    let ib2 = ib * ib;
    // McMahon expansion, then Newton on J0 with J0' = -J1.
    let mut x = b + ib - 124.0 / 3.0 * ib * ib2 + 120928.0 / 15.0 * ib * ib2 * ib2;
    for _ in 0..4 {
        let dx = j0(x) / j1(x);
        x += dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Sequence of J0 zeros with a cache that grows on demand.
#[derive(Default)]
pub struct J0Zeros {
    zeros: Vec<f64>,
}

impl J0Zeros {
    pub fn get(&mut self, n: usize) -> f64 {
        while self.zeros.len() < n {
            let k = self.zeros.len() + 1;
            self.zeros.push(j0_zero(k));
        }
        self.zeros[n - 1]
    }
}
