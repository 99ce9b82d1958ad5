//! Truncated Taylor jets: exact derivatives of closed-form multipliers.
//!
//! A `Jet<N>` stores the first `N` Taylor coefficients of a function around a
//! point, so `coef[k] * k!` is the k-th derivative.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    pub c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable seeded at `x`.
    pub fn variable(x: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x;
        if N > 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn derivative(&self, k: usize) -> f64 {
        let mut f = 1.0;
        for j in 2..=k {
            f *= j as f64;
        }
        self.c[k] * f
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c {
            *v *= s;
        }
        self
    }

    pub fn offset(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }

    pub fn exp(self) -> Self {
        let a = &self.c;
        let mut b = [0.0; N];
        b[0] = a[0].exp();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * b[k - j];
            }
            b[k] = s / k as f64;
        }
        Jet { c: b }
    }

    pub fn ln(self) -> Self {
        let a = &self.c;
        let mut b = [0.0; N];
        b[0] = a[0].ln();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * b[j] * a[k - j];
            }
            b[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet { c: b }
    }

    /// Real power of a jet with positive value.
    pub fn powf(self, p: f64) -> Self {
        let a = &self.c;
        let mut b = [0.0; N];
        b[0] = a[0].powf(p);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * a[j] * b[k - j];
            }
            b[k] = s / (k as f64 * a[0]);
        }
        Jet { c: b }
    }

    pub fn square(self) -> Self {
        self * self
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for k in 0..N {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for k in 0..N {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * c[k - j];
            }
            c[k] = s / o.c[0];
        }
        Jet { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_power() {
        let x = Jet::<6>::variable(2.0).powf(2.5);
        let mut expect = 2f64.powf(2.5);
        let mut coef = 1.0;
        for k in 0..6 {
            assert!((x.derivative(k) - coef * expect).abs() < 1e-12 * expect.abs().max(1.0));
            coef *= 2.5 - k as f64;
            expect /= 2.0;
        }
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = Jet::<6>::variable(0.7);
        let y = x.exp().ln();
        for k in 0..6 {
            assert!((y.c[k] - x.c[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn quotient_matches_product_rule() {
        let x = Jet::<5>::variable(1.3);
        let q = (x * x).offset(1.0) / x.offset(2.0);
        let back = q * x.offset(2.0);
        let target = (x * x).offset(1.0);
        for k in 0..5 {
            assert!((back.c[k] - target.c[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn log_derivatives() {
        // d^k/dx^k ln x = (-1)^{k-1} (k-1)! / x^k
        let x = 3.0;
        let j = Jet::<6>::variable(x).ln();
        let mut fact = 1.0;
        for k in 1..6 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let expect = sign * fact / x.powi(k as i32);
            assert!((j.derivative(k) - expect).abs() < 1e-13);
            fact *= k as f64;
        }
    }
}
