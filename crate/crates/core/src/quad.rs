//! One-dimensional quadrature: Gauss-Legendre rules, a globally adaptive
//! integrator and acceleration of alternating series.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub struct Rule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

fn rule(n: usize, cell: &'static OnceLock<Rule>) -> &'static Rule {
    cell.get_or_init(|| {
        let (x, w) = gauss_legendre(n);
        Rule { x, w }
    })
}

pub fn gl7() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    rule(7, &R)
}

pub fn gl15() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    rule(15, &R)
}

pub fn gl20() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    rule(20, &R)
}

/// Fixed-order Gauss-Legendre sum of `f` over [a, b].
pub fn fixed<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, r: &Rule) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let mut s = 0.0;
    for (x, w) in r.x.iter().zip(&r.w) {
        s += w * f(c + h * x);
    }
    s * h
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

fn eval_piece<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> Piece<N> {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let hi = gl15();
    let lo = gl7();
    let mut vh = [0.0; N];
    let mut vl = [0.0; N];
    for (x, w) in hi.x.iter().zip(&hi.w) {
        let y = f(c + h * x);
        for k in 0..N {
            vh[k] += w * y[k];
        }
    }
    for (x, w) in lo.x.iter().zip(&lo.w) {
        let y = f(c + h * x);
        for k in 0..N {
            vl[k] += w * y[k];
        }
    }
    let mut err = 0.0f64;
    for k in 0..N {
        vh[k] *= h;
        vl[k] *= h;
        err = err.max((vh[k] - vl[k]).abs());
    }
    Piece { a, b, value: vh, error: err }
}

/// Globally adaptive bisection driven by the difference between a 15- and a
/// 7-point Gauss rule. Stops when the summed error estimate drops below
/// `tol` or after `max_pieces` subintervals.
pub fn adaptive_vec<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_pieces: usize,
) -> Result<Estimate<N>> {
    if a == b {
        return Ok(Estimate { value: [0.0; N], error: 0.0 });
    }
    let mut pieces = vec![eval_piece(&mut f, a, b)];
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.error).sum();
        let mut value = [0.0; N];
        for p in &pieces {
            for k in 0..N {
                value[k] += p.value[k];
            }
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        // Roundoff floor relative to the integral of |f| estimate.
        let mag: f64 = pieces.iter().map(|p| p.value.iter().fold(0.0f64, |a, v| a.max(v.abs()))).sum();
        if total_err <= tol.max(1e-14 * mag) {
            return Ok(Estimate { value, error: total_err });
        }
        if pieces.len() >= max_pieces {
            return Err(Error::Convergence {
                what: "adaptive quadrature".into(),
                best: value[0],
                error: total_err,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .unwrap();
        let p = pieces.swap_remove(idx);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // Interval cannot be split further; keep it as is.
            let mut q = p;
            q.error = 0.0;
            pieces.push(q);
            continue;
        }
        pieces.push(eval_piece(&mut f, p.a, m));
        pieces.push(eval_piece(&mut f, m, p.b));
    }
}

pub fn adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_pieces: usize) -> Result<(f64, f64)> {
    let mut f = f;
    let e = adaptive_vec(|x| [f(x)], a, b, tol, max_pieces)?;
    Ok((e.value[0], e.error))
}

/// Euler-van Wijngaarden repeated averaging of the last `levels + 1`
/// partial sums of an alternating series.
pub fn averaged_tail(partial: &[f64], levels: usize) -> f64 {
    let n = partial.len();
    let k = levels.min(n.saturating_sub(1));
    let mut row: Vec<f64> = partial[n - k - 1..].to_vec();
    for _ in 0..k {
        for i in 0..row.len() - 1 {
            row[i] = 0.5 * (row[i] + row[i + 1]);
        }
        row.pop();
    }
    row[0]
}
