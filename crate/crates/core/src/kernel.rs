//! The radial Biot-Savart kernel G(ρ), its derivative and the primitive
//! R(ρ) = ∫_ρ^1 G(s)/s ds, built from a multiplier by Bessel quadrature.
//!
//! G(ρ) = m(0⁺)/2π + (1/2π)∫₀^∞ J₀(ρr) m′(r) dr. Integrating by parts over
//! the first lobe of J₀ removes m(0⁺):
//!
//! 2πG(ρ) = ∫₀^{j₁} J₁(x) m(x/ρ) dx + ρ⁻¹ ∫_{j₁}^∞ J₀(x) m′(x/ρ) dx,
//!
//! and the same identity with f = r m′ gives G′ = −H[r m′]/(2πρ).

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::multiplier::{Multiplier, MultiplierKind, Regime};
use crate::quad;
use crate::special::{gamma, j0, j0_zero, j1};

pub const ZERO_BUDGET: usize = 20_000;
const AVG_LEVELS: usize = 16;

/// Radial kernel G together with its primitive R.
pub trait RadialKernel: Sync {
    fn g(&self, rho: f64) -> f64;
    fn r(&self, rho: f64) -> f64;
    /// P(ρ) = ∫₀^ρ G(s) ds; infinite when G is not integrable at 0.
    fn p(&self, rho: f64) -> f64;
    /// R evaluated from the squared distance.
    #[inline]
    fn r_sq(&self, rho2: f64) -> f64 {
        self.r(rho2.sqrt())
    }
}

#[derive(Clone, Copy, Debug)]
struct HankelOut {
    value: f64,
    zeros: usize,
    r_max: f64,
}

/// H[f](ρ) for f given through its value and derivative.
fn hankel<F>(f: F, rho: f64, abs_tol: f64, rel_tol: f64) -> Result<HankelOut>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let call = |r: f64| -> (f64, f64) {
        match f(r) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                (0.0, 0.0)
            }
        }
    };
    let z1 = j0_zero(1);
    let rough = quad::fixed(|x| j1(x) * call(x / rho).0, 0.0, z1, quad::gl20()).abs();
    let head_tol = 0.25 * abs_tol.max(rel_tol * rough).max(1e-17);
    let (head, _) = quad::adaptive(|x| j1(x) * call(x / rho).0, 0.0, z1, head_tol, 4000)?;
    if let Some(e) = err.borrow_mut().take() {
        return Err(e);
    }
    let mut partial = Vec::with_capacity(64);
    let mut sum = 0.0;
    let mut lo = z1;
    let mut prev_est = f64::NAN;
    let mut stable = 0;
    for n in 1..=ZERO_BUDGET {
        let hi = j0_zero(n + 1);
        let piece = quad::fixed(|x| j0(x) * call(x / rho).1, lo, hi, quad::gl20()) / rho;
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        sum += piece;
        partial.push(sum);
        lo = hi;
        if n < 6 {
            continue;
        }
        let est = quad::averaged_tail(&partial, AVG_LEVELS);
        let tol = (0.25 * abs_tol).max(rel_tol * (head + est).abs());
        if (est - prev_est).abs() <= tol {
            stable += 1;
            if stable >= 2 {
                return Ok(HankelOut { value: head + est, zeros: n + 1, r_max: hi / rho });
            }
        } else {
            stable = 0;
        }
        prev_est = est;
    }
    let tail = partial.len().saturating_sub(8);
    Err(Error::BesselTail { zeros: ZERO_BUDGET, partial: partial[tail..].to_vec() })
}

fn check_inputs(mult: &Multiplier, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    if !mult.has_derivatives() {
        return Err(Error::DerivativeUnavailable { kind: mult.name().into(), order: 1 });
    }
    Ok(())
}

fn g_with_meta(mult: &Multiplier, rho: f64, abs_tol: f64, rel_tol: f64) -> Result<HankelOut> {
    check_inputs(mult, rho)?;
    let f = |r: f64| mult.value_d1(r);
    let mut h = hankel(f, rho, 2.0 * PI * abs_tol, rel_tol)?;
    h.value /= 2.0 * PI;
    Ok(h)
}

fn gp_with_meta(mult: &Multiplier, rho: f64, abs_tol: f64, rel_tol: f64) -> Result<HankelOut> {
    check_inputs(mult, rho)?;
    let f = |r: f64| -> Result<(f64, f64)> {
        let j = mult.jet::<3>(Jet::variable(r))?;
        let (m1, m2) = (j.c[1], 2.0 * j.c[2]);
        Ok((r * m1, m1 + r * m2))
    };
    let mut h = hankel(f, rho, 2.0 * PI * rho * abs_tol, rel_tol)?;
    h.value /= -2.0 * PI * rho;
    Ok(h)
}

/// G(ρ) with absolute error about `tol`.
pub fn compute_g(mult: &Multiplier, rho: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    Ok(g_with_meta(mult, rho, tol, 1e-14)?.value)
}

/// G′(ρ) with absolute error about `tol`.
pub fn compute_g_prime(mult: &Multiplier, rho: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    Ok(gp_with_meta(mult, rho, tol, 1e-14)?.value)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 1e-14 && tol < 1e-3) {
        return Err(Error::Param(format!("tolerance {tol} outside (1e-14, 1e-3)")));
    }
    Ok(())
}

/// Source for R: either a prebuilt table or direct quadrature.
pub enum KernelSource<'a> {
    Table(&'a KernelTable),
    Direct(&'a Multiplier, f64),
}

/// R(ρ) = ∫_ρ^1 G(s)/s ds.
pub fn compute_r(src: KernelSource<'_>, rho: f64) -> Result<f64> {
    match src {
        KernelSource::Table(t) => t.r_checked(rho),
        KernelSource::Direct(mult, tol) => {
            if !(rho > 0.0) {
                return Err(Error::Domain(format!("rho = {rho} must be positive")));
            }
            let a = rho.ln();
            let mut failure = None;
            let (v, _) = quad::adaptive(
                |t| match compute_g(mult, t.exp(), tol * 1e-2) {
                    Ok(g) => g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                a.min(0.0),
                a.max(0.0),
                tol,
                500,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(if a <= 0.0 { v } else { -v })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    Euler,
    AlphaSqg { alpha: f64 },
}

/// c_α = Γ(α/2) / (π 2^{2−α} Γ(1−α/2)).
pub fn c_alpha(alpha: f64) -> f64 {
    gamma(alpha / 2.0) / (PI * 2f64.powf(2.0 - alpha) * gamma(1.0 - alpha / 2.0))
}

// c_α for the most recently used α on this thread; the kernel evaluators
// sit in the innermost quadrature loops.
#[inline]
fn c_alpha_cached(alpha: f64) -> f64 {
    thread_local! {
        static LAST: std::cell::Cell<(f64, f64)> = const { std::cell::Cell::new((f64::NAN, f64::NAN)) };
    }
    LAST.with(|c| {
        let (a, v) = c.get();
        if a == alpha {
            v
        } else {
            let v = c_alpha(alpha);
            c.set((alpha, v));
            v
        }
    })
}

impl ClosedForm {
    pub fn g(&self, rho: f64) -> f64 {
        match *self {
            ClosedForm::Euler => 1.0 / (2.0 * PI),
            ClosedForm::AlphaSqg { alpha } => alpha * c_alpha_cached(alpha) * rho.powf(-alpha),
        }
    }

    pub fn g_prime(&self, rho: f64) -> f64 {
        match *self {
            ClosedForm::Euler => 0.0,
            ClosedForm::AlphaSqg { alpha } => -alpha * alpha * c_alpha_cached(alpha) * rho.powf(-alpha - 1.0),
        }
    }

    /// Primitive with R(1) = 0.
    pub fn r(&self, rho: f64) -> f64 {
        match *self {
            ClosedForm::Euler => -rho.ln() / (2.0 * PI),
            ClosedForm::AlphaSqg { alpha } => c_alpha_cached(alpha) * (rho.powf(-alpha) - 1.0),
        }
    }

    pub fn p(&self, rho: f64) -> f64 {
        match *self {
            ClosedForm::Euler => rho / (2.0 * PI),
            ClosedForm::AlphaSqg { alpha } => alpha * c_alpha_cached(alpha) * rho.powf(1.0 - alpha) / (1.0 - alpha),
        }
    }

    pub fn for_multiplier(m: &Multiplier) -> Option<Self> {
        match m.kind {
            MultiplierKind::Euler => Some(ClosedForm::Euler),
            MultiplierKind::AlphaSqg { alpha } => Some(ClosedForm::AlphaSqg { alpha }),
            _ => None,
        }
    }
}

pub fn closed_form_g(kind: ClosedForm, rho: f64) -> f64 {
    kind.g(rho)
}

impl RadialKernel for ClosedForm {
    fn g(&self, rho: f64) -> f64 {
        ClosedForm::g(self, rho)
    }
    fn r(&self, rho: f64) -> f64 {
        ClosedForm::r(self, rho)
    }
    fn p(&self, rho: f64) -> f64 {
        ClosedForm::p(self, rho)
    }
    #[inline]
    fn r_sq(&self, rho2: f64) -> f64 {
        match *self {
            ClosedForm::Euler => -rho2.ln() / (4.0 * PI),
            ClosedForm::AlphaSqg { alpha } => c_alpha_cached(alpha) * (rho2.powf(-0.5 * alpha) - 1.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadMeta {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub truncation_r_max: f64,
    pub num_bessel_zeros_used: usize,
}

/// Log-spaced samples of G, ρG′ and R with cubic Hermite interpolation in
/// t = log ρ. R is the exact antiderivative of the G interpolant, so
/// R′ = −G/ρ holds identically and R(1) = 0.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub multiplier: Multiplier,
    pub rho_grid: Vec<f64>,
    pub g_vals: Vec<f64>,
    pub gp_vals: Vec<f64>,
    pub r_vals: Vec<f64>,
    pub m0_plus: f64,
    pub quad_meta: QuadMeta,
    pub normalization: &'static str,
    t0: f64,
    h: f64,
    dg: Vec<f64>,
    // ∫₀^{ρ_i} G at the nodes.
    p_vals: Vec<f64>,
}

// Hermite basis and its antiderivatives on [0, 1].
#[inline]
fn hermite(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

#[inline]
fn hermite_d(s: f64) -> [f64; 4] {
    let s2 = s * s;
    [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s]
}

#[inline]
fn hermite_int(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    [
        s - s3 + 0.5 * s4,
        0.5 * s2 - 2.0 * s3 / 3.0 + 0.25 * s4,
        s3 - 0.5 * s4,
        -s3 / 3.0 + 0.25 * s4,
    ]
}

impl KernelTable {
    pub fn rho_min(&self) -> f64 {
        self.rho_grid[0]
    }

    pub fn rho_max(&self) -> f64 {
        *self.rho_grid.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.rho_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_grid.is_empty()
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.rho_grid.len();
        let x = (t - self.t0) / self.h;
        let i = (x.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, x - i as f64)
    }

    /// Local power-law exponent σ with G ≈ G_e (ρ/ρ_e)^{−σ} at node e.
    #[inline]
    fn sigma(&self, e: usize) -> f64 {
        let g = self.g_vals[e];
        if g > 0.0 {
            -self.dg[e] / g
        } else {
            0.0
        }
    }

    #[inline]
    fn extrap(&self, e: usize, t: f64) -> (f64, f64, f64) {
        let tau = t - (self.t0 + e as f64 * self.h);
        let s = self.sigma(e);
        let ge = self.g_vals[e];
        let g = ge * (-s * tau).exp();
        let phi = if s.abs() < 1e-12 { tau } else { -(-s * tau).exp_m1() / s };
        (g, -s * g, self.r_vals[e] - ge * phi)
    }

    /// (G, dG/dlogρ, R) at log ρ = t; power-law extrapolation off the grid.
    #[inline]
    pub fn eval_t(&self, t: f64) -> (f64, f64, f64) {
        let n = self.rho_grid.len();
        let tmax = self.t0 + (n - 1) as f64 * self.h;
        if t < self.t0 {
            return self.extrap(0, t);
        }
        if t > tmax {
            return self.extrap(n - 1, t);
        }
        let (i, s) = self.locate(t);
        let h = self.h;
        let (g0, g1, d0, d1) = (self.g_vals[i], self.g_vals[i + 1], self.dg[i], self.dg[i + 1]);
        let b = hermite(s);
        let bd = hermite_d(s);
        let bi = hermite_int(s);
        let g = b[0] * g0 + b[1] * h * d0 + b[2] * g1 + b[3] * h * d1;
        let dg = (bd[0] * g0 + bd[1] * h * d0 + bd[2] * g1 + bd[3] * h * d1) / h;
        let r = self.r_vals[i] - h * (bi[0] * g0 + bi[1] * h * d0 + bi[2] * g1 + bi[3] * h * d1);
        (g, dg, r)
    }

    pub fn g_at(&self, rho: f64) -> f64 {
        self.eval_t(rho.ln()).0
    }

    pub fn g_prime_at(&self, rho: f64) -> f64 {
        self.eval_t(rho.ln()).1 / rho
    }

    pub fn r_at(&self, rho: f64) -> f64 {
        self.eval_t(rho.ln()).2
    }

    /// ∫₀^ρ G(s) ds from the interpolant and its power-law extensions.
    pub fn p_at(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let t = rho.ln();
        let n = self.rho_grid.len();
        let tmax = self.t0 + (n - 1) as f64 * self.h;
        if t <= self.t0 || t >= tmax {
            let e = if t <= self.t0 { 0 } else { n - 1 };
            let q = 1.0 - self.sigma(e);
            let tau = t - (self.t0 + e as f64 * self.h);
            let w = self.g_vals[e] * self.rho_grid[e];
            if e == 0 {
                return if q > 0.0 { w * (q * tau).exp() / q } else { f64::INFINITY };
            }
            let grow = if q.abs() < 1e-12 { tau } else { (q * tau).exp_m1() / q };
            return self.p_vals[e] + w * grow;
        }
        let (i, _) = self.locate(t);
        let ti = self.t0 + i as f64 * self.h;
        self.p_vals[i] + self.cell_moment(ti, t)
    }

    // ∫ G e^t dt over [a, b] inside one cell.
    fn cell_moment(&self, a: f64, b: f64) -> f64 {
        let r = quad::gl15();
        let (c, hw) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = 0.0;
        for (x, w) in r.x.iter().zip(&r.w) {
            let t = c + hw * x;
            acc += w * self.eval_t(t).0 * t.exp();
        }
        acc * hw
    }

    fn in_range(&self, rho: f64) -> Result<()> {
        let (lo, hi) = (self.rho_min(), self.rho_max());
        if rho >= lo * (1.0 - 1e-12) && rho <= hi * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::Range { rho, lo, hi })
        }
    }

    pub fn g_checked(&self, rho: f64) -> Result<f64> {
        self.in_range(rho)?;
        Ok(self.g_at(rho))
    }

    pub fn g_prime_checked(&self, rho: f64) -> Result<f64> {
        self.in_range(rho)?;
        Ok(self.g_prime_at(rho))
    }

    pub fn r_checked(&self, rho: f64) -> Result<f64> {
        self.in_range(rho)?;
        Ok(self.r_at(rho))
    }

    /// Tabulates a closed-form kernel on the same grid layout (used as an
    /// exact reference and for fast tests).
    pub fn from_closed_form(cf: ClosedForm, mult: Multiplier, rho_min: f64, rho_max: f64, n_points: usize) -> Result<Self> {
        let grid = grid(rho_min, rho_max, n_points)?;
        let g: Vec<f64> = grid.iter().map(|&r| cf.g(r)).collect();
        let gp: Vec<f64> = grid.iter().map(|&r| cf.g_prime(r)).collect();
        let meta = QuadMeta { abs_tol: 0.0, rel_tol: 0.0, truncation_r_max: 0.0, num_bessel_zeros_used: 0 };
        Ok(Self::assemble(mult, grid, g, gp, meta))
    }

    fn assemble(multiplier: Multiplier, grid: Vec<f64>, g: Vec<f64>, gp: Vec<f64>, meta: QuadMeta) -> Self {
        let n = grid.len();
        let t0 = grid[0].ln();
        let h = (grid[n - 1].ln() - t0) / (n - 1) as f64;
        let dg: Vec<f64> = grid.iter().zip(&gp).map(|(r, d)| r * d).collect();
        let mut r = vec![0.0; n];
        for i in 0..n - 1 {
            r[i + 1] = r[i] - h * (0.5 * (g[i] + g[i + 1]) + h * (dg[i] - dg[i + 1]) / 12.0);
        }
        let m0_plus = multiplier.value(1e-8);
        let mut t = KernelTable {
            multiplier,
            rho_grid: grid,
            g_vals: g,
            gp_vals: gp,
            r_vals: r,
            m0_plus,
            quad_meta: meta,
            normalization: "R(1)=0",
            t0,
            h,
            dg,
            p_vals: vec![0.0; n],
        };
        let q = 1.0 - t.sigma(0);
        t.p_vals[0] = if q > 0.0 { t.g_vals[0] * t.rho_grid[0] / q } else { f64::INFINITY };
        for i in 0..n - 1 {
            let a = t0 + i as f64 * h;
            t.p_vals[i + 1] = t.p_vals[i] + t.cell_moment(a, a + h);
        }
        let shift = t.eval_t(0.0).2;
        for v in &mut t.r_vals {
            *v -= shift;
        }
        t
    }
}

impl RadialKernel for KernelTable {
    #[inline]
    fn g(&self, rho: f64) -> f64 {
        self.g_at(rho)
    }
    #[inline]
    fn r(&self, rho: f64) -> f64 {
        self.r_at(rho)
    }
    fn p(&self, rho: f64) -> f64 {
        self.p_at(rho)
    }
    #[inline]
    fn r_sq(&self, rho2: f64) -> f64 {
        self.eval_t(0.5 * rho2.ln()).2
    }
}

fn grid(rho_min: f64, rho_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(rho_min > 0.0 && rho_max > rho_min) {
        return Err(Error::Param(format!("need 0 < rho_min < rho_max, got {rho_min}, {rho_max}")));
    }
    if n_points < 64 {
        return Err(Error::Param(format!("n_points = {n_points} < 64")));
    }
    let (a, b) = (rho_min.ln(), rho_max.ln());
    Ok((0..n_points)
        .map(|i| {
            if i == 0 {
                rho_min
            } else if i == n_points - 1 {
                rho_max
            } else {
                (a + (b - a) * i as f64 / (n_points - 1) as f64).exp()
            }
        })
        .collect())
}

/// Evaluates G and G′ at every grid node (in parallel) with relative
/// tolerance `tol`.
pub fn build_table(mult: &Multiplier, rho_min: f64, rho_max: f64, n_points: usize, tol: f64) -> Result<KernelTable> {
    let grid = grid(rho_min, rho_max, n_points)?;
    if !mult.has_derivatives() {
        return Err(Error::DerivativeUnavailable { kind: mult.name().into(), order: 1 });
    }
    let results: Vec<Result<(HankelOut, HankelOut)>> = grid
        .par_iter()
        .map(|&rho| {
            let g = g_with_meta(mult, rho, 1e-300, tol)?;
            let gp = gp_with_meta(mult, rho, 1e-300, tol)?;
            Ok((g, gp))
        })
        .collect();
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, r)| r.is_err()).map(|(i, _)| i).collect();
    if !failed.is_empty() {
        return Err(Error::TableBuild(failed));
    }
    let ok: Vec<(HankelOut, HankelOut)> = results.into_iter().map(|r| r.unwrap()).collect();
    let meta = QuadMeta {
        abs_tol: 0.0,
        rel_tol: tol,
        truncation_r_max: ok.iter().map(|(a, b)| a.r_max.max(b.r_max)).fold(0.0, f64::max),
        num_bessel_zeros_used: ok.iter().map(|(a, b)| a.zeros.max(b.zeros)).max().unwrap_or(0),
    };
    let g = ok.iter().map(|(a, _)| a.value).collect();
    let gp = ok.iter().map(|(_, b)| b.value).collect();
    Ok(KernelTable::assemble(mult.clone(), grid, g, gp, meta))
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub c_bar_fit: f64,
    pub c_fit: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub sandwich_ok: bool,
    pub monotone_quantity: &'static str,
    pub monotone_flag: bool,
    pub c_bar0_fit: f64,
    pub scaling_limit_errors: Vec<(String, f64)>,
}

/// Empirical version of the kernel properties: the sandwich of G against
/// m(1/ρ) on the small-ρ half of the grid, monotonicity near 0 and the
/// scaling limits.
pub fn verify_asymptotics(table: &KernelTable, mult: &Multiplier, max_span: f64) -> Result<AsymptoticsReport> {
    let n = table.len();
    let half = n / 2;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    for i in 0..half {
        let rho = table.rho_grid[i];
        let ratio = table.g_vals[i] / mult.value(1.0 / rho);
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
    }
    let h2b = matches!(mult.regime, Regime::H2b { .. });
    let quantity = |i: usize| {
        if h2b {
            table.g_vals[i]
        } else {
            table.g_vals[i] / table.rho_grid[i]
        }
    };
    let mut last_ok = 0;
    for i in 1..n {
        if quantity(i) <= quantity(i - 1) * (1.0 + 1e-12) {
            last_ok = i;
        } else {
            break;
        }
    }
    let mut errors = Vec::new();
    match mult.regime {
        Regime::H2b { alpha } => {
            let mut e1 = 0.0f64;
            let mut e2 = 0.0f64;
            for i in 0..n {
                let rho = table.rho_grid[i];
                if rho > 1e-4 {
                    break;
                }
                let g = table.g_vals[i];
                e1 = e1.max((rho * table.gp_vals[i] + alpha * g).abs() / g);
                for l in [0.5, 2.0] {
                    let lr = l * rho;
                    if lr >= table.rho_min() && lr <= table.rho_max() {
                        e2 = e2.max((l.powf(alpha) * table.g_at(lr) / g - 1.0).abs());
                    }
                }
            }
            errors.push(("|rho G' + alpha G| / G".to_string(), e1));
            errors.push(("|l^alpha G(l rho)/G(rho) - 1|".to_string(), e2));
        }
        _ => {
            for l in [2.0, 10.0] {
                let e = (mult.value(l / 1e-8) / mult.value(1.0 / 1e-8) - 1.0).abs();
                errors.push((format!("|m({l}/rho)/m(1/rho) - 1| at rho=1e-8"), e));
            }
        }
    }
    Ok(AsymptoticsReport {
        c_bar_fit: ratio_min,
        c_fit: ratio_max,
        ratio_min,
        ratio_max,
        sandwich_ok: ratio_min > 0.0 && ratio_max / ratio_min <= max_span,
        monotone_quantity: if h2b { "G" } else { "G/rho" },
        monotone_flag: last_ok + 1 >= half,
        c_bar0_fit: table.rho_grid[last_ok],
        scaling_limit_errors: errors,
    })
}

/// Smallest constants with |R| ≤ C max(ρ^{−α}, |log ρ|) and
/// |R′| ≤ C′ max(ρ^{−1−α}, ρ^{−1}) on the grid.
pub fn r_bound_constants(table: &KernelTable, alpha: f64) -> (f64, f64) {
    let mut c = 0.0f64;
    let mut cp = 0.0f64;
    for i in 0..table.len() {
        let rho = table.rho_grid[i];
        let w = rho.powf(-alpha).max(rho.ln().abs());
        c = c.max(table.r_vals[i].abs() / w);
        let wp = rho.powf(-1.0 - alpha).max(1.0 / rho);
        cp = cp.max((table.g_vals[i] / rho).abs() / wp);
    }
    (c, cp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_kernel_constant() {
        let m = Multiplier::euler();
        for rho in [1e-6, 0.1, 3.0, 400.0] {
            let g = compute_g(&m, rho, 1e-12).unwrap();
            assert!((g - 1.0 / (2.0 * PI)).abs() < 1e-12, "{g}");
            assert!(compute_g_prime(&m, rho, 1e-12).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_sqg_matches_closed_form() {
        for alpha in [0.05, 0.2, 0.3] {
            let m = Multiplier::alpha_sqg(alpha).unwrap();
            let cf = ClosedForm::AlphaSqg { alpha };
            for rho in [1e-4, 0.1, 1.0, 10.0] {
                let g = compute_g(&m, rho, 1e-12).unwrap();
                let e = cf.g(rho);
                assert!(((g - e) / e).abs() < 1e-9, "alpha {alpha} rho {rho}: {g} vs {e}");
                let gp = compute_g_prime(&m, rho, 1e-12 * cf.g_prime(rho).abs().max(1.0)).unwrap();
                let ep = cf.g_prime(rho);
                assert!(((gp - ep) / ep).abs() < 1e-8, "G' alpha {alpha} rho {rho}: {gp} vs {ep}");
            }
        }
    }

    #[test]
    fn c_alpha_special_values() {
        assert!((c_alpha(1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_primitive() {
        let cf = ClosedForm::AlphaSqg { alpha: 0.25 };
        assert_eq!(cf.r(1.0), 0.0);
        let rho: f64 = 0.37;
        let h = 1e-5;
        let d = (cf.r(rho + h) - cf.r(rho - h)) / (2.0 * h);
        assert!((d + cf.g(rho) / rho).abs() < 1e-8);
    }

    #[test]
    fn table_interpolation_and_primitive() {
        let alpha = 0.25;
        let cf = ClosedForm::AlphaSqg { alpha };
        let t = KernelTable::from_closed_form(cf, Multiplier::alpha_sqg(alpha).unwrap(), 1e-8, 1e2, 512).unwrap();
        assert!(t.r_at(1.0).abs() < 1e-13);
        for rho in [2.3e-8, 1.7e-5, 0.0123, 0.77, 1.0, 55.0] {
            assert!((t.g_at(rho) / cf.g(rho) - 1.0).abs() < 1e-9);
            assert!((t.r_at(rho) - cf.r(rho)).abs() < 1e-8 * cf.r(rho).abs().max(1.0));
        }
        // off-grid extrapolation is exact for power laws
        assert!((t.g_at(1e-10) / cf.g(1e-10) - 1.0).abs() < 1e-9);
        assert!((t.r_at(1e-10) - cf.r(1e-10)).abs() < 1e-6 * cf.r(1e-10));
        assert!(t.r_checked(1e-10).is_err());
        for rho in [1e-9, 3.3e-4, 0.5, 80.0, 300.0] {
            assert!((t.p_at(rho) / cf.p(rho) - 1.0).abs() < 1e-9, "{rho}");
        }
    }
}
