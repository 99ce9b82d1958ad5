//! The twin-patch singularity experiment: initial data touching the wall,
//! the driving rate 𝐅, the collision time T* and envelope X(t), trapezoid
//! containment, the velocity-bound audit and the Π indices.

use serde::{Deserialize, Serialize};

use crate::contour::{
    self, diagnostics, init_shape, point_in_polygon, point_segment, reparametrize_system, segment_distance,
    step_adaptive, ContourSystem, Domain, ShapeSpec, StepOptions,
};
use crate::error::{Error, Result};
use crate::kernel::RadialKernel;
use crate::multiplier::{classify_osgood, Multiplier, Osgood};
use crate::quad;
use crate::velocity::{polar_moment, split_velocities, Convex, Piece, RegionSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingRegime {
    /// 𝐅(ρ) = c ρ log(1/ρ) G(ρ)
    A2a,
    /// 𝐅(ρ) = c ρ G(ρ)
    A2b,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Inner offset of the patch; defaults to 10⁻³ c*.
    pub epsilon: Option<f64>,
    pub c0: f64,
    /// Trapezoid slope; defaults to 1 under A2a and 5 under A2b.
    #[serde(alias = "k")]
    pub slope_k: Option<u32>,
    /// Defaults to c*/k.
    pub delta_g: Option<f64>,
    pub driving_c: Option<f64>,
    /// Defaults to 10³ k.
    pub n_k: Option<f64>,
    pub regime: DrivingRegime,
    /// Growth exponent entering the Π indices.
    pub beta: Option<f64>,
    pub m: usize,
    pub dt_max: f64,
    /// Defaults to T*.
    pub t_end: Option<f64>,
    pub output_every: usize,
    pub reparam_every: usize,
    pub cfl_factor: f64,
    /// Corner size of the rounded rectangle; defaults to 0.4 ε.
    pub corner: Option<f64>,
    /// Invariant violations are errors when set, warnings otherwise.
    pub strict: bool,
    /// Collision is declared once the gap drops below this fraction of the
    /// initial gap (or 2 node spacings, whichever is larger).
    pub collision_gap_fraction: Option<f64>,
    pub w_norm_max: f64,
    /// Fitted uniform velocity bound C̄.
    pub c_bar: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            epsilon: None,
            c0: 1.0,
            slope_k: None,
            delta_g: None,
            driving_c: None,
            n_k: None,
            regime: DrivingRegime::A2b,
            beta: None,
            m: 512,
            dt_max: 1e-2,
            t_end: None,
            output_every: 10,
            reparam_every: 8,
            cfl_factor: 0.5,
            corner: None,
            strict: true,
            collision_gap_fraction: None,
            w_norm_max: 1e8,
            c_bar: None,
        }
    }
}

impl ScenarioConfig {
    pub fn c_star(&self) -> f64 {
        self.c0 / 4.0
    }

    pub fn eps(&self) -> f64 {
        self.epsilon.unwrap_or(1e-3 * self.c_star())
    }

    pub fn k(&self) -> f64 {
        self.slope_k.unwrap_or(match self.regime {
            DrivingRegime::A2a => 1,
            DrivingRegime::A2b => 5,
        }) as f64
    }

    pub fn delta_g(&self) -> f64 {
        self.delta_g.unwrap_or(self.c_star() / self.k())
    }

    pub fn n_k(&self) -> f64 {
        self.n_k.unwrap_or(1e3 * self.k())
    }

    pub fn corner(&self) -> f64 {
        self.corner.unwrap_or(0.4 * self.eps())
    }

    /// Right end 2c*/k of the trapezoid.
    pub fn trapezoid_right(&self) -> f64 {
        2.0 * self.c_star() / self.k()
    }

    fn driving_c(&self) -> Result<f64> {
        match self.driving_c {
            Some(c) if c > 0.0 => Ok(c),
            Some(c) => Err(Error::Param(format!("driving_c = {c} must be positive"))),
            None => Err(Error::Param("driving_c is not set (fit it with verify-bounds)".into())),
        }
    }

    /// Hard parameter errors plus the soft invariants. The soft ones are
    /// returned as warnings unless `strict`.
    pub fn check(&self, t_star: Option<f64>) -> Result<Vec<String>> {
        let (eps, cs, k, dg) = (self.eps(), self.c_star(), self.k(), self.delta_g());
        if !(self.c0 > 0.0) {
            return Err(Error::Param(format!("c0 = {} must be positive", self.c0)));
        }
        if !(eps > 0.0 && eps < cs) {
            return Err(Error::Param(format!("epsilon = {eps} must lie in (0, c*) = (0, {cs})")));
        }
        if k < 1.0 {
            return Err(Error::Param("slope_k must be >= 1".into()));
        }
        if !(dg > 0.0 && dg < cs) {
            return Err(Error::Invariant(format!("delta_G = {dg} not in (0, c*) = (0, {cs})")));
        }
        if !(3.0 * eps < self.trapezoid_right()) {
            return Err(Error::Invariant(format!(
                "3 epsilon = {} >= 2c*/k = {}: the trapezoid is empty",
                3.0 * eps,
                self.trapezoid_right()
            )));
        }
        if !(self.corner() > 0.0 && self.corner() < 0.5 * eps) {
            return Err(Error::Param(format!(
                "corner = {} must lie in (0, epsilon/2) so that (2 epsilon, 3c*)x(0, 3c*) stays inside the patch",
                self.corner()
            )));
        }
        if !(self.n_k() > k) {
            return Err(Error::Param(format!("N_k = {} must exceed k = {k}", self.n_k())));
        }
        if self.m < 32 || self.m % 2 != 0 || self.output_every == 0 || self.reparam_every == 0 {
            return Err(Error::Param("need even M >= 32 and positive output/reparametrization cadence".into()));
        }
        if !(self.dt_max > 0.0 && self.cfl_factor > 0.0) {
            return Err(Error::Param("dt_max and cfl_factor must be positive".into()));
        }
        let mut soft = Vec::new();
        if !(eps < dg / (4.0 * k)) {
            soft.push(format!("epsilon = {eps} >= delta_G/(4k) = {}", dg / (4.0 * k)));
        }
        if let (Some(t), Some(cb)) = (t_star, self.c_bar) {
            if !(t <= dg / (2.0 * cb)) {
                soft.push(format!("T* = {t} > delta_G/(2 C_bar) = {}", dg / (2.0 * cb)));
            }
        }
        if self.strict {
            if let Some(first) = soft.first() {
                return Err(Error::Invariant(first.clone()));
            }
        }
        Ok(soft)
    }
}

/// Ω₀: a rounded rectangle midway between (2ε, 3c*)×(0, 3c*) and
/// (ε, 4c*)×(0, 4c*) with its bottom on the wall, plus the odd mirror.
pub fn build_initial_data(cfg: &ScenarioConfig) -> Result<ContourSystem> {
    cfg.check(None)?;
    let (eps, cs) = (cfg.eps(), cfg.c_star());
    let shape = ShapeSpec::RoundedRectangle { x0: 1.5 * eps, x1: 3.5 * cs, y0: 0.0, y1: 3.5 * cs, corner: cfg.corner() };
    let p = init_shape(&shape, cfg.m, 1.0)?;
    ContourSystem::with_mirror(vec![p], Domain::HalfPlane)
}

/// 𝐅(ρ)/(cρ): G(ρ) under A2b, log(1/ρ) G(ρ) under A2a.
fn rate_factor<K: RadialKernel + ?Sized>(regime: DrivingRegime, kernel: &K, rho: f64) -> f64 {
    match regime {
        DrivingRegime::A2a => -rho.ln() * kernel.g(rho),
        DrivingRegime::A2b => kernel.g(rho),
    }
}

pub fn driving_rate<K: RadialKernel + ?Sized>(cfg: &ScenarioConfig, kernel: &K, rho: f64) -> Result<f64> {
    let c = cfg.driving_c()?;
    if !(rho > 0.0 && rho < cfg.c0) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, c0) = (0, {})", cfg.c0)));
    }
    if cfg.regime == DrivingRegime::A2a && rho >= 1.0 {
        return Err(Error::Domain(format!("rho = {rho} >= 1: log(1/rho) is not positive")));
    }
    Ok(c * rho * rate_factor(cfg.regime, kernel, rho))
}

/// T* and the envelope X(t) solving X′ = −𝐅(X)/2, X(0) = 3ε.
///
/// In s = log(1/ρ) the time to travel from 3ε to e^{−s} is ∫ h with
/// h(s) = 2 / (c · 𝐅-factor(e^{−s})); h is tabulated on a uniform s-grid.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub t_star: f64,
    pub x0: f64,
    /// Share of T* supplied by the tail model beyond the grid.
    pub tail: f64,
    pub tail_model: String,
    #[serde(skip)]
    s: Vec<f64>,
    #[serde(skip)]
    h: Vec<f64>,
    #[serde(skip)]
    cum: Vec<f64>,
}

const S_STEP: f64 = 0.25;
const S_MAX: f64 = 690.0;

pub fn collision_time<K: RadialKernel + ?Sized>(
    cfg: &ScenarioConfig,
    kernel: &K,
    mult: Option<&Multiplier>,
) -> Result<Envelope> {
    let c = cfg.driving_c()?;
    let x0 = 3.0 * cfg.eps();
    if !(x0 < cfg.c0) || (cfg.regime == DrivingRegime::A2a && x0 >= 1.0) {
        return Err(Error::Domain(format!("3 epsilon = {x0} outside the domain of F")));
    }
    if cfg.regime == DrivingRegime::A2a {
        if let Some(m) = mult {
            let rep = classify_osgood(m, 2f64.max(1.0 / x0), 1e12)?;
            if rep.classification == Osgood::Divergent {
                return Err(Error::NoFiniteCollision(format!(
                    "Osgood integral diverges for {} ({})",
                    m.name(),
                    rep.detail
                )));
            }
        }
    }
    let h = |s: f64| 2.0 / (c * rate_factor(cfg.regime, kernel, (-s).exp()));
    let s0 = -x0.ln();
    let mut s = vec![s0];
    let mut hv = vec![h(s0)];
    let mut cum = vec![0.0];
    if !(hv[0].is_finite() && hv[0] > 0.0) {
        return Err(Error::Numeric(format!("F(3 epsilon) = {} is not positive", 2.0 / hv[0])));
    }
    loop {
        let a = *s.last().unwrap();
        let b = a + S_STEP;
        let scale = quad::fixed(h, a, b, quad::gl7()).abs();
        let (v, _) = quad::adaptive(h, a, b, 1e-14 * scale, 200)?;
        let hb = h(b);
        if !(hb.is_finite() && hb > 0.0 && v.is_finite()) {
            return Err(Error::Numeric(format!("non-positive driving rate at rho = {:e}", (-b).exp())));
        }
        s.push(b);
        hv.push(hb);
        cum.push(cum.last().unwrap() + v);
        let n = s.len();
        if n < 9 {
            continue;
        }
        // local decay index g = −s d(log h)/ds
        let g = -b * (hv[n - 1].ln() - hv[n - 2].ln()) / S_STEP;
        let total = cum[n - 1];
        let (tail, model) = if g > 1.5 {
            (hb * b / (g - 1.0), "power")
        } else if g > 1.0 {
            let p = (g - 1.0) * b.ln();
            if p > 1.0 {
                (hb * b * b.ln() / (p - 1.0), "log_power")
            } else {
                (f64::INFINITY, "divergent")
            }
        } else {
            (f64::INFINITY, "divergent")
        };
        let flat = n > 80 && g < 0.5;
        if tail < 1e-13 * total || b > S_MAX || flat {
            if !tail.is_finite() {
                return Err(Error::NoFiniteCollision(format!(
                    "integral of 2/F diverges at 0 (decay index {g:.3} at rho = {:e})",
                    (-b).exp()
                )));
            }
            return Ok(Envelope { t_star: total + tail, x0, tail, tail_model: model.into(), s, h: hv, cum });
        }
    }
}

impl Envelope {
    /// X(t); 0 for t ≥ T*.
    pub fn x_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.x0;
        }
        if t >= self.t_star {
            return 0.0;
        }
        let n = self.cum.len();
        if t >= self.cum[n - 1] {
            let last = (-self.s[n - 1]).exp();
            return last * (self.t_star - t) / (self.t_star - self.cum[n - 1]);
        }
        let i = self.cum.partition_point(|&c| c <= t) - 1;
        // h exponential on the cell, rescaled to the exact cell integral
        let (hi, hj) = (self.h[i], self.h[i + 1]);
        let lam = (hi / hj).ln() / S_STEP;
        let cell = self.cum[i + 1] - self.cum[i];
        let r = (t - self.cum[i]) / cell;
        let tau = if lam.abs() < 1e-12 {
            r * S_STEP
        } else {
            -(1.0 - r * (1.0 - (-lam * S_STEP).exp())).ln() / lam
        };
        (-(self.s[i] + tau.clamp(0.0, S_STEP))).exp()
    }
}

// ------------------------------------------------------------ Π indices

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PiIndices {
    pub beta: f64,
    pub pi1: f64,
    pub pi2: f64,
    /// Π₂ − 2/(β N_k^β)
    pub margin: f64,
}

pub fn pi_indices(beta: f64, k: f64, n_k: f64) -> Result<PiIndices> {
    if !(beta > 0.0 && beta < 1.0 / 3.0) {
        return Err(Error::Domain(format!("beta = {beta} outside (0, 1/3)")));
    }
    if !(k >= 1.0 && n_k > k) {
        return Err(Error::Param(format!("need k >= 1 and N_k > k, got k = {k}, N_k = {n_k}")));
    }
    let b = beta;
    let k2 = k * k;
    let q = |x: f64| x.powf(-b / 2.0);
    let pi1 = 2.0 / b
        * (1.0 / (1.0 - b) - q(k2 + 1.0) - 2f64.powf(-b) / (k.powf(b) * (4.0 / k2 + 1.0).powf(1.0 + b / 2.0))
            - 2f64.powf(-b) / (1.0 - b) * (1.0 - q(k2 + 1.0))
            + 0.5 * (q(4.0 + 4.0 * k2) - q(9.0 + k2)));
    let pi2 = 2.0 / b
        * (-1.0 / (1.0 - b)
            + q(1.0 + 1.0 / k2)
            + (1.0 - (k2 + 1.0).powf(-1.0 - b / 2.0)) / (2.0 * (k2 + 1.0).powf(b / 2.0))
                * (1.0 + (2f64.powf(1.0 - b) - 1.0) / (1.0 - b)));
    Ok(PiIndices { beta, pi1, pi2, margin: pi2 - 2.0 / (b * n_k.powf(b)) })
}

// ------------------------------------------------------ velocity audit

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Wedge {
    /// x₂ ≤ k x₁ ≤ δ_G
    U1,
    /// k x₁ ≤ x₂ ≤ δ_G
    U2,
}

fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut n) = (1.0, 0.0, i);
    while n > 0 {
        f /= base as f64;
        r += f * (n % base) as f64;
        n /= base;
    }
    r
}

/// `n` deterministic probes in each wedge, log-spaced over two decades
/// below δ_G. `offset` selects a disjoint stretch of the sequence.
pub fn wedge_probes(cfg: &ScenarioConfig, delta_g: f64, n: usize, offset: usize) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let k = cfg.k();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for i in 0..n {
        let j = offset + i + 1;
        let a = 10f64.powf(-2.0 * halton(j, 2));
        let b = 0.02 + 0.96 * halton(j, 3);
        let x1 = delta_g / k * a;
        u1.push([x1, k * x1 * b]);
        let x2 = delta_g * a;
        u2.push([x2 / k * b, x2]);
    }
    (u1, u2)
}

/// θ = 1 on (0, c0/2)², odd in x₁: the largest density the wedge bounds
/// are stated for.
pub fn audit_region(cfg: &ScenarioConfig) -> RegionSet {
    let h = cfg.c0 / 2.0;
    RegionSet { pieces: vec![Piece::Rectangle { x0: 0.0, x1: h, y0: 0.0, y1: h, weight: 1.0 }], odd_in_x1: true }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeAudit {
    pub x: [f64; 2],
    pub wedge: Wedge,
    /// u₁ in U1, u₂ in U2
    pub u: f64,
    pub bad: f64,
    pub good: f64,
    /// 𝐅/c at x₁ (U1) or x₂/k (U2)
    pub f_unit: f64,
    /// −u₁/(𝐅/c) or u₂/(𝐅/c): the largest c this probe admits
    pub ratio: f64,
    /// U₁ (U1) or V₁ (U2)
    pub bad_bound: f64,
    /// 2kG(c*/k)x₁ + U₂ + U₃ + U₄ (U1) or V₂ (U2); None outside the
    /// range where the bound holds
    pub good_bound: Option<f64>,
    /// T₁ + T₂ (U1 only)
    pub good_regions: Option<f64>,
    pub terms: Vec<(String, f64)>,
    pub bad_slack: f64,
    pub good_slack: Option<f64>,
    pub good_region_slack: Option<f64>,
    pub err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub delta_g: f64,
    pub k: f64,
    pub probes: Vec<ProbeAudit>,
    pub skipped: Vec<([f64; 2], String)>,
    /// min ratio over the probes; the largest admissible driving_c
    pub fitted_c: f64,
}

fn polygon(v: &[[f64; 2]]) -> Convex {
    Convex::Polygon(v.to_vec())
}

/// ∫∫ over the piece of (s₁, s₂)/|s|² G(|s|) ds, s measured from `o`.
fn region_moment<K: RadialKernel + ?Sized>(o: [f64; 2], piece: &Convex, kernel: &K, tol: f64) -> Result<[f64; 2]> {
    let prim = |r: f64| kernel.p(r);
    Ok(polar_moment(o, piece, &prim, tol)?.0)
}

pub fn verify_velocity_bounds<K: RadialKernel + ?Sized>(
    cfg: &ScenarioConfig,
    kernel: &K,
    probes: &[[f64; 2]],
    delta_g: f64,
    theta: &RegionSet,
) -> Result<BoundsReport> {
    let (k, cs) = (cfg.k(), cfg.c_star());
    let unit = |rho: f64| rho * rate_factor(cfg.regime, kernel, rho);
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &x in probes {
        let wedge = if x[0] > 0.0 && x[1] >= 0.0 && x[1] <= k * x[0] && k * x[0] <= delta_g {
            Wedge::U1
        } else if x[0] >= 0.0 && k * x[0] <= x[1] && x[1] <= delta_g && x[1] > 0.0 {
            Wedge::U2
        } else {
            skipped.push((x, "outside both wedges".to_string()));
            continue;
        };
        let scale = kernel.p(x[0].hypot(x[1]).max(1e-300)).abs().max(1e-300);
        let tol = 1e-11 * scale;
        let sv = split_velocities(x, theta, kernel, Domain::HalfPlane, tol)?;
        let mut terms = Vec::new();
        let audit = match wedge {
            Wedge::U1 => {
                let (x1, x2) = (x[0], x[1]);
                let u1b = 2.0 * region_moment([0.0, 0.0], &polygon(&[[0.0, 0.0], [x1, 0.0], [x1, x2], [0.0, x2]]), kernel, tol)?[1];
                terms.push(("U1".into(), u1b));
                let mut good_bound = None;
                let mut good_regions = None;
                if x1 <= cs / (4.0 * k) && x2 <= cs {
                    let a1 = polygon(&[[x1, x2], [3.0 * x1, x2], [3.0 * x1 + cs / k, x2 + cs], [x1 + cs / k, x2 + cs]]);
                    let a2 = polygon(&[
                        [x1 + cs / k, x2],
                        [3.0 * x1 + cs / k, x2],
                        [3.0 * x1 + cs / k, x2 + cs],
                        [x1 + cs / k, x2 + cs],
                    ]);
                    let t1 = -region_moment(x, &a1, kernel, tol)?[1];
                    let t2 = region_moment(x, &a2, kernel, tol)?[1];
                    let t2b = 2.0 * k * kernel.g(cs / k) * x1;
                    let q = (4.0 / (k * k) + 1.0).sqrt();
                    let u2t = -2.0 * x1 / (q * q) * (kernel.r(2.0 * k * x1 * q) - kernel.r(cs * q));
                    let u3 = -region_moment([0.0, 0.0], &polygon(&[[0.0, 0.0], [2.0 * x1, 0.0], [2.0 * x1, 2.0 * k * x1]]), kernel, tol)?[1];
                    let u4 = -region_moment(
                        [0.0, 0.0],
                        &polygon(&[[2.0 * x1, 0.0], [4.0 * x1, 2.0 * k * x1], [2.0 * x1, 2.0 * k * x1]]),
                        kernel,
                        tol,
                    )?[1];
                    terms.extend([
                        ("T1".into(), t1),
                        ("T2".into(), t2),
                        ("T2_bound".into(), t2b),
                        ("U2".into(), u2t),
                        ("U3".into(), u3),
                        ("U4".into(), u4),
                    ]);
                    good_bound = Some(t2b + u2t + u3 + u4);
                    good_regions = Some(t1 + t2);
                }
                let f = unit(x1);
                ProbeAudit {
                    x,
                    wedge,
                    u: sv.u[0],
                    bad: sv.u1_bad,
                    good: sv.u1_good,
                    f_unit: f,
                    ratio: -sv.u[0] / f,
                    bad_bound: u1b,
                    good_bound,
                    good_regions,
                    terms,
                    bad_slack: u1b - sv.u1_bad,
                    good_slack: good_bound.map(|b| b - sv.u1_good),
                    good_region_slack: good_regions.map(|b| b - sv.u1_good),
                    err: sv.err,
                }
            }
            Wedge::U2 => {
                let (x1, x2) = (x[0], x[1]);
                let v1 = -2.0 * region_moment([0.0, 0.0], &polygon(&[[0.0, 0.0], [x1, 0.0], [x1, x2], [0.0, x2]]), kernel, tol)?[0];
                terms.push(("V1".into(), v1));
                let mut good_bound = None;
                if x2 <= cs / (4.0 * k * k) && x1 <= cs && k * x2 < cs / k {
                    let q = (k * k + 1.0).sqrt();
                    let prim = |r: f64| kernel.p(r) - kernel.p(q * r) / (q * q * q);
                    let rect = polygon(&[[k * x2, 0.0], [cs / k, 0.0], [cs / k, 2.0 * x2], [k * x2, 2.0 * x2]]);
                    let v2 = polar_moment([0.0, 0.0], &rect, &prim, tol)?.0[0];
                    terms.push(("V2".into(), v2));
                    good_bound = Some(v2);
                }
                let f = unit(x2 / k);
                ProbeAudit {
                    x,
                    wedge,
                    u: sv.u[1],
                    bad: sv.u2_bad,
                    good: sv.u2_good,
                    f_unit: f,
                    ratio: sv.u[1] / f,
                    bad_bound: v1,
                    good_bound,
                    good_regions: None,
                    terms,
                    bad_slack: sv.u2_bad - v1,
                    good_slack: good_bound.map(|b| sv.u2_good - b),
                    good_region_slack: None,
                    err: sv.err,
                }
            }
        };
        out.push(audit);
    }
    let fitted_c = out.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    Ok(BoundsReport { delta_g, k, probes: out, skipped, fitted_c })
}

#[derive(Clone, Debug, Serialize)]
pub struct FittedConstants {
    pub delta_g: f64,
    pub driving_c: f64,
    pub c_bar: f64,
    pub report: BoundsReport,
}

/// Largest δ_G ∈ {c*/k, c*/2k, …} whose probe set admits some c > 0, the
/// corresponding c, and C̄ = max |u| of the scenario density on a grid.
pub fn fit_constants<K: RadialKernel + ?Sized>(cfg: &ScenarioConfig, kernel: &K, n_probes: usize) -> Result<FittedConstants> {
    let theta = audit_region(cfg);
    let mut delta = cfg.c_star() / cfg.k();
    let mut last = None;
    for _ in 0..10 {
        let (a, b) = wedge_probes(cfg, delta, n_probes, 0);
        let probes: Vec<[f64; 2]> = a.into_iter().chain(b).collect();
        let rep = verify_velocity_bounds(cfg, kernel, &probes, delta, &theta)?;
        if rep.fitted_c > 0.0 && rep.fitted_c.is_finite() {
            let c_bar = fit_velocity_bound(cfg, kernel)?;
            return Ok(FittedConstants { delta_g: delta, driving_c: rep.fitted_c, c_bar, report: rep });
        }
        last = Some(rep.fitted_c);
        delta *= 0.5;
    }
    Err(Error::Numeric(format!("no delta_G down to {delta:e} admits a positive driving constant (last min ratio {last:?})")))
}

/// max |u| over a 16×16 grid covering (0, 4c*)² for the scenario density
/// with Ω₀ replaced by its unrounded rectangle.
pub fn fit_velocity_bound<K: RadialKernel + ?Sized>(cfg: &ScenarioConfig, kernel: &K) -> Result<f64> {
    let (eps, cs) = (cfg.eps(), cfg.c_star());
    let theta = RegionSet {
        pieces: vec![Piece::Rectangle { x0: 1.5 * eps, x1: 3.5 * cs, y0: 0.0, y1: 3.5 * cs, weight: 1.0 }],
        odd_in_x1: true,
    };
    let n = 16;
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let x = [4.0 * cs * (i as f64 + 0.5) / n as f64, 4.0 * cs * (j as f64 + 0.5) / n as f64];
            let v = crate::velocity::velocity_area(x, &theta, kernel, Domain::HalfPlane, 1e-10)?;
            best = best.max(v.u[0].hypot(v.u[1]));
        }
    }
    Ok(best)
}

// --------------------------------------------------------- containment

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapezoidSegment {
    /// vertical side x₁ = X(t)
    I1,
    /// sloped side x₂ = k x₁
    I2,
    Right,
    Bottom,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Containment {
    /// Distance from the trapezoid to the part of the contour off the
    /// wall; negative (minus the intrusion depth) once the contour enters.
    pub margin: f64,
    pub exit_segment: Option<TrapezoidSegment>,
}

/// Vertices of 𝕂 = {X < x₁ < 2c*/k, 0 < x₂ < k x₁}, counterclockwise from
/// (X, 0), with the side that follows each vertex.
pub fn trapezoid(cfg: &ScenarioConfig, x_env: f64) -> [([f64; 2], TrapezoidSegment); 4] {
    let (k, r) = (cfg.k(), cfg.trapezoid_right());
    [
        ([x_env, 0.0], TrapezoidSegment::Bottom),
        ([r, 0.0], TrapezoidSegment::Right),
        ([r, k * r], TrapezoidSegment::I2),
        ([x_env, k * x_env], TrapezoidSegment::I1),
    ]
}

pub fn containment_check(sys: &ContourSystem, cfg: &ScenarioConfig, x_env: f64) -> Containment {
    let tz = trapezoid(cfg, x_env);
    let poly: Vec<[f64; 2]> = tz.iter().map(|v| v.0).collect();
    let nodes = &sys.patches[0].nodes;
    let m = nodes.len();
    let scale = cfg.c0;
    let on_wall = |p: [f64; 2]| p[1] <= 1e-12 * scale;
    let nearest_side = |p: [f64; 2]| {
        let mut best = (f64::INFINITY, TrapezoidSegment::I1);
        for i in 0..4 {
            let d = point_segment(p, tz[i].0, tz[(i + 1) % 4].0);
            if d < best.0 {
                best = (d, tz[i].1);
            }
        }
        best
    };
    let mut depth: f64 = 0.0;
    let mut exit = None;
    let mut dist = f64::INFINITY;
    for i in 0..m {
        let (a, b) = (nodes[i], nodes[(i + 1) % m]);
        if on_wall(a) && on_wall(b) {
            continue;
        }
        if !on_wall(a) && point_in_polygon(a, &poly) {
            let (d, side) = nearest_side(a);
            if d > depth || exit.is_none() {
                depth = depth.max(d);
                exit = Some(side);
            }
        }
        for j in 0..4 {
            dist = dist.min(segment_distance(a, b, tz[j].0, tz[(j + 1) % 4].0));
        }
    }
    // the two upper vertices must lie inside the patch
    for (v, side) in [(tz[2].0, TrapezoidSegment::I2), (tz[3].0, TrapezoidSegment::I1)] {
        if !point_in_polygon(v, nodes) {
            let d = (0..m).map(|i| point_segment(v, nodes[i], nodes[(i + 1) % m])).fold(f64::INFINITY, f64::min);
            if d > depth || exit.is_none() {
                depth = depth.max(d);
                exit = Some(side);
            }
        }
    }
    match exit {
        Some(s) => Containment { margin: -depth, exit_segment: Some(s) },
        None => Containment { margin: dist, exit_segment: None },
    }
}

// ------------------------------------------------------------- the run

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    #[serde(rename = "collision")]
    Collision,
    #[serde(rename = "reached_Tstar")]
    ReachedTstar,
    #[serde(rename = "containment_exit")]
    ContainmentExit,
    #[serde(rename = "diagnostics_blowup")]
    DiagnosticsBlowup,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesRow {
    pub time: f64,
    pub x_env: f64,
    pub t_star: f64,
    pub gap: f64,
    pub margin: f64,
    pub front_min_x1: f64,
    pub w_norm: f64,
    pub areas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub time: f64,
    pub steps: usize,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub min_gap: f64,
    pub collision_threshold: f64,
    pub final_margin: f64,
    pub exit_segment: Option<TrapezoidSegment>,
    pub exit_time: Option<f64>,
    /// None when 2/𝐅 is not integrable (no finite collision time)
    pub t_star: Option<f64>,
    pub t_end: f64,
    pub driving_c: f64,
    pub delta_g: f64,
    pub c_bar: Option<f64>,
    pub envelope_probes_checked: usize,
    pub envelope_violations: usize,
    pub mirror_max_error: f64,
    pub warnings: Vec<String>,
    pub detail: String,
}

pub struct ScenarioRun {
    pub series: Vec<SeriesRow>,
    pub verdict: Verdict,
    pub final_state: ContourSystem,
}

fn front_min_x1(sys: &ContourSystem) -> f64 {
    sys.patches[0].nodes.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min)
}

fn mirror_error(sys: &ContourSystem) -> f64 {
    let (a, b) = (&sys.patches[0], &sys.patches[1]);
    let r = a.mirrored();
    r.nodes.iter().zip(&b.nodes).map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs())).fold(0.0, f64::max)
}

/// The literal checkable form of the velocity bound along the moving
/// trapezoid: probes on ℐ₁ ∪ ℐ₂ with k x₁ ≤ δ_G whose triangle 𝔸(x) lies in
/// the current patch must satisfy u₁ ≤ −𝐅(x₁)(1 − tol).
fn envelope_probe_check<K: RadialKernel + ?Sized>(
    sys: &ContourSystem,
    cfg: &ScenarioConfig,
    kernel: &K,
    x_env: f64,
    tol: f64,
) -> (usize, usize) {
    let (k, cs, dg) = (cfg.k(), cfg.c_star(), cfg.delta_g());
    let nodes = &sys.patches[0].nodes;
    let mut pts = Vec::new();
    for j in 1..5 {
        pts.push([x_env, k * x_env * j as f64 / 5.0]);
        let x1 = x_env + (dg / k - x_env) * j as f64 / 5.0;
        pts.push([x1, k * x1]);
    }
    let (mut checked, mut bad) = (0, 0);
    for p in pts {
        if !(p[0] > 0.0 && k * p[0] <= dg) {
            continue;
        }
        let tri = [p, [p[0] + cs / k, p[1]], [p[0] + cs / k, p[1] + cs]];
        if !tri.iter().all(|v| point_in_polygon(*v, nodes)) || nodes.iter().any(|q| point_in_polygon(*q, &tri)) {
            continue;
        }
        let (Ok(u), Ok(f)) = (contour::velocity_contour(p, sys, kernel), driving_rate(cfg, kernel, p[0])) else {
            continue;
        };
        checked += 1;
        if u[0] > -f * (1.0 - tol) {
            bad += 1;
        }
    }
    (checked, bad)
}

/// Evolves the scenario until collision, T* (or `t_end`), containment
/// exit or a diagnostics blowup. `observe` sees every output row.
pub fn run_scenario<K: RadialKernel + ?Sized>(
    cfg: &ScenarioConfig,
    kernel: &K,
    mult: Option<&Multiplier>,
    mut observe: impl FnMut(&SeriesRow),
) -> Result<ScenarioRun> {
    let c = cfg.driving_c()?;
    let env = match collision_time(cfg, kernel, mult) {
        Ok(e) => Some(e),
        Err(Error::NoFiniteCollision(msg)) => {
            if cfg.t_end.is_none() {
                return Err(Error::NoFiniteCollision(msg));
            }
            None
        }
        Err(e) => return Err(e),
    };
    let t_star = env.as_ref().map(|e| e.t_star);
    let warnings = cfg.check(t_star)?;
    let t_end = cfg.t_end.or(t_star).unwrap();
    let x_at = |t: f64| env.as_ref().map_or(3.0 * cfg.eps(), |e| e.x_at(t));

    let mut sys = build_initial_data(cfg)?;
    let opts = StepOptions { cfl_factor: cfg.cfl_factor };
    let initial_gap = sys.gap();
    let threshold = (2.0 * sys.min_spacing()).max(cfg.collision_gap_fraction.unwrap_or(0.0) * initial_gap);
    let mut series = Vec::new();

    let mut row = |sys: &ContourSystem, gap: f64, margin: f64, series: &mut Vec<SeriesRow>| -> f64 {
        let d = diagnostics(sys);
        let r = SeriesRow {
            time: sys.time,
            x_env: x_at(sys.time),
            t_star: t_star.unwrap_or(f64::INFINITY),
            gap,
            margin,
            front_min_x1: front_min_x1(sys),
            w_norm: d.w_norm,
            areas: d.area.clone(),
        };
        observe(&r);
        series.push(r);
        if d.finite {
            d.w_norm
        } else {
            f64::INFINITY
        }
    };

    let cont = containment_check(&sys, cfg, x_at(0.0));
    row(&sys, initial_gap, cont.margin, &mut series);
    // running bookkeeping; outcome, time and detail are filled in on exit
    let mut v = Verdict {
        outcome: Outcome::ReachedTstar,
        time: 0.0,
        steps: 0,
        initial_gap,
        final_gap: initial_gap,
        min_gap: initial_gap,
        collision_threshold: threshold,
        final_margin: cont.margin,
        exit_segment: None,
        exit_time: None,
        t_star,
        t_end,
        driving_c: c,
        delta_g: cfg.delta_g(),
        c_bar: cfg.c_bar,
        envelope_probes_checked: 0,
        envelope_violations: 0,
        mirror_max_error: 0.0,
        warnings,
        detail: String::new(),
    };
    let done = |mut v: Verdict, outcome: Outcome, detail: String, sys: ContourSystem, series: Vec<SeriesRow>| {
        v.outcome = outcome;
        v.time = sys.time;
        v.min_gap = v.min_gap.min(v.final_gap);
        v.detail = detail;
        Ok(ScenarioRun { verdict: v, series, final_state: sys })
    };

    loop {
        if sys.time >= t_end * (1.0 - 1e-12) {
            v.final_gap = sys.gap();
            return done(v, Outcome::ReachedTstar, "reached the end time".into(), sys, series);
        }
        let dt_max = cfg.dt_max.min(t_end - sys.time);
        let next = step_adaptive(&sys, kernel, dt_max, opts).and_then(|(s, _)| {
            // cadence only: the corner-limited residual of Ω₀ sits far above
            // the off-cadence trigger and resampling every step adds noise
            if (v.steps + 1) % cfg.reparam_every == 0 {
                reparametrize_system(&s)
            } else {
                Ok(s)
            }
        });
        match next {
            Ok(s) => sys = s,
            Err(Error::Contact { gap, threshold: th }) => {
                v.final_gap = gap;
                return done(v, Outcome::Collision, format!("node gap {gap:e} below {th:e}"), sys, series);
            }
            Err(e @ (Error::SelfIntersection(_) | Error::Numeric(_) | Error::Convergence { .. })) => {
                v.final_gap = sys.gap();
                return done(v, Outcome::DiagnosticsBlowup, e.to_string(), sys, series);
            }
            Err(e) => return Err(e),
        }
        v.steps += 1;
        let gap = sys.gap();
        v.final_gap = gap;
        v.min_gap = v.min_gap.min(gap);
        let x_env = x_at(sys.time);
        let cont = containment_check(&sys, cfg, x_env);
        v.final_margin = cont.margin;
        if cont.exit_segment.is_some() && v.exit_time.is_none() {
            v.exit_time = Some(sys.time);
            v.exit_segment = cont.exit_segment;
        }
        let collided = gap < threshold;
        if v.steps % cfg.output_every == 0 || collided || cont.exit_segment.is_some() {
            v.mirror_max_error = v.mirror_max_error.max(mirror_error(&sys));
            if env.is_some() {
                let (ch, bad) = envelope_probe_check(&sys, cfg, kernel, x_env, 0.05);
                v.envelope_probes_checked += ch;
                v.envelope_violations += bad;
            }
            let w = row(&sys, gap, cont.margin, &mut series);
            if w > cfg.w_norm_max {
                let msg = format!("w_norm = {w:e} exceeds {:e}", cfg.w_norm_max);
                return done(v, Outcome::DiagnosticsBlowup, msg, sys, series);
            }
        }
        if collided {
            return done(v, Outcome::Collision, format!("gap {gap:e} below {threshold:e}"), sys, series);
        }
        if let Some(side) = cont.exit_segment {
            return done(v, Outcome::ContainmentExit, format!("contour entered the trapezoid across {side:?}"), sys, series);
        }
    }
}
