//! Velocity of indicator-valued densities by area quadrature, the odd /
//! half-plane kernel decomposition K₁, K₂, and the bad/good splits.
//!
//! With u(x) = ∫ K(x − y) θ(y) dy and K(z) = z⊥ G(|z|)/|z|², z⊥ = (z₂, −z₁),
//! polar coordinates y = x + r(cos φ, sin φ) turn the area integral over a
//! convex piece into
//!
//!   u(x) = ∫ (−sin φ, cos φ) [P(r_out(φ)) − P(r_in(φ))] dφ,  P(ρ) = ∫₀^ρ G,
//!
//! which is a one-dimensional, piecewise smooth integral in φ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contour::Domain;
use crate::error::{Error, Result};
use crate::kernel::RadialKernel;
use crate::quad;

/// Half-plane {y : n·y ≤ c}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    pub n: [f64; 2],
    pub c: f64,
}

impl Cut {
    fn contains(&self, y: [f64; 2], tol: f64) -> bool {
        self.n[0] * y[0] + self.n[1] * y[1] <= self.c + tol
    }
}

/// Convex piece: a polygon (counterclockwise vertices) or a disk
/// intersected with half-planes.
#[derive(Clone, Debug, PartialEq)]
pub enum Convex {
    Polygon(Vec<[f64; 2]>),
    Disk { center: [f64; 2], radius: f64, cuts: Vec<Cut> },
}

fn reflect(p: [f64; 2], odd_x1: bool) -> [f64; 2] {
    if odd_x1 {
        [-p[0], p[1]]
    } else {
        [p[0], -p[1]]
    }
}

impl Convex {
    /// Mirror across x₁ = 0 (`odd_x1`) or across the wall x₂ = 0.
    pub fn reflected(&self, odd_x1: bool) -> Convex {
        match self {
            Convex::Polygon(v) => {
                let mut w: Vec<[f64; 2]> = v.iter().map(|&p| reflect(p, odd_x1)).collect();
                w.reverse();
                Convex::Polygon(w)
            }
            Convex::Disk { center, radius, cuts } => Convex::Disk {
                center: reflect(*center, odd_x1),
                radius: *radius,
                cuts: cuts.iter().map(|c| Cut { n: reflect(c.n, odd_x1), c: c.c }).collect(),
            },
        }
    }

    /// Intersection with a half-plane; None if empty.
    pub fn clip(&self, cut: Cut) -> Option<Convex> {
        match self {
            Convex::Polygon(v) => {
                let out = clip_polygon(v, cut);
                if out.len() >= 3 && polygon_area(&out) > 0.0 {
                    Some(Convex::Polygon(out))
                } else {
                    None
                }
            }
            Convex::Disk { center, radius, cuts } => {
                let d = cut.n[0] * center[0] + cut.n[1] * center[1] - cut.c;
                if d >= *radius {
                    return None;
                }
                let mut cuts = cuts.clone();
                if d > -*radius {
                    cuts.push(cut);
                }
                Some(Convex::Disk { center: *center, radius: *radius, cuts })
            }
        }
    }

    /// Parameter interval [r_in, r_out] of the ray x + r e, r ≥ 0, inside
    /// the piece.
    #[inline]
    fn ray(&self, x: [f64; 2], e: [f64; 2]) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut apply = |n: [f64; 2], c: f64| {
            let a = n[0] * e[0] + n[1] * e[1];
            let b = c - (n[0] * x[0] + n[1] * x[1]);
            if a.abs() < 1e-300 {
                if b < 0.0 {
                    hi = -1.0;
                }
            } else if a > 0.0 {
                hi = hi.min(b / a);
            } else {
                lo = lo.max(b / a);
            }
        };
        match self {
            Convex::Polygon(v) => {
                let m = v.len();
                for i in 0..m {
                    let (p, q) = (v[i], v[(i + 1) % m]);
                    let n = [q[1] - p[1], p[0] - q[0]];
                    apply(n, n[0] * p[0] + n[1] * p[1]);
                }
            }
            Convex::Disk { center, radius, cuts } => {
                for c in cuts {
                    apply(c.n, c.c);
                }
                let w = [x[0] - center[0], x[1] - center[1]];
                let b = e[0] * w[0] + e[1] * w[1];
                let c = w[0] * w[0] + w[1] * w[1] - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                // stable roots of r² + 2br + c = 0
                let q = -b - b.signum() * s;
                let (r1, r2) = if q != 0.0 { (q, c / q) } else { (-s, s) };
                lo = lo.max(r1.min(r2));
                hi = hi.min(r1.max(r2));
            }
        }
        if hi > lo {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Angles (seen from x) where the ray interval is not smooth.
    fn breakpoints(&self, x: [f64; 2]) -> Vec<f64> {
        let mut out = Vec::new();
        let ang = |p: [f64; 2]| (p[1] - x[1]).atan2(p[0] - x[0]);
        let mut lines: Vec<(Cut, Option<([f64; 2], [f64; 2])>)> = Vec::new();
        match self {
            Convex::Polygon(v) => {
                let m = v.len();
                for i in 0..m {
                    let (p, q) = (v[i], v[(i + 1) % m]);
                    if (p[0] - x[0]).hypot(p[1] - x[1]) > 0.0 {
                        out.push(ang(p));
                    }
                    let n = [q[1] - p[1], p[0] - q[0]];
                    lines.push((Cut { n, c: n[0] * p[0] + n[1] * p[1] }, Some((p, q))));
                }
            }
            Convex::Disk { center, radius, cuts } => {
                let d = (center[0] - x[0]).hypot(center[1] - x[1]);
                if d > *radius {
                    let a = ang(*center);
                    let h = (radius / d).asin();
                    out.push(a - h);
                    out.push(a + h);
                }
                for (i, c) in cuts.iter().enumerate() {
                    lines.push((*c, None));
                    for p in line_circle(*c, *center, *radius) {
                        out.push(ang(p));
                    }
                    for c2 in &cuts[i + 1..] {
                        if let Some(p) = line_line(*c, *c2) {
                            out.push(ang(p));
                        }
                    }
                }
            }
        }
        // directions along any boundary line passing through x
        for (c, _) in lines {
            let nn = c.n[0].hypot(c.n[1]);
            let off = (c.n[0] * x[0] + c.n[1] * x[1] - c.c) / nn;
            if off.abs() < 1e-12 * (1.0 + x[0].abs() + x[1].abs()) {
                let t = c.n[0].atan2(-c.n[1]);
                out.push(t);
                out.push(t + PI);
            }
        }
        out
    }

    fn contains(&self, y: [f64; 2], tol: f64) -> bool {
        match self {
            Convex::Polygon(v) => {
                let m = v.len();
                (0..m).all(|i| {
                    let (p, q) = (v[i], v[(i + 1) % m]);
                    orient(p, q, y) >= -tol
                })
            }
            Convex::Disk { center, radius, cuts } => {
                (y[0] - center[0]).hypot(y[1] - center[1]) <= radius + tol && cuts.iter().all(|c| c.contains(y, tol))
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Convex::Polygon(v) => polygon_area(v),
            Convex::Disk { .. } => {
                let k = self.approx_polygon(4096);
                polygon_area(&k)
            }
        }
    }

    fn approx_polygon(&self, n: usize) -> Vec<[f64; 2]> {
        match self {
            Convex::Polygon(v) => v.clone(),
            Convex::Disk { center, radius, cuts } => {
                let mut v: Vec<[f64; 2]> = (0..n)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect();
                for c in cuts {
                    v = clip_polygon(&v, *c);
                }
                v
            }
        }
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let m = v.len();
    0.5 * (0..m).map(|i| v[i][0] * v[(i + 1) % m][1] - v[(i + 1) % m][0] * v[i][1]).sum::<f64>()
}

fn clip_polygon(v: &[[f64; 2]], cut: Cut) -> Vec<[f64; 2]> {
    let f = |p: [f64; 2]| cut.n[0] * p[0] + cut.n[1] * p[1] - cut.c;
    let m = v.len();
    let mut out = Vec::new();
    for i in 0..m {
        let (p, q) = (v[i], v[(i + 1) % m]);
        let (fp, fq) = (f(p), f(q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn line_circle(c: Cut, center: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    let nn = c.n[0].hypot(c.n[1]);
    let n = [c.n[0] / nn, c.n[1] / nn];
    let d = (c.c / nn) - (n[0] * center[0] + n[1] * center[1]);
    if d.abs() >= r {
        return vec![];
    }
    let foot = [center[0] + d * n[0], center[1] + d * n[1]];
    let h = (r * r - d * d).sqrt();
    let t = [-n[1], n[0]];
    vec![[foot[0] + h * t[0], foot[1] + h * t[1]], [foot[0] - h * t[0], foot[1] - h * t[1]]]
}

fn line_line(a: Cut, b: Cut) -> Option<[f64; 2]> {
    let det = a.n[0] * b.n[1] - a.n[1] * b.n[0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([(a.c * b.n[1] - b.c * a.n[1]) / det, (a.n[0] * b.c - b.n[0] * a.c) / det])
}

/// Moments ∫ (cos φ, sin φ) [Q(r_out) − Q(r_in)] dφ of a radial primitive Q
/// over a convex piece seen from `x`, with an error estimate.
pub fn polar_moment(x: [f64; 2], piece: &Convex, prim: &dyn Fn(f64) -> f64, tol: f64) -> Result<([f64; 2], f64)> {
    let mut bps = piece.breakpoints(x);
    for b in bps.iter_mut() {
        *b = b.rem_euclid(2.0 * PI);
    }
    bps.push(0.0);
    bps.push(2.0 * PI);
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let f = |phi: f64| {
        let e = [phi.cos(), phi.sin()];
        match piece.ray(x, e) {
            Some((lo, hi)) => {
                let q = prim(hi) - if lo > 0.0 { prim(lo) } else { 0.0 };
                [e[0] * q, e[1] * q]
            }
            None => [0.0, 0.0],
        }
    };
    let share = tol / (bps.len() - 1) as f64;
    let mut acc = [0.0, 0.0];
    let mut err = 0.0;
    for w in bps.windows(2) {
        if w[1] - w[0] < 1e-15 {
            continue;
        }
        let e = quad::adaptive_vec(f, w[0], w[1], share, 20_000)?;
        acc[0] += e.value[0];
        acc[1] += e.value[1];
        err += e.error;
    }
    Ok((acc, err))
}

// ------------------------------------------------------------ region sets

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Piece {
    Rectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        #[serde(default = "unit")]
        weight: f64,
    },
    Triangle {
        vertices: [[f64; 2]; 3],
        #[serde(default = "unit")]
        weight: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default = "unit")]
        weight: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "unit")]
        weight: f64,
    },
}

/// Piecewise-constant density: a weighted union of disjoint convex pieces,
/// optionally extended oddly in x₁.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSet {
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub odd_in_x1: bool,
}

impl RegionSet {
    pub fn new(pieces: Vec<Piece>, odd_in_x1: bool) -> Result<Self> {
        let r = RegionSet { pieces, odd_in_x1 };
        r.validate()?;
        Ok(r)
    }

    /// Weighted convex pieces in the given domain (before odd / image
    /// extension).
    pub fn convex_pieces(&self) -> Result<Vec<(Convex, f64)>> {
        self.pieces.iter().map(to_convex).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cs = self.convex_pieces()?;
        for i in 0..cs.len() {
            for j in i + 1..cs.len() {
                let a = cs[i].0.approx_polygon(256);
                let mut b = cs[j].0.approx_polygon(256);
                let m = a.len();
                for k in 0..m {
                    let (p, q) = (a[k], a[(k + 1) % m]);
                    let n = [q[1] - p[1], p[0] - q[0]];
                    b = clip_polygon(&b, Cut { n, c: n[0] * p[0] + n[1] * p[1] });
                    if b.len() < 3 {
                        break;
                    }
                }
                let scale = cs[i].0.area().abs().min(cs[j].0.area().abs());
                if b.len() >= 3 && polygon_area(&b) > 1e-9 * scale {
                    return Err(Error::Param(format!("region pieces {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Every signed piece contributing to the velocity: the pieces, their
    /// odd mirrors, and in the half-plane the wall images of both.
    pub fn expanded(&self, domain: Domain) -> Result<Vec<(Convex, f64)>> {
        let mut out = self.convex_pieces()?;
        if self.odd_in_x1 {
            let m: Vec<_> = out.iter().map(|(c, w)| (c.reflected(true), -w)).collect();
            out.extend(m);
        }
        if domain == Domain::HalfPlane {
            let im: Vec<_> = out.iter().map(|(c, w)| (c.reflected(false), -w)).collect();
            out.extend(im);
        }
        Ok(out)
    }

    /// Restriction of the (primary) pieces to a half-plane.
    pub fn clipped(&self, cut: Cut) -> Result<ClippedSet> {
        let pieces = self.convex_pieces()?.into_iter().filter_map(|(c, w)| c.clip(cut).map(|c| (c, w))).collect();
        Ok(ClippedSet { pieces, odd_in_x1: self.odd_in_x1 })
    }

    pub fn contains(&self, y: [f64; 2]) -> bool {
        self.convex_pieces().map(|v| v.iter().any(|(c, _)| c.contains(y, 0.0))).unwrap_or(false)
    }
}

/// A region set already reduced to convex pieces.
#[derive(Clone, Debug)]
pub struct ClippedSet {
    pub pieces: Vec<(Convex, f64)>,
    pub odd_in_x1: bool,
}

impl ClippedSet {
    fn expanded(&self, domain: Domain) -> Vec<(Convex, f64)> {
        let mut out = self.pieces.clone();
        if self.odd_in_x1 {
            let m: Vec<_> = out.iter().map(|(c, w)| (c.reflected(true), -w)).collect();
            out.extend(m);
        }
        if domain == Domain::HalfPlane {
            let im: Vec<_> = out.iter().map(|(c, w)| (c.reflected(false), -w)).collect();
            out.extend(im);
        }
        out
    }
}

fn to_convex(p: &Piece) -> Result<(Convex, f64)> {
    let poly = |mut v: Vec<[f64; 2]>, w: f64| -> Result<(Convex, f64)> {
        if v.len() < 3 {
            return Err(Error::Param("polygon needs at least 3 vertices".into()));
        }
        if polygon_area(&v) < 0.0 {
            v.reverse();
        }
        if polygon_area(&v) <= 0.0 {
            return Err(Error::Param("degenerate polygon".into()));
        }
        let m = v.len();
        for i in 0..m {
            if orient(v[i], v[(i + 1) % m], v[(i + 2) % m]) < 0.0 {
                return Err(Error::Param("polygon pieces must be convex".into()));
            }
        }
        Ok((Convex::Polygon(v), w))
    };
    match p {
        Piece::Rectangle { x0, x1, y0, y1, weight } => {
            if !(x1 > x0 && y1 > y0) {
                return Err(Error::Param(format!("empty rectangle [{x0},{x1}]x[{y0},{y1}]")));
            }
            poly(vec![[*x0, *y0], [*x1, *y0], [*x1, *y1], [*x0, *y1]], *weight)
        }
        Piece::Triangle { vertices, weight } => poly(vertices.to_vec(), *weight),
        Piece::Polygon { vertices, weight } => poly(vertices.clone(), *weight),
        Piece::Disk { center, radius, weight } => {
            if !(*radius > 0.0) {
                return Err(Error::Param(format!("disk radius {radius} must be positive")));
            }
            Ok((Convex::Disk { center: *center, radius: *radius, cuts: vec![] }, *weight))
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VelocityEstimate {
    pub u: [f64; 2],
    pub err: f64,
}

fn velocity_of<K: RadialKernel + ?Sized>(x: [f64; 2], pieces: &[(Convex, f64)], kernel: &K, tol: f64) -> Result<VelocityEstimate> {
    let prim = |r: f64| kernel.p(r);
    let mut u = [0.0, 0.0];
    let mut err = 0.0;
    let share = tol / pieces.len().max(1) as f64;
    for (c, w) in pieces {
        let ([mc, ms], e) = polar_moment(x, c, &prim, share)?;
        u[0] -= w * ms;
        u[1] += w * mc;
        err += w.abs() * e;
    }
    if !u[0].is_finite() || !u[1].is_finite() {
        return Err(Error::Numeric(format!("non-finite velocity at {x:?}")));
    }
    Ok(VelocityEstimate { u, err })
}

/// u(x) = ∫ K(x − y) θ(y) dy, with image subtraction in the half-plane.
/// `tol` is an absolute tolerance on each component.
pub fn velocity_area<K: RadialKernel + ?Sized>(
    x: [f64; 2],
    theta: &RegionSet,
    kernel: &K,
    domain: Domain,
    tol: f64,
) -> Result<VelocityEstimate> {
    let pieces = theta.expanded(domain)?;
    velocity_of(x, &pieces, kernel, tol)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitVelocities {
    pub u: [f64; 2],
    pub u1_bad: f64,
    pub u1_good: f64,
    pub u2_bad: f64,
    pub u2_good: f64,
    pub err: f64,
}

/// u₁ split at y₂ = x₂ and u₂ split at y₁ = x₁ (bad part first).
pub fn split_velocities<K: RadialKernel + ?Sized>(
    x: [f64; 2],
    theta: &RegionSet,
    kernel: &K,
    domain: Domain,
    tol: f64,
) -> Result<SplitVelocities> {
    let part = |cut: Cut| -> Result<VelocityEstimate> {
        let set = theta.clipped(cut)?;
        velocity_of(x, &set.expanded(domain), kernel, tol)
    };
    let below = part(Cut { n: [0.0, 1.0], c: x[1] })?;
    let above = part(Cut { n: [0.0, -1.0], c: -x[1] })?;
    let left = part(Cut { n: [1.0, 0.0], c: x[0] })?;
    let right = part(Cut { n: [-1.0, 0.0], c: -x[0] })?;
    let full = velocity_area(x, theta, kernel, domain, tol)?;
    Ok(SplitVelocities {
        u: full.u,
        u1_bad: below.u[0],
        u1_good: above.u[0],
        u2_bad: left.u[1],
        u2_good: right.u[1],
        err: full.err + below.err + above.err + left.err + right.err,
    })
}

// --------------------------------------------------------- kernel split

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelSplit {
    pub k1: f64,
    pub k2: f64,
    pub k11: f64,
    pub k12: f64,
    pub k13: f64,
    pub k14: f64,
    pub k21: f64,
    pub k22: f64,
    pub k23: f64,
    pub k24: f64,
}

/// The eight terms of K₁ and K₂ at (x, y) for an odd-in-x₁ density on the
/// half-plane, with ỹ = (−y₁, y₂), ȳ = (y₁, −y₂).
pub fn kernel_split<K: RadialKernel + ?Sized>(x: [f64; 2], y: [f64; 2], kernel: &K) -> Result<KernelSplit> {
    let term = |num: f64, a: f64, b: f64| {
        let r2 = a * a + b * b;
        num / r2 * kernel.g(r2.sqrt())
    };
    let d = [x[0] - y[0], x[1] - y[1]];
    let dt = [x[0] + y[0], x[1] - y[1]];
    let ds = [x[0] + y[0], x[1] + y[1]];
    let db = [x[0] - y[0], x[1] + y[1]];
    for v in [d, dt, ds, db] {
        if v[0] == 0.0 && v[1] == 0.0 {
            return Err(Error::Domain(format!("singular kernel evaluation at x = {x:?}, y = {y:?}")));
        }
    }
    let k11 = term(y[1] - x[1], d[0], d[1]);
    let k12 = term(y[1] - x[1], dt[0], dt[1]);
    let k13 = term(y[1] + x[1], ds[0], ds[1]);
    let k14 = term(y[1] + x[1], db[0], db[1]);
    let k21 = term(y[0] - x[0], d[0], d[1]);
    let k22 = term(y[0] + x[0], dt[0], dt[1]);
    let k23 = term(y[0] + x[0], ds[0], ds[1]);
    let k24 = term(y[0] - x[0], db[0], db[1]);
    Ok(KernelSplit {
        k1: k11 - k12 - k13 + k14,
        k2: k21 + k22 - k23 - k24,
        k11,
        k12,
        k13,
        k14,
        k21,
        k22,
        k23,
        k24,
    })
}

impl KernelSplit {
    /// Sign properties (i)–(iv); `tol` absorbs rounding in comparisons.
    pub fn predicates(&self, x: [f64; 2], y: [f64; 2], tol: f64) -> [bool; 4] {
        let s1 = (y[1] - x[1]).signum();
        let s2 = (y[0] - x[0]).signum();
        let t1 = tol * (self.k11.abs() + self.k12.abs() + self.k13.abs() + self.k14.abs());
        let t2 = tol * (self.k21.abs() + self.k22.abs() + self.k23.abs() + self.k24.abs());
        [
            self.k1 >= self.k11 - self.k12 - t1,
            s1 * (self.k11 - self.k12) >= -t1,
            self.k2 >= self.k21 - self.k24 - t2,
            s2 * (self.k21 - self.k24) >= -t2,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ClosedForm;

    fn disk(r: f64) -> RegionSet {
        RegionSet::new(vec![Piece::Disk { center: [0.0, 0.0], radius: r, weight: 1.0 }], false).unwrap()
    }

    #[test]
    fn rankine_vortex() {
        let th = disk(1.0);
        for (x, speed) in [([0.3, 0.4], 0.25), ([1.0, 0.0], 0.5), ([0.0, 2.0], 0.25)] {
            let v = velocity_area(x, &th, &ClosedForm::Euler, Domain::WholePlane, 1e-12).unwrap();
            let r = x[0].hypot(x[1]);
            // clockwise: u = speed·(x₂, −x₁)/r
            assert!((v.u[0] - speed * x[1] / r).abs() < 1e-10, "{:?}", v.u);
            assert!((v.u[1] + speed * x[0] / r).abs() < 1e-10, "{:?}", v.u);
        }
    }

    #[test]
    fn wall_condition_and_homogeneity() {
        let th = RegionSet::new(
            vec![
                Piece::Rectangle { x0: 0.1, x1: 0.4, y0: 0.0, y1: 0.3, weight: 1.0 },
                Piece::Triangle { vertices: [[0.5, 0.1], [0.9, 0.1], [0.6, 0.5]], weight: 1.0 },
            ],
            true,
        )
        .unwrap();
        let k = ClosedForm::AlphaSqg { alpha: 0.25 };
        let v = velocity_area([0.7, 0.0], &th, &k, Domain::HalfPlane, 1e-12).unwrap();
        assert!(v.u[1].abs() < 1e-10 * v.u[0].abs().max(1.0));
        let mut double = th.clone();
        for p in &mut double.pieces {
            if let Piece::Rectangle { weight, .. } | Piece::Triangle { weight, .. } = p {
                *weight = 2.0;
            }
        }
        let w = velocity_area([0.2, 0.2], &double, &k, Domain::HalfPlane, 1e-12).unwrap();
        let v = velocity_area([0.2, 0.2], &th, &k, Domain::HalfPlane, 1e-12).unwrap();
        assert!((w.u[0] - 2.0 * v.u[0]).abs() < 1e-9);
    }

    #[test]
    fn split_sums_and_k1_representation() {
        let th = RegionSet::new(vec![Piece::Rectangle { x0: 0.0, x1: 0.5, y0: 0.0, y1: 0.5, weight: 1.0 }], true).unwrap();
        let k = ClosedForm::AlphaSqg { alpha: 0.25 };
        let x = [0.1, 0.05];
        let s = split_velocities(x, &th, &k, Domain::HalfPlane, 1e-12).unwrap();
        assert!((s.u1_bad + s.u1_good - s.u[0]).abs() < 1e-9);
        assert!((s.u2_bad + s.u2_good - s.u[1]).abs() < 1e-9);
        // u₁ = −∫ K₁ over the square by brute-force midpoint sums
        let n = 400;
        let h = 0.5 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                acc -= kernel_split(x, y, &k).unwrap().k1 * h * h;
            }
        }
        assert!((acc - s.u[0]).abs() < 2e-2 * s.u[0].abs(), "{acc} vs {}", s.u[0]);
    }

    #[test]
    fn kernel_split_identities() {
        let k = ClosedForm::Euler;
        let s = kernel_split([0.1, 0.2], [0.3, 0.05], &k).unwrap();
        assert!((s.k1 - (s.k11 - s.k12 - s.k13 + s.k14)).abs() < 1e-15);
        assert!(s.predicates([0.1, 0.2], [0.3, 0.05], 0.0).iter().all(|&b| b));
        assert!(kernel_split([0.1, 0.2], [0.1, 0.2], &k).is_err());
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let r = RegionSet::new(
            vec![
                Piece::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, weight: 1.0 },
                Piece::Disk { center: [1.0, 1.0], radius: 0.5, weight: 1.0 },
            ],
            false,
        );
        assert!(r.is_err());
    }
}
