//! Contour dynamics for patch boundaries on the whole plane and on the
//! upper half-plane (rigid wall at x₂ = 0 via image terms).
//!
//! Each boundary z_k(ζ) is sampled at ζ_i = −π + 2πi/M, counterclockwise.
//! Velocity of node ζ of patch k:
//!
//!   NL_k(ζ) = Σ_j a_j ∫ (∂z_k(ζ) − ∂z_j(ζ−η)) R(|z_k(ζ) − z_j(ζ−η)|) dη
//!           + Σ_j a_j ∫ (∂z_k(ζ) − ∂z̄_j(ζ−η)) R(|z_k(ζ) − z̄_j(ζ−η)|) dη   (half-plane)
//!
//! plus the tangential term λ_k ∂z_k that keeps |∂z_k|² independent of ζ.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::RadialKernel;
use crate::quad;
use crate::spectral::{self, Interpolant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    WholePlane,
    HalfPlane,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchContour {
    pub nodes: Vec<[f64; 2]>,
    pub strength: f64,
}

impl PatchContour {
    pub fn new(nodes: Vec<[f64; 2]>, strength: f64) -> Self {
        PatchContour { nodes, strength }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reflection across x₁ = 0 with reversed node order so the result is
    /// again counterclockwise; node i maps from node (M − i) mod M.
    pub fn mirrored(&self) -> PatchContour {
        let m = self.nodes.len();
        let nodes = (0..m)
            .map(|i| {
                let p = self.nodes[(m - i) % m];
                [-p[0], p[1]]
            })
            .collect();
        PatchContour { nodes, strength: -self.strength }
    }

    pub fn min_spacing(&self) -> f64 {
        let m = self.nodes.len();
        (0..m).map(|i| dist(self.nodes[i], self.nodes[(i + 1) % m])).fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        let z = spectral::to_complex(&self.nodes);
        let d = spectral::derivative(&z);
        let m = z.len();
        let s: f64 = z.iter().zip(&d).map(|(p, q)| p.re * q.im - p.im * q.re).sum();
        0.5 * s * 2.0 * PI / m as f64
    }

    /// max_i ||∂z(ζ_i)|² − A| / A with A the mean of |∂z|².
    pub fn param_residual(&self) -> f64 {
        let z = spectral::to_complex(&self.nodes);
        let d = spectral::derivative(&z);
        let a: Vec<f64> = d.iter().map(|c| c.norm_sqr()).collect();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean
    }
}

#[derive(Clone, Debug)]
pub struct ContourSystem {
    pub patches: Vec<PatchContour>,
    pub domain: Domain,
    /// When set, the second half of `patches` is the mirror image of the
    /// first half and is never evolved independently.
    pub mirror_symmetry: bool,
    pub time: f64,
}

impl ContourSystem {
    pub fn new(patches: Vec<PatchContour>, domain: Domain) -> Result<Self> {
        let s = ContourSystem { patches, domain, mirror_symmetry: false, time: 0.0 };
        s.validate()?;
        Ok(s)
    }

    /// Builds an odd-in-x₁ twin system from the given primary patches.
    pub fn with_mirror(primary: Vec<PatchContour>, domain: Domain) -> Result<Self> {
        let mut patches = primary.clone();
        patches.extend(primary.iter().map(|p| p.mirrored()));
        let s = ContourSystem { patches, domain, mirror_symmetry: true, time: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn n_primary(&self) -> usize {
        if self.mirror_symmetry {
            self.patches.len() / 2
        } else {
            self.patches.len()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.patches.is_empty() {
            return Err(Error::Param("system has no patches".into()));
        }
        if self.mirror_symmetry && self.patches.len() % 2 != 0 {
            return Err(Error::Param("mirror symmetry needs an even number of patches".into()));
        }
        for (k, p) in self.patches.iter().enumerate() {
            if p.len() < 8 {
                return Err(Error::Param(format!("patch {k} has only {} nodes", p.len())));
            }
            if p.nodes.iter().any(|q| !q[0].is_finite() || !q[1].is_finite()) {
                return Err(Error::Numeric(format!("non-finite node in patch {k}")));
            }
            if self.domain == Domain::HalfPlane && p.nodes.iter().any(|q| q[1] < -1e-12) {
                return Err(Error::Domain(format!("patch {k} crosses the wall x2 = 0")));
            }
        }
        Ok(())
    }

    fn rebuild_mirrors(&mut self) {
        if self.mirror_symmetry {
            let n = self.n_primary();
            for k in 0..n {
                self.patches[n + k] = self.patches[k].mirrored();
            }
        }
    }

    pub fn min_spacing(&self) -> f64 {
        self.patches.iter().map(|p| p.min_spacing()).fold(f64::INFINITY, f64::min)
    }

    /// Smallest node-to-node distance between distinct patches.
    pub fn node_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for i in 0..self.patches.len() {
            for j in i + 1..self.patches.len() {
                for a in &self.patches[i].nodes {
                    for b in &self.patches[j].nodes {
                        g = g.min(dist(*a, *b));
                    }
                }
            }
        }
        g
    }

    /// δ[z] refined by segment-to-segment distances.
    pub fn gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for i in 0..self.patches.len() {
            for j in i + 1..self.patches.len() {
                g = g.min(polyline_distance(&self.patches[i].nodes, &self.patches[j].nodes));
            }
        }
        g
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let m = poly.len();
    let mut inside = false;
    for i in 0..m {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

pub fn segment_distance(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment(a, c, d).min(point_segment(b, c, d)).min(point_segment(c, a, b)).min(point_segment(d, a, b))
}

/// Distance between two closed polygons.
pub fn polyline_distance(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    let (m, n) = (p.len(), q.len());
    // coarse node pass to prune segment pairs
    let mut best = f64::INFINITY;
    for a in p {
        for b in q {
            best = best.min(dist(*a, *b));
        }
    }
    let reach = best + 2.0 * max_edge(p).max(max_edge(q));
    for i in 0..m {
        let (a, b) = (p[i], p[(i + 1) % m]);
        for j in 0..n {
            let (c, d) = (q[j], q[(j + 1) % n]);
            if dist(a, c) > reach {
                continue;
            }
            best = best.min(segment_distance(a, b, c, d));
        }
    }
    best
}

fn max_edge(p: &[[f64; 2]]) -> f64 {
    let m = p.len();
    (0..m).map(|i| dist(p[i], p[(i + 1) % m])).fold(0.0, f64::max)
}

/// True when no two non-adjacent edges of the closed polygon cross.
pub fn is_simple(p: &[[f64; 2]]) -> bool {
    let m = p.len();
    for i in 0..m {
        let (a, b) = (p[i], p[(i + 1) % m]);
        let (xa0, xa1) = (a[0].min(b[0]), a[0].max(b[0]));
        let (ya0, ya1) = (a[1].min(b[1]), a[1].max(b[1]));
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = (p[j], p[(j + 1) % m]);
            if c[0].max(d[0]) < xa0 || c[0].min(d[0]) > xa1 || c[1].max(d[1]) < ya0 || c[1].min(d[1]) > ya1 {
                continue;
            }
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------- shapes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        a: f64,
        b: f64,
    },
    /// Rectangle [x0, x1] × [y0, y1] whose corners are replaced by C^∞
    /// turns that start `corner` away from each vertex.
    RoundedRectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        corner: f64,
    },
}

pub fn init_shape(shape: &ShapeSpec, m: usize, strength: f64) -> Result<PatchContour> {
    if m < 32 || m % 2 != 0 {
        return Err(Error::Param(format!("M = {m}: need an even node count >= 32")));
    }
    let nodes = match *shape {
        ShapeSpec::Circle { center, radius } => {
            if !(radius > 0.0) {
                return Err(Error::Param(format!("circle radius {radius} must be positive")));
            }
            (0..m)
                .map(|i| {
                    let t = spectral::zeta(i, m);
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect()
        }
        ShapeSpec::Ellipse { center, a, b } => {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Param(format!("ellipse semi-axes {a}, {b} must be positive")));
            }
            let seed: Vec<[f64; 2]> = (0..m)
                .map(|i| {
                    let t = spectral::zeta(i, m);
                    [center[0] + a * t.cos(), center[1] + b * t.sin()]
                })
                .collect();
            let p = reparametrize(&PatchContour::new(seed, strength))?;
            p.nodes
        }
        ShapeSpec::RoundedRectangle { x0, x1, y0, y1, corner } => rounded_rectangle(x0, x1, y0, y1, corner, m)?,
    };
    Ok(PatchContour { nodes, strength })
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// ∫₀¹ cos(π S(t)/2) dt, the corner extent per unit turn length.
fn turn_extent() -> f64 {
    static I: OnceLock<f64> = OnceLock::new();
    *I.get_or_init(|| quad::adaptive(|t| (0.5 * PI * smooth_step(t)).cos(), 0.0, 1.0, 1e-15, 2000).unwrap().0)
}

// Displacement after arclength u along a left quarter turn of length l
// starting with heading 0.
fn turn_offset(u: f64, l: f64) -> [f64; 2] {
    if u <= 0.0 {
        return [0.0, 0.0];
    }
    let f = |s: f64| {
        let psi = 0.5 * PI * smooth_step(s / l);
        [psi.cos(), psi.sin()]
    };
    let e = quad::adaptive_vec(f, 0.0, u, 1e-15 * l, 4000).expect("turn quadrature");
    e.value
}

fn rounded_rectangle(x0: f64, x1: f64, y0: f64, y1: f64, d: f64, m: usize) -> Result<Vec<[f64; 2]>> {
    let (w, h) = (x1 - x0, y1 - y0);
    if !(d > 0.0) {
        return Err(Error::Param(format!("corner size {d} must be positive")));
    }
    if !(w > 2.0 * d && h > 2.0 * d) {
        return Err(Error::Param(format!("rectangle {w} x {h} too small for corner {d}")));
    }
    let l = d / turn_extent();
    // (length, heading, is_turn)
    let pieces = [
        (0.5 * w - d, 0.0, false),
        (l, 0.0, true),
        (h - 2.0 * d, 0.5 * PI, false),
        (l, 0.5 * PI, true),
        (w - 2.0 * d, PI, false),
        (l, PI, true),
        (h - 2.0 * d, 1.5 * PI, false),
        (l, 1.5 * PI, true),
        (0.5 * w - d, 0.0, false),
    ];
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    let mut out = Vec::with_capacity(m);
    let mut start = [0.5 * (x0 + x1), y0];
    let mut acc = 0.0;
    let mut k = 0;
    for i in 0..m {
        let s = total * i as f64 / m as f64;
        while k < pieces.len() - 1 && s >= acc + pieces[k].0 {
            let (len, head, turn) = pieces[k];
            let off = if turn { [d, d] } else { [len, 0.0] };
            start = advance(start, off, head);
            acc += len;
            k += 1;
        }
        let (len, head, turn) = pieces[k];
        let u = s - acc;
        let off = if turn { turn_offset(u.min(len), len) } else { [u, 0.0] };
        let mut p = advance(start, off, head);
        if (p[1] - y0).abs() < 1e-15 * (1.0 + y0.abs()) {
            p[1] = y0;
        }
        out.push(p);
    }
    Ok(out)
}

fn advance(p: [f64; 2], off: [f64; 2], head: f64) -> [f64; 2] {
    let (s, c) = head.sin_cos();
    // snap axis-aligned headings to avoid roundoff drift off the wall
    let (s, c) = (snap(s), snap(c));
    [p[0] + c * off[0] - s * off[1], p[1] + s * off[0] + c * off[1]]
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-12 {
        v.signum()
    } else {
        v
    }
}

// ------------------------------------------------------- reparametrization

/// Parametrization residual above which a run reparametrizes off-cadence.
pub const REPARAM_RESIDUAL: f64 = 1e-4;

/// Redistributes the nodes uniformly in arclength along the trigonometric
/// interpolant; node 0 stays fixed.
pub fn reparametrize(patch: &PatchContour) -> Result<PatchContour> {
    let m = patch.len();
    let mut nodes = patch.nodes.clone();
    for _ in 0..3 {
        let z = spectral::to_complex(&nodes);
        let ip = Interpolant::new(&z);
        let d = spectral::derivative(&z);
        let speed: Vec<f64> = d.iter().map(|c| c.norm()).collect();
        let (mean, anti) = spectral::antiderivative_real(&speed);
        let anti_c: Vec<Complex64> = anti.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let aip = Interpolant::new(&anti_c);
        let a0 = anti[0];
        let arc = |zeta: f64| mean * (zeta + PI) + aip.eval(zeta).0.re - a0;
        let total = 2.0 * PI * mean;
        let mut new = Vec::with_capacity(m);
        for i in 0..m {
            let target = total * i as f64 / m as f64;
            let mut zeta = spectral::zeta(i, m);
            // s(ζ_j) at nodes gives a bracket; Newton from the uniform guess
            for _ in 0..30 {
                let f = arc(zeta) - target;
                let sp = ip.eval(zeta).1.norm();
                if !(sp > 0.0) {
                    return Err(Error::Numeric("zero speed while reparametrizing".into()));
                }
                let step = f / sp;
                zeta -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let p = ip.eval(zeta).0;
            new.push([p.re, p.im]);
        }
        nodes = new;
        let res = PatchContour::new(nodes.clone(), patch.strength).param_residual();
        if res < 1e-12 {
            break;
        }
    }
    if !is_simple(&nodes) {
        return Err(Error::SelfIntersection(0));
    }
    Ok(PatchContour { nodes, strength: patch.strength })
}

/// Reparametrizes every evolved patch; in the half-plane nodes are kept on
/// or above the wall.
pub fn reparametrize_system(sys: &ContourSystem) -> Result<ContourSystem> {
    let mut out = sys.clone();
    for k in 0..sys.n_primary() {
        let old = &sys.patches[k].nodes;
        let m = old.len();
        // x-ranges of the wall segments: consecutive pairs of wall nodes
        let runs: Vec<(f64, f64)> = (0..m)
            .filter(|&i| old[i][1] <= 0.0 && old[(i + 1) % m][1] <= 0.0)
            .map(|i| (old[i][0].min(old[(i + 1) % m][0]), old[i][0].max(old[(i + 1) % m][0])))
            .collect();
        let mut p = reparametrize(&sys.patches[k]).map_err(|e| match e {
            Error::SelfIntersection(_) => Error::SelfIntersection(k),
            e => e,
        })?;
        if sys.domain == Domain::HalfPlane {
            let h = p.min_spacing();
            for q in p.nodes.iter_mut() {
                let flat = q[1] < 0.1 * h && runs.iter().any(|&(a, b)| q[0] >= a && q[0] <= b);
                if q[1] < 0.0 || flat {
                    q[1] = 0.0;
                }
            }
        }
        out.patches[k] = p;
    }
    out.rebuild_mirrors();
    Ok(out)
}

// -------------------------------------------------------------- dynamics

/// Upsampling factor for source curves passing close to a target node.
pub const NEAR_UPSAMPLE: usize = 4;

struct Curve {
    z: Vec<[f64; 2]>,
    dz: Vec<[f64; 2]>,
    weight: f64,
    fine: Option<(Vec<[f64; 2]>, Vec<[f64; 2]>, f64)>,
    spacing: f64,
}

impl Curve {
    fn new(z: Vec<[f64; 2]>, weight_scale: f64, conj: bool) -> Self {
        let m = z.len();
        let zc = spectral::to_complex(&z);
        let dz = spectral::to_points(&spectral::derivative(&zc));
        let spacing = (2.0 * PI / m as f64) * (dz.iter().map(|d| d[0] * d[0] + d[1] * d[1]).sum::<f64>() / m as f64).sqrt();
        let flip = |v: Vec<[f64; 2]>| if conj { v.into_iter().map(|p| [p[0], -p[1]]).collect() } else { v };
        Curve { z: flip(z), dz: flip(dz), weight: weight_scale * 2.0 * PI / m as f64, fine: None, spacing }
    }

    fn fine(&mut self) -> &(Vec<[f64; 2]>, Vec<[f64; 2]>, f64) {
        if self.fine.is_none() {
            let zc = spectral::to_complex(&self.z);
            let up = spectral::upsample(&zc, NEAR_UPSAMPLE);
            let dup = spectral::to_points(&spectral::derivative(&up));
            self.fine = Some((spectral::to_points(&up), dup, self.weight / NEAR_UPSAMPLE as f64));
        }
        self.fine.as_ref().unwrap()
    }
}

// Σ_l w (t − dz_l) R(|x − z_l|), skipping samples coincident with x.
#[inline]
fn trapezoid_sum<K: RadialKernel + ?Sized>(
    kernel: &K,
    x: [f64; 2],
    t: [f64; 2],
    z: &[[f64; 2]],
    dz: &[[f64; 2]],
    w: f64,
    skip: Option<usize>,
    tiny2: f64,
) -> ([f64; 2], f64) {
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut dmin2 = f64::INFINITY;
    for (l, (p, d)) in z.iter().zip(dz).enumerate() {
        if Some(l) == skip {
            continue;
        }
        let (a, b) = (x[0] - p[0], x[1] - p[1]);
        let d2 = a * a + b * b;
        if d2 < dmin2 {
            dmin2 = d2;
        }
        if d2 <= tiny2 {
            continue;
        }
        let r = kernel.r_sq(d2);
        s0 += (t[0] - d[0]) * r;
        s1 += (t[1] - d[1]) * r;
    }
    ([s0 * w, s1 * w], dmin2)
}

/// Node velocities NL_k + λ_k ∂z_k for every patch.
pub fn compute_rhs<K: RadialKernel + ?Sized>(sys: &ContourSystem, kernel: &K) -> Result<Vec<Vec<[f64; 2]>>> {
    let np = sys.n_primary();
    let spacing = sys.min_spacing();
    if sys.patches.len() > 1 {
        let g = sys.node_gap();
        if g < 2.0 * spacing {
            return Err(Error::Contact { gap: g, threshold: 2.0 * spacing });
        }
    }
    let half = sys.domain == Domain::HalfPlane;
    let mut curves: Vec<Curve> = Vec::new();
    // (patch index, conjugate)
    let mut tags: Vec<(usize, bool)> = Vec::new();
    for (j, p) in sys.patches.iter().enumerate() {
        curves.push(Curve::new(p.nodes.clone(), p.strength, false));
        tags.push((j, false));
        if half {
            curves.push(Curve::new(p.nodes.clone(), p.strength, true));
            tags.push((j, true));
        }
    }
    // upsampled copies are built up front so the parallel loop only reads
    for c in curves.iter_mut() {
        c.fine();
    }
    let curves = curves;
    let mut out = Vec::with_capacity(sys.patches.len());
    for k in 0..np {
        let ci = tags.iter().position(|&t| t == (k, false)).unwrap();
        let target = &curves[ci];
        let m = target.z.len();
        let tiny2 = (1e-13 * target.spacing).powi(2);
        let nl: Vec<[f64; 2]> = (0..m)
            .into_par_iter()
            .map(|i| {
                let x = target.z[i];
                let t = target.dz[i];
                let mut v = [0.0, 0.0];
                for (c, &(j, conj)) in curves.iter().zip(&tags) {
                    let own = j == k && !conj;
                    let skip = if own { Some(i) } else { None };
                    let (s, dmin2) = trapezoid_sum(kernel, x, t, &c.z, &c.dz, c.weight, skip, tiny2);
                    // the own image near the wall mirrors the punctured own sum,
                    // so their errors cancel only at the same resolution
                    let own_image = j == k && conj && 2.0 * x[1] < target.spacing;
                    let s = if !own && !own_image && dmin2 < (2.0 * c.spacing).powi(2) {
                        let (fz, fdz, fw) = c.fine.as_ref().unwrap();
                        trapezoid_sum(kernel, x, t, fz, fdz, *fw, None, tiny2).0
                    } else {
                        s
                    };
                    v[0] += s[0];
                    v[1] += s[1];
                }
                v
            })
            .collect();
        if nl.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Numeric(format!("non-finite velocity in patch {k}")));
        }
        let mut vel = add_tangential(&target.z, &target.dz, &nl);
        if half {
            // wall nodes stay on the wall (u₂ = 0 there and the true tangent
            // is horizontal), except the end of a wall run whose node is
            // carried by the gauge towards the curved side of the contact
            let z = &target.z;
            let wall = |i: usize| z[i % m][1] <= 0.0;
            for (i, v) in vel.iter_mut().enumerate() {
                if !wall(i) || v[1] <= 0.0 {
                    if wall(i) {
                        v[1] = 0.0;
                    }
                    continue;
                }
                let leaving = [i + m - 1, i + 1].iter().any(|&j| {
                    let q = z[j % m];
                    !wall(j) && v[0] * (q[0] - z[i][0]) + v[1] * (q[1] - z[i][1]) > 0.0
                });
                if !leaving {
                    v[1] = 0.0;
                }
            }
        }
        out.push(vel);
    }
    if sys.mirror_symmetry {
        for k in 0..np {
            let v = &out[k];
            let m = v.len();
            let mirrored: Vec<[f64; 2]> = (0..m)
                .map(|i| {
                    let q = v[(m - i) % m];
                    [-q[0], q[1]]
                })
                .collect();
            out.push(mirrored);
        }
    }
    Ok(out)
}

// NL + λ ∂z with λ(ζ) = S(−π) − S(ζ), S the zero-mean antiderivative of
// ∂z·∂NL / A.
fn add_tangential(z: &[[f64; 2]], dz: &[[f64; 2]], nl: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let m = z.len();
    let a = dz.iter().map(|d| d[0] * d[0] + d[1] * d[1]).sum::<f64>() / m as f64;
    let dnl = spectral::derivative(&spectral::to_complex(nl));
    let s: Vec<f64> = (0..m).map(|i| (dz[i][0] * dnl[i].re + dz[i][1] * dnl[i].im) / a).collect();
    let (_, anti) = spectral::antiderivative_real(&s);
    (0..m)
        .map(|i| {
            let lam = anti[0] - anti[i];
            [nl[i][0] + lam * dz[i][0], nl[i][1] + lam * dz[i][1]]
        })
        .collect()
}

/// Velocity at a point off the contours: u(x) = −Σ_j a_j ∫ R(|x − z_j|) ∂z_j dη,
/// minus the same with z̄_j in the half-plane.
pub fn velocity_contour<K: RadialKernel + ?Sized>(x: [f64; 2], sys: &ContourSystem, kernel: &K) -> Result<[f64; 2]> {
    let mut u = [0.0, 0.0];
    for p in &sys.patches {
        let c = Curve::new(p.nodes.clone(), p.strength, false);
        let dmin = p.nodes.iter().map(|q| dist(*q, x)).fold(f64::INFINITY, f64::min);
        if dmin <= 2.0 * c.spacing {
            return Err(Error::Proximity(x));
        }
        let mut curves = vec![c];
        if sys.domain == Domain::HalfPlane {
            curves.push(Curve::new(p.nodes.clone(), p.strength, true));
        }
        for c in &curves {
            let (s, _) = trapezoid_sum(kernel, x, [0.0, 0.0], &c.z, &c.dz, c.weight, None, 0.0);
            // trapezoid_sum returns Σ w (0 − dz) R
            u[0] += s[0];
            u[1] += s[1];
        }
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepOptions {
    pub cfl_factor: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { cfl_factor: 0.5 }
    }
}

fn axpy(sys: &ContourSystem, base: &ContourSystem, k: &[Vec<[f64; 2]>], h: f64) -> ContourSystem {
    let mut out = sys.clone();
    let half = sys.domain == Domain::HalfPlane;
    for p in 0..sys.n_primary() {
        for (i, q) in out.patches[p].nodes.iter_mut().enumerate() {
            let b = base.patches[p].nodes[i];
            q[0] = b[0] + h * k[p][i][0];
            q[1] = b[1] + h * k[p][i][1];
            if half && q[1] < 0.0 {
                q[1] = 0.0;
            }
        }
    }
    out.rebuild_mirrors();
    out
}

/// Largest speed over all nodes.
pub fn max_speed(v: &[Vec<[f64; 2]>]) -> f64 {
    v.iter().flatten().map(|q| q[0].hypot(q[1])).fold(0.0, f64::max)
}

/// Classical four-stage Runge-Kutta step.
pub fn step<K: RadialKernel + ?Sized>(sys: &ContourSystem, kernel: &K, dt: f64, opts: StepOptions) -> Result<ContourSystem> {
    let k1 = compute_rhs(sys, kernel)?;
    let limit = cfl_limit(sys, &k1, opts);
    if dt.abs() > limit {
        return Err(Error::Cfl { dt, limit });
    }
    rk4_from(sys, kernel, k1, dt)
}

/// RK4 step with dt = min(dt_max, CFL limit); returns the new state and
/// the step taken.
pub fn step_adaptive<K: RadialKernel + ?Sized>(
    sys: &ContourSystem,
    kernel: &K,
    dt_max: f64,
    opts: StepOptions,
) -> Result<(ContourSystem, f64)> {
    let k1 = compute_rhs(sys, kernel)?;
    let dt = dt_max.min(cfl_limit(sys, &k1, opts));
    Ok((rk4_from(sys, kernel, k1, dt)?, dt))
}

fn cfl_limit(sys: &ContourSystem, k1: &[Vec<[f64; 2]>], opts: StepOptions) -> f64 {
    opts.cfl_factor * sys.min_spacing() / max_speed(k1).max(1e-300)
}

fn rk4_from<K: RadialKernel + ?Sized>(sys: &ContourSystem, kernel: &K, k1: Vec<Vec<[f64; 2]>>, dt: f64) -> Result<ContourSystem> {
    let s2 = axpy(sys, sys, &k1, 0.5 * dt);
    let k2 = compute_rhs(&s2, kernel)?;
    let s3 = axpy(sys, sys, &k2, 0.5 * dt);
    let k3 = compute_rhs(&s3, kernel)?;
    let s4 = axpy(sys, sys, &k3, dt);
    let k4 = compute_rhs(&s4, kernel)?;
    let mut comb = k1.clone();
    for p in 0..comb.len() {
        for i in 0..comb[p].len() {
            for c in 0..2 {
                comb[p][i][c] = (k1[p][i][c] + 2.0 * k2[p][i][c] + 2.0 * k3[p][i][c] + k4[p][i][c]) / 6.0;
            }
        }
    }
    let mut out = axpy(sys, sys, &comb, dt);
    if out.domain == Domain::HalfPlane {
        for p in 0..out.n_primary() {
            capture_wall_nodes(&mut out.patches[p].nodes, &comb[p]);
        }
        out.rebuild_mirrors();
    }
    out.time = sys.time + dt;
    Ok(out)
}

/// Height below which a node arriving next to a wall node joins the wall,
/// as a fraction of the mean node spacing.
pub const WALL_CAPTURE: f64 = 0.05;

// Nodes carried by the gauge towards a wall run settle onto the wall instead
// of hovering just above it on the interpolant's ripple.
fn capture_wall_nodes(z: &mut [[f64; 2]], v: &[[f64; 2]]) {
    let m = z.len();
    let h = (0..m).map(|i| dist(z[i], z[(i + 1) % m])).sum::<f64>() / m as f64;
    loop {
        let mut changed = false;
        for i in 0..m {
            if z[i][1] <= 0.0 || z[i][1] >= WALL_CAPTURE * h {
                continue;
            }
            let arriving = [(i + m - 1) % m, (i + 1) % m]
                .iter()
                .any(|&j| z[j][1] <= 0.0 && v[i][0] * (z[j][0] - z[i][0]) + v[i][1] * (z[j][1] - z[i][1]) > 0.0);
            if arriving {
                z[i][1] = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

// ------------------------------------------------------------ diagnostics

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub h2_norm: f64,
    pub arc_chord_sup: Vec<f64>,
    pub delta: f64,
    pub gap_inv: f64,
    pub w_norm: f64,
    pub area: Vec<f64>,
    pub param_residual: f64,
    pub min_spacing: f64,
    pub finite: bool,
}

/// max over node pairs of |ζ_i − ζ_j|_𝕋 / |z_i − z_j|, with 1/|∂z| on the
/// diagonal.
pub fn arc_chord_sup(p: &PatchContour) -> f64 {
    let m = p.len();
    let z = spectral::to_complex(&p.nodes);
    let d = spectral::derivative(&z);
    let mut best = d.iter().map(|c| 1.0 / c.norm()).fold(0.0, f64::max);
    let h = 2.0 * PI / m as f64;
    for i in 0..m {
        for j in i + 1..m {
            let k = (j - i).min(m - (j - i));
            let r = k as f64 * h / dist(p.nodes[i], p.nodes[j]);
            if r > best || r.is_nan() {
                best = if r.is_nan() { f64::INFINITY } else { r };
            }
        }
    }
    best
}

/// ‖z‖²_{H²} = 2π Σ_k (1 + k²)² |ĉ_k|².
pub fn h2_norm_sq(p: &PatchContour) -> f64 {
    let z = spectral::to_complex(&p.nodes);
    let c = spectral::coefficients(&z);
    let m = c.len();
    2.0 * PI
        * c.iter()
            .enumerate()
            .map(|(j, v)| {
                let k = spectral::wavenumber(j, m);
                (1.0 + k * k).powi(2) * v.norm_sqr()
            })
            .sum::<f64>()
}

pub fn diagnostics(sys: &ContourSystem) -> Diagnostics {
    let h2sq: f64 = sys.patches.iter().map(h2_norm_sq).sum();
    let arc: Vec<f64> = sys.patches.iter().map(arc_chord_sup).collect();
    let delta = if sys.patches.len() > 1 { sys.gap() } else { f64::INFINITY };
    let gap_inv = 1.0 / delta;
    let w_norm = h2sq + arc.iter().sum::<f64>() + gap_inv;
    let area: Vec<f64> = sys.patches.iter().map(|p| p.area()).collect();
    let param_residual = sys.patches.iter().map(|p| p.param_residual()).fold(0.0, f64::max);
    let finite = w_norm.is_finite() && area.iter().all(|a| a.is_finite());
    Diagnostics {
        h2_norm: h2sq.sqrt(),
        arc_chord_sup: arc,
        delta,
        gap_inv,
        w_norm,
        area,
        param_residual,
        min_spacing: sys.min_spacing(),
        finite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ClosedForm;

    fn circle(m: usize, c: [f64; 2], r: f64) -> PatchContour {
        init_shape(&ShapeSpec::Circle { center: c, radius: r }, m, 1.0).unwrap()
    }

    #[test]
    fn circle_area_and_arc_chord() {
        let p = circle(256, [0.0, 0.0], 1.0);
        assert!((p.area() - PI).abs() < 1e-8);
        assert!((arc_chord_sup(&p) - PI / 2.0).abs() < 1e-12);
        assert!(p.param_residual() < 1e-10);
    }

    #[test]
    fn ellipse_is_uniform_in_arclength() {
        let p = init_shape(&ShapeSpec::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0 }, 256, 1.0).unwrap();
        assert!((p.area() - 2.0 * PI).abs() < 1e-6);
        assert!(p.param_residual() < 1e-8, "{}", p.param_residual());
        let m = p.len();
        let ch: Vec<f64> = (0..m).map(|i| dist(p.nodes[i], p.nodes[(i + 1) % m])).collect();
        let mean = ch.iter().sum::<f64>() / m as f64;
        // equal arclength; chords differ only by the curvature term κ²Δs²/24
        let ds = mean;
        assert!(ch.iter().all(|c| (c / mean - 1.0).abs() < 4.0 * ds * ds / 24.0 * 1.1));
    }

    #[test]
    fn rounded_rectangle_geometry() {
        let p = init_shape(
            &ShapeSpec::RoundedRectangle { x0: 0.1, x1: 0.9, y0: 0.0, y1: 0.6, corner: 0.05 },
            256,
            1.0,
        )
        .unwrap();
        assert_eq!(p.nodes[0], [0.5, 0.0]);
        assert!(p.nodes.iter().all(|q| q[1] >= 0.0 && q[0] >= 0.1 - 1e-12 && q[0] <= 0.9 + 1e-12 && q[1] <= 0.6 + 1e-12));
        let ch: Vec<f64> = (0..256).map(|i| dist(p.nodes[i], p.nodes[(i + 1) % 256])).collect();
        let (lo, hi) = ch.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo - 1.0 < 2e-2, "{}", hi / lo - 1.0);
        assert!(p.param_residual() < 1e-3, "{}", p.param_residual());
        let a = p.area();
        assert!(a < 0.48 && a > 0.47, "{a}");
        assert!(is_simple(&p.nodes));
    }

    #[test]
    fn twin_gap_and_mirror() {
        let a = circle(64, [0.5, 1.0], 0.25);
        let sys = ContourSystem::with_mirror(vec![a], Domain::WholePlane).unwrap();
        assert!((sys.gap() - 0.5).abs() < 1e-12);
        let rhs = compute_rhs(&sys, &ClosedForm::Euler).unwrap();
        let m = 64;
        for i in 0..m {
            let (v, w) = (rhs[0][(m - i) % m], rhs[1][i]);
            assert_eq!(v[0], -w[0]);
            assert_eq!(v[1], w[1]);
        }
    }

    #[test]
    fn rankine_boundary_velocity() {
        let p = circle(128, [0.0, 0.0], 1.0);
        let sys = ContourSystem::new(vec![p.clone()], Domain::WholePlane).unwrap();
        let v = compute_rhs(&sys, &ClosedForm::Euler).unwrap();
        let t0 = p.nodes[0][1] * v[0][0][0] - p.nodes[0][0] * v[0][0][1];
        for (q, u) in p.nodes.iter().zip(&v[0]) {
            // no normal motion; the tangential part is a uniform rotation
            assert!((q[0] * u[0] + q[1] * u[1]).abs() < 1e-12);
            let tang = q[1] * u[0] - q[0] * u[1];
            assert!((tang - t0).abs() < 1e-12);
        }
    }

    #[test]
    fn reparametrize_restores_uniform_spacing() {
        let m = 128;
        let nodes: Vec<[f64; 2]> = (0..m)
            .map(|i| {
                let t = spectral::zeta(i, m);
                let s = t + 0.3 * t.sin();
                [s.cos(), s.sin()]
            })
            .collect();
        let p = PatchContour::new(nodes, 1.0);
        assert!(p.param_residual() > 0.1);
        let q = reparametrize(&p).unwrap();
        assert!(q.param_residual() < 1e-8);
        assert!((q.area() - p.area()).abs() < 1e-8);
        let same = reparametrize(&circle(m, [0.0, 0.0], 1.0)).unwrap();
        for (a, b) in same.nodes.iter().zip(&circle(m, [0.0, 0.0], 1.0).nodes) {
            assert!(dist(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn rk4_round_trip() {
        let p = init_shape(&ShapeSpec::Ellipse { center: [0.0, 0.0], a: 1.5, b: 1.0 }, 64, 1.0).unwrap();
        let sys = ContourSystem::new(vec![p], Domain::WholePlane).unwrap();
        let k = ClosedForm::AlphaSqg { alpha: 0.25 };
        let f = step(&sys, &k, 1e-2, StepOptions::default()).unwrap();
        let b = step(&f, &k, -1e-2, StepOptions::default()).unwrap();
        for (x, y) in sys.patches[0].nodes.iter().zip(&b.patches[0].nodes) {
            assert!(dist(*x, *y) < 1e-10);
        }
    }
}
