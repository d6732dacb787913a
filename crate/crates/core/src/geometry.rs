//! Circular planar domains, polyline curves, homology bases and the
//! curve systems used to route interpolation arcs.

use crate::error::{Error, Result};
use crate::scalar::{cx, lit, Cx, Real};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Default number of polyline segments for generated curves.
pub const DEFAULT_SEGMENTS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle<T: Real> {
    pub center: Cx<T>,
    pub radius: T,
}

impl<T: Real> Circle<T> {
    pub fn new(center: Cx<T>, radius: T) -> Self {
        Self { center, radius }
    }

    /// Open disk membership.
    pub fn contains(&self, z: Cx<T>) -> bool {
        (z - self.center).norm() < self.radius
    }

    /// Closed disk, allowing rounding of a few ulps on the circle.
    pub fn contains_closed(&self, z: Cx<T>) -> bool {
        (z - self.center).norm() <= self.radius * (T::one() + T::epsilon() * lit(16.0))
    }

    /// Open disk shrunk by the same allowance as [`Self::contains_closed`].
    pub fn contains_well_inside(&self, z: Cx<T>) -> bool {
        (z - self.center).norm() < self.radius * (T::one() - T::epsilon() * lit(16.0))
    }

    pub fn point_at_angle(&self, theta: T) -> Cx<T> {
        self.center + Complex::from_polar(self.radius, theta)
    }

    /// `n` equally spaced points, counter-clockwise from angle zero.
    pub fn boundary_points(&self, n: usize) -> Vec<Cx<T>> {
        let tau = T::PI() * lit(2.0);
        (0..n)
            .map(|k| self.point_at_angle(tau * lit::<T>(k as f64) / lit::<T>(n as f64)))
            .collect()
    }
}

/// Compact circular region: a closed disk minus finitely many open disks.
#[derive(Clone, Debug, PartialEq)]
pub struct Region<T: Real> {
    pub outer: Circle<T>,
    pub holes: Vec<Circle<T>>,
}

impl<T: Real> Region<T> {
    pub fn disk(center: Cx<T>, radius: T) -> Self {
        Self {
            outer: Circle::new(center, radius),
            holes: Vec::new(),
        }
    }

    pub fn annulus(center: Cx<T>, inner: T, outer: T) -> Self {
        Self {
            outer: Circle::new(center, outer),
            holes: vec![Circle::new(center, inner)],
        }
    }

    pub fn contains(&self, z: Cx<T>) -> bool {
        self.outer.contains_closed(z) && self.holes.iter().all(|h| !h.contains_well_inside(z))
    }

    pub fn contains_interior(&self, z: Cx<T>) -> bool {
        self.outer.contains(z) && self.holes.iter().all(|h| !h.contains_closed(z))
    }

    /// Distance to the nearest boundary circle (negative outside).
    pub fn boundary_distance(&self, z: Cx<T>) -> T {
        let mut d = self.outer.radius - (z - self.outer.center).norm();
        for h in &self.holes {
            d = d.min((z - h.center).norm() - h.radius);
        }
        d
    }

    /// Boundary circles: outer first, then holes.
    pub fn boundary_circles(&self) -> Vec<Circle<T>> {
        let mut v = vec![self.outer];
        v.extend(self.holes.iter().copied());
        v
    }

    pub fn validate(&self) -> Result<()> {
        validate_circles(&self.outer, &self.holes)
    }
}

fn validate_circles<T: Real>(outer: &Circle<T>, holes: &[Circle<T>]) -> Result<()> {
    let fin = |z: Cx<T>| z.re.is_finite() && z.im.is_finite();
    if !(outer.radius > T::zero()) || !fin(outer.center) {
        return Err(Error::GeometryInvalid("outer radius must be positive".into()));
    }
    for (i, h) in holes.iter().enumerate() {
        if !(h.radius > T::zero()) || !fin(h.center) {
            return Err(Error::GeometryInvalid(format!("hole {i} radius must be positive")));
        }
        if (h.center - outer.center).norm() + h.radius >= outer.radius {
            return Err(Error::GeometryInvalid(format!("hole {i} touches the outer boundary")));
        }
        for (j, g) in holes.iter().enumerate().skip(i + 1) {
            if (h.center - g.center).norm() <= h.radius + g.radius {
                return Err(Error::GeometryInvalid(format!("holes {i} and {j} overlap")));
            }
        }
    }
    Ok(())
}

/// Closed annular sector `r0 ≤ |z - c| ≤ r1`, `arg(z - c) ∈ [start, start + sweep]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector<T: Real> {
    pub center: Cx<T>,
    pub r0: T,
    pub r1: T,
    pub start: T,
    pub sweep: T,
}

impl<T: Real> Sector<T> {
    pub fn new(center: Cx<T>, r0: T, r1: T, start: T, sweep: T) -> Result<Self> {
        let tau = T::PI() * lit(2.0);
        if !(r0 > T::zero() && r1 > r0 && sweep > T::zero() && sweep < tau) {
            return Err(Error::GeometryInvalid("sector needs 0 < r0 < r1 and 0 < sweep < 2π".into()));
        }
        Ok(Self {
            center,
            r0,
            r1,
            start,
            sweep,
        })
    }

    fn angle_offset(&self, z: Cx<T>) -> T {
        let tau = T::PI() * lit(2.0);
        let mut a = (z - self.center).arg() - self.start;
        a = a - (a / tau).floor() * tau;
        a
    }

    pub fn contains(&self, z: Cx<T>) -> bool {
        let r = (z - self.center).norm();
        r >= self.r0 && r <= self.r1 && self.angle_offset(z) <= self.sweep
    }

    /// Sector shrunk by `dr` radially and by the angle `dr / r_mid` at both ends.
    pub fn shrunk(&self, dr: T) -> Result<Self> {
        let mid = (self.r0 + self.r1) * lit(0.5);
        let da = dr / mid;
        Self::new(self.center, self.r0 + dr, self.r1 - dr, self.start + da, self.sweep - da * lit(2.0))
    }

    /// Polar grid of `nr x na` points.
    pub fn sample_points(&self, nr: usize, na: usize) -> Vec<Cx<T>> {
        let mut pts = Vec::with_capacity(nr * na);
        for i in 0..nr {
            let r = self.r0 + (self.r1 - self.r0) * lit::<T>((i as f64 + 0.5) / nr as f64);
            for j in 0..na {
                let a = self.start + self.sweep * lit::<T>((j as f64 + 0.5) / na as f64);
                pts.push(self.center + Complex::from_polar(r, a));
            }
        }
        pts
    }
}

/// Serializable description of a circular domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer: CircleSpec,
    #[serde(default)]
    pub holes: Vec<CircleSpec>,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

fn default_grid_resolution() -> usize {
    64
}

impl CircleSpec {
    pub fn to_circle<T: Real>(&self) -> Circle<T> {
        Circle::new(cx(self.center[0], self.center[1]), lit(self.radius))
    }
}

/// Finitely connected circular domain: an open disk minus closed disks.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarDomain<T: Real> {
    pub outer: Circle<T>,
    pub holes: Vec<Circle<T>>,
    pub grid_resolution: usize,
}

/// Validates a domain description.
pub fn build_domain<T: Real>(spec: &DomainSpec) -> Result<PlanarDomain<T>> {
    PlanarDomain::new(
        spec.outer.to_circle(),
        spec.holes.iter().map(|h| h.to_circle()).collect(),
        spec.grid_resolution,
    )
}

impl<T: Real> PlanarDomain<T> {
    pub fn new(outer: Circle<T>, holes: Vec<Circle<T>>, grid_resolution: usize) -> Result<Self> {
        if grid_resolution < 4 {
            return Err(Error::GeometryInvalid("grid resolution must be at least 4".into()));
        }
        validate_circles(&outer, &holes)?;
        Ok(Self {
            outer,
            holes,
            grid_resolution,
        })
    }

    pub fn disk(center: Cx<T>, radius: T) -> Result<Self> {
        Self::new(Circle::new(center, radius), Vec::new(), 64)
    }

    /// Open domain membership.
    pub fn contains(&self, z: Cx<T>) -> bool {
        self.outer.contains(z) && self.holes.iter().all(|h| !h.contains_closed(z))
    }

    /// Closed domain minus open holes, where functions are evaluated.
    pub fn contains_closed(&self, z: Cx<T>) -> bool {
        self.outer.contains_closed(z) && self.holes.iter().all(|h| !h.contains_well_inside(z))
    }

    pub fn boundary_distance(&self, z: Cx<T>) -> T {
        self.closure().boundary_distance(z)
    }

    pub fn closure(&self) -> Region<T> {
        Region {
            outer: self.outer,
            holes: self.holes.clone(),
        }
    }

    pub fn hole_count(&self) -> usize {
        self.holes.len()
    }

    /// Grid of sample points clipped to the closed domain, `n x n` over the
    /// bounding square of the outer circle.
    pub fn grid_points(&self, n: usize) -> Vec<Cx<T>> {
        let mut pts = Vec::new();
        let r = self.outer.radius;
        let c = self.outer.center;
        for i in 0..n {
            for j in 0..n {
                let x = -r + lit::<T>(2.0) * r * lit::<T>(i as f64 + 0.5) / lit::<T>(n as f64);
                let y = -r + lit::<T>(2.0) * r * lit::<T>(j as f64 + 0.5) / lit::<T>(n as f64);
                let z = c + Complex::new(x, y);
                if self.contains_closed(z) {
                    pts.push(z);
                }
            }
        }
        pts
    }

    /// Verification samples: the clipped grid plus `per_circle` points on
    /// each boundary circle.
    pub fn verification_points(&self, n: usize, per_circle: usize) -> Vec<Cx<T>> {
        let mut pts = self.grid_points(n);
        for circ in self.closure().boundary_circles() {
            pts.extend(circ.boundary_points(per_circle));
        }
        pts
    }
}

/// Piecewise-linear oriented curve with chord-length parametrization on [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedCurve<T: Real> {
    vertices: Vec<Cx<T>>,
    closed: bool,
    /// Cumulative chord length at each vertex.
    cumulative: Vec<T>,
}

impl<T: Real> OrientedCurve<T> {
    pub fn new(vertices: Vec<Cx<T>>, closed: bool) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::GeometryInvalid("curve needs at least two vertices".into()));
        }
        if vertices.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::GeometryInvalid("curve vertex not finite".into()));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in vertices.windows(2) {
            let d = (w[1] - w[0]).norm();
            if d == T::zero() {
                return Err(Error::GeometryInvalid("consecutive vertices coincide".into()));
            }
            acc = acc + d;
            cumulative.push(acc);
        }
        if closed && vertices.first() != vertices.last() {
            return Err(Error::GeometryInvalid("closed curve must end at its start".into()));
        }
        Ok(Self {
            vertices,
            closed,
            cumulative,
        })
    }

    /// Straight segment subdivided into `n` pieces.
    pub fn segment(a: Cx<T>, b: Cx<T>, n: usize) -> Result<Self> {
        let n = n.max(1);
        let v = (0..=n)
            .map(|k| a + (b - a) * lit::<T>(k as f64 / n as f64))
            .collect();
        Self::new(v, false)
    }

    /// Positively oriented circle starting at angle `start`.
    pub fn circle(center: Cx<T>, radius: T, n: usize, start: T) -> Result<Self> {
        let tau = T::PI() * lit(2.0);
        let mut v: Vec<Cx<T>> = (0..n)
            .map(|k| center + Complex::from_polar(radius, start + tau * lit::<T>(k as f64 / n as f64)))
            .collect();
        v.push(v[0]);
        Self::new(v, true)
    }

    pub fn vertices(&self) -> &[Cx<T>] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn start(&self) -> Cx<T> {
        self.vertices[0]
    }

    pub fn end(&self) -> Cx<T> {
        *self.vertices.last().unwrap()
    }

    pub fn length(&self) -> T {
        *self.cumulative.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segments(&self) -> impl Iterator<Item = (Cx<T>, Cx<T>)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Parameter of vertex `k`.
    pub fn vertex_param(&self, k: usize) -> T {
        self.cumulative[k] / self.length()
    }

    fn locate(&self, t: T) -> (usize, T) {
        let s = t.max(T::zero()).min(T::one()) * self.length();
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(i) => i.saturating_sub(1).min(self.segment_count() - 1),
        };
        let seg_len = self.cumulative[k + 1] - self.cumulative[k];
        (k, (s - self.cumulative[k]) / seg_len)
    }

    /// Point at parameter `t` in [0, 1].
    pub fn point_at(&self, t: T) -> Cx<T> {
        let (k, u) = self.locate(t);
        self.vertices[k] + (self.vertices[k + 1] - self.vertices[k]) * u
    }

    /// Derivative `dz/dt`.
    pub fn velocity_at(&self, t: T) -> Cx<T> {
        let (k, _) = self.locate(t);
        let d = self.vertices[k + 1] - self.vertices[k];
        d / d.norm() * self.length()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self::new(v, self.closed).expect("reversal keeps a valid curve")
    }

    /// Concatenation; the end of `self` must be the start of `other`.
    pub fn join(&self, other: &Self) -> Result<Self> {
        if (self.end() - other.start()).norm() > T::epsilon() * lit(1e3) * (T::one() + self.end().norm()) {
            return Err(Error::GeometryInvalid("curves do not connect".into()));
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Self::new(v, false)
    }

    /// Splits every segment into `k` equal pieces.
    pub fn refined(&self, k: usize) -> Self {
        let mut v = Vec::with_capacity(self.segment_count() * k + 1);
        for (a, b) in self.segments() {
            for j in 0..k {
                v.push(a + (b - a) * lit::<T>(j as f64 / k as f64));
            }
        }
        v.push(self.end());
        Self::new(v, self.closed).expect("refinement keeps a valid curve")
    }

    /// Minimum distance from `z` to the polyline.
    pub fn distance_to(&self, z: Cx<T>) -> T {
        self.segments()
            .map(|(a, b)| point_segment_distance(z, a, b))
            .fold(T::infinity(), |m, d| m.min(d))
    }
}

pub fn point_segment_distance<T: Real>(z: Cx<T>, a: Cx<T>, b: Cx<T>) -> T {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == T::zero() {
        return (z - a).norm();
    }
    let t = ((z - a) * d.conj()).re / len2;
    let t = t.max(T::zero()).min(T::one());
    (z - (a + d * t)).norm()
}

/// Intersection of closed segments `[a, b]` and `[c, d]`, if any (a single
/// representative point for collinear overlaps).
pub fn segment_intersection<T: Real>(a: Cx<T>, b: Cx<T>, c: Cx<T>, d: Cx<T>) -> Option<Cx<T>> {
    let r = b - a;
    let s = d - c;
    let cross = |u: Cx<T>, v: Cx<T>| u.re * v.im - u.im * v.re;
    let denom = cross(r, s);
    let qp = c - a;
    let scale = r.norm() * s.norm();
    if denom.abs() <= T::epsilon() * lit(16.0) * scale {
        if cross(qp, r).abs() > T::epsilon() * lit(16.0) * r.norm() * (qp.norm() + r.norm()) {
            return None;
        }
        // collinear: check overlap of projections
        let rr = r.norm_sqr();
        let t0 = (qp * r.conj()).re / rr;
        let t1 = ((d - a) * r.conj()).re / rr;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        if hi < T::zero() || lo > T::one() {
            return None;
        }
        let t = lo.max(T::zero());
        return Some(a + r * t);
    }
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    let tol = lit::<T>(1e-12);
    if t >= -tol && t <= T::one() + tol && u >= -tol && u <= T::one() + tol {
        Some(a + r * t)
    } else {
        None
    }
}

/// True when every intersection point of the two polylines lies within `tol`
/// of `base`.
pub fn curves_meet_only_at<T: Real>(
    c1: &OrientedCurve<T>,
    c2: &OrientedCurve<T>,
    base: Cx<T>,
    tol: T,
) -> bool {
    for (a, b) in c1.segments() {
        for (c, d) in c2.segments() {
            if let Some(p) = segment_intersection(a, b, c, d) {
                if (p - base).norm() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Winding number of a closed polyline about `p` by argument summation.
pub fn winding_number<T: Real>(curve: &OrientedCurve<T>, p: Cx<T>) -> i32 {
    let mut total = T::zero();
    for (a, b) in curve.segments() {
        let da = a - p;
        let db = b - p;
        total = total + (db / da).arg();
    }
    let turns = total / (T::PI() * lit(2.0));
    turns.round().to_i32().unwrap_or(0)
}

/// One positively oriented loop per hole.
#[derive(Clone, Debug, PartialEq)]
pub struct HomologyBasis<T: Real> {
    pub loops: Vec<OrientedCurve<T>>,
}

impl<T: Real> HomologyBasis<T> {
    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Matrix of winding numbers, loop by hole.
    pub fn winding_matrix(&self, holes: &[Circle<T>]) -> Vec<Vec<i32>> {
        self.loops
            .iter()
            .map(|l| holes.iter().map(|h| winding_number(l, h.center)).collect())
            .collect()
    }
}

/// Free space around hole `i` before another boundary circle is reached.
fn hole_gap<T: Real>(outer: &Circle<T>, holes: &[Circle<T>], i: usize) -> T {
    let h = holes[i];
    let mut gap = outer.radius - (h.center - outer.center).norm() - h.radius;
    for (j, g) in holes.iter().enumerate() {
        if j != i {
            gap = gap.min((h.center - g.center).norm() - g.radius - h.radius);
        }
    }
    gap
}

/// Radius of the canonical loop around hole `i` of a region, at fraction
/// `frac` of the free gap.
pub fn loop_radius<T: Real>(region: &Region<T>, i: usize, frac: T) -> T {
    region.holes[i].radius + frac * hole_gap(&region.outer, &region.holes, i)
}

pub fn homology_basis<T: Real>(domain: &PlanarDomain<T>) -> HomologyBasis<T> {
    region_homology_basis(&domain.closure(), lit(0.45))
}

/// Loops around every hole of a region at a fraction of the free gap.
pub fn region_homology_basis<T: Real>(region: &Region<T>, frac: T) -> HomologyBasis<T> {
    let loops = (0..region.holes.len())
        .map(|i| {
            let r = loop_radius(region, i, frac);
            OrientedCurve::circle(region.holes[i].center, r, DEFAULT_SEGMENTS, T::zero())
                .expect("loop circle is valid")
        })
        .collect();
    HomologyBasis { loops }
}

/// Connected very simple admissible curve system: a kernel component with
/// base-to-point arcs and homology loops.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleSet<T: Real> {
    pub components: Vec<Region<T>>,
    pub arcs: Vec<OrientedCurve<T>>,
    pub loops: Vec<OrientedCurve<T>>,
    pub kernel_index: usize,
    pub base: Cx<T>,
}

impl<T: Real> AdmissibleSet<T> {
    pub fn kernel(&self) -> &Region<T> {
        &self.components[self.kernel_index]
    }

    /// Arcs first, then loops.
    pub fn curves(&self) -> Vec<OrientedCurve<T>> {
        let mut v = self.arcs.clone();
        v.extend(self.loops.iter().cloned());
        v
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.kernel().outer.radius * lit(1e-9);
        for (i, a) in self.arcs.iter().enumerate() {
            if a.is_closed() {
                return Err(Error::GeometryInvalid(format!("arc {i} is a closed curve")));
            }
            if (a.start() - self.base).norm() > tol || !self.kernel().contains(a.start()) {
                return Err(Error::GeometryInvalid(format!("arc {i} does not start at the kernel base")));
            }
        }
        let curves = self.curves();
        for i in 0..curves.len() {
            for j in (i + 1)..curves.len() {
                if !curves_meet_only_at(&curves[i], &curves[j], self.base, tol) {
                    return Err(Error::GeometryInvalid(format!("curves {i} and {j} meet away from the base")));
                }
            }
        }
        Ok(())
    }
}

struct Obstacle<T: Real> {
    center: Cx<T>,
    radius: T,
}

/// Replaces chords crossing an obstacle disk with arcs along its circle.
fn detour_path<T: Real>(a: Cx<T>, b: Cx<T>, obstacles: &[Obstacle<T>]) -> Vec<Cx<T>> {
    let mut hits: Vec<(T, T, &Obstacle<T>)> = Vec::new();
    let d = b - a;
    let len2 = d.norm_sqr();
    for ob in obstacles {
        // solve |a + t d - c| = r
        let f = a - ob.center;
        let bq = lit::<T>(2.0) * (f * d.conj()).re;
        let cq = f.norm_sqr() - ob.radius * ob.radius;
        let disc = bq * bq - lit::<T>(4.0) * len2 * cq;
        if disc <= T::zero() {
            continue;
        }
        let sq = disc.sqrt();
        let t0 = (-bq - sq) / (lit::<T>(2.0) * len2);
        let t1 = (-bq + sq) / (lit::<T>(2.0) * len2);
        if t1 <= T::zero() || t0 >= T::one() {
            continue;
        }
        hits.push((t0.max(T::zero()), t1.min(T::one()), ob));
    }
    hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut path = vec![a];
    for (t0, t1, ob) in hits {
        let p0 = a + d * t0;
        let p1 = a + d * t1;
        let th0 = (p0 - ob.center).arg();
        let th1 = (p1 - ob.center).arg();
        let tau = T::PI() * lit(2.0);
        let mut ccw = th1 - th0;
        while ccw < T::zero() {
            ccw = ccw + tau;
        }
        while ccw >= tau {
            ccw = ccw - tau;
        }
        let sweep = if ccw <= tau - ccw { ccw } else { ccw - tau };
        let steps = 48;
        push_distinct(&mut path, p0);
        for k in 1..steps {
            let th = th0 + sweep * lit::<T>(k as f64 / steps as f64);
            push_distinct(&mut path, ob.center + Complex::from_polar(ob.radius, th));
        }
        push_distinct(&mut path, p1);
    }
    push_distinct(&mut path, b);
    path
}

fn push_distinct<T: Real>(path: &mut Vec<Cx<T>>, z: Cx<T>) {
    if let Some(last) = path.last() {
        if (*last - z).norm() <= T::epsilon() * lit(64.0) * (T::one() + z.norm()) {
            return;
        }
    }
    path.push(z);
}

/// Resamples a polyline so it has at least `min_segments` segments.
fn densify<T: Real>(pts: Vec<Cx<T>>, min_segments: usize) -> Result<OrientedCurve<T>> {
    let curve = OrientedCurve::new(pts, false)?;
    let k = min_segments.div_ceil(curve.segment_count()).max(1);
    Ok(if k > 1 { curve.refined(k) } else { curve })
}

/// Routes arcs from `base` to every point plus one loop per hole of the
/// kernel component, all meeting only at `base`.
pub fn route_admissible_set<T: Real>(
    domain: &PlanarDomain<T>,
    components: Vec<Region<T>>,
    points: &[Cx<T>],
    base: Cx<T>,
) -> Result<AdmissibleSet<T>> {
    let kernel_index = components
        .iter()
        .position(|k| k.contains_interior(base))
        .ok_or_else(|| Error::RoutingFailed("base point is not interior to any component".into()))?;
    let kernel = components[kernel_index].clone();
    for (i, p) in points.iter().enumerate() {
        if !domain.contains(*p) {
            return Err(Error::RoutingFailed(format!("point {i} is outside the domain")));
        }
        if (*p - base).norm() <= T::epsilon() * lit(1e3) {
            return Err(Error::RoutingFailed(format!("point {i} coincides with the base")));
        }
        for q in &points[..i] {
            if (*p - *q).norm() <= T::epsilon() * lit(1e3) {
                return Err(Error::RoutingFailed("points are not distinct".into()));
            }
        }
    }
    let scale = kernel.outer.radius;
    let tol = scale * lit(1e-9);

    // choose loop radii keeping base and points off the hole-to-loop ring
    let fractions = [0.5, 0.3, 0.7, 0.2, 0.8, 0.1, 0.9];
    let clearance = lit::<T>(0.08);
    let mut loops = Vec::new();
    let mut obstacles = Vec::new();
    for (i, hole) in kernel.holes.iter().enumerate() {
        let gap = hole_gap(&kernel.outer, &kernel.holes, i);
        // the admissible radius farthest from the points, the hole and the gap edge
        let mut chosen: Option<(T, T, T)> = None;
        for f in fractions {
            let r = hole.radius + lit::<T>(f) * gap;
            let r_out = r + clearance * gap;
            if r_out >= hole.radius + gap {
                continue;
            }
            let dists: Vec<T> = std::iter::once(base)
                .chain(points.iter().copied())
                .map(|p| (p - hole.center).norm())
                .collect();
            if dists.iter().any(|d| *d <= r_out) {
                continue;
            }
            let score = dists
                .iter()
                .fold((r - hole.radius).min(hole.radius + gap - r), |m, d| m.min(*d - r));
            if chosen.map_or(true, |c| score > c.2) {
                chosen = Some((r, r_out, score));
            }
        }
        let chosen = chosen.map(|(r, r_out, _)| (r, r_out));
        let (r, r_out) = chosen.ok_or_else(|| {
            Error::RoutingFailed(format!("no loop radius separates hole {i} from the points"))
        })?;
        let start = (base - hole.center).arg();
        loops.push(OrientedCurve::circle(hole.center, r, DEFAULT_SEGMENTS, start)?);
        // arcs detour halfway between the loop and the nearest point outside it
        let nearest = std::iter::once(base)
            .chain(points.iter().copied())
            .map(|p| (p - hole.center).norm())
            .fold(hole.radius + gap, |m, d| m.min(d));
        obstacles.push(Obstacle {
            center: hole.center,
            radius: r_out.max((r + nearest) * lit(0.5)),
        });
    }
    // holes of the domain not in the kernel still have to be avoided
    for h in &domain.holes {
        if !kernel.holes.iter().any(|k| (k.center - h.center).norm() <= tol) {
            obstacles.push(Obstacle {
                center: h.center,
                radius: h.radius * lit(1.05),
            });
        }
    }

    let mut arcs: Vec<OrientedCurve<T>> = Vec::new();
    for (j, &p) in points.iter().enumerate() {
        let others: Vec<Cx<T>> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, q)| *q)
            .collect();
        let dist = (p - base).norm();
        let perp = (p - base) * Complex::new(T::zero(), T::one()) / dist;
        let offsets = [0.0, 0.2, -0.2, 0.4, -0.4, 0.7, -0.7];
        let mut routed = None;
        for off in offsets {
            let pts = if off == 0.0 {
                detour_path(base, p, &obstacles)
            } else {
                let w = base + (p - base) * lit::<T>(0.5) + perp * dist * lit::<T>(off);
                if !domain.contains(w) || obstacles.iter().any(|o| (w - o.center).norm() <= o.radius) {
                    continue;
                }
                let mut first = detour_path(base, w, &obstacles);
                let second = detour_path(w, p, &obstacles);
                first.extend_from_slice(&second[1..]);
                first
            };
            let Ok(arc) = densify(pts, 64) else { continue };
            let inside = arc.vertices().iter().all(|v| domain.contains(*v));
            let clear_points = others.iter().all(|q| arc.distance_to(*q) > tol * lit(1e3));
            let clear_arcs = arcs
                .iter()
                .chain(loops.iter())
                .all(|c| curves_meet_only_at(&arc, c, base, tol));
            if inside && clear_points && clear_arcs {
                routed = Some(arc);
                break;
            }
        }
        arcs.push(routed.ok_or_else(|| Error::RoutingFailed(format!("no disjoint route to point {j}")))?);
    }
    let set = AdmissibleSet {
        components,
        arcs,
        loops,
        kernel_index,
        base,
    };
    set.validate().map_err(|e| Error::RoutingFailed(e.to_string()))?;
    Ok(set)
}

/// True when every component of `domain \ K` reaches the domain boundary,
/// checked by flood fill on a grid of `resolution` cells per side.
pub fn is_runge_at<T: Real>(k: &[Region<T>], domain: &PlanarDomain<T>, resolution: usize) -> bool {
    let n = resolution;
    let r = domain.outer.radius;
    let c = domain.outer.center;
    let cell = |i: usize, j: usize| {
        let x = -r + lit::<T>(2.0) * r * lit::<T>(i as f64 + 0.5) / lit::<T>(n as f64);
        let y = -r + lit::<T>(2.0) * r * lit::<T>(j as f64 + 0.5) / lit::<T>(n as f64);
        c + Complex::new(x, y)
    };
    // 0 = outside domain, 1 = in K, 2 = free
    let mut state = vec![0u8; n * n];
    for i in 0..n {
        for j in 0..n {
            let z = cell(i, j);
            state[i * n + j] = if !domain.contains(z) {
                0
            } else if k.iter().any(|reg| reg.contains(z)) {
                1
            } else {
                2
            };
        }
    }
    let mut seen = vec![false; n * n];
    for start in 0..n * n {
        if state[start] != 2 || seen[start] {
            continue;
        }
        let mut touches = false;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(idx) = queue.pop_front() {
            let (i, j) = (idx / n, idx % n);
            let nbrs = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in nbrs {
                if a >= n || b >= n {
                    touches = true;
                    continue;
                }
                let id = a * n + b;
                match state[id] {
                    0 => touches = true,
                    2 if !seen[id] => {
                        seen[id] = true;
                        queue.push_back(id);
                    }
                    _ => {}
                }
            }
        }
        if !touches {
            return false;
        }
    }
    true
}

/// Runge check at the domain's configured grid resolution.
pub fn is_runge<T: Real>(k: &[Region<T>], domain: &PlanarDomain<T>) -> bool {
    is_runge_at(k, domain, domain.grid_resolution)
}

/// Path from `a` to `b` inside the closed domain: the chord, detouring
/// around every hole it crosses.
pub fn path_in_domain<T: Real>(domain: &PlanarDomain<T>, a: Cx<T>, b: Cx<T>, min_segments: usize) -> Result<OrientedCurve<T>> {
    for z in [a, b] {
        if !domain.contains_closed(z) {
            return Err(Error::OutOfDomain {
                re: z.re.to_f64().unwrap_or(f64::NAN),
                im: z.im.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let half = lit::<T>(0.5);
    let obstacles: Vec<Obstacle<T>> = domain
        .holes
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let near = (a - h.center).norm().min((b - h.center).norm());
            let room = h.radius + half * hole_gap(&domain.outer, &domain.holes, i);
            Obstacle {
                center: h.center,
                radius: room.min(half * (h.radius + near)),
            }
        })
        .collect();
    let curve = densify(detour_path(a, b, &obstacles), min_segments)?;
    if let Some(v) = curve.vertices().iter().find(|v| !domain.contains_closed(**v)) {
        return Err(Error::RoutingFailed(format!(
            "path leaves the domain near ({:.4}, {:.4})",
            v.re.to_f64().unwrap_or(f64::NAN),
            v.im.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_hole() -> PlanarDomain<f64> {
        PlanarDomain::new(
            Circle::new(c(0.0, 0.0), 3.0),
            vec![Circle::new(c(-1.0, 0.0), 0.3), Circle::new(c(1.0, 0.0), 0.3)],
            64,
        )
        .unwrap()
    }

    #[test]
    fn sector_membership() {
        let s = Sector::new(c(0.0, 0.0), 1.0, 2.0, 3.0, 5.0).unwrap();
        assert!(s.contains(Complex::from_polar(1.5, 4.0)));
        assert!(!s.contains(Complex::from_polar(1.5, 2.5)));
        assert!(s.contains(Complex::from_polar(1.5, 7.9)));
        assert!(!s.contains(c(2.5, 0.0)));
        let t = s.shrunk(0.1).unwrap();
        assert!(t.sample_points(4, 16).iter().all(|z| s.contains(*z) && t.contains(*z)));
        assert!(Sector::new(c(0.0, 0.0), 1.0, 2.0, 0.0, 7.0).is_err());
    }

    #[test]
    fn builds_canonical_domains() {
        let spec: DomainSpec = serde_json::from_str(r#"{"outer":{"center":[0,0],"radius":1}}"#).unwrap();
        let d: PlanarDomain<f64> = build_domain(&spec).unwrap();
        assert!(homology_basis(&d).is_empty());
        let spec: DomainSpec = serde_json::from_str(
            r#"{"outer":{"center":[0,0],"radius":2},"holes":[{"center":[0,0],"radius":0.5}]}"#,
        )
        .unwrap();
        let d: PlanarDomain<f64> = build_domain(&spec).unwrap();
        assert_eq!(d.hole_count(), 1);
        let basis = homology_basis(&d);
        assert_eq!(basis.len(), 1);
        // loop sits strictly between the hole and the outer circle
        for v in basis.loops[0].vertices() {
            assert!(v.norm() > 0.5 && v.norm() < 2.0);
        }
    }

    #[test]
    fn rejects_overlapping_and_touching_holes() {
        let bad = PlanarDomain::new(
            Circle::new(c(0.0, 0.0), 3.0),
            vec![Circle::new(c(0.0, 0.0), 0.5), Circle::new(c(0.8, 0.0), 0.4)],
            64,
        );
        assert_eq!(bad.unwrap_err().code(), "GEOMETRY_INVALID");
        let touching = PlanarDomain::new(Circle::new(c(0.0, 0.0), 1.0), vec![Circle::new(c(0.8, 0.0), 0.2)], 64);
        assert!(touching.is_err());
        let neg = PlanarDomain::new(Circle::new(c(0.0, 0.0), 1.0), vec![Circle::new(c(0.0, 0.0), -0.2)], 64);
        assert!(neg.is_err());
    }

    #[test]
    fn two_hole_winding_matrix_is_identity() {
        let d = two_hole();
        let basis = homology_basis(&d);
        assert_eq!(basis.winding_matrix(&d.holes), vec![vec![1, 0], vec![0, 1]]);
        for l in &basis.loops {
            assert!(l.vertices().iter().all(|v| d.contains(*v)));
        }
    }

    #[test]
    fn curve_parametrization_is_chord_length() {
        let s = OrientedCurve::segment(c(0.0, 0.0), c(2.0, 0.0), 4).unwrap();
        assert!((s.point_at(0.25) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((s.velocity_at(0.3) - c(2.0, 0.0)).norm() < 1e-15);
        assert!(OrientedCurve::new(vec![c(0.0, 0.0), c(0.0, 0.0)], false).is_err());
        assert!(OrientedCurve::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0)], true).is_err());
    }

    #[test]
    fn routing_empty_and_annulus() {
        let disk = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        let set = route_admissible_set(&disk, vec![Region::disk(c(0.0, 0.0), 0.9)], &[], c(0.0, 0.0)).unwrap();
        assert!(set.arcs.is_empty() && set.loops.is_empty());

        let ann = PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.0, 0.0), 0.5)], 64).unwrap();
        let kernel = Region::annulus(c(0.0, 0.0), 0.55, 1.9);
        let set = route_admissible_set(&ann, vec![kernel], &[c(-1.5, 0.2)], c(1.5, 0.0)).unwrap();
        assert_eq!(set.arcs.len(), 1);
        assert_eq!(set.loops.len(), 1);
        assert!(curves_meet_only_at(&set.arcs[0], &set.loops[0], c(1.5, 0.0), 1e-9));
        assert_eq!(winding_number(&set.loops[0], c(0.0, 0.0)), 1);
        assert!(set.arcs[0].vertices().iter().all(|v| ann.contains(*v)));
    }

    #[test]
    fn opposite_points_meet_only_at_base() {
        let disk = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        let pts = [c(0.5, 0.0), c(-0.5, 0.0)];
        let set = route_admissible_set(&disk, vec![Region::disk(c(0.0, 0.0), 0.9)], &pts, c(0.0, 0.0)).unwrap();
        assert!(curves_meet_only_at(&set.arcs[0], &set.arcs[1], c(0.0, 0.0), 1e-9));
        // collinear points on the same ray force a bent route
        let pts = [c(0.3, 0.0), c(0.6, 0.0)];
        let set = route_admissible_set(&disk, vec![Region::disk(c(0.0, 0.0), 0.9)], &pts, c(0.0, 0.0)).unwrap();
        assert!(set.arcs[1].distance_to(pts[0]) > 1e-6);
        set.validate().unwrap();
    }

    #[test]
    fn runge_examples() {
        let disk = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        assert!(is_runge(&[Region::disk(c(0.0, 0.0), 0.3)], &disk));
        assert!(!is_runge(&[Region::annulus(c(0.0, 0.0), 0.4, 0.6)], &disk));
        let two = [Region::disk(c(-0.5, 0.0), 0.2), Region::disk(c(0.5, 0.0), 0.2)];
        for res in [64, 128] {
            assert!(is_runge_at(&two, &disk, res));
        }
    }

    #[test]
    fn segment_intersections() {
        assert!(segment_intersection(c(0.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)).is_some());
        assert!(segment_intersection(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)).is_none());
        assert!(segment_intersection(c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(2.0, 0.0)).is_some());
    }

    #[test]
    fn path_around_a_hole() {
        let d = PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.0, 0.0), 0.5)], 64).unwrap();
        let p = path_in_domain(&d, c(-1.0, 0.0), c(1.2, 0.0), 32).unwrap();
        assert!((p.start() - c(-1.0, 0.0)).norm() < 1e-15 && (p.end() - c(1.2, 0.0)).norm() < 1e-15);
        assert!(p.vertices().iter().all(|v| v.norm() > 0.5));
        assert!(p.segment_count() >= 32);
        assert!(path_in_domain(&d, c(0.0, 0.0), c(1.0, 0.0), 8).is_err());
    }
}
