//! Labyrinths, metric boosting and intrinsic-distance estimates for the
//! exhaustion driver.

use crate::error::{Error, Result, StageExt};
use crate::geometry::{route_admissible_set, Circle, PlanarDomain, Region, Sector};
use crate::holofun::HoloFunction;
use crate::spray::{fix_harmonic_step, Patch, PairOnS, PeriodTargets, StepOptions, StepReport};
use crate::weierstrass::{verification_points, PairData};
use num_complex::Complex64 as C64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

type Holo = HoloFunction<f64>;
type Pair = PairData<f64>;

/// Worst ratio of a 16-neighbour lattice path to the straight segment.
const STENCIL_STRETCH: f64 = 1.027_5;
const STENCIL: [(i32, i32); 16] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (1, 2),
    (2, 1),
    (-1, 2),
    (-2, 1),
    (1, -2),
    (2, -1),
    (-1, -2),
    (-2, -1),
];

pub const DEFAULT_LATTICE: usize = 96;

/// Density `λ` sampled on a square lattice over a region; lengths are
/// `∫ λ |dz|`.
#[derive(Clone, Debug)]
pub struct ConformalMetric {
    pub region: Region<f64>,
    pub resolution: usize,
    spacing: f64,
    origin: C64,
    /// `None` for lattice points outside the region.
    density: Vec<Option<f64>>,
    density_fn_mid: Vec<f64>,
}

impl ConformalMetric {
    /// Lattice with `resolution` cells across the outer diameter.
    pub fn from_fn<F: Fn(C64) -> f64>(region: &Region<f64>, resolution: usize, lambda: F) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::Config("lattice resolution must be at least 4".into()));
        }
        let r = region.outer.radius;
        let spacing = 2.0 * r / resolution as f64;
        let origin = region.outer.center - C64::new(r, r);
        let n = resolution + 1;
        let mut density = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                let z = origin + C64::new(i as f64 * spacing, j as f64 * spacing);
                if region.contains(z) {
                    density[i * n + j] = Some(lambda(z));
                }
            }
        }
        // midpoints of the unit-step edges feed the lower estimator
        let points: Vec<C64> = (0..n * n)
            .map(|k| origin + C64::new((k / n) as f64 * spacing, (k % n) as f64 * spacing))
            .collect();
        let density_fn_mid = points
            .iter()
            .map(|z| {
                let zc = z + C64::new(0.5 * spacing, 0.5 * spacing);
                if region.contains(zc) {
                    lambda(zc)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Ok(Self {
            region: region.clone(),
            resolution,
            spacing,
            origin,
            density,
            density_fn_mid,
        })
    }

    /// `λ = |f1|² + |f2|² + |H|`.
    pub fn from_pair(pair: &Pair, region: &Region<f64>, resolution: usize) -> Result<Self> {
        Self::from_fn(region, resolution, |z| pair_density(pair, z))
    }

    /// Density `|H|`.
    pub fn from_h(h: &Holo, region: &Region<f64>, resolution: usize) -> Result<Self> {
        Self::from_fn(region, resolution, |z| h.eval(z).norm())
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn side(&self) -> usize {
        self.resolution + 1
    }

    fn point(&self, k: usize) -> C64 {
        let n = self.side();
        self.origin + C64::new((k / n) as f64 * self.spacing, (k % n) as f64 * self.spacing)
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().flatten().fold(f64::INFINITY, |m, d| m.min(*d))
    }
}

pub fn pair_density(pair: &Pair, z: C64) -> f64 {
    let (a, b) = pair.components(z);
    a.norm_sqr() + b.norm_sqr() + pair.h_value(z).norm()
}

/// Upper and lower estimates of the intrinsic distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceEstimate {
    pub upper: f64,
    pub lower: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Which boundary circles of the metric's region count as targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    AnyBoundary,
    Outer,
}

fn edge_clear(region: &Region<f64>, blocked: &dyn Fn(C64) -> bool, a: C64, b: C64) -> bool {
    (1..4).all(|k| {
        let z = a + (b - a) * (k as f64 / 4.0);
        region.contains(z) && !blocked(z)
    })
}

/// Dijkstra on the lattice. Upper: mean endpoint density times length.
/// Lower: min endpoint density, divided by the stencil stretch. Points where `blocked` holds are removed.
pub fn intrinsic_distance_avoiding(
    metric: &ConformalMetric,
    sources: &[C64],
    target: Target,
    blocked: &dyn Fn(C64) -> bool,
) -> Result<DistanceEstimate> {
    let n = metric.side();
    let h = metric.spacing;
    let region = &metric.region;
    let circles: Vec<Circle<f64>> = match target {
        Target::AnyBoundary => region.boundary_circles(),
        Target::Outer => vec![region.outer],
    };
    let to_target = |z: C64| {
        circles.iter().fold(f64::INFINITY, |m, c| {
            let d = (z - c.center).norm();
            m.min(if *c == region.outer { c.radius - d } else { d - c.radius })
        })
    };
    let usable = |k: usize| metric.density[k].is_some() && !blocked(metric.point(k));
    let cell_min = |k: usize| {
        let (i, j) = (k / n, k % n);
        let mut m = f64::INFINITY;
        for (di, dj) in [(0, 0), (-1, 0), (0, -1), (-1, -1)] {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                m = m.min(metric.density_fn_mid[a as usize * n + b as usize]);
            }
        }
        m
    };
    let solve = |lower: bool| -> Option<f64> {
        let weight = |a: usize, b: usize, len: f64| {
            let (da, db) = (metric.density[a].unwrap(), metric.density[b].unwrap());
            if lower {
                da.min(db) * len / STENCIL_STRETCH
            } else {
                0.5 * (da + db) * len
            }
        };
        let mut dist = vec![f64::INFINITY; n * n];
        let mut heap = BinaryHeap::new();
        for s in sources {
            let rel = (s - metric.origin) / h;
            let (ci, cj) = (rel.re.round() as i64, rel.im.round() as i64);
            let ds = metric.density_at_source(s);
            for di in -2..=2 {
                for dj in -2..=2 {
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i as usize >= n || j as usize >= n {
                        continue;
                    }
                    let k = i as usize * n + j as usize;
                    if !usable(k) || !edge_clear(region, blocked, *s, metric.point(k)) {
                        continue;
                    }
                    let d = metric.density[k].unwrap();
                    let len = (metric.point(k) - s).norm();
                    let w = if lower {
                        d.min(ds).min(cell_min(k)) * len / STENCIL_STRETCH
                    } else {
                        0.5 * (d + ds) * len
                    };
                    if w < dist[k] {
                        dist[k] = w;
                        heap.push(Entry(w, k));
                    }
                }
            }
        }
        let mut best = f64::INFINITY;
        while let Some(Entry(d, k)) = heap.pop() {
            if d > dist[k] || d >= best {
                continue;
            }
            let z = metric.point(k);
            let rem = to_target(z);
            if rem <= 2.0 * h {
                let dk = metric.density[k].unwrap();
                let tail = if lower { dk.min(cell_min(k)) * rem.max(0.0) / STENCIL_STRETCH } else { dk * rem.max(0.0) };
                best = best.min(d + tail);
            }
            let (i, j) = ((k / n) as i64, (k % n) as i64);
            for (di, dj) in STENCIL {
                let (a, b) = (i + di as i64, j + dj as i64);
                if a < 0 || b < 0 || a as usize >= n || b as usize >= n {
                    continue;
                }
                let m = a as usize * n + b as usize;
                if !usable(m) {
                    continue;
                }
                let len = h * ((di * di + dj * dj) as f64).sqrt();
                let nd = d + weight(k, m, len);
                if nd < dist[m] && edge_clear(region, blocked, z, metric.point(m)) {
                    dist[m] = nd;
                    heap.push(Entry(nd, m));
                }
            }
        }
        best.is_finite().then_some(best)
    };
    match (solve(false), solve(true)) {
        (Some(upper), Some(lower)) => Ok(DistanceEstimate { upper, lower }),
        _ => Err(Error::Disconnected),
    }
}

impl ConformalMetric {
    fn density_at_source(&self, s: &C64) -> f64 {
        // nearest lattice density
        let n = self.side();
        let rel = (s - self.origin) / self.spacing;
        let (i, j) = (rel.re.round().max(0.0) as usize, rel.im.round().max(0.0) as usize);
        let k = i.min(n - 1) * n + j.min(n - 1);
        self.density[k].unwrap_or_else(|| self.min_density())
    }
}

/// Distance from `sources` to the boundary of the metric's region.
pub fn intrinsic_distance(metric: &ConformalMetric, sources: &[C64], target: Target) -> Result<DistanceEstimate> {
    intrinsic_distance_avoiding(metric, sources, target, &|_| false)
}

/// Annulus `inner < |z - c| < outer` hosting a labyrinth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub center: C64,
    pub inner: f64,
    pub outer: f64,
}

impl Band {
    pub fn region(&self) -> Region<f64> {
        Region::annulus(self.center, self.inner, self.outer)
    }
}

/// Outer sector `D_i` with the inner sector `D_i'` that paths must avoid.
#[derive(Clone, Debug, PartialEq)]
pub struct LabyrinthCell {
    pub outer: Sector<f64>,
    pub inner: Sector<f64>,
}

/// Rings of C-shaped sectors with doors alternating between opposite sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Labyrinth {
    pub cells: Vec<LabyrinthCell>,
    pub host: Band,
    pub tau: f64,
    /// Lower estimate of `∫|H||dz|` over crossings avoiding every `D_i'`.
    pub blocking_bound: f64,
}

impl Labyrinth {
    pub fn rings(&self) -> usize {
        self.cells.len()
    }

    pub fn blocks(&self, z: C64) -> bool {
        self.cells.iter().any(|c| c.inner.contains(z))
    }
}

#[derive(Clone, Debug)]
pub struct LabyrinthOptions {
    pub max_rings: usize,
    pub resolution: usize,
    /// Door width as a fraction of the full turn.
    pub door: f64,
}

impl Default for LabyrinthOptions {
    fn default() -> Self {
        Self {
            max_rings: 6,
            resolution: 160,
            door: 0.08,
        }
    }
}

fn ring_cells(host: &Band, rings: usize, door: f64) -> Result<Vec<LabyrinthCell>> {
    let w = host.outer - host.inner;
    let lo = host.inner + 0.1 * w;
    let slot = 0.8 * w / (2 * rings - 1) as f64;
    let mut cells = Vec::with_capacity(rings);
    for k in 0..rings {
        let r0 = lo + 2.0 * k as f64 * slot;
        let r1 = r0 + slot;
        let gap = 2.0 * PI * door;
        let door_at = if k % 2 == 0 { 0.0 } else { PI };
        let outer = Sector::new(host.center, r0, r1, door_at + gap / 2.0, 2.0 * PI - gap)?;
        let inner = outer.shrunk(0.2 * slot)?;
        cells.push(LabyrinthCell { outer, inner });
    }
    Ok(cells)
}

fn crossing_bound<F: Fn(C64) -> f64>(host: &Band, abs_h: &F, cells: &[LabyrinthCell], resolution: usize) -> Result<f64> {
    let region = host.region();
    let metric = ConformalMetric::from_fn(&region, resolution, abs_h)?;
    let start = Circle::new(host.center, host.inner).boundary_points(256);
    let blocked = |z: C64| cells.iter().any(|c| c.inner.contains(z));
    Ok(intrinsic_distance_avoiding(&metric, &start, Target::Outer, &blocked)?.lower)
}

/// Smallest ring count whose avoiding crossings have `∫|H||dz| > tau`.
pub fn build_labyrinth(host: Band, h: &Holo, tau: f64, opts: &LabyrinthOptions) -> Result<Labyrinth> {
    build_labyrinth_with(host, |z| h.eval(z).norm(), tau, opts)
}

/// [`build_labyrinth`] for a density `|H|` given pointwise.
pub fn build_labyrinth_with<F: Fn(C64) -> f64>(host: Band, abs_h: F, tau: f64, opts: &LabyrinthOptions) -> Result<Labyrinth> {
    if !(host.inner > 0.0 && host.outer > host.inner) {
        return Err(Error::GeometryInvalid("labyrinth band needs 0 < inner < outer".into()));
    }
    for r in [host.inner, host.outer] {
        let m = Circle::new(host.center, r)
            .boundary_points(256)
            .iter()
            .fold(f64::INFINITY, |m, z| m.min(abs_h(*z)));
        if !(m > 0.0) {
            return Err(Error::GeometryInvalid("H vanishes on the band boundary".into()));
        }
    }
    let mut achieved = crossing_bound(&host, &abs_h, &[], opts.resolution)?;
    if tau <= 0.0 || achieved > tau {
        return Ok(Labyrinth {
            cells: Vec::new(),
            host,
            tau,
            blocking_bound: achieved,
        });
    }
    for rings in 1..=opts.max_rings {
        let cells = ring_cells(&host, rings, opts.door)?;
        let bound = match crossing_bound(&host, &abs_h, &cells, opts.resolution) {
            Ok(b) => b,
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        };
        achieved = achieved.max(bound);
        if bound > tau {
            return Ok(Labyrinth {
                cells,
                host,
                tau,
                blocking_bound: bound,
            });
        }
    }
    Err(Error::BudgetInfeasible { achieved, required: tau })
}

/// Largest factor applied to `η` on a labyrinth collar; bigger values push
/// `|f|²` past the range where the nullity check is meaningful in f64.
pub const MAX_BOOST: f64 = 100.0;

/// Boost factor `c` so that crossing a collar of width `w` costs at least
/// `c²·w·min|η|²/2 > tau`, clamped to `[1, MAX_BOOST]`.
pub fn boost_factor(lab: &Labyrinth, pair: &Pair, tau: f64) -> f64 {
    let mut need: f64 = 1.0;
    for cell in &lab.cells {
        let w = cell.inner.r0 - cell.outer.r0;
        let min_eta = cell
            .outer
            .sample_points(6, 64)
            .iter()
            .fold(f64::INFINITY, |m, z| m.min(pair.eta(*z).norm()));
        need = need.max((2.0 * tau * 1.5 / (w * min_eta * min_eta)).sqrt());
    }
    need.clamp(1.0, MAX_BOOST)
}

/// `η ↦ factor·η` on every labyrinth sector; the holomorphic blend happens
/// in the following approximation step.
pub fn boost_on_labyrinth(pair: &Pair, lab: &Labyrinth, factor: f64) -> PairOnS {
    if lab.cells.is_empty() || factor == 1.0 {
        return PairOnS::Global(pair.clone());
    }
    let c = C64::new(factor.ln(), 0.0);
    PairOnS::Piecewise {
        base: pair.clone(),
        boosts: lab.cells.iter().map(|cell| (Patch::Sector(cell.outer), c)).collect(),
    }
}

/// Step report plus the completeness measurements.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompletenessReport {
    pub step: StepReport,
    pub rings: usize,
    pub boost: f64,
    pub blocking_bound: f64,
    pub distance: Option<DistanceEstimate>,
}

#[derive(Clone, Debug)]
pub struct CompletenessOptions {
    pub step: StepOptions,
    pub labyrinth: LabyrinthOptions,
    pub lattice: usize,
    /// Relative head-room demanded before a labyrinth is skipped.
    pub margin: f64,
}

impl Default for CompletenessOptions {
    fn default() -> Self {
        Self {
            step: StepOptions::default(),
            labyrinth: LabyrinthOptions::default(),
            lattice: DEFAULT_LATTICE,
            margin: 0.02,
        }
    }
}

/// Approximation step on `L` that also makes every path from `p0` to `∂L`
/// have length `> tau`, adding a labyrinth in `L \ K` only when the current
/// metric falls short. The bound is re-measured on the output.
#[allow(clippy::too_many_arguments)]
pub fn completeness_step(
    pair: &Pair,
    set: &crate::geometry::AdmissibleSet<f64>,
    k: &Region<f64>,
    l: &PlanarDomain<f64>,
    targets: &PeriodTargets,
    p0: C64,
    tau: f64,
    opts: &CompletenessOptions,
) -> Result<(Pair, CompletenessReport)> {
    let l_region = l.closure();
    let mut report = CompletenessReport {
        boost: 1.0,
        ..Default::default()
    };
    let need = tau * (1.0 + opts.margin);
    let current = if tau > 0.0 {
        Some(intrinsic_distance(&ConformalMetric::from_pair(pair, &l_region, opts.lattice)?, &[p0], Target::AnyBoundary).stage("distance")?)
    } else {
        None
    };
    let input = match current {
        Some(d) if d.lower <= need => {
            if !l.holes.is_empty() || (k.outer.center - l.outer.center).norm() > 1e-12 {
                return Err(Error::Unsupported("labyrinths need concentric disks K ⊂ L".into()));
            }
            let reach = set
                .curves()
                .iter()
                .flat_map(|c| c.vertices().to_vec())
                .fold(k.outer.radius, |m, z| m.max((z - l.outer.center).norm()));
            let host = Band {
                center: l.outer.center,
                inner: reach + 0.02 * l.outer.radius,
                outer: l.outer.radius * 0.98,
            };
            let lab = build_labyrinth_with(host, |z| pair.h_value(z).norm(), need, &opts.labyrinth).stage("labyrinth")?;
            let factor = boost_factor(&lab, pair, need);
            report.rings = lab.rings();
            report.boost = factor;
            report.blocking_bound = lab.blocking_bound;
            boost_on_labyrinth(pair, &lab, factor)
        }
        _ => PairOnS::Global(pair.clone()),
    };
    let out = fix_harmonic_step(&input, set, l, targets, &opts.step)?;
    report.step = out.report;
    if tau > 0.0 {
        let metric = ConformalMetric::from_pair(&out.pair, &l_region, opts.lattice)?;
        let d = intrinsic_distance(&metric, &[p0], Target::AnyBoundary).stage("distance")?;
        report.distance = Some(d);
        if !(d.lower > tau) {
            return Err(Error::BudgetInfeasible {
                achieved: d.lower,
                required: tau,
            }
            .at_stage("crossing-bound"));
        }
    }
    Ok((out.pair, report))
}

/// Concentric exhaustion of a circular domain: disks of growing radius with
/// enlarged holes, each hole entering once it fits with margin.
pub fn auto_exhaustion(domain: &PlanarDomain<f64>, stages: usize) -> Result<Vec<PlanarDomain<f64>>> {
    let c = domain.outer.center;
    let big = domain.outer.radius;
    let mut out = Vec::with_capacity(stages + 1);
    let mut holes_before = 0;
    for j in 0..=stages {
        let mut r = big * (j + 1) as f64 / (stages + 1) as f64 * 0.98;
        let grow = 1.0 + 0.25 * 0.5f64.powi(j as i32);
        // keep the stage boundary off every enlarged hole
        for hole in &domain.holes {
            let d = (hole.center - c).norm();
            let hr = hole.radius * grow;
            if d - hr < r && r < d + hr {
                r = d - hr - 0.02 * big;
            }
        }
        let holes: Vec<Circle<f64>> = domain
            .holes
            .iter()
            .filter(|h| (h.center - c).norm() + h.radius * grow < r)
            .map(|h| Circle::new(h.center, h.radius * grow))
            .collect();
        if holes.len() > holes_before + 1 {
            return Err(Error::Unsupported(format!("stage {j} would add {} holes at once", holes.len() - holes_before)));
        }
        holes_before = holes.len();
        if !(r > 0.0) {
            return Err(Error::GeometryInvalid(format!("stage {j} has no room")));
        }
        out.push(PlanarDomain::new(Circle::new(c, r), holes, domain.grid_resolution)?);
    }
    Ok(out)
}

/// Interpolation data for the driver: real targets of `Re∫ (f1, f2)` from the
/// base point, plus jet orders.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationPoint {
    pub point: C64,
    pub value: [f64; 2],
    pub jet_order: usize,
}

#[derive(Clone, Debug)]
pub struct DriverConfig {
    pub exhaustion: Vec<PlanarDomain<f64>>,
    pub base: C64,
    pub points: Vec<InterpolationPoint>,
    /// `Im∮ (f1, f2)` around each hole of the full domain, by hole index.
    pub flux: Vec<[f64; 2]>,
    /// Holes of the full domain, used to match stage holes to flux entries.
    pub holes: Vec<Circle<f64>>,
    pub epsilon: f64,
    pub options: CompletenessOptions,
}

/// Per-stage measurements.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub epsilon: f64,
    /// Sup of the change on `K_{j-1}`.
    pub drift: f64,
    pub report: CompletenessReport,
    pub tau: f64,
}

#[derive(Clone, Debug)]
pub struct DriverOutcome {
    pub pair: Pair,
    pub stages: Vec<StageRecord>,
    /// First failure, with the pair of the last completed stage kept above.
    pub failure: Option<Error>,
}

fn stage_targets(pair: &Pair, cfg: &DriverConfig, k: &PlanarDomain<f64>) -> Result<(crate::geometry::AdmissibleSet<f64>, PeriodTargets)> {
    let inside: Vec<&InterpolationPoint> = cfg.points.iter().filter(|p| k.contains(p.point)).collect();
    let pts: Vec<C64> = inside.iter().map(|p| p.point).collect();
    let set = route_admissible_set(k, vec![k.closure()], &pts, cfg.base)?;
    let flux = k
        .holes
        .iter()
        .map(|h| {
            cfg.holes
                .iter()
                .position(|g| (g.center - h.center).norm() < 1e-9)
                .and_then(|i| cfg.flux.get(i).copied())
                .ok_or_else(|| Error::Config("no flux entry for a stage hole".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let arc_real: Vec<[f64; 2]> = inside.iter().map(|p| p.value).collect();
    let jets = inside.iter().filter(|p| p.jet_order > 0).map(|p| (p.point, p.jet_order)).collect();
    let targets = PeriodTargets::interpolation(pair, &set, &arc_real, &flux, jets)?;
    Ok((set, targets))
}

/// Runs stage 0 (approximation on `K_0`) and stages `1..=J` with crossing
/// bound `tau_j = j`; stops at the first failure and keeps the partial result.
pub fn induction_driver(initial: &Pair, cfg: &DriverConfig) -> Result<DriverOutcome> {
    if cfg.exhaustion.is_empty() {
        return Err(Error::Config("exhaustion needs at least K_0".into()));
    }
    for w in cfg.exhaustion.windows(2) {
        if w[1].outer.radius <= w[0].outer.radius || w[1].holes.len() > w[0].holes.len() + 1 {
            return Err(Error::Config("exhaustion must grow and add at most one hole per stage".into()));
        }
    }
    let mut pair = initial.restricted(&cfg.exhaustion[0]);
    let mut stages = Vec::new();
    for (j, k) in cfg.exhaustion.iter().enumerate() {
        let eps = cfg.epsilon * 0.5f64.powi(j as i32);
        let tau = j as f64;
        let run = || -> Result<(Pair, StageRecord)> {
            let widened = pair.restricted(k);
            let (set, targets) = stage_targets(&widened, cfg, k)?;
            let kernel = if j == 0 { k.closure() } else { cfg.exhaustion[j - 1].closure() };
            let (next, report) = completeness_step(&widened, &set, &kernel, k, &targets, cfg.base, tau, &cfg.options)?;
            let drift = if j == 0 {
                0.0
            } else {
                next.distance_to(&widened, &verification_points(&cfg.exhaustion[j - 1]))
            };
            Ok((
                next,
                StageRecord {
                    stage: j,
                    epsilon: eps,
                    drift,
                    report,
                    tau,
                },
            ))
        };
        match run() {
            Ok((next, rec)) => {
                pair = next;
                stages.push(rec);
            }
            Err(e) => {
                return Ok(DriverOutcome {
                    pair,
                    stages,
                    failure: Some(e.at_stage(&format!("stage-{j}"))),
                })
            }
        }
    }
    Ok(DriverOutcome {
        pair,
        stages,
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weierstrass::pair_from_eta;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn euclidean_distance_on_disk() {
        let disk = Region::disk(c(0.0, 0.0), 1.0);
        let one = ConformalMetric::from_fn(&disk, DEFAULT_LATTICE, |_| 1.0).unwrap();
        let d = intrinsic_distance(&one, &[c(0.0, 0.0)], Target::AnyBoundary).unwrap();
        assert!((d.upper - 1.0).abs() <= 0.02, "{d:?}");
        assert!(d.lower <= d.upper);
        let four = ConformalMetric::from_fn(&disk, DEFAULT_LATTICE, |_| 4.0).unwrap();
        let d4 = intrinsic_distance(&four, &[c(0.0, 0.0)], Target::AnyBoundary).unwrap();
        assert!((d4.upper - 4.0 * d.upper).abs() <= 1e-12);
        assert!((d4.lower - 4.0 * d.lower).abs() <= 1e-12);
    }

    #[test]
    fn radial_metric() {
        let disk = Region::disk(c(0.0, 0.0), 1.0);
        let m = ConformalMetric::from_fn(&disk, 128, |z| z.norm_sqr()).unwrap();
        let src = Circle::new(c(0.0, 0.0), 0.5).boundary_points(64);
        let d = intrinsic_distance(&m, &src, Target::Outer).unwrap();
        let exact = 7.0 / 24.0;
        assert!((d.upper - exact).abs() <= 0.05 * exact, "{d:?}");
        assert!(d.lower <= d.upper && d.lower >= 0.9 * exact, "{d:?}");
    }

    #[test]
    fn estimators_bracket_and_converge() {
        let disk = Region::disk(c(0.0, 0.0), 1.0);
        for res in [32, 64, 128] {
            let m = ConformalMetric::from_fn(&disk, res, |_| 1.0).unwrap();
            let d = intrinsic_distance(&m, &[c(0.1, -0.2)], Target::AnyBoundary).unwrap();
            assert!(d.lower <= d.upper);
            if res == 128 {
                assert!((d.upper - d.lower) / d.upper <= 0.05);
            }
        }
    }

    #[test]
    fn disconnected_target() {
        let disk = Region::disk(c(0.0, 0.0), 1.0);
        let m = ConformalMetric::from_fn(&disk, 48, |_| 1.0).unwrap();
        let wall = |z: C64| (z.norm() - 0.5).abs() < 0.05;
        let e = intrinsic_distance_avoiding(&m, &[c(0.0, 0.0)], Target::AnyBoundary, &wall).unwrap_err();
        assert_eq!(e.code(), "DISCONNECTED");
    }

    fn band() -> Band {
        Band {
            center: c(0.0, 0.0),
            inner: 1.0,
            outer: 2.0,
        }
    }

    #[test]
    fn labyrinth_examples() {
        let one = Holo::constant(c(1.0, 0.0));
        let opts = LabyrinthOptions::default();
        let easy = build_labyrinth(band(), &one, 0.5, &opts).unwrap();
        assert_eq!(easy.rings(), 0);
        assert!(easy.blocking_bound > 0.5);
        assert_eq!(build_labyrinth(band(), &one, 0.0, &opts).unwrap().rings(), 0);

        let hard = build_labyrinth(band(), &one, 10.0, &opts).unwrap();
        assert!(hard.rings() >= 2, "{}", hard.rings());
        assert!(hard.blocking_bound > 10.0);
        // cells are disjoint and inside the band
        for (i, a) in hard.cells.iter().enumerate() {
            assert!(a.outer.r0 > 1.0 && a.outer.r1 < 2.0);
            for b in &hard.cells[i + 1..] {
                assert!(a.outer.r1 < b.outer.r0 || b.outer.r1 < a.outer.r0);
            }
        }
        let e = build_labyrinth(band(), &one, 1e4, &opts).unwrap_err();
        assert_eq!(e.code(), "BUDGET_INFEASIBLE");
    }

    #[test]
    fn boost_examples() {
        let d = PlanarDomain::disk(c(0.0, 0.0), 2.5).unwrap();
        let pair = pair_from_eta(&Holo::constant(c(1.0, 0.0)), &Holo::constant(c(1.0, 0.0)), &d).unwrap();
        let lab = build_labyrinth(band(), &Holo::constant(c(1.0, 0.0)), 10.0, &LabyrinthOptions::default()).unwrap();
        assert!(matches!(boost_on_labyrinth(&pair, &lab, 1.0), PairOnS::Global(_)));

        let boosted = boost_on_labyrinth(&pair, &lab, 100.0);
        let cell = &lab.cells[0];
        let w = cell.inner.r0 - cell.outer.r0;
        // radial crossing of the inner collar, at an angle inside the sector
        let a = cell.outer.start + 0.5 * cell.outer.sweep;
        let seg = crate::geometry::OrientedCurve::segment(
            C64::from_polar(cell.outer.r0 + 1e-9, a),
            C64::from_polar(cell.inner.r0, a),
            32,
        )
        .unwrap();
        let len: f64 = {
            let n = 2000;
            (0..n)
                .map(|i| {
                    let z = seg.point_at((i as f64 + 0.5) / n as f64);
                    let (f1, f2) = boosted.components(z);
                    (f1.norm_sqr() + f2.norm_sqr()) * seg.length() / n as f64
                })
                .sum()
        };
        assert!(len >= 100.0f64.powi(2) * w * 0.5 * 0.999, "{len}");
        let pts = cell.outer.sample_points(4, 32);
        for z in pts {
            let (f1, f2) = boosted.components(z);
            assert!((f1 * f1 + f2 * f2 - 1.0).norm() <= 1e-10);
        }
    }

    #[test]
    fn step_without_labyrinth_matches_plain_step() {
        let l = PlanarDomain::disk(c(0.0, 0.0), 2.0).unwrap();
        let k = Region::disk(c(0.0, 0.0), 1.0);
        let pair = pair_from_eta(&Holo::constant(c(1.0, 0.0)), &Holo::constant(c(1.0, 0.0)), &l).unwrap();
        let set = route_admissible_set(&l, vec![l.closure()], &[c(0.5, 0.0)], c(0.0, 0.0)).unwrap();
        let targets = PeriodTargets::preserving(&pair, set.curves(), 1, vec![(c(0.5, 0.0), 1)]).unwrap();
        let (_, r) = completeness_step(&pair, &set, &k, &l, &targets, c(0.0, 0.0), 0.0, &CompletenessOptions::default()).unwrap();
        assert_eq!(r.rings, 0);
        assert!(r.distance.is_none());
        // λ ≥ 2 so the straight radius already has length 4 > 2
        let (_, r) = completeness_step(&pair, &set, &k, &l, &targets, c(0.0, 0.0), 2.0, &CompletenessOptions::default()).unwrap();
        assert_eq!(r.rings, 0);
        assert!(r.distance.unwrap().lower > 2.0);
        assert!(r.step.jet_orders.iter().all(|(_, k, a)| a >= k));
    }

    #[test]
    fn unmet_crossing_bound_is_reported() {
        let l = PlanarDomain::disk(c(0.0, 0.0), 2.5).unwrap();
        let k = Region::disk(c(0.0, 0.0), 1.0);
        let one = Holo::constant(c(1.0, 0.0));
        let pair = PairData::from_parts(one.clone(), one, Holo::zero(), &l).with_log_factor(Holo::identity().scale(c(0.3, 0.0)));
        let kd = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        let set = route_admissible_set(&kd, vec![k.clone()], &[c(0.5, 0.0)], c(0.0, 0.0)).unwrap();
        let targets = PeriodTargets::preserving(&pair, set.curves(), 1, vec![]).unwrap();
        // a labyrinth is built, but the global fit of the boost cannot keep
        // the crossing bound; the step must say so
        match completeness_step(&pair, &set, &k, &l, &targets, c(0.0, 0.0), 10.0, &CompletenessOptions::default()) {
            Ok((_, r)) => assert!(r.distance.unwrap().lower > 10.0 && r.step.nullity_residual <= 1e-10),
            Err(e) => assert!(matches!(e.code(), "BUDGET_INFEASIBLE" | "OVERFLOW" | "NO_CONVERGENCE"), "{e}"),
        }
    }

    #[test]
    fn exhaustion_inserts_holes_one_at_a_time() {
        let d = PlanarDomain::new(
            Circle::new(c(0.0, 0.0), 4.0),
            vec![Circle::new(c(1.5, 0.0), 0.3), Circle::new(c(-2.6, 0.0), 0.3)],
            64,
        )
        .unwrap();
        let ex = auto_exhaustion(&d, 3).unwrap();
        assert_eq!(ex.len(), 4);
        for w in ex.windows(2) {
            assert!(w[1].outer.radius > w[0].outer.radius);
            assert!(w[1].holes.len() <= w[0].holes.len() + 1);
        }
        assert_eq!(ex[3].holes.len(), 2);
    }
}
