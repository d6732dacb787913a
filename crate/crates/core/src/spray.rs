//! Period-dominating sprays over curve systems and the Newton solve of the
//! period-interpolation problem.

use crate::error::{Error, Result, StageExt};
use crate::geometry::{AdmissibleSet, OrientedCurve, PlanarDomain, Region, Sector};
use crate::holofun::{
    integrate_vec_fn, make_bump, mergelyan_fit, smooth_bump_to_holo, taylor_coefficients, BumpFitOptions, FitBasis,
    HoloFunction, JET_TOL,
};
use crate::linalg::{lu_solve, CMatrix, Svd};
use crate::weierstrass::{spray_map, verification_points, PairData};
use num_complex::Complex64 as C64;

type Holo = HoloFunction<f64>;
type Pair = PairData<f64>;
type Curve = OrientedCurve<f64>;

pub const DET_TOL: f64 = 1e-10;
pub const MAX_JACOBIAN_CONDITION: f64 = 1e8;
const SCAN: usize = 256;

/// Curves `γ_1..γ_l` (arcs first, then loops) with the desired values of
/// `∫_γ (f1, f2) dz` and the jet points `(p, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodTargets {
    pub curves: Vec<Curve>,
    pub num_arcs: usize,
    pub values: Vec<[C64; 2]>,
    pub jet_points: Vec<(C64, usize)>,
}

impl PeriodTargets {
    pub fn new(curves: Vec<Curve>, num_arcs: usize, values: Vec<[C64; 2]>, jet_points: Vec<(C64, usize)>) -> Result<Self> {
        if values.len() != curves.len() || num_arcs > curves.len() {
            return Err(Error::Config("one target per curve is required".into()));
        }
        Ok(Self {
            curves,
            num_arcs,
            values,
            jet_points,
        })
    }

    /// Targets equal to the current integrals of `pair`.
    pub fn preserving(pair: &Pair, curves: Vec<Curve>, num_arcs: usize, jet_points: Vec<(C64, usize)>) -> Result<Self> {
        let values = curve_integrals(pair, &curves)?;
        Self::new(curves, num_arcs, values, jet_points)
    }

    /// Arc targets from prescribed real parts (imaginary parts kept from
    /// `pair`) and loop targets `i·flux`.
    pub fn interpolation(
        pair: &Pair,
        set: &AdmissibleSet<f64>,
        arc_real: &[[f64; 2]],
        loop_flux: &[[f64; 2]],
        jet_points: Vec<(C64, usize)>,
    ) -> Result<Self> {
        if arc_real.len() != set.arcs.len() || loop_flux.len() != set.loops.len() {
            return Err(Error::Config("target counts do not match the curve system".into()));
        }
        let current = curve_integrals(pair, &set.arcs)?;
        let mut values: Vec<[C64; 2]> = current
            .iter()
            .zip(arc_real)
            .map(|(c, r)| [C64::new(r[0], c[0].im), C64::new(r[1], c[1].im)])
            .collect();
        values.extend(loop_flux.iter().map(|f| [C64::new(0.0, f[0]), C64::new(0.0, f[1])]));
        Self::new(set.curves(), set.arcs.len(), values, jet_points)
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    fn flat_values(&self) -> Vec<C64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }
}

/// `[∫_γ f1 dz, ∫_γ f2 dz]` per curve.
pub fn curve_integrals(pair: &Pair, curves: &[Curve]) -> Result<Vec<[C64; 2]>> {
    curves
        .iter()
        .map(|c| {
            let v = integrate_vec_fn(c, 2, |z| {
                let (a, b) = pair.components(z);
                vec![a, b]
            })?;
            Ok([v[0], v[1]])
        })
        .collect()
}

/// `∫_{γ_j} (Φ(h) - (f1, f2)) dz`, flattened.
pub fn period_map(pair: &Pair, h: &Holo, curves: &[Curve]) -> Result<Vec<C64>> {
    let moved = spray_map(pair, h)?;
    let a = curve_integrals(&moved, curves)?;
    let b = curve_integrals(pair, curves)?;
    Ok(a.iter()
        .zip(&b)
        .flat_map(|(x, y)| [x[0] - y[0], x[1] - y[1]])
        .collect())
}

/// Bump functions `h_{i,j}`, their anchors and the Jacobian at `ζ = 0`.
#[derive(Clone, Debug)]
pub struct SprayBasis {
    pub holo_bumps: Vec<Holo>,
    pub anchor_params: Vec<f64>,
    pub anchor_points: Vec<C64>,
    pub jacobian0: CMatrix<f64>,
    pub condition: f64,
    pub rho: f64,
    /// Max fit residual of the bumps along their own curves.
    pub fit_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SprayOptions {
    pub rho_ladder: Vec<f64>,
    pub degree: usize,
    pub samples: usize,
    pub boundary_weight: f64,
    pub newton: NewtonOptions,
}

impl Default for SprayOptions {
    fn default() -> Self {
        Self {
            rho_ladder: vec![0.2, 0.1, 0.05],
            degree: 16,
            samples: 160,
            boundary_weight: 0.1,
            newton: NewtonOptions::default(),
        }
    }
}

/// Tangent-weighted spray directions along a curve at parameter `t`.
fn variation_vector(pair: &Pair, curve: &Curve, t: f64) -> [C64; 2] {
    let z = curve.point_at(t);
    let (a, b) = pair.variation(z);
    let v = curve.velocity_at(t);
    [a * v, b * v]
}

fn det2(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Parameter pair with disjoint `ρ`-supports maximizing `|det|`, weighted
/// towards points away from `others`. Returns the unweighted determinant.
pub fn select_anchors(pair: &Pair, curve: &Curve, rho: f64, others: &[Curve]) -> (f64, f64, f64) {
    let margin = rho + 0.01;
    let ts: Vec<f64> = (0..SCAN)
        .map(|s| (s as f64 + 0.5) / SCAN as f64)
        .filter(|t| *t > margin && *t < 1.0 - margin)
        .collect();
    let vs: Vec<[C64; 2]> = ts.iter().map(|t| variation_vector(pair, curve, *t)).collect();
    let dist: Vec<f64> = ts
        .iter()
        .map(|t| {
            let z = curve.point_at(*t);
            others.iter().fold(f64::INFINITY, |m, c| m.min(c.distance_to(z)))
        })
        .collect();
    let far = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    let weight: Vec<f64> = dist
        .iter()
        .map(|d| if far > 0.0 && d.is_finite() { (d / far).min(1.0) } else { 1.0 })
        .collect();
    let mut best = (0.0, 0.0, -1.0);
    let mut best_score = -1.0;
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            if ts[j] - ts[i] < 2.0 * rho + 1e-9 {
                continue;
            }
            let d = det2(vs[i], vs[j]).norm();
            let score = d * weight[i] * weight[j];
            if score > best_score {
                best_score = score;
                best = (ts[i], ts[j], d);
            }
        }
    }
    best
}

fn fit_domain_boundary(domain: &PlanarDomain<f64>) -> Vec<C64> {
    domain
        .closure()
        .boundary_circles()
        .iter()
        .flat_map(|c| c.boundary_points(128))
        .collect()
}

fn build_basis_at(pair: &Pair, targets: &PeriodTargets, rho: f64, opts: &SprayOptions) -> Result<SprayBasis> {
    let domain = pair.domain();
    let mut bumps = Vec::new();
    let mut params = Vec::new();
    let mut anchors = Vec::new();
    let mut fit_residual: f64 = 0.0;
    let basis = FitBasis::for_domain(domain, opts.degree);
    for (j, curve) in targets.curves.iter().enumerate() {
        let others: Vec<Curve> = targets
            .curves
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, c)| c.clone())
            .collect();
        let (ta, tb, det) = select_anchors(pair, curve, rho, &others);
        if !(det >= DET_TOL) {
            return Err(Error::DegenerateCurve {
                curve: j,
                max_det: det.max(0.0),
            });
        }
        let mut fit_opts = BumpFitOptions::new(basis.clone());
        fit_opts.samples = opts.samples;
        fit_opts.other_curves = others;
        fit_opts.boundary = fit_domain_boundary(domain);
        fit_opts.boundary_weight = opts.boundary_weight;
        for t in [ta, tb] {
            let b = make_bump(curve, t, rho)?;
            let fit = smooth_bump_to_holo(&b, &[], &targets.jet_points, &fit_opts)?;
            fit_residual = fit_residual.max(fit.max_residual);
            bumps.push(fit.function);
            params.push(t);
            anchors.push(curve.point_at(t));
        }
    }
    let jacobian0 = spray_jacobian(pair, &bumps, &targets.curves)?;
    let condition = if bumps.is_empty() { 1.0 } else { Svd::new(&jacobian0).condition() };
    if !(condition <= MAX_JACOBIAN_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    Ok(SprayBasis {
        holo_bumps: bumps,
        anchor_params: params,
        anchor_points: anchors,
        jacobian0,
        condition,
        rho,
        fit_residual,
    })
}

/// Builds the bump basis, retrying smaller `ρ` when the Jacobian is badly
/// conditioned.
pub fn build_spray_basis(pair: &Pair, targets: &PeriodTargets, opts: &SprayOptions) -> Result<SprayBasis> {
    let mut last = None;
    for &rho in &opts.rho_ladder {
        match build_basis_at(pair, targets, rho, opts) {
            Ok(b) => return Ok(b),
            Err(e @ Error::Conditioning { .. }) => last = Some(e),
            Err(e @ Error::SupportOutOfRange(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::Conditioning {
        condition: f64::INFINITY,
    }))
}

/// `∂/∂ζ_k ∫_{γ_j} Φ_ζ dz = ∫_{γ_j} h_k·((η - q)/2, i(η + q)/2) dz` at the
/// pair's current spray parameter.
pub fn spray_jacobian(pair: &Pair, bumps: &[Holo], curves: &[Curve]) -> Result<CMatrix<f64>> {
    let n = bumps.len();
    let mut jac = CMatrix::zeros(2 * curves.len(), n);
    for (j, c) in curves.iter().enumerate() {
        let col = integrate_vec_fn(c, 2 * n, |z| {
            let (a, b) = pair.variation(z);
            let mut v = Vec::with_capacity(2 * n);
            for h in bumps {
                let hz = h.eval(z);
                v.push(hz * a);
                v.push(hz * b);
            }
            v
        })?;
        for k in 0..n {
            jac[(2 * j, k)] = col[2 * k];
            jac[(2 * j + 1, k)] = col[2 * k + 1];
        }
    }
    Ok(jac)
}

/// Square holomorphic system `R(ζ) = 0`.
pub trait PeriodSystem {
    fn dim(&self) -> usize;
    fn residual(&self, zeta: &[C64]) -> Result<Vec<C64>>;
    /// Jacobian at `zeta`; forward differences unless overridden.
    fn jacobian(&self, zeta: &[C64], fd_step: f64) -> Result<CMatrix<f64>> {
        self.fd_jacobian(zeta, fd_step)
    }
    /// Jacobian by forward differences along the coordinate directions.
    fn fd_jacobian(&self, zeta: &[C64], step: f64) -> Result<CMatrix<f64>> {
        let n = self.dim();
        let r0 = self.residual(zeta)?;
        let mut jac = CMatrix::zeros(r0.len(), n);
        for k in 0..n {
            let mut z = zeta.to_vec();
            z[k] += step;
            let r = self.residual(&z)?;
            for i in 0..r0.len() {
                jac[(i, k)] = (r[i] - r0[i]) / step;
            }
        }
        Ok(jac)
    }
}

/// `R(ζ) = ∫_γ Φ(Σ ζ_k h_k) dz - targets`.
pub struct PeriodProblem<'a> {
    pub pair: &'a Pair,
    pub bumps: &'a [Holo],
    pub curves: &'a [Curve],
    pub targets: Vec<C64>,
}

impl<'a> PeriodProblem<'a> {
    pub fn new(pair: &'a Pair, basis: &'a SprayBasis, targets: &'a PeriodTargets) -> Self {
        Self {
            pair,
            bumps: &basis.holo_bumps,
            curves: &targets.curves,
            targets: targets.flat_values(),
        }
    }

    pub fn combination(&self, zeta: &[C64]) -> Holo {
        self.bumps
            .iter()
            .zip(zeta)
            .fold(Holo::zero(), |acc, (h, z)| acc.add(&h.scale(*z)))
    }

    pub fn moved(&self, zeta: &[C64]) -> Result<Pair> {
        spray_map(self.pair, &self.combination(zeta))
    }
}

impl PeriodSystem for PeriodProblem<'_> {
    fn dim(&self) -> usize {
        self.bumps.len()
    }

    fn residual(&self, zeta: &[C64]) -> Result<Vec<C64>> {
        let moved = self.moved(zeta)?;
        let ints = curve_integrals(&moved, self.curves)?;
        Ok(ints
            .iter()
            .flat_map(|v| v.iter().copied())
            .zip(&self.targets)
            .map(|(a, b)| a - *b)
            .collect())
    }

    fn jacobian(&self, zeta: &[C64], _fd_step: f64) -> Result<CMatrix<f64>> {
        spray_jacobian(&self.moved(zeta)?, self.bumps, self.curves)
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub refresh_every: usize,
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
            refresh_every: 1,
            fd_step: 1e-7,
            max_halvings: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpraySolution {
    pub zeta: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    /// Residual after every iteration, starting with the initial one.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, c| m.max(c.norm()))
}

fn solve_linear(j: &CMatrix<f64>, r: &[C64]) -> Vec<C64> {
    let neg: Vec<C64> = r.iter().map(|c| -c).collect();
    lu_solve(j, &neg).unwrap_or_else(|| Svd::new(j).solve(&neg, 1e-14))
}

type Accepted = (Vec<C64>, Vec<C64>, f64, bool);

fn line_search<S: PeriodSystem>(
    system: &S,
    zeta: &[C64],
    jac: &CMatrix<f64>,
    r: &[C64],
    res: f64,
    opts: &NewtonOptions,
) -> Option<Accepted> {
    let step = solve_linear(jac, r);
    let mut t = 1.0;
    for k in 0..=opts.max_halvings {
        let cand: Vec<C64> = zeta.iter().zip(&step).map(|(z, s)| z + s * t).collect();
        if let Ok(rc) = system.residual(&cand) {
            let rn = inf_norm(&rc);
            if rn < res {
                return Some((cand, rc, rn, k == 0));
            }
        }
        t *= 0.5;
    }
    None
}

/// Damped chord Newton: step halving, Jacobian refreshed every
/// `refresh_every` iterations and after every damped step.
pub fn newton_solve<S: PeriodSystem>(system: &S, jacobian0: &CMatrix<f64>, opts: &NewtonOptions) -> Result<SpraySolution> {
    let n = system.dim();
    let mut zeta = vec![C64::new(0.0, 0.0); n];
    let mut r = system.residual(&zeta)?;
    let mut res = inf_norm(&r);
    let mut trace = vec![res];
    let mut jac = jacobian0.clone();
    let fail = |res: f64, it: usize, trace: Vec<f64>| Error::NoConvergence {
        residual: res,
        iterations: it,
        trace,
    };
    let mut fresh = true;
    for it in 0..opts.max_iterations {
        if res <= opts.tol {
            return Ok(SpraySolution {
                zeta,
                residual: res,
                iterations: it,
                trace,
            });
        }
        if it > 0 && it % opts.refresh_every == 0 && !fresh {
            jac = system.jacobian(&zeta, opts.fd_step)?;
        }
        // a failed line search with a stale Jacobian retries once with a fresh one
        let mut accepted = line_search(system, &zeta, &jac, &r, res, opts);
        if accepted.is_none() && !fresh {
            jac = system.jacobian(&zeta, opts.fd_step)?;
            accepted = line_search(system, &zeta, &jac, &r, res, opts);
        }
        let Some((z, rc, rn, full)) = accepted else {
            return Err(fail(res, it + 1, trace));
        };
        zeta = z;
        r = rc;
        res = rn;
        trace.push(res);
        fresh = false;
        if !full {
            jac = system.jacobian(&zeta, opts.fd_step)?;
            fresh = true;
        }
    }
    if res <= opts.tol {
        return Ok(SpraySolution {
            zeta,
            residual: res,
            iterations: opts.max_iterations,
            trace,
        });
    }
    Err(fail(res, opts.max_iterations, trace))
}

/// True when `f1, f2` are independent on every curve (determinant scan) or,
/// without curves, on the sample points (rank two).
pub fn is_independent(pair: &Pair, curves: &[Curve], rho: f64) -> bool {
    if curves.is_empty() {
        let pts = crate::weierstrass::rank_sample_points(pair.domain(), 32);
        let rows: Vec<Vec<C64>> = pts
            .iter()
            .map(|z| {
                let (a, b) = pair.components(*z);
                vec![a, b]
            })
            .collect();
        return Svd::new(&CMatrix::from_rows(&rows)).rank(1e-9) == 2;
    }
    curves.iter().all(|c| select_anchors(pair, c, rho, &[]).2 >= DET_TOL)
}

/// `Π (z - p)^k` over the jet points.
pub fn jet_divisor(jet_points: &[(C64, usize)]) -> Holo {
    let mut f = Holo::constant(C64::new(1.0, 0.0));
    for (p, k) in jet_points {
        let lin = Holo::polynomial(C64::new(0.0, 0.0), 1.0, vec![-p, C64::new(1.0, 0.0)]);
        for _ in 0..*k {
            f = f.mul(&lin);
        }
    }
    f
}

pub const REPAIR_LADDER: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    pub pair: Pair,
    pub epsilon: Option<f64>,
    pub newton: Option<SpraySolution>,
}

/// Makes `f1, f2` independent by `Φ(ε·φ0·φ)` followed by a Newton correction
/// restoring the targets.
pub fn repair_linear_independence(
    pair: &Pair,
    targets: &PeriodTargets,
    direction: &Holo,
    opts: &SprayOptions,
) -> Result<RepairOutcome> {
    let rho0 = opts.rho_ladder.first().copied().unwrap_or(0.2);
    if is_independent(pair, &targets.curves, rho0) {
        return Ok(RepairOutcome {
            pair: pair.clone(),
            epsilon: None,
            newton: None,
        });
    }
    let phi = jet_divisor(&targets.jet_points).mul(direction);
    let mut last = String::from("no candidate was independent");
    for eps in REPAIR_LADDER {
        let cand = match spray_map(pair, &phi.scale(C64::new(eps, 0.0))) {
            Ok(c) => c,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        if !is_independent(&cand, &targets.curves, rho0) {
            continue;
        }
        if targets.is_empty() {
            return Ok(RepairOutcome {
                pair: cand,
                epsilon: Some(eps),
                newton: None,
            });
        }
        let attempt = build_spray_basis(&cand, targets, opts).and_then(|basis| {
            let problem = PeriodProblem::new(&cand, &basis, targets);
            let sol = newton_solve(&problem, &basis.jacobian0, &opts.newton)?;
            let fixed = problem.moved(&sol.zeta)?;
            Ok((fixed, sol))
        });
        match attempt {
            Ok((fixed, sol)) if is_independent(&fixed, &targets.curves, rho0) => {
                return Ok(RepairOutcome {
                    pair: fixed,
                    epsilon: Some(eps),
                    newton: Some(sol),
                })
            }
            Ok(_) => last = "independence lost in the Newton correction".into(),
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::RepairFailed(last))
}

/// Compact piece carrying a constant log boost.
#[derive(Clone, Debug, PartialEq)]
pub enum Patch {
    Region(Region<f64>),
    Sector(Sector<f64>),
}

impl Patch {
    pub fn contains(&self, z: C64) -> bool {
        match self {
            Self::Region(r) => r.contains(z),
            Self::Sector(s) => s.contains(z),
        }
    }

    fn samples(&self) -> Vec<C64> {
        match self {
            Self::Region(r) => {
                let mut pts = Vec::new();
                if let Ok(d) = PlanarDomain::new(r.outer, r.holes.clone(), 32) {
                    pts = d.grid_points(20);
                }
                for c in r.boundary_circles() {
                    pts.extend(c.boundary_points(64));
                }
                pts
            }
            Self::Sector(s) => {
                let na = ((s.sweep * s.r1 / (s.r1 - s.r0)) as usize * 3).clamp(24, 160);
                s.sample_points(4, na)
            }
        }
    }
}

/// Input of the approximation step.
#[derive(Clone, Debug)]
pub enum PairOnS {
    /// Data already holomorphic on a neighbourhood of `L`.
    Global(Pair),
    /// `base` with `η ↦ e^c η` on each patch.
    Piecewise { base: Pair, boosts: Vec<(Patch, C64)> },
}

impl PairOnS {
    pub fn base(&self) -> &Pair {
        match self {
            Self::Global(p) => p,
            Self::Piecewise { base, .. } => base,
        }
    }

    pub fn boost_at(&self, z: C64) -> C64 {
        match self {
            Self::Global(_) => C64::new(0.0, 0.0),
            Self::Piecewise { boosts, .. } => boosts
                .iter()
                .find(|(r, _)| r.contains(z))
                .map(|(_, c)| *c)
                .unwrap_or_default(),
        }
    }

    /// `(f1, f2)` of the piecewise data at `z`.
    pub fn components(&self, z: C64) -> (C64, C64) {
        match self {
            Self::Global(p) => p.components(z),
            Self::Piecewise { base, .. } => {
                let extra = self.boost_at(z);
                let eta = base.eta(z) * extra.exp();
                let q = base.quot(z) * (-extra).exp();
                ((eta + q) * 0.5, C64::new(0.0, 0.5) * (eta - q))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    pub spray: SprayOptions,
    /// Laurent degree of the smoothing fit for piecewise data.
    pub smoothing_degree: usize,
    /// Weight of the zero targets placed on `L \ S` in that fit.
    pub smoothing_free_weight: f64,
    pub direction: Holo,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            spray: SprayOptions::default(),
            smoothing_degree: 40,
            smoothing_free_weight: 1e-3,
            direction: Holo::identity(),
        }
    }
}

/// Measured conclusions of the approximation step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub nullity_residual: f64,
    /// Per loop, max `|Re(∮ f - target)|` over the two components.
    pub loop_real_defects: Vec<f64>,
    pub loop_defects: Vec<f64>,
    pub arc_defects: Vec<f64>,
    /// `(point, required, achieved)` zero multiplicity of the change.
    pub jet_orders: Vec<(C64, usize, usize)>,
    pub smoothing_residual: f64,
    pub repaired_with: Option<f64>,
    pub newton_iterations: usize,
    pub newton_trace: Vec<f64>,
    pub basis_condition: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub pair: Pair,
    pub report: StepReport,
}

/// Multiplicity (capped at `cap`) of the zero of `g - f` at `p`, per component.
pub fn change_multiplicity(new: &Pair, old: &PairOnS, p: C64, radius: f64, cap: usize) -> usize {
    let d1 = taylor_coefficients(|z| new.f1(z) - old.components(z).0, p, radius, cap);
    let d2 = taylor_coefficients(|z| new.f2(z) - old.components(z).1, p, radius, cap);
    let m = |d: &[C64]| d.iter().position(|c| c.norm() > JET_TOL).unwrap_or(cap);
    m(&d1).min(m(&d2))
}

fn smooth_piecewise(input: &PairOnS, set: &AdmissibleSet<f64>, l: &PlanarDomain<f64>, targets: &PeriodTargets, opts: &StepOptions) -> Result<(Pair, f64)> {
    match input {
        PairOnS::Global(p) => Ok((p.restricted(l), 0.0)),
        PairOnS::Piecewise { base, boosts } => {
            // fit δ ≈ boost on S with exact zeros at the jet points
            let mut samples = Vec::new();
            for comp in &set.components {
                for z in Patch::Region(comp.clone()).samples() {
                    samples.push((z, input.boost_at(z)));
                }
            }
            for c in set.curves() {
                for k in 0..=c.segment_count() {
                    let z = c.point_at(k as f64 / c.segment_count() as f64);
                    samples.push((z, input.boost_at(z)));
                }
            }
            for (patch, value) in boosts {
                samples.extend(patch.samples().into_iter().map(|z| (z, *value)));
            }
            let mut weights = vec![1.0; samples.len()];
            // weak pull towards zero off S keeps δ bounded on L
            if opts.smoothing_free_weight > 0.0 {
                for z in l.verification_points(48, 96) {
                    if !set.components.iter().any(|r| r.contains(z)) && !boosts.iter().any(|(p, _)| p.contains(z)) {
                        samples.push((z, C64::new(0.0, 0.0)));
                        weights.push(opts.smoothing_free_weight);
                    }
                }
            }
            let basis = FitBasis::for_domain(l, opts.smoothing_degree);
            let fit = mergelyan_fit(&samples, Some(&weights), &[], &targets.jet_points, &basis)?;
            let smoothed = spray_map(&base.restricted(l), &fit.function)?;
            Ok((smoothed, fit.max_residual))
        }
    }
}

/// Approximation step: smoothing, independence repair, dominating spray and
/// Newton solve; returns a pair on `L` meeting the period targets.
pub fn fix_harmonic_step(
    input: &PairOnS,
    set: &AdmissibleSet<f64>,
    l: &PlanarDomain<f64>,
    targets: &PeriodTargets,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    let (smoothed, smoothing_residual) =
        smooth_piecewise(input, set, l, targets, opts).stage("smoothing")?;
    let repaired = repair_linear_independence(&smoothed, targets, &opts.direction, &opts.spray).stage("repair")?;
    let mut report = StepReport {
        smoothing_residual,
        repaired_with: repaired.epsilon,
        ..Default::default()
    };
    let pair = if targets.is_empty() {
        repaired.pair
    } else {
        let basis = build_spray_basis(&repaired.pair, targets, &opts.spray).stage("spray-basis")?;
        report.basis_condition = basis.condition;
        let problem = PeriodProblem::new(&repaired.pair, &basis, targets);
        let sol = newton_solve(&problem, &basis.jacobian0, &opts.spray.newton).stage("newton")?;
        report.newton_iterations = sol.iterations;
        report.newton_trace = sol.trace.clone();
        problem.moved(&sol.zeta).stage("spray")?
    };
    verify_step(&pair, input, l, targets, &mut report)?;
    Ok(StepOutcome { pair, report })
}

/// Fills the measured conclusions (i)–(iv) into `report`.
pub fn verify_step(pair: &Pair, input: &PairOnS, l: &PlanarDomain<f64>, targets: &PeriodTargets, report: &mut StepReport) -> Result<()> {
    report.nullity_residual = pair.nullity_residual(&verification_points(l));
    let ints = curve_integrals(pair, &targets.curves)?;
    report.arc_defects.clear();
    report.loop_defects.clear();
    report.loop_real_defects.clear();
    for (j, (got, want)) in ints.iter().zip(&targets.values).enumerate() {
        let d = [got[0] - want[0], got[1] - want[1]];
        let size = d[0].norm().max(d[1].norm());
        if j < targets.num_arcs {
            report.arc_defects.push(size);
        } else {
            report.loop_defects.push(size);
            report.loop_real_defects.push(d[0].re.abs().max(d[1].re.abs()));
        }
    }
    report.jet_orders.clear();
    for (p, k) in &targets.jet_points {
        let radius = 0.5 * l.boundary_distance(*p).min(0.5);
        let achieved = change_multiplicity(pair, input, *p, radius, k + 2);
        report.jet_orders.push((*p, *k, achieved));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{route_admissible_set, Circle};
    use crate::weierstrass::pair_from_eta;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disk(r: f64) -> PlanarDomain<f64> {
        PlanarDomain::disk(c(0.0, 0.0), r).unwrap()
    }

    fn enneper_pair(d: &PlanarDomain<f64>) -> Pair {
        pair_from_eta(&Holo::constant(c(1.0, 0.0)), &Holo::monomial(c(0.0, 0.0), 2, c(-1.0, 0.0)), d).unwrap()
    }

    #[test]
    fn period_map_examples() {
        let d = disk(2.0);
        let seg = OrientedCurve::segment(c(0.0, 0.0), c(1.0, 0.0), 64).unwrap();
        let one = pair_from_eta(&Holo::constant(c(1.0, 0.0)), &Holo::constant(c(1.0, 0.0)), &d).unwrap();
        let zero = period_map(&one, &Holo::zero(), &[seg.clone()]).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
        let p = period_map(&one, &Holo::constant(c(2f64.ln(), 0.0)), &[seg]).unwrap();
        assert!((p[0] - c(0.25, 0.0)).norm() < 1e-14);
        assert!((p[1] - c(0.0, 0.75)).norm() < 1e-14);
        let lp = OrientedCurve::circle(c(0.1, 0.0), 0.7, 128, 0.0).unwrap();
        let p = period_map(&enneper_pair(&d), &Holo::identity(), &[lp]).unwrap();
        assert!(p.iter().all(|v| v.norm() <= 1e-10));
    }

    #[test]
    fn enneper_anchor_determinant() {
        let d = disk(2.0);
        let pair = enneper_pair(&d);
        let seg = OrientedCurve::segment(c(-1.0, 0.0), c(1.0, 0.0), 64).unwrap();
        // the vectors depend on z^2 only, so mirror anchors z = ±0.9 are dependent
        let a = variation_vector(&pair, &seg, 0.05);
        let b = variation_vector(&pair, &seg, 0.95);
        assert!(det2(a, b).norm() < 1e-14);
        let (ta, tb, best) = select_anchors(&pair, &seg, 0.2, &[]);
        assert!(best > 1e-3);
        assert!((ta + tb - 1.0).abs() > 1e-3);
        let t = PeriodTargets::preserving(&pair, vec![seg], 1, vec![]).unwrap();
        assert!(build_spray_basis(&pair, &t, &SprayOptions::default()).is_ok());
    }

    #[test]
    fn proportional_pair_is_degenerate() {
        let d = disk(2.0);
        // f2 = i f1: η = f1 - i f2 = 2 f1, H = 0 so H/η = 0
        let pair = pair_from_eta(&Holo::constant(c(2.0, 0.0)), &Holo::zero(), &d).unwrap();
        let seg = OrientedCurve::segment(c(-1.0, 0.0), c(1.0, 0.0), 64).unwrap();
        let t = PeriodTargets::preserving(&pair, vec![seg], 1, vec![]).unwrap();
        let e = build_spray_basis(&pair, &t, &SprayOptions::default()).unwrap_err();
        assert_eq!(e.code(), "DEGENERATE_CURVE");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = disk(1.5);
        let pair = enneper_pair(&d);
        let seg = OrientedCurve::segment(c(0.0, 0.0), c(0.8, 0.3), 64).unwrap();
        let t = PeriodTargets::preserving(&pair, vec![seg], 1, vec![]).unwrap();
        let basis = build_spray_basis(&pair, &t, &SprayOptions::default()).unwrap();
        let problem = PeriodProblem::new(&pair, &basis, &t);
        let fd = problem.fd_jacobian(&[c(0.0, 0.0); 2], 1e-6).unwrap();
        for k in 0..2 {
            let col: Vec<C64> = (0..2).map(|i| basis.jacobian0[(i, k)]).collect();
            let dif: Vec<C64> = (0..2).map(|i| fd[(i, k)] - col[i]).collect();
            assert!(inf_norm(&dif) <= 1e-4 * inf_norm(&col));
        }
    }

    struct Affine {
        a: CMatrix<f64>,
        b: Vec<C64>,
    }

    impl PeriodSystem for Affine {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn residual(&self, zeta: &[C64]) -> Result<Vec<C64>> {
            Ok(self.a.mul_vec(zeta).iter().zip(&self.b).map(|(x, y)| x - y).collect())
        }
    }

    #[test]
    fn newton_on_affine_problem() {
        let a = CMatrix::from_rows(&[vec![c(2.0, 1.0), c(0.5, 0.0)], vec![c(0.0, -1.0), c(1.0, 0.3)]]);
        let b = vec![c(1.0, 2.0), c(-0.5, 0.1)];
        let sys = Affine { a: a.clone(), b: b.clone() };
        let sol = newton_solve(&sys, &a, &NewtonOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        let direct = lu_solve(&a, &b).unwrap();
        for (x, y) in sol.zeta.iter().zip(direct) {
            assert!((x - y).norm() <= 1e-12);
        }
        let zero = Affine { a: a.clone(), b: vec![c(0.0, 0.0); 2] };
        let sol = newton_solve(&zero, &a, &NewtonOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.zeta.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn newton_failure_reports_trace() {
        // residual |ζ|^2-like with zero Jacobian: no descent possible
        struct Flat;
        impl PeriodSystem for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn residual(&self, zeta: &[C64]) -> Result<Vec<C64>> {
                Ok(vec![zeta[0] * zeta[0] + 1.0])
            }
        }
        let j = CMatrix::from_rows(&[vec![c(1.0, 0.0)]]);
        match newton_solve(&Flat, &j, &NewtonOptions::default()).unwrap_err() {
            Error::NoConvergence { trace, .. } => assert!(!trace.is_empty()),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn repair_examples() {
        let d = disk(1.0);
        let en = enneper_pair(&d);
        let empty = PeriodTargets::new(vec![], 0, vec![], vec![]).unwrap();
        let out = repair_linear_independence(&en, &empty, &Holo::identity(), &SprayOptions::default()).unwrap();
        assert!(out.epsilon.is_none());
        assert_eq!(out.pair, en);

        // f1 = 1, f2 = 2: η = 1 - 2i, H = 5
        let dep = pair_from_eta(&Holo::constant(c(1.0, -2.0)), &Holo::constant(c(5.0, 0.0)), &d).unwrap();
        assert!((dep.f2(c(0.3, 0.0)) - c(2.0, 0.0)).norm() < 1e-14);
        let p = c(0.3, 0.2);
        let t = PeriodTargets::new(vec![], 0, vec![], vec![(p, 2)]).unwrap();
        let out = repair_linear_independence(&dep, &t, &Holo::identity(), &SprayOptions::default()).unwrap();
        assert!(is_independent(&out.pair, &[], 0.2));
        let pts = verification_points(&d);
        assert!(out.pair.nullity_residual(&pts) <= 1e-10);
        assert!(pts.iter().all(|z| (out.pair.h_value(*z) - 5.0).norm() < 1e-12));
        let m = change_multiplicity(&out.pair, &PairOnS::Global(dep.clone()), p, 0.2, 4);
        assert!(m >= 2);
    }

    #[test]
    fn annulus_step_meets_all_conclusions() {
        let dom = PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.0, 0.0), 0.4)], 64).unwrap();
        let kernel = Region::annulus(c(0.0, 0.0), 0.5, 1.6);
        let p = c(-1.0, 0.3);
        let set = route_admissible_set(&dom, vec![kernel], &[p], c(1.2, 0.0)).unwrap();
        let pair = pair_from_eta(&Holo::constant(c(1.0, 0.0)), &Holo::monomial(c(0.0, 0.0), 2, c(-1.0, 0.0)), &dom).unwrap();
        let current = curve_integrals(&pair, &set.arcs).unwrap();
        let arc_real = [[current[0][0].re + 0.01, current[0][1].re - 0.02]];
        let targets = PeriodTargets::interpolation(&pair, &set, &arc_real, &[[0.05, -0.03]], vec![(p, 1)]).unwrap();
        let out = fix_harmonic_step(&PairOnS::Global(pair.clone()), &set, &dom, &targets, &StepOptions::default()).unwrap();
        let r = &out.report;
        assert!(r.nullity_residual <= 1e-10, "{r:?}");
        assert!(r.loop_real_defects.iter().all(|d| *d <= 1e-8));
        assert!(r.arc_defects.iter().all(|d| *d <= 1e-8));
        assert!(r.jet_orders.iter().all(|(_, k, a)| a >= k));
        assert!(r.newton_iterations <= 50);
    }
}
