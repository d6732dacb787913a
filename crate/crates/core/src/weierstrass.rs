//! Null-quadric data: η-parametrized pairs, the spray deformation,
//! Weierstrass integration, flux, Gauss map and hyperplane margins.

use crate::error::{Error, Result};
use crate::geometry::{HomologyBasis, OrientedCurve, PlanarDomain};
use crate::holofun::{integrate_vec_fn, mergelyan_fit, FitBasis, FitResult, HoloFunction};
use crate::linalg::{CMatrix, Svd};
use crate::scalar::{cone, czero, imag_unit, lit, Cx, Real};

/// Grid resolution of the verification sampling.
pub const VERIFICATION_GRID: usize = 128;
/// Samples per boundary circle in the verification sampling.
pub const BOUNDARY_SAMPLES: usize = 256;
/// Largest admissible `|Re|` of an exponent on the grid.
pub const MAX_EXPONENT: f64 = 700.0;
pub const NULLITY_TOL: f64 = 1e-10;

pub fn verification_points<T: Real>(domain: &PlanarDomain<T>) -> Vec<Cx<T>> {
    domain.verification_points(VERIFICATION_GRID, BOUNDARY_SAMPLES)
}

/// Pair `(f1, f2)` with `f1^2 + f2^2 = H`, stored through
/// `η = η0·e^{w+u}` and `H/η = q0·e^{w-u}`, so `H = η0·q0·e^{2w}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairData<T: Real> {
    eta_base: HoloFunction<T>,
    quot_base: HoloFunction<T>,
    square_base: HoloFunction<T>,
    log_shift: HoloFunction<T>,
    log_factor: HoloFunction<T>,
    domain: PlanarDomain<T>,
}

/// `f1 = (η + H/η)/2`, `f2 = (i/2)(η - H/η)`; fails if `H/η` has poles.
pub fn pair_from_eta<T: Real>(eta: &HoloFunction<T>, h: &HoloFunction<T>, domain: &PlanarDomain<T>) -> Result<PairData<T>> {
    let quot = h.div_exact(eta)?;
    Ok(PairData {
        eta_base: eta.clone(),
        quot_base: quot,
        square_base: h.clone(),
        log_shift: HoloFunction::zero(),
        log_factor: HoloFunction::zero(),
        domain: domain.clone(),
    })
}

impl<T: Real> PairData<T> {
    /// Pair with `η = η0·e^{w}` and `H = η0·q0·e^{2w}`.
    pub fn from_parts(
        eta_base: HoloFunction<T>,
        quot_base: HoloFunction<T>,
        log_shift: HoloFunction<T>,
        domain: &PlanarDomain<T>,
    ) -> Self {
        let square_base = eta_base.mul(&quot_base);
        Self {
            eta_base,
            quot_base,
            square_base,
            log_shift,
            log_factor: HoloFunction::zero(),
            domain: domain.clone(),
        }
    }

    pub fn domain(&self) -> &PlanarDomain<T> {
        &self.domain
    }

    /// Same data regarded on another domain.
    pub fn restricted(&self, domain: &PlanarDomain<T>) -> Self {
        Self {
            domain: domain.clone(),
            ..self.clone()
        }
    }

    pub fn eta_base(&self) -> &HoloFunction<T> {
        &self.eta_base
    }

    pub fn quot_base(&self) -> &HoloFunction<T> {
        &self.quot_base
    }

    /// The accumulated spray parameter `u`.
    pub fn log_factor(&self) -> &HoloFunction<T> {
        &self.log_factor
    }

    pub fn log_shift(&self) -> &HoloFunction<T> {
        &self.log_shift
    }

    /// `H` as a function when the log shift vanishes.
    pub fn square_sum(&self) -> Option<&HoloFunction<T>> {
        self.log_shift.is_zero().then_some(&self.square_base)
    }

    /// `η` as a function when no exponential factor is present.
    pub fn eta_function(&self) -> Option<&HoloFunction<T>> {
        (self.log_shift.is_zero() && self.log_factor.is_zero()).then_some(&self.eta_base)
    }

    pub fn with_log_factor(&self, u: HoloFunction<T>) -> Self {
        Self {
            log_factor: u,
            ..self.clone()
        }
    }

    pub fn eta(&self, z: Cx<T>) -> Cx<T> {
        self.eta_base.eval(z) * (self.log_shift.eval(z) + self.log_factor.eval(z)).exp()
    }

    /// `H/η`.
    pub fn quot(&self, z: Cx<T>) -> Cx<T> {
        self.quot_base.eval(z) * (self.log_shift.eval(z) - self.log_factor.eval(z)).exp()
    }

    pub fn h_value(&self, z: Cx<T>) -> Cx<T> {
        let e = self.log_shift.eval(z);
        self.square_base.eval(z) * (e + e).exp()
    }

    /// `(f1, f2)` at `z`.
    pub fn components(&self, z: Cx<T>) -> (Cx<T>, Cx<T>) {
        let eta = self.eta(z);
        let q = self.quot(z);
        let half = lit::<T>(0.5);
        ((eta + q) * half, imag_unit::<T>() * (eta - q) * half)
    }

    pub fn f1(&self, z: Cx<T>) -> Cx<T> {
        self.components(z).0
    }

    pub fn f2(&self, z: Cx<T>) -> Cx<T> {
        self.components(z).1
    }

    /// Derivative of `Φ(h)` in the direction `h`: `h·((η - q)/2, i(η + q)/2)`.
    pub fn variation(&self, z: Cx<T>) -> (Cx<T>, Cx<T>) {
        let eta = self.eta(z);
        let q = self.quot(z);
        let half = lit::<T>(0.5);
        ((eta - q) * half, imag_unit::<T>() * (eta + q) * half)
    }

    /// Max `|f1^2 + f2^2 - H|` over the points.
    pub fn nullity_residual(&self, points: &[Cx<T>]) -> T {
        points.iter().fold(T::zero(), |m, z| {
            let (a, b) = self.components(*z);
            m.max((a * a + b * b - self.h_value(*z)).norm())
        })
    }

    /// Max of `|Re(w + u)|` over the points.
    pub fn max_exponent(&self, points: &[Cx<T>]) -> T {
        points.iter().fold(T::zero(), |m, z| {
            m.max((self.log_shift.eval(*z) + self.log_factor.eval(*z)).re.abs())
        })
    }

    /// Sup distance of `(f1, f2)` to another pair over the points.
    pub fn distance_to(&self, other: &Self, points: &[Cx<T>]) -> T {
        points.iter().fold(T::zero(), |m, z| {
            let (a, b) = self.components(*z);
            let (c, d) = other.components(*z);
            m.max((a - c).norm().max((b - d).norm()))
        })
    }

    /// Least-squares polynomial/Laurent refits of `f1` and `f2`.
    pub fn refit_components(&self, basis: &FitBasis<T>, points: &[Cx<T>]) -> Result<(FitResult<T>, FitResult<T>)> {
        let s1: Vec<_> = points.iter().map(|z| (*z, self.f1(*z))).collect();
        let s2: Vec<_> = points.iter().map(|z| (*z, self.f2(*z))).collect();
        Ok((
            mergelyan_fit(&s1, None, &[], &[], basis)?,
            mergelyan_fit(&s2, None, &[], &[], basis)?,
        ))
    }
}

/// `Φ(h)`: replaces `η` by `e^h·η` keeping `H`.
pub fn spray_map<T: Real>(pair: &PairData<T>, h: &HoloFunction<T>) -> Result<PairData<T>> {
    let out = pair.with_log_factor(pair.log_factor.add(h));
    let max_re = out.max_exponent(&verification_points(&pair.domain));
    if !(max_re <= lit(MAX_EXPONENT)) {
        return Err(Error::Overflow {
            max_re: max_re.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(out)
}

/// Non-pair component of a tuple.
#[derive(Clone, Debug, PartialEq)]
pub enum TailComponent<T: Real> {
    Holo(HoloFunction<T>),
    /// `e^{u}`
    Exp(HoloFunction<T>),
}

impl<T: Real> TailComponent<T> {
    pub fn eval(&self, z: Cx<T>) -> Cx<T> {
        match self {
            Self::Holo(f) => f.eval(z),
            Self::Exp(u) => u.eval(z).exp(),
        }
    }
}

/// Null tuple `(f1, …, fn)`: pairs in order, then tail components, all
/// multiplied by `factor`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeierstrassTuple<T: Real> {
    pub pairs: Vec<PairData<T>>,
    pub tail: Vec<TailComponent<T>>,
    pub factor: Cx<T>,
    pub domain: PlanarDomain<T>,
}

pub fn assemble_tuple<T: Real>(
    pairs: Vec<PairData<T>>,
    tail: Vec<TailComponent<T>>,
    domain: &PlanarDomain<T>,
) -> Result<WeierstrassTuple<T>> {
    let t = WeierstrassTuple {
        pairs,
        tail,
        factor: cone(),
        domain: domain.clone(),
    };
    if t.dimension() < 3 {
        return Err(Error::NullityViolated { residual: f64::NAN });
    }
    let res = t.nullity_residual(&verification_points(domain));
    if !(res <= lit(NULLITY_TOL)) {
        return Err(Error::NullityViolated {
            residual: res.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(t)
}

impl<T: Real> WeierstrassTuple<T> {
    pub fn dimension(&self) -> usize {
        2 * self.pairs.len() + self.tail.len()
    }

    pub fn eval(&self, z: Cx<T>) -> Vec<Cx<T>> {
        let mut v = Vec::with_capacity(self.dimension());
        for p in &self.pairs {
            let (a, b) = p.components(z);
            v.push(a * self.factor);
            v.push(b * self.factor);
        }
        for t in &self.tail {
            v.push(t.eval(z) * self.factor);
        }
        v
    }

    pub fn scaled(&self, c: Cx<T>) -> Self {
        Self {
            factor: self.factor * c,
            ..self.clone()
        }
    }

    /// Max `|Σ f_j^2|` over the points; pairs contribute `H_j` by identity.
    pub fn nullity_residual(&self, points: &[Cx<T>]) -> T {
        points.iter().fold(T::zero(), |m, z| {
            let s = self.eval(*z).iter().fold(czero::<T>(), |a, f| a + *f * *f);
            m.max(s.norm())
        })
    }

    /// `∫_γ f_j dz` for every component.
    pub fn integrate(&self, curve: &OrientedCurve<T>) -> Result<Vec<Cx<T>>> {
        integrate_vec_fn(curve, self.dimension(), |z| self.eval(z))
    }

    /// Min over the points of `‖f‖`.
    pub fn min_norm(&self, points: &[Cx<T>]) -> T {
        points
            .iter()
            .fold(T::infinity(), |m, z| m.min(norm(&self.eval(*z))))
    }
}

fn norm<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt()
}

/// `Im ∮_γ f dz` per loop.
pub fn flux<T: Real>(data: &WeierstrassTuple<T>, basis: &HomologyBasis<T>) -> Result<Vec<Vec<T>>> {
    basis
        .loops
        .iter()
        .map(|l| Ok(data.integrate(l)?.into_iter().map(|c| c.im).collect()))
        .collect()
}

/// `X(p) = x0 + Re ∫_{p0}^p 2 f dz`.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion<T: Real> {
    pub data: WeierstrassTuple<T>,
    pub base: Cx<T>,
    pub base_value: Vec<T>,
}

impl<T: Real> Immersion<T> {
    pub fn new(data: WeierstrassTuple<T>, base: Cx<T>, base_value: Vec<T>) -> Result<Self> {
        if base_value.len() != data.dimension() {
            return Err(Error::Config(format!(
                "base value has {} coordinates for dimension {}",
                base_value.len(),
                data.dimension()
            )));
        }
        if !data.domain.contains_closed(base) {
            return Err(out_of_domain(base));
        }
        Ok(Self { data, base, base_value })
    }

    pub fn dimension(&self) -> usize {
        self.data.dimension()
    }
}

fn out_of_domain<T: Real>(z: Cx<T>) -> Error {
    Error::OutOfDomain {
        re: z.re.to_f64().unwrap_or(f64::NAN),
        im: z.im.to_f64().unwrap_or(f64::NAN),
    }
}

pub fn integrate_immersion<T: Real>(imm: &Immersion<T>, p: Cx<T>, path: &OrientedCurve<T>) -> Result<Vec<T>> {
    let tol = lit::<T>(1e-9) * (T::one() + imm.base.norm());
    if (path.start() - imm.base).norm() > tol {
        return Err(Error::GeometryInvalid("path does not start at the base point".into()));
    }
    if (path.end() - p).norm() > tol * (T::one() + p.norm()) {
        return Err(Error::GeometryInvalid("path does not end at the evaluation point".into()));
    }
    for v in path.vertices() {
        if !imm.data.domain.contains_closed(*v) {
            return Err(out_of_domain(*v));
        }
    }
    let ints = imm.data.integrate(path)?;
    Ok(imm
        .base_value
        .iter()
        .zip(ints)
        .map(|(x0, i)| *x0 + lit::<T>(2.0) * i.re)
        .collect())
}

/// Unit representative of `[f1(z) : … : fn(z)]`.
pub fn gauss_map<T: Real>(data: &WeierstrassTuple<T>, z: Cx<T>) -> Result<Vec<Cx<T>>> {
    let v = data.eval(z);
    let n = norm(&v);
    if !(n > T::epsilon() * lit(16.0)) {
        return Err(Error::UndefinedAtBranch);
    }
    Ok(v.into_iter().map(|c| c / n).collect())
}

/// Fubini–Study style distance `sqrt(1 - |<a, b>|^2)` between unit vectors.
pub fn projective_distance<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> T {
    let ip = a.iter().zip(b).fold(czero::<T>(), |s, (x, y)| s + x.conj() * *y);
    (T::one() - ip.norm_sqr()).max(T::zero()).sqrt()
}

/// `g = f3 / (f1 - i f2)` for a tuple whose first two components form a pair.
pub fn stereographic_gauss<T: Real>(data: &WeierstrassTuple<T>, z: Cx<T>) -> Result<Cx<T>> {
    if data.dimension() != 3 || data.pairs.len() != 1 {
        return Err(Error::Unsupported("stereographic Gauss map needs a pair plus one component".into()));
    }
    let v = data.eval(z);
    let eta = v[0] - imag_unit::<T>() * v[1];
    if eta == czero() {
        return Err(Error::UndefinedAtBranch);
    }
    Ok(v[2] / eta)
}

/// Linear forms `a` defining hyperplanes `<a, z> = 0` in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneFamily<T: Real> {
    pub linear_forms: Vec<Vec<Cx<T>>>,
}

impl<T: Real> HyperplaneFamily<T> {
    /// Forms pairwise non-proportional and any `n` of them independent.
    pub fn in_general_position(&self) -> bool {
        let Some(n) = self.linear_forms.first().map(|f| f.len()) else {
            return true;
        };
        if self.linear_forms.iter().any(|f| f.len() != n) {
            return false;
        }
        let k = self.linear_forms.len();
        let tol = lit::<T>(1e-10);
        for i in 0..k {
            for j in (i + 1)..k {
                let m = CMatrix::from_rows(&[self.linear_forms[i].clone(), self.linear_forms[j].clone()]);
                if Svd::new(&m).rank(tol) < 2 {
                    return false;
                }
            }
        }
        let size = n.min(k);
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let rows: Vec<Vec<Cx<T>>> = idx.iter().map(|i| self.linear_forms[*i].clone()).collect();
            if Svd::new(&CMatrix::from_rows(&rows)).rank(tol) < size {
                return false;
            }
            // next combination
            let mut i = size;
            loop {
                if i == 0 {
                    return true;
                }
                i -= 1;
                if idx[i] < k - size + i {
                    idx[i] += 1;
                    for j in (i + 1)..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Per plane, min over the points of `|<a, f(z)>| / ‖f(z)‖`.
pub fn hyperplane_margin<T: Real>(data: &WeierstrassTuple<T>, planes: &HyperplaneFamily<T>, points: &[Cx<T>]) -> Vec<T> {
    let values: Vec<Vec<Cx<T>>> = points.iter().map(|z| data.eval(*z)).collect();
    planes
        .linear_forms
        .iter()
        .map(|a| {
            values.iter().fold(T::infinity(), |m, v| {
                let s = a.iter().zip(v).fold(czero::<T>(), |s, (x, y)| s + *x * *y);
                m.min(s.norm() / norm(v))
            })
        })
        .collect()
}

/// Deterministic interior sample points, `count` of them.
pub fn rank_sample_points<T: Real>(domain: &PlanarDomain<T>, count: usize) -> Vec<Cx<T>> {
    let mut out = Vec::with_capacity(count);
    let golden = lit::<T>(2.399_963_229_728_653);
    let mut k = 0usize;
    while out.len() < count && k < 100 * count + 100 {
        let t = lit::<T>((k as f64 + 0.5) / (4.0 * count as f64 + 2.0));
        let r = domain.outer.radius * lit::<T>(0.9) * t.sqrt();
        let z = domain.outer.center + num_complex::Complex::from_polar(r, golden * lit(k as f64));
        if domain.contains(z) {
            out.push(z);
        }
        k += 1;
    }
    out
}

/// Numerical rank of the component-value matrix at `4n` sample points.
pub fn nondegeneracy_rank<T: Real>(data: &WeierstrassTuple<T>) -> usize {
    let n = data.dimension();
    let rows: Vec<Vec<Cx<T>>> = rank_sample_points(&data.domain, 4 * n)
        .into_iter()
        .map(|z| data.eval(z))
        .collect();
    if rows.is_empty() {
        return 0;
    }
    Svd::new(&CMatrix::from_rows(&rows)).rank(lit(1e-9))
}

/// True when the Gauss image lies in no hyperplane.
pub fn nondegeneracy_check<T: Real>(data: &WeierstrassTuple<T>) -> bool {
    nondegeneracy_rank(data) == data.dimension()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{homology_basis, Circle};
    use crate::holofun::FitBasis;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disk() -> PlanarDomain<f64> {
        PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap()
    }

    fn konst(z: Complex64) -> HoloFunction<f64> {
        HoloFunction::constant(z)
    }

    fn minus_z2() -> HoloFunction<f64> {
        HoloFunction::monomial(c(0.0, 0.0), 2, c(-1.0, 0.0))
    }

    pub(crate) fn enneper() -> WeierstrassTuple<f64> {
        let pair = pair_from_eta(&konst(c(1.0, 0.0)), &minus_z2(), &disk()).unwrap();
        assemble_tuple(vec![pair], vec![TailComponent::Holo(HoloFunction::identity())], &disk()).unwrap()
    }

    #[test]
    fn pair_examples() {
        let p = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(1.0, 0.0)), &disk()).unwrap();
        let (a, b) = p.components(c(0.3, 0.2));
        assert!((a - c(1.0, 0.0)).norm() < 1e-15 && b.norm() < 1e-15);

        let p = pair_from_eta(&konst(c(1.0, 0.0)), &minus_z2(), &disk()).unwrap();
        let z = c(0.4, -0.3);
        let (a, b) = p.components(z);
        assert!((a - (1.0 - z * z) / 2.0).norm() < 1e-15);
        assert!((b - c(0.0, 1.0) * (1.0 + z * z) / 2.0).norm() < 1e-15);

        let p = pair_from_eta(&konst(c(2.0, 0.0)), &konst(c(1.0, 0.0)), &disk()).unwrap();
        let (a, b) = p.components(c(0.0, 0.0));
        assert!((a - c(1.25, 0.0)).norm() < 1e-15 && (b - c(0.0, 0.75)).norm() < 1e-15);
        assert!((a * a + b * b - 1.0).norm() < 1e-15);
    }

    #[test]
    fn pole_in_quotient_is_rejected() {
        let e = pair_from_eta(&HoloFunction::identity(), &konst(c(1.0, 0.0)), &disk()).unwrap_err();
        assert_eq!(e.code(), "DIVISOR_MISMATCH");
    }

    #[test]
    fn spray_examples() {
        let base = pair_from_eta(&konst(c(1.0, 0.0)), &minus_z2(), &disk()).unwrap();
        let same = spray_map(&base, &HoloFunction::zero()).unwrap();
        let pts = verification_points(&disk());
        assert!(same.distance_to(&base, &pts) <= 1e-12);
        let basis = FitBasis::for_domain(&disk(), 4);
        let (r1, _) = same.refit_components(&basis, &pts[..400]).unwrap();
        let (o1, _) = base.refit_components(&basis, &pts[..400]).unwrap();
        for (a, b) in r1.coefficients.iter().zip(&o1.coefficients) {
            assert!((a - b).norm() <= 1e-12);
        }

        let one = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(1.0, 0.0)), &disk()).unwrap();
        let s = spray_map(&one, &konst(c(2f64.ln(), 0.0))).unwrap();
        let (a, b) = s.components(c(0.1, 0.1));
        assert!((a - c(1.25, 0.0)).norm() < 1e-15 && (b - c(0.0, 0.75)).norm() < 1e-15);

        let s = spray_map(&base, &HoloFunction::identity()).unwrap();
        assert!(s.nullity_residual(&pts) <= 1e-10);

        let big = spray_map(&base, &konst(c(800.0, 0.0))).unwrap_err();
        assert_eq!(big.code(), "OVERFLOW");
    }

    #[test]
    fn assemble_examples() {
        let d = disk();
        let p1 = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(1.0, 0.0)), &d).unwrap();
        let p2 = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(-1.0, 0.0)), &d).unwrap();
        let t = assemble_tuple(vec![p1.clone(), p2], vec![], &d).unwrap();
        assert_eq!(t.dimension(), 4);
        let p3 = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(-1.0, 0.0)), &d).unwrap();
        let t = assemble_tuple(vec![p3], vec![TailComponent::Holo(konst(c(1.0, 0.0)))], &d).unwrap();
        assert_eq!(t.dimension(), 3);
        assert!(enneper().nullity_residual(&verification_points(&d)) <= 1e-15);
        let bad = assemble_tuple(vec![p1], vec![TailComponent::Holo(konst(c(1.0, 0.0)))], &d).unwrap_err();
        assert_eq!(bad.code(), "NULLITY_VIOLATED");
    }

    #[test]
    fn enneper_immersion_at_one() {
        let imm = Immersion::new(enneper(), c(0.0, 0.0), vec![0.0; 3]).unwrap();
        let path = OrientedCurve::segment(c(0.0, 0.0), c(1.0, 0.0), 64).unwrap();
        let x = integrate_immersion(&imm, c(1.0, 0.0), &path).unwrap();
        let want = [2.0 / 3.0, 0.0, 1.0];
        for (a, b) in x.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12);
        }
        let bent = OrientedCurve::new(vec![c(0.0, 0.0), c(0.5, 0.5), c(1.0, 0.0)], false).unwrap();
        let y = integrate_immersion(&imm, c(1.0, 0.0), &bent.refined(32)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-8);
        }
        let outside = OrientedCurve::segment(c(0.0, 0.0), c(1.5, 0.0), 8).unwrap();
        assert!(integrate_immersion(&imm, c(1.5, 0.0), &outside).is_err());
    }

    fn annulus() -> PlanarDomain<f64> {
        PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.0, 0.0), 0.5)], 64).unwrap()
    }

    #[test]
    fn flux_of_inverse_tuple() {
        let d = annulus();
        let inv = |a: Complex64| TailComponent::Holo(HoloFunction::monomial(c(0.0, 0.0), -1, a).on_domain(&d).unwrap());
        let t = assemble_tuple(vec![], vec![inv(c(1.0, 0.0)), inv(c(0.0, 1.0)), TailComponent::Holo(HoloFunction::zero())], &d)
            .unwrap();
        let unit = HomologyBasis {
            loops: vec![OrientedCurve::circle(c(0.0, 0.0), 1.0, 128, 0.0).unwrap()],
        };
        let fl = flux(&t, &unit).unwrap();
        assert!((fl[0][0] - 2.0 * PI).abs() <= 1e-10);
        assert!(fl[0][1].abs() <= 1e-10 && fl[0][2].abs() <= 1e-10);
        assert!(flux(&enneper(), &homology_basis(&disk())).unwrap().is_empty());
        let exact = assemble_tuple(
            vec![pair_from_eta(&konst(c(1.0, 0.0)), &minus_z2(), &d).unwrap()],
            vec![TailComponent::Holo(HoloFunction::identity())],
            &d,
        )
        .unwrap();
        for v in &flux(&exact, &homology_basis(&d)).unwrap()[0] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_map_examples() {
        let e = enneper();
        let g = gauss_map(&e, c(0.0, 0.0)).unwrap();
        let want = [c(1.0, 0.0) / 2f64.sqrt(), c(0.0, 1.0) / 2f64.sqrt(), c(0.0, 0.0)];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
        let g2 = gauss_map(&e.scaled(c(2.0, 0.0)), c(0.3, 0.1)).unwrap();
        assert!(projective_distance(&g2, &gauss_map(&e, c(0.3, 0.1)).unwrap()) < 1e-7);
        let z = c(0.3, -0.6);
        assert!((stereographic_gauss(&e, z).unwrap() - z).norm() < 1e-15);
        let zero = WeierstrassTuple {
            pairs: vec![],
            tail: vec![TailComponent::Holo(HoloFunction::zero()); 3],
            factor: c(1.0, 0.0),
            domain: disk(),
        };
        assert_eq!(gauss_map(&zero, c(0.0, 0.0)).unwrap_err().code(), "UNDEFINED_AT_BRANCH");
    }

    fn constant_tuple(v: [Complex64; 3]) -> WeierstrassTuple<f64> {
        WeierstrassTuple {
            pairs: vec![],
            tail: v.iter().map(|a| TailComponent::Holo(konst(*a))).collect(),
            factor: c(1.0, 0.0),
            domain: disk(),
        }
    }

    #[test]
    fn margin_examples() {
        let t = constant_tuple([c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let planes = HyperplaneFamily {
            linear_forms: vec![vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]],
        };
        let m = hyperplane_margin(&t, &planes, &[c(0.0, 0.0), c(0.5, 0.1)]);
        assert!((m[0] - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(m[1] < 1e-15);
    }

    #[test]
    fn even_tuple_margins_are_positive() {
        let d = disk();
        let p1 = spray_map(&pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(1.0, 0.0)), &d).unwrap(), &HoloFunction::identity()).unwrap();
        let p2 = pair_from_eta(&konst(c(1.0, 0.0)), &konst(c(-1.0, 0.0)), &d).unwrap();
        let t = assemble_tuple(vec![p1.clone(), p2], vec![], &d).unwrap();
        let planes = HyperplaneFamily {
            linear_forms: vec![
                vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)],
                vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)],
                vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)],
            ],
        };
        let pts = verification_points(&d);
        let m = hyperplane_margin(&t, &planes, &pts);
        assert!(m.iter().all(|x| *x > 0.0));
        // the margin of z1 + i z2 is |H/η| / ‖f‖ pointwise
        let direct = pts
            .iter()
            .map(|z| p1.quot(*z).norm() / norm(&t.eval(*z)))
            .fold(f64::INFINITY, f64::min);
        assert!((direct - m[0]).abs() < 1e-12);
    }

    #[test]
    fn nondegeneracy_examples() {
        assert!(nondegeneracy_check(&enneper()));
        assert_eq!(nondegeneracy_rank(&enneper()), 3);
        let flat = WeierstrassTuple {
            pairs: vec![],
            tail: vec![
                TailComponent::Holo(HoloFunction::identity()),
                TailComponent::Holo(HoloFunction::identity().scale(c(0.0, 1.0))),
                TailComponent::Holo(HoloFunction::zero()),
            ],
            factor: c(1.0, 0.0),
            domain: disk(),
        };
        assert!(!nondegeneracy_check(&flat));
        let dep = WeierstrassTuple {
            pairs: vec![],
            tail: vec![
                TailComponent::Holo(HoloFunction::identity()),
                TailComponent::Holo(HoloFunction::identity().scale(c(2.0, 0.0))),
                TailComponent::Holo(konst(c(1.0, 0.0))),
            ],
            factor: c(1.0, 0.0),
            domain: disk(),
        };
        assert!(!nondegeneracy_check(&dep));
    }

    #[test]
    fn general_position() {
        let ok = HyperplaneFamily {
            linear_forms: vec![
                vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
                vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            ],
        };
        assert!(ok.in_general_position());
        let bad = HyperplaneFamily {
            linear_forms: vec![vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)], vec![c(2.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)]],
        };
        assert!(!bad.in_general_position());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn spray_preserves_h(re in proptest::collection::vec(-1.0f64..1.0, 1..6), im in proptest::collection::vec(-1.0f64..1.0, 1..6)) {
            let n = re.len().min(im.len());
            let h = HoloFunction::polynomial(c(0.0, 0.0), 1.0, (0..n).map(|k| c(re[k], im[k])).collect());
            let base = pair_from_eta(&konst(c(1.0, 0.0)), &minus_z2(), &disk()).unwrap();
            let out = spray_map(&base, &h).unwrap();
            let pts = disk().verification_points(32, 64);
            prop_assert!(out.nullity_residual(&pts) <= 1e-10);
        }

        #[test]
        fn rotation_identity(er in -2.0f64..2.0, ei in -2.0f64..2.0, hr in -2.0f64..2.0, hi in -2.0f64..2.0) {
            prop_assume!(er.abs() + ei.abs() > 1e-3);
            let eta = c(er, ei);
            let hh = c(hr, hi);
            let q = hh / eta;
            let i = c(0.0, 1.0);
            let lhs = [(eta + q) / 2.0, i * (eta - q) / 2.0];
            let v = [(eta - q) / 2.0, i * (eta + q) / 2.0];
            // row vector v times [[0, i], [-i, 0]]
            let rhs = [-i * v[1], i * v[0]];
            prop_assert!((lhs[0] - rhs[0]).norm() <= 1e-12 * (1.0 + q.norm()));
            prop_assert!((lhs[1] - rhs[1]).norm() <= 1e-12 * (1.0 + q.norm()));
        }

        #[test]
        fn gauss_map_is_scale_invariant(cr in -3.0f64..3.0, ci in -3.0f64..3.0, x in -0.7f64..0.7, y in -0.7f64..0.7) {
            prop_assume!(cr.abs() + ci.abs() > 1e-2);
            let e = enneper();
            let z = c(x, y);
            let a = gauss_map(&e, z).unwrap();
            let b = gauss_map(&e.scaled(c(cr, ci)), z).unwrap();
            prop_assert!(projective_distance(&a, &b) <= 1e-7);
        }

        #[test]
        fn eta_extraction_is_identity(re in proptest::collection::vec(-1.0f64..1.0, 1..5)) {
            let eta = HoloFunction::constant(c(1.5, 0.2));
            let h = HoloFunction::polynomial(c(0.0, 0.0), 1.0, re.iter().map(|r| c(*r, 0.0)).collect());
            let p = pair_from_eta(&eta, &h, &disk()).unwrap();
            prop_assert_eq!(p.eta_function().unwrap(), &eta);
        }
    }
}
