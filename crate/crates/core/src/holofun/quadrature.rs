use super::HoloFunction;
use crate::error::{Error, Result};
use crate::geometry::OrientedCurve;
use crate::scalar::{czero, lit, Cx, Real};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    QuadratureRule { nodes, weights }
}

const NODES: usize = 16;
const MAX_SPLIT: usize = 64;

fn polyline_sum<T: Real, F: Fn(Cx<T>) -> Cx<T>>(
    curve: &OrientedCurve<T>,
    f: &F,
    rule: &QuadratureRule,
    split: usize,
) -> Cx<T> {
    let mut total = czero::<T>();
    for (a, b) in curve.segments() {
        let step = (b - a) / lit::<T>(split as f64);
        for s in 0..split {
            let lo = a + step * lit::<T>(s as f64);
            let half = step * lit::<T>(0.5);
            let mid = lo + half;
            let mut acc = czero::<T>();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                acc = acc + f(mid + half * lit::<T>(*x)) * lit::<T>(*w);
            }
            total = total + acc * half;
        }
    }
    total
}

/// `∫_γ f dz` by composite Gauss–Legendre, doubling the sub-segment count
/// until two successive values agree to `1e-10` relative.
pub fn integrate_fn<T: Real, F: Fn(Cx<T>) -> Cx<T>>(curve: &OrientedCurve<T>, f: F) -> Result<Cx<T>> {
    integrate_fn_on(curve, f, &gauss_legendre(NODES))
}

pub fn integrate_fn_on<T: Real, F: Fn(Cx<T>) -> Cx<T>>(
    curve: &OrientedCurve<T>,
    f: F,
    rule: &QuadratureRule,
) -> Result<Cx<T>> {
    let tol = lit::<T>(1e-10).max(T::epsilon() * lit(256.0));
    let mut split = 1;
    let mut prev = polyline_sum(curve, &f, rule, split);
    let mut change = T::infinity();
    while split < MAX_SPLIT {
        split *= 2;
        let next = polyline_sum(curve, &f, rule, split);
        change = (next - prev).norm();
        if change <= tol * next.norm().max(T::one()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        change: change.to_f64().unwrap_or(f64::NAN),
    })
}

fn polyline_sum_vec<T: Real, F: Fn(Cx<T>) -> Vec<Cx<T>>>(
    curve: &OrientedCurve<T>,
    f: &F,
    dim: usize,
    rule: &QuadratureRule,
    split: usize,
) -> Vec<Cx<T>> {
    let mut total = vec![czero::<T>(); dim];
    for (a, b) in curve.segments() {
        let step = (b - a) / lit::<T>(split as f64);
        for s in 0..split {
            let half = step * lit::<T>(0.5);
            let mid = a + step * lit::<T>(s as f64) + half;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let v = f(mid + half * lit::<T>(*x));
                let wh = half * lit::<T>(*w);
                for (t, vi) in total.iter_mut().zip(v) {
                    *t = *t + vi * wh;
                }
            }
        }
    }
    total
}

/// Vector-valued [`integrate_fn`]; convergence is judged on the max norm.
pub fn integrate_vec_fn<T: Real, F: Fn(Cx<T>) -> Vec<Cx<T>>>(
    curve: &OrientedCurve<T>,
    dim: usize,
    f: F,
) -> Result<Vec<Cx<T>>> {
    let rule = gauss_legendre(NODES);
    let tol = lit::<T>(1e-10).max(T::epsilon() * lit(256.0));
    let mut split = 1;
    let mut prev = polyline_sum_vec(curve, &f, dim, &rule, split);
    let mut change = T::infinity();
    while split < MAX_SPLIT {
        split *= 2;
        let next = polyline_sum_vec(curve, &f, dim, &rule, split);
        change = prev.iter().zip(&next).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()));
        let size = next.iter().fold(T::one(), |m, a| m.max(a.norm()));
        if change <= tol * size {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        change: change.to_f64().unwrap_or(f64::NAN),
    })
}

/// `∫_γ f dz` for a function registered on a domain containing the curve.
pub fn integrate_along<T: Real>(f: &HoloFunction<T>, curve: &OrientedCurve<T>) -> Result<Cx<T>> {
    if let Some(d) = f.domain() {
        for v in curve.vertices() {
            if !d.contains_closed(*v) {
                return Err(Error::OutOfDomain {
                    re: v.re.to_f64().unwrap_or(f64::NAN),
                    im: v.im.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    integrate_fn(curve, |z| f.eval(z))
}
