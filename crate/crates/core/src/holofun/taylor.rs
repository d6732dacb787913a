use super::HoloFunction;
use crate::error::{Error, Result};
use crate::scalar::{czero, lit, Cx, Real};
use num_complex::Complex;

/// Magnitude below which a Taylor coefficient counts as zero.
pub const JET_TOL: f64 = 1e-9;

/// First `count` Taylor coefficients of `f` at `p` by the trapezoidal rule on
/// the circle `|z - p| = radius`.
pub fn taylor_coefficients<T: Real, F: Fn(Cx<T>) -> Cx<T>>(f: F, p: Cx<T>, radius: T, count: usize) -> Vec<Cx<T>> {
    let n = (4 * count).max(128);
    let tau = T::PI() * lit(2.0);
    let mut out = vec![czero::<T>(); count];
    for j in 0..n {
        let theta = tau * lit::<T>(j as f64 / n as f64);
        let unit = Complex::from_polar(T::one(), theta);
        let v = f(p + unit * radius);
        // v * (r e^{iθ})^{-m}
        let mut w = v;
        let step = unit.conj() / radius;
        for c in out.iter_mut() {
            *c = *c + w;
            w = w * step;
        }
    }
    let inv_n = lit::<T>(1.0 / n as f64);
    out.iter().map(|c| *c * inv_n).collect()
}

/// Taylor coefficients of a registered function at an interior point, on a
/// circle of half the distance to the domain boundary.
pub fn taylor_coefficients_at<T: Real>(f: &HoloFunction<T>, p: Cx<T>, count: usize) -> Result<Vec<Cx<T>>> {
    let radius = sampling_radius(f, p)?;
    Ok(taylor_coefficients(|z| f.eval(z), p, radius, count))
}

fn sampling_radius<T: Real>(f: &HoloFunction<T>, p: Cx<T>) -> Result<T> {
    let out = || Error::OutOfDomain {
        re: p.re.to_f64().unwrap_or(f64::NAN),
        im: p.im.to_f64().unwrap_or(f64::NAN),
    };
    let mut r = match f.domain() {
        Some(d) => {
            if !d.contains(p) {
                return Err(out());
            }
            d.boundary_distance(p) * lit(0.5)
        }
        None => T::one(),
    };
    for e in f.expansions() {
        if e.min_pow < 0 {
            let d = (p - e.center).norm();
            if d == T::zero() {
                return Err(out());
            }
            r = r.min(d * lit(0.5));
        }
    }
    Ok(r)
}

/// Order of vanishing of `f` at `p`, capped at `max`.
pub fn zero_multiplicity<T: Real>(f: &HoloFunction<T>, p: Cx<T>, max: usize) -> Result<usize> {
    let coeffs = taylor_coefficients_at(f, p, max)?;
    Ok(coeffs
        .iter()
        .position(|c| c.norm() > lit(JET_TOL))
        .unwrap_or(max))
}

/// Largest `k <= max_order` such that the first `k + 1` Taylor coefficients
/// of `f - g` at `p` vanish; `None` when `f(p) != g(p)`.
pub fn jet_contact_order<T: Real>(
    f: &HoloFunction<T>,
    g: &HoloFunction<T>,
    p: Cx<T>,
    max_order: usize,
) -> Result<Option<usize>> {
    let d = f.sub(g);
    let m = zero_multiplicity(&d, p, max_order + 1)?;
    Ok(m.checked_sub(1))
}
