use super::fit::{mergelyan_fit, FitBasis, FitResult};
use crate::error::{Error, Result};
use crate::geometry::OrientedCurve;
use crate::scalar::{lit, Cx, Real};
use num_complex::Complex;

/// Cosine-squared bump in the curve parameter with unit integral.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpFunction<T: Real> {
    pub curve: OrientedCurve<T>,
    pub center_param: T,
    pub halfwidth: T,
}

pub fn make_bump<T: Real>(curve: &OrientedCurve<T>, t_center: T, rho: T) -> Result<BumpFunction<T>> {
    if !(rho > T::zero()) || !(t_center - rho > T::zero()) || !(t_center + rho < T::one()) {
        return Err(Error::SupportOutOfRange(format!(
            "[{:.4}, {:.4}] is not inside (0, 1)",
            (t_center - rho).to_f64().unwrap_or(f64::NAN),
            (t_center + rho).to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(BumpFunction {
        curve: curve.clone(),
        center_param: t_center,
        halfwidth: rho,
    })
}

impl<T: Real> BumpFunction<T> {
    pub fn profile(&self, t: T) -> T {
        let s = (t - self.center_param) / self.halfwidth;
        if s.abs() >= T::one() {
            return T::zero();
        }
        let c = (T::FRAC_PI_2() * s).cos();
        c * c / self.halfwidth
    }

    pub fn support(&self) -> (T, T) {
        (self.center_param - self.halfwidth, self.center_param + self.halfwidth)
    }

    pub fn sup(&self) -> T {
        T::one() / self.halfwidth
    }

    pub fn disjoint_from(&self, other: &Self) -> bool {
        let (a0, a1) = self.support();
        let (b0, b1) = other.support();
        a1 <= b0 || b1 <= a0
    }

    pub fn anchor(&self) -> Cx<T> {
        self.curve.point_at(self.center_param)
    }
}

/// Sample layout for turning a bump into a holomorphic function.
#[derive(Clone, Debug)]
pub struct BumpFitOptions<T: Real> {
    pub basis: FitBasis<T>,
    pub samples: usize,
    /// Curves on which the function should be close to zero.
    pub other_curves: Vec<OrientedCurve<T>>,
    /// Points (typically on the boundary) pulled towards zero with `boundary_weight`.
    pub boundary: Vec<Cx<T>>,
    pub boundary_weight: T,
}

impl<T: Real> BumpFitOptions<T> {
    pub fn new(basis: FitBasis<T>) -> Self {
        Self {
            basis,
            samples: 400,
            other_curves: Vec::new(),
            boundary: Vec::new(),
            boundary_weight: T::zero(),
        }
    }
}

/// Holomorphic approximation of a bump along its curve with exact zeros.
/// Jet points `(p, k)` become zeros of multiplicity `k`.
pub fn smooth_bump_to_holo<T: Real>(
    b: &BumpFunction<T>,
    zero_divisor: &[(Cx<T>, usize)],
    jet_points: &[(Cx<T>, usize)],
    opts: &BumpFitOptions<T>,
) -> Result<FitResult<T>> {
    let n = opts.samples.max(8);
    let mut samples = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let t = lit::<T>((i as f64 + 0.5) / n as f64);
        samples.push((b.curve.point_at(t), Complex::new(b.profile(t), T::zero())));
        weights.push(T::one());
    }
    for other in &opts.other_curves {
        for i in 0..n {
            let t = lit::<T>((i as f64 + 0.5) / n as f64);
            samples.push((other.point_at(t), Complex::new(T::zero(), T::zero())));
            weights.push(T::one());
        }
    }
    if opts.boundary_weight > T::zero() {
        for z in &opts.boundary {
            samples.push((*z, Complex::new(T::zero(), T::zero())));
            weights.push(opts.boundary_weight);
        }
    }
    let mut divisor: Vec<(Cx<T>, usize)> = Vec::new();
    for (p, k) in zero_divisor.iter().chain(jet_points) {
        if *k == 0 {
            continue;
        }
        match divisor.iter_mut().find(|d| d.0 == *p) {
            Some(d) => d.1 = d.1.max(*k),
            None => divisor.push((*p, *k)),
        }
    }
    let (t0, t1) = b.support();
    for (p, _) in &divisor {
        let steps = 256;
        for i in 0..=steps {
            let t = t0 + (t1 - t0) * lit::<T>(i as f64 / steps as f64);
            if (b.curve.point_at(t) - *p).norm() <= T::epsilon() * lit(1e3) {
                return Err(Error::SupportOutOfRange("zero divisor point lies on the bump support".into()));
            }
        }
    }
    let mut fit = mergelyan_fit(&samples, Some(&weights), &[], &divisor, &opts.basis)?;
    // report the residual on the bump's own curve only
    let mut res = T::zero();
    for (z, v) in samples.iter().take(n) {
        res = res.max((fit.function.eval(*z) - *v).norm());
    }
    fit.max_residual = res;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarDomain;
    use crate::holofun::quadrature::gauss_legendre;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn segment() -> OrientedCurve<f64> {
        OrientedCurve::segment(c(-0.9, 0.0), c(0.9, 0.0), 64).unwrap()
    }

    fn profile_integral(b: &BumpFunction<f64>) -> f64 {
        let rule = gauss_legendre(32);
        let (lo, hi) = b.support();
        let pieces = 16;
        let mut s = 0.0;
        for p in 0..pieces {
            let a = lo + (hi - lo) * p as f64 / pieces as f64;
            let h = (hi - lo) / pieces as f64 / 2.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += w * h * b.profile(a + h + h * x);
            }
        }
        s
    }

    #[test]
    fn bump_support_and_mass() {
        let b = make_bump(&segment(), 0.5, 0.1).unwrap();
        assert_eq!(b.profile(0.39), 0.0);
        assert_eq!(b.profile(0.61), 0.0);
        assert!((profile_integral(&b) - 1.0).abs() < 1e-10);
        let narrow = make_bump(&segment(), 0.5, 0.05).unwrap();
        assert!((narrow.profile(0.5) / b.profile(0.5) - 2.0).abs() < 1e-12);
        assert!((profile_integral(&narrow) - 1.0).abs() < 1e-10);
        let l = make_bump(&segment(), 0.3, 0.1).unwrap();
        let r = make_bump(&segment(), 0.7, 0.1).unwrap();
        assert!(l.disjoint_from(&r));
    }

    #[test]
    fn bump_out_of_range() {
        assert_eq!(make_bump(&segment(), 0.05, 0.1).unwrap_err().code(), "SUPPORT_OUT_OF_RANGE");
        assert!(make_bump(&segment(), 0.5, 0.0).is_err());
        assert!(make_bump(&segment(), 0.95, 0.1).is_err());
    }

    #[test]
    fn bump_fit_on_segment() {
        let dom = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        let b = make_bump(&segment(), 0.5, 0.4).unwrap();
        let opts = BumpFitOptions::new(FitBasis::for_domain(&dom, 40));
        let fit = smooth_bump_to_holo(&b, &[], &[], &opts).unwrap();
        assert!(fit.max_residual <= 1e-3, "{}", fit.max_residual);

        let p = c(0.0, 0.5);
        let fit = smooth_bump_to_holo(&b, &[(p, 2)], &[], &opts).unwrap();
        assert!(fit.function.eval(p).norm() <= 1e-12);
        assert!(fit.function.derivative().eval(p).norm() <= 1e-12);
    }

    #[test]
    fn divisor_on_support_is_rejected() {
        let dom = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        let b = make_bump(&segment(), 0.5, 0.2).unwrap();
        let opts = BumpFitOptions::new(FitBasis::for_domain(&dom, 10));
        assert!(smooth_bump_to_holo(&b, &[(c(0.0, 0.0), 1)], &[], &opts).is_err());
    }
}
