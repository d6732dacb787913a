use super::{binom, Expansion, HoloFunction};
use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::linalg::{solve_upper_adjoint, CMatrix, Qr, Svd};
use crate::scalar::{czero, lit, Cx, Real};

/// Prescribed Taylor coefficients `target[0..=k]` at `point`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetConstraint<T: Real> {
    pub point: Cx<T>,
    pub target: Vec<Cx<T>>,
}

impl<T: Real> JetConstraint<T> {
    pub fn order(&self) -> usize {
        self.target.len().saturating_sub(1)
    }
}

/// `((z - center) / scale)^power`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisTerm<T: Real> {
    pub center: Cx<T>,
    pub scale: T,
    pub power: i32,
}

impl<T: Real> BasisTerm<T> {
    /// `m`-th Taylor coefficient at `p`.
    fn jet(&self, p: Cx<T>, m: usize) -> Cx<T> {
        let w = (p - self.center) / self.scale;
        let k = self.power;
        if k >= 0 && m as i32 > k {
            return czero();
        }
        w.powi(k - m as i32) * binom::<T>(k, m) / self.scale.powi(m as i32)
    }
}

/// Laurent basis for least-squares fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct FitBasis<T: Real> {
    pub terms: Vec<BasisTerm<T>>,
    pub domain: Option<PlanarDomain<T>>,
}

impl<T: Real> FitBasis<T> {
    /// Powers `0..=degree` about `center`.
    pub fn polynomial(center: Cx<T>, scale: T, degree: usize) -> Self {
        Self {
            terms: (0..=degree as i32)
                .map(|power| BasisTerm { center, scale, power })
                .collect(),
            domain: None,
        }
    }

    /// Polynomial part about the outer center plus powers `-1..=-laurent`
    /// about every hole center.
    pub fn laurent(domain: &PlanarDomain<T>, degree: usize, laurent: usize) -> Self {
        let mut b = Self::polynomial(domain.outer.center, domain.outer.radius, degree);
        for h in &domain.holes {
            for k in 1..=laurent as i32 {
                b.terms.push(BasisTerm {
                    center: h.center,
                    scale: h.radius,
                    power: -k,
                });
            }
        }
        b.domain = Some(domain.clone());
        b
    }

    pub fn for_domain(domain: &PlanarDomain<T>, degree: usize) -> Self {
        Self::laurent(domain, degree, degree)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval_row(&self, z: Cx<T>) -> Vec<Cx<T>> {
        self.terms
            .iter()
            .map(|t| ((z - t.center) / t.scale).powi(t.power))
            .collect()
    }

    pub fn jet_row(&self, p: Cx<T>, m: usize) -> Vec<Cx<T>> {
        self.terms.iter().map(|t| t.jet(p, m)).collect()
    }

    pub fn to_holo(&self, coeffs: &[Cx<T>]) -> HoloFunction<T> {
        let mut groups: Vec<(Cx<T>, T, Vec<(i32, Cx<T>)>)> = Vec::new();
        for (t, c) in self.terms.iter().zip(coeffs) {
            match groups
                .iter_mut()
                .find(|g| g.0 == t.center && g.1 == t.scale)
            {
                Some(g) => g.2.push((t.power, *c)),
                None => groups.push((t.center, t.scale, vec![(t.power, *c)])),
            }
        }
        let expansions = groups
            .into_iter()
            .map(|(center, scale, terms)| {
                let lo = terms.iter().map(|t| t.0).min().unwrap();
                let hi = terms.iter().map(|t| t.0).max().unwrap();
                let mut coeffs = vec![czero(); (hi - lo + 1) as usize];
                for (k, c) in terms {
                    coeffs[(k - lo) as usize] = coeffs[(k - lo) as usize] + c;
                }
                Expansion {
                    center,
                    scale,
                    min_pow: lo,
                    coeffs,
                }
            })
            .collect();
        HoloFunction::from_expansions(expansions, self.domain.clone())
            .expect("basis Laurent centers are hole centers")
    }
}

#[derive(Clone, Debug)]
pub struct FitResult<T: Real> {
    pub function: HoloFunction<T>,
    pub coefficients: Vec<Cx<T>>,
    /// Max |f(z) - target| over the samples.
    pub max_residual: T,
    /// Root-mean-square sample residual (the least-squares objective).
    pub rms_residual: T,
    /// Max violation of the normalized constraint rows.
    pub constraint_residual: T,
}

const RCOND: f64 = 1e-13;
const MAX_CONDITION: f64 = 1e12;

/// Least squares over `basis` with jet constraints and zero divisor imposed
/// exactly by null-space elimination.
pub fn mergelyan_fit<T: Real>(
    samples: &[(Cx<T>, Cx<T>)],
    weights: Option<&[T]>,
    constraints: &[JetConstraint<T>],
    zero_divisor: &[(Cx<T>, usize)],
    basis: &FitBasis<T>,
) -> Result<FitResult<T>> {
    let n = basis.len();
    if let Some(d) = &basis.domain {
        for (z, _) in samples {
            if !d.contains_closed(*z) {
                return Err(Error::OutOfDomain {
                    re: z.re.to_f64().unwrap_or(f64::NAN),
                    im: z.im.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let mut pts: Vec<Cx<T>> = constraints.iter().map(|c| c.point).collect();
    pts.extend(zero_divisor.iter().map(|z| z.0));
    for i in 0..pts.len() {
        for j in 0..i {
            if pts[i] == pts[j] {
                return Err(Error::Underdetermined("constraint points are not distinct".into()));
            }
        }
    }

    // constraint rows, each normalized to unit max entry
    let mut c_rows: Vec<Vec<Cx<T>>> = Vec::new();
    let mut d: Vec<Cx<T>> = Vec::new();
    let jets = constraints
        .iter()
        .flat_map(|c| c.target.iter().enumerate().map(move |(m, t)| (c.point, m, *t)))
        .chain(
            zero_divisor
                .iter()
                .flat_map(|(p, mult)| (0..*mult).map(move |m| (*p, m, czero()))),
        );
    for (p, m, t) in jets {
        let row = basis.jet_row(p, m);
        let s = row.iter().fold(T::zero(), |a, c| a.max(c.norm()));
        if s == T::zero() {
            return Err(Error::Underdetermined(format!("basis cannot carry a jet of order {m}")));
        }
        c_rows.push(row.iter().map(|c| *c / s).collect());
        d.push(t / s);
    }
    let m = c_rows.len();
    if m > n {
        return Err(Error::Underdetermined(format!("{m} constraints for {n} basis functions")));
    }

    let mut a = CMatrix::zeros(samples.len(), n);
    let mut b = vec![czero::<T>(); samples.len()];
    for (i, (z, v)) in samples.iter().enumerate() {
        let w = weights.map(|w| w[i].sqrt()).unwrap_or_else(T::one);
        for (j, e) in basis.eval_row(*z).into_iter().enumerate() {
            a[(i, j)] = e * w;
        }
        b[i] = *v * w;
    }

    let coeffs = if m == 0 {
        if samples.is_empty() {
            vec![czero(); n]
        } else {
            Svd::new(&a).solve(&b, lit(RCOND))
        }
    } else {
        let cmat = CMatrix::from_rows(&c_rows);
        let cond = Svd::new(&cmat).condition();
        if !(cond <= lit(MAX_CONDITION)) {
            return Err(Error::IllConditioned {
                condition: cond.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        let qr = Qr::new(&cmat.adjoint());
        let r = qr.r();
        let y1 = solve_upper_adjoint(&r, &d).ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let q = qr.q_full();
        let mut x = vec![czero::<T>(); n];
        for (j, y) in y1.iter().enumerate() {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = *xi + q[(i, j)] * *y;
            }
        }
        if m < n && !samples.is_empty() {
            let q2 = q.columns(m, n);
            let aq2 = a.mul(&q2);
            let ax1 = a.mul_vec(&x);
            let rhs: Vec<Cx<T>> = b.iter().zip(&ax1).map(|(bi, ai)| *bi - *ai).collect();
            let y2 = Svd::new(&aq2).solve(&rhs, lit(RCOND));
            let x2 = q2.mul_vec(&y2);
            for (xi, di) in x.iter_mut().zip(x2) {
                *xi = *xi + di;
            }
            // the null-space component leaks into the constraints at the
            // size of the coefficients; pull it back with the range basis
            for _ in 0..2 {
                let cx = cmat.mul_vec(&x);
                let defect: Vec<Cx<T>> = d.iter().zip(&cx).map(|(di, ci)| *di - *ci).collect();
                let Some(dy) = solve_upper_adjoint(&r, &defect) else { break };
                for (j, y) in dy.iter().enumerate() {
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = *xi + q[(i, j)] * *y;
                    }
                }
            }
        }
        x
    };

    let function = basis.to_holo(&coeffs);
    let mut max_residual = T::zero();
    let mut sq = T::zero();
    for (z, v) in samples {
        let e = (function.eval(*z) - *v).norm();
        max_residual = max_residual.max(e);
        sq = sq + e * e;
    }
    let rms_residual = if samples.is_empty() {
        T::zero()
    } else {
        (sq / lit(samples.len() as f64)).sqrt()
    };
    let mut constraint_residual = T::zero();
    for (row, t) in c_rows.iter().zip(&d) {
        let v = row.iter().zip(&coeffs).fold(czero::<T>(), |acc, (r, c)| acc + *r * *c);
        constraint_residual = constraint_residual.max((v - *t).norm());
    }
    Ok(FitResult {
        function,
        coefficients: coeffs,
        max_residual,
        rms_residual,
        constraint_residual,
    })
}

/// Fit over the default Laurent basis of `domain` at the given degree.
pub fn mergelyan_fit_degree<T: Real>(
    domain: &PlanarDomain<T>,
    samples: &[(Cx<T>, Cx<T>)],
    constraints: &[JetConstraint<T>],
    zero_divisor: &[(Cx<T>, usize)],
    degree: usize,
) -> Result<FitResult<T>> {
    mergelyan_fit(samples, None, constraints, zero_divisor, &FitBasis::for_domain(domain, degree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Circle;
    use crate::holofun::taylor_coefficients_at;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disk_points(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::from_polar(rng.gen_range(0.0f64..1.0).sqrt() * 0.95, rng.gen_range(0.0..6.3)))
            .collect()
    }

    fn disk() -> PlanarDomain<f64> {
        PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn recovers_identity() {
        let s: Vec<_> = disk_points(50, 1).into_iter().map(|z| (z, z)).collect();
        let r = mergelyan_fit_degree(&disk(), &s, &[], &[], 3).unwrap();
        let want = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        for (a, w) in r.coefficients.iter().zip(want) {
            assert!((a - w).norm() < 1e-12);
        }
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn double_zero_forces_subspace_minimum() {
        let pts = disk_points(50, 1);
        let s: Vec<_> = pts.iter().map(|z| (*z, *z)).collect();
        let r = mergelyan_fit_degree(&disk(), &s, &[], &[(c(0.0, 0.0), 2)], 3).unwrap();
        assert!(r.coefficients[0].norm() < 1e-14 && r.coefficients[1].norm() < 1e-14);
        // oracle: unconstrained fit over {z^2, z^3}
        let sub = FitBasis {
            terms: vec![
                BasisTerm { center: c(0.0, 0.0), scale: 1.0, power: 2 },
                BasisTerm { center: c(0.0, 0.0), scale: 1.0, power: 3 },
            ],
            domain: None,
        };
        let o = mergelyan_fit(&s, None, &[], &[], &sub).unwrap();
        assert!((o.rms_residual - r.rms_residual).abs() < 1e-12);
    }

    #[test]
    fn recovers_inverse_on_annulus() {
        let dom = PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.0, 0.0), 0.5)], 64).unwrap();
        let mut s = Vec::new();
        for k in 0..80 {
            let th = k as f64 * 0.37;
            let r = 0.6 + 1.3 * (k as f64 / 80.0);
            let z = Complex64::from_polar(r, th);
            s.push((z, 1.0 / z));
        }
        let basis = FitBasis::laurent(&dom, 3, 3);
        let r = mergelyan_fit(&s, None, &[], &[], &basis).unwrap();
        let f = &r.function;
        for e in f.expansions() {
            for k in e.min_pow..=e.max_pow() {
                let raw = e.coeff(k) / e.scale.powi(k);
                let want = if k == -1 { 1.0 } else { 0.0 };
                assert!((raw - want).norm() < 1e-10, "k={k}");
            }
        }
    }

    #[test]
    fn error_paths() {
        let s = vec![(c(0.1, 0.0), c(1.0, 0.0))];
        let e = mergelyan_fit_degree(&disk(), &s, &[], &[(c(0.0, 0.0), 5)], 3).unwrap_err();
        assert_eq!(e.code(), "UNDERDETERMINED");
        // two nearly coincident double zeros make the constraint system singular
        let e = mergelyan_fit_degree(&disk(), &s, &[], &[(c(0.0, 0.0), 2), (c(1e-9, 0.0), 2)], 6).unwrap_err();
        assert_eq!(e.code(), "ILL_CONDITIONED");
    }

    #[test]
    fn residual_decreases_with_degree() {
        let s: Vec<_> = disk_points(200, 3).into_iter().map(|z| (z, (z * 2.0).exp())).collect();
        let mut last = f64::INFINITY;
        for deg in [4, 8, 16] {
            let r = mergelyan_fit_degree(&disk(), &s, &[], &[], deg).unwrap();
            assert!(r.rms_residual <= last + 1e-14);
            last = r.rms_residual;
        }
    }

    proptest! {
        #[test]
        fn jet_constraints_are_exact_under_noise(
            seed in 0u64..1000,
            noise in 0.0f64..1.0,
            t0 in -1.0f64..1.0, t1 in -1.0f64..1.0,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<_> = disk_points(60, seed)
                .into_iter()
                .map(|z| (z, z.sin() + c(rng.gen_range(-noise..=noise), rng.gen_range(-noise..=noise))))
                .collect();
            let p = c(0.2, -0.1);
            let jet = JetConstraint { point: p, target: vec![c(t0, 0.0), c(0.0, t1)] };
            let r = mergelyan_fit_degree(&disk(), &s, &[jet], &[(c(-0.4, 0.3), 2)], 10).unwrap();
            let tc = taylor_coefficients_at(&r.function, p, 2).unwrap();
            prop_assert!((tc[0] - c(t0, 0.0)).norm() < 1e-12);
            prop_assert!((tc[1] - c(0.0, t1)).norm() < 1e-12);
            let z = c(-0.4, 0.3);
            prop_assert!(r.function.eval(z).norm() < 1e-12);
            prop_assert!(r.function.derivative().eval(z).norm() < 1e-12);
        }
    }
}
