use crate::error::{Error, Result};
use crate::geometry::{homology_basis, OrientedCurve, PlanarDomain};
use crate::holofun::{integrate_vec_fn, HoloFunction};
use crate::linalg::{CMatrix, Svd};
use num_complex::Complex64 as C64;

type Holo = HoloFunction<f64>;

const MAX_ITERATIONS: usize = 60;
const MAX_DEGREE: i32 = 8;
const RCOND: f64 = 1e-12;

/// Nonvanishing density `h = e^u` of the 1-form `θ = h dz`.
#[derive(Clone, Debug)]
pub struct SpecialTheta {
    pub exponent: Holo,
    pub residual: f64,
    pub iterations: usize,
    pub basis_size: usize,
    pub trace: Vec<f64>,
}

impl SpecialTheta {
    pub fn eval(&self, z: C64) -> C64 {
        self.exponent.eval(z).exp()
    }
}

/// Terms `1, (z-c)/R, (r/(z-a))^1, …` ordered by degree, holes interleaved.
fn exponent_basis(domain: &PlanarDomain<f64>) -> Vec<Holo> {
    let one = C64::new(1.0, 0.0);
    let mut out = vec![Holo::constant(one)];
    for k in 1..=MAX_DEGREE {
        out.push(Holo::polynomial(domain.outer.center, domain.outer.radius, {
            let mut v = vec![C64::new(0.0, 0.0); k as usize + 1];
            v[k as usize] = one;
            v
        }));
        for h in &domain.holes {
            out.push(Holo::monomial(h.center, -k, C64::new(h.radius.powi(k), 0.0)));
        }
    }
    out.into_iter()
        .map(|f| f.on_domain(domain).expect("basis centers come from the domain"))
        .collect()
}

struct Constraint<'a> {
    curve: &'a OrientedCurve<f64>,
    target: C64,
}

fn evaluate(u: &Holo, basis: &[Holo], cons: &[Constraint]) -> Result<(Vec<C64>, CMatrix<f64>)> {
    let mut r = Vec::with_capacity(cons.len());
    let mut rows = Vec::with_capacity(cons.len());
    for c in cons {
        let v = integrate_vec_fn(c.curve, basis.len() + 1, |z| {
            let h = u.eval(z).exp();
            let mut row = Vec::with_capacity(basis.len() + 1);
            row.push(h);
            row.extend(basis.iter().map(|b| b.eval(z) * h));
            row
        })?;
        r.push(v[0] - c.target);
        rows.push(v[1..].to_vec());
    }
    Ok((r, CMatrix::from_rows(&rows)))
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves for `u` so that `∮ e^u dz` over the hole loops and `∫ e^u dz` over
/// the arcs meet the targets, growing the basis until Newton converges.
pub fn special_theta(
    domain: &PlanarDomain<f64>,
    loop_periods: &[C64],
    arc_integrals: &[(OrientedCurve<f64>, C64)],
    tol: f64,
) -> Result<SpecialTheta> {
    let loops = homology_basis(domain).loops;
    if loop_periods.len() != loops.len() {
        return Err(Error::Config(format!("{} loop periods for {} holes", loop_periods.len(), loops.len())));
    }
    let mut cons: Vec<Constraint> = arc_integrals.iter().map(|(c, t)| Constraint { curve: c, target: *t }).collect();
    cons.extend(loops.iter().zip(loop_periods).map(|(c, t)| Constraint { curve: c, target: *t }));
    let full = exponent_basis(domain);
    if cons.is_empty() {
        return Ok(SpecialTheta {
            exponent: Holo::zero().on_domain(domain)?,
            residual: 0.0,
            iterations: 0,
            basis_size: 0,
            trace: Vec::new(),
        });
    }
    let scale = cons.iter().fold(1.0f64, |m, c| m.max(c.target.norm()));
    let mut last = Error::NoConvergence {
        residual: f64::INFINITY,
        iterations: 0,
        trace: Vec::new(),
    };
    for size in cons.len().min(full.len())..=full.len() {
        let basis = &full[..size];
        match newton(basis, &cons, tol * scale) {
            Ok((coeffs, trace)) => {
                let mut u = Holo::zero().on_domain(domain)?;
                for (b, c) in basis.iter().zip(&coeffs) {
                    u = u.add(&b.scale(*c));
                }
                let residual = *trace.last().unwrap_or(&0.0);
                return Ok(SpecialTheta {
                    exponent: u,
                    residual,
                    iterations: trace.len() - 1,
                    basis_size: size,
                    trace,
                });
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Damped min-norm Newton from `u = 0`; returns coefficients and the trace.
fn newton(basis: &[Holo], cons: &[Constraint], tol: f64) -> Result<(Vec<C64>, Vec<f64>)> {
    let combine = |c: &[C64]| {
        basis
            .iter()
            .zip(c)
            .fold(Holo::zero(), |acc, (b, x)| acc.add(&b.scale(*x)))
    };
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    let (mut r, mut jac) = evaluate(&combine(&coeffs), basis, cons)?;
    let mut trace = vec![norm(&r)];
    for _ in 0..MAX_ITERATIONS {
        if *trace.last().unwrap() <= tol {
            return Ok((coeffs, trace));
        }
        let svd = Svd::new(&jac);
        if svd.rank(RCOND) < cons.len() {
            break;
        }
        let neg: Vec<C64> = r.iter().map(|x| -x).collect();
        let step = svd.solve(&neg, RCOND);
        let current = *trace.last().unwrap();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let trial: Vec<C64> = coeffs.iter().zip(&step).map(|(c, s)| c + s * t).collect();
            let u = combine(&trial);
            if let Ok((r2, j2)) = evaluate(&u, basis, cons) {
                if norm(&r2) < current {
                    accepted = Some((trial, r2, j2));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((c2, r2, j2)) = accepted else { break };
        coeffs = c2;
        r = r2;
        jac = j2;
        trace.push(norm(&r));
    }
    Err(Error::NoConvergence {
        residual: *trace.last().unwrap(),
        iterations: trace.len() - 1,
        trace,
    })
}
