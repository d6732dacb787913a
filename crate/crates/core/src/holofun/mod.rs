//! Truncated power/Laurent series on circular domains.

mod bump;
mod fit;
mod quadrature;
mod taylor;

pub use bump::{make_bump, smooth_bump_to_holo, BumpFitOptions, BumpFunction};
pub use fit::{mergelyan_fit, mergelyan_fit_degree, BasisTerm, FitBasis, FitResult, JetConstraint};
pub use quadrature::{gauss_legendre, integrate_along, integrate_fn, integrate_fn_on, integrate_vec_fn, QuadratureRule};
pub use taylor::{jet_contact_order, taylor_coefficients, taylor_coefficients_at, zero_multiplicity, JET_TOL};

use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::scalar::{cone, czero, lit, Cx, Real};
use std::collections::BTreeMap;

/// `sum_k coeffs[k - min_pow] * ((z - center) / scale)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion<T: Real> {
    pub center: Cx<T>,
    pub scale: T,
    pub min_pow: i32,
    pub coeffs: Vec<Cx<T>>,
}

impl<T: Real> Expansion<T> {
    pub fn max_pow(&self) -> i32 {
        self.min_pow + self.coeffs.len() as i32 - 1
    }

    pub fn has_negative_powers(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .any(|(i, c)| self.min_pow + (i as i32) < 0 && *c != czero())
    }

    /// Coefficient of `w^k`.
    pub fn coeff(&self, k: i32) -> Cx<T> {
        let i = k - self.min_pow;
        if i < 0 || i as usize >= self.coeffs.len() {
            czero()
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn eval(&self, z: Cx<T>) -> Cx<T> {
        let w = (z - self.center) / self.scale;
        let mut pos = czero::<T>();
        let mut neg = czero::<T>();
        let split = (-self.min_pow).max(0) as usize;
        // nonnegative powers by Horner in w
        for i in (split.min(self.coeffs.len())..self.coeffs.len()).rev() {
            pos = pos * w + self.coeffs[i];
        }
        if self.min_pow > 0 {
            pos = pos * w.powi(self.min_pow);
        }
        if split > 0 {
            let inv = cone::<T>() / w;
            // powers -1 down to min_pow by Horner in 1/w
            for i in 0..split.min(self.coeffs.len()) {
                neg = neg * inv + self.coeffs[i];
            }
            let top = self.min_pow + split.min(self.coeffs.len()) as i32 - 1;
            neg = neg * inv.powi(-top);
        }
        pos + neg
    }

    fn from_map(center: Cx<T>, scale: T, map: &BTreeMap<i32, Cx<T>>) -> Option<Self> {
        let lo = *map.keys().next()?;
        let hi = *map.keys().next_back()?;
        let mut coeffs = vec![czero(); (hi - lo + 1) as usize];
        for (k, c) in map {
            coeffs[(k - lo) as usize] = *c;
        }
        Some(Self {
            center,
            scale,
            min_pow: lo,
            coeffs,
        })
    }
}

/// Holomorphic function given by finitely many expansions, optionally
/// registered on a domain whose hole centers carry the Laurent parts.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloFunction<T: Real> {
    expansions: Vec<Expansion<T>>,
    domain: Option<PlanarDomain<T>>,
}

impl<T: Real> Default for HoloFunction<T> {
    fn default() -> Self {
        Self::zero()
    }
}

fn same_point<T: Real>(a: Cx<T>, b: Cx<T>) -> bool {
    a == b
}

impl<T: Real> HoloFunction<T> {
    pub fn zero() -> Self {
        Self {
            expansions: Vec::new(),
            domain: None,
        }
    }

    pub fn constant(c: Cx<T>) -> Self {
        Self::polynomial(czero(), T::one(), vec![c])
    }

    /// The identity function `z`.
    pub fn identity() -> Self {
        Self::polynomial(czero(), T::one(), vec![czero(), cone()])
    }

    /// `sum_k coeffs[k] * ((z - center) / scale)^k`.
    pub fn polynomial(center: Cx<T>, scale: T, coeffs: Vec<Cx<T>>) -> Self {
        Self {
            expansions: vec![Expansion {
                center,
                scale,
                min_pow: 0,
                coeffs,
            }],
            domain: None,
        }
    }

    /// `c * (z - center)^power`.
    pub fn monomial(center: Cx<T>, power: i32, c: Cx<T>) -> Self {
        Self {
            expansions: vec![Expansion {
                center,
                scale: T::one(),
                min_pow: power,
                coeffs: vec![c],
            }],
            domain: None,
        }
    }

    /// Builds from raw expansions; Laurent parts require a registered domain.
    pub fn from_expansions(expansions: Vec<Expansion<T>>, domain: Option<PlanarDomain<T>>) -> Result<Self> {
        let f = Self { expansions, domain };
        f.check_laurent_centers()?;
        Ok(f)
    }

    fn check_laurent_centers(&self) -> Result<()> {
        for e in &self.expansions {
            if !(e.scale > T::zero()) {
                return Err(Error::GeometryInvalid("expansion scale must be positive".into()));
            }
            if e.has_negative_powers() {
                let ok = self
                    .domain
                    .as_ref()
                    .map(|d| d.holes.iter().any(|h| same_point(h.center, e.center)))
                    .unwrap_or(false);
                if !ok {
                    return Err(Error::GeometryInvalid(
                        "Laurent terms are only allowed at hole centers of the registered domain".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Registers a domain, validating the Laurent centers against it.
    pub fn on_domain(mut self, domain: &PlanarDomain<T>) -> Result<Self> {
        self.domain = Some(domain.clone());
        self.check_laurent_centers()?;
        Ok(self)
    }

    pub fn domain(&self) -> Option<&PlanarDomain<T>> {
        self.domain.as_ref()
    }

    pub fn expansions(&self) -> &[Expansion<T>] {
        &self.expansions
    }

    pub fn has_laurent_terms(&self) -> bool {
        self.expansions.iter().any(|e| e.has_negative_powers())
    }

    /// True if the function has no expansions or only zero coefficients.
    pub fn is_zero(&self) -> bool {
        self.expansions.iter().all(|e| e.coeffs.iter().all(|c| *c == czero()))
    }

    pub fn max_abs_coeff(&self) -> T {
        self.expansions
            .iter()
            .flat_map(|e| e.coeffs.iter())
            .fold(T::zero(), |m, c| m.max(c.norm()))
    }

    /// Evaluation on the closed domain minus open holes.
    pub fn evaluate(&self, z: Cx<T>) -> Result<Cx<T>> {
        if let Some(d) = &self.domain {
            if !d.contains_closed(z) {
                return Err(Error::OutOfDomain {
                    re: z.re.to_f64().unwrap_or(f64::NAN),
                    im: z.im.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for e in &self.expansions {
            if e.min_pow < 0 && z == e.center {
                return Err(Error::OutOfDomain {
                    re: z.re.to_f64().unwrap_or(f64::NAN),
                    im: z.im.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(self.eval(z))
    }

    /// Evaluation without the domain check.
    pub fn eval(&self, z: Cx<T>) -> Cx<T> {
        self.expansions.iter().fold(czero(), |acc, e| acc + e.eval(z))
    }

    pub fn derivative(&self) -> Self {
        let expansions = self
            .expansions
            .iter()
            .filter_map(|e| {
                let mut map = BTreeMap::new();
                for (i, c) in e.coeffs.iter().enumerate() {
                    let k = e.min_pow + i as i32;
                    if k != 0 {
                        map.insert(k - 1, *c * lit::<T>(k as f64) / e.scale);
                    }
                }
                Expansion::from_map(e.center, e.scale, &map)
            })
            .collect();
        Self {
            expansions,
            domain: self.domain.clone(),
        }
    }

    /// Termwise primitive with zero constant terms; fails on `1/(z-c)` terms.
    pub fn antiderivative(&self) -> Result<Self> {
        let mut expansions = Vec::new();
        for e in &self.expansions {
            let mut map = BTreeMap::new();
            for (i, c) in e.coeffs.iter().enumerate() {
                let k = e.min_pow + i as i32;
                if k == -1 {
                    if *c != czero() {
                        return Err(Error::Unsupported("primitive of a residue term is multivalued".into()));
                    }
                    continue;
                }
                map.insert(k + 1, *c * e.scale / lit::<T>((k + 1) as f64));
            }
            if let Some(x) = Expansion::from_map(e.center, e.scale, &map) {
                expansions.push(x);
            }
        }
        Ok(Self {
            expansions,
            domain: self.domain.clone(),
        })
    }

    fn merged_domain(&self, other: &Self) -> Option<PlanarDomain<T>> {
        self.domain.clone().or_else(|| other.domain.clone())
    }

    /// Sum, merging expansions that share center and scale.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.expansions.clone();
        for e in &other.expansions {
            if let Some(t) = out
                .iter_mut()
                .find(|t| same_point(t.center, e.center) && t.scale == e.scale)
            {
                let lo = t.min_pow.min(e.min_pow);
                let hi = t.max_pow().max(e.max_pow());
                let coeffs = (lo..=hi).map(|k| t.coeff(k) + e.coeff(k)).collect();
                t.min_pow = lo;
                t.coeffs = coeffs;
            } else {
                out.push(e.clone());
            }
        }
        Self {
            expansions: out,
            domain: self.merged_domain(other),
        }
    }

    pub fn scale(&self, c: Cx<T>) -> Self {
        Self {
            expansions: self
                .expansions
                .iter()
                .map(|e| Expansion {
                    coeffs: e.coeffs.iter().map(|a| *a * c).collect(),
                    ..e.clone()
                })
                .collect(),
            domain: self.domain.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-cone::<T>()))
    }

    /// Raw coefficients of `(z - center)^k`, keyed by expansion center.
    fn raw_terms(&self) -> Vec<(Cx<T>, i32, Cx<T>)> {
        let mut v = Vec::new();
        for e in &self.expansions {
            for (i, c) in e.coeffs.iter().enumerate() {
                if *c != czero() {
                    let k = e.min_pow + i as i32;
                    v.push((e.center, k, *c / e.scale.powi(k)));
                }
            }
        }
        v
    }

    fn scale_for(&self, other: &Self, center: Cx<T>) -> T {
        self.expansions
            .iter()
            .chain(other.expansions.iter())
            .find(|e| same_point(e.center, center))
            .map(|e| e.scale)
            .unwrap_or_else(T::one)
    }

    /// Exact product. Products of principal parts at distinct centers are
    /// split into partial fractions.
    pub fn mul(&self, other: &Self) -> Self {
        let mut acc: Vec<(Cx<T>, BTreeMap<i32, Cx<T>>)> = Vec::new();
        let mut put = |center: Cx<T>, k: i32, c: Cx<T>| {
            let slot = match acc.iter().position(|(ctr, _)| same_point(*ctr, center)) {
                Some(i) => i,
                None => {
                    acc.push((center, BTreeMap::new()));
                    acc.len() - 1
                }
            };
            *acc[slot].1.entry(k).or_insert_with(czero) += c;
        };
        let ta = self.raw_terms();
        let tb = other.raw_terms();
        for &(a, k, ca) in &ta {
            for &(b, l, cb) in &tb {
                let c0 = ca * cb;
                if same_point(a, b) {
                    put(a, k + l, c0);
                } else if k >= 0 && l >= 0 {
                    // (z-b)^l around a
                    let d = a - b;
                    for j in 0..=l {
                        put(a, k + j, c0 * binom::<T>(l, j as usize) * d.powi(l - j));
                    }
                } else if k >= 0 {
                    let d = b - a;
                    for j in 0..=k {
                        put(b, j + l, c0 * binom::<T>(k, j as usize) * d.powi(k - j));
                    }
                } else if l >= 0 {
                    let d = a - b;
                    for j in 0..=l {
                        put(a, j + k, c0 * binom::<T>(l, j as usize) * d.powi(l - j));
                    }
                } else {
                    let (m, n) = (-k, -l);
                    let dab = a - b;
                    let dba = b - a;
                    for j in 0..m {
                        put(a, j - m, c0 * binom::<T>(-n, j as usize) * dab.powi(-n - j));
                    }
                    for j in 0..n {
                        put(b, j - n, c0 * binom::<T>(-m, j as usize) * dba.powi(-m - j));
                    }
                }
            }
        }
        let mut expansions = Vec::new();
        for (center, map) in acc {
            let s = self.scale_for(other, center);
            let scaled: BTreeMap<i32, Cx<T>> = map
                .into_iter()
                .filter(|(_, c)| *c != czero())
                .map(|(k, c)| (k, c * s.powi(k)))
                .collect();
            if let Some(e) = Expansion::from_map(center, s, &scaled) {
                expansions.push(e);
            }
        }
        Self {
            expansions,
            domain: self.merged_domain(other),
        }
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// Single-center polynomial view `(center, raw coefficients)`, if any.
    fn as_single_polynomial(&self) -> Option<(Cx<T>, Vec<Cx<T>>)> {
        let mut center = None;
        let mut map: BTreeMap<i32, Cx<T>> = BTreeMap::new();
        for (c, k, a) in self.raw_terms() {
            if k < 0 {
                return None;
            }
            match center {
                None => center = Some(c),
                Some(c0) if k > 0 && !same_point(c0, c) => return None,
                _ => {}
            }
            *map.entry(k).or_insert_with(czero) += a;
        }
        let center = center.unwrap_or_else(czero);
        let deg = map.keys().next_back().copied().unwrap_or(0);
        let mut v = vec![czero(); deg as usize + 1];
        for (k, a) in map {
            v[k as usize] = a;
        }
        Some((center, v))
    }

    /// Exact quotient `self / divisor`: a nonzero constant divisor, or
    /// polynomials about a common center with zero remainder.
    pub fn div_exact(&self, divisor: &Self) -> Result<Self> {
        let Some((dc, dv)) = divisor.as_single_polynomial() else {
            return Err(Error::Unsupported("division by a Laurent or multi-center function".into()));
        };
        let dv = trim(dv);
        if dv.is_empty() {
            return Err(Error::DivisorMismatch("division by the zero function".into()));
        }
        if dv.len() == 1 {
            return Ok(self.scale(cone::<T>() / dv[0]));
        }
        let Some((nc, nv)) = self.as_single_polynomial() else {
            return Err(Error::DivisorMismatch("quotient is not a polynomial".into()));
        };
        let nv = trim(nv);
        if nv.is_empty() {
            return Ok(Self::zero());
        }
        if nv.len() > 1 && !same_point(nc, dc) {
            return Err(Error::Unsupported("polynomial division across centers".into()));
        }
        if nv.len() < dv.len() {
            return Err(Error::DivisorMismatch("divisor degree exceeds dividend degree".into()));
        }
        let mut rem = nv.clone();
        let dn = dv.len() - 1;
        let lead = dv[dn];
        let mut q = vec![czero(); nv.len() - dn];
        for i in (0..q.len()).rev() {
            let c = rem[i + dn] / lead;
            q[i] = c;
            for (j, d) in dv.iter().enumerate() {
                rem[i + j] = rem[i + j] - c * *d;
            }
        }
        let scale_n = nv.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        let rmax = rem[..dn].iter().fold(T::zero(), |m, c| m.max(c.norm()));
        if rmax > lit::<T>(1e-12) * scale_n.max(T::one()) {
            return Err(Error::DivisorMismatch(format!(
                "nonzero remainder {:.3e}: the quotient has poles",
                rmax.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let mut out = Self::polynomial(dc, T::one(), q);
        out.domain = self.merged_domain(divisor);
        Ok(out)
    }

    /// Re-expands every expansion at the given scale for its center.
    pub fn with_unit_scale(&self) -> Self {
        let mut out = Self::zero();
        out.domain = self.domain.clone();
        for (c, k, a) in self.raw_terms() {
            out = out.add(&Self::monomial(c, k, a));
        }
        out
    }
}

/// Generalized binomial coefficient `n choose j` for integer `n`.
pub fn binom<T: Real>(n: i32, j: usize) -> T {
    let mut acc = 1.0f64;
    for i in 0..j {
        acc *= (n as f64 - i as f64) / (i as f64 + 1.0);
    }
    lit(acc)
}

fn trim<T: Real>(mut v: Vec<Cx<T>>) -> Vec<Cx<T>> {
    while v.last().is_some_and(|c| *c == czero()) {
        v.pop();
    }
    v
}
