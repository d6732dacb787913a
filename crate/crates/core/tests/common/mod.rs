#![allow(dead_code)]

use cmi_core::geometry::OrientedCurve;
use cmi_core::pipeline::ProblemConfig;
use cmi_core::weierstrass::WeierstrassTuple;
use cmi_core::{Domain, Point, Surface};
use std::f64::consts::PI;

pub fn c(re: f64, im: f64) -> Point {
    Point::new(re, im)
}

pub fn config(json: &str) -> ProblemConfig {
    ProblemConfig::from_json(json).expect("test config parses")
}

/// The fixed-component disk run: `h3 = 1`, one point with `F(0.5) = (1, 2, 1)`.
pub const FIXED_DISK: &str = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":3,
 "lambda":[{"point":[0.5,0],"value":[1,2,1]}],"components":["1"],"stages":2,"seed":7}"#;

/// Same prescription on a domain with one hole and flux `(0.5, -0.25, 0)`.
pub const FIXED_HOLE: &str = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3},"holes":[{"center":[1.5,0],"radius":0.3}]},"dimension":3,
 "lambda":[{"point":[0.5,0],"value":[1,2,1]}],"flux":[[0.5,-0.25,0]],"components":["1"],"stages":2,"seed":7}"#;

pub const AUTO_FOUR: &str = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":4,
 "lambda":[{"point":[0.5,0],"value":[1,2,3,4]}],"components":"auto","stages":2}"#;

pub const AUTO_THREE: &str = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":3,
 "lambda":[{"point":[0.5,0],"value":[1,2,1]}],"components":"auto","stages":2}"#;

/// Values taken from the surface `η = 2e^{z/2}`, `H = -4`, `P = 4z + 2`.
pub const TWO_VALUES: &str = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":3,
 "lambda":[{"point":[-0.5,0],"value":[0.2513047990365851,0.0,0.0]},{"point":[0.5,0],"value":[0.2513047990365851,0.0,4.0]}],
 "components":"two_values","stages":2}"#;

/// Max of `|Σ f_j²| ` over a grid of the tuple's domain, evaluated directly.
pub fn grid_nullity(t: &WeierstrassTuple<f64>, n: usize) -> f64 {
    let d = &t.domain;
    let mut pts: Vec<Point> = d.grid_points(n).into_iter().filter(|z| d.contains_closed(*z)).collect();
    for circle in std::iter::once(&d.outer).chain(&d.holes) {
        pts.extend(circle.boundary_points(4 * n));
    }
    pts.iter().fold(0.0, |m, z| {
        let s: Point = t.eval(*z).iter().map(|f| f * f).sum();
        m.max(s.norm())
    })
}

/// `∮ f dz` over a circle by the periodic trapezoid rule.
pub fn circle_integral<F: Fn(Point) -> Vec<Point>>(center: Point, radius: f64, n: usize, f: F) -> Vec<Point> {
    let mut acc: Vec<Point> = Vec::new();
    for k in 0..n {
        let e = Point::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
        let z = center + radius * e;
        let w = Point::new(0.0, 1.0) * radius * e * (2.0 * PI / n as f64);
        let v = f(z);
        if acc.is_empty() {
            acc = vec![Point::new(0.0, 0.0); v.len()];
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x * w;
        }
    }
    acc
}

/// `∫ f dz` along the polyline by composite Simpson on every segment.
pub fn polyline_integral<F: Fn(Point) -> Vec<Point>>(curve: &OrientedCurve<f64>, sub: usize, f: F) -> Vec<Point> {
    let v = curve.vertices();
    let mut acc: Vec<Point> = Vec::new();
    for w in v.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / (2 * sub) as f64;
        for k in 0..=2 * sub {
            let wt = if k == 0 || k == 2 * sub {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let val = f(a + h * k as f64);
            if acc.is_empty() {
                acc = vec![Point::new(0.0, 0.0); val.len()];
            }
            for (s, x) in acc.iter_mut().zip(val) {
                *s += x * h * (wt / 3.0);
            }
        }
    }
    acc
}

/// Taylor coefficients `a_0..a_{count-1}` at `p` by the Cauchy formula on a
/// circle of radius `r`.
pub fn cauchy_coefficients<F: Fn(Point) -> Point>(f: F, p: Point, r: f64, count: usize) -> Vec<Point> {
    let n = 128;
    let vals: Vec<(Point, Point)> = (0..n)
        .map(|k| {
            let e = Point::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            (e, f(p + r * e))
        })
        .collect();
    (0..count)
        .map(|m| {
            let s: Point = vals.iter().map(|(e, v)| v * e.powi(-(m as i32))).sum();
            s / (n as f64 * r.powi(m as i32))
        })
        .collect()
}

/// `X(p) = x0 + 2 Re∫ f dz` along the straight segment from the base point.
pub fn value_at(imm: &Surface, p: Point) -> Vec<f64> {
    let path = OrientedCurve::segment(imm.base, p, 64).unwrap();
    let ints = polyline_integral(&path, 16, |z| imm.data.eval(z));
    imm.base_value.iter().zip(ints).map(|(x, i)| x + 2.0 * i.re).collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn interior_grid(d: &Domain, n: usize) -> Vec<Point> {
    d.grid_points(n).into_iter().filter(|z| d.contains(*z)).collect()
}
