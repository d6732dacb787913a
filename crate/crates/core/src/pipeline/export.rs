use crate::error::{Error, Result};
use crate::geometry::{path_in_domain, OrientedCurve, PlanarDomain};
use crate::weierstrass::{gauss_map, integrate_immersion, Immersion};
use num_complex::Complex64 as C64;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Sampled image surface: parameter points, `X` values and triangles.
#[derive(Clone, Debug)]
pub struct SurfaceSamples {
    pub points: Vec<C64>,
    pub values: Vec<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// `X` on a point graph, spreading from the vertex nearest the base along
/// graph edges.
fn spread(imm: &Immersion<f64>, points: &[C64], edges: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let domain = &imm.data.domain;
    let mut values: Vec<Option<Vec<f64>>> = vec![None; points.len()];
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    while let Some(&seed) = remaining
        .iter()
        .filter(|i| values[**i].is_none())
        .min_by(|a, b| {
            let da = (points[**a] - imm.base).norm();
            let db = (points[**b] - imm.base).norm();
            da.partial_cmp(&db).unwrap().then(a.cmp(b))
        })
    {
        values[seed] = Some(if points[seed] == imm.base {
            imm.base_value.clone()
        } else {
            let path = path_in_domain(domain, imm.base, points[seed], 8)?;
            integrate_immersion(imm, points[seed], &path)?
        });
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            for &j in &edges[i] {
                if values[j].is_some() {
                    continue;
                }
                let seg = OrientedCurve::segment(points[i], points[j], 1)?;
                if !(0..=8).all(|k| domain.contains_closed(seg.point_at(k as f64 / 8.0))) {
                    continue;
                }
                let inc = imm.data.integrate(&seg)?;
                let base = values[i].as_ref().unwrap();
                values[j] = Some(base.iter().zip(&inc).map(|(x, d)| x + 2.0 * d.re).collect());
                queue.push_back(j);
            }
        }
        remaining.retain(|i| values[*i].is_none());
    }
    Ok(values.into_iter().map(|v| v.unwrap()).collect())
}

/// Polar grid about the outer center: `samples` rings (the first is the
/// center) of `samples` angles each, clipped to the closed domain.
pub fn sample_surface(imm: &Immersion<f64>, samples: usize) -> Result<SurfaceSamples> {
    if samples < 2 {
        return Err(Error::DegenerateMesh(format!("{samples} samples per direction")));
    }
    let d: &PlanarDomain<f64> = &imm.data.domain;
    let (c, r) = (d.outer.center, d.outer.radius);
    let n = samples;
    // index of (ring, angle); ring 0 is a single vertex
    let mut index = vec![vec![usize::MAX; n]; n];
    let mut points = Vec::new();
    if d.contains_closed(c) {
        index[0] = vec![0; n];
        points.push(c);
    }
    for (i, row) in index.iter_mut().enumerate().skip(1) {
        for (j, slot) in row.iter_mut().enumerate() {
            let z = c + C64::from_polar(r * i as f64 / (n - 1) as f64, 2.0 * PI * j as f64 / n as f64);
            if d.contains_closed(z) {
                *slot = points.len();
                points.push(z);
            }
        }
    }
    let mut triangles = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n {
            let j1 = (j + 1) % n;
            let (a, b, cc, dd) = (index[i][j], index[i][j1], index[i + 1][j], index[i + 1][j1]);
            if i == 0 {
                if a != usize::MAX && cc != usize::MAX && dd != usize::MAX {
                    triangles.push([a, cc, dd]);
                }
                continue;
            }
            if a != usize::MAX && cc != usize::MAX && dd != usize::MAX {
                triangles.push([a, cc, dd]);
            }
            if a != usize::MAX && dd != usize::MAX && b != usize::MAX {
                triangles.push([a, dd, b]);
            }
        }
    }
    // drop triangles whose centroid falls into a hole
    triangles.retain(|t| d.contains_closed((points[t[0]] + points[t[1]] + points[t[2]]) / 3.0));
    if triangles.is_empty() {
        return Err(Error::DegenerateMesh("no triangle inside the domain".into()));
    }
    let mut edges = vec![Vec::new(); points.len()];
    for t in &triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if !edges[a].contains(&b) {
                edges[a].push(b);
                edges[b].push(a);
            }
        }
    }
    let values = spread(imm, &points, &edges)?;
    Ok(SurfaceSamples {
        points,
        values,
        triangles,
    })
}

/// Wavefront OBJ of the first three coordinates.
pub fn to_obj(s: &SurfaceSamples) -> String {
    let mut out = String::new();
    let n = s.values.first().map(|v| v.len()).unwrap_or(0);
    if n > 3 {
        let _ = writeln!(out, "# warning: truncated to the first 3 of {n} coordinates");
    }
    for v in &s.values {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in &s.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// CSV of `z, X(z), G(z)` on the `samples x samples` grid clipped to the
/// open domain; Gauss-map entries are complex `a+bi` strings.
pub fn to_csv(imm: &Immersion<f64>, samples: usize) -> Result<String> {
    if samples < 2 {
        return Err(Error::DegenerateMesh(format!("{samples} samples per direction")));
    }
    let d = &imm.data.domain;
    let n = imm.dimension();
    let (c, r) = (d.outer.center, d.outer.radius);
    let mut index = vec![usize::MAX; samples * samples];
    let mut points = Vec::new();
    for i in 0..samples {
        for j in 0..samples {
            let z = c + C64::new(
                -r + 2.0 * r * (i as f64 + 0.5) / samples as f64,
                -r + 2.0 * r * (j as f64 + 0.5) / samples as f64,
            );
            if d.contains(z) {
                index[i * samples + j] = points.len();
                points.push(z);
            }
        }
    }
    let mut edges = vec![Vec::new(); points.len()];
    for i in 0..samples {
        for j in 0..samples {
            let a = index[i * samples + j];
            if a == usize::MAX {
                continue;
            }
            for (di, dj) in [(1, 0), (0, 1)] {
                if i + di < samples && j + dj < samples {
                    let b = index[(i + di) * samples + j + dj];
                    if b != usize::MAX {
                        edges[a].push(b);
                        edges[b].push(a);
                    }
                }
            }
        }
    }
    let values = spread(imm, &points, &edges)?;
    let mut out = String::from("re,im");
    for k in 1..=n {
        let _ = write!(out, ",X{k}");
    }
    for k in 1..=n {
        let _ = write!(out, ",G{k}");
    }
    out.push('\n');
    for (z, x) in points.iter().zip(&values) {
        let _ = write!(out, "{},{}", z.re, z.im);
        for v in x {
            let _ = write!(out, ",{v}");
        }
        let g = gauss_map(&imm.data, *z)?;
        for v in g {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub enum ExportFormat {
    Mesh,
    Csv,
}

/// Writes the mesh or CSV export to `path`.
pub fn export(imm: &Immersion<f64>, format: ExportFormat, samples: usize, path: &std::path::Path) -> Result<()> {
    let text = match format {
        ExportFormat::Mesh => to_obj(&sample_surface(imm, samples)?),
        ExportFormat::Csv => to_csv(imm, samples)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holofun::HoloFunction;
    use crate::weierstrass::{assemble_tuple, pair_from_eta, TailComponent};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn enneper() -> Immersion<f64> {
        let d = PlanarDomain::disk(c(0.0, 0.0), 1.0).unwrap();
        // η = f1 - i f2 = 1, H = -z^2
        let minus_z2 = HoloFunction::monomial(c(0.0, 0.0), 2, c(-1.0, 0.0));
        let pair = pair_from_eta(&HoloFunction::constant(c(1.0, 0.0)), &minus_z2, &d).unwrap();
        let t = assemble_tuple(vec![pair], vec![TailComponent::Holo(HoloFunction::identity())], &d).unwrap();
        Immersion::new(t, c(0.0, 0.0), vec![0.0; 3]).unwrap()
    }

    #[test]
    fn enneper_mesh() {
        let imm = enneper();
        let s = sample_surface(&imm, 32).unwrap();
        assert_eq!(s.points.len(), 1 + 31 * 32);
        let k = s.points.iter().position(|z| (*z - c(1.0, 0.0)).norm() < 1e-15).unwrap();
        let want = [2.0 / 3.0, 0.0, 1.0];
        for (a, b) in s.values[k].iter().zip(want) {
            assert!((a - b).abs() <= 1e-8, "{:?}", s.values[k]);
        }
        let obj = to_obj(&s);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), s.points.len());
        assert!(obj.lines().any(|l| l.starts_with("f ")));
        assert_eq!(sample_surface(&imm, 1).unwrap_err().code(), "DEGENERATE_MESH");
    }

    #[test]
    fn csv_rows_match_interior_grid() {
        let imm = enneper();
        let csv = to_csv(&imm, 16).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "re,im,X1,X2,X3,G1,G2,G3");
        let interior = imm.data.domain.grid_points(16).into_iter().filter(|z| imm.data.domain.contains(*z)).count();
        assert_eq!(lines.count(), interior);
    }
}
