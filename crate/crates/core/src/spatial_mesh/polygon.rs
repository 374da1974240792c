//! Planar polygon geometry: measures, diameters, the face-orthogonal length
//! scale, and sub-triangulation (centroid fan for convex polygons, ear
//! clipping otherwise).

use crate::error::{Error, Result};
use crate::geometry::{cross2, distance, sub, Point};

use super::ElementMetrics;

const GEOM_EPS: f64 = 1e-12;

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let a = signed_area(poly);
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (&poly[i], &poly[(i + 1) % n]);
        let w = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    [cx / (6.0 * a), cy / (6.0 * a), 0.0]
}

pub fn diameter(points: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            h = h.max(distance(&points[i], &points[j]));
        }
    }
    h
}

pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        let c = &poly[(i + 2) % n];
        cross2(&sub(b, a), &sub(c, b)) >= -GEOM_EPS * diameter(poly).powi(2)
    })
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    cross2(&sub(b, a), &sub(c, a))
}

/// True when the open segments `pq` and `rs` cross at a single interior point.
fn segments_cross(p: &Point, q: &Point, r: &Point, s: &Point) -> bool {
    let d1 = orient(r, s, p);
    let d2 = orient(r, s, q);
    let d3 = orient(p, q, r);
    let d4 = orient(p, q, s);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Point strictly inside segment `ab` (collinear, excluding endpoints).
pub fn on_open_segment(x: &Point, a: &Point, b: &Point, tol: f64) -> bool {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return false;
    }
    let ax = sub(x, a);
    let t = (ax[0] * ab[0] + ax[1] * ab[1]) / len2;
    let dist = cross2(&ab, &ax).abs() / len2.sqrt();
    dist <= tol && t > 1e-9 && t < 1.0 - 1e-9
}

/// Rejects polygons whose boundary crosses itself.
pub fn check_simple(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // skip edges sharing a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            let (c, d) = (&poly[j], &poly[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return Err(Error::Mesh(format!(
                    "self-intersecting boundary: edges {i} and {j} cross"
                )));
            }
        }
    }
    Ok(())
}

/// Distance from `x` to the line through `a` and `b`, signed positive on the
/// left of `a -> b` (the interior side of a counter-clockwise polygon).
fn signed_line_distance(x: &Point, a: &Point, b: &Point) -> f64 {
    orient(a, b, x) / distance(a, b)
}

fn point_strictly_in_triangle(x: &Point, a: &Point, b: &Point, c: &Point) -> bool {
    let scale = diameter(&[*a, *b, *c]).powi(2) * GEOM_EPS;
    orient(a, b, x) > scale && orient(b, c, x) > scale && orient(c, a, x) > scale
}

/// Whether the triangle spanned by edge `i` and vertex `k` lies inside the
/// polygon.
fn vertex_sees_edge(poly: &[Point], i: usize, k: usize) -> bool {
    let n = poly.len();
    let a = &poly[i];
    let b = &poly[(i + 1) % n];
    let x = &poly[k];
    if signed_line_distance(x, a, b) <= 0.0 {
        return false;
    }
    for j in 0..n {
        let (c, d) = (&poly[j], &poly[(j + 1) % n]);
        if segments_cross(x, a, c, d) || segments_cross(x, b, c, d) {
            return false;
        }
    }
    !(0..n).any(|j| {
        j != i && j != (i + 1) % n && j != k && point_strictly_in_triangle(&poly[j], a, b, x)
    })
}

/// Face-orthogonal length scale: for each edge the largest vertex distance to
/// the edge's line, minimised over edges. For non-convex polygons only
/// vertices whose triangle with the edge lies inside the polygon are
/// admitted, which approximates the supremum over inscribed simplices.
pub fn h_perp(poly: &[Point]) -> f64 {
    let n = poly.len();
    let convex = is_convex(poly);
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        let mut far: f64 = 0.0;
        for k in 0..n {
            if k == i || k == (i + 1) % n {
                continue;
            }
            if !convex && !vertex_sees_edge(poly, i, k) {
                continue;
            }
            far = far.max(signed_line_distance(&poly[k], a, b));
        }
        best = best.min(far);
    }
    best
}

/// Validates a counter-clockwise simple polygon and returns its metrics.
pub fn polygon_metrics(poly: &[Point]) -> Result<ElementMetrics> {
    if poly.len() < 3 {
        return Err(Error::Mesh(format!(
            "polygon with {} vertices has zero measure",
            poly.len()
        )));
    }
    let h = diameter(poly);
    let area = signed_area(poly);
    if !(area > GEOM_EPS * h * h) {
        return Err(Error::Mesh(format!(
            "polygon has non-positive signed area {area:e} (degenerate or clockwise)"
        )));
    }
    check_simple(poly)?;
    let hp = h_perp(poly);
    if !(hp > 0.0) {
        return Err(Error::Mesh(
            "polygon has a vanishing face-orthogonal length".into(),
        ));
    }
    Ok(ElementMetrics {
        h,
        h_perp: hp,
        measure: area,
        centroid: centroid(poly),
    })
}

/// Triangles (as point triples) partitioning the polygon.
pub fn subtriangulate(poly: &[Point]) -> Result<Vec<[Point; 3]>> {
    polygon_metrics(poly)?;
    if is_convex(poly) {
        let c = centroid(poly);
        let n = poly.len();
        return Ok((0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect());
    }
    ear_clip(poly)
}

fn point_in_closed_triangle(x: &Point, a: &Point, b: &Point, c: &Point) -> bool {
    let scale = diameter(&[*a, *b, *c]).powi(2) * GEOM_EPS;
    let is_corner = |p: &Point| distance(x, p) <= scale.sqrt();
    !(is_corner(a) || is_corner(b) || is_corner(c))
        && orient(a, b, x) >= -scale
        && orient(b, c, x) >= -scale
        && orient(c, a, x) >= -scale
}

fn ear_clip(poly: &[Point]) -> Result<Vec<[Point; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (&poly[ip], &poly[ic], &poly[inx]);
            if orient(a, b, c) <= 0.0 {
                continue; // reflex or flat corner
            }
            let blocked = idx.iter().any(|&j| {
                j != ip && j != ic && j != inx && point_in_closed_triangle(&poly[j], a, b, c)
            });
            if blocked {
                continue;
            }
            tris.push([*a, *b, *c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(Error::Mesh(
                "ear clipping failed: polygon is not simple".into(),
            ));
        }
    }
    tris.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    Ok(tris)
}

pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * orient(&t[0], &t[1], &t[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| [x, y, 0.0]).collect()
    }

    #[test]
    fn unit_square_metrics() {
        let m = polygon_metrics(&pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.h_perp - 1.0).abs() < 1e-15);
        assert!((m.measure - 1.0).abs() < 1e-15);
        assert!((m.centroid[0] - 0.5).abs() < 1e-15 && (m.centroid[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn right_triangle_metrics() {
        let m = polygon_metrics(&pts(&[(0., 0.), (1., 0.), (0., 1.)])).unwrap();
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.measure - 0.5).abs() < 1e-15);
        assert!((m.h_perp - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_polygons_rejected() {
        assert!(polygon_metrics(&pts(&[(0., 0.), (1., 0.)])).is_err());
        assert!(polygon_metrics(&pts(&[(0., 0.), (1., 0.), (2., 0.)])).is_err());
        // clockwise
        assert!(polygon_metrics(&pts(&[(0., 0.), (0., 1.), (1., 1.), (1., 0.)])).is_err());
    }

    #[test]
    fn bow_tie_rejected() {
        let bow = pts(&[(0., 0.), (1., 1.), (1., 0.), (0., 1.)]);
        assert!(check_simple(&bow).is_err());
        assert!(subtriangulate(&bow).is_err());
    }

    #[test]
    fn square_centroid_fan() {
        let t = subtriangulate(&pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        assert_eq!(t.len(), 4);
        let a: f64 = t.iter().map(triangle_area).sum();
        assert!((a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convex_pentagon_area_matches_shoelace() {
        let p = pts(&[(0., 0.), (2., 0.), (2.5, 1.2), (1., 2.), (-0.4, 1.1)]);
        let shoelace = signed_area(&p);
        let t = subtriangulate(&p).unwrap();
        let a: f64 = t.iter().map(triangle_area).sum();
        assert!(((a - shoelace) / shoelace).abs() < 1e-12);
    }

    #[test]
    fn l_shape_ear_clipping() {
        let l = pts(&[
            (0., 0.),
            (1., 0.),
            (1., 0.5),
            (0.5, 0.5),
            (0.5, 1.),
            (0., 1.),
        ]);
        assert!(!is_convex(&l));
        let t = subtriangulate(&l).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|tri| triangle_area(tri) > 0.0));
        let a: f64 = t.iter().map(triangle_area).sum();
        assert!((a - 0.75).abs() < 1e-12);
    }

    #[test]
    fn l_shape_h_perp_uses_visible_vertices() {
        let l = pts(&[
            (0., 0.),
            (1., 0.),
            (1., 0.5),
            (0.5, 0.5),
            (0.5, 1.),
            (0., 1.),
        ]);
        let m = polygon_metrics(&l).unwrap();
        // Edge (0.5,0.5)->(0.5,1) only sees vertices at distance 0.5.
        assert!((m.h_perp - 0.5).abs() < 1e-14);
        assert!(m.h_perp <= m.h);
    }
}
