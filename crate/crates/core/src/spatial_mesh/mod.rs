//! Polytopic spatial meshes.
//!
//! Two-dimensional meshes hold arbitrary simple polygons (counter-clockwise
//! vertex loops). Three-dimensional meshes are restricted to axis-aligned
//! hexahedra. Faces are derived from element connectivity; each face stores
//! its owner, an optional neighbour, and the unit normal pointing out of the
//! owner.

mod generate;
mod io;
pub mod polygon;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{dot, scale, sub, Point};
use crate::quadrature::{gauss_legendre, map_rule, simplex_rule, GaussRule};

pub use io::{load_mesh, parse_mesh, MeshFile};

/// Geometric quantities of one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementMetrics {
    /// Diameter (m).
    pub h: f64,
    /// Face-orthogonal length scale (m).
    pub h_perp: f64,
    /// Area or volume.
    pub measure: f64,
    pub centroid: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementShape {
    Polygon,
    Box { lo: Point, hi: Point },
}

#[derive(Clone, Debug)]
pub struct Element {
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
    pub shape: ElementShape,
    pub metrics: ElementMetrics,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct Face {
    /// Segment endpoints (2D) or the four corners of a rectangle (3D).
    pub vertices: Vec<usize>,
    pub owner: usize,
    pub neighbour: Option<usize>,
    /// Unit normal, outward from the owner.
    pub normal: Point,
    pub measure: f64,
    pub centroid: Point,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbour.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceSide {
    Inflow,
    Outflow,
}

#[derive(Clone, Debug)]
pub struct SpatialMesh {
    dim: usize,
    vertices: Vec<Point>,
    elements: Vec<Element>,
    faces: Vec<Face>,
}

impl SpatialMesh {
    /// Builds a 2D mesh from counter-clockwise polygons.
    pub fn from_polygons(vertices: Vec<[f64; 2]>, polygons: Vec<Vec<usize>>) -> Result<Self> {
        let vertices: Vec<Point> = vertices.into_iter().map(|[x, y]| [x, y, 0.0]).collect();
        let mut elements = Vec::with_capacity(polygons.len());
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (e, poly) in polygons.into_iter().enumerate() {
            if let Some(&v) = poly.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "element {e}: vertex index {v} out of range"
                )));
            }
            for (i, v) in poly.iter().enumerate() {
                if poly[..i].contains(v) {
                    return Err(Error::Mesh(format!("element {e}: repeated vertex {v}")));
                }
            }
            let mut key = poly.clone();
            key.sort_unstable();
            if let Some(other) = seen.insert(key, e) {
                return Err(Error::Mesh(format!(
                    "element {e}: duplicates element {other}"
                )));
            }
            let coords: Vec<Point> = poly.iter().map(|&v| vertices[v]).collect();
            let metrics = polygon::polygon_metrics(&coords)
                .map_err(|err| Error::Mesh(format!("element {e}: {err}")))?;
            elements.push(Element {
                vertices: poly,
                faces: Vec::new(),
                shape: ElementShape::Polygon,
                metrics,
                degree: 0,
            });
        }
        if elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }

        // Directed edge (a, b) of a CCW polygon is matched by (b, a) in its neighbour.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            let n = el.vertices.len();
            for i in 0..n {
                let key = (el.vertices[i], el.vertices[(i + 1) % n]);
                if let Some(other) = directed.insert(key, e) {
                    return Err(Error::Mesh(format!(
                        "elements {other} and {e} overlap: both traverse edge {key:?} in the same direction"
                    )));
                }
            }
        }
        let mut faces: Vec<Face> = Vec::new();
        let mut face_of: HashMap<(usize, usize), usize> = HashMap::new();
        for e in 0..elements.len() {
            let n = elements[e].vertices.len();
            for i in 0..n {
                let (a, b) = (elements[e].vertices[i], elements[e].vertices[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                if let Some(&f) = face_of.get(&key) {
                    faces[f].neighbour = Some(e);
                    elements[e].faces.push(f);
                    continue;
                }
                let d = sub(&vertices[b], &vertices[a]);
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let face = Face {
                    vertices: vec![a, b],
                    owner: e,
                    neighbour: None,
                    normal: [d[1] / len, -d[0] / len, 0.0],
                    measure: len,
                    centroid: scale(&crate::geometry::add(&vertices[a], &vertices[b]), 0.5),
                };
                face_of.insert(key, faces.len());
                elements[e].faces.push(faces.len());
                faces.push(face);
            }
        }

        // A boundary vertex strictly inside another boundary edge is a hanging node.
        let boundary: Vec<&Face> = faces.iter().filter(|f| f.is_boundary()).collect();
        let mut bverts: Vec<usize> = boundary
            .iter()
            .flat_map(|f| f.vertices.iter().copied())
            .collect();
        bverts.sort_unstable();
        bverts.dedup();
        for f in &boundary {
            let (a, b) = (&vertices[f.vertices[0]], &vertices[f.vertices[1]]);
            for &v in &bverts {
                if v != f.vertices[0]
                    && v != f.vertices[1]
                    && polygon::on_open_segment(&vertices[v], a, b, 1e-10 * f.measure)
                {
                    return Err(Error::Mesh(format!(
                        "element {}: non-matching shared edge, vertex {v} lies inside edge {:?}",
                        f.owner, f.vertices
                    )));
                }
            }
        }

        Ok(Self {
            dim: 2,
            vertices,
            elements,
            faces,
        })
    }

    /// Builds a 3D mesh of axis-aligned boxes, each given as six quadrilateral
    /// vertex loops.
    pub fn from_boxes(vertices: Vec<[f64; 3]>, cells: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let mut elements = Vec::with_capacity(cells.len());
        let mut faces: Vec<Face> = Vec::new();
        let mut face_of: HashMap<[usize; 4], usize> = HashMap::new();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (e, cell) in cells.into_iter().enumerate() {
            if cell.len() != 6 || cell.iter().any(|f| f.len() != 4) {
                return Err(Error::Mesh(format!(
                    "element {e}: 3D elements must be hexahedra given as six 4-vertex faces"
                )));
            }
            let mut verts: Vec<usize> = cell.iter().flatten().copied().collect();
            if let Some(&v) = verts.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "element {e}: vertex index {v} out of range"
                )));
            }
            verts.sort_unstable();
            verts.dedup();
            if verts.len() != 8 {
                return Err(Error::Mesh(format!(
                    "element {e}: expected 8 distinct vertices, found {}",
                    verts.len()
                )));
            }
            if let Some(other) = seen.insert(verts.clone(), e) {
                return Err(Error::Mesh(format!(
                    "element {e}: duplicates element {other}"
                )));
            }
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &v in &verts {
                for k in 0..3 {
                    lo[k] = lo[k].min(vertices[v][k]);
                    hi[k] = hi[k].max(vertices[v][k]);
                }
            }
            let size = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
            let diag = (size[0] * size[0] + size[1] * size[1] + size[2] * size[2]).sqrt();
            if size.iter().any(|&s| !(s > 1e-12 * diag)) {
                return Err(Error::Mesh(format!("element {e}: zero-volume box")));
            }
            let tol = 1e-10 * diag;
            let is_corner = |p: &Point| {
                (0..3).all(|k| (p[k] - lo[k]).abs() <= tol || (p[k] - hi[k]).abs() <= tol)
            };
            if !verts.iter().all(|&v| is_corner(&vertices[v])) {
                return Err(Error::Mesh(format!("element {e}: not an axis-aligned box")));
            }
            let metrics = ElementMetrics {
                h: diag,
                h_perp: size.iter().copied().fold(f64::INFINITY, f64::min),
                measure: size[0] * size[1] * size[2],
                centroid: [
                    0.5 * (lo[0] + hi[0]),
                    0.5 * (lo[1] + hi[1]),
                    0.5 * (lo[2] + hi[2]),
                ],
            };
            let mut el_faces = Vec::with_capacity(6);
            let mut sides_used = [false; 6];
            for loop_ in &cell {
                // identify the box side this loop lies on
                let side = (0..6).find(|&s| {
                    let (axis, val) = (s / 2, if s % 2 == 0 { lo[s / 2] } else { hi[s / 2] });
                    loop_
                        .iter()
                        .all(|&v| (vertices[v][axis] - val).abs() <= tol)
                });
                let Some(side) = side else {
                    return Err(Error::Mesh(format!(
                        "element {e}: face {loop_:?} is not a box side"
                    )));
                };
                if sides_used[side] {
                    return Err(Error::Mesh(format!("element {e}: box side listed twice")));
                }
                sides_used[side] = true;
                let mut key = [loop_[0], loop_[1], loop_[2], loop_[3]];
                key.sort_unstable();
                if let Some(&f) = face_of.get(&key) {
                    if faces[f].neighbour.is_some() {
                        return Err(Error::Mesh(format!(
                            "element {e}: face {key:?} shared by more than two elements"
                        )));
                    }
                    faces[f].neighbour = Some(e);
                    el_faces.push(f);
                    continue;
                }
                let axis = side / 2;
                let mut normal = [0.0; 3];
                normal[axis] = if side % 2 == 0 { -1.0 } else { 1.0 };
                let (t0, t1) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut centroid = [0.0; 3];
                for &v in loop_ {
                    for k in 0..3 {
                        centroid[k] += 0.25 * vertices[v][k];
                    }
                }
                face_of.insert(key, faces.len());
                el_faces.push(faces.len());
                faces.push(Face {
                    vertices: loop_.clone(),
                    owner: e,
                    neighbour: None,
                    normal,
                    measure: size[t0] * size[t1],
                    centroid,
                });
            }
            elements.push(Element {
                vertices: verts,
                faces: el_faces,
                shape: ElementShape::Box { lo, hi },
                metrics,
                degree: 0,
            });
        }
        if elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        Ok(Self {
            dim: 3,
            vertices,
            elements,
            faces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn set_uniform_degree(&mut self, p: usize) {
        self.elements.iter_mut().for_each(|e| e.degree = p);
    }

    pub fn with_degree(mut self, p: usize) -> Self {
        self.set_uniform_degree(p);
        self
    }

    pub fn element_metrics(&self, e: usize) -> &ElementMetrics {
        &self.elements[e].metrics
    }

    pub fn max_h(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.metrics.h)
            .fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(|e| e.metrics.measure).sum()
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point> {
        self.elements[e]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Unit normal of `face` pointing out of `element`.
    pub fn outward_normal(&self, face: usize, element: usize) -> Point {
        let f = &self.faces[face];
        if f.owner == element {
            f.normal
        } else {
            scale(&f.normal, -1.0)
        }
    }

    /// Inflow when `mu . n < 0`; tangential faces count as outflow.
    pub fn classify_face(&self, face: usize, element: usize, mu: &Point) -> FaceSide {
        if dot(mu, &self.outward_normal(face, element)) < 0.0 {
            FaceSide::Inflow
        } else {
            FaceSide::Outflow
        }
    }

    /// Simplices (triangles or tetrahedra) partitioning an element.
    pub fn subtriangulate(&self, e: usize) -> Result<Vec<Vec<Point>>> {
        match self.elements[e].shape {
            ElementShape::Polygon => Ok(polygon::subtriangulate(&self.element_coords(e))?
                .into_iter()
                .map(|t| t.to_vec())
                .collect()),
            ElementShape::Box { lo, hi } => {
                // Six tetrahedra around the main diagonal lo -> hi.
                let corner = |bits: usize| -> Point {
                    [
                        if bits & 1 != 0 { hi[0] } else { lo[0] },
                        if bits & 2 != 0 { hi[1] } else { lo[1] },
                        if bits & 4 != 0 { hi[2] } else { lo[2] },
                    ]
                };
                let paths = [[1, 3], [1, 5], [2, 3], [2, 6], [4, 5], [4, 6]];
                Ok(paths
                    .iter()
                    .map(|p| vec![corner(0), corner(p[0]), corner(p[1]), corner(7)])
                    .collect())
            }
        }
    }

    /// Volume quadrature exact for total degree `order` on the element.
    pub fn element_quadrature(&self, e: usize, order: usize) -> Result<Vec<(Point, f64)>> {
        match self.elements[e].shape {
            ElementShape::Polygon => {
                let rule = simplex_rule(order.max(1), 2)?;
                let mut out = Vec::new();
                for t in polygon::subtriangulate(&self.element_coords(e))? {
                    let jac = 2.0 * polygon::triangle_area(&t);
                    let (e1, e2) = (sub(&t[1], &t[0]), sub(&t[2], &t[0]));
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let x = [
                            t[0][0] + p[0] * e1[0] + p[1] * e2[0],
                            t[0][1] + p[0] * e1[1] + p[1] * e2[1],
                            0.0,
                        ];
                        out.push((x, w * jac));
                    }
                }
                Ok(out)
            }
            ElementShape::Box { lo, hi } => {
                let rules: Vec<GaussRule> = (0..3)
                    .map(|k| map_rule(&gauss_legendre(order / 2 + 1)?, lo[k], hi[k]))
                    .collect::<Result<_>>()?;
                let mut out = Vec::new();
                for (x, wx) in rules[0].iter() {
                    for (y, wy) in rules[1].iter() {
                        for (z, wz) in rules[2].iter() {
                            out.push(([x, y, z], wx * wy * wz));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Face quadrature exact for degree `order`.
    pub fn face_quadrature(&self, f: usize, order: usize) -> Result<Vec<(Point, f64)>> {
        let face = &self.faces[f];
        let n = order / 2 + 1;
        let base = gauss_legendre(n)?;
        if self.dim == 2 {
            let (a, b) = (
                self.vertices[face.vertices[0]],
                self.vertices[face.vertices[1]],
            );
            let half = 0.5 * face.measure;
            return Ok(base
                .iter()
                .map(|(t, w)| {
                    let s = 0.5 * (t + 1.0);
                    (
                        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), 0.0],
                        w * half,
                    )
                })
                .collect());
        }
        let axis = (0..3)
            .find(|&k| face.normal[k] != 0.0)
            .expect("axis-aligned face");
        let (t0, t1) = ((axis + 1) % 3, (axis + 2) % 3);
        let coords: Vec<Point> = face.vertices.iter().map(|&v| self.vertices[v]).collect();
        let range = |k: usize| {
            let lo = coords.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = coords
                .iter()
                .map(|p| p[k])
                .fold(f64::NEG_INFINITY, f64::max);
            map_rule(&base, lo, hi)
        };
        let (r0, r1) = (range(t0)?, range(t1)?);
        let mut out = Vec::with_capacity(n * n);
        for (u, wu) in r0.iter() {
            for (v, wv) in r1.iter() {
                let mut x = [0.0; 3];
                x[axis] = coords[0][axis];
                x[t0] = u;
                x[t1] = v;
                out.push((x, wu * wv));
            }
        }
        Ok(out)
    }

    /// Measure of the domain from its boundary (divergence theorem with
    /// the field x / d).
    pub fn boundary_enclosed_measure(&self) -> f64 {
        self.faces
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| dot(&f.centroid, &f.normal) * f.measure / self.dim as f64)
            .sum()
    }

    /// Total measure of the boundary.
    pub fn boundary_measure(&self) -> f64 {
        self.faces
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| f.measure)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> SpatialMesh {
        SpatialMesh::from_polygons(
            vec![[0., 0.], [1., 0.], [1., 1.], [0., 1.]],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    fn face_with_normal(m: &SpatialMesh, n: [f64; 3]) -> usize {
        m.faces()
            .iter()
            .position(|f| (f.normal[0] - n[0]).abs() + (f.normal[1] - n[1]).abs() < 1e-14)
            .unwrap()
    }

    #[test]
    fn single_square_has_four_boundary_faces() {
        let m = unit_square();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.faces().len(), 4);
        assert!(m.faces().iter().all(Face::is_boundary));
    }

    #[test]
    fn two_by_two_grid_face_counts() {
        let m = SpatialMesh::structured_quads(2, 2, [0., 0., 1., 1.]).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.faces().len(), 12);
        assert_eq!(m.faces().iter().filter(|f| !f.is_boundary()).count(), 4);
    }

    #[test]
    fn repeated_vertex_names_element() {
        let err = SpatialMesh::from_polygons(
            vec![[0., 0.], [1., 0.], [1., 1.], [0., 1.]],
            vec![vec![0, 1, 2, 3], vec![0, 1, 1, 2]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("element 1"), "{err}");
    }

    #[test]
    fn hanging_node_rejected() {
        // left square split in two, right square whole: vertex (1, 0.5) hangs.
        let v = vec![
            [0., 0.],
            [1., 0.],
            [2., 0.],
            [2., 1.],
            [1., 1.],
            [0., 1.],
            [1., 0.5],
            [0., 0.5],
        ];
        let polys = vec![vec![0, 1, 6, 7], vec![7, 6, 4, 5], vec![1, 2, 3, 4]];
        let err = SpatialMesh::from_polygons(v, polys).unwrap_err();
        assert!(err.to_string().contains("non-matching"), "{err}");
    }

    #[test]
    fn overlapping_orientation_rejected() {
        let v = vec![[0., 0.], [1., 0.], [1., 1.], [0., 1.], [0.5, -1.0]];
        let err =
            SpatialMesh::from_polygons(v, vec![vec![0, 1, 2, 3], vec![0, 4, 1, 2]]).unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");
    }

    #[test]
    fn classification_on_unit_square() {
        let m = unit_square();
        let mu = [1.0, 0.0, 0.0];
        assert_eq!(
            m.classify_face(face_with_normal(&m, [1., 0., 0.]), 0, &mu),
            FaceSide::Outflow
        );
        assert_eq!(
            m.classify_face(face_with_normal(&m, [-1., 0., 0.]), 0, &mu),
            FaceSide::Inflow
        );
        assert_eq!(
            m.classify_face(face_with_normal(&m, [0., 1., 0.]), 0, &mu),
            FaceSide::Outflow
        );
    }

    #[test]
    fn interior_faces_flip_between_owner_and_neighbour() {
        let m = SpatialMesh::structured_quads(3, 2, [0., 0., 1., 1.]).unwrap();
        let mu = crate::geometry::normalized(&[0.3, -0.8, 0.0]);
        for (fi, f) in m.faces().iter().enumerate() {
            if let Some(nb) = f.neighbour {
                assert_ne!(
                    m.classify_face(fi, f.owner, &mu),
                    m.classify_face(fi, nb, &mu)
                );
            }
        }
    }

    #[test]
    fn element_quadrature_sums_to_domain_measure() {
        let m = SpatialMesh::structured_quads(3, 5, [0., 0., 2., 1.]).unwrap();
        let total: f64 = (0..m.num_elements())
            .map(|e| {
                m.element_quadrature(e, 4)
                    .unwrap()
                    .iter()
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert!((m.boundary_enclosed_measure() - 2.0).abs() < 1e-12);
        let m = SpatialMesh::structured_boxes(2, 3, 2, [0., 0., 0., 1., 1., 2.]).unwrap();
        let total: f64 = (0..m.num_elements())
            .map(|e| {
                m.element_quadrature(e, 2)
                    .unwrap()
                    .iter()
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum();
        assert!((total - 2.0).abs() < 1e-12);
        let tets: f64 = (0..m.num_elements())
            .flat_map(|e| m.subtriangulate(e).unwrap())
            .map(|t| {
                let (a, b, c) = (sub(&t[1], &t[0]), sub(&t[2], &t[0]), sub(&t[3], &t[0]));
                dot(&a, &crate::geometry::cross(&b, &c)).abs() / 6.0
            })
            .sum();
        assert!((tets - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_mesh_faces_and_metrics() {
        let m = SpatialMesh::structured_boxes(2, 2, 2, [0., 0., 0., 1., 1., 1.]).unwrap();
        assert_eq!(m.num_elements(), 8);
        // 3 * 3 * 2 * 2 faces per direction
        assert_eq!(m.faces().len(), 36);
        assert_eq!(m.faces().iter().filter(|f| f.is_boundary()).count(), 24);
        let em = m.element_metrics(0);
        assert!((em.h_perp - 0.5).abs() < 1e-15 && (em.measure - 0.125).abs() < 1e-15);
        assert!(em.h_perp <= em.h);
    }

    #[test]
    fn face_quadrature_integrates_linear_function() {
        let m = SpatialMesh::structured_boxes(1, 1, 1, [0., 0., 0., 1., 2., 3.]).unwrap();
        for f in 0..m.faces().len() {
            let q = m.face_quadrature(f, 2).unwrap();
            let area: f64 = q.iter().map(|(_, w)| w).sum();
            assert!((area - m.faces()[f].measure).abs() < 1e-13);
            let mean: f64 = q.iter().map(|(x, w)| w * (x[0] + x[1] + x[2])).sum::<f64>() / area;
            let c = m.faces()[f].centroid;
            assert!((mean - (c[0] + c[1] + c[2])).abs() < 1e-13);
        }
    }
}
