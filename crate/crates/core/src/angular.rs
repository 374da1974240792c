//! Angular meshes obtained by radially projecting a tiling of the surface of
//! `[-1, 1]^d` onto the unit sphere, together with mapped tensor
//! Gauss-Legendre ordinate sets and Lagrangian angular bases.
//!
//! Faces of the reference polytope are numbered `+x, -x, +y, -y (, +z, -z)`:
//! face `f` lies on the plane `p[f / 2] = ±1` with `+` for even `f`. The
//! tangential coordinates of a face are the remaining axes in ascending
//! order. Patches are numbered by face, then lexicographically within the
//! face (last tangential index fastest); ordinates within a patch follow the
//! same tensor order.
//!
//! Patches are uniform cells in a face parameter `u in [-1, 1]`. The face
//! coordinate is either `u` itself (affine patches) or `tan(pi u / 4)`
//! (equiangular patches, the usual gnomonic cubed sphere).

use crate::error::{Error, Result};
use crate::geometry::{norm, Point};
use crate::quadrature::{gauss_legendre, map_rule, NodalBasis};

/// Radial chart `p / |p|`.
pub fn chart(p: &Point) -> Result<Point> {
    let n = norm(p);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("chart undefined at {p:?}")));
    }
    Ok([p[0] / n, p[1] / n, p[2] / n])
}

/// Surface Jacobian of the radial chart at a point on a flat face of the
/// reference polytope (`|p|^{-d}` for the face at unit distance).
pub fn chart_jacobian(p: &Point, dim: usize) -> f64 {
    norm(p).powi(-(dim as i32))
}

/// Map from the face parameter to the tangential face coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchMap {
    Affine,
    Equiangular,
}

impl PatchMap {
    /// Default for a dimension: affine on the square, equiangular on the cube.
    pub fn default_for(dim: usize) -> Self {
        if dim == 3 {
            PatchMap::Equiangular
        } else {
            PatchMap::Affine
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatchMap::Affine => "affine",
            PatchMap::Equiangular => "equiangular",
        }
    }

    fn coord(self, u: f64) -> f64 {
        match self {
            PatchMap::Affine => u,
            PatchMap::Equiangular => (std::f64::consts::FRAC_PI_4 * u).tan(),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            PatchMap::Affine => 1.0,
            PatchMap::Equiangular => {
                let t = (std::f64::consts::FRAC_PI_4 * u).tan();
                std::f64::consts::FRAC_PI_4 * (1.0 + t * t)
            }
        }
    }

    fn param(self, t: f64) -> f64 {
        match self {
            PatchMap::Affine => t,
            PatchMap::Equiangular => t.atan() / std::f64::consts::FRAC_PI_4,
        }
    }
}

impl std::str::FromStr for PatchMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(PatchMap::Affine),
            "equiangular" => Ok(PatchMap::Equiangular),
            other => Err(Error::InvalidArgument(format!(
                "unknown patch map '{other}' (affine | equiangular)"
            ))),
        }
    }
}

/// One tensor-product cell on a face of the reference polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub face: usize,
    /// Lower corner in face parameters.
    pub lo: [f64; 2],
    /// Upper corner in face parameters.
    pub hi: [f64; 2],
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct AngularMesh {
    dim: usize,
    n: usize,
    map: PatchMap,
    patches: Vec<Patch>,
}

fn face_axes(dim: usize, face: usize) -> (usize, f64, [usize; 2]) {
    let axis = face / 2;
    let sign = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut t = [usize::MAX; 2];
    let mut k = 0;
    for a in 0..dim {
        if a != axis {
            t[k] = a;
            k += 1;
        }
    }
    (axis, sign, t)
}

impl AngularMesh {
    /// `n` patches per edge (d = 2) or `n^2` per face (d = 3), each of degree
    /// `q`, with the default patch map for the dimension.
    pub fn new(dim: usize, n: usize, q: usize) -> Result<Self> {
        Self::with_map(dim, n, q, PatchMap::default_for(dim))
    }

    pub fn with_map(dim: usize, n: usize, q: usize, map: PatchMap) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!(
                "angular dimension must be 2 or 3, got {dim}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "angular mesh needs at least one patch per face".into(),
            ));
        }
        let cut = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;
        let mut patches = Vec::new();
        for face in 0..2 * dim {
            if dim == 2 {
                for i in 0..n {
                    patches.push(Patch {
                        face,
                        lo: [cut(i), 0.0],
                        hi: [cut(i + 1), 0.0],
                        degree: q,
                    });
                }
            } else {
                for i in 0..n {
                    for j in 0..n {
                        patches.push(Patch {
                            face,
                            lo: [cut(i), cut(j)],
                            hi: [cut(i + 1), cut(j + 1)],
                            degree: q,
                        });
                    }
                }
            }
        }
        Ok(Self {
            dim,
            n,
            map,
            patches,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self) -> PatchMap {
        self.map
    }

    pub fn patches_per_edge(&self) -> usize {
        self.n
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    /// Nominal angular mesh size: patch width in the face parameter.
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Point on the reference polytope surface for face parameters `u`.
    pub fn surface_point(&self, patch: usize, u: [f64; 2]) -> Point {
        let (axis, sign, tang) = face_axes(self.dim, self.patches[patch].face);
        let mut p = [0.0; 3];
        p[axis] = sign;
        p[tang[0]] = self.map.coord(u[0]);
        if self.dim == 3 {
            p[tang[1]] = self.map.coord(u[1]);
        }
        p
    }

    /// Direction for face parameters `u` in `patch`.
    pub fn direction(&self, patch: usize, u: [f64; 2]) -> Point {
        chart(&self.surface_point(patch, u)).expect("surface points are non-zero")
    }

    /// Surface measure density of the parametrisation `u -> direction`.
    pub fn jacobian(&self, patch: usize, u: [f64; 2]) -> f64 {
        let mut j = chart_jacobian(&self.surface_point(patch, u), self.dim);
        for k in 0..self.dim - 1 {
            j *= self.map.derivative(u[k]);
        }
        j
    }

    /// Patch containing `mu` and its face parameters.
    pub fn locate(&self, mu: &Point) -> Result<(usize, [f64; 2])> {
        let axis = (0..self.dim)
            .max_by(|&a, &b| mu[a].abs().total_cmp(&mu[b].abs()))
            .expect("dim >= 2");
        if !(mu[axis].abs() > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cannot locate direction {mu:?}"
            )));
        }
        let face = 2 * axis + usize::from(mu[axis] < 0.0);
        let (_, _, tang) = face_axes(self.dim, face);
        let s = 1.0 / mu[axis].abs();
        let mut t = [0.0; 2];
        let cell = |x: f64| (((x + 1.0) * 0.5 * self.n as f64).floor() as usize).min(self.n - 1);
        t[0] = self.map.param((mu[tang[0]] * s).clamp(-1.0, 1.0));
        let mut idx = cell(t[0]);
        if self.dim == 3 {
            t[1] = self.map.param((mu[tang[1]] * s).clamp(-1.0, 1.0));
            idx = idx * self.n + cell(t[1]);
        }
        let per_face = if self.dim == 2 {
            self.n
        } else {
            self.n * self.n
        };
        Ok((face * per_face + idx, t))
    }

    pub fn ordinates(&self) -> Result<OrdinateSet> {
        OrdinateSet::new(self)
    }
}

/// Per-patch Lagrangian basis in face parameters.
#[derive(Clone, Debug)]
pub struct PatchBasis {
    axes: Vec<NodalBasis>,
}

impl PatchBasis {
    pub fn len(&self) -> usize {
        self.axes.iter().map(NodalBasis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value of local basis function `i` at face parameters `t`.
    pub fn eval(&self, i: usize, t: [f64; 2]) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "basis index {i} out of range 0..{}",
                self.len()
            )));
        }
        let mut v = 1.0;
        let mut rem = i;
        for (k, b) in self.axes.iter().enumerate().rev() {
            v *= b.eval(rem % b.len(), t[k]);
            rem /= b.len();
        }
        Ok(v)
    }

    /// Values of all local basis functions at `t`, in tensor order.
    pub fn eval_all(&self, t: [f64; 2]) -> Vec<f64> {
        let vals: Vec<Vec<f64>> = self
            .axes
            .iter()
            .enumerate()
            .map(|(k, b)| b.values(t[k]))
            .collect();
        match vals.len() {
            1 => vals[0].clone(),
            _ => vals[0]
                .iter()
                .flat_map(|a| vals[1].iter().map(move |b| a * b))
                .collect(),
        }
    }
}

/// Discrete ordinates: mapped Gauss points with weights including the chart
/// Jacobian.
#[derive(Clone, Debug)]
pub struct OrdinateSet {
    pub dim: usize,
    pub directions: Vec<Point>,
    pub weights: Vec<f64>,
    pub patch: Vec<usize>,
    pub local: Vec<usize>,
    /// Face parameters of each ordinate.
    pub reference: Vec<[f64; 2]>,
    /// First ordinate index of each patch (plus a final end marker).
    pub offsets: Vec<usize>,
    pub bases: Vec<PatchBasis>,
}

impl OrdinateSet {
    pub fn new(mesh: &AngularMesh) -> Result<Self> {
        let dim = mesh.dim;
        let mut set = OrdinateSet {
            dim,
            directions: Vec::new(),
            weights: Vec::new(),
            patch: Vec::new(),
            local: Vec::new(),
            reference: Vec::new(),
            offsets: vec![0],
            bases: Vec::new(),
        };
        for (pi, patch) in mesh.patches.iter().enumerate() {
            let base = gauss_legendre(patch.degree + 1)?;
            let rules = (0..dim - 1)
                .map(|k| map_rule(&base, patch.lo[k], patch.hi[k]))
                .collect::<Result<Vec<_>>>()?;
            let mut points: Vec<([f64; 2], f64)> = Vec::new();
            if dim == 2 {
                for (t, w) in rules[0].iter() {
                    points.push(([t, 0.0], w));
                }
            } else {
                for (t0, w0) in rules[0].iter() {
                    for (t1, w1) in rules[1].iter() {
                        points.push(([t0, t1], w0 * w1));
                    }
                }
            }
            for (local, (t, w)) in points.into_iter().enumerate() {
                set.directions.push(mesh.direction(pi, t));
                set.weights.push(w * mesh.jacobian(pi, t));
                set.patch.push(pi);
                set.local.push(local);
                set.reference.push(t);
            }
            set.offsets.push(set.directions.len());
            set.bases.push(PatchBasis {
                axes: rules
                    .iter()
                    .map(NodalBasis::from_rule)
                    .collect::<Result<_>>()?,
            });
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn patch_range(&self, patch: usize) -> std::ops::Range<usize> {
        self.offsets[patch]..self.offsets[patch + 1]
    }

    /// Mapped basis function `i` of `patch` at face parameters `t`.
    pub fn eval_angular_basis(&self, patch: usize, i: usize, t: [f64; 2]) -> Result<f64> {
        self.bases
            .get(patch)
            .ok_or_else(|| Error::InvalidArgument(format!("patch {patch} out of range")))?
            .eval(i, t)
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(mu, w)| w * f(mu))
            .sum()
    }
}

/// Measure of the unit sphere in `R^dim` (arc length for `dim = 2`).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("sphere dimension must be 2 or 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Adaptive;
    use std::f64::consts::PI;

    #[test]
    fn patch_counts() {
        assert_eq!(AngularMesh::new(2, 1, 0).unwrap().num_patches(), 4);
        assert_eq!(AngularMesh::new(3, 2, 0).unwrap().num_patches(), 24);
        assert!(AngularMesh::new(4, 1, 0).is_err());
        assert!(AngularMesh::new(2, 0, 0).is_err());
    }

    #[test]
    fn chart_examples() {
        let c = chart(&[1.0, 1.0, 0.0]).unwrap();
        assert!((c[0] - 0.5f64.sqrt()).abs() < 1e-15 && (c[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(chart(&[1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert!(chart(&[0.0; 3]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // d = 2 on edge x = 1: arc length of t -> atan(t)
        for &t in &[0.0, 0.3, -0.7, 1.0] {
            let j = chart_jacobian(&[1.0, t, 0.0], 2);
            assert!((j - 1.0 / (1.0 + t * t)).abs() < 1e-15);
            let h = 1e-6;
            let a = chart(&[1.0, t + h, 0.0]).unwrap();
            let b = chart(&[1.0, t - h, 0.0]).unwrap();
            let fd = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / (2.0 * h);
            assert!((fd - j).abs() < 1e-8);
        }
        // d = 3: area element from the cross product of tangent derivatives
        let (u, v) = (0.4, -0.2);
        let h = 1e-5;
        let d = |du: f64, dv: f64| chart(&[u + du, v + dv, 1.0]).unwrap();
        let (pu, mu) = (d(h, 0.0), d(-h, 0.0));
        let (pv, mv) = (d(0.0, h), d(0.0, -h));
        let tu = [
            (pu[0] - mu[0]) / (2.0 * h),
            (pu[1] - mu[1]) / (2.0 * h),
            (pu[2] - mu[2]) / (2.0 * h),
        ];
        let tv = [
            (pv[0] - mv[0]) / (2.0 * h),
            (pv[1] - mv[1]) / (2.0 * h),
            (pv[2] - mv[2]) / (2.0 * h),
        ];
        let area = norm(&crate::geometry::cross(&tu, &tv));
        assert!((area - chart_jacobian(&[u, v, 1.0], 3)).abs() < 1e-8);
    }

    #[test]
    fn two_d_image_arc_length_by_adaptive_oracle() {
        let m = AngularMesh::new(2, 2, 0).unwrap();
        let quad = Adaptive::default();
        let total: f64 = m
            .patches()
            .iter()
            .map(|p| {
                quad.integrate(|t| 1.0 / (1.0 + t * t), p.lo[0], p.hi[0])
                    .unwrap()
            })
            .sum();
        assert_eq!(m.num_patches(), 8);
        assert!((total - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn lowest_order_ordinates_are_axis_directions() {
        let o = AngularMesh::new(2, 1, 0).unwrap().ordinates().unwrap();
        let expect = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        assert_eq!(o.len(), 4);
        for (mu, e) in o.directions.iter().zip(expect) {
            assert!((mu[0] - e[0]).abs() < 1e-15 && (mu[1] - e[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_sums() {
        // Three-point Gauss on a quarter edge leaves an error of about 2.9e-6.
        let o = AngularMesh::new(2, 4, 2).unwrap().ordinates().unwrap();
        assert!((o.total_weight() - 2.0 * PI).abs() < 5e-6);
        let o = AngularMesh::with_map(2, 4, 2, PatchMap::Equiangular)
            .unwrap()
            .ordinates()
            .unwrap();
        assert!((o.total_weight() - 2.0 * PI).abs() < 1e-13);
        let o = AngularMesh::new(2, 8, 3).unwrap().ordinates().unwrap();
        assert!((o.total_weight() - 2.0 * PI).abs() < 1e-6);
        let o = AngularMesh::new(3, 2, 2).unwrap().ordinates().unwrap();
        assert!((o.total_weight() - 4.0 * PI).abs() < 1e-4);
        // Affine patches on the cube are much less accurate at this resolution.
        let o = AngularMesh::with_map(3, 2, 2, PatchMap::Affine)
            .unwrap()
            .ordinates()
            .unwrap();
        assert!((o.total_weight() - 4.0 * PI).abs() > 1e-3);
        let o = AngularMesh::with_map(3, 8, 3, PatchMap::Affine)
            .unwrap()
            .ordinates()
            .unwrap();
        assert!((o.total_weight() - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn parametrised_jacobian_matches_finite_differences() {
        for map in [PatchMap::Affine, PatchMap::Equiangular] {
            let mesh = AngularMesh::with_map(3, 2, 1, map).unwrap();
            let (u, v) = (0.3, -0.45);
            let h = 1e-5;
            let d = |du: f64, dv: f64| mesh.direction(4, [u + du, v + dv]);
            let (pu, mu) = (d(h, 0.0), d(-h, 0.0));
            let (pv, mv) = (d(0.0, h), d(0.0, -h));
            let tu = [
                (pu[0] - mu[0]) / (2.0 * h),
                (pu[1] - mu[1]) / (2.0 * h),
                (pu[2] - mu[2]) / (2.0 * h),
            ];
            let tv = [
                (pv[0] - mv[0]) / (2.0 * h),
                (pv[1] - mv[1]) / (2.0 * h),
                (pv[2] - mv[2]) / (2.0 * h),
            ];
            let area = norm(&crate::geometry::cross(&tu, &tv));
            assert!((area - mesh.jacobian(4, [u, v])).abs() < 1e-8, "{map:?}");
        }
    }

    #[test]
    fn weight_sum_error_decreases_under_refinement() {
        for dim in [2, 3] {
            let mut prev = f64::INFINITY;
            for (n, q) in [(1, 0), (2, 1), (4, 2), (8, 3)] {
                let o = AngularMesh::with_map(dim, n, q, PatchMap::Affine)
                    .unwrap()
                    .ordinates()
                    .unwrap();
                let err = (o.total_weight() - sphere_measure(dim)).abs();
                assert!(err < prev, "dim {dim} n {n}: {err} >= {prev}");
                prev = err;
            }
            assert!(prev <= 1e-6);
        }
    }

    #[test]
    fn second_moments() {
        let o = AngularMesh::new(2, 8, 3).unwrap().ordinates().unwrap();
        assert!((o.integrate(|m| m[0] * m[0]) - PI).abs() < 1e-5);
        let o = AngularMesh::new(3, 8, 3).unwrap().ordinates().unwrap();
        assert!((o.integrate(|m| m[0] * m[0]) - 4.0 * PI / 3.0).abs() < 1e-5);
    }

    #[test]
    fn ordinates_are_unit_positive_and_distinct() {
        for dim in [2, 3] {
            for n in 1..=3 {
                for q in 0..=4 {
                    let o = AngularMesh::new(dim, n, q).unwrap().ordinates().unwrap();
                    assert_eq!(
                        o.len(),
                        2 * dim * n.pow(dim as u32 - 1) * (q + 1).pow(dim as u32 - 1)
                    );
                    for (mu, w) in o.directions.iter().zip(&o.weights) {
                        assert!((norm(mu) - 1.0).abs() < 1e-14 && *w > 0.0);
                    }
                    for p in 0..o.bases.len() {
                        let r = o.patch_range(p);
                        for a in r.clone() {
                            for b in (a + 1)..r.end {
                                assert!(
                                    crate::geometry::distance(&o.directions[a], &o.directions[b])
                                        > 1e-12
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mapped_basis_is_lagrangian_and_partition_of_unity() {
        for (dim, map) in [
            (2, PatchMap::Affine),
            (3, PatchMap::Affine),
            (3, PatchMap::Equiangular),
        ] {
            let mesh = AngularMesh::with_map(dim, 2, 2, map).unwrap();
            let o = mesh.ordinates().unwrap();
            for a in 0..o.len() {
                let (p, t) = mesh.locate(&o.directions[a]).unwrap();
                assert_eq!(p, o.patch[a]);
                for b in o.patch_range(p) {
                    let v = o.eval_angular_basis(p, o.local[b], t).unwrap();
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-13);
                }
                let s: f64 = o.bases[p].eval_all([0.17, -0.31]).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
            assert!(o.eval_angular_basis(0, 9, [0.0, 0.0]).is_err());
        }
    }

    #[test]
    fn locate_round_trips_directions() {
        for map in [PatchMap::Affine, PatchMap::Equiangular] {
            let mesh = AngularMesh::with_map(3, 3, 1, map).unwrap();
            for p in 0..mesh.num_patches() {
                let pt = mesh.patches()[p].clone();
                let t = [0.5 * (pt.lo[0] + pt.hi[0]), 0.5 * (pt.lo[1] + pt.hi[1])];
                let (q, s) = mesh.locate(&mesh.direction(p, t)).unwrap();
                assert_eq!(p, q);
                assert!((s[0] - t[0]).abs() < 1e-14 && (s[1] - t[1]).abs() < 1e-14);
            }
        }
    }
}
