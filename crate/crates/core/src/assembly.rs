//! Spatial DG operators, load vectors and scattering moments.
//!
//! Conventions: the transport matrix for ordinate `m` and energy node `l` is
//! `w * A` with `w = omega_l * omega_m` and `(A)_{ij} = a(phi_j, phi_i)`
//! (row = test function, column = trial function). Load vectors and
//! scattering sources are assembled against the same scaled form, so no
//! weight inverse appears on the right-hand side.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use crate::angular::{AngularMesh, OrdinateSet};
use crate::energy::EnergyGrid;
use crate::error::{Error, Result};
use crate::geometry::{dot, Point};
use crate::physics::{beta_gamma, cosine, EnergyWindow, Kernel, MaterialModel};
use crate::quadrature::{gauss_on, GaussRule};
use crate::solver::FluxState;
use crate::spatial_mesh::SpatialMesh;

/// Extra quadrature order used for data-dependent integrands.
pub const DATA_OVERSAMPLING: usize = 2;

/// Monomial exponents of total degree `<= p`, ordered by total degree.
pub fn monomials(dim: usize, p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for t in 0..=p {
        if dim == 2 {
            for a in (0..=t).rev() {
                out.push([a, t - a, 0]);
            }
        } else {
            for a in (0..=t).rev() {
                for b in (0..=t - a).rev() {
                    out.push([a, b, t - a - b]);
                }
            }
        }
    }
    out
}

/// Number of polynomials of total degree `<= p` in `dim` variables.
pub fn poly_dim(dim: usize, p: usize) -> usize {
    match dim {
        2 => (p + 1) * (p + 2) / 2,
        3 => (p + 1) * (p + 2) * (p + 3) / 6,
        _ => panic!("dimension must be 2 or 3"),
    }
}

/// Local bases (centroid-scaled monomials) and global numbering.
#[derive(Clone, Debug)]
pub struct DofMap {
    dim: usize,
    offsets: Vec<usize>,
    exponents: Vec<Vec<[usize; 3]>>,
    centroids: Vec<Point>,
    scales: Vec<f64>,
}

impl DofMap {
    pub fn new(mesh: &SpatialMesh) -> Self {
        let dim = mesh.dim();
        let mut offsets = vec![0];
        let mut exponents = Vec::with_capacity(mesh.num_elements());
        for el in mesh.elements() {
            let ex = monomials(dim, el.degree);
            offsets.push(offsets[offsets.len() - 1] + ex.len());
            exponents.push(ex);
        }
        Self {
            dim,
            offsets,
            exponents,
            centroids: mesh.elements().iter().map(|e| e.metrics.centroid).collect(),
            scales: mesh.elements().iter().map(|e| e.metrics.h).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, e: usize) -> usize {
        self.offsets[e]
    }

    pub fn local_len(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn range(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    /// Values of the local basis of element `e` at `x`.
    pub fn values(&self, e: usize, x: &Point, out: &mut [f64]) {
        let (c, h) = (&self.centroids[e], self.scales[e]);
        let y = [(x[0] - c[0]) / h, (x[1] - c[1]) / h, (x[2] - c[2]) / h];
        for (o, a) in out.iter_mut().zip(&self.exponents[e]) {
            *o = (0..self.dim).map(|k| y[k].powi(a[k] as i32)).product();
        }
    }

    /// Gradients of the local basis of element `e` at `x`.
    pub fn gradients(&self, e: usize, x: &Point, out: &mut [Point]) {
        let (c, h) = (&self.centroids[e], self.scales[e]);
        let y = [(x[0] - c[0]) / h, (x[1] - c[1]) / h, (x[2] - c[2]) / h];
        for (o, a) in out.iter_mut().zip(&self.exponents[e]) {
            *o = [0.0; 3];
            for k in 0..self.dim {
                if a[k] == 0 {
                    continue;
                }
                let mut v = a[k] as f64 * y[k].powi(a[k] as i32 - 1) / h;
                for j in 0..self.dim {
                    if j != k {
                        v *= y[j].powi(a[j] as i32);
                    }
                }
                o[k] = v;
            }
        }
    }
}

/// Precomputed per-element quadrature and direction-independent blocks.
#[derive(Clone, Debug)]
pub struct ElementData {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Basis values, point-major (`points.len() * nb`).
    pub phi: Vec<f64>,
    pub nb: usize,
    /// `M_ij = int phi_i phi_j`.
    pub mass: Vec<f64>,
    /// `C^k_ij = int (d_k phi_j) phi_i`.
    pub stream: [Vec<f64>; 3],
}

/// Precomputed face quadrature and face mass blocks.
#[derive(Clone, Debug)]
pub struct FaceData {
    pub owner: usize,
    pub neighbour: Option<usize>,
    pub normal: Point,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub phi_owner: Vec<f64>,
    pub phi_neighbour: Vec<f64>,
    /// `int phi^test_i phi^trial_j` for (test, trial) = (owner, owner),
    /// (owner, neighbour), (neighbour, owner), (neighbour, neighbour).
    pub oo: Vec<f64>,
    pub on: Vec<f64>,
    pub no: Vec<f64>,
    pub nn: Vec<f64>,
}

fn outer_accumulate(out: &mut [f64], w: f64, test: &[f64], trial: &[f64]) {
    let nt = trial.len();
    for (i, a) in test.iter().enumerate() {
        for (j, b) in trial.iter().enumerate() {
            out[i * nt + j] += w * a * b;
        }
    }
}

/// Solves the direction-independent part of the discretisation.
#[derive(Clone, Debug)]
pub struct SpatialOperators {
    pub elements: Vec<ElementData>,
    pub faces: Vec<FaceData>,
    /// Boundary faces of each element.
    pub boundary_faces: Vec<Vec<usize>>,
}

impl SpatialOperators {
    pub fn new(mesh: &SpatialMesh, dofs: &DofMap) -> Result<Self> {
        let dim = mesh.dim();
        let elements = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| -> Result<ElementData> {
                let p = mesh.elements()[e].degree;
                let quad = mesh.element_quadrature(e, 2 * p + 2 + DATA_OVERSAMPLING)?;
                let nb = dofs.local_len(e);
                let mut phi = vec![0.0; quad.len() * nb];
                let mut grad = vec![[0.0; 3]; nb];
                let mut mass = vec![0.0; nb * nb];
                let mut stream = [vec![0.0; nb * nb], vec![0.0; nb * nb], vec![0.0; nb * nb]];
                for (q, (x, w)) in quad.iter().enumerate() {
                    let v = &mut phi[q * nb..(q + 1) * nb];
                    dofs.values(e, x, v);
                    dofs.gradients(e, x, &mut grad);
                    for i in 0..nb {
                        for j in 0..nb {
                            mass[i * nb + j] += w * v[i] * v[j];
                            for k in 0..dim {
                                stream[k][i * nb + j] += w * grad[j][k] * v[i];
                            }
                        }
                    }
                }
                Ok(ElementData {
                    points: quad.iter().map(|(x, _)| *x).collect(),
                    weights: quad.iter().map(|(_, w)| *w).collect(),
                    phi,
                    nb,
                    mass,
                    stream,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let faces = (0..mesh.faces().len())
            .into_par_iter()
            .map(|f| -> Result<FaceData> {
                let face = &mesh.faces()[f];
                let po = mesh.elements()[face.owner].degree;
                let pn = face.neighbour.map_or(0, |n| mesh.elements()[n].degree);
                let quad = mesh.face_quadrature(f, 2 * po.max(pn) + 2 + DATA_OVERSAMPLING)?;
                let no_ = dofs.local_len(face.owner);
                let nn_ = face.neighbour.map_or(0, |n| dofs.local_len(n));
                let mut data = FaceData {
                    owner: face.owner,
                    neighbour: face.neighbour,
                    normal: face.normal,
                    points: quad.iter().map(|(x, _)| *x).collect(),
                    weights: quad.iter().map(|(_, w)| *w).collect(),
                    phi_owner: vec![0.0; quad.len() * no_],
                    phi_neighbour: vec![0.0; quad.len() * nn_],
                    oo: vec![0.0; no_ * no_],
                    on: vec![0.0; no_ * nn_],
                    no: vec![0.0; nn_ * no_],
                    nn: vec![0.0; nn_ * nn_],
                };
                for (q, (x, w)) in quad.iter().enumerate() {
                    let vo = &mut data.phi_owner[q * no_..(q + 1) * no_];
                    dofs.values(face.owner, x, vo);
                    outer_accumulate(&mut data.oo, *w, vo, vo);
                    if let Some(n) = face.neighbour {
                        let vn = &mut data.phi_neighbour[q * nn_..(q + 1) * nn_];
                        dofs.values(n, x, vn);
                        let (vo, vn) = (
                            &data.phi_owner[q * no_..(q + 1) * no_],
                            &data.phi_neighbour[q * nn_..(q + 1) * nn_],
                        );
                        outer_accumulate(&mut data.on, *w, vo, vn);
                        outer_accumulate(&mut data.no, *w, vn, vo);
                        outer_accumulate(&mut data.nn, *w, vn, vn);
                    }
                }
                Ok(data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut boundary_faces = vec![Vec::new(); mesh.num_elements()];
        for (f, face) in mesh.faces().iter().enumerate() {
            if face.neighbour.is_none() {
                boundary_faces[face.owner].push(f);
            }
        }
        Ok(Self {
            elements,
            faces,
            boundary_faces,
        })
    }
}

/// Source and boundary data for the load vectors.
pub trait SourceData: Sync {
    /// Volume source at points `xs` and energy `e` for every direction in
    /// `mus`; `out[m][q]` receives the value at `mus[m]`, `xs[q]`.
    fn volume(&self, xs: &[Point], e: f64, mus: &[Point], out: &mut [Vec<f64>]) -> Result<()>;
    /// Inflow boundary value.
    fn boundary(&self, x: &Point, mu: &Point, e: f64) -> f64;
}

/// Source given by plain functions of `(x, mu, E)`.
pub struct FnSource<F, G> {
    pub f: F,
    pub g: G,
}

impl<F, G> SourceData for FnSource<F, G>
where
    F: Fn(&Point, &Point, f64) -> f64 + Sync,
    G: Fn(&Point, &Point, f64) -> f64 + Sync,
{
    fn volume(&self, xs: &[Point], e: f64, mus: &[Point], out: &mut [Vec<f64>]) -> Result<()> {
        for (mu, row) in mus.iter().zip(out.iter_mut()) {
            for (x, o) in xs.iter().zip(row.iter_mut()) {
                *o = (self.f)(x, mu, e);
            }
        }
        Ok(())
    }
    fn boundary(&self, x: &Point, mu: &Point, e: f64) -> f64 {
        (self.g)(x, mu, e)
    }
}

/// Constant volume source and constant inflow value.
pub fn constant_source(f: f64, g: f64) -> impl SourceData {
    FnSource {
        f: move |_: &Point, _: &Point, _: f64| f,
        g: move |_: &Point, _: &Point, _: f64| g,
    }
}

/// Scattering moments `Theta^{j,i}_{g',g}(mu_m . mu_n)` for every ordinate
/// pair and every pair of energy nodes (source `j`, target `i`), including
/// up-scatter pairs, which a down-scatter kernel leaves at zero.
#[derive(Clone, Debug)]
pub struct ScatterMoments {
    n_ord: usize,
    n_nodes: usize,
    data: Vec<f64>,
    in_group_nonzero: Vec<bool>,
}

impl ScatterMoments {
    pub fn build(
        model: &dyn MaterialModel,
        grid: &EnergyGrid,
        ordinates: &OrdinateSet,
    ) -> Result<Self> {
        let n_ord = ordinates.len();
        let n_nodes = grid.num_nodes();
        let mut moments = Self {
            n_ord,
            n_nodes,
            data: vec![0.0; n_ord * n_ord * n_nodes * n_nodes],
            in_group_nonzero: vec![false; grid.num_groups()],
        };
        if matches!(model.kernel(), Kernel::None) {
            return Ok(moments);
        }
        // Moments depend on the pair only through the cosine; evaluate each
        // distinct cosine once.
        let mut cosines: BTreeMap<u64, usize> = BTreeMap::new();
        let mut pair_key = vec![0usize; n_ord * n_ord];
        for m in 0..n_ord {
            for n in 0..n_ord {
                let c = cosine(&ordinates.directions[m], &ordinates.directions[n]);
                let len = cosines.len();
                let k = *cosines.entry(c.to_bits()).or_insert(len);
                pair_key[m * n_ord + n] = k;
            }
        }
        let mut unique = vec![0.0; cosines.len()];
        for (&bits, &k) in &cosines {
            unique[k] = f64::from_bits(bits);
        }
        let blocks = unique
            .par_iter()
            .map(|&c| theta_block(model, grid, c))
            .collect::<Result<Vec<_>>>()?;
        let nn = n_nodes * n_nodes;
        for (pair, &k) in pair_key.iter().enumerate() {
            moments.data[pair * nn..(pair + 1) * nn].copy_from_slice(&blocks[k]);
        }
        for g in 0..grid.num_groups() {
            let r = grid.node_range(g);
            moments.in_group_nonzero[g] = blocks.iter().any(|b| {
                r.clone()
                    .any(|j| r.clone().any(|i| b[j * n_nodes + i] != 0.0))
            });
        }
        Ok(moments)
    }

    pub fn num_ordinates(&self) -> usize {
        self.n_ord
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Moment for target ordinate `m`, source ordinate `n`, source node `j`,
    /// target node `i` (global node indices).
    #[inline]
    pub fn get(&self, m: usize, n: usize, j: usize, i: usize) -> f64 {
        self.data[((m * self.n_ord + n) * self.n_nodes + j) * self.n_nodes + i]
    }

    /// Whether group `g` scatters into itself.
    pub fn has_in_group_scattering(&self, g: usize) -> bool {
        self.in_group_nonzero[g]
    }

    /// Largest up-scatter moment magnitude (source group below target group).
    pub fn max_upscatter(&self, grid: &EnergyGrid) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.n_ord {
            for n in 0..self.n_ord {
                for j in 0..self.n_nodes {
                    for i in 0..self.n_nodes {
                        if grid.node(j).group > grid.node(i).group {
                            worst = worst.max(self.get(m, n, j, i).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Overwrites one moment. Intended for fault-injection tests of the
    /// verification suite.
    pub fn inject(&mut self, m: usize, n: usize, j: usize, i: usize, value: f64) {
        let idx = ((m * self.n_ord + n) * self.n_nodes + j) * self.n_nodes + i;
        self.data[idx] = value;
    }
}

/// Extra Gauss points used for the energy integrals inside moments.
const MOMENT_OVERSAMPLING: usize = 8;

/// All node-pair moments for one cosine, `[j * n_nodes + i]`.
pub fn theta_block(model: &dyn MaterialModel, grid: &EnergyGrid, c: f64) -> Result<Vec<f64>> {
    let nn = grid.num_nodes();
    let mut block = vec![0.0; nn * nn];
    for gs in 0..grid.num_groups() {
        for gt in 0..grid.num_groups() {
            let vals = theta_group_pair(model, grid, c, gs, gt)?;
            let (rs, rt) = (grid.node_range(gs), grid.node_range(gt));
            for (a, j) in rs.clone().enumerate() {
                for (b, i) in rt.clone().enumerate() {
                    block[j * nn + i] = vals[a * rt.len() + b];
                }
            }
        }
    }
    Ok(block)
}

/// Moments from source group `gs` to target group `gt` at cosine `c`,
/// `[j_local * n_target + i_local]`.
pub fn theta_group_pair(
    model: &dyn MaterialModel,
    grid: &EnergyGrid,
    c: f64,
    gs: usize,
    gt: usize,
) -> Result<Vec<f64>> {
    let (bs, bt) = (grid.group_basis(gs), grid.group_basis(gt));
    let (ns, nt) = (bs.len(), bt.len());
    let mut out = vec![0.0; ns * nt];
    let (slo, shi) = grid.group_interval(gs);
    let (tlo, thi) = grid.group_interval(gt);
    let npts = grid.degree(gs).max(grid.degree(gt)) + MOMENT_OVERSAMPLING;
    match model.kernel() {
        Kernel::None => {}
        Kernel::Delta(k) => {
            // Integrate over target energies whose kinematic pre-image lies in
            // the source group.
            let lo = tlo.max(k.out_energy(slo, c));
            let hi = thi.min(k.out_energy(shi, c));
            if hi > lo {
                let rule = gauss_on(npts, lo, hi)?;
                for (e, w) in rule.iter() {
                    let Some(ei) = k.in_energy(e, c) else {
                        continue;
                    };
                    let amp = k.amplitude(ei, c) * k.jacobian(ei, c);
                    let (vs, vt) = (bs.values(ei.clamp(slo, shi)), bt.values(e));
                    for a in 0..ns {
                        for b in 0..nt {
                            out[a * nt + b] += w * amp * vs[a] * vt[b];
                        }
                    }
                }
            }
        }
        Kernel::Smooth(k) => {
            if gs > gt {
                return Ok(out);
            }
            let outer: GaussRule = gauss_on(npts, tlo, thi)?;
            for (e, w) in outer.iter() {
                // in-group: incoming energies above the outgoing one only
                let (a_lo, a_hi) = if gs == gt { (e, shi) } else { (slo, shi) };
                if a_hi <= a_lo {
                    continue;
                }
                let inner = gauss_on(npts, a_lo, a_hi)?;
                let vt = bt.values(e);
                for (ep, wp) in inner.iter() {
                    let th = k.theta(c, ep, e);
                    let vs = bs.values(ep);
                    for a in 0..ns {
                        for b in 0..nt {
                            out[a * nt + b] += w * wp * th * vs[a] * vt[b];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The complete discretisation of one problem: meshes, bases, model and all
/// precomputed direction-independent data.
pub struct Discretisation {
    pub mesh: SpatialMesh,
    pub dofs: DofMap,
    pub angular: AngularMesh,
    pub ordinates: OrdinateSet,
    pub grid: EnergyGrid,
    pub model: Arc<dyn MaterialModel>,
    pub window: EnergyWindow,
    pub ops: SpatialOperators,
    /// `(beta, gamma)` at every energy node.
    pub rates: Vec<(f64, f64)>,
    /// `int (alpha + beta) phi_i phi_j` per energy node and element.
    pub sigma_mass: Vec<Vec<Vec<f64>>>,
    pub moments: ScatterMoments,
}

impl Discretisation {
    pub fn new(
        mesh: SpatialMesh,
        angular: AngularMesh,
        grid: EnergyGrid,
        model: Arc<dyn MaterialModel>,
    ) -> Result<Self> {
        if mesh.dim() != angular.dim() {
            return Err(Error::InvalidArgument(format!(
                "spatial dimension {} does not match angular dimension {}",
                mesh.dim(),
                angular.dim()
            )));
        }
        if model.dim() != mesh.dim() {
            return Err(Error::InvalidArgument(format!(
                "model dimension {} does not match spatial dimension {}",
                model.dim(),
                mesh.dim()
            )));
        }
        let dofs = DofMap::new(&mesh);
        let ordinates = angular.ordinates()?;
        let window = EnergyWindow::of(&grid);
        let ops = SpatialOperators::new(&mesh, &dofs)?;
        let rates = grid
            .nodes()
            .iter()
            .map(|n| beta_gamma(model.as_ref(), n.energy, window))
            .collect::<Result<Vec<_>>>()?;
        let sigma_mass = grid
            .nodes()
            .iter()
            .zip(&rates)
            .map(|(node, (beta, _))| {
                ops.elements
                    .iter()
                    .map(|el| {
                        let nb = el.nb;
                        let mut m = vec![0.0; nb * nb];
                        for (q, (x, w)) in el.points.iter().zip(&el.weights).enumerate() {
                            let s = model.alpha(x, node.energy) + beta;
                            let v = &el.phi[q * nb..(q + 1) * nb];
                            outer_accumulate(&mut m, w * s, v, v);
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        let moments = ScatterMoments::build(model.as_ref(), &grid, &ordinates)?;
        Ok(Self {
            mesh,
            dofs,
            angular,
            ordinates,
            grid,
            model,
            window,
            ops,
            rates,
            sigma_mass,
            moments,
        })
    }

    /// Spatial unknowns per (energy node, ordinate).
    pub fn n_x(&self) -> usize {
        self.dofs.len()
    }

    /// Total number of degrees of freedom `N_X * N_S * N_E`.
    pub fn num_dofs(&self) -> usize {
        self.n_x() * self.ordinates.len() * self.grid.num_nodes()
    }

    /// Weight `omega_l * omega_m` of the (energy node, ordinate) pair.
    pub fn pair_weight(&self, l: usize, m: usize) -> f64 {
        self.grid.node(l).weight * self.ordinates.weights[m]
    }

    /// Entries of `weight * A` for direction `mu` at energy node `l`, summed
    /// per position and sorted by (column, row).
    pub fn transport_entries(&self, mu: &Point, l: usize, weight: f64) -> Vec<(usize, usize, f64)> {
        let mut blocks: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let dim = self.mesh.dim();
        for (e, el) in self.ops.elements.iter().enumerate() {
            let nb = el.nb;
            let mut b = self.sigma_mass[l][e].clone();
            for k in 0..dim {
                if mu[k] != 0.0 {
                    for (bi, ck) in b.iter_mut().zip(&el.stream[k]) {
                        *bi += mu[k] * ck;
                    }
                }
            }
            debug_assert_eq!(b.len(), nb * nb);
            blocks.insert((e, e), b);
        }
        let add = |row: usize,
                   col: usize,
                   scale: f64,
                   src: &[f64],
                   blocks: &mut BTreeMap<(usize, usize), Vec<f64>>| {
            let entry = blocks
                .entry((row, col))
                .or_insert_with(|| vec![0.0; src.len()]);
            for (a, s) in entry.iter_mut().zip(src) {
                *a += scale * s;
            }
        };
        for face in &self.ops.faces {
            let s = dot(mu, &face.normal);
            if s == 0.0 {
                continue;
            }
            let (o, nbr) = (face.owner, face.neighbour);
            if s < 0.0 {
                add(o, o, -s, &face.oo, &mut blocks);
                if let Some(n) = nbr {
                    add(o, n, s, &face.on, &mut blocks);
                }
            } else if let Some(n) = nbr {
                add(n, n, s, &face.nn, &mut blocks);
                add(n, o, -s, &face.no, &mut blocks);
            }
        }
        let mut entries = Vec::new();
        for ((re, ce), b) in blocks {
            let (r0, c0) = (self.dofs.offset(re), self.dofs.offset(ce));
            let nc = self.dofs.local_len(ce);
            for (idx, v) in b.iter().enumerate() {
                if *v != 0.0 {
                    entries.push((r0 + idx / nc, c0 + idx % nc, weight * v));
                }
            }
        }
        entries.sort_by_key(|&(r, c, _)| (c, r));
        entries
    }

    /// Sparse matrix `weight * A` for direction `mu` at energy node `l`.
    pub fn transport_matrix(
        &self,
        mu: &Point,
        l: usize,
        weight: f64,
    ) -> Result<SparseColMat<usize, f64>> {
        let n = self.n_x();
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .transport_entries(mu, l, weight)
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| {
            Error::InvalidArgument(format!("sparse matrix construction failed: {e:?}"))
        })
    }

    /// Quadrature rule used to integrate data over group `g` in energy.
    pub fn energy_data_rule(&self, g: usize) -> Result<GaussRule> {
        let (lo, hi) = self.grid.group_interval(g);
        gauss_on(self.grid.degree(g) + 1 + DATA_OVERSAMPLING, lo, hi)
    }

    /// Load vectors of group `g` for every (node, ordinate) pair, indexed
    /// `[(l - first node of g) * n_ord + m]`.
    pub fn load_vectors(&self, g: usize, source: &dyn SourceData) -> Result<Vec<Vec<f64>>> {
        let n_ord = self.ordinates.len();
        let nodes: Vec<usize> = self.grid.node_range(g).collect();
        let basis = self.grid.group_basis(g);
        let erule = self.energy_data_rule(g)?;
        let ephi: Vec<Vec<f64>> = erule.nodes.iter().map(|&e| basis.values(e)).collect();
        let dirs = &self.ordinates.directions;
        let local = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| -> Result<Vec<f64>> {
                let el = &self.ops.elements[e];
                let nb = el.nb;
                // out[(li * n_ord + m) * nb + i]
                let mut out = vec![0.0; nodes.len() * n_ord * nb];
                let mut fvals = vec![vec![0.0; el.points.len()]; n_ord];
                for (k, (energy, ew)) in erule.iter().enumerate() {
                    source.volume(&el.points, energy, dirs, &mut fvals)?;
                    for (li, phi_e) in ephi[k].iter().enumerate() {
                        for m in 0..n_ord {
                            let scale = ew * phi_e * self.ordinates.weights[m];
                            let dst = &mut out[(li * n_ord + m) * nb..(li * n_ord + m + 1) * nb];
                            for (q, w) in el.weights.iter().enumerate() {
                                let v = scale * w * fvals[m][q];
                                for (d, p) in dst.iter_mut().zip(&el.phi[q * nb..(q + 1) * nb]) {
                                    *d += v * p;
                                }
                            }
                        }
                    }
                    for &f in &self.ops.boundary_faces[e] {
                        let face = &self.ops.faces[f];
                        for m in 0..n_ord {
                            let s = dot(&dirs[m], &face.normal);
                            if s >= 0.0 {
                                continue;
                            }
                            for (li, phi_e) in ephi[k].iter().enumerate() {
                                let scale = -s * ew * phi_e * self.ordinates.weights[m];
                                let dst =
                                    &mut out[(li * n_ord + m) * nb..(li * n_ord + m + 1) * nb];
                                for (q, (x, w)) in face.points.iter().zip(&face.weights).enumerate()
                                {
                                    let v = scale * w * source.boundary(x, &dirs[m], energy);
                                    for (d, p) in
                                        dst.iter_mut().zip(&face.phi_owner[q * nb..(q + 1) * nb])
                                    {
                                        *d += v * p;
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let n_x = self.n_x();
        let mut loads = vec![vec![0.0; n_x]; nodes.len() * n_ord];
        for (e, block) in local.iter().enumerate() {
            let nb = self.dofs.local_len(e);
            let off = self.dofs.offset(e);
            for (idx, load) in loads.iter_mut().enumerate() {
                load[off..off + nb].copy_from_slice(&block[idx * nb..(idx + 1) * nb]);
            }
        }
        Ok(loads)
    }

    /// Applies the block-diagonal spatial mass matrix.
    pub fn apply_mass(&self, v: &[f64], out: &mut [f64]) {
        for (e, el) in self.ops.elements.iter().enumerate() {
            let r = self.dofs.range(e);
            let nb = el.nb;
            let (src, dst) = (&v[r.clone()], &mut out[r]);
            for i in 0..nb {
                dst[i] = (0..nb).map(|j| el.mass[i * nb + j] * src[j]).sum();
            }
        }
    }

    /// Scattering source for target node `l` and ordinate `m` from the flux
    /// at the source nodes `sources` (all ordinates), accumulated in fixed
    /// (node, ordinate) order.
    pub fn scatter_source(
        &self,
        flux: &FluxState,
        l: usize,
        m: usize,
        sources: std::ops::Range<usize>,
    ) -> Result<Vec<f64>> {
        let n_ord = self.ordinates.len();
        let n_x = self.n_x();
        let mut combined = vec![0.0; n_x];
        let wm = self.ordinates.weights[m];
        let mut any = false;
        for j in sources {
            for n in 0..n_ord {
                let coef = wm * self.ordinates.weights[n] * self.moments.get(m, n, j, l);
                if coef == 0.0 {
                    continue;
                }
                let u = flux.vector(j, n).ok_or_else(|| {
                    Error::MissingFlux(format!("no flux for energy node {j}, ordinate {n}"))
                })?;
                any = true;
                for (c, x) in combined.iter_mut().zip(u) {
                    *c += coef * x;
                }
            }
        }
        let mut out = vec![0.0; n_x];
        if any {
            self.apply_mass(&combined, &mut out);
        }
        Ok(out)
    }

    /// Full scattering source for `(l, m)` from all groups up to and
    /// including the group of `l`.
    pub fn apply_scattering(&self, flux: &FluxState, l: usize, m: usize) -> Result<Vec<f64>> {
        let g = self.grid.node(l).group;
        self.scatter_source(flux, l, m, 0..self.grid.node_range(g).end)
    }
}
