//! Exact solutions, manufactured forcing, error norms and convergence rates.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{AngularMesh, OrdinateSet};
use crate::assembly::{Discretisation, SourceData};
use crate::error::{Error, Result};
use crate::geometry::{dot, Point};
use crate::physics::{beta, beta_gamma, in_scatter, sphere_integral, EnergyWindow, MaterialModel};
use crate::quadrature::{gauss_on, GaussRule};
use crate::solver::FluxState;

/// Smooth reference solution `u(x, mu, E)` with its spatial gradient.
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, x: &Point, mu: &Point, e: f64) -> f64;
    fn gradient(&self, x: &Point, mu: &Point, e: f64) -> Point;
}

/// `u = c`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSolution(pub f64);

impl ExactSolution for ConstantSolution {
    fn name(&self) -> &str {
        "constant"
    }
    fn value(&self, _x: &Point, _mu: &Point, _e: f64) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &Point, _mu: &Point, _e: f64) -> Point {
        [0.0; 3]
    }
}

/// `s(x) = x cos y + y sin x` and its gradient.
fn wave(x: &Point) -> (f64, Point) {
    let (a, b) = (x[0], x[1]);
    (
        a * b.cos() + b * a.sin(),
        [b.cos() + b * a.cos(), -a * b.sin() + a.sin(), 0.0],
    )
}

/// `u = exp(mu_1 - mu_2 / 2) (x cos y + y sin x)`, monoenergetic, d = 2.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlanarWaveSolution;

impl ExactSolution for PlanarWaveSolution {
    fn name(&self) -> &str {
        "planar_wave"
    }
    fn value(&self, x: &Point, mu: &Point, _e: f64) -> f64 {
        (mu[0] - 0.5 * mu[1]).exp() * wave(x).0
    }
    fn gradient(&self, x: &Point, mu: &Point, _e: f64) -> Point {
        let a = (mu[0] - 0.5 * mu[1]).exp();
        let g = wave(x).1;
        [a * g[0], a * g[1], 0.0]
    }
}

/// `u = cos(4 phi) (x cos y + y sin x)` with polar angle `phi = acos mu_3`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolarCosineSolution;

impl PolarCosineSolution {
    /// `cos(4 acos t)` as the Chebyshev polynomial `T_4(t)`.
    fn angular(mu: &Point) -> f64 {
        let t = mu[2];
        8.0 * t.powi(4) - 8.0 * t * t + 1.0
    }
}

impl ExactSolution for PolarCosineSolution {
    fn name(&self) -> &str {
        "polar_cosine"
    }
    fn value(&self, x: &Point, mu: &Point, _e: f64) -> f64 {
        Self::angular(mu) * wave(x).0
    }
    fn gradient(&self, x: &Point, mu: &Point, _e: f64) -> Point {
        let a = Self::angular(mu);
        let g = wave(x).1;
        [a * g[0], a * g[1], 0.0]
    }
}

/// `u = exp(-(E mu.x / E_max)^2) exp(-1 / (1 - (E / E_max)^2))`.
#[derive(Clone, Copy, Debug)]
pub struct ComptonBeamSolution {
    pub e_max: f64,
}

impl ExactSolution for ComptonBeamSolution {
    fn name(&self) -> &str {
        "compton_beam"
    }
    fn value(&self, x: &Point, mu: &Point, e: f64) -> f64 {
        let t = e / self.e_max;
        if t >= 1.0 {
            return 0.0;
        }
        let s = t * dot(mu, x);
        (-s * s).exp() * (-1.0 / (1.0 - t * t)).exp()
    }
    fn gradient(&self, x: &Point, mu: &Point, e: f64) -> Point {
        let t = e / self.e_max;
        let s = t * dot(mu, x);
        let f = -2.0 * s * t * self.value(x, mu, e);
        [f * mu[0], f * mu[1], f * mu[2]]
    }
}

/// Exact solution from closures.
pub struct FnSolution<F, G> {
    pub name: String,
    pub value: F,
    pub gradient: G,
}

impl<F, G> ExactSolution for FnSolution<F, G>
where
    F: Fn(&Point, &Point, f64) -> f64 + Send + Sync,
    G: Fn(&Point, &Point, f64) -> Point + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, x: &Point, mu: &Point, e: f64) -> f64 {
        (self.value)(x, mu, e)
    }
    fn gradient(&self, x: &Point, mu: &Point, e: f64) -> Point {
        (self.gradient)(x, mu, e)
    }
}

/// Largest relative deviation between `gradient` and central differences
/// over the given samples.
pub fn gradient_defect(
    exact: &dyn ExactSolution,
    samples: &[(Point, Point, f64)],
    dim: usize,
) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (x, mu, e) in samples {
        let g = exact.gradient(x, mu, *e);
        for k in 0..dim {
            let (mut p, mut m) = (*x, *x);
            p[k] += h;
            m[k] -= h;
            let fd = (exact.value(&p, mu, *e) - exact.value(&m, mu, *e)) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / (1.0 + fd.abs()));
        }
    }
    worst
}

/// Forcing `f = mu.grad u + (alpha + beta) u - S[u]` and inflow data
/// `g = u` making `exact` the solution of the transport problem.
pub struct ManufacturedSource {
    pub exact: Arc<dyn ExactSolution>,
    pub model: Arc<dyn MaterialModel>,
    pub window: EnergyWindow,
}

impl ManufacturedSource {
    pub fn new(
        exact: Arc<dyn ExactSolution>,
        model: Arc<dyn MaterialModel>,
        window: EnergyWindow,
    ) -> Self {
        Self {
            exact,
            model,
            window,
        }
    }

    /// Scattering source `S[u](x, mu, E)`.
    pub fn scattering(&self, x: &Point, mu: &Point, e: f64) -> Result<f64> {
        in_scatter(self.model.as_ref(), mu, e, self.window, |mp, ep| {
            self.exact.value(x, mp, ep)
        })
    }

    /// Forcing at a single point.
    pub fn forcing(&self, x: &Point, mu: &Point, e: f64) -> Result<f64> {
        let b = beta(self.model.as_ref(), e, self.window)?;
        let u = self.exact.value(x, mu, e);
        let stream = dot(mu, &self.exact.gradient(x, mu, e));
        Ok(stream + (self.model.alpha(x, e) + b) * u - self.scattering(x, mu, e)?)
    }
}

impl SourceData for ManufacturedSource {
    fn volume(&self, xs: &[Point], e: f64, mus: &[Point], out: &mut [Vec<f64>]) -> Result<()> {
        let model = self.model.as_ref();
        let dim = model.dim();
        let (b, g) = beta_gamma(model, e, self.window)?;
        if model.is_isotropic() {
            // S[u] = gamma / |S| * int_S u
            let c = g / crate::angular::sphere_measure(dim);
            for (q, x) in xs.iter().enumerate() {
                let s = if c == 0.0 {
                    0.0
                } else {
                    c * sphere_integral(dim, |mp| self.exact.value(x, mp, e))?
                };
                for (mu, row) in mus.iter().zip(out.iter_mut()) {
                    let u = self.exact.value(x, mu, e);
                    row[q] =
                        dot(mu, &self.exact.gradient(x, mu, e)) + (model.alpha(x, e) + b) * u - s;
                }
            }
        } else {
            for (mu, row) in mus.iter().zip(out.iter_mut()) {
                for (x, o) in xs.iter().zip(row.iter_mut()) {
                    let u = self.exact.value(x, mu, e);
                    *o = dot(mu, &self.exact.gradient(x, mu, e)) + (model.alpha(x, e) + b) * u
                        - self.scattering(x, mu, e)?;
                }
            }
        }
        Ok(())
    }

    fn boundary(&self, x: &Point, mu: &Point, e: f64) -> f64 {
        self.exact.value(x, mu, e)
    }
}

/// Error (or norm) values in the three norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub dg: f64,
    pub streamline: f64,
}

/// Extra quadrature order added to every rule in the norm evaluation.
pub const NORM_OVERSAMPLING: usize = 3;

struct EnergyPoints {
    group: usize,
    energy: f64,
    weight: f64,
    basis: Vec<f64>,
    c0: f64,
}

/// Oversampled quadrature in space, angle and energy for error norms.
pub struct NormEvaluator<'a> {
    disc: &'a Discretisation,
    oversampling: usize,
    fine: OrdinateSet,
    /// Coarse patch basis values at each fine ordinate.
    angular_basis: Vec<Vec<f64>>,
    energy: Vec<EnergyPoints>,
}

impl<'a> NormEvaluator<'a> {
    pub fn new(disc: &'a Discretisation) -> Result<Self> {
        Self::with_oversampling(disc, NORM_OVERSAMPLING)
    }

    /// Evaluator whose rules exceed the scheme's own by `extra` orders. With
    /// `extra = 0` the angular and energy rules are those of the scheme.
    pub fn with_oversampling(disc: &'a Discretisation, extra: usize) -> Result<Self> {
        let am = &disc.angular;
        let q_max = am.patches().iter().map(|p| p.degree).max().unwrap_or(0);
        let fine = AngularMesh::with_map(am.dim(), am.patches_per_edge(), q_max + extra, am.map())?
            .ordinates()?;
        let angular_basis = (0..fine.len())
            .map(|k| disc.ordinates.bases[fine.patch[k]].eval_all(fine.reference[k]))
            .collect();
        let mut energy = Vec::new();
        let model = disc.model.as_ref();
        for g in 0..disc.grid.num_groups() {
            let (lo, hi) = disc.grid.group_interval(g);
            let rule: GaussRule = gauss_on(disc.grid.degree(g) + 1 + extra, lo, hi)?;
            for (e, w) in rule.iter() {
                let (b, gm) = beta_gamma(model, e, disc.window)?;
                energy.push(EnergyPoints {
                    group: g,
                    energy: e,
                    weight: w,
                    basis: disc.grid.group_basis(g).values(e),
                    // alpha is added pointwise in space
                    c0: 0.5 * (b - gm),
                });
            }
        }
        Ok(Self {
            disc,
            oversampling: extra,
            fine,
            angular_basis,
            energy,
        })
    }

    /// Discrete solution and its spatial gradient at spatial point values
    /// `vals[l * n_ord + m]`, `grads[...]`, for fine ordinate `k` and energy
    /// point `ep`.
    fn interpolate(
        &self,
        vals: &[f64],
        grads: &[Point],
        k: usize,
        ep: &EnergyPoints,
    ) -> (f64, Point) {
        let d = self.disc;
        let n_ord = d.ordinates.len();
        let range = d.ordinates.patch_range(self.fine.patch[k]);
        let psi = &self.angular_basis[k];
        let mut u = 0.0;
        let mut g = [0.0; 3];
        for (i, l) in d.grid.node_range(ep.group).enumerate() {
            let mut a = 0.0;
            let mut ga = [0.0; 3];
            for (j, m) in range.clone().enumerate() {
                a += psi[j] * vals[l * n_ord + m];
                for c in 0..3 {
                    ga[c] += psi[j] * grads[l * n_ord + m][c];
                }
            }
            u += ep.basis[i] * a;
            for c in 0..3 {
                g[c] += ep.basis[i] * ga[c];
            }
        }
        (u, g)
    }

    fn point_values(
        &self,
        flux: &FluxState,
        e: usize,
        phi: &[f64],
        grad: &[Point],
        vals: &mut [f64],
        grads: &mut [Point],
    ) -> Result<()> {
        let d = self.disc;
        let n_ord = d.ordinates.len();
        let r = d.dofs.range(e);
        for l in 0..d.grid.num_nodes() {
            for m in 0..n_ord {
                let u = flux.vector(l, m).ok_or_else(|| {
                    Error::MissingFlux(format!("no flux for energy node {l}, ordinate {m}"))
                })?;
                let c = &u[r.clone()];
                let mut v = 0.0;
                let mut g = [0.0; 3];
                for (i, ci) in c.iter().enumerate() {
                    v += ci * phi[i];
                    for k in 0..3 {
                        g[k] += ci * grad[i][k];
                    }
                }
                vals[l * n_ord + m] = v;
                grads[l * n_ord + m] = g;
            }
        }
        Ok(())
    }

    /// Norms of `exact - u_h`; pass `None` for the norms of `u_h` itself.
    pub fn errors(&self, flux: &FluxState, exact: Option<&dyn ExactSolution>) -> Result<Norms> {
        let d = self.disc;
        let mesh = &d.mesh;
        let model = d.model.as_ref();
        let n_pairs = d.grid.num_nodes() * d.ordinates.len();
        let exact_at = |x: &Point, mu: &Point, e: f64| exact.map_or(0.0, |u| u.value(x, mu, e));
        let grad_at =
            |x: &Point, mu: &Point, e: f64| exact.map_or([0.0; 3], |u| u.gradient(x, mu, e));

        // (l2^2, c0-weighted l2^2, streamline^2) per element
        let volume = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| -> Result<[f64; 3]> {
                let p = mesh.elements()[e].degree;
                let quad = mesh.element_quadrature(e, 2 * (p + self.oversampling))?;
                let nb = d.dofs.local_len(e);
                let metrics = &mesh.elements()[e].metrics;
                let tau = metrics.h_perp / (p.max(1) as f64).powi(2);
                let mut phi = vec![0.0; nb];
                let mut grad = vec![[0.0; 3]; nb];
                let mut vals = vec![0.0; n_pairs];
                let mut grads = vec![[0.0; 3]; n_pairs];
                let mut acc = [0.0; 3];
                for (x, wx) in &quad {
                    d.dofs.values(e, x, &mut phi);
                    d.dofs.gradients(e, x, &mut grad);
                    self.point_values(flux, e, &phi, &grad, &mut vals, &mut grads)?;
                    for k in 0..self.fine.len() {
                        let mu = &self.fine.directions[k];
                        let wk = self.fine.weights[k];
                        for ep in &self.energy {
                            let (uh, gh) = self.interpolate(&vals, &grads, k, ep);
                            let err = exact_at(x, mu, ep.energy) - uh;
                            let ge = grad_at(x, mu, ep.energy);
                            let serr = dot(mu, &ge) - dot(mu, &gh);
                            let w = wx * wk * ep.weight;
                            acc[0] += w * err * err;
                            acc[1] += w * (model.alpha(x, ep.energy) + ep.c0) * err * err;
                            acc[2] += w * tau * serr * serr;
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;

        let faces = (0..mesh.faces().len())
            .into_par_iter()
            .map(|f| -> Result<f64> {
                let face = &mesh.faces()[f];
                let po = mesh.elements()[face.owner].degree;
                let pn = face.neighbour.map_or(0, |n| mesh.elements()[n].degree);
                let quad = mesh.face_quadrature(f, 2 * (po.max(pn) + self.oversampling))?;
                let no_ = d.dofs.local_len(face.owner);
                let nn_ = face.neighbour.map_or(0, |n| d.dofs.local_len(n));
                let (mut phi_o, mut phi_n) = (vec![0.0; no_], vec![0.0; nn_]);
                // gradients are not needed on faces
                let (grad_o, grad_n) = (vec![[0.0; 3]; no_], vec![[0.0; 3]; nn_]);
                let mut vo = vec![0.0; n_pairs];
                let mut go = vec![[0.0; 3]; n_pairs];
                let mut vn = vec![0.0; n_pairs];
                let mut gn = vec![[0.0; 3]; n_pairs];
                let mut acc = 0.0;
                for (x, wx) in &quad {
                    d.dofs.values(face.owner, x, &mut phi_o);
                    self.point_values(flux, face.owner, &phi_o, &grad_o, &mut vo, &mut go)?;
                    if let Some(n) = face.neighbour {
                        d.dofs.values(n, x, &mut phi_n);
                        self.point_values(flux, n, &phi_n, &grad_n, &mut vn, &mut gn)?;
                    }
                    for k in 0..self.fine.len() {
                        let mu = &self.fine.directions[k];
                        let s = dot(mu, &face.normal).abs();
                        if s == 0.0 {
                            continue;
                        }
                        for ep in &self.energy {
                            let u = exact_at(x, mu, ep.energy);
                            let eo = u - self.interpolate(&vo, &go, k, ep).0;
                            let jump = match face.neighbour {
                                Some(_) => eo - (u - self.interpolate(&vn, &gn, k, ep).0),
                                None => eo,
                            };
                            acc += 0.5 * s * wx * self.fine.weights[k] * ep.weight * jump * jump;
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut sums = [0.0; 3];
        for v in &volume {
            for k in 0..3 {
                sums[k] += v[k];
            }
        }
        let face_sum: f64 = faces.iter().sum();
        let dg2 = sums[1] + face_sum;
        Ok(Norms {
            l2: sums[0].sqrt(),
            dg: dg2.max(0.0).sqrt(),
            streamline: (dg2 + sums[2]).max(0.0).sqrt(),
        })
    }

    /// Angular rule used by the evaluator.
    pub fn ordinates(&self) -> &OrdinateSet {
        &self.fine
    }

    /// Pointwise `c0 = alpha + (beta - gamma) / 2` minimum over the norm's
    /// energy points and element centroids.
    pub fn c0_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for el in self.disc.mesh.elements() {
            for ep in &self.energy {
                m = m.min(self.disc.model.alpha(&el.metrics.centroid, ep.energy) + ep.c0);
            }
        }
        m
    }
}

/// One run of a refinement study.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub label: String,
    /// Total degrees of freedom.
    pub dofs: usize,
    pub h_x: f64,
    pub h_s: f64,
    pub h_e: f64,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub errors: Norms,
    pub iterations: usize,
    pub seconds: f64,
}

/// Observed convergence rates between two consecutive runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Rates with respect to the spatial mesh size.
    pub h: Norms,
    /// Rates with respect to `N^(-1/d_D)`.
    pub n: Norms,
}

/// Rate `log(e0 / e1) / log(s0 / s1)`.
pub fn rate(e0: f64, e1: f64, s0: f64, s1: f64) -> f64 {
    (e0 / e1).ln() / (s0 / s1).ln()
}

/// Experimental orders of convergence between consecutive records, with
/// `d_d` the dimension of the full phase space.
pub fn eoc(records: &[ConvergenceRecord], d_d: f64) -> Result<Vec<Rates>> {
    if records.len() < 2 {
        return Err(Error::Analysis(
            "at least two runs are needed for convergence rates".into(),
        ));
    }
    records
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if b.dofs <= a.dofs {
                return Err(Error::Analysis(format!(
                    "degrees of freedom must increase between runs ({} then {})",
                    a.dofs, b.dofs
                )));
            }
            let (na, nb) = (a.dofs as f64, b.dofs as f64);
            let by_h = |x: f64, y: f64| rate(x, y, a.h_x, b.h_x);
            let by_n = |x: f64, y: f64| (x / y).ln() / (nb / na).ln() * d_d;
            Ok(Rates {
                h: Norms {
                    l2: by_h(a.errors.l2, b.errors.l2),
                    dg: by_h(a.errors.dg, b.errors.dg),
                    streamline: by_h(a.errors.streamline, b.errors.streamline),
                },
                n: Norms {
                    l2: by_n(a.errors.l2, b.errors.l2),
                    dg: by_n(a.errors.dg, b.errors.dg),
                    streamline: by_n(a.errors.streamline, b.errors.streamline),
                },
            })
        })
        .collect()
}
