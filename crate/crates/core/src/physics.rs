//! Material models: absorption `alpha`, scattering kernel `theta`, the derived
//! out-scatter rate `beta` and in-scatter rate `gamma`, and the positivity
//! constant `alpha + (beta - gamma) / 2`.
//!
//! Kernels depend on direction only through `c = mu . mu'` and are spatially
//! homogeneous. Two kernel classes are supported: smooth densities
//! `theta(c, E' -> E)` per steradian and keV, and energy-delta kernels
//! `sigma(E', c) delta(E - E_out(E', c))` whose energy integrals are
//! collapsed analytically.

use std::cell::Cell;
use std::f64::consts::PI;

use crate::angular::sphere_measure;
use crate::error::{Error, Result};
use crate::geometry::{cross, dot, norm, Point};
use crate::quadrature::Adaptive;

/// Classical electron radius (m).
pub const ELECTRON_RADIUS: f64 = 2.81794e-15;
/// Electron density of water (electrons per m^3).
pub const WATER_ELECTRON_DENSITY: f64 = 3.34281e29;
/// Electron rest energy (keV).
pub const ELECTRON_REST_ENERGY: f64 = 511.0;

/// Klein-Nishina differential cross-section (m^2 per steradian).
pub fn klein_nishina(e_in: f64, e_out: f64, c: f64) -> Result<f64> {
    if !(e_in > 0.0) || !(e_out > 0.0) {
        return Err(Error::Physics(format!(
            "Klein-Nishina needs positive energies, got ({e_in}, {e_out})"
        )));
    }
    Ok(klein_nishina_unchecked(e_in, e_out, c))
}

fn klein_nishina_unchecked(e_in: f64, e_out: f64, c: f64) -> f64 {
    let r = e_out / e_in;
    0.5 * ELECTRON_RADIUS * ELECTRON_RADIUS * r * r * (r + 1.0 / r - (1.0 - c * c))
}

/// Energy after Compton scattering through an angle with cosine `c`.
pub fn compton_out_energy(e_in: f64, c: f64) -> f64 {
    e_in / (1.0 + e_in / ELECTRON_REST_ENERGY * (1.0 - c))
}

/// Incoming energy that Compton-scatters to `e_out`, if one exists.
pub fn compton_in_energy(e_out: f64, c: f64) -> Option<f64> {
    let d = 1.0 - e_out / ELECTRON_REST_ENERGY * (1.0 - c);
    (d > 0.0).then(|| e_out / d)
}

/// Smooth kernel density `theta(c, E' -> E)`; must vanish for `E > E'`.
pub trait SmoothKernel: Send + Sync {
    fn theta(&self, c: f64, e_in: f64, e_out: f64) -> f64;
}

/// Kernel `amplitude(E', c) * delta(E - out_energy(E', c))`.
pub trait DeltaKernel: Send + Sync {
    /// Angular density (1/m per unit sphere measure).
    fn amplitude(&self, e_in: f64, c: f64) -> f64;
    fn out_energy(&self, e_in: f64, c: f64) -> f64;
    /// Pre-image of `out_energy`; must be non-increasing in `c`.
    fn in_energy(&self, e_out: f64, c: f64) -> Option<f64>;
    /// `dE'/dE` at the pre-image `e_in`.
    fn jacobian(&self, e_in: f64, c: f64) -> f64;
}

#[derive(Clone, Copy)]
pub enum Kernel<'a> {
    None,
    Smooth(&'a dyn SmoothKernel),
    Delta(&'a dyn DeltaKernel),
}

pub trait MaterialModel: Send + Sync {
    fn name(&self) -> &str;
    /// Spatial (and sphere embedding) dimension.
    fn dim(&self) -> usize;
    /// Absorption cross-section (1/m).
    fn alpha(&self, x: &Point, e: f64) -> f64;
    fn kernel(&self) -> Kernel<'_>;
    /// Elastic kernel with direction-independent amplitude.
    fn is_isotropic(&self) -> bool {
        false
    }
}

/// Truncated energy interval `(e_min, e_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyWindow {
    pub e_min: f64,
    pub e_max: f64,
}

impl EnergyWindow {
    pub fn of(grid: &crate::energy::EnergyGrid) -> Self {
        Self {
            e_min: grid.e_min(),
            e_max: grid.e_max(),
        }
    }
}

/// Isotropic elastic scattering: `theta = sigma_s / |S|`, constant `alpha`.
#[derive(Clone, Debug)]
pub struct IsotropicModel {
    pub dim: usize,
    pub alpha: f64,
    pub sigma_s: f64,
}

impl IsotropicModel {
    pub fn new(dim: usize, alpha: f64, sigma_s: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha >= 0.0) || !(sigma_s >= 0.0) {
            return Err(Error::Physics(format!(
                "cross-sections must be non-negative, got alpha={alpha}, sigma_s={sigma_s}"
            )));
        }
        Ok(Self {
            dim,
            alpha,
            sigma_s,
        })
    }

    pub fn pure_absorber(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(dim, alpha, 0.0)
    }
}

impl DeltaKernel for IsotropicModel {
    fn amplitude(&self, _e_in: f64, _c: f64) -> f64 {
        self.sigma_s / sphere_measure(self.dim)
    }
    fn out_energy(&self, e_in: f64, _c: f64) -> f64 {
        e_in
    }
    fn in_energy(&self, e_out: f64, _c: f64) -> Option<f64> {
        Some(e_out)
    }
    fn jacobian(&self, _e_in: f64, _c: f64) -> f64 {
        1.0
    }
}

impl MaterialModel for IsotropicModel {
    fn name(&self) -> &str {
        "isotropic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn alpha(&self, _x: &Point, _e: f64) -> f64 {
        self.alpha
    }
    fn kernel(&self) -> Kernel<'_> {
        if self.sigma_s == 0.0 {
            Kernel::None
        } else {
            Kernel::Delta(self)
        }
    }
    fn is_isotropic(&self) -> bool {
        true
    }
}

/// Compton scattering of photons by free electrons (Klein-Nishina).
#[derive(Clone, Debug)]
pub struct ComptonModel {
    pub dim: usize,
    pub alpha: f64,
    pub rho: f64,
}

impl ComptonModel {
    pub fn water(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            alpha: 0.0,
            rho: WATER_ELECTRON_DENSITY,
        })
    }
}

impl DeltaKernel for ComptonModel {
    fn amplitude(&self, e_in: f64, c: f64) -> f64 {
        self.rho * klein_nishina_unchecked(e_in, compton_out_energy(e_in, c), c)
    }
    fn out_energy(&self, e_in: f64, c: f64) -> f64 {
        compton_out_energy(e_in, c)
    }
    fn in_energy(&self, e_out: f64, c: f64) -> Option<f64> {
        compton_in_energy(e_out, c)
    }
    fn jacobian(&self, e_in: f64, c: f64) -> f64 {
        let s = 1.0 + e_in / ELECTRON_REST_ENERGY * (1.0 - c);
        s * s
    }
}

impl MaterialModel for ComptonModel {
    fn name(&self) -> &str {
        "compton_water"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn alpha(&self, _x: &Point, _e: f64) -> f64 {
        self.alpha
    }
    fn kernel(&self) -> Kernel<'_> {
        Kernel::Delta(self)
    }
}

/// Smooth isotropic down-scatter: an incoming particle at `E'` leaves
/// uniformly in energy over `(e_floor, E')` and uniformly in direction, with
/// total rate `sigma_s`.
#[derive(Clone, Debug)]
pub struct UniformDownscatter {
    pub dim: usize,
    pub alpha: f64,
    pub sigma_s: f64,
    pub e_floor: f64,
}

impl SmoothKernel for UniformDownscatter {
    fn theta(&self, _c: f64, e_in: f64, e_out: f64) -> f64 {
        if e_out > e_in || e_out < self.e_floor || e_in <= self.e_floor {
            0.0
        } else {
            self.sigma_s / (sphere_measure(self.dim) * (e_in - self.e_floor))
        }
    }
}

impl MaterialModel for UniformDownscatter {
    fn name(&self) -> &str {
        "uniform_downscatter"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn alpha(&self, _x: &Point, _e: f64) -> f64 {
        self.alpha
    }
    fn kernel(&self) -> Kernel<'_> {
        Kernel::Smooth(self)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::Physics(format!(
            "dimension must be 2 or 3, got {dim}"
        )))
    }
}

/// Oracle tolerance for derived rates and scattering integrals.
pub const ORACLE_TOL: f64 = 1e-10;

fn oracle() -> Adaptive {
    Adaptive::with_tol(ORACLE_TOL)
}

/// Integral over the unit sphere of a function of `c = mu . mu'` restricted
/// to `c >= c_lo`.
pub fn sphere_integral_of_cosine(dim: usize, c_lo: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let c_lo = c_lo.clamp(-1.0, 1.0);
    if c_lo >= 1.0 {
        return Ok(0.0);
    }
    match dim {
        2 => Ok(2.0 * oracle().integrate(|psi| f(psi.cos()), 0.0, c_lo.acos())?),
        3 => Ok(2.0 * PI * oracle().integrate(f, c_lo, 1.0)?),
        _ => Err(Error::Physics(format!(
            "dimension must be 2 or 3, got {dim}"
        ))),
    }
}

/// Smallest cosine at which the delta kernel's pre-image of `e_out` stays
/// within `e_max`; `None` when no cosine is admissible.
fn admissible_cosine(k: &dyn DeltaKernel, e_out: f64, e_max: f64) -> Option<f64> {
    let ok = |c: f64| k.in_energy(e_out, c).is_some_and(|e| e <= e_max);
    if ok(-1.0) {
        return Some(-1.0);
    }
    if !ok(1.0) {
        return None;
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 {
            break;
        }
    }
    Some(hi)
}

/// Total out-scatter rate `beta(E) = int_S int theta(E -> E') dE' dmu'`.
pub fn beta(model: &dyn MaterialModel, e: f64, window: EnergyWindow) -> Result<f64> {
    match model.kernel() {
        Kernel::None => Ok(0.0),
        Kernel::Delta(k) => sphere_integral_of_cosine(model.dim(), -1.0, |c| k.amplitude(e, c)),
        Kernel::Smooth(k) => {
            let inner = |c: f64| oracle().integrate(|ep| k.theta(c, e, ep), window.e_min, e);
            nested_cosine(model.dim(), -1.0, inner)
        }
    }
}

/// In-scatter rate `gamma(E) = int_S int theta(E' -> E) dE' dmu'` over
/// incoming energies inside the window.
pub fn gamma(model: &dyn MaterialModel, e: f64, window: EnergyWindow) -> Result<f64> {
    match model.kernel() {
        Kernel::None => Ok(0.0),
        Kernel::Delta(k) => {
            let Some(c_lo) = admissible_cosine(k, e, window.e_max) else {
                return Ok(0.0);
            };
            sphere_integral_of_cosine(model.dim(), c_lo, |c| match k.in_energy(e, c) {
                Some(ei) if ei <= window.e_max => k.amplitude(ei, c) * k.jacobian(ei, c),
                _ => 0.0,
            })
        }
        Kernel::Smooth(k) => {
            if e >= window.e_max {
                return Ok(0.0);
            }
            let inner = |c: f64| oracle().integrate(|ep| k.theta(c, ep, e), e, window.e_max);
            nested_cosine(model.dim(), -1.0, inner)
        }
    }
}

fn nested_cosine(dim: usize, c_lo: f64, inner: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let failure = Cell::new(None);
    let v = sphere_integral_of_cosine(dim, c_lo, |c| match inner(c) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e.to_string()));
            0.0
        }
    })?;
    match failure.into_inner() {
        Some(msg) => Err(Error::Physics(msg)),
        None => Ok(v),
    }
}

pub fn beta_gamma(model: &dyn MaterialModel, e: f64, window: EnergyWindow) -> Result<(f64, f64)> {
    Ok((beta(model, e, window)?, gamma(model, e, window)?))
}

/// Orthonormal pair spanning the plane orthogonal to `mu` (3D).
fn orthonormal_frame(mu: &Point) -> (Point, Point) {
    let helper = if mu[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = cross(mu, &helper);
    let e1 = [e1[0] / norm(&e1), e1[1] / norm(&e1), e1[2] / norm(&e1)];
    (e1, cross(mu, &e1))
}

/// Integral over directions `mu'` with `mu . mu' >= c_lo` of `f(c, mu')`.
fn directional_integral(
    dim: usize,
    mu: &Point,
    c_lo: f64,
    f: impl Fn(f64, &Point) -> f64,
) -> Result<f64> {
    let c_lo = c_lo.clamp(-1.0, 1.0);
    if c_lo >= 1.0 {
        return Ok(0.0);
    }
    let quad = oracle();
    match dim {
        2 => {
            let half = c_lo.acos();
            quad.integrate(
                |psi| {
                    let (s, c) = psi.sin_cos();
                    let mp = [c * mu[0] - s * mu[1], s * mu[0] + c * mu[1], 0.0];
                    f(c, &mp)
                },
                -half,
                half,
            )
        }
        3 => {
            let (e1, e2) = orthonormal_frame(mu);
            let failure = Cell::new(None);
            let v = quad.integrate(
                |c| {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    let inner = quad.integrate(
                        |chi| {
                            let (sc, cc) = chi.sin_cos();
                            let mp = [
                                c * mu[0] + s * (cc * e1[0] + sc * e2[0]),
                                c * mu[1] + s * (cc * e1[1] + sc * e2[1]),
                                c * mu[2] + s * (cc * e1[2] + sc * e2[2]),
                            ];
                            f(c, &mp)
                        },
                        0.0,
                        2.0 * PI,
                    );
                    inner.unwrap_or_else(|e| {
                        failure.set(Some(e.to_string()));
                        0.0
                    })
                },
                c_lo,
                1.0,
            )?;
            match failure.into_inner() {
                Some(msg) => Err(Error::Physics(msg)),
                None => Ok(v),
            }
        }
        _ => Err(Error::Physics(format!(
            "dimension must be 2 or 3, got {dim}"
        ))),
    }
}

/// Integral of `u` over the whole sphere.
pub fn sphere_integral(dim: usize, u: impl Fn(&Point) -> f64) -> Result<f64> {
    let pole = if dim == 2 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    directional_integral(dim, &pole, -1.0, |_, mp| u(mp))
}

/// Scattering source `S[u](mu, E) = int_S int theta(mu'.mu, E' -> E) u(mu', E') dE' dmu'`
/// restricted to incoming energies inside the window.
pub fn in_scatter(
    model: &dyn MaterialModel,
    mu: &Point,
    e: f64,
    window: EnergyWindow,
    u: impl Fn(&Point, f64) -> f64,
) -> Result<f64> {
    let dim = model.dim();
    match model.kernel() {
        Kernel::None => Ok(0.0),
        Kernel::Delta(k) => {
            let Some(c_lo) = admissible_cosine(k, e, window.e_max) else {
                return Ok(0.0);
            };
            directional_integral(dim, mu, c_lo, |c, mp| match k.in_energy(e, c) {
                Some(ei) if ei <= window.e_max => {
                    k.amplitude(ei, c) * k.jacobian(ei, c) * u(mp, ei)
                }
                _ => 0.0,
            })
        }
        Kernel::Smooth(k) => {
            if e >= window.e_max {
                return Ok(0.0);
            }
            let failure = Cell::new(None);
            let v = directional_integral(dim, mu, -1.0, |c, mp| {
                oracle()
                    .integrate(|ep| k.theta(c, ep, e) * u(mp, ep), e, window.e_max)
                    .unwrap_or_else(|err| {
                        failure.set(Some(err.to_string()));
                        0.0
                    })
            })?;
            match failure.into_inner() {
                Some(msg) => Err(Error::Physics(msg)),
                None => Ok(v),
            }
        }
    }
}

/// Minimum of `alpha + (beta - gamma) / 2` over a sample lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub c0_min: f64,
    pub argmin_x: Point,
    pub argmin_e: f64,
    pub spatial_samples: usize,
    pub energy_samples: usize,
}

impl PositivityReport {
    pub fn is_positive(&self) -> bool {
        self.c0_min > 0.0
    }

    pub fn warning(&self) -> Option<String> {
        (!self.is_positive()).then(|| {
            format!(
                "positivity constant c0 = {:e} <= 0 at x = {:?}, E = {} keV; coercivity is not guaranteed",
                self.c0_min, self.argmin_x, self.argmin_e
            )
        })
    }
}

/// Evaluates `alpha + (beta - gamma) / 2` at every spatial sample and every
/// group quadrature node of `grid`.
pub fn check_positivity(
    model: &dyn MaterialModel,
    grid: &crate::energy::EnergyGrid,
    samples: &[Point],
) -> Result<PositivityReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "positivity check needs at least one spatial sample".into(),
        ));
    }
    let window = EnergyWindow::of(grid);
    let mut report = PositivityReport {
        c0_min: f64::INFINITY,
        argmin_x: samples[0],
        argmin_e: grid.node(0).energy,
        spatial_samples: samples.len(),
        energy_samples: grid.num_nodes(),
    };
    for node in grid.nodes() {
        let (b, g) = beta_gamma(model, node.energy, window)?;
        for x in samples {
            let c0 = model.alpha(x, node.energy) + 0.5 * (b - g);
            if c0 < report.c0_min {
                report.c0_min = c0;
                report.argmin_x = *x;
                report.argmin_e = node.energy;
            }
        }
    }
    Ok(report)
}

/// Cosine between two unit directions, clamped to `[-1, 1]`.
pub fn cosine(a: &Point, b: &Point) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}
