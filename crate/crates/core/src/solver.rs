//! Multigroup discrete-ordinates driver with source iteration.
//!
//! Groups are solved from high to low energy. Within a group each source
//! iteration first evaluates every scattering right-hand side against a
//! frozen flux snapshot and then solves one sparse transport system per
//! (energy node, ordinate). Both phases run in parallel with results
//! collected in index order, so the flux does not depend on the thread count.

use std::time::{Duration, Instant};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::SparseColMat;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{Discretisation, SourceData};
use crate::error::{Error, Result};

/// Angular flux coefficients, one spatial vector per (energy node, ordinate).
#[derive(Clone, Debug, PartialEq)]
pub struct FluxState {
    n_x: usize,
    n_nodes: usize,
    n_ord: usize,
    data: Vec<Option<Vec<f64>>>,
    solved_groups: usize,
}

impl FluxState {
    pub fn new(n_x: usize, n_nodes: usize, n_ord: usize) -> Self {
        Self {
            n_x,
            n_nodes,
            n_ord,
            data: vec![None; n_nodes * n_ord],
            solved_groups: 0,
        }
    }

    /// Empty state shaped for `disc`.
    pub fn for_discretisation(disc: &Discretisation) -> Self {
        Self::new(disc.n_x(), disc.grid.num_nodes(), disc.ordinates.len())
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn num_ordinates(&self) -> usize {
        self.n_ord
    }

    /// Number of leading groups whose flux is final.
    pub fn solved_groups(&self) -> usize {
        self.solved_groups
    }

    pub fn vector(&self, l: usize, m: usize) -> Option<&[f64]> {
        self.data[l * self.n_ord + m].as_deref()
    }

    pub fn set(&mut self, l: usize, m: usize, v: Vec<f64>) {
        assert_eq!(v.len(), self.n_x, "flux vector length");
        self.data[l * self.n_ord + m] = Some(v);
    }

    /// Drops the flux of energy node `l` for every ordinate.
    pub fn clear_node(&mut self, l: usize) {
        for m in 0..self.n_ord {
            self.data[l * self.n_ord + m] = None;
        }
    }

    /// Whether every stored value is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().flatten().all(|v| v.is_finite())
    }

    /// Bitwise equality of every stored vector.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => {
                        a.len() == b.len()
                            && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
                    }
                    (None, None) => true,
                    _ => false,
                })
    }
}

/// Iteration controls.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative successive-difference tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Run exactly this many iterations per group, ignoring the tolerance.
    pub fixed_iterations: Option<usize>,
    /// Worker threads; 0 selects the rayon default.
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            fixed_iterations: None,
            threads: 0,
        }
    }
}

/// Outcome of the source iteration for one group.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: usize,
    pub iterations: usize,
    /// Weighted L2 norm of the successive-iterate difference per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub factorizations: usize,
    /// Transport solves that reused a cached factorization.
    pub factorization_reuses: usize,
    pub load_seconds: f64,
    pub factor_seconds: f64,
    pub scatter_seconds: f64,
    pub solve_seconds: f64,
}

impl GroupReport {
    /// Ratio of the last two residuals, if at least two iterations ran.
    pub fn contraction(&self) -> Option<f64> {
        let n = self.residuals.len();
        (n >= 2).then(|| self.residuals[n - 1] / self.residuals[n - 2])
    }
}

/// Summary of a multigroup solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub groups: Vec<GroupReport>,
    pub threads: usize,
    pub total_seconds: f64,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.groups.iter().all(|g| g.converged)
    }

    pub fn total_iterations(&self) -> usize {
        self.groups.iter().map(|g| g.iterations).sum()
    }
}

/// Solves `A x = rhs` with a cached LU factorization.
pub fn solve_ordinate(lu: &Lu<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(&mut b);
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

/// LU factorization of a transport matrix.
pub fn factorize(
    a: &SparseColMat<usize, f64>,
    direction: [f64; 3],
    energy: f64,
) -> Result<Lu<usize, f64>> {
    a.sp_lu()
        .map_err(|_| Error::SingularOperator { direction, energy })
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Multigroup source-iteration solver over a fixed discretisation.
pub struct Solver<'a> {
    disc: &'a Discretisation,
    options: SolverOptions,
}

impl<'a> Solver<'a> {
    pub fn new(disc: &'a Discretisation, options: SolverOptions) -> Self {
        Self { disc, options }
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        faer::set_global_parallelism(faer::Par::Seq);
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.options.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }

    /// Solves every group in order.
    pub fn solve(&self, source: &dyn SourceData) -> Result<(FluxState, SolveReport)> {
        self.solve_groups(source, self.disc.grid.num_groups())
    }

    /// Solves the leading `n_groups` groups.
    pub fn solve_groups(
        &self,
        source: &dyn SourceData,
        n_groups: usize,
    ) -> Result<(FluxState, SolveReport)> {
        if n_groups > self.disc.grid.num_groups() {
            return Err(Error::InvalidArgument(format!(
                "{n_groups} groups requested, grid has {}",
                self.disc.grid.num_groups()
            )));
        }
        let start = Instant::now();
        let pool = self.pool()?;
        let mut flux = FluxState::for_discretisation(self.disc);
        let mut report = SolveReport {
            threads: pool.current_num_threads(),
            ..Default::default()
        };
        for g in 0..n_groups {
            let gr = pool.install(|| self.solve_group_inner(&mut flux, g, source))?;
            report.groups.push(gr);
        }
        report.total_seconds = seconds(start.elapsed());
        Ok((flux, report))
    }

    /// Solves group `g`, which must be the next unsolved group of `flux`.
    pub fn solve_group(
        &self,
        flux: &mut FluxState,
        g: usize,
        source: &dyn SourceData,
    ) -> Result<GroupReport> {
        let pool = self.pool()?;
        pool.install(|| self.solve_group_inner(flux, g, source))
    }

    fn solve_group_inner(
        &self,
        flux: &mut FluxState,
        g: usize,
        source: &dyn SourceData,
    ) -> Result<GroupReport> {
        let d = self.disc;
        if g != flux.solved_groups {
            return Err(Error::GroupOrder {
                requested: g,
                expected: flux.solved_groups,
            });
        }
        if g >= d.grid.num_groups() {
            return Err(Error::InvalidArgument(format!("group {g} out of range")));
        }
        let n_ord = d.ordinates.len();
        let nodes: Vec<usize> = d.grid.node_range(g).collect();
        let first = nodes[0];
        let pairs: Vec<(usize, usize)> = nodes
            .iter()
            .flat_map(|&l| (0..n_ord).map(move |m| (l, m)))
            .collect();
        let mut report = GroupReport {
            group: g,
            ..Default::default()
        };
        let scattering = !matches!(d.model.kernel(), crate::physics::Kernel::None);

        // Load plus the fixed source from higher-energy groups.
        let t = Instant::now();
        let loads = d.load_vectors(g, source)?;
        let external: Vec<Vec<f64>> = if scattering && first > 0 {
            pairs
                .par_iter()
                .map(|&(l, m)| d.scatter_source(flux, l, m, 0..first))
                .collect::<Result<_>>()?
        } else {
            vec![vec![0.0; d.n_x()]; pairs.len()]
        };
        let fixed: Vec<Vec<f64>> = loads
            .into_iter()
            .zip(external)
            .map(|(mut a, b)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            })
            .collect();
        report.load_seconds = seconds(t.elapsed());

        let t = Instant::now();
        let factors: Vec<Lu<usize, f64>> = pairs
            .par_iter()
            .map(|&(l, m)| {
                let mu = d.ordinates.directions[m];
                let a = d.transport_matrix(&mu, l, d.pair_weight(l, m))?;
                factorize(&a, mu, d.grid.node(l).energy)
            })
            .collect::<Result<_>>()?;
        report.factorizations = factors.len();
        report.factor_seconds = seconds(t.elapsed());

        for &l in &nodes {
            for m in 0..n_ord {
                flux.set(l, m, vec![0.0; d.n_x()]);
            }
        }
        let in_group = scattering && d.moments.has_in_group_scattering(g);
        let (limit, fixed_mode) = match self.options.fixed_iterations {
            Some(n) => (n.max(1), true),
            None => (
                if in_group {
                    self.options.max_iterations.max(1)
                } else {
                    1
                },
                false,
            ),
        };
        let mut first_norm = None;
        for it in 0..limit {
            let t = Instant::now();
            let rhs: Vec<Vec<f64>> = if in_group && it > 0 {
                let snapshot = &*flux;
                pairs
                    .par_iter()
                    .zip(&fixed)
                    .map(|(&(l, m), f)| {
                        let mut s = d.scatter_source(snapshot, l, m, first..first + nodes.len())?;
                        for (x, y) in s.iter_mut().zip(f) {
                            *x += y;
                        }
                        Ok(s)
                    })
                    .collect::<Result<_>>()?
            } else {
                fixed.clone()
            };
            report.scatter_seconds += seconds(t.elapsed());

            let t = Instant::now();
            let solutions: Vec<Vec<f64>> = pairs
                .par_iter()
                .zip(&factors)
                .zip(&rhs)
                .map(|((&(l, m), lu), b)| {
                    let x = solve_ordinate(lu, b);
                    if x.iter().all(|v| v.is_finite()) {
                        Ok(x)
                    } else {
                        Err(Error::SingularOperator {
                            direction: d.ordinates.directions[m],
                            energy: d.grid.node(l).energy,
                        })
                    }
                })
                .collect::<Result<_>>()?;
            report.solve_seconds += seconds(t.elapsed());
            if it > 0 {
                report.factorization_reuses += pairs.len();
            }

            let mut diff = 0.0;
            let mut norm = 0.0;
            for ((&(l, m), x), _) in pairs.iter().zip(&solutions).zip(0..) {
                let w = d.pair_weight(l, m);
                let old = flux.vector(l, m).expect("initialised above");
                diff += w * x
                    .iter()
                    .zip(old)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                norm += w * x.iter().map(|a| a * a).sum::<f64>();
            }
            for (&(l, m), x) in pairs.iter().zip(solutions) {
                flux.set(l, m, x);
            }
            let residual = diff.sqrt();
            report.residuals.push(residual);
            report.iterations = it + 1;
            let reference = *first_norm.get_or_insert(norm.sqrt());
            if !fixed_mode && (!in_group || residual <= self.options.tolerance * reference) {
                report.converged = true;
                break;
            }
        }
        if fixed_mode {
            report.converged = true;
        }
        flux.solved_groups = g + 1;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;
    use crate::assembly::constant_source;
    use crate::energy::EnergyGrid;
    use crate::physics::IsotropicModel;
    use crate::spatial_mesh::SpatialMesh;
    use std::sync::Arc;

    fn mono(nx: usize, p: usize, alpha: f64, sigma_s: f64) -> Discretisation {
        Discretisation::new(
            SpatialMesh::structured_quads(nx, nx, [0., 0., 1., 1.])
                .unwrap()
                .with_degree(p),
            AngularMesh::new(2, 2, 1).unwrap(),
            EnergyGrid::monoenergetic(1.0).unwrap(),
            Arc::new(IsotropicModel::new(2, alpha, sigma_s).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn single_element_inflow_system() {
        let d = mono(1, 0, 0.0, 0.0);
        let a = d.transport_matrix(&[1.0, 0.0, 0.0], 0, 1.0).unwrap();
        let lu = factorize(&a, [1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((solve_ordinate(&lu, &[1.0])[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_transport_on_two_by_two() {
        let d = mono(2, 0, 0.0, 0.0);
        let (flux, _) = Solver::new(&d, SolverOptions::default())
            .solve(&constant_source(0.0, 1.0))
            .unwrap();
        for m in 0..d.ordinates.len() {
            for v in flux.vector(0, m).unwrap() {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovers_known_solution() {
        let d = mono(3, 2, 1.0, 0.0);
        let mu = crate::geometry::normalized(&[0.4, 0.9, 0.0]);
        let a = d.transport_matrix(&mu, 0, 0.8).unwrap();
        let n = d.n_x();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for (r, c, v) in d.transport_entries(&mu, 0, 0.8) {
            b[r] += v * x[c];
        }
        let lu = factorize(&a, mu, 1.0).unwrap();
        let y = solve_ordinate(&lu, &b);
        let err: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err < 1e-10 * nx);
        let mut r = b.clone();
        for (i, j, v) in d.transport_entries(&mu, 0, 0.8) {
            r[i] -= v * y[j];
        }
        let rn: f64 = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(rn <= 1e-12 * bn);
    }

    #[test]
    fn pure_absorber_takes_one_iteration() {
        let d = mono(2, 1, 1.0, 0.0);
        let (_, rep) = Solver::new(&d, SolverOptions::default())
            .solve(&constant_source(1.0, 0.0))
            .unwrap();
        assert_eq!(rep.groups[0].iterations, 1);
        assert!(rep.converged());
    }

    #[test]
    fn constant_solution_is_reproduced_with_scattering() {
        // The equiangular map integrates constants exactly on the circle.
        let d = Discretisation::new(
            SpatialMesh::structured_quads(2, 2, [0., 0., 1., 1.])
                .unwrap()
                .with_degree(1),
            AngularMesh::with_map(2, 2, 1, crate::angular::PatchMap::Equiangular).unwrap(),
            EnergyGrid::monoenergetic(1.0).unwrap(),
            Arc::new(IsotropicModel::new(2, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        assert!((d.ordinates.total_weight() - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        let (flux, rep) = Solver::new(&d, SolverOptions::default())
            .solve(&constant_source(1.0, 1.0))
            .unwrap();
        assert!(rep.converged());
        for m in 0..d.ordinates.len() {
            let v = flux.vector(0, m).unwrap();
            for e in 0..d.mesh.num_elements() {
                let r = d.dofs.range(e);
                assert!((v[r.start] - 1.0).abs() < 1e-9);
                for k in r.start + 1..r.end {
                    assert!(v[k].abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn residuals_contract_at_scattering_ratio() {
        let d = mono(3, 0, 1.0, 1.0);
        let (_, rep) = Solver::new(&d, SolverOptions::default())
            .solve(&constant_source(1.0, 0.0))
            .unwrap();
        let r = &rep.groups[0].residuals;
        assert!(rep.groups[0].contraction().unwrap() <= 0.55);
        for w in r[1..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn fixed_iteration_mode() {
        let d = mono(2, 0, 1.0, 1.0);
        let opts = SolverOptions {
            fixed_iterations: Some(3),
            ..Default::default()
        };
        let (_, rep) = Solver::new(&d, opts)
            .solve(&constant_source(1.0, 0.0))
            .unwrap();
        assert_eq!(rep.groups[0].iterations, 3);
        assert_eq!(rep.groups[0].residuals.len(), 3);
    }

    #[test]
    fn groups_must_be_solved_in_order() {
        let d = Discretisation::new(
            SpatialMesh::structured_quads(2, 2, [0., 0., 1., 1.]).unwrap(),
            AngularMesh::new(2, 2, 0).unwrap(),
            EnergyGrid::uniform(500.0, 1000.0, 2, 0).unwrap(),
            Arc::new(crate::physics::ComptonModel::water(2).unwrap()),
        )
        .unwrap();
        let s = Solver::new(&d, SolverOptions::default());
        let mut flux = FluxState::for_discretisation(&d);
        let src = constant_source(1.0, 0.0);
        assert!(matches!(
            s.solve_group(&mut flux, 1, &src),
            Err(Error::GroupOrder {
                requested: 1,
                expected: 0
            })
        ));
        s.solve_group(&mut flux, 0, &src).unwrap();
        s.solve_group(&mut flux, 1, &src).unwrap();
        assert!(flux.is_finite());
    }
}
