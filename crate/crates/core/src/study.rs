//! Problem descriptions, single runs and refinement ladders.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    eoc, ComptonBeamSolution, ConstantSolution, ConvergenceRecord, ExactSolution,
    ManufacturedSource, NormEvaluator, Norms, PlanarWaveSolution, PolarCosineSolution, Rates,
};
use crate::angular::{AngularMesh, PatchMap};
use crate::assembly::{constant_source, Discretisation, SourceData};
use crate::energy::EnergyGrid;
use crate::error::{Error, Result};
use crate::physics::{
    ComptonModel, IsotropicModel, MaterialModel, UniformDownscatter, WATER_ELECTRON_DENSITY,
};
use crate::solver::{FluxState, SolveReport, Solver, SolverOptions};
use crate::spatial_mesh::{load_mesh, SpatialMesh};

fn default_density() -> f64 {
    WATER_ELECTRON_DENSITY
}

/// Material model selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Elastic isotropic scattering with total rate `sigma_s`.
    Isotropic {
        alpha: f64,
        sigma_s: f64,
    },
    PureAbsorber {
        alpha: f64,
    },
    /// Klein-Nishina scattering off free electrons.
    Compton {
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_density")]
        electron_density: f64,
    },
    UniformDownscatter {
        alpha: f64,
        sigma_s: f64,
        e_floor: f64,
    },
}

impl ModelSpec {
    pub fn build(&self, dim: usize) -> Result<Arc<dyn MaterialModel>> {
        Ok(match *self {
            ModelSpec::Isotropic { alpha, sigma_s } => {
                Arc::new(IsotropicModel::new(dim, alpha, sigma_s)?)
            }
            ModelSpec::PureAbsorber { alpha } => {
                Arc::new(IsotropicModel::pure_absorber(dim, alpha)?)
            }
            ModelSpec::Compton {
                alpha,
                electron_density,
            } => {
                if !(electron_density > 0.0) || !(alpha >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "compton model needs alpha >= 0 and a positive electron density".into(),
                    ));
                }
                let mut m = ComptonModel::water(dim)?;
                m.alpha = alpha;
                m.rho = electron_density;
                Arc::new(m)
            }
            ModelSpec::UniformDownscatter {
                alpha,
                sigma_s,
                e_floor,
            } => {
                if !(alpha >= 0.0 && sigma_s >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "alpha and sigma_s must be non-negative".into(),
                    ));
                }
                Arc::new(UniformDownscatter {
                    dim,
                    alpha,
                    sigma_s,
                    e_floor,
                })
            }
        })
    }
}

/// Manufactured solutions available by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExactSpec {
    Constant {
        value: f64,
    },
    /// `exp(mu_1 - mu_2 / 2) (x cos y + y sin x)`.
    PlanarWave,
    /// `cos(4 acos mu_3) (x cos y + y sin x)`.
    PolarCosine,
    /// `exp(-(E mu.x / E_max)^2) exp(-1 / (1 - (E / E_max)^2))`.
    ComptonBeam {
        e_max: f64,
    },
}

impl ExactSpec {
    pub fn build(&self) -> Arc<dyn ExactSolution> {
        match *self {
            ExactSpec::Constant { value } => Arc::new(ConstantSolution(value)),
            ExactSpec::PlanarWave => Arc::new(PlanarWaveSolution),
            ExactSpec::PolarCosine => Arc::new(PolarCosineSolution),
            ExactSpec::ComptonBeam { e_max } => Arc::new(ComptonBeamSolution { e_max }),
        }
    }
}

/// Right-hand side data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Forcing and inflow data derived from an exact solution.
    Manufactured { exact: ExactSpec },
    /// Constant volume source `f` and inflow value `g`.
    Constant { f: f64, g: f64 },
}

/// Energy discretisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    Monoenergetic {
        energy: f64,
    },
    Uniform {
        e_min: f64,
        e_max: f64,
        groups: usize,
        degree: usize,
    },
}

impl EnergySpec {
    pub fn build(&self) -> Result<EnergyGrid> {
        match *self {
            EnergySpec::Monoenergetic { energy } => EnergyGrid::monoenergetic(energy),
            EnergySpec::Uniform {
                e_min,
                e_max,
                groups,
                degree,
            } => EnergyGrid::uniform(e_min, e_max, groups, degree),
        }
    }
}

/// Spatial mesh source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    /// Uniform quadrilaterals (d = 2) or boxes (d = 3) on the unit cube.
    UnitCube { cells: usize },
    /// Mesh file in the JSON mesh format.
    File { path: PathBuf },
}

/// Angular discretisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSpec {
    /// Patches per edge of each face of the reference square or cube.
    pub patches_per_edge: usize,
    pub degree: usize,
    #[serde(default)]
    pub map: Option<PatchMap>,
}

/// Everything needed to build and solve one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub label: String,
    pub dim: usize,
    pub mesh: MeshSpec,
    /// Uniform spatial degree; `None` keeps the degrees of a mesh file.
    pub degree: Option<usize>,
    pub angular: AngularSpec,
    pub energy: EnergySpec,
    pub model: ModelSpec,
    pub source: SourceSpec,
}

impl CaseSpec {
    pub fn spatial_mesh(&self) -> Result<SpatialMesh> {
        let mesh = match &self.mesh {
            MeshSpec::UnitCube { cells } => match self.dim {
                2 => SpatialMesh::structured_quads(*cells, *cells, [0.0, 0.0, 1.0, 1.0])?,
                3 => SpatialMesh::structured_boxes(
                    *cells,
                    *cells,
                    *cells,
                    [0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
                )?,
                d => {
                    return Err(Error::InvalidArgument(format!(
                        "dimension must be 2 or 3, got {d}"
                    )))
                }
            },
            MeshSpec::File { path } => load_mesh(path)?,
        };
        if mesh.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "mesh dimension {} does not match problem dimension {}",
                mesh.dim(),
                self.dim
            )));
        }
        Ok(match self.degree {
            Some(p) => mesh.with_degree(p),
            None => mesh,
        })
    }

    pub fn angular_mesh(&self) -> Result<AngularMesh> {
        let map = self
            .angular
            .map
            .unwrap_or_else(|| PatchMap::default_for(self.dim));
        AngularMesh::with_map(
            self.dim,
            self.angular.patches_per_edge,
            self.angular.degree,
            map,
        )
    }

    pub fn discretise(&self) -> Result<Discretisation> {
        Discretisation::new(
            self.spatial_mesh()?,
            self.angular_mesh()?,
            self.energy.build()?,
            self.model.build(self.dim)?,
        )
    }

    /// Source data for `disc`, which must come from this spec.
    pub fn source(&self, disc: &Discretisation) -> Box<dyn SourceData> {
        match &self.source {
            SourceSpec::Manufactured { exact } => Box::new(ManufacturedSource::new(
                exact.build(),
                disc.model.clone(),
                disc.window,
            )),
            SourceSpec::Constant { f, g } => Box::new(constant_source(*f, *g)),
        }
    }

    pub fn exact(&self) -> Option<Arc<dyn ExactSolution>> {
        match &self.source {
            SourceSpec::Manufactured { exact } => Some(exact.build()),
            SourceSpec::Constant { .. } => None,
        }
    }

    /// Uniform spatial degree, or the largest element degree.
    pub fn spatial_degree(&self, disc: &Discretisation) -> usize {
        self.degree.unwrap_or_else(|| {
            disc.mesh
                .elements()
                .iter()
                .map(|e| e.degree)
                .max()
                .unwrap_or(0)
        })
    }

    /// Dimension of the full phase space (space, angle and, unless
    /// monoenergetic, energy).
    pub fn phase_space_dim(&self) -> usize {
        let energy = usize::from(!matches!(self.energy, EnergySpec::Monoenergetic { .. }));
        2 * self.dim - 1 + energy
    }
}

/// Result of one solve with optional error evaluation.
pub struct CaseOutcome {
    pub disc: Discretisation,
    pub flux: FluxState,
    pub report: SolveReport,
    pub errors: Option<Norms>,
    pub record: ConvergenceRecord,
}

/// Builds, solves and (for manufactured sources) measures one case, with all
/// parallel work on a pool of `options.threads` threads.
pub fn run_case(spec: &CaseSpec, options: &SolverOptions) -> Result<CaseOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let start = Instant::now();
        let disc = spec.discretise()?;
        let source = spec.source(&disc);
        let (flux, report) = Solver::new(&disc, options.clone()).solve(source.as_ref())?;
        let errors = match spec.exact() {
            Some(u) => Some(NormEvaluator::new(&disc)?.errors(&flux, Some(u.as_ref()))?),
            None => None,
        };
        let record = ConvergenceRecord {
            label: spec.label.clone(),
            dofs: disc.num_dofs(),
            h_x: disc.mesh.max_h(),
            h_s: disc.angular.h(),
            h_e: if disc.grid.is_monoenergetic() {
                0.0
            } else {
                disc.grid.h()
            },
            p: spec.spatial_degree(&disc),
            q: spec.angular.degree,
            r: match spec.energy {
                EnergySpec::Monoenergetic { .. } => 0,
                EnergySpec::Uniform { degree, .. } => degree,
            },
            errors: errors.unwrap_or_default(),
            iterations: report.total_iterations(),
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok(CaseOutcome {
            disc,
            flux,
            report,
            errors,
            record,
        })
    })
}

/// Records and rates of a refinement ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub records: Vec<ConvergenceRecord>,
    pub rates: Vec<Rates>,
    pub phase_space_dim: usize,
}

/// Runs every level of a ladder in order; `on_level` sees each completed
/// record (for incremental output).
pub fn run_ladder(
    levels: &[CaseSpec],
    options: &SolverOptions,
    mut on_level: impl FnMut(&CaseOutcome),
) -> Result<LadderResult> {
    if levels.len() < 2 {
        return Err(Error::InvalidArgument(
            "a convergence ladder needs at least two levels".into(),
        ));
    }
    if levels.iter().any(|l| l.exact().is_none()) {
        return Err(Error::InvalidArgument(
            "convergence ladders need a manufactured source".into(),
        ));
    }
    let mut records = Vec::new();
    for spec in levels {
        let out = run_case(spec, options)?;
        on_level(&out);
        records.push(out.record);
    }
    let d_d = levels[0].phase_space_dim();
    let rates = eoc(&records, d_d as f64)?;
    Ok(LadderResult {
        records,
        rates,
        phase_space_dim: d_d,
    })
}

/// Monoenergetic 2D ladder: isotropic scattering with `alpha = 1`,
/// `sigma_s = 1`, planar-wave solution, `8^2, 16^2, 32^2` cells with
/// `1, 2, 4` patches per edge and `q = p`.
pub fn mono_2d_ladder(p: usize) -> Vec<CaseSpec> {
    [(8, 1), (16, 2), (32, 4)]
        .iter()
        .map(|&(cells, n)| CaseSpec {
            label: format!("mono2d-p{p}-{cells}x{cells}-n{n}"),
            dim: 2,
            mesh: MeshSpec::UnitCube { cells },
            degree: Some(p),
            angular: AngularSpec {
                patches_per_edge: n,
                degree: p,
                map: None,
            },
            energy: EnergySpec::Monoenergetic { energy: 1.0 },
            model: ModelSpec::Isotropic {
                alpha: 1.0,
                sigma_s: 1.0,
            },
            source: SourceSpec::Manufactured {
                exact: ExactSpec::PlanarWave,
            },
        })
        .collect()
}

/// Polyenergetic 2D Compton ladder on (500, 1000) keV: `8^2, 16^2` cells,
/// `2, 4` patches per edge, `2, 4` groups, `p = q = r`.
pub fn compton_2d_ladder(p: usize) -> Vec<CaseSpec> {
    [(8, 2, 2), (16, 4, 4)]
        .iter()
        .map(|&(cells, n, groups)| CaseSpec {
            label: format!("compton2d-p{p}-{cells}x{cells}-n{n}-g{groups}"),
            dim: 2,
            mesh: MeshSpec::UnitCube { cells },
            degree: Some(p),
            angular: AngularSpec {
                patches_per_edge: n,
                degree: p,
                map: None,
            },
            energy: EnergySpec::Uniform {
                e_min: 500.0,
                e_max: 1000.0,
                groups,
                degree: p,
            },
            model: ModelSpec::Compton {
                alpha: 0.0,
                electron_density: WATER_ELECTRON_DENSITY,
            },
            source: SourceSpec::Manufactured {
                exact: ExactSpec::ComptonBeam { e_max: 1000.0 },
            },
        })
        .collect()
}

/// Monoenergetic 3D ladder: isotropic scattering with `alpha = 1`,
/// `sigma_s = 1`, polar-cosine solution, `4^3, 8^3` cubes, one patch per
/// face edge, `q = 1`, `p = 0`.
pub fn polar_3d_ladder() -> Vec<CaseSpec> {
    [4, 8]
        .iter()
        .map(|&cells| CaseSpec {
            label: format!("polar3d-p0-{cells}^3"),
            dim: 3,
            mesh: MeshSpec::UnitCube { cells },
            degree: Some(0),
            angular: AngularSpec {
                patches_per_edge: 1,
                degree: 1,
                map: None,
            },
            energy: EnergySpec::Monoenergetic { energy: 1.0 },
            model: ModelSpec::Isotropic {
                alpha: 1.0,
                sigma_s: 1.0,
            },
            source: SourceSpec::Manufactured {
                exact: ExactSpec::PolarCosine,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips_through_json() {
        let spec = &compton_2d_ladder(1)[0];
        let text = serde_json::to_string(spec).unwrap();
        let back: CaseSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, spec);
    }

    #[test]
    fn phase_space_dimensions() {
        assert_eq!(mono_2d_ladder(0)[0].phase_space_dim(), 3);
        assert_eq!(compton_2d_ladder(0)[0].phase_space_dim(), 4);
        assert_eq!(polar_3d_ladder()[0].phase_space_dim(), 5);
    }

    #[test]
    fn ladder_needs_two_levels() {
        let one = &mono_2d_ladder(0)[..1];
        assert!(run_ladder(one, &SolverOptions::default(), |_| {}).is_err());
    }

    #[test]
    fn constant_source_case_runs() {
        let spec = CaseSpec {
            label: "absorber".into(),
            dim: 2,
            mesh: MeshSpec::UnitCube { cells: 2 },
            degree: Some(1),
            angular: AngularSpec {
                patches_per_edge: 1,
                degree: 0,
                map: None,
            },
            energy: EnergySpec::Monoenergetic { energy: 1.0 },
            model: ModelSpec::PureAbsorber { alpha: 1.0 },
            source: SourceSpec::Constant { f: 1.0, g: 0.0 },
        };
        let out = run_case(&spec, &SolverOptions::default()).unwrap();
        assert!(out.errors.is_none());
        assert_eq!(out.record.dofs, 4 * 3 * 4);
        assert!(out.flux.is_finite());
    }
}
