//! TOML run configuration and its translation into solver inputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use boltzdg::angular::PatchMap;
use boltzdg::solver::SolverOptions;
use boltzdg::study::{AngularSpec, CaseSpec, EnergySpec, MeshSpec, ModelSpec, SourceSpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Environment variable that overrides `solver.threads`.
pub const THREADS_ENV: &str = "BOLTZDG_THREADS";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub dim: usize,
    /// Cells per axis of the generated unit square or cube.
    pub cells: Option<usize>,
    /// JSON mesh file, relative to the config file.
    pub mesh_file: Option<PathBuf>,
    /// Uniform polynomial degree; required for generated meshes.
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularConfig {
    /// Must equal `spatial.dim` when given.
    pub dim: Option<usize>,
    pub patches_per_edge: usize,
    pub degree: usize,
    #[serde(default)]
    pub map: Option<PatchMap>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub fixed_iterations: Option<usize>,
    /// 0 selects one thread per core.
    #[serde(default)]
    pub threads: usize,
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tolerance
}

fn default_max_iterations() -> usize {
    SolverOptions::default().max_iterations
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            fixed_iterations: None,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Also write the per-ordinate solution CSV and the binary sidecar.
    #[serde(default)]
    pub dump_coefficients: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("output")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            dump_coefficients: false,
        }
    }
}

/// One rung of a refinement ladder; unset fields keep the base values.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub cells: usize,
    pub patches_per_edge: Option<usize>,
    pub groups: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default)]
    pub levels: Vec<LevelConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub spatial: SpatialConfig,
    pub angular: AngularConfig,
    pub energy: EnergySpec,
    pub model: ModelSpec,
    pub problem: SourceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

fn default_label() -> String {
    "run".into()
}

/// A parsed configuration with its provenance.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory against which relative paths resolve.
    pub base_dir: PathBuf,
    /// SHA-256 of the configuration text, hex encoded.
    pub hash: String,
}

pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        let loaded = Self {
            config,
            base_dir,
            hash: hash_text(text),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let s = &c.spatial;
        if s.dim != 2 && s.dim != 3 {
            bail!("spatial.dim must be 2 or 3, got {}", s.dim);
        }
        if let Some(a) = c.angular.dim {
            if a != s.dim {
                bail!("spatial.dim = {} does not match angular.dim = {a}", s.dim);
            }
        }
        match (s.cells, &s.mesh_file) {
            (Some(_), Some(_)) => {
                bail!("spatial.cells and spatial.mesh_file are mutually exclusive")
            }
            (None, None) => bail!("one of spatial.cells or spatial.mesh_file is required"),
            (Some(0), None) => bail!("spatial.cells must be at least 1"),
            (Some(_), None) if s.degree.is_none() => {
                bail!("spatial.degree is required with spatial.cells")
            }
            _ => {}
        }
        if c.angular.patches_per_edge == 0 {
            bail!("angular.patches_per_edge must be at least 1");
        }
        if c.solver.tolerance.is_nan() || c.solver.tolerance <= 0.0 {
            bail!("solver.tolerance must be positive");
        }
        if c.solver.max_iterations == 0 {
            bail!("solver.max_iterations must be at least 1");
        }
        if c.solver.fixed_iterations == Some(0) {
            bail!("solver.fixed_iterations must be at least 1");
        }
        for (i, level) in c.convergence.levels.iter().enumerate() {
            if level.cells == 0 || level.patches_per_edge == Some(0) || level.groups == Some(0) {
                bail!("convergence.levels[{i}] needs positive cells, patches_per_edge and groups");
            }
            if level.groups.is_some() && matches!(c.energy, EnergySpec::Monoenergetic { .. }) {
                bail!("convergence.levels[{i}].groups is set but the energy grid is monoenergetic");
            }
        }
        self.case()?;
        Ok(())
    }

    /// The single-run problem.
    pub fn case(&self) -> Result<CaseSpec> {
        let c = &self.config;
        let mesh = match (&c.spatial.cells, &c.spatial.mesh_file) {
            (Some(cells), _) => MeshSpec::UnitCube { cells: *cells },
            (None, Some(path)) => MeshSpec::File {
                path: self.base_dir.join(path),
            },
            (None, None) => bail!("one of spatial.cells or spatial.mesh_file is required"),
        };
        Ok(CaseSpec {
            label: c.label.clone(),
            dim: c.spatial.dim,
            mesh,
            degree: c.spatial.degree,
            angular: AngularSpec {
                patches_per_edge: c.angular.patches_per_edge,
                degree: c.angular.degree,
                map: c.angular.map,
            },
            energy: c.energy.clone(),
            model: c.model.clone(),
            source: c.problem.clone(),
        })
    }

    /// The refinement ladder of `[convergence]`.
    pub fn ladder(&self) -> Result<Vec<CaseSpec>> {
        let levels = &self.config.convergence.levels;
        if levels.len() < 2 {
            bail!(
                "convergence.levels needs at least two levels, got {}",
                levels.len()
            );
        }
        if !matches!(self.config.problem, SourceSpec::Manufactured { .. }) {
            bail!("convergence studies need problem.kind = \"manufactured\"");
        }
        let base = self.case()?;
        levels
            .iter()
            .map(|level| {
                let mut spec = base.clone();
                spec.mesh = MeshSpec::UnitCube { cells: level.cells };
                if spec.degree.is_none() {
                    bail!("convergence studies need spatial.degree");
                }
                if let Some(n) = level.patches_per_edge {
                    spec.angular.patches_per_edge = n;
                }
                if let (Some(n), EnergySpec::Uniform { groups, .. }) =
                    (level.groups, &mut spec.energy)
                {
                    *groups = n;
                }
                let groups = match spec.energy {
                    EnergySpec::Uniform { groups, .. } => format!("-g{groups}"),
                    EnergySpec::Monoenergetic { .. } => String::new(),
                };
                spec.label = format!(
                    "{}-c{}-n{}{groups}",
                    base.label, level.cells, spec.angular.patches_per_edge
                );
                Ok(spec)
            })
            .collect()
    }

    /// Solver options, with the thread count taken from (in order) the
    /// command line, the environment and the config.
    pub fn solver_options(&self, cli_threads: Option<usize>) -> Result<SolverOptions> {
        let s = &self.config.solver;
        let threads = match (cli_threads, std::env::var(THREADS_ENV)) {
            (Some(t), _) => t,
            (None, Ok(v)) => v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?,
            (None, Err(_)) => s.threads,
        };
        Ok(SolverOptions {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            fixed_iterations: s.fixed_iterations,
            threads,
        })
    }

    pub fn output_dir(&self, cli_dir: Option<&Path>) -> PathBuf {
        match cli_dir {
            Some(d) => d.to_path_buf(),
            None => self.base_dir.join(&self.config.output.directory),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[spatial]
dim = 2
cells = 4
degree = 1

[angular]
patches_per_edge = 1
degree = 1

[energy]
kind = "monoenergetic"
energy = 1.0

[model]
kind = "isotropic"
alpha = 1.0
sigma_s = 1.0

[problem]
kind = "manufactured"
exact = { kind = "planar_wave" }
"#;

    fn load(text: &str) -> Result<LoadedConfig> {
        LoadedConfig::parse(text, PathBuf::from("/cfg"))
    }

    #[test]
    fn base_config_parses_with_defaults() {
        let c = load(BASE).unwrap();
        assert_eq!(c.config.solver.max_iterations, 200);
        assert_eq!(c.config.output.directory, PathBuf::from("output"));
        assert_eq!(c.case().unwrap().dim, 2);
        assert_eq!(c.output_dir(None), PathBuf::from("/cfg/output"));
    }

    #[test]
    fn mismatched_dimensions_name_both_keys() {
        let text = BASE.replace("patches_per_edge = 1", "dim = 3\npatches_per_edge = 1");
        let msg = format!("{:#}", load(&text).unwrap_err());
        assert!(
            msg.contains("spatial.dim") && msg.contains("angular.dim"),
            "{msg}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load(&format!("{BASE}\n[solver]\ntolerence = 1e-8\n")).is_err());
    }

    #[test]
    fn hash_depends_on_text() {
        let a = load(BASE).unwrap();
        let b = load(&format!("{BASE}\n# comment\n")).unwrap();
        assert_eq!(a.hash.len(), 64);
        assert_ne!(a.hash, b.hash);
    }

    #[test]
    fn ladder_needs_two_levels() {
        let c = load(BASE).unwrap();
        assert!(c.ladder().is_err());
        let text = format!("{BASE}\n[convergence]\nlevels = [{{ cells = 2 }}, {{ cells = 4, patches_per_edge = 2 }}]\n");
        let ladder = load(&text).unwrap().ladder().unwrap();
        assert_eq!(ladder.len(), 2);
        assert_eq!(ladder[1].angular.patches_per_edge, 2);
        assert_eq!(ladder[1].mesh, MeshSpec::UnitCube { cells: 4 });
    }

    #[test]
    fn groups_on_monoenergetic_ladder_rejected() {
        let text = format!(
            "{BASE}\n[convergence]\nlevels = [{{ cells = 2, groups = 2 }}, {{ cells = 4 }}]\n"
        );
        assert!(load(&text).is_err());
    }

    #[test]
    fn cli_threads_take_precedence() {
        let c = load(BASE).unwrap();
        assert_eq!(c.solver_options(Some(3)).unwrap().threads, 3);
    }
}
