//! `boltzdg` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use boltzdg::analysis::{eoc, NormEvaluator, Norms};
use boltzdg::assembly::Discretisation;
use boltzdg::physics::check_positivity;
use boltzdg::solver::{SolveReport, Solver, SolverOptions};
use boltzdg::study::{run_case, CaseSpec};
use boltzdg::verify::{run_all, VerifyOptions};
use clap::{Parser, Subcommand};
use serde::Serialize;

use boltzdg_cli::config::LoadedConfig;
use boltzdg_cli::output::{self, CsvTable};
use boltzdg_cli::plot::{loglog_svg, Series, SlopeGuide};

#[derive(Parser, Debug)]
#[command(
    name = "boltzdg",
    version,
    about = "Space-angle-energy DG solver for linear Boltzmann transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for artifacts (overrides `output.directory`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (overrides BOLTZDG_THREADS and `solver.threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized property checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and write the flux summary and report.
    Run { config: PathBuf },
    /// Run the refinement ladder of `[convergence]` and report rates.
    Convergence { config: PathBuf },
    /// Run the built-in verification suite.
    Verify {
        /// Random samples for the coercivity check.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_weight_perturbation: f64,
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_upscatter: f64,
    },
    /// Write the ordinate table of the configured angular mesh.
    Ordinates { config: PathBuf },
    /// Print problem sizes and the positivity report.
    Info { config: PathBuf },
}

/// Error carrying the process exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const VALIDATION: u8 = 1;
const SOLVER: u8 = 2;
const VERIFICATION: u8 = 3;

trait ExitStatus<T> {
    fn status(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitStatus<T> for Result<T, E> {
    fn status(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run { config } => cmd_run(cli, config),
        Command::Convergence { config } => cmd_convergence(cli, config),
        Command::Verify {
            samples,
            inject_weight_perturbation,
            inject_upscatter,
        } => cmd_verify(
            cli,
            VerifyOptions {
                seed: cli.seed,
                coercivity_samples: *samples,
                weight_perturbation: *inject_weight_perturbation,
                upscatter_injection: *inject_upscatter,
            },
        ),
        Command::Ordinates { config } => cmd_ordinates(cli, config),
        Command::Info { config } => cmd_info(cli, config),
    }
}

fn say(cli: &Cli, text: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", text.as_ref());
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .status(VALIDATION)
}

fn prepare_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .status(VALIDATION)
}

#[derive(Serialize)]
struct RunReport<'a> {
    status: &'a str,
    label: &'a str,
    config_sha256: &'a str,
    message: Option<String>,
    threads: usize,
    spatial_dofs: usize,
    ordinates: usize,
    energy_nodes: usize,
    dofs: usize,
    positivity_c0_min: f64,
    errors: Option<Norms>,
    solve: Option<&'a SolveReport>,
}

fn write_report(path: &Path, report: &RunReport) -> Outcome {
    let text = toml::to_string(report)
        .context("serialising report")
        .status(SOLVER)?;
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .status(SOLVER)
}

fn centroid_c0(disc: &Discretisation) -> anyhow::Result<f64> {
    let centroids: Vec<_> = disc
        .mesh
        .elements()
        .iter()
        .map(|e| e.metrics.centroid)
        .collect();
    Ok(check_positivity(disc.model.as_ref(), &disc.grid, &centroids)?.c0_min)
}

fn cmd_run(cli: &Cli, path: &Path) -> Outcome {
    let cfg = LoadedConfig::from_file(path).status(VALIDATION)?;
    let spec = cfg.case().status(VALIDATION)?;
    let opts = cfg.solver_options(cli.threads).status(VALIDATION)?;
    let dir = cfg.output_dir(cli.output_dir.as_deref());
    prepare_dir(&dir)?;
    pool(opts.threads)?.install(|| {
        let disc = spec
            .discretise()
            .context("building the discretisation")
            .status(VALIDATION)?;
        let c0 = centroid_c0(&disc).status(VALIDATION)?;
        say(
            cli,
            format!(
                "{}: {} dofs, positivity c0_min = {c0:e}",
                spec.label,
                disc.num_dofs()
            ),
        );
        let mut report = RunReport {
            status: "ok",
            label: &spec.label,
            config_sha256: &cfg.hash,
            message: None,
            threads: rayon::current_num_threads(),
            spatial_dofs: disc.n_x(),
            ordinates: disc.ordinates.directions.len(),
            energy_nodes: disc.grid.num_nodes(),
            dofs: disc.num_dofs(),
            positivity_c0_min: c0,
            errors: None,
            solve: None,
        };
        let source = spec.source(&disc);
        let (flux, solve) = match Solver::new(&disc, opts.clone()).solve(source.as_ref()) {
            Ok(r) => r,
            Err(e) => {
                report.status = "failed";
                report.message = Some(e.to_string());
                write_report(&dir.join("report.toml"), &report)?;
                return Err(anyhow!(e).context("solve failed")).status(SOLVER);
            }
        };
        if let Some(exact) = spec.exact() {
            report.errors = Some(
                NormEvaluator::new(&disc)
                    .and_then(|n| n.errors(&flux, Some(exact.as_ref())))
                    .status(SOLVER)?,
            );
        }
        let converged = solve.converged() || opts.fixed_iterations.is_some();
        if !converged {
            report.status = "not_converged";
            report.message = Some(format!(
                "source iteration did not reach {:e}",
                opts.tolerance
            ));
        }
        report.solve = Some(&solve);
        output::write_flux_summary(&dir.join("flux.csv"), &disc, &flux, &cfg.hash)
            .status(SOLVER)?;
        if cfg.config.output.dump_coefficients {
            output::write_solution_csv(&dir.join("solution.csv"), &disc, &flux, &cfg.hash)
                .status(SOLVER)?;
            output::write_sidecar(&dir.join("solution.bin"), disc.mesh.dim(), &flux)
                .status(SOLVER)?;
        }
        write_report(&dir.join("report.toml"), &report)?;
        say(
            cli,
            format!(
                "{} iterations, converged = {}, {:.2}s; artifacts in {}",
                solve.total_iterations(),
                solve.converged(),
                solve.total_seconds,
                dir.display()
            ),
        );
        if let Some(e) = report.errors {
            say(
                cli,
                format!(
                    "errors: l2 = {:e}, dg = {:e}, streamline = {:e}",
                    e.l2, e.dg, e.streamline
                ),
            );
        }
        if converged {
            Ok(())
        } else {
            Err(anyhow!("source iteration did not converge")).status(SOLVER)
        }
    })
}

fn cmd_convergence(cli: &Cli, path: &Path) -> Outcome {
    let cfg = LoadedConfig::from_file(path).status(VALIDATION)?;
    let levels = cfg.ladder().status(VALIDATION)?;
    let opts = cfg.solver_options(cli.threads).status(VALIDATION)?;
    let dir = cfg.output_dir(cli.output_dir.as_deref());
    prepare_dir(&dir)?;
    let units = "h in mesh length units, radians and keV; errors in the L2, DG and streamline norms over the phase space";
    let mut table = CsvTable::create(
        &dir.join("convergence.csv"),
        units,
        &cfg.hash,
        output::CONVERGENCE_COLUMNS,
    )
    .status(SOLVER)?;
    let mut records = Vec::new();
    for (i, spec) in levels.iter().enumerate() {
        let out = run_level(spec, &opts)
            .with_context(|| format!("level {i} ({})", spec.label))
            .status(SOLVER)?;
        let r = &out;
        say(
            cli,
            format!(
                "{:<32} N={:>9} l2={:.4e} dg={:.4e} iterations={} {:.1}s",
                r.label, r.dofs, r.errors.l2, r.errors.dg, r.iterations, r.seconds
            ),
        );
        table.row(&output::convergence_row(i, r)).status(SOLVER)?;
        records.push(out);
    }
    let d_d = levels[0].phase_space_dim();
    let rates = eoc(&records, d_d as f64).status(SOLVER)?;
    let mut t = CsvTable::create(
        &dir.join("eoc.csv"),
        "dimensionless orders; *_h against h_x, *_n against N^(1/d_D)",
        &cfg.hash,
        &[
            "from",
            "to",
            "l2_h",
            "dg_h",
            "streamline_h",
            "l2_n",
            "dg_n",
            "streamline_n",
        ],
    )
    .status(SOLVER)?;
    for (i, r) in rates.iter().enumerate() {
        t.row(&[
            i.to_string(),
            (i + 1).to_string(),
            r.h.l2.to_string(),
            r.h.dg.to_string(),
            r.h.streamline.to_string(),
            r.n.l2.to_string(),
            r.n.dg.to_string(),
            r.n.streamline.to_string(),
        ])
        .status(SOLVER)?;
        say(
            cli,
            format!(
                "  EOC {i}->{}: l2 {:.3}, dg {:.3} (in h)",
                i + 1,
                r.h.l2,
                r.h.dg
            ),
        );
    }
    let svg = convergence_figure(&cfg.config.label, &records, d_d);
    std::fs::write(dir.join("convergence.svg"), svg)
        .context("writing convergence.svg")
        .status(SOLVER)?;
    Ok(())
}

fn run_level(
    spec: &CaseSpec,
    opts: &SolverOptions,
) -> anyhow::Result<boltzdg::analysis::ConvergenceRecord> {
    let out = run_case(spec, opts)?;
    if !(out.report.converged() || opts.fixed_iterations.is_some()) {
        anyhow::bail!("source iteration did not converge");
    }
    Ok(out.record)
}

fn convergence_figure(
    label: &str,
    records: &[boltzdg::analysis::ConvergenceRecord],
    d_d: usize,
) -> String {
    let points = |f: fn(&Norms) -> f64| {
        records
            .iter()
            .map(|r| (r.dofs as f64, f(&r.errors)))
            .collect::<Vec<_>>()
    };
    let series = vec![
        Series {
            label: "L2 error".into(),
            points: points(|e| e.l2),
            color: "#1f4e9c",
            dashed: true,
        },
        Series {
            label: "DG-norm error".into(),
            points: points(|e| e.dg),
            color: "#111111",
            dashed: false,
        },
    ];
    let p = records.last().map_or(0, |r| r.p) as f64;
    let last = records
        .last()
        .map(|r| (r.dofs as f64, r.errors))
        .unwrap_or_default();
    let guides = vec![
        SlopeGuide {
            slope: -(p + 1.0) / d_d as f64,
            anchor: (last.0, 0.5 * last.1.l2),
        },
        SlopeGuide {
            slope: -(p + 0.5) / d_d as f64,
            anchor: (last.0, 2.0 * last.1.dg),
        },
    ];
    loglog_svg(
        &format!("{label}: error against degrees of freedom"),
        "N",
        "error",
        &series,
        &guides,
    )
}

fn cmd_verify(cli: &Cli, opts: VerifyOptions) -> Outcome {
    let checks = run_all(&opts).status(VERIFICATION)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        say(
            cli,
            format!(
                "{:<30} {:<4} value={:<12.4e} threshold={:<10.3e} {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.threshold,
                c.detail
            ),
        );
    }
    if failed > 0 {
        return Err(anyhow!("{failed} of {} checks failed", checks.len())).status(VERIFICATION);
    }
    say(cli, format!("all {} checks passed", checks.len()));
    Ok(())
}

fn cmd_ordinates(cli: &Cli, path: &Path) -> Outcome {
    let cfg = LoadedConfig::from_file(path).status(VALIDATION)?;
    let set = cfg
        .case()
        .and_then(|s| Ok(s.angular_mesh()?.ordinates()?))
        .status(VALIDATION)?;
    let dir = cfg.output_dir(cli.output_dir.as_deref());
    prepare_dir(&dir)?;
    let file = dir.join("ordinates.csv");
    output::write_ordinates(&file, &set, &cfg.hash).status(VALIDATION)?;
    say(
        cli,
        format!(
            "{} ordinates, total weight {:.12} written to {}",
            set.directions.len(),
            set.total_weight(),
            file.display()
        ),
    );
    Ok(())
}

fn cmd_info(cli: &Cli, path: &Path) -> Outcome {
    let cfg = LoadedConfig::from_file(path).status(VALIDATION)?;
    let spec = cfg.case().status(VALIDATION)?;
    let opts = cfg.solver_options(cli.threads).status(VALIDATION)?;
    pool(opts.threads)?.install(|| {
        let disc = spec.discretise().status(VALIDATION)?;
        let centroids: Vec<_> = disc
            .mesh
            .elements()
            .iter()
            .map(|e| e.metrics.centroid)
            .collect();
        let pos =
            check_positivity(disc.model.as_ref(), &disc.grid, &centroids).status(VALIDATION)?;
        let lines = [
            format!("label            {}", spec.label),
            format!("config_sha256    {}", cfg.hash),
            format!("elements         {}", disc.mesh.num_elements()),
            format!("spatial dofs     {}", disc.n_x()),
            format!("angular patches  {}", disc.angular.num_patches()),
            format!("ordinates        {}", disc.ordinates.directions.len()),
            format!("energy groups    {}", disc.grid.num_groups()),
            format!("energy nodes     {}", disc.grid.num_nodes()),
            format!("total dofs       {}", disc.num_dofs()),
            format!(
                "c0_min           {:e} at x = {:?}, E = {} keV",
                pos.c0_min,
                &pos.argmin_x[..disc.mesh.dim()],
                pos.argmin_e
            ),
        ];
        for l in lines {
            say(cli, l);
        }
        if let Some(w) = pos.warning() {
            eprintln!("warning: {w}");
        }
        Ok(())
    })
}
