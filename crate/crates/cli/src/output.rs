//! CSV tables, the solution dump and its binary sidecar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use boltzdg::analysis::ConvergenceRecord;
use boltzdg::angular::OrdinateSet;
use boltzdg::assembly::Discretisation;
use boltzdg::solver::FluxState;

/// First bytes of a solution sidecar.
pub const SIDECAR_MAGIC: [u8; 8] = *b"BOLTZDG\0";
pub const SIDECAR_VERSION: u32 = 1;

/// Line-oriented CSV writer with `#` comment lines for units and the
/// config hash. Every row is flushed so partial tables survive failures.
pub struct CsvTable {
    out: BufWriter<File>,
}

impl CsvTable {
    pub fn create(path: &Path, units: &str, hash: &str, columns: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# units: {units}")?;
        writeln!(out, "# config_sha256: {hash}")?;
        writeln!(out, "{}", columns.join(","))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        self.out.flush()?;
        Ok(())
    }
}

fn coords(x: &[f64; 3], dim: usize) -> Vec<String> {
    x[..dim].iter().map(f64::to_string).collect()
}

fn coord_columns(dim: usize) -> &'static [&'static str] {
    &["x", "y", "z"][..dim]
}

/// Group-integrated scalar flux `sum_l w_l sum_m w_m u_h(x_c, mu_m, E_l)`
/// at every element centroid, indexed `[element][group]`.
pub fn scalar_flux_at_centroids(disc: &Discretisation, flux: &FluxState) -> Vec<Vec<f64>> {
    let n_groups = disc.grid.num_groups();
    let mut phi = Vec::new();
    (0..disc.mesh.num_elements())
        .map(|e| {
            let c = disc.mesh.elements()[e].metrics.centroid;
            phi.resize(disc.dofs.local_len(e), 0.0);
            disc.dofs.values(e, &c, &mut phi);
            let range = disc.dofs.range(e);
            let mut out = vec![0.0; n_groups];
            for l in 0..disc.grid.num_nodes() {
                let node = disc.grid.node(l);
                for (m, w) in disc.ordinates.weights.iter().enumerate() {
                    if let Some(v) = flux.vector(l, m) {
                        let u: f64 = v[range.clone()].iter().zip(&phi).map(|(a, b)| a * b).sum();
                        out[node.group] += node.weight * w * u;
                    }
                }
            }
            out
        })
        .collect()
}

pub fn write_flux_summary(
    path: &Path,
    disc: &Discretisation,
    flux: &FluxState,
    hash: &str,
) -> Result<()> {
    let dim = disc.mesh.dim();
    let mut cols = vec!["element"];
    cols.extend_from_slice(coord_columns(dim));
    cols.extend_from_slice(&["group", "e_low", "e_high", "scalar_flux"]);
    let mut t = CsvTable::create(
        path,
        "coordinates in mesh length units; energies in keV; scalar_flux integrated over angle and group",
        hash,
        &cols,
    )?;
    for (e, groups) in scalar_flux_at_centroids(disc, flux).iter().enumerate() {
        let c = disc.mesh.elements()[e].metrics.centroid;
        for (g, value) in groups.iter().enumerate() {
            let (lo, hi) = disc.grid.group_interval(g);
            let mut row = vec![e.to_string()];
            row.extend(coords(&c, dim));
            row.extend([
                g.to_string(),
                lo.to_string(),
                hi.to_string(),
                value.to_string(),
            ]);
            t.row(&row)?;
        }
    }
    Ok(())
}

/// Per-ordinate dump of the first coefficient of every element.
pub fn write_solution_csv(
    path: &Path,
    disc: &Discretisation,
    flux: &FluxState,
    hash: &str,
) -> Result<()> {
    let dim = disc.mesh.dim();
    let mut cols = vec!["element"];
    cols.extend_from_slice(coord_columns(dim));
    cols.extend_from_slice(&[
        "group",
        "energy_node",
        "energy",
        "ordinate",
        "coefficient_0",
    ]);
    let mut t = CsvTable::create(
        path,
        "coordinates in mesh length units; energy in keV; coefficient_0 multiplies the constant basis function",
        hash,
        &cols,
    )?;
    for e in 0..disc.mesh.num_elements() {
        let c = disc.mesh.elements()[e].metrics.centroid;
        let first = disc.dofs.offset(e);
        for l in 0..disc.grid.num_nodes() {
            let node = disc.grid.node(l);
            for m in 0..disc.ordinates.directions.len() {
                let Some(v) = flux.vector(l, m) else { continue };
                let mut row = vec![e.to_string()];
                row.extend(coords(&c, dim));
                row.extend([
                    node.group.to_string(),
                    l.to_string(),
                    node.energy.to_string(),
                    m.to_string(),
                    v[first].to_string(),
                ]);
                t.row(&row)?;
            }
        }
    }
    Ok(())
}

/// Full coefficient dump. Layout (little endian): 8-byte magic, `u32`
/// version, `u32` spatial dimension, `u64` spatial dofs, `u64` energy
/// nodes, `u64` ordinates, then `f64` coefficients ordered by energy node,
/// ordinate and spatial dof. Unsolved blocks are written as NaN.
pub fn write_sidecar(path: &Path, dim: usize, flux: &FluxState) -> Result<()> {
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    out.write_all(&SIDECAR_MAGIC)?;
    out.write_all(&SIDECAR_VERSION.to_le_bytes())?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    for n in [flux.n_x(), flux.num_nodes(), flux.num_ordinates()] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    let missing = vec![f64::NAN; flux.n_x()];
    for l in 0..flux.num_nodes() {
        for m in 0..flux.num_ordinates() {
            for x in flux.vector(l, m).unwrap_or(&missing) {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Contents of a sidecar file.
#[derive(Clone, Debug, PartialEq)]
pub struct Sidecar {
    pub dim: usize,
    pub n_x: usize,
    pub n_nodes: usize,
    pub n_ordinates: usize,
    pub values: Vec<f64>,
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let mut bytes = Vec::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 40 || bytes[..8] != SIDECAR_MAGIC {
        bail!("{} is not a solution sidecar", path.display());
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    let version = u32_at(8);
    if version != SIDECAR_VERSION {
        bail!("unsupported sidecar version {version}");
    }
    let (dim, n_x, n_nodes, n_ordinates) =
        (u32_at(12) as usize, u64_at(16), u64_at(24), u64_at(32));
    let body = &bytes[40..];
    if body.len() != 8 * n_x * n_nodes * n_ordinates {
        bail!(
            "sidecar body has {} bytes, expected {}",
            body.len(),
            8 * n_x * n_nodes * n_ordinates
        );
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Sidecar {
        dim,
        n_x,
        n_nodes,
        n_ordinates,
        values,
    })
}

pub fn write_ordinates(path: &Path, set: &OrdinateSet, hash: &str) -> Result<()> {
    let mut cols = vec!["ordinate", "patch", "local"];
    cols.extend_from_slice(&["mu_x", "mu_y", "mu_z"][..set.dim]);
    cols.push("weight");
    let mut t = CsvTable::create(
        path,
        "direction cosines dimensionless; weight in radians (2D) or steradians (3D)",
        hash,
        &cols,
    )?;
    for k in 0..set.directions.len() {
        let mut row = vec![
            k.to_string(),
            set.patch[k].to_string(),
            set.local[k].to_string(),
        ];
        row.extend(coords(&set.directions[k], set.dim));
        row.push(set.weights[k].to_string());
        t.row(&row)?;
    }
    Ok(())
}

pub const CONVERGENCE_COLUMNS: &[&str] = &[
    "level",
    "label",
    "dofs",
    "h_x",
    "h_s",
    "h_e",
    "p",
    "q",
    "r",
    "l2",
    "dg",
    "streamline",
    "iterations",
];

pub fn convergence_row(level: usize, r: &ConvergenceRecord) -> Vec<String> {
    vec![
        level.to_string(),
        r.label.clone(),
        r.dofs.to_string(),
        r.h_x.to_string(),
        r.h_s.to_string(),
        r.h_e.to_string(),
        r.p.to_string(),
        r.q.to_string(),
        r.r.to_string(),
        r.errors.l2.to_string(),
        r.errors.dg.to_string(),
        r.errors.streamline.to_string(),
        r.iterations.to_string(),
    ]
}
