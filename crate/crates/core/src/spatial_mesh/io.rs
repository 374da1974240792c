//! JSON mesh files.
//!
//! ```json
//! { "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
//!   "elements": [[0, 1, 2, 3]],
//!   "degree": 1 }
//! ```
//!
//! Two-dimensional elements are counter-clockwise vertex loops. In three
//! dimensions each element is a list of six quadrilateral faces, each a
//! vertex loop, describing an axis-aligned box. `degree` is optional and sets
//! a uniform polynomial degree; a per-element list is also accepted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SpatialMesh;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementSpec {
    Polygon(Vec<usize>),
    Polyhedron(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DegreeSpec {
    Uniform(usize),
    PerElement(Vec<usize>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub vertices: Vec<Vec<f64>>,
    pub elements: Vec<ElementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<DegreeSpec>,
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<SpatialMesh> {
        let dim = self.vertices.first().map(Vec::len).unwrap_or(0);
        if dim != 2 && dim != 3 {
            return Err(Error::MeshFile(format!(
                "vertices must have 2 or 3 coordinates, found {dim}"
            )));
        }
        if let Some(i) = self.vertices.iter().position(|v| v.len() != dim) {
            return Err(Error::MeshFile(format!(
                "vertex {i} has {} coordinates, expected {dim}",
                self.vertices[i].len()
            )));
        }
        if let Some(i) = self
            .vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::MeshFile(format!(
                "vertex {i} has a non-finite coordinate"
            )));
        }
        let mut mesh = if dim == 2 {
            let polys = self
                .elements
                .into_iter()
                .enumerate()
                .map(|(e, spec)| match spec {
                    ElementSpec::Polygon(p) => Ok(p),
                    ElementSpec::Polyhedron(_) => Err(Error::MeshFile(format!(
                        "element {e}: face lists are only valid in 3D meshes"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            SpatialMesh::from_polygons(self.vertices.iter().map(|v| [v[0], v[1]]).collect(), polys)?
        } else {
            let cells = self
                .elements
                .into_iter()
                .enumerate()
                .map(|(e, spec)| match spec {
                    ElementSpec::Polyhedron(f) => Ok(f),
                    ElementSpec::Polygon(_) => Err(Error::MeshFile(format!(
                        "element {e}: 3D elements must be given as face lists"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            SpatialMesh::from_boxes(
                self.vertices.iter().map(|v| [v[0], v[1], v[2]]).collect(),
                cells,
            )?
        };
        match self.degree {
            None => {}
            Some(DegreeSpec::Uniform(p)) => mesh.set_uniform_degree(p),
            Some(DegreeSpec::PerElement(ps)) => {
                if ps.len() != mesh.num_elements() {
                    return Err(Error::MeshFile(format!(
                        "degree list has {} entries for {} elements",
                        ps.len(),
                        mesh.num_elements()
                    )));
                }
                for (el, p) in mesh.elements.iter_mut().zip(ps) {
                    el.degree = p;
                }
            }
        }
        Ok(mesh)
    }
}

pub fn parse_mesh(text: &str) -> Result<SpatialMesh> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::MeshFile(e.to_string()))?;
    file.into_mesh()
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SpatialMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MeshFile(format!("{}: {e}", path.display())))?;
    parse_mesh(&text).map_err(|e| match e {
        Error::MeshFile(m) => Error::MeshFile(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_unit_square() {
        let m = parse_mesh(r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]], "elements": [[0,1,2,3]]}"#)
            .unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.faces().len(), 4);
        assert!(m.faces().iter().all(|f| f.is_boundary()));
        assert_eq!(m.elements()[0].degree, 0);
    }

    #[test]
    fn degree_lists() {
        let text = r#"{"vertices": [[0,0],[1,0],[1,1],[0,1],[2,0],[2,1]],
                       "elements": [[0,1,2,3],[1,4,5,2]], "degree": [1, 2]}"#;
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.elements()[1].degree, 2);
        let bad = text.replace("[1, 2]", "[1]");
        assert!(parse_mesh(&bad).is_err());
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(parse_mesh("{").is_err());
        assert!(parse_mesh(r#"{"vertices": [[0,0,0,0]], "elements": []}"#).is_err());
        assert!(parse_mesh(r#"{"vertices": [[0,0],[1,0],[1,1]], "elements": [[0,1,5]]}"#).is_err());
        assert!(parse_mesh(r#"{"vertices": [[0,0],[1,0],[2,0]], "elements": [[0,1,2]]}"#).is_err());
    }

    #[test]
    fn box_mesh_round_trip() {
        let text = r#"{"vertices": [[0,0,0],[1,0,0],[0,1,0],[1,1,0],[0,0,1],[1,0,1],[0,1,1],[1,1,1]],
            "elements": [[[0,4,6,2],[1,3,7,5],[0,1,5,4],[2,6,7,3],[0,2,3,1],[4,5,7,6]]]}"#;
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.faces().len(), 6);
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
    }
}
