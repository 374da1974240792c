//! Structured mesh generators.

use super::SpatialMesh;
use crate::error::{Error, Result};

impl SpatialMesh {
    /// `nx` by `ny` rectangles on `[x0, y0, x1, y1]`; element index `i + nx * j`.
    pub fn structured_quads(nx: usize, ny: usize, bbox: [f64; 4]) -> Result<Self> {
        let [x0, y0, x1, y1] = bbox;
        if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::InvalidArgument(format!(
                "structured quad grid needs nx, ny >= 1 and a non-empty box, got {nx}x{ny} on {bbox:?}"
            )));
        }
        let vid = |i: usize, j: usize| i + (nx + 1) * j;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    x0 + (x1 - x0) * i as f64 / nx as f64,
                    y0 + (y1 - y0) * j as f64 / ny as f64,
                ]);
            }
        }
        let mut polys = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                polys.push(vec![
                    vid(i, j),
                    vid(i + 1, j),
                    vid(i + 1, j + 1),
                    vid(i, j + 1),
                ]);
            }
        }
        Self::from_polygons(vertices, polys)
    }

    /// `nx * ny * nz` boxes on `[x0, y0, z0, x1, y1, z1]`; element index
    /// `i + nx * (j + ny * k)`.
    pub fn structured_boxes(nx: usize, ny: usize, nz: usize, bbox: [f64; 6]) -> Result<Self> {
        let [x0, y0, z0, x1, y1, z1] = bbox;
        if nx == 0 || ny == 0 || nz == 0 || !(x1 > x0) || !(y1 > y0) || !(z1 > z0) {
            return Err(Error::InvalidArgument(format!(
                "structured box grid needs nx, ny, nz >= 1 and a non-empty box, got {nx}x{ny}x{nz} on {bbox:?}"
            )));
        }
        let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push([
                        x0 + (x1 - x0) * i as f64 / nx as f64,
                        y0 + (y1 - y0) * j as f64 / ny as f64,
                        z0 + (z1 - z0) * k as f64 / nz as f64,
                    ]);
                }
            }
        }
        let mut cells = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let c = |a: usize, b: usize, d: usize| vid(i + a, j + b, k + d);
                    cells.push(vec![
                        vec![c(0, 0, 0), c(0, 0, 1), c(0, 1, 1), c(0, 1, 0)],
                        vec![c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1)],
                        vec![c(0, 0, 0), c(1, 0, 0), c(1, 0, 1), c(0, 0, 1)],
                        vec![c(0, 1, 0), c(0, 1, 1), c(1, 1, 1), c(1, 1, 0)],
                        vec![c(0, 0, 0), c(0, 1, 0), c(1, 1, 0), c(1, 0, 0)],
                        vec![c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)],
                    ]);
                }
            }
        }
        Self::from_boxes(vertices, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_grids() {
        assert!(SpatialMesh::structured_quads(0, 2, [0., 0., 1., 1.]).is_err());
        assert!(SpatialMesh::structured_quads(2, 2, [0., 0., 0., 1.]).is_err());
        assert!(SpatialMesh::structured_boxes(1, 1, 0, [0., 0., 0., 1., 1., 1.]).is_err());
    }

    #[test]
    fn quad_element_ordering() {
        let m = SpatialMesh::structured_quads(4, 3, [0., 0., 4., 3.]).unwrap();
        let c = m.element_metrics(1 + 4 * 2).centroid;
        assert!((c[0] - 1.5).abs() < 1e-14 && (c[1] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn box_element_ordering() {
        let m = SpatialMesh::structured_boxes(2, 2, 2, [0., 0., 0., 2., 2., 2.]).unwrap();
        let (i, j, k) = (1, 0, 1);
        let c = m.element_metrics(i + 2 * (j + 2 * k)).centroid;
        assert_eq!(c, [1.5, 0.5, 1.5]);
    }
}
