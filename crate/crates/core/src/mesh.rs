//! Uniform Cartesian tessellations of axis-parallel box domains.
//!
//! The mesh is fully described by a handful of scalars (dimension, extents,
//! cell counts, boundary kind); cells and edges are addressed by arithmetic
//! rather than stored. Cell `idx` has grid coordinates
//! `(idx % nx, idx / nx)` and occupies the half-open box
//! `[i*w_a, (i+1)*w_a)` along each axis `a`. Every cell is isometric, so
//! the relative inverse length scale of an edge normal to axis `a` is
//! `tau = 1/w_a` for all edges alike.

use crate::error::{Error, Result};
use crate::Point;

/// Boundary handling of the box domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Opposite faces are identified; every edge is interior.
    Periodic,
    /// Impermeable walls; velocity fields must satisfy `u·nu = 0` there.
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// One face of a cell, identified by normal axis and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    /// Dense index in `0..2*dim`: low face before high face per axis.
    pub fn index(&self) -> usize {
        2 * self.axis + matches!(self.side, Side::High) as usize
    }

    pub fn from_index(i: usize) -> Face {
        Face {
            axis: i / 2,
            side: if i % 2 == 0 { Side::Low } else { Side::High },
        }
    }

    pub fn opposite(&self) -> Face {
        Face {
            axis: self.axis,
            side: match self.side {
                Side::Low => Side::High,
                Side::High => Side::Low,
            },
        }
    }

    /// Outward unit normal of this face.
    pub fn normal(&self) -> Point {
        let sign = match self.side {
            Side::Low => -1.0,
            Side::High => 1.0,
        };
        let mut n = [0.0, 0.0];
        n[self.axis] = sign;
        n
    }
}

/// An edge named from one of its cells. With periodic boundaries,
/// `EdgeId { cell, axis, side: High }` and the low face of the neighbor
/// denote the same physical edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeId {
    pub cell: usize,
    pub axis: usize,
    pub side: Side,
}

/// An interior edge in canonical orientation: the high face of `cell`
/// along `axis`, shared with `neighbor`.
#[derive(Debug, Clone, Copy)]
pub struct InteriorEdge {
    pub cell: usize,
    pub neighbor: usize,
    pub axis: usize,
}

#[derive(Debug, Clone)]
pub struct CartesianMesh {
    dim: usize,
    cells_per_axis: [usize; 2],
    widths: [f64; 2],
    extent: [f64; 2],
    boundary: Boundary,
    regularity: f64,
    h: f64,
    n_cells: usize,
}

/// Default mesh-regularity constant: cell widths must satisfy `h <= C*w_a`.
pub const DEFAULT_REGULARITY: f64 = 4.0;

impl CartesianMesh {
    /// Builds a mesh of `cells[a]` uniform cells per axis on the box
    /// `[0, extent[0]) x [0, extent[1])` (the second axis is ignored for
    /// `dim == 1`).
    pub fn build(
        dim: usize,
        extent: [f64; 2],
        cells: [usize; 2],
        boundary: Boundary,
    ) -> Result<CartesianMesh> {
        Self::build_with_regularity(dim, extent, cells, boundary, DEFAULT_REGULARITY)
    }

    pub fn build_with_regularity(
        dim: usize,
        extent: [f64; 2],
        cells: [usize; 2],
        boundary: Boundary,
        regularity: f64,
    ) -> Result<CartesianMesh> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let mut ext = [1.0, 1.0];
        let mut n = [1usize, 1];
        let mut w = [1.0, 1.0];
        for a in 0..dim {
            if !(extent[a] > 0.0) || !extent[a].is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "extent along axis {a} must be positive, got {}",
                    extent[a]
                )));
            }
            if cells[a] == 0 {
                return Err(Error::InvalidMesh(format!(
                    "cell count along axis {a} must be positive"
                )));
            }
            ext[a] = extent[a];
            n[a] = cells[a];
            w[a] = extent[a] / cells[a] as f64;
        }
        let h = match dim {
            1 => w[0],
            _ => (w[0] * w[0] + w[1] * w[1]).sqrt(),
        };
        for a in 0..dim {
            if h > regularity * w[a] {
                return Err(Error::InvalidMesh(format!(
                    "regularity violation: diameter {h:.6e} exceeds {regularity} * width {:.6e} on axis {a}",
                    w[a]
                )));
            }
        }
        Ok(CartesianMesh {
            dim,
            cells_per_axis: n,
            widths: w,
            extent: ext,
            boundary,
            regularity,
            h,
            n_cells: n[0] * n[1],
        })
    }

    /// 1-D mesh on `[0, extent)`.
    pub fn line(extent: f64, cells: usize, boundary: Boundary) -> Result<CartesianMesh> {
        Self::build(1, [extent, 1.0], [cells, 1], boundary)
    }

    /// The unit torus `[0,1)^2` with `n x n` cells.
    pub fn unit_torus(n: usize) -> Result<CartesianMesh> {
        Self::build(2, [1.0, 1.0], [n, n], Boundary::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cells_per_axis(&self) -> [usize; 2] {
        self.cells_per_axis
    }

    pub fn widths(&self) -> [f64; 2] {
        self.widths
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    /// Mesh size: the maximal cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Volume of one cell (all cells are isometric).
    pub fn cell_volume(&self) -> f64 {
        match self.dim {
            1 => self.widths[0],
            _ => self.widths[0] * self.widths[1],
        }
    }

    pub fn domain_volume(&self) -> f64 {
        self.cell_volume() * self.n_cells as f64
    }

    /// Area of a face normal to `axis` (1 in one dimension).
    pub fn face_area(&self, axis: usize) -> f64 {
        debug_assert!(axis < self.dim);
        match self.dim {
            1 => 1.0,
            _ => self.widths[1 - axis],
        }
    }

    /// Relative inverse length scale of any edge normal to `axis`:
    /// face area over cell volume, which reduces to `1/w_axis`.
    pub fn tau_axis(&self, axis: usize) -> f64 {
        self.face_area(axis) / self.cell_volume()
    }

    pub fn tau(&self, edge: &EdgeId) -> f64 {
        self.tau_axis(edge.axis)
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 2] {
        [idx % self.cells_per_axis[0], idx / self.cells_per_axis[0]]
    }

    pub fn cell_index(&self, coords: [usize; 2]) -> usize {
        coords[0] + self.cells_per_axis[0] * coords[1]
    }

    /// Lower-left corner of the cell box.
    pub fn cell_origin(&self, idx: usize) -> Point {
        let c = self.cell_coords(idx);
        [c[0] as f64 * self.widths[0], c[1] as f64 * self.widths[1]]
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let c = self.cell_coords(idx);
        [
            (c[0] as f64 + 0.5) * self.widths[0],
            if self.dim == 2 {
                (c[1] as f64 + 0.5) * self.widths[1]
            } else {
                0.0
            },
        ]
    }

    /// Neighbor across the given face, `None` over a no-flux wall.
    pub fn neighbor(&self, cell: usize, face: Face) -> Option<usize> {
        debug_assert!(face.axis < self.dim);
        let mut c = self.cell_coords(cell);
        let n = self.cells_per_axis[face.axis];
        match (face.side, self.boundary) {
            (Side::High, _) if c[face.axis] + 1 < n => c[face.axis] += 1,
            (Side::High, Boundary::Periodic) => c[face.axis] = 0,
            (Side::Low, _) if c[face.axis] > 0 => c[face.axis] -= 1,
            (Side::Low, Boundary::Periodic) => c[face.axis] = n - 1,
            _ => return None,
        }
        Some(self.cell_index(c))
    }

    /// All faces of a cell (2*dim entries), with their neighbors.
    pub fn faces_of(&self, cell: usize) -> Vec<(Face, Option<usize>)> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for axis in 0..self.dim {
            for side in [Side::Low, Side::High] {
                let f = Face { axis, side };
                out.push((f, self.neighbor(cell, f)));
            }
        }
        out
    }

    /// Resolves an edge to its canonical interior representation (owner of
    /// the high face, axis). Returns `None` for a no-flux boundary face.
    pub fn canonical_edge(&self, edge: EdgeId) -> Option<InteriorEdge> {
        match edge.side {
            Side::High => self
                .neighbor(edge.cell, Face { axis: edge.axis, side: Side::High })
                .map(|nb| InteriorEdge { cell: edge.cell, neighbor: nb, axis: edge.axis }),
            Side::Low => self
                .neighbor(edge.cell, Face { axis: edge.axis, side: Side::Low })
                .map(|nb| InteriorEdge { cell: nb, neighbor: edge.cell, axis: edge.axis }),
        }
    }

    /// Iterates over all physical interior edges, each exactly once, in
    /// canonical orientation (owner's high face).
    pub fn interior_edges(&self) -> impl Iterator<Item = InteriorEdge> + '_ {
        (0..self.dim).flat_map(move |axis| {
            (0..self.n_cells).filter_map(move |cell| {
                self.canonical_edge(EdgeId { cell, axis, side: Side::High })
            })
        })
    }

    /// Number of physical interior edges.
    pub fn n_interior_edges(&self) -> usize {
        let [nx, ny] = self.cells_per_axis;
        match (self.dim, self.boundary) {
            (1, Boundary::Periodic) => nx,
            (1, Boundary::NoFlux) => nx - 1,
            (_, Boundary::Periodic) => 2 * nx * ny,
            (_, Boundary::NoFlux) => (nx - 1) * ny + nx * (ny - 1),
        }
    }

    /// Wraps a point into the fundamental box (periodic meshes only).
    pub fn wrap(&self, x: Point) -> Point {
        let mut y = x;
        for a in 0..self.dim {
            let e = self.extent[a];
            y[a] -= e * (y[a] / e).floor();
            if y[a] >= e {
                // guard against round-up at the seam
                y[a] = 0.0;
            }
        }
        y
    }

    /// Index of the cell whose half-open box contains `x`. Points on an
    /// interior face belong to the higher cell; the closed top face of a
    /// no-flux domain maps into the last cell.
    pub fn locate_cell(&self, x: Point) -> Result<usize> {
        let p = match self.boundary {
            Boundary::Periodic => self.wrap(x),
            Boundary::NoFlux => {
                for a in 0..self.dim {
                    if x[a] < 0.0 || x[a] > self.extent[a] {
                        return Err(Error::OutsideDomain(x[0], x[1]));
                    }
                }
                x
            }
        };
        let mut coords = [0usize, 0];
        for a in 0..self.dim {
            let i = (p[a] / self.widths[a]).floor() as isize;
            coords[a] = (i.max(0) as usize).min(self.cells_per_axis[a] - 1);
        }
        Ok(self.cell_index(coords))
    }

    /// Surface-to-volume ratio of a cell. The regularity condition
    /// `h <= C * w_a` bounds it by `2 * dim * C / h`, uniformly in `h`.
    pub fn isoperimetric_ratio(&self) -> f64 {
        let surface: f64 = (0..self.dim).map(|a| 2.0 * self.face_area(a)).sum();
        surface / self.cell_volume()
    }
}
