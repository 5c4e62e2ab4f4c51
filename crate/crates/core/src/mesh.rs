//! Conforming triangulations of an axis-aligned rectangle.
//!
//! Local conventions (counterclockwise triangle `[v0, v1, v2]`):
//!
//! - local edge `i` is opposite vertex `i` and is traversed from
//!   `v[(i + 1) % 3]` to `v[(i + 2) % 3]`;
//! - each global edge stores its vertices in increasing index order and a
//!   unit normal obtained by rotating `v1 - v0` clockwise;
//! - the per-element sign is `+1` when the local traversal agrees with the
//!   global one, which is exactly when the element's outward normal equals
//!   the stored normal.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Top,
    Bottom,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Top,
        BoundaryTag::Bottom,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Vertex indices, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Global unit normal, clockwise rotation of the tangent `v1 - v0`.
    pub normal: Point,
    pub length: f64,
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub boundary: Option<BoundaryTag>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub inv_jacobian: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [v0, v1, v2] = vertices;
        let j = [
            [v1[0] - v0[0], v2[0] - v0[0]],
            [v1[1] - v0[1], v2[1] - v0[1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        ElementGeometry {
            vertices,
            jacobian: j,
            det,
            inv_jacobian: inv,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn map(&self, xi: Point) -> Point {
        let v0 = self.vertices[0];
        let j = &self.jacobian;
        [
            v0[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            v0[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn inverse_map(&self, x: Point) -> Point {
        let d = [x[0] - self.vertices[0][0], x[1] - self.vertices[0][1]];
        let g = &self.inv_jacobian;
        [
            g[0][0] * d[0] + g[0][1] * d[1],
            g[1][0] * d[0] + g[1][1] * d[1],
        ]
    }

    /// Contravariant Piola transform of a reference vector.
    #[inline]
    pub fn piola(&self, v: Point) -> Point {
        let j = &self.jacobian;
        [
            (j[0][0] * v[0] + j[0][1] * v[1]) / self.det,
            (j[1][0] * v[0] + j[1][1] * v[1]) / self.det,
        ]
    }

    /// Maps a reference gradient to a physical one (`J^{-T} g`).
    #[inline]
    pub fn push_gradient(&self, g: Point) -> Point {
        let a = &self.inv_jacobian;
        [
            a[0][0] * g[0] + a[1][0] * g[1],
            a[0][1] * g[0] + a[1][1] * g[1],
        ]
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Outward unit normal and length of local edge `i`.
    pub fn edge_normal(&self, i: usize) -> (Point, f64) {
        let a = self.vertices[(i + 1) % 3];
        let b = self.vertices[(i + 2) % 3];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = libm::hypot(t[0], t[1]);
        ([t[1] / len, -t[0] / len], len)
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    element_edges: Vec<[usize; 3]>,
    element_signs: Vec<[f64; 3]>,
    rect: Rect,
    nx: usize,
    ny: usize,
    h: f64,
}

impl Mesh {
    /// Splits `rect` into `nx * ny` cells, each cut into two triangles by the
    /// diagonal from its lower-left to its upper-right corner.
    pub fn build_uniform(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("cell counts must be at least 1"));
        }
        let finite = [rect.x0, rect.y0, rect.x1, rect.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
            return Err(Error::InvalidMesh(
                "rectangle must satisfy x1 > x0 and y1 > y0",
            ));
        }

        let coord = |lo: f64, hi: f64, i: usize, n: usize| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (n as f64)
            }
        };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    coord(rect.x0, rect.x1, i, nx),
                    coord(rect.y0, rect.y1, j, ny),
                ]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::from_triangles(vertices, triangles, rect, nx, ny)
    }

    fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        rect: Rect,
        nx: usize,
        ny: usize,
    ) -> Result<Mesh> {
        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut element_edges = Vec::with_capacity(triangles.len());
        let mut element_signs = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            let mut ids = [0usize; 3];
            let mut signs = [0.0; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = match lookup.get(&key) {
                    Some(&id) => {
                        let edge = &mut edges[id];
                        if edge.neighbor.is_some() {
                            return Err(Error::InvalidMesh(
                                "edge shared by more than two elements",
                            ));
                        }
                        edge.neighbor = Some(t);
                        id
                    }
                    None => {
                        let p = vertices[key.0];
                        let q = vertices[key.1];
                        let tx = q[0] - p[0];
                        let ty = q[1] - p[1];
                        let length = libm::hypot(tx, ty);
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            normal: [ty / length, -tx / length],
                            length,
                            owner: t,
                            neighbor: None,
                            boundary: None,
                        });
                        lookup.insert(key, edges.len() - 1);
                        edges.len() - 1
                    }
                };
                ids[i] = id;
                signs[i] = if a == key.0 { 1.0 } else { -1.0 };
            }
            element_edges.push(ids);
            element_signs.push(signs);
        }

        let tol = 1e-12 * rect.width().max(rect.height());
        for edge in edges.iter_mut().filter(|e| e.neighbor.is_none()) {
            let p = vertices[edge.vertices[0]];
            let q = vertices[edge.vertices[1]];
            let on = |a: f64, b: f64, v: f64| (a - v).abs() <= tol && (b - v).abs() <= tol;
            edge.boundary = Some(if on(p[0], q[0], rect.x0) {
                BoundaryTag::Left
            } else if on(p[0], q[0], rect.x1) {
                BoundaryTag::Right
            } else if on(p[1], q[1], rect.y0) {
                BoundaryTag::Bottom
            } else if on(p[1], q[1], rect.y1) {
                BoundaryTag::Top
            } else {
                return Err(Error::InvalidMesh("boundary edge off the rectangle"));
            });
        }

        let h = edges.iter().map(|e| e.length).fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            element_edges,
            element_signs,
            rect,
            nx,
            ny,
            h,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn cells(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Largest edge diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn element_edges(&self, element: usize) -> [usize; 3] {
        self.element_edges[element]
    }

    /// `+1.0` where the element's outward normal equals the edge normal.
    pub fn element_signs(&self, element: usize) -> [f64; 3] {
        self.element_signs[element]
    }

    pub fn geometry(&self, element: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[element];
        ElementGeometry::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn edge(&self, e: usize) -> Result<&Edge> {
        self.edges.get(e).ok_or(Error::IndexOutOfRange {
            what: "edge",
            index: e,
            len: self.edges.len(),
        })
    }

    /// Midpoint, length and global unit normal of edge `e`.
    pub fn edge_geometry(&self, e: usize) -> Result<(Point, f64, Point)> {
        let edge = self.edge(e)?;
        let p = self.vertices[edge.vertices[0]];
        let q = self.vertices[edge.vertices[1]];
        Ok((
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
            edge.length,
            edge.normal,
        ))
    }

    /// Point on edge `e` at parameter `s` in `[0, 1]`, measured from the
    /// lower-index vertex.
    pub fn edge_point(&self, e: usize, s: f64) -> Point {
        let edge = &self.edges[e];
        let p = self.vertices[edge.vertices[0]];
        let q = self.vertices[edge.vertices[1]];
        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
    }

    /// Index of the element across local edge `i`, if any.
    pub fn neighbor_across(&self, element: usize, i: usize) -> Option<usize> {
        let edge = &self.edges[self.element_edges[element][i]];
        if edge.owner == element {
            edge.neighbor
        } else {
            Some(edge.owner)
        }
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.neighbor.is_some()).count()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.len() - self.n_interior_edges()
    }

    /// Elements whose closed triangle contains `x`, in increasing index order.
    pub fn elements_containing(&self, x: Point) -> Vec<usize> {
        let tol = 1e-10;
        (0..self.n_elements())
            .filter(|&t| {
                let g = self.geometry(t);
                let xi = g.inverse_map(x);
                xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol
            })
            .collect()
    }
}
