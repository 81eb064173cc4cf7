//! Conforming triangle meshes with time-dependent vertex positions.
//!
//! Connectivity (triangles, edges, neighbor relations, boundary tags) is
//! fixed at construction; only vertex positions change during a run.
//!
//! Local edge `k` of triangle `[v0, v1, v2]` runs from `v_k` to `v_{k+1}`.
//! In reference coordinates the vertices are `(0,0)`, `(1,0)`, `(0,1)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature::TriangleRule;

pub type Point = [f64; 2];

/// Reference-triangle vertices.
pub const REFERENCE_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Index into [`TriMesh::tag_names`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagId(pub usize);

/// One side of an edge as seen from a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeNeighbor {
    Cell(CellSide),
    Boundary(TagId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Oriented counterclockwise with respect to the left cell.
    pub vertices: [usize; 2],
    pub left: CellSide,
    pub right: EdgeNeighbor,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        matches!(self.right, EdgeNeighbor::Boundary(_))
    }

    pub fn boundary_tag(&self) -> Option<TagId> {
        match self.right {
            EdgeNeighbor::Boundary(t) => Some(t),
            EdgeNeighbor::Cell(_) => None,
        }
    }
}

/// Unstructured triangle mesh.
#[derive(Clone, Debug)]
pub struct TriMesh {
    positions: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    cell_edges: Vec<[usize; 3]>,
    cell_neighbors: Vec<[Option<usize>; 3]>,
    vertex_cells: Vec<Vec<usize>>,
    tag_names: Vec<String>,
    /// Tag of each vertex lying on the boundary (first tag encountered by edge order).
    vertex_tags: Vec<Option<TagId>>,
}

impl TriMesh {
    /// Builds connectivity from raw arrays.
    ///
    /// `boundary` assigns tags to boundary edges by vertex pair (either order);
    /// boundary edges not listed get the tag `"boundary"`.
    pub fn build(positions: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: &[([usize; 2], String)]) -> Result<Self> {
        build_connectivity(positions, triangles, boundary)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    /// Edge-adjacent cells (`None` across a boundary edge), by local edge.
    pub fn cell_neighbors(&self, cell: usize) -> [Option<usize>; 3] {
        self.cell_neighbors[cell]
    }

    pub fn vertex_cells(&self, vertex: usize) -> &[usize] {
        &self.vertex_cells[vertex]
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn tag_id(&self, name: &str) -> Option<TagId> {
        self.tag_names.iter().position(|t| t == name).map(TagId)
    }

    pub fn tag_name(&self, tag: TagId) -> &str {
        &self.tag_names[tag.0]
    }

    pub fn vertex_tag(&self, vertex: usize) -> Option<TagId> {
        self.vertex_tags[vertex]
    }

    pub fn is_boundary_vertex(&self, vertex: usize) -> bool {
        self.vertex_tags[vertex].is_some()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let t = self.triangles[cell];
        [self.positions[t[0]], self.positions[t[1]], self.positions[t[2]]]
    }

    pub fn reference_map(&self, cell: usize) -> ReferenceMap {
        ReferenceMap::new(cell, self.cell_vertices(cell))
    }

    pub fn area(&self, cell: usize) -> f64 {
        signed_area(&self.cell_vertices(cell))
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|c| self.area(c)).collect()
    }

    pub fn barycenter(&self, cell: usize) -> Point {
        let v = self.cell_vertices(cell);
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        self.areas().iter().sum()
    }

    /// Area enclosed by the boundary loops, by the shoelace formula.
    pub fn boundary_polygon_area(&self) -> f64 {
        self.boundary_edges()
            .map(|(_, e)| {
                let a = self.positions[e.vertices[0]];
                let b = self.positions[e.vertices[1]];
                0.5 * (a[0] * b[1] - b[0] * a[1])
            })
            .sum()
    }

    /// Largest circumscribed-circle diameter over all cells.
    pub fn grid_size(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| circumdiameter(&self.cell_vertices(c)))
            .fold(0.0, f64::max)
    }

    /// Inscribed-circle diameter `4|T| / perimeter`.
    pub fn incircle_diameter(&self, cell: usize) -> f64 {
        incircle_diameter(&self.cell_vertices(cell))
    }

    /// Replaces all vertex positions (same count), checking orientation.
    pub fn set_positions(&mut self, positions: Vec<Point>) -> Result<()> {
        if positions.len() != self.positions.len() {
            return Err(Error::Mesh(format!(
                "expected {} positions, got {}",
                self.positions.len(),
                positions.len()
            )));
        }
        check_areas(&positions, &self.triangles)?;
        self.positions = positions;
        Ok(())
    }

    /// Moves every vertex by `displacement[v]`; fails without modifying the
    /// mesh if any triangle would get a non-positive area.
    pub fn move_vertices(&mut self, displacement: &[Point]) -> Result<()> {
        if displacement.len() != self.positions.len() {
            return Err(Error::Mesh(format!(
                "expected {} displacements, got {}",
                self.positions.len(),
                displacement.len()
            )));
        }
        if displacement.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::Mesh("non-finite displacement".into()));
        }
        let moved: Vec<Point> = self
            .positions
            .iter()
            .zip(displacement)
            .map(|(p, d)| [p[0] + d[0], p[1] + d[1]])
            .collect();
        self.set_positions(moved)
    }

    /// Hash of the connectivity arrays; stable while topology is unchanged.
    pub fn connectivity_checksum(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.triangles.hash(&mut h);
        for e in &self.edges {
            e.vertices.hash(&mut h);
            e.left.cell.hash(&mut h);
            e.left.local.hash(&mut h);
            match e.right {
                EdgeNeighbor::Cell(s) => (0u8, s.cell, s.local).hash(&mut h),
                EdgeNeighbor::Boundary(t) => (1u8, t.0, 0usize).hash(&mut h),
            }
        }
        self.tag_names.hash(&mut h);
        h.finish()
    }

    /// ASCII mesh file: header `NV NT NB`, vertices, 1-based CCW triangles,
    /// then boundary edges `v1 v2 tag`.
    pub fn to_mesh_string(&self) -> String {
        let boundary: Vec<&Edge> = self.boundary_edges().map(|(_, e)| e).collect();
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.num_vertices(), self.num_cells(), boundary.len());
        for p in &self.positions {
            // `{:?}` prints the shortest representation that round-trips.
            let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        for e in boundary {
            let tag = e.boundary_tag().map(|t| self.tag_name(t)).unwrap_or("boundary");
            let _ = writeln!(s, "{} {} {}", e.vertices[0] + 1, e.vertices[1] + 1, tag);
        }
        s
    }

    pub fn write_mesh(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_mesh_string())?;
        Ok(())
    }
}

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceMap {
    pub cell: usize,
    pub vertices: [Point; 3],
    /// Columns `X2 - X1`, `X3 - X1`.
    jac: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    det: f64,
}

impl ReferenceMap {
    pub fn new(cell: usize, vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self {
            cell,
            vertices,
            jac,
            inv,
            det,
        }
    }

    /// `det J = 2 |T|`.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        self.jac
    }

    /// `d(xi, eta) / d(x, y)`.
    pub fn inverse_jacobian(&self) -> [[f64; 2]; 2] {
        self.inv
    }

    fn check(&self) -> Result<()> {
        if !(self.det > 0.0) || !self.det.is_finite() {
            return Err(Error::DegenerateCell {
                cell: self.cell,
                reason: format!("Jacobian determinant {:e}", self.det),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn to_physical(&self, xi: Point) -> Point {
        let a = self.vertices[0];
        [
            a[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            a[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    #[inline]
    pub fn to_reference_unchecked(&self, x: Point) -> Point {
        let a = self.vertices[0];
        let dx = x[0] - a[0];
        let dy = x[1] - a[1];
        [
            self.inv[0][0] * dx + self.inv[0][1] * dy,
            self.inv[1][0] * dx + self.inv[1][1] * dy,
        ]
    }

    pub fn reference_to_physical(&self, xi: Point) -> Result<Point> {
        self.check()?;
        Ok(self.to_physical(xi))
    }

    pub fn physical_to_reference(&self, x: Point) -> Result<Point> {
        self.check()?;
        Ok(self.to_reference_unchecked(x))
    }

    /// Mean of `field` over the triangle with the given rule.
    pub fn cell_average<F: Fn(Point) -> f64>(&self, field: F, rule: &TriangleRule) -> f64 {
        let s: f64 = rule.iter().map(|(p, w)| w * field(self.to_physical(p))).sum();
        2.0 * s
    }
}

/// Quadrature degree used for cell averages of degree-`m` data.
pub fn average_rule(m: usize) -> TriangleRule {
    TriangleRule::with_degree(2 * m + 2)
}

pub fn signed_area(v: &[Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

pub fn circumdiameter(v: &[Point; 3]) -> f64 {
    let a = dist(v[1], v[2]);
    let b = dist(v[0], v[2]);
    let c = dist(v[0], v[1]);
    a * b * c / (2.0 * signed_area(v).abs())
}

pub fn incircle_diameter(v: &[Point; 3]) -> f64 {
    let perim = dist(v[1], v[2]) + dist(v[0], v[2]) + dist(v[0], v[1]);
    4.0 * signed_area(v).abs() / perim
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn check_areas(positions: &[Point], triangles: &[[usize; 3]]) -> Result<()> {
    for (cell, t) in triangles.iter().enumerate() {
        let area = signed_area(&[positions[t[0]], positions[t[1]], positions[t[2]]]);
        if !(area > 0.0) {
            return Err(Error::TangledMesh { cell, area });
        }
    }
    Ok(())
}

/// Derives edges, neighbors and boundary tags from raw vertex/triangle arrays.
pub fn build_connectivity(
    positions: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: &[([usize; 2], String)],
) -> Result<TriMesh> {
    let nv = positions.len();
    for (cell, t) in triangles.iter().enumerate() {
        if t.iter().any(|&v| v >= nv) {
            return Err(Error::Mesh(format!(
                "triangle {cell} references a vertex outside 0..{nv}"
            )));
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::Mesh(format!("triangle {cell} repeats a vertex")));
        }
    }
    check_areas(&positions, &triangles)?;

    let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut cell_edges = vec![[usize::MAX; 3]; triangles.len()];
    let mut cell_neighbors = vec![[None; 3]; triangles.len()];
    for (cell, t) in triangles.iter().enumerate() {
        for local in 0..3 {
            let a = t[local];
            let b = t[(local + 1) % 3];
            let key = (a.min(b), a.max(b));
            let side = CellSide { cell, local };
            match by_pair.get(&key) {
                None => {
                    by_pair.insert(key, edges.len());
                    cell_edges[cell][local] = edges.len();
                    edges.push(Edge {
                        vertices: [a, b],
                        left: side,
                        right: EdgeNeighbor::Boundary(TagId(usize::MAX)),
                    });
                }
                Some(&id) => {
                    let e = &mut edges[id];
                    if !matches!(e.right, EdgeNeighbor::Boundary(TagId(usize::MAX))) {
                        return Err(Error::Mesh(format!(
                            "edge ({a}, {b}) is shared by more than two triangles"
                        )));
                    }
                    if e.vertices != [b, a] {
                        return Err(Error::Mesh(format!(
                            "edge ({a}, {b}) has inconsistent orientation in cells {} and {cell}",
                            e.left.cell
                        )));
                    }
                    e.right = EdgeNeighbor::Cell(side);
                    cell_edges[cell][local] = id;
                    cell_neighbors[cell][local] = Some(e.left.cell);
                    cell_neighbors[e.left.cell][e.left.local] = Some(cell);
                }
            }
        }
    }

    let mut tag_names: Vec<String> = Vec::new();
    let tag_lookup = |name: &str, tag_names: &mut Vec<String>| -> TagId {
        match tag_names.iter().position(|t| t == name) {
            Some(i) => TagId(i),
            None => {
                tag_names.push(name.to_string());
                TagId(tag_names.len() - 1)
            }
        }
    };
    for (pair, name) in boundary {
        let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let id = *by_pair.get(&key).ok_or_else(|| {
            Error::Mesh(format!(
                "boundary entry ({}, {}) is not an edge of the mesh",
                pair[0], pair[1]
            ))
        })?;
        if !edges[id].is_boundary() {
            return Err(Error::Mesh(format!(
                "boundary entry ({}, {}) is an interior edge",
                pair[0], pair[1]
            )));
        }
        let tag = tag_lookup(name, &mut tag_names);
        edges[id].right = EdgeNeighbor::Boundary(tag);
    }
    let mut vertex_tags = vec![None; nv];
    for e in edges.iter_mut() {
        if let EdgeNeighbor::Boundary(t) = e.right {
            let tag = if t.0 == usize::MAX {
                tag_lookup("boundary", &mut tag_names)
            } else {
                t
            };
            e.right = EdgeNeighbor::Boundary(tag);
            for v in e.vertices {
                vertex_tags[v].get_or_insert(tag);
            }
        }
    }

    let mut vertex_cells = vec![Vec::new(); nv];
    for (cell, t) in triangles.iter().enumerate() {
        for &v in t {
            vertex_cells[v].push(cell);
        }
    }

    Ok(TriMesh {
        positions,
        triangles,
        edges,
        cell_edges,
        cell_neighbors,
        vertex_cells,
        tag_names,
        vertex_tags,
    })
}

/// Parses the ASCII mesh format; `#` starts a comment.
pub fn parse_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let (hline, header) = lines
        .next()
        .ok_or_else(|| perr(1, "missing header `NV NT NB`".into()))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| perr(hline, format!("bad header `{header}`: {e}")))?;
    if counts.len() != 3 {
        return Err(perr(hline, format!("header must contain `NV NT NB`, found `{header}`")));
    }
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

    let mut positions = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(hline, format!("expected {nv} vertices, found {k}")))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(ln, format!("bad vertex `{l}`: {e}")))?;
        if v.len() != 2 {
            return Err(perr(ln, format!("vertex needs 2 coordinates: `{l}`")));
        }
        positions.push([v[0], v[1]]);
    }
    let one_based = |ln: usize, t: &str| -> Result<usize> {
        let i: usize = t.parse().map_err(|e| perr(ln, format!("bad index `{t}`: {e}")))?;
        if i == 0 || i > nv {
            return Err(perr(ln, format!("vertex index {i} outside 1..={nv}")));
        }
        Ok(i - 1)
    };
    let mut triangles = Vec::with_capacity(nt);
    for k in 0..nt {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(hline, format!("expected {nt} triangles, found {k}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(perr(ln, format!("triangle needs 3 vertex ids: `{l}`")));
        }
        triangles.push([
            one_based(ln, toks[0])?,
            one_based(ln, toks[1])?,
            one_based(ln, toks[2])?,
        ]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for k in 0..nb {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(hline, format!("expected {nb} boundary edges, found {k}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(perr(ln, format!("boundary edge needs `v1 v2 tag`: `{l}`")));
        }
        boundary.push(([one_based(ln, toks[0])?, one_based(ln, toks[1])?], toks[2].to_string()));
    }
    if let Some((ln, l)) = lines.next() {
        return Err(perr(ln, format!("unexpected trailing content `{l}`")));
    }
    build_connectivity(positions, triangles, &boundary)
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

/// Structured polar annulus; `n_r` radial intervals, `n_theta` angular ones.
/// Tags: `"inner"` on `r_i`, `"outer"` on `r_e`.
pub fn generate_annulus(r_i: f64, r_e: f64, n_r: usize, n_theta: usize) -> Result<TriMesh> {
    if !(r_i > 0.0 && r_e > r_i) {
        return Err(Error::Mesh(format!(
            "annulus radii must satisfy 0 < r_i < r_e (got {r_i}, {r_e})"
        )));
    }
    if n_r < 1 || n_theta < 3 {
        return Err(Error::Mesh(format!(
            "annulus needs n_r >= 1 and n_theta >= 3 (got {n_r}, {n_theta})"
        )));
    }
    let radii: Vec<f64> = (0..=n_r).map(|i| r_i + (r_e - r_i) * i as f64 / n_r as f64).collect();
    ring_mesh(&radii, n_theta, "inner", "outer")
}

fn ring_mesh(radii: &[f64], n_theta: usize, inner: &str, outer: &str) -> Result<TriMesh> {
    let n_r = radii.len() - 1;
    let mut positions = Vec::with_capacity((n_r + 1) * n_theta);
    for &r in radii {
        for j in 0..n_theta {
            let (s, c) = circle_point(j, n_theta);
            positions.push([r * c, r * s]);
        }
    }
    let id = |i: usize, j: usize| i * n_theta + (j % n_theta);
    let mut triangles = Vec::with_capacity(2 * n_r * n_theta);
    for i in 0..n_r {
        for j in 0..n_theta {
            let (a, b, c, d) = (id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j));
            // Increasing j with increasing i is clockwise.
            if (i + j) % 2 == 0 {
                triangles.push([a, c, b]);
                triangles.push([a, d, c]);
            } else {
                triangles.push([a, d, b]);
                triangles.push([b, d, c]);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        boundary.push(([id(0, j), id(0, j + 1)], inner.to_string()));
        boundary.push(([id(n_r, j), id(n_r, j + 1)], outer.to_string()));
    }
    build_connectivity(positions, triangles, &boundary)
}

/// `(sin, cos)` of `2 pi j / n`, exact at multiples of a quarter turn.
fn circle_point(j: usize, n: usize) -> (f64, f64) {
    let j = j % n;
    if (4 * j).is_multiple_of(n) {
        match 4 * j / n {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        (std::f64::consts::TAU * j as f64 / n as f64).sin_cos()
    }
}

/// Disk of radius `r` from `n` concentric rings with `6k` vertices on ring `k`
/// (nearly equilateral triangles, `6 n^2` cells). Tag: `"outer"`.
pub fn generate_disk(r: f64, n: usize) -> Result<TriMesh> {
    if !(r > 0.0) || n < 1 {
        return Err(Error::Mesh(format!("disk needs r > 0 and n >= 1 (got {r}, {n})")));
    }
    let mut positions = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=n {
        ring_start.push(positions.len());
        let rk = r * k as f64 / n as f64;
        let m = 6 * k;
        for j in 0..m {
            let (s, c) = circle_point(j, m);
            positions.push([rk * c, rk * s]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * n * n);
    // Ring 0 -> 1: fan around the center.
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=n {
        let (inner_n, outer_n) = (6 * (k - 1), 6 * k);
        let (is, os) = (ring_start[k - 1], ring_start[k]);
        // Merge the two angular sequences, always advancing the side whose
        // next vertex has the smaller angle.
        let (mut i, mut o) = (0usize, 0usize);
        while i < inner_n || o < outer_n {
            let next_inner = (i + 1) as f64 / inner_n as f64;
            let next_outer = (o + 1) as f64 / outer_n as f64;
            let vi = is + i % inner_n;
            let vo = os + o % outer_n;
            if o < outer_n && (i >= inner_n || next_outer <= next_inner) {
                triangles.push([vi, vo, os + (o + 1) % outer_n]);
                o += 1;
            } else {
                triangles.push([vi, vo, is + (i + 1) % inner_n]);
                i += 1;
            }
        }
    }
    let outer_n = 6 * n;
    let os = ring_start[n];
    let boundary: Vec<_> = (0..outer_n)
        .map(|j| ([os + j, os + (j + 1) % outer_n], "outer".to_string()))
        .collect();
    build_connectivity(positions, triangles, &boundary)
}

/// Structured rectangle with alternating diagonals; tags `"boundary"`.
pub fn generate_rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    if !(x1 > x0 && y1 > y0) || nx < 1 || ny < 1 {
        return Err(Error::Mesh("invalid rectangle".into()));
    }
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push([
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    build_connectivity(positions, triangles, &[])
}

/// Circle of radius `r_cyl` inside the square `[-half, half]^2`, meshed as a
/// structured O-grid blending the circle into the square with geometric
/// radial stretching. Tags: `"wall"` on the circle, `"farfield"` on the box.
/// `n_theta` must be a multiple of 8 so the box corners are vertices.
pub fn generate_cylinder_in_box(r_cyl: f64, half: f64, n_theta: usize, n_radial: usize) -> Result<TriMesh> {
    if !(r_cyl > 0.0 && half > r_cyl) || !n_theta.is_multiple_of(8) || n_theta == 0 || n_radial < 2 {
        return Err(Error::Mesh(format!(
            "cylinder-in-box needs 0 < r_cyl < half, n_theta multiple of 8, n_radial >= 2 \
             (got {r_cyl}, {half}, {n_theta}, {n_radial})"
        )));
    }
    // First radial spacing matches the tangential spacing at the wall.
    let first = std::f64::consts::TAU * r_cyl / n_theta as f64;
    let span = half - r_cyl;
    let ratio = stretching_ratio(first / span, n_radial);
    let mut blend = vec![0.0];
    let mut acc = 0.0;
    let mut step = first / span;
    for _ in 0..n_radial {
        acc += step;
        blend.push(acc);
        step *= ratio;
    }
    let last = *blend.last().unwrap();
    for b in blend.iter_mut() {
        *b /= last;
    }
    let mut positions = Vec::with_capacity((n_radial + 1) * n_theta);
    for &s in &blend {
        for j in 0..n_theta {
            let (sn, cs) = circle_point(j, n_theta);
            let circle = [r_cyl * cs, r_cyl * sn];
            let scale = half / cs.abs().max(sn.abs());
            let square = [scale * cs, scale * sn];
            positions.push([
                (1.0 - s) * circle[0] + s * square[0],
                (1.0 - s) * circle[1] + s * square[1],
            ]);
        }
    }
    // Snap box vertices to the exact box faces.
    for j in 0..n_theta {
        let p = &mut positions[n_radial * n_theta + j];
        for c in p.iter_mut() {
            if (c.abs() - half).abs() < 1e-12 * half {
                *c = half.copysign(*c);
            }
        }
    }
    let id = |i: usize, j: usize| i * n_theta + (j % n_theta);
    let mut triangles = Vec::with_capacity(2 * n_radial * n_theta);
    for i in 0..n_radial {
        for j in 0..n_theta {
            let (a, b, c, d) = (id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j));
            // Increasing j with increasing i is clockwise.
            if (i + j) % 2 == 0 {
                triangles.push([a, c, b]);
                triangles.push([a, d, c]);
            } else {
                triangles.push([a, d, b]);
                triangles.push([b, d, c]);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        boundary.push(([id(0, j), id(0, j + 1)], "wall".to_string()));
        boundary.push(([id(n_radial, j), id(n_radial, j + 1)], "farfield".to_string()));
    }
    build_connectivity(positions, triangles, &boundary)
}

/// Ratio `q` with `sum_{k<n} first q^k = 1`.
fn stretching_ratio(first: f64, n: usize) -> f64 {
    if first * n as f64 >= 1.0 {
        return 1.0;
    }
    let f = |q: f64| first * (q.powi(n as i32) - 1.0) / (q - 1.0) - 1.0;
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> TriMesh {
        TriMesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_connectivity() {
        let m = TriMesh::build(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &[]).unwrap();
        assert_eq!(m.num_edges(), 3);
        assert_eq!(m.boundary_edges().count(), 3);
    }

    #[test]
    fn two_triangles_share_one_edge() {
        let m = unit_square();
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.boundary_edges().count(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        let interior: Vec<_> = m.edges().iter().filter(|e| !e.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(m.cell_neighbors(0)[2], Some(1));
    }

    #[test]
    fn rejects_bad_input() {
        let cw = TriMesh::build(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]], &[]);
        assert!(matches!(cw, Err(Error::TangledMesh { cell: 0, .. })));
        let bad_index = TriMesh::build(vec![[0.0, 0.0]], vec![[0, 1, 2]], &[]);
        assert!(bad_index.is_err());
        // Three triangles on one edge.
        let fan = TriMesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, 2.0], [0.5, -1.0]],
            vec![[0, 1, 2], [0, 1, 3], [1, 0, 4]],
            &[],
        );
        assert!(fan.is_err());
    }

    #[test]
    fn reference_map_examples() {
        let v = [[1.0, 2.0], [4.0, 2.5], [0.5, 5.0]];
        let map = ReferenceMap::new(0, v);
        assert_eq!(map.reference_to_physical([0.0, 0.0]).unwrap(), v[0]);
        assert_eq!(map.reference_to_physical([1.0, 0.0]).unwrap(), v[1]);
        let c = map.reference_to_physical([1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((c[0] - (1.0 + 4.0 + 0.5) / 3.0).abs() < 1e-14);
        assert!((c[1] - (2.0 + 2.5 + 5.0) / 3.0).abs() < 1e-14);
        for xi in [[0.2, 0.3], [-1.0, 2.0], [0.7, 0.1]] {
            let back = map.physical_to_reference(map.to_physical(xi)).unwrap();
            assert!((back[0] - xi[0]).abs() < 1e-13 && (back[1] - xi[1]).abs() < 1e-13);
        }
        assert!((map.det() - 2.0 * signed_area(&v)).abs() < 1e-14);
        let flat = ReferenceMap::new(3, [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(flat.physical_to_reference([0.5, 0.5]).is_err());
    }

    #[test]
    fn cell_average_examples() {
        let map = ReferenceMap::new(0, REFERENCE_VERTICES);
        let rule = TriangleRule::with_degree(4);
        assert!((map.cell_average(|_| 3.5, &rule) - 3.5).abs() < 1e-14);
        assert!((map.cell_average(|p| p[0], &rule) - 1.0 / 3.0).abs() < 1e-14);
        // 2 * int_T x^2 = 2 * (2! / 4!) = 1/6.
        assert!((map.cell_average(|p| p[0] * p[0], &rule) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn annulus_boundary_on_circles() {
        let m = generate_annulus(0.9, 1.0, 2, 8).unwrap();
        let inner = m.tag_id("inner").unwrap();
        let outer = m.tag_id("outer").unwrap();
        for (_, e) in m.boundary_edges() {
            let r_expected = if e.boundary_tag() == Some(inner) { 0.9 } else { 1.0 };
            assert!(e.boundary_tag() == Some(inner) || e.boundary_tag() == Some(outer));
            for v in e.vertices {
                let p = m.positions()[v];
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - r_expected).abs() < 1e-14);
            }
        }
        assert_eq!(m.num_cells(), 2 * 2 * 8);
        assert!(generate_annulus(1.0, 0.9, 2, 8).is_err());
    }

    #[test]
    fn annulus_area_converges_like_polygon() {
        let (ri, re) = (0.9f64, 1.0f64);
        let exact = std::f64::consts::PI * (re * re - ri * ri);
        for n_theta in [16, 64, 256] {
            let m = generate_annulus(ri, re, 3, n_theta).unwrap();
            let dtheta = std::f64::consts::TAU / n_theta as f64;
            let defect = (exact - m.total_area()).abs() / exact;
            assert!(defect <= dtheta * dtheta / 6.0, "n_theta={n_theta}: {defect}");
        }
    }

    #[test]
    fn disk_generator() {
        for n in [1, 3, 6] {
            let m = generate_disk(1.0, n).unwrap();
            assert_eq!(m.num_cells(), 6 * n * n);
            for (_, e) in m.boundary_edges() {
                for v in e.vertices {
                    let p = m.positions()[v];
                    assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-14);
                }
            }
            assert!((m.total_area() - m.boundary_polygon_area()).abs() < 1e-12);
        }
        let h6 = generate_disk(1.0, 6).unwrap().grid_size();
        let h12 = generate_disk(1.0, 12).unwrap().grid_size();
        assert!(h12 < h6);
    }

    #[test]
    fn cylinder_box_generator() {
        let m = generate_cylinder_in_box(1.0, 10.0, 64, 14).unwrap();
        assert_eq!(m.num_cells(), 2 * 64 * 14);
        let wall = m.tag_id("wall").unwrap();
        for (_, e) in m.boundary_edges() {
            for v in e.vertices {
                let p = m.positions()[v];
                if e.boundary_tag() == Some(wall) {
                    assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-14);
                } else {
                    assert!((p[0].abs().max(p[1].abs()) - 10.0).abs() < 1e-12);
                }
            }
        }
        let exact = 400.0 - std::f64::consts::PI;
        assert!((m.total_area() - m.boundary_polygon_area()).abs() < 1e-9);
        assert!((m.total_area() - exact).abs() / exact < 1e-2);
    }

    #[test]
    fn mesh_file_round_trip_is_bit_exact() {
        let m = generate_annulus(0.9, 1.0, 2, 12).unwrap();
        let text = m.to_mesh_string();
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back.positions(), m.positions());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.tag_names().len(), 2);
        assert_eq!(back.connectivity_checksum(), m.connectivity_checksum());
    }

    #[test]
    fn mesh_file_errors() {
        assert!(matches!(parse_mesh("# only a comment\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_mesh("0.0 0.0\n"), Err(Error::Parse { .. })));
        let truncated = "4 2 0\n0 0\n1 0\n1 1\n";
        match parse_mesh(truncated) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("vertices")),
            other => panic!("unexpected {other:?}"),
        }
        let bad_vertex = "3 1 0\n0 0\n1 x\n0 1\n1 2 3\n";
        assert!(matches!(parse_mesh(bad_vertex), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn shipped_unit_square_fixture() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/unit_square.mesh");
        let m = read_mesh(path).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn move_vertices_examples() {
        let mut m = generate_disk(1.0, 3).unwrap();
        let before = m.clone();
        m.move_vertices(&vec![[0.0, 0.0]; m.num_vertices()]).unwrap();
        assert_eq!(m.positions(), before.positions());

        m.move_vertices(&vec![[0.3, -0.7]; m.num_vertices()]).unwrap();
        for c in 0..m.num_cells() {
            assert!((m.area(c) - before.area(c)).abs() < 1e-14);
        }
        assert!((m.total_area() - m.boundary_polygon_area()).abs() < 1e-12);

        let t = m.triangles()[4];
        let mut disp = vec![[0.0, 0.0]; m.num_vertices()];
        let (a, b) = (m.positions()[t[0]], m.positions()[t[1]]);
        disp[t[2]] = [
            0.5 * (a[0] + b[0]) - m.positions()[t[2]][0],
            0.5 * (a[1] + b[1]) - m.positions()[t[2]][1],
        ];
        let snapshot = m.positions().to_vec();
        assert!(matches!(m.move_vertices(&disp), Err(Error::TangledMesh { .. })));
        assert_eq!(m.positions(), &snapshot[..]);
        assert_eq!(m.connectivity_checksum(), before.connectivity_checksum());
    }
}
