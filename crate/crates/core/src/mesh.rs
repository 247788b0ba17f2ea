//! Six-node triangulations of channel domains.
//!
//! Nodes are stored vertices first, then one midpoint per edge. Every
//! triangle lists its nodes as `[v0, v1, v2, m01, m12, m20]` with the
//! vertices in counter-clockwise order. Elements are straight-sided, so a
//! midpoint node is the exact average of its edge end points.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::ChannelGeometry;

/// Relative tolerance used when matching inlet and outlet section nodes.
pub const PAIRING_TOL: f64 = 1e-12;

/// Local vertex pairs of the three triangle edges; edge `k` owns midpoint `3 + k`.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Inlet section `x = 0`.
    Gamma0,
    /// Outlet section `x = 1`.
    Gamma1,
    /// Walls.
    Gamma2,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Gamma0 => "GAMMA0",
            BoundaryTag::Gamma1 => "GAMMA1",
            BoundaryTag::Gamma2 => "GAMMA2",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub midpoint: usize,
    pub tag: BoundaryTag,
    /// Triangle owning the edge.
    pub element: usize,
    /// Local edge index within `element` (see [`LOCAL_EDGES`]).
    pub local_edge: usize,
}

/// A node on the inlet section and its partner on the outlet section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicPair {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    num_vertices: usize,
    triangles: Vec<[usize; 6]>,
    boundary_edges: Vec<BoundaryEdge>,
    node_tags: Vec<Option<BoundaryTag>>,
    periodic_pairs: Vec<PeriodicPair>,
    grid: Option<(usize, usize)>,
}

/// Extremal quality metrics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub triangles: usize,
    pub min_area: f64,
    pub max_area: f64,
    pub total_area: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    pub max_edge_length: f64,
    /// Largest `|y(left) - y(right)|` over the periodic pairs.
    pub pairing_residual: f64,
}

/// Builds the structured `nx x ny` mapped grid of `geom`, each cell split
/// into two triangles.
///
/// Grid columns are vertical, so both sections are meshed with the same
/// ordinates. Diagonals are mirrored about the channel axis, which keeps the
/// triangulation symmetric under `y -> -y` when `ny` is even.
pub fn build_channel_mesh(geom: &ChannelGeometry, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("need nx >= 1 and ny >= 1, got {nx} x {ny}")));
    }
    geom.check_width(nx.max(64))?;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let eta = j as f64 / ny as f64;
        for i in 0..=nx {
            let x = if i == nx { ChannelGeometry::LENGTH } else { i as f64 / nx as f64 };
            let (bottom, top) = if i == 0 || i == nx {
                (-1.0, 1.0)
            } else {
                (geom.bottom(x), geom.top(x))
            };
            let y = if j == 0 {
                bottom
            } else if j == ny {
                top
            } else {
                bottom + eta * (top - bottom)
            };
            vertices.push([x, y]);
        }
    }

    let v = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            if 2 * j < ny {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }

    let mut mesh = Mesh::from_triangles(vertices, &triangles)?;
    mesh.grid = Some((nx, ny));
    Ok(mesh)
}

impl Mesh {
    /// Builds a quadratic mesh from vertices and counter-clockwise vertex
    /// triples. Boundary edges on `x = 0` and `x = 1` are tagged as sections,
    /// every other boundary edge as wall.
    pub fn from_triangles(vertices: Vec<[f64; 2]>, triangles: &[[usize; 3]]) -> Result<Mesh> {
        let num_vertices = vertices.len();
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= num_vertices) {
                return Err(Error::Mesh(format!("triangle {k} references a missing vertex")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {k} has non-positive signed area {area:e}"
                )));
            }
        }

        let mut nodes = vertices;
        let mut edge_nodes: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_owners: Vec<(usize, usize, usize)> = Vec::new();
        let mut edge_count: Vec<u32> = Vec::new();
        let mut quad = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let mut element = [t[0], t[1], t[2], 0, 0, 0];
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (t[*a], t[*b]);
                let key = (p.min(q), p.max(q));
                let node = *edge_nodes.entry(key).or_insert_with(|| {
                    let (xp, xq) = (nodes[p], nodes[q]);
                    nodes.push([0.5 * (xp[0] + xq[0]), 0.5 * (xp[1] + xq[1])]);
                    edge_owners.push((k, e, 0));
                    edge_count.push(0);
                    nodes.len() - 1
                });
                edge_count[node - num_vertices] += 1;
                element[3 + e] = node;
            }
            quad.push(element);
        }

        let mut boundary_edges = Vec::new();
        for (slot, &count) in edge_count.iter().enumerate() {
            match count {
                1 => {
                    let (element, local_edge, _) = edge_owners[slot];
                    let [a, b] = LOCAL_EDGES[local_edge];
                    let t = quad[element];
                    let (pa, pb) = (nodes[t[a]], nodes[t[b]]);
                    let tag = if pa[0] == 0.0 && pb[0] == 0.0 {
                        BoundaryTag::Gamma0
                    } else if pa[0] == ChannelGeometry::LENGTH && pb[0] == ChannelGeometry::LENGTH {
                        BoundaryTag::Gamma1
                    } else {
                        BoundaryTag::Gamma2
                    };
                    boundary_edges.push(BoundaryEdge {
                        vertices: [t[a], t[b]],
                        midpoint: num_vertices + slot,
                        tag,
                        element,
                        local_edge,
                    });
                }
                2 => {}
                _ => {
                    return Err(Error::Mesh(format!(
                        "edge with midpoint node {} is shared by {count} triangles",
                        num_vertices + slot
                    )))
                }
            }
        }

        let mut node_tags = vec![None; nodes.len()];
        for edge in &boundary_edges {
            for n in [edge.vertices[0], edge.vertices[1], edge.midpoint] {
                let slot: &mut Option<BoundaryTag> = &mut node_tags[n];
                *slot = match *slot {
                    Some(BoundaryTag::Gamma2) => Some(BoundaryTag::Gamma2),
                    _ if edge.tag == BoundaryTag::Gamma2 => Some(BoundaryTag::Gamma2),
                    Some(existing) if existing != edge.tag => Some(BoundaryTag::Gamma2),
                    _ => Some(edge.tag),
                };
            }
        }

        let mut mesh = Mesh {
            nodes,
            num_vertices,
            triangles: quad,
            boundary_edges,
            node_tags,
            periodic_pairs: Vec::new(),
            grid: None,
        };
        mesh.periodic_pairs = mesh.pair_sections()?;
        Ok(mesh)
    }

    fn pair_sections(&self) -> Result<Vec<PeriodicPair>> {
        let left = self.section_nodes(BoundaryTag::Gamma0);
        let right = self.section_nodes(BoundaryTag::Gamma1);
        if left.is_empty() || right.is_empty() {
            return Ok(Vec::new());
        }
        if left.len() != right.len() {
            return Err(Error::Mesh(format!(
                "sections carry {} and {} nodes and cannot be paired",
                left.len(),
                right.len()
            )));
        }
        let (lo, hi) = left
            .iter()
            .map(|&n| self.nodes[n][1])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        let tol = PAIRING_TOL * (hi - lo);
        left.iter()
            .zip(&right)
            .map(|(&l, &r)| {
                let dy = (self.nodes[l][1] - self.nodes[r][1]).abs();
                if dy > tol {
                    Err(Error::Mesh(format!(
                        "section nodes {l} and {r} differ by {dy:e} in y"
                    )))
                } else {
                    Ok(PeriodicPair { left: l, right: r })
                }
            })
            .collect()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> [f64; 2] {
        self.nodes[n]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Vertices occupy node indices `0..num_vertices()`.
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn triangles(&self) -> &[[usize; 6]] {
        &self.triangles
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges_tagged(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Boundary tag of a node; corners shared by a wall and a section are walls.
    pub fn node_tag(&self, n: usize) -> Option<BoundaryTag> {
        self.node_tags[n]
    }

    pub fn periodic_pairs(&self) -> &[PeriodicPair] {
        &self.periodic_pairs
    }

    /// `(nx, ny)` for meshes produced by [`build_channel_mesh`].
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn vertex_coords(&self, element: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[element];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn area(&self, element: usize) -> f64 {
        let [a, b, c] = self.vertex_coords(element);
        signed_area(a, b, c)
    }

    /// All nodes lying on an inlet/outlet section (corners included), sorted by `y`.
    pub fn section_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .edges_tagged(tag)
            .flat_map(|e| [e.vertices[0], e.vertices[1], e.midpoint])
            .collect();
        nodes.sort_by(|&a, &b| self.nodes[a][1].total_cmp(&self.nodes[b][1]).then(a.cmp(&b)));
        nodes.dedup();
        nodes
    }

    /// Mesh size used in convergence tables: the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| LOCAL_EDGES.map(|[a, b]| dist(self.nodes[t[a]], self.nodes[t[b]])))
            .fold(0.0, f64::max)
    }

    pub fn quality_report(&self) -> QualityReport {
        mesh_quality_report(self)
    }
}

pub fn mesh_quality_report(mesh: &Mesh) -> QualityReport {
    let mut report = QualityReport {
        triangles: mesh.num_triangles(),
        min_area: f64::INFINITY,
        max_area: 0.0,
        total_area: 0.0,
        min_angle: 180.0,
        max_edge_length: 0.0,
        pairing_residual: 0.0,
    };
    for k in 0..mesh.num_triangles() {
        let p = mesh.vertex_coords(k);
        let area = signed_area(p[0], p[1], p[2]);
        report.min_area = report.min_area.min(area);
        report.max_area = report.max_area.max(area);
        report.total_area += area;
        for i in 0..3 {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
            let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(a, b) * dist(a, c));
            report.min_angle = report.min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            report.max_edge_length = report.max_edge_length.max(dist(a, b));
        }
    }
    report.pairing_residual = mesh
        .periodic_pairs
        .iter()
        .map(|p| (mesh.nodes[p.left][1] - mesh.nodes[p.right][1]).abs())
        .fold(0.0, f64::max);
    report
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}
