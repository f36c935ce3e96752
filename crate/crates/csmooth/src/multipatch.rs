//! Planar bilinear multi-patch domains: geometry, topology extraction and
//! canonical reference frames for edges and vertices.

use serde::Deserialize;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Tolerance for matching corners and edges.
pub const MATCH_TOL: f64 = 1e-9;
/// Minimum admissible |det JF|.
pub const REG_EPS: f64 = 1e-10;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parameter values of the corners c00, c10, c01, c11.
pub const CORNER_PARAMS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];

/// Corners bounding each side: 0: xi1=0, 1: xi1=1, 2: xi2=0, 3: xi2=1.
pub const SIDE_CORNERS: [[usize; 2]; 4] = [[0, 2], [1, 3], [0, 1], [2, 3]];

/// Bilinear patch F(xi) = c00 + A xi1 + B xi2 + C xi1 xi2.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearPatch {
    pub corners: [Point; 4],
}

impl BilinearPatch {
    /// Validated patch; rejects maps whose Jacobian determinant changes
    /// sign or comes closer to zero than `REG_EPS`.
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        let patch = BilinearPatch { corners };
        patch.check_regular()?;
        Ok(patch)
    }

    fn check_regular(&self) -> Result<()> {
        for i in 0..4 {
            for j in i + 1..4 {
                if dist(self.corners[i], self.corners[j]) <= MATCH_TOL {
                    return Err(Error::Geometry(format!("corners {i} and {j} coincide")));
                }
            }
        }
        let mut samples: Vec<[f64; 2]> = CORNER_PARAMS.to_vec();
        for a in 0..20 {
            for b in 0..20 {
                samples.push([(a as f64 + 0.5) / 20.0, (b as f64 + 0.5) / 20.0]);
            }
        }
        let first = self.det_jacobian(samples[0]);
        for xi in samples {
            let d = self.det_jacobian(xi);
            if d.abs() < REG_EPS || d.signum() != first.signum() {
                return Err(Error::Geometry(format!(
                    "patch is not regular: det J = {d:.3e} at ({:.3}, {:.3})",
                    xi[0], xi[1]
                )));
            }
        }
        Ok(())
    }

    /// Vectors (A, B, C) of the bilinear form.
    pub fn abc(&self) -> (Point, Point, Point) {
        let [c00, c10, c01, c11] = self.corners;
        let a = sub(c10, c00);
        let b = sub(c01, c00);
        let c = [c11[0] - c10[0] - c01[0] + c00[0], c11[1] - c10[1] - c01[1] + c00[1]];
        (a, b, c)
    }

    pub fn eval(&self, xi: [f64; 2]) -> Point {
        let (a, b, c) = self.abc();
        let c00 = self.corners[0];
        let w = xi[0] * xi[1];
        [
            c00[0] + a[0] * xi[0] + b[0] * xi[1] + c[0] * w,
            c00[1] + a[1] * xi[0] + b[1] * xi[1] + c[1] * w,
        ]
    }

    /// Jacobian with entries `J[row][col] = d x_row / d xi_col`.
    pub fn jacobian(&self, xi: [f64; 2]) -> [[f64; 2]; 2] {
        let (a, b, c) = self.abc();
        [
            [a[0] + c[0] * xi[1], b[0] + c[0] * xi[0]],
            [a[1] + c[1] * xi[1], b[1] + c[1] * xi[0]],
        ]
    }

    pub fn det_jacobian(&self, xi: [f64; 2]) -> f64 {
        let j = self.jacobian(xi);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Coefficients (c0, c1, c2) with det JF = c0 + c1 xi1 + c2 xi2.
    pub fn det_coeffs(&self) -> [f64; 3] {
        let (a, b, c) = self.abc();
        [cross(a, b), cross(a, c), cross(c, b)]
    }

    /// Inverse map by Newton iteration, run until the update stalls at
    /// machine precision.
    pub fn invert(&self, x: Point) -> Result<[f64; 2]> {
        let mut xi = [0.5, 0.5];
        let mut converged = 0;
        for _ in 0..60 {
            let res = sub(self.eval(xi), x);
            let j = self.jacobian(xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let d0 = (j[1][1] * res[0] - j[0][1] * res[1]) / det;
            let d1 = (-j[1][0] * res[0] + j[0][0] * res[1]) / det;
            xi = [xi[0] - d0, xi[1] - d1];
            if !xi[0].is_finite() || !xi[1].is_finite() {
                break;
            }
            if d0.abs().max(d1.abs()) <= 1e-15 {
                converged += 1;
                if converged == 2 {
                    break;
                }
            }
        }
        let scale = dist(self.corners[0], self.corners[3]).max(1.0);
        if xi[0].is_finite() && xi[1].is_finite() && dist(self.eval(xi), x) <= 1e-11 * scale {
            return self.check_inside(xi);
        }
        Err(Error::Geometry(format!(
            "inversion did not converge for point ({}, {})",
            x[0], x[1]
        )))
    }

    fn check_inside(&self, xi: [f64; 2]) -> Result<[f64; 2]> {
        let ok = |t: f64| (-1e-9..=1.0 + 1e-9).contains(&t);
        if ok(xi[0]) && ok(xi[1]) {
            Ok([xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)])
        } else {
            Err(Error::Geometry(format!(
                "point maps to ({:.6}, {:.6}) outside the parameter domain",
                xi[0], xi[1]
            )))
        }
    }

    /// The patch F composed with a square symmetry: G(u) = F(S(u)).
    pub fn reparam(&self, sym: Sym) -> BilinearPatch {
        let corners = CORNER_PARAMS.map(|u| self.eval(sym.apply(u)));
        BilinearPatch { corners }
    }

    /// Corner index (0..4) located at the given parameter corner.
    pub fn corner_at(u: [f64; 2]) -> usize {
        (u[0] > 0.5) as usize + 2 * (u[1] > 0.5) as usize
    }

    pub fn area(&self) -> f64 {
        let [c0, c1, c2] = self.det_coeffs();
        (c0 + 0.5 * c1 + 0.5 * c2).abs()
    }
}

/// One of the eight symmetries of the unit square, mapping reference
/// parameters u to native parameters xi: optional swap of u1/u2 followed
/// by optional flips xi_k -> 1 - xi_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sym {
    pub swap: bool,
    pub flip1: bool,
    pub flip2: bool,
}

impl Sym {
    pub const IDENTITY: Sym = Sym { swap: false, flip1: false, flip2: false };

    pub fn all() -> impl Iterator<Item = Sym> {
        (0..8).map(|b| Sym { swap: b & 1 != 0, flip1: b & 2 != 0, flip2: b & 4 != 0 })
    }

    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        let x = if self.swap { [u[1], u[0]] } else { u };
        [
            if self.flip1 { 1.0 - x[0] } else { x[0] },
            if self.flip2 { 1.0 - x[1] } else { x[1] },
        ]
    }

    /// Native tensor index of reference index (a, b) for n functions per
    /// direction.
    pub fn native_index(&self, n: usize, a: usize, b: usize) -> (usize, usize) {
        let x = if self.swap { (b, a) } else { (a, b) };
        (
            if self.flip1 { n - 1 - x.0 } else { x.0 },
            if self.flip2 { n - 1 - x.1 } else { x.1 },
        )
    }

    /// Sign picked up by a reference derivative of order (l1, l2).
    pub fn derivative_sign(&self, l1: usize, l2: usize) -> f64 {
        let (d1, d2) = if self.swap { (l2, l1) } else { (l1, l2) };
        let mut s = 1.0;
        if self.flip1 && d1 % 2 == 1 {
            s = -s;
        }
        if self.flip2 && d2 % 2 == 1 {
            s = -s;
        }
        s
    }

    /// Reorders a native n x n coefficient matrix (row-major, first index
    /// along xi1) into the reference frame.
    pub fn to_reference(&self, n: usize, native: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let (i, j) = self.native_index(n, a, b);
                out[a * n + b] = native[i * n + j];
            }
        }
        out
    }

    /// Inverse of `to_reference`.
    pub fn to_native(&self, n: usize, reference: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let (i, j) = self.native_index(n, a, b);
                out[i * n + j] = reference[a * n + b];
            }
        }
        out
    }
}

/// A validated multi-patch domain.
#[derive(Debug, Clone)]
pub struct MultiPatchDomain {
    pub patches: Vec<BilinearPatch>,
}

#[derive(Debug, Deserialize)]
struct GeometryDoc {
    patches: Vec<PatchDoc>,
}

#[derive(Debug, Deserialize)]
struct PatchDoc {
    corners: Vec<[f64; 2]>,
}

impl MultiPatchDomain {
    pub fn new(patches: Vec<BilinearPatch>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Geometry("domain has no patches".into()));
        }
        for i in 0..patches.len() {
            for j in i + 1..patches.len() {
                let same = (0..4).all(|c| {
                    (0..4).any(|d| dist(patches[i].corners[c], patches[j].corners[d]) <= MATCH_TOL)
                });
                if same {
                    return Err(Error::Geometry(format!("patches {i} and {j} are duplicates")));
                }
            }
        }
        Ok(MultiPatchDomain { patches })
    }

    /// Parses a geometry document of the form
    /// `[[patches]] corners = [[x,y], [x,y], [x,y], [x,y]]` with corners in
    /// the order c00, c10, c01, c11.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: GeometryDoc =
            toml::from_str(text).map_err(|e| Error::Parse(format!("geometry document: {e}")))?;
        let mut patches = Vec::with_capacity(doc.patches.len());
        for (i, p) in doc.patches.into_iter().enumerate() {
            let corners: [Point; 4] = p.corners.try_into().map_err(|v: Vec<_>| {
                Error::Parse(format!("patch {i}: expected 4 corners, got {}", v.len()))
            })?;
            patches.push(
                BilinearPatch::new(corners)
                    .map_err(|e| Error::Geometry(format!("patch {i}: {e}")))?,
            );
        }
        Self::new(patches)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Geometry(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        for p in &self.patches {
            s.push_str("[[patches]]\ncorners = [");
            let c: Vec<String> = p.corners.iter().map(|c| format!("[{:?}, {:?}]", c[0], c[1])).collect();
            s.push_str(&c.join(", "));
            s.push_str("]\n\n");
        }
        s
    }

    pub fn area(&self) -> f64 {
        self.patches.iter().map(|p| p.area()).sum()
    }

    /// Diameter of the bounding box.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point> = self.patches.iter().flat_map(|p| p.corners).collect();
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for q in pts {
            for k in 0..2 {
                lo[k] = lo[k].min(q[k]);
                hi[k] = hi[k].max(q[k]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Patch index and parameter of a physical point, preferring the lowest
    /// patch index when the point lies on an interface.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 2])> {
        self.patches
            .iter()
            .enumerate()
            .find_map(|(i, p)| p.invert(x).ok().map(|xi| (i, xi)))
    }
}

/// Edge of the patch layout; `sides` holds (patch, side) pairs, one for a
/// boundary edge and two for an inner edge, sorted by patch index.
#[derive(Debug, Clone)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub sides: Vec<(usize, usize)>,
}

impl Edge {
    pub fn is_inner(&self) -> bool {
        self.sides.len() == 2
    }
}

/// Vertex of the patch layout with its cyclic fan.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: Point,
    pub boundary: bool,
    /// Incident (patch, corner) pairs in counterclockwise fan order.
    pub patches: Vec<(usize, usize)>,
    /// Edges around the vertex: `edges[rho]` precedes patch rho and
    /// `edges[rho+1]` follows it. Inner vertices have v entries (cyclic),
    /// boundary vertices v+1 entries starting and ending with boundary
    /// edges.
    pub edges: Vec<usize>,
}

impl Vertex {
    pub fn valency(&self) -> usize {
        self.patches.len()
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub num_patches: usize,
    pub edges: Vec<Edge>,
    pub vertices: Vec<Vertex>,
    /// For each patch and corner: vertex id.
    pub corner_vertex: Vec<[usize; 4]>,
    /// For each patch and side: edge id.
    pub side_edge: Vec<[usize; 4]>,
}

impl Topology {
    pub fn extract(domain: &MultiPatchDomain) -> Result<Self> {
        let np = domain.patches.len();
        let mut points: Vec<Point> = Vec::new();
        let mut corner_vertex = vec![[0usize; 4]; np];
        for (i, p) in domain.patches.iter().enumerate() {
            for c in 0..4 {
                let q = p.corners[c];
                let id = match points.iter().position(|&v| dist(v, q) <= MATCH_TOL) {
                    Some(id) => id,
                    None => {
                        points.push(q);
                        points.len() - 1
                    }
                };
                corner_vertex[i][c] = id;
            }
        }
        let mut edges: Vec<Edge> = Vec::new();
        let mut side_edge = vec![[0usize; 4]; np];
        for i in 0..np {
            for (side, sc) in SIDE_CORNERS.iter().enumerate() {
                let (a, b) = (corner_vertex[i][sc[0]], corner_vertex[i][sc[1]]);
                let key = [a.min(b), a.max(b)];
                let id = match edges.iter().position(|e| e.vertices == key) {
                    Some(id) => {
                        edges[id].sides.push((i, side));
                        if edges[id].sides.len() > 2 {
                            return Err(Error::Topology(format!(
                                "edge between vertices {} and {} borders more than two patches",
                                key[0], key[1]
                            )));
                        }
                        if edges[id].sides[0].0 == i {
                            return Err(Error::Topology(format!("patch {i} is glued to itself")));
                        }
                        id
                    }
                    None => {
                        edges.push(Edge { vertices: key, sides: vec![(i, side)] });
                        edges.len() - 1
                    }
                };
                side_edge[i][side] = id;
            }
        }
        // T-junctions: a vertex strictly inside some edge segment.
        for e in &edges {
            let (a, b) = (points[e.vertices[0]], points[e.vertices[1]]);
            let len = dist(a, b);
            for (vid, &q) in points.iter().enumerate() {
                if e.vertices.contains(&vid) {
                    continue;
                }
                let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
                if t > 0.0 && t < 1.0 {
                    let foot = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    if dist(foot, q) <= MATCH_TOL {
                        return Err(Error::Topology(format!(
                            "T-junction: vertex {vid} lies inside edge {}-{}",
                            e.vertices[0], e.vertices[1]
                        )));
                    }
                }
            }
        }
        let mut vertices = Vec::with_capacity(points.len());
        for (vid, &point) in points.iter().enumerate() {
            vertices.push(build_fan(vid, point, domain, &corner_vertex, &side_edge, &edges)?);
        }
        Ok(Topology { num_patches: np, edges, vertices, corner_vertex, side_edge })
    }

    pub fn inner_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_inner())
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].is_inner())
    }

    pub fn inner_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| !self.vertices[v].boundary)
    }

    /// Reference frame of an inner edge: both patches reparameterized so that
    /// the edge is xi1 = 0 and xi2 runs from `start` to the other endpoint.
    /// The first patch is the lower patch index.
    pub fn edge_frame(&self, domain: &MultiPatchDomain, edge: usize, start: usize) -> EdgeFrame {
        let e = &self.edges[edge];
        assert!(e.is_inner(), "edge {edge} is not an inner edge");
        assert!(e.vertices.contains(&start));
        let end = if e.vertices[0] == start { e.vertices[1] } else { e.vertices[0] };
        let syms: Vec<Sym> = e
            .sides
            .iter()
            .map(|&(pi, _)| self.side_sym(pi, start, end))
            .collect();
        let (i0, i1) = (e.sides[0].0, e.sides[1].0);
        EdgeFrame {
            edge,
            start,
            patches: [i0, i1],
            syms: [syms[0], syms[1]],
            geometry: [
                domain.patches[i0].reparam(syms[0]),
                domain.patches[i1].reparam(syms[1]),
            ],
        }
    }

    /// Canonical frame of an inner edge, starting at its lower vertex id.
    pub fn canonical_edge_frame(&self, domain: &MultiPatchDomain, edge: usize) -> EdgeFrame {
        self.edge_frame(domain, edge, self.edges[edge].vertices[0])
    }

    /// Symmetry putting reference (0,0) at vertex `start` and (0,1) at the
    /// neighbouring vertex `end` of patch `pi`.
    pub fn side_sym(&self, pi: usize, start: usize, end: usize) -> Sym {
        let cv = self.corner_vertex[pi];
        Sym::all()
            .find(|s| {
                cv[BilinearPatch::corner_at(s.apply([0.0, 0.0]))] == start
                    && cv[BilinearPatch::corner_at(s.apply([0.0, 1.0]))] == end
            })
            .expect("vertices are not adjacent corners of the patch")
    }

    /// The other endpoint of an edge.
    pub fn other_end(&self, edge: usize, v: usize) -> usize {
        let e = &self.edges[edge];
        if e.vertices[0] == v {
            e.vertices[1]
        } else {
            e.vertices[0]
        }
    }
}

fn build_fan(
    vid: usize,
    point: Point,
    domain: &MultiPatchDomain,
    corner_vertex: &[[usize; 4]],
    side_edge: &[[usize; 4]],
    edges: &[Edge],
) -> Result<Vertex> {
    // For every incident patch: (patch, corner, incoming edge, outgoing
    // edge) with the patch sector running counterclockwise from incoming to
    // outgoing.
    let mut items = Vec::new();
    for (pi, cv) in corner_vertex.iter().enumerate() {
        for c in 0..4 {
            if cv[c] != vid {
                continue;
            }
            let sides: Vec<usize> = (0..4).filter(|&s| SIDE_CORNERS[s].contains(&c)).collect();
            let dir = |s: usize| {
                let other = if SIDE_CORNERS[s][0] == c { SIDE_CORNERS[s][1] } else { SIDE_CORNERS[s][0] };
                sub(domain.patches[pi].corners[other], point)
            };
            let (sa, sb) = (sides[0], sides[1]);
            let (inc, out) = if cross(dir(sa), dir(sb)) > 0.0 { (sa, sb) } else { (sb, sa) };
            items.push((pi, c, side_edge[pi][inc], side_edge[pi][out]));
        }
    }
    let boundary = items.iter().any(|&(_, _, a, b)| !edges[a].is_inner() || !edges[b].is_inner());
    let start = if boundary {
        items
            .iter()
            .position(|&(_, _, inc, _)| !edges[inc].is_inner())
            .ok_or_else(|| Error::Topology(format!("vertex {vid}: inconsistent boundary fan")))?
    } else {
        0
    };
    let mut patches = vec![(items[start].0, items[start].1)];
    let mut fan_edges = vec![items[start].2];
    let mut cur = start;
    loop {
        let out = items[cur].3;
        fan_edges.push(out);
        if !edges[out].is_inner() {
            break;
        }
        let next = items
            .iter()
            .position(|&(pi, _, inc, _)| inc == out && pi != items[cur].0)
            .ok_or_else(|| Error::Topology(format!("vertex {vid}: fan orientation mismatch")))?;
        if next == start {
            fan_edges.pop();
            break;
        }
        if patches.len() >= items.len() {
            return Err(Error::Topology(format!("vertex {vid}: fan does not close")));
        }
        patches.push((items[next].0, items[next].1));
        cur = next;
    }
    if patches.len() != items.len() {
        return Err(Error::Topology(format!(
            "vertex {vid}: fan reaches {} of {} incident patches",
            patches.len(),
            items.len()
        )));
    }
    Ok(Vertex { point, boundary, patches, edges: fan_edges })
}

/// Two patches of an inner edge reparameterized to the reference setting:
/// the edge is xi1 = 0 in both, xi2 = 0 at vertex `start`.
#[derive(Debug, Clone)]
pub struct EdgeFrame {
    pub edge: usize,
    pub start: usize,
    pub patches: [usize; 2],
    pub syms: [Sym; 2],
    pub geometry: [BilinearPatch; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fan() -> MultiPatchDomain {
        MultiPatchDomain::from_toml_str(include_str!("../examples/three_patch_fan.cfg")).unwrap()
    }

    fn skewed() -> BilinearPatch {
        BilinearPatch::new([[0.0, 0.0], [1.2, 0.1], [0.2, 0.9], [1.5, 1.3]]).unwrap()
    }

    #[test]
    fn bilinear_map_and_jacobian() {
        let f = skewed();
        for (u, c) in CORNER_PARAMS.iter().zip(f.corners) {
            assert!(dist(f.eval(*u), c) < 1e-14);
        }
        let [c0, c1, c2] = f.det_coeffs();
        let h = 1e-6;
        for xi in [[0.2, 0.7], [0.9, 0.1], [0.5, 0.5]] {
            assert!((f.det_jacobian(xi) - (c0 + c1 * xi[0] + c2 * xi[1])).abs() < 1e-13);
            let j = f.jacobian(xi);
            for col in 0..2 {
                let mut a = xi;
                let mut b = xi;
                a[col] += h;
                b[col] -= h;
                for row in 0..2 {
                    let fd = (f.eval(a)[row] - f.eval(b)[row]) / (2.0 * h);
                    assert!((j[row][col] - fd).abs() < 1e-8);
                }
            }
        }
        // Exact area of the quadrilateral by the shoelace formula.
        let q = [f.corners[0], f.corners[1], f.corners[3], f.corners[2]];
        let shoelace: f64 = (0..4).map(|i| cross(q[i], q[(i + 1) % 4])).sum::<f64>() / 2.0;
        assert!((f.area() - shoelace.abs()).abs() < 1e-14);
    }

    #[test]
    fn inversion_round_trip() {
        let f = skewed();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let xi = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let back = f.invert(f.eval(xi)).unwrap();
            assert!((back[0] - xi[0]).abs() < 1e-10 && (back[1] - xi[1]).abs() < 1e-10);
        }
        assert!(f.invert([5.0, 5.0]).is_err());
    }

    #[test]
    fn rejects_degenerate_patches() {
        let bowtie = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(matches!(BilinearPatch::new(bowtie), Err(Error::Geometry(_))));
        let collapsed = [[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert!(matches!(BilinearPatch::new(collapsed), Err(Error::Geometry(_))));
        let doc = "[[patches]]\ncorners = [[0,0],[1,0],[0,1]]\n";
        assert!(matches!(MultiPatchDomain::from_toml_str(doc), Err(Error::Parse(_))));
        assert!(matches!(MultiPatchDomain::from_toml_str("patches = 3"), Err(Error::Parse(_))));
        let dup = "[[patches]]\ncorners = [[0,0],[1,0],[0,1],[1,1]]\n[[patches]]\ncorners = [[1,1],[0,1],[1,0],[0,0]]\n";
        assert!(matches!(MultiPatchDomain::from_toml_str(dup), Err(Error::Geometry(_))));
        assert!(matches!(MultiPatchDomain::load("/nonexistent.cfg"), Err(Error::Geometry(_))));
    }

    #[test]
    fn toml_round_trip() {
        let d = fan();
        let again = MultiPatchDomain::from_toml_str(&d.to_toml_string()).unwrap();
        for (a, b) in d.patches.iter().zip(&again.patches) {
            assert_eq!(a.corners, b.corners);
        }
        let (i, xi) = d.locate(d.patches[2].eval([0.3, 0.6])).unwrap();
        assert_eq!(i, 2);
        assert!((xi[0] - 0.3).abs() < 1e-10 && (xi[1] - 0.6).abs() < 1e-10);
    }

    #[test]
    fn symmetries() {
        let n = 4;
        let native: Vec<f64> = (0..n * n).map(|v| v as f64).collect();
        for s in Sym::all() {
            assert_eq!(s.to_native(n, &s.to_reference(n, &native)), native);
            let f = skewed();
            let g = f.reparam(s);
            for u in [[0.2, 0.3], [0.7, 0.9]] {
                let (a, b) = (g.eval(u), f.eval(s.apply(u)));
                assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
            }
        }
        let flip = Sym { swap: true, flip1: true, flip2: false };
        assert_eq!(flip.derivative_sign(0, 1), -1.0);
        assert_eq!(flip.derivative_sign(1, 0), 1.0);
        assert_eq!(flip.native_index(5, 0, 1), (3, 0));
    }

    #[test]
    fn topology_of_bundled_layouts() {
        let d = fan();
        let t = Topology::extract(&d).unwrap();
        assert_eq!((t.edges.len(), t.inner_edges().count(), t.vertices.len()), (9, 3, 7));
        let inner: Vec<usize> = t.inner_vertices().collect();
        assert_eq!(inner.len(), 1);
        let v = &t.vertices[inner[0]];
        assert_eq!((v.valency(), v.edges.len()), (3, 3));

        let two = MultiPatchDomain::from_toml_str(include_str!("../examples/two_patch.cfg")).unwrap();
        let t2 = Topology::extract(&two).unwrap();
        assert_eq!((t2.edges.len(), t2.inner_edges().count(), t2.vertices.len()), (7, 1, 6));
        assert!(t2.vertices.iter().all(|v| v.boundary && v.valency() <= 2));

        let bfan = MultiPatchDomain::from_toml_str(include_str!("../examples/boundary_fan.cfg")).unwrap();
        let tb = Topology::extract(&bfan).unwrap();
        let hub = tb.vertices.iter().find(|v| v.valency() == 3).unwrap();
        assert!(hub.boundary);
        assert_eq!(hub.edges.len(), 4);

        let star = MultiPatchDomain::from_toml_str(include_str!("../examples/star5.cfg")).unwrap();
        let ts = Topology::extract(&star).unwrap();
        assert_eq!(ts.inner_vertices().map(|v| ts.vertices[v].valency()).collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn edge_frames_share_the_interface() {
        let d = fan();
        let t = Topology::extract(&d).unwrap();
        for e in t.inner_edges() {
            for &start in &t.edges[e].vertices {
                let fr = t.edge_frame(&d, e, start);
                for q in 0..=10 {
                    let x = q as f64 / 10.0;
                    let (a, b) = (fr.geometry[0].eval([0.0, x]), fr.geometry[1].eval([0.0, x]));
                    assert!(dist(a, b) < 1e-12);
                }
                assert!(dist(fr.geometry[0].eval([0.0, 0.0]), t.vertices[start].point) < 1e-12);
                // The two patches lie on opposite sides of the interface.
                let d0 = fr.geometry[0].det_jacobian([0.0, 0.5]);
                let d1 = fr.geometry[1].det_jacobian([0.0, 0.5]);
                assert!(d0 * d1 < 0.0);
            }
        }
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let doc = "
[[patches]]
corners = [[0,0],[1,0],[0,1],[1,1]]
[[patches]]
corners = [[0,0],[-1,0],[0,1],[-1,1]]
[[patches]]
corners = [[0,0],[0.5,-1],[0,1],[0.6,-0.8]]
";
        match MultiPatchDomain::from_toml_str(doc) {
            Ok(d) => assert!(matches!(Topology::extract(&d), Err(Error::Topology(_)))),
            Err(e) => assert!(matches!(e, Error::Geometry(_))),
        }
    }
}
