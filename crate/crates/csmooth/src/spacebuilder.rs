//! Construction of the C^s-smooth space W^s as a direct sum of patch, edge
//! and vertex subspaces.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::bspline::{binom, factorial, PiecewisePoly, SplineSpace1D};
use crate::error::{Error, Result};
use crate::gluing::GluingData;
use crate::linalg::{self, Dense, Kernel};
use crate::multipatch::{EdgeFrame, MultiPatchDomain, Sym, Topology};

/// Relative singular-value cutoff for vertex kernels.
pub const KERNEL_TOL: f64 = 1e-10;

/// Degree, regularity, smoothness and number of inner knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub k: usize,
}

impl Params {
    /// Validates p >= 2s+1 and s <= r <= p-s-1 with s >= 1.
    pub fn new(p: usize, r: usize, s: usize, k: usize) -> Result<Self> {
        if s < 1 {
            return Err(Error::Parameter(format!("smoothness must be >= 1, got {s}")));
        }
        if p < 2 * s + 1 {
            return Err(Error::Parameter(format!("degree p={p} must satisfy p >= 2s+1 = {}", 2 * s + 1)));
        }
        if r < s || r + s + 1 > p {
            return Err(Error::Parameter(format!(
                "regularity r={r} must satisfy s <= r <= p-s-1 ({s} <= r <= {})",
                p - s - 1
            )));
        }
        Ok(Params { p, r, s, k })
    }

    /// Parameters at refinement level L, i.e. h = 2^-L.
    pub fn at_level(p: usize, r: usize, s: usize, level: u32) -> Result<Self> {
        Params::new(p, r, s, (1usize << level) - 1)
    }

    pub fn n(&self) -> usize {
        self.p + 1 + self.k * (self.p - self.r)
    }

    /// dim S_h^{p-j1, r+s-j1}.
    pub fn n_j1(&self, j1: usize) -> usize {
        self.p + 1 - j1 + self.k * (self.p - self.r - self.s)
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.k + 1) as f64
    }

    /// True when h exceeds the refinability bound (p-r-s)/(3s-r+1).
    pub fn is_coarse(&self) -> bool {
        let num = (self.p - self.r - self.s) as f64;
        let den = 3.0 * self.s as f64 - self.r as f64 + 1.0;
        den > 0.0 && self.h() > num / den
    }
}

/// Vertex-space strategy for inner vertices and boundary vertices of
/// valency at least three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Nullspace,
    Interpolation,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nullspace" => Ok(Strategy::Nullspace),
            "interp" | "interpolation" => Ok(Strategy::Interpolation),
            other => Err(Error::Parameter(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Nullspace => "nullspace",
            Strategy::Interpolation => "interp",
        })
    }
}

/// The transversal profile functions M_i = sum_{j=i}^{s} lambda_{i,j} N_j.
#[derive(Debug, Clone)]
pub struct MFunctions {
    /// lambda[i][j], zero for j < i.
    pub lambda: Vec<Vec<f64>>,
}

impl MFunctions {
    pub fn new(params: &Params) -> Self {
        let (p, s, h) = (params.p, params.s, params.h());
        let lambda = (0..=s)
            .map(|i| {
                let den: f64 = (0..i).map(|rho| (p - rho) as f64).product();
                (0..=s)
                    .map(|j| if j < i { 0.0 } else { binom(j, i) * h.powi(i as i32) / den })
                    .collect()
            })
            .collect();
        MFunctions { lambda }
    }
}

/// Dense sub-block of native coefficients of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCoeffs {
    pub patch: usize,
    pub i0: usize,
    pub j0: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl PatchCoeffs {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.i0 && i < self.i0 + self.rows && j >= self.j0 && j < self.j0 + self.cols {
            self.data[(i - self.i0) * self.cols + (j - self.j0)]
        } else {
            0.0
        }
    }

    /// Nonzero entries as (i, j, value) in native indices.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(q, &v)| {
            (self.i0 + q / self.cols, self.j0 + q % self.cols, v)
        })
    }

    /// Builds the tight bounding block of a sparse entry map.
    pub fn from_entries(patch: usize, entries: &BTreeMap<(usize, usize), f64>) -> Option<Self> {
        let nz: Vec<_> = entries.iter().filter(|(_, v)| **v != 0.0).collect();
        if nz.is_empty() {
            return None;
        }
        let i0 = nz.iter().map(|((i, _), _)| *i).min().unwrap();
        let i1 = nz.iter().map(|((i, _), _)| *i).max().unwrap();
        let j0 = nz.iter().map(|((_, j), _)| *j).min().unwrap();
        let j1 = nz.iter().map(|((_, j), _)| *j).max().unwrap();
        let (rows, cols) = (i1 - i0 + 1, j1 - j0 + 1);
        let mut data = vec![0.0; rows * cols];
        for ((i, j), v) in nz {
            data[(i - i0) * cols + (j - j0)] = *v;
        }
        Some(PatchCoeffs { patch, i0, j0, rows, cols, data })
    }
}

/// Origin of a basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Interior B-spline of a patch (native indices).
    Patch { patch: usize, j1: usize, j2: usize },
    /// B-spline along a boundary edge: j1 transversal, j2 along the edge
    /// from its lower vertex.
    BoundaryEdge { edge: usize, j1: usize, j2: usize },
    /// Glued function across an inner edge in its canonical frame.
    InnerEdge { edge: usize, j1: usize, j2: usize },
    /// Kernel vector of a vertex system.
    VertexKernel { vertex: usize, index: usize },
    /// Interpolation-strategy vertex function.
    VertexInterp { vertex: usize, j1: usize, j2: usize },
    /// Glued edge function kept by a boundary vertex of valency two.
    VertexGlued { vertex: usize, edge: usize, j1: usize, j2: usize },
    /// B-spline kept by a boundary vertex (native indices).
    VertexRaw { vertex: usize, patch: usize, j1: usize, j2: usize },
    /// Function of the two-patch construction or an external import.
    Other { label: String },
}

impl Provenance {
    pub fn kind(&self) -> SubspaceKind {
        match self {
            Provenance::Patch { .. } => SubspaceKind::Patch,
            Provenance::BoundaryEdge { .. } | Provenance::InnerEdge { .. } => SubspaceKind::Edge,
            Provenance::Other { .. } => SubspaceKind::Other,
            _ => SubspaceKind::Vertex,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Patch { patch, j1, j2 } => write!(f, "patch {patch} {j1} {j2}"),
            Provenance::BoundaryEdge { edge, j1, j2 } => write!(f, "bedge {edge} {j1} {j2}"),
            Provenance::InnerEdge { edge, j1, j2 } => write!(f, "iedge {edge} {j1} {j2}"),
            Provenance::VertexKernel { vertex, index } => write!(f, "vkernel {vertex} {index}"),
            Provenance::VertexInterp { vertex, j1, j2 } => write!(f, "vinterp {vertex} {j1} {j2}"),
            Provenance::VertexGlued { vertex, edge, j1, j2 } => {
                write!(f, "vglued {vertex} {edge} {j1} {j2}")
            }
            Provenance::VertexRaw { vertex, patch, j1, j2 } => {
                write!(f, "vraw {vertex} {patch} {j1} {j2}")
            }
            Provenance::Other { label } => write!(f, "other {label}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let kind = it.next().ok_or_else(|| Error::Parse("empty provenance".into()))?;
        if kind == "other" {
            return Ok(Provenance::Other { label: it.collect::<Vec<_>>().join(" ") });
        }
        let nums: Vec<usize> = it
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad provenance field '{t}'"))))
            .collect::<Result<_>>()?;
        let need = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("provenance '{s}' expects {k} fields")))
            }
        };
        Ok(match kind {
            "patch" => {
                need(3)?;
                Provenance::Patch { patch: nums[0], j1: nums[1], j2: nums[2] }
            }
            "bedge" => {
                need(3)?;
                Provenance::BoundaryEdge { edge: nums[0], j1: nums[1], j2: nums[2] }
            }
            "iedge" => {
                need(3)?;
                Provenance::InnerEdge { edge: nums[0], j1: nums[1], j2: nums[2] }
            }
            "vkernel" => {
                need(2)?;
                Provenance::VertexKernel { vertex: nums[0], index: nums[1] }
            }
            "vinterp" => {
                need(3)?;
                Provenance::VertexInterp { vertex: nums[0], j1: nums[1], j2: nums[2] }
            }
            "vglued" => {
                need(4)?;
                Provenance::VertexGlued { vertex: nums[0], edge: nums[1], j1: nums[2], j2: nums[3] }
            }
            "vraw" => {
                need(4)?;
                Provenance::VertexRaw { vertex: nums[0], patch: nums[1], j1: nums[2], j2: nums[3] }
            }
            other => return Err(Error::Parse(format!("unknown provenance kind '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubspaceKind {
    Patch,
    Edge,
    Vertex,
    Other,
}

/// Isogeometric function given by per-patch spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoFunction {
    pub parts: Vec<PatchCoeffs>,
    pub tag: Provenance,
}

impl IsoFunction {
    pub fn part(&self, patch: usize) -> Option<&PatchCoeffs> {
        self.parts.iter().find(|p| p.patch == patch)
    }

    pub fn coeff(&self, patch: usize, i: usize, j: usize) -> f64 {
        self.part(patch).map_or(0.0, |p| p.get(i, j))
    }

    /// Builds a function from sparse native entries keyed by (patch, i, j).
    pub fn from_entries(entries: &BTreeMap<(usize, usize, usize), f64>, tag: Provenance) -> Self {
        let mut per: BTreeMap<usize, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for (&(p, i, j), &v) in entries {
            per.entry(p).or_default().insert((i, j), v);
        }
        let parts = per
            .iter()
            .filter_map(|(&p, m)| PatchCoeffs::from_entries(p, m))
            .collect();
        IsoFunction { parts, tag }
    }

    /// Sparse native entries.
    pub fn entries(&self) -> BTreeMap<(usize, usize, usize), f64> {
        let mut m = BTreeMap::new();
        for part in &self.parts {
            for (i, j, v) in part.nonzeros() {
                m.insert((part.patch, i, j), v);
            }
        }
        m
    }

    /// Value of the derivative d1, d2 (native parameters) on a patch.
    pub fn eval_patch(&self, space: &SplineSpace1D, patch: usize, xi: [f64; 2], d1: usize, d2: usize) -> f64 {
        let Some(part) = self.part(patch) else { return 0.0 };
        eval_part(space, part, xi, d1, d2)
    }

    /// Derivative in the reference parameters u of the patch composed with
    /// `sym`, at reference point u.
    pub fn eval_reference(
        &self,
        space: &SplineSpace1D,
        patch: usize,
        sym: Sym,
        u: [f64; 2],
        l1: usize,
        l2: usize,
    ) -> f64 {
        let (d1, d2) = if sym.swap { (l2, l1) } else { (l1, l2) };
        sym.derivative_sign(l1, l2) * self.eval_patch(space, patch, sym.apply(u), d1, d2)
    }

    /// Rounding scale of `eval_reference`: the sum of |coefficient| times
    /// |basis derivative| over the active basis functions.
    pub fn eval_reference_bound(
        &self,
        space: &SplineSpace1D,
        patch: usize,
        sym: Sym,
        u: [f64; 2],
        l1: usize,
        l2: usize,
    ) -> f64 {
        let (d1, d2) = if sym.swap { (l2, l1) } else { (l1, l2) };
        self.part(patch).map_or(0.0, |part| eval_part_bound(space, part, sym.apply(u), d1, d2))
    }
}

/// Tensor-product evaluation of a coefficient block.
pub fn eval_part(space: &SplineSpace1D, part: &PatchCoeffs, xi: [f64; 2], d1: usize, d2: usize) -> f64 {
    eval_part_with(space, part, xi, d1, d2, |c, w| c * w)
}

/// Sum of |coefficient * basis derivative| over the active block.
pub fn eval_part_bound(space: &SplineSpace1D, part: &PatchCoeffs, xi: [f64; 2], d1: usize, d2: usize) -> f64 {
    eval_part_with(space, part, xi, d1, d2, |c, w| (c * w).abs())
}

fn eval_part_with(
    space: &SplineSpace1D,
    part: &PatchCoeffs,
    xi: [f64; 2],
    d1: usize,
    d2: usize,
    term: impl Fn(f64, f64) -> f64,
) -> f64 {
    let (f1, v1) = space.eval_active(xi[0], d1);
    let (f2, v2) = space.eval_active(xi[1], d2);
    let p = space.degree();
    let mut acc = 0.0;
    for a in 0..=p {
        let i = f1 + a;
        if i < part.i0 || i >= part.i0 + part.rows {
            continue;
        }
        for b in 0..=p {
            let j = f2 + b;
            if j < part.j0 || j >= part.j0 + part.cols {
                continue;
            }
            acc += term(part.data[(i - part.i0) * part.cols + (j - part.j0)], v1[d1][a] * v2[d2][b]);
        }
    }
    acc
}

/// Edge data shared by all edge and vertex constructions.
#[derive(Debug, Clone)]
pub struct EdgeData {
    pub frame: EdgeFrame,
    pub gluing: GluingData,
    /// alpha^(tau)^m and beta^(tau)^m as piecewise polynomials, m <= s.
    alpha_pow: [Vec<PiecewisePoly>; 2],
    beta_pow: [Vec<PiecewisePoly>; 2],
}

/// Reference-frame coefficient block: rows 0..=s (transversal), columns
/// `col0..col0+cols` (along the edge).
#[derive(Debug, Clone)]
pub struct RefBlock {
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Everything needed to construct basis functions on one domain.
pub struct Builder<'a> {
    pub domain: &'a MultiPatchDomain,
    pub topo: &'a Topology,
    pub params: Params,
    pub space: SplineSpace1D,
    trace_spaces: Vec<SplineSpace1D>,
    pub m: MFunctions,
    pub edges: Vec<Option<EdgeData>>,
    /// dvals[l][a] = d^l N_a(0) for l, a <= 2s.
    dvals: Vec<Vec<f64>>,
}

/// Per-subspace dimension report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DimReport {
    pub patch: usize,
    pub edge: usize,
    pub vertex: usize,
}

impl DimReport {
    pub fn total(&self) -> usize {
        self.patch + self.edge + self.vertex
    }
}

/// Ordered basis of W^s.
#[derive(Debug, Clone)]
pub struct SmoothSpace {
    pub params: Params,
    pub strategy: Strategy,
    pub functions: Vec<IsoFunction>,
    pub ranges: Vec<(SubspaceKind, usize, usize)>,
    /// Vertex kernels (nullspace strategy or containment diagnostics).
    pub vertex_kernels: BTreeMap<usize, Kernel>,
    pub num_patches: usize,
}

impl SmoothSpace {
    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn dims(&self) -> DimReport {
        let mut d = DimReport::default();
        for f in &self.functions {
            match f.tag.kind() {
                SubspaceKind::Patch => d.patch += 1,
                SubspaceKind::Edge => d.edge += 1,
                _ => d.vertex += 1,
            }
        }
        d
    }
}

impl<'a> Builder<'a> {
    pub fn new(domain: &'a MultiPatchDomain, topo: &'a Topology, params: Params) -> Result<Self> {
        let (p, r, s, k) = (params.p, params.r, params.s, params.k);
        let space = SplineSpace1D::new(p, r as i32, k)?;
        let trace_spaces = (0..=s)
            .map(|j1| SplineSpace1D::new(p - j1, (r + s - j1) as i32, k))
            .collect::<Result<Vec<_>>>()?;
        let m = MFunctions::new(&params);
        let edges = (0..topo.edges.len())
            .into_par_iter()
            .map(|e| {
                if !topo.edges[e].is_inner() {
                    return Ok(None);
                }
                let frame = topo.canonical_edge_frame(domain, e);
                let gluing = GluingData::compute(&frame)?;
                let pw = |poly: &crate::gluing::Poly1| PiecewisePoly::from_monomial(&poly.coeffs, k);
                let pows = |base: &PiecewisePoly| {
                    let mut v = vec![PiecewisePoly::from_monomial(&[1.0], k)];
                    for q in 1..=s {
                        let next = v[q - 1].mul(base);
                        v.push(next);
                    }
                    v
                };
                let a = [pw(&gluing.alpha0), pw(&gluing.alpha1)];
                let b = [pw(&gluing.beta0), pw(&gluing.beta1)];
                Ok(Some(EdgeData {
                    frame,
                    alpha_pow: [pows(&a[0]), pows(&a[1])],
                    beta_pow: [pows(&b[0]), pows(&b[1])],
                    gluing,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let top = (2 * s).min(space.dim() - 1);
        let (_, ders) = space.eval_active(0.0, 2 * s);
        let dvals = (0..=2 * s)
            .map(|l| (0..=top).map(|a| if a <= p { ders[l][a] } else { 0.0 }).collect())
            .collect();
        Ok(Builder { domain, topo, params, space, trace_spaces, m, edges, dvals })
    }

    pub fn edge_data(&self, edge: usize) -> &EdgeData {
        self.edges[edge].as_ref().expect("not an inner edge")
    }

    /// Reference-frame coefficients of f^(tau)_{Gamma; j1, j2} for side tau
    /// (0 for the lower patch index) of an inner edge.
    pub fn edge_trace_function(&self, edge: usize, tau: usize, j1: usize, j2: usize) -> Result<RefBlock> {
        let ed = self.edge_data(edge);
        let (s, n) = (self.params.s, self.params.n());
        let ts = &self.trace_spaces[j1];
        let mut unit = vec![0.0; ts.dim()];
        unit[j2] = 1.0;
        let trace = ts.to_bezier(&unit);
        let mut g = Vec::with_capacity(s + 1 - j1);
        for i in j1..=s {
            let d = trace.nth_derivative(i - j1);
            let term = d
                .mul(&ed.beta_pow[tau][i - j1])
                .mul(&ed.alpha_pow[tau][j1])
                .scale(binom(i, j1));
            g.push(self.space.from_bezier(&term)?);
        }
        let mut lo = n;
        let mut hi = 0;
        for gi in &g {
            for (b, v) in gi.iter().enumerate() {
                if *v != 0.0 {
                    lo = lo.min(b);
                    hi = hi.max(b);
                }
            }
        }
        if lo > hi {
            return Ok(RefBlock { col0: 0, rows: s + 1, cols: 0, data: vec![] });
        }
        let cols = hi - lo + 1;
        let mut data = vec![0.0; (s + 1) * cols];
        for (q, gi) in g.iter().enumerate() {
            let i = j1 + q;
            for a in i..=s {
                let lam = self.m.lambda[i][a];
                for b in lo..=hi {
                    data[a * cols + (b - lo)] += lam * gi[b];
                }
            }
        }
        Ok(RefBlock { col0: lo, rows: s + 1, cols, data })
    }

    fn ref_to_entries(
        &self,
        patch: usize,
        sym: Sym,
        block: &RefBlock,
        scale: f64,
        out: &mut BTreeMap<(usize, usize, usize), f64>,
    ) {
        let n = self.params.n();
        for a in 0..block.rows {
            for c in 0..block.cols {
                let v = block.data[a * block.cols + c];
                if v != 0.0 {
                    let (i, j) = sym.native_index(n, a, block.col0 + c);
                    *out.entry((patch, i, j)).or_insert(0.0) += scale * v;
                }
            }
        }
    }

    /// Glued function phi_{Gamma; j1, j2} on both patches of an inner edge
    /// (canonical frame index j2).
    pub fn edge_function(&self, edge: usize, j1: usize, j2: usize) -> Result<IsoFunction> {
        let mut entries = BTreeMap::new();
        self.add_edge_function(edge, j1, j2, 1.0, &mut entries)?;
        Ok(IsoFunction::from_entries(&entries, Provenance::InnerEdge { edge, j1, j2 }))
    }

    fn add_edge_function(
        &self,
        edge: usize,
        j1: usize,
        j2: usize,
        scale: f64,
        out: &mut BTreeMap<(usize, usize, usize), f64>,
    ) -> Result<()> {
        let ed = self.edge_data(edge);
        for tau in 0..2 {
            let block = self.edge_trace_function(edge, tau, j1, j2)?;
            self.ref_to_entries(ed.frame.patches[tau], ed.frame.syms[tau], &block, scale, out);
        }
        Ok(())
    }

    fn raw(patch: usize, i: usize, j: usize, tag: Provenance) -> IsoFunction {
        IsoFunction {
            parts: vec![PatchCoeffs { patch, i0: i, j0: j, rows: 1, cols: 1, data: vec![1.0] }],
            tag,
        }
    }

    /// Interior B-splines of one patch.
    pub fn patch_space(&self, patch: usize) -> Vec<IsoFunction> {
        let (n, s) = (self.params.n(), self.params.s);
        let mut out = Vec::new();
        if n < 2 * (s + 1) {
            return out;
        }
        for j1 in s + 1..n - s - 1 {
            for j2 in s + 1..n - s - 1 {
                out.push(Self::raw(patch, j1, j2, Provenance::Patch { patch, j1, j2 }));
            }
        }
        out
    }

    /// Edge space: raw B-splines for boundary edges, glued functions for
    /// inner edges.
    pub fn edge_space(&self, edge: usize) -> Result<Vec<IsoFunction>> {
        let (n, s) = (self.params.n() as i64, self.params.s as i64);
        let e = &self.topo.edges[edge];
        let mut out = Vec::new();
        if e.is_inner() {
            for j1 in 0..=s {
                let nj = self.params.n_j1(j1 as usize) as i64;
                for j2 in (2 * s + 1 - j1)..=(nj + j1 - 2 * s - 2) {
                    out.push(self.edge_function(edge, j1 as usize, j2 as usize)?);
                }
            }
        } else {
            let (patch, _) = e.sides[0];
            let sym = self.topo.side_sym(patch, e.vertices[0], e.vertices[1]);
            for j1 in 0..=s {
                for j2 in (2 * s + 1 - j1)..=(n + j1 - 2 * s - 2) {
                    let (i, j) = sym.native_index(n as usize, j1 as usize, j2 as usize);
                    out.push(Self::raw(
                        patch,
                        i,
                        j,
                        Provenance::BoundaryEdge { edge, j1: j1 as usize, j2: j2 as usize },
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Canonical j2 index of a glued function counted from vertex `v`.
    pub fn canonical_j2(&self, edge: usize, v: usize, j1: usize, j2: usize) -> usize {
        if self.topo.edges[edge].vertices[0] == v {
            j2
        } else {
            self.params.n_j1(j1) - 1 - j2
        }
    }

    /// Reference block (rows/cols 0..=s) of a function in the corner frame
    /// `sym` of a patch.
    fn corner_block(&self, f: &BTreeMap<(usize, usize, usize), f64>, patch: usize, sym: Sym, size: usize) -> Vec<f64> {
        let n = self.params.n();
        let mut out = vec![0.0; size * size];
        for a in 0..size {
            for b in 0..size {
                let (i, j) = sym.native_index(n, a, b);
                out[a * size + b] = *f.get(&(patch, i, j)).unwrap_or(&0.0);
            }
        }
        out
    }

    /// Jets d1^l1 d2^l2 at (0,0) of a reference coefficient block with
    /// `size` rows/cols, for the listed orders.
    fn block_jets(&self, block: &[f64], size: usize, orders: &[(usize, usize)]) -> Vec<f64> {
        orders
            .iter()
            .map(|&(l1, l2)| {
                let mut acc = 0.0;
                for a in 0..=l1.min(size - 1) {
                    for b in 0..=l2.min(size - 1) {
                        acc += self.dvals[l1][a] * self.dvals[l2][b] * block[a * size + b];
                    }
                }
                acc
            })
            .collect()
    }

    /// Unknowns of the vertex system contributed by the edges around a
    /// vertex: for edge slot e, the (j1, j2) indices counted from the vertex.
    fn vertex_edge_unknowns(&self) -> Vec<(usize, usize)> {
        let s = self.params.s;
        let mut v = Vec::new();
        for j1 in 0..=s {
            for j2 in 0..=2 * s - j1 {
                v.push((j1, j2));
            }
        }
        v
    }

    /// Native entries of the function attached to an edge slot unknown:
    /// the glued function for inner edges, the B-spline for boundary edges.
    fn edge_unknown_entries(
        &self,
        vertex: usize,
        edge: usize,
        j1: usize,
        j2: usize,
        scale: f64,
        out: &mut BTreeMap<(usize, usize, usize), f64>,
    ) -> Result<()> {
        let e = &self.topo.edges[edge];
        if e.is_inner() {
            let c = self.canonical_j2(edge, vertex, j1, j2);
            self.add_edge_function(edge, j1, c, scale, out)
        } else {
            let patch = e.sides[0].0;
            let sym = self.topo.side_sym(patch, vertex, self.topo.other_end(edge, vertex));
            let (i, j) = sym.native_index(self.params.n(), j1, j2);
            *out.entry((patch, i, j)).or_insert(0.0) += scale;
            Ok(())
        }
    }

    /// Corner frame of patch rho in a vertex fan: (0,0) at the vertex, u2
    /// along the incoming edge.
    fn fan_sym(&self, vertex: usize, rho: usize) -> Sym {
        let vx = &self.topo.vertices[vertex];
        let (patch, _) = vx.patches[rho];
        let e_in = vx.edges[rho];
        self.topo.side_sym(patch, vertex, self.topo.other_end(e_in, vertex))
    }

    fn fan_edges(&self, vertex: usize) -> Vec<usize> {
        self.topo.vertices[vertex].edges.clone()
    }

    /// Homogeneous system T a = 0 of an inner vertex or a boundary vertex of
    /// valency >= 3, expressed through corner coefficient blocks.
    pub fn vertex_system(&self, vertex: usize) -> Result<VertexSystem> {
        let s = self.params.s;
        let bs = s + 1;
        let vx = &self.topo.vertices[vertex];
        let v = vx.valency();
        let edges = self.fan_edges(vertex);
        let eu = self.vertex_edge_unknowns();
        let ne = eu.len();
        let nunk = edges.len() * ne + v * bs * bs;
        // Corner blocks of every edge unknown in every patch of the fan.
        let syms: Vec<Sym> = (0..v).map(|rho| self.fan_sym(vertex, rho)).collect();
        let mut contrib: Vec<Vec<Vec<f64>>> = Vec::new(); // [slot][unknown] -> blocks per rho
        for &edge in &edges {
            let mut per = Vec::new();
            for &(j1, j2) in &eu {
                let mut ent = BTreeMap::new();
                self.edge_unknown_entries(vertex, edge, j1, j2, 1.0, &mut ent)?;
                let mut blocks = Vec::with_capacity(v * bs * bs);
                for (rho, sym) in syms.iter().enumerate() {
                    blocks.extend(self.corner_block(&ent, vx.patches[rho].0, *sym, bs));
                }
                per.push(blocks);
            }
            contrib.push(per);
        }
        let mut t = Dense::zeros(2 * v * bs * bs, nunk);
        for rho in 0..v {
            let slots = [rho, (rho + 1) % edges.len().max(1)];
            let slots = if vx.boundary { [rho, rho + 1] } else { slots };
            for (q, &slot) in slots.iter().enumerate() {
                for c in 0..bs * bs {
                    let row = (2 * rho + q) * bs * bs + c;
                    for (u, blocks) in contrib[slot].iter().enumerate() {
                        let val = blocks[rho * bs * bs + c];
                        if val != 0.0 {
                            t.add(row, slot * ne + u, val);
                        }
                    }
                    t.add(row, edges.len() * ne + rho * bs * bs + c, -1.0);
                }
            }
        }
        t.normalize_rows();
        Ok(VertexSystem { vertex, edges, edge_unknowns: eu, t, syms })
    }

    /// Builds the isogeometric function of an unknown vector of a vertex
    /// system.
    pub fn vertex_function(&self, sys: &VertexSystem, a: &[f64], tag: Provenance) -> Result<IsoFunction> {
        let vx = &self.topo.vertices[sys.vertex];
        let ne = sys.edge_unknowns.len();
        let bs = self.params.s + 1;
        let n = self.params.n();
        let mut ent = BTreeMap::new();
        for (slot, &edge) in sys.edges.iter().enumerate() {
            for (u, &(j1, j2)) in sys.edge_unknowns.iter().enumerate() {
                let c = a[slot * ne + u];
                if c != 0.0 {
                    self.edge_unknown_entries(sys.vertex, edge, j1, j2, c, &mut ent)?;
                }
            }
        }
        let off = sys.edges.len() * ne;
        for (rho, sym) in sys.syms.iter().enumerate() {
            let patch = vx.patches[rho].0;
            for aa in 0..bs {
                for bb in 0..bs {
                    let c = a[off + rho * bs * bs + aa * bs + bb];
                    if c != 0.0 {
                        let (i, j) = sym.native_index(n, aa, bb);
                        *ent.entry((patch, i, j)).or_insert(0.0) -= c;
                    }
                }
            }
        }
        // Drop cancellation noise relative to the largest coefficient.
        let mx = ent.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        ent.retain(|_, v| v.abs() > 1e-15 * mx);
        Ok(IsoFunction::from_entries(&ent, tag))
    }

    /// Nullspace strategy: one function per kernel vector of T.
    pub fn vertex_space_nullspace(&self, vertex: usize) -> Result<(Vec<IsoFunction>, Kernel)> {
        let sys = self.vertex_system(vertex)?;
        let ker = linalg::kernel(&sys.t, KERNEL_TOL)?;
        if let Some(ratio) = ker.near_cutoff {
            warn!(
                "vertex {vertex}: singular value within factor {:.1} of the kernel cutoff {:.3e}",
                if ratio < 1.0 { 1.0 / ratio } else { ratio },
                ker.cutoff
            );
        }
        let funcs = ker
            .basis
            .iter()
            .enumerate()
            .map(|(index, a)| self.vertex_function(&sys, a, Provenance::VertexKernel { vertex, index }))
            .collect::<Result<Vec<_>>>()?;
        Ok((funcs, ker))
    }

    /// Scaling factor sigma of the interpolation strategy (Frobenius norm).
    pub fn sigma(&self, vertex: usize) -> f64 {
        let vx = &self.topo.vertices[vertex];
        let sum: f64 = vx
            .patches
            .iter()
            .map(|&(patch, corner)| {
                let xi = crate::multipatch::CORNER_PARAMS[corner];
                let j = self.domain.patches[patch].jacobian(xi);
                (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt()
            })
            .sum();
        1.0 / (self.params.h() / (self.params.p as f64 * vx.valency() as f64) * sum)
    }

    /// Taylor coefficients (up to total order `order`) of psi_{j1,j2} o F
    /// in the corner frame `sym` of `patch`, scaled to derivatives.
    pub fn psi_jets(&self, vertex: usize, patch: usize, sym: Sym, j1: usize, j2: usize, order: usize) -> Vec<Vec<f64>> {
        let g = self.domain.patches[patch].reparam(sym);
        let (a, b, c) = g.abc();
        let xv = self.topo.vertices[vertex].point;
        debug_assert!((g.corners[0][0] - xv[0]).abs() < 1e-9);
        let sigma = self.sigma(vertex);
        let dim = order + 1;
        // Bivariate polynomials as dense dim x dim arrays; entry [i][j] is
        // the coefficient of u1^i u2^j.
        let lin = |k: usize| {
            let mut p = vec![vec![0.0; dim]; dim];
            if dim > 1 {
                p[1][0] = a[k];
                p[0][1] = b[k];
                if dim > 1 {
                    p[1][1] = c[k];
                }
            }
            p
        };
        let mul = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| {
            let mut r = vec![vec![0.0; dim]; dim];
            for i in 0..dim {
                for j in 0..dim {
                    if p[i][j] == 0.0 {
                        continue;
                    }
                    for k in 0..dim - i {
                        for l in 0..dim - j {
                            r[i + k][j + l] += p[i][j] * q[k][l];
                        }
                    }
                }
            }
            r
        };
        let mut one = vec![vec![0.0; dim]; dim];
        one[0][0] = 1.0;
        let (x, y) = (lin(0), lin(1));
        let mut prod = one;
        for _ in 0..j1 {
            prod = mul(&prod, &x);
        }
        for _ in 0..j2 {
            prod = mul(&prod, &y);
        }
        let f = sigma.powi((j1 + j2) as i32) / (factorial(j1) * factorial(j2));
        (0..dim)
            .map(|i| (0..dim).map(|j| prod[i][j] * f * factorial(i) * factorial(j)).collect())
            .collect()
    }

    /// Interpolation strategy: the (s+1)(2s+1) functions reproducing the
    /// scaled monomial jets of total order <= 2s at the vertex. Also returns
    /// the unknown vectors for containment checks.
    pub fn vertex_space_interpolation(&self, vertex: usize) -> Result<(Vec<IsoFunction>, Vec<Vec<f64>>, VertexSystem)> {
        let s = self.params.s;
        let bs = s + 1;
        let sys = self.vertex_system(vertex)?;
        let vx = &self.topo.vertices[vertex];
        let v = vx.valency();
        let ne = sys.edge_unknowns.len();
        // Edge slot -> patch used for its interpolation conditions.
        let slot_patch: Vec<usize> = (0..sys.edges.len()).map(|slot| slot.min(v - 1)).collect();
        let cond: Vec<(usize, usize)> = sys.edge_unknowns.iter().map(|&(t, a)| (t, a)).collect();
        let size = 2 * s + 1;
        let mut targets = Vec::new();
        for j1 in 0..=2 * s {
            for j2 in 0..=2 * s - j1 {
                targets.push((j1, j2));
            }
        }
        let mut unknowns = vec![vec![0.0; sys.edges.len() * ne + v * bs * bs]; targets.len()];
        for (slot, &edge) in sys.edges.iter().enumerate() {
            let rho = slot_patch[slot];
            let patch = vx.patches[rho].0;
            let sym = self.topo.side_sym(patch, vertex, self.topo.other_end(edge, vertex));
            // Frame with u1 transversal to the edge: swap the side frame.
            let sym_t = sym;
            let mut mat = Dense::zeros(ne, ne);
            for (u, &(j1, j2)) in sys.edge_unknowns.iter().enumerate() {
                let mut ent = BTreeMap::new();
                self.edge_unknown_entries(vertex, edge, j1, j2, 1.0, &mut ent)?;
                let block = self.corner_block(&ent, patch, sym_t, size);
                let jets = self.block_jets(&block, size, &cond);
                for (row, val) in jets.into_iter().enumerate() {
                    mat.set(row, u, val);
                }
            }
            let rhs: Vec<Vec<f64>> = targets
                .iter()
                .map(|&(j1, j2)| {
                    let jets = self.psi_jets(vertex, patch, sym_t, j1, j2, 2 * s);
                    cond.iter().map(|&(t, a)| jets[t][a]).collect()
                })
                .collect();
            let (sol, condnum) = linalg::solve_square(&mat, &rhs).map_err(|e| {
                Error::Geometry(format!("vertex {vertex}, edge {edge}: interpolation system singular ({e})"))
            })?;
            if condnum > 1e10 {
                warn!("vertex {vertex}, edge {edge}: interpolation condition estimate {condnum:.3e}");
            }
            for (ti, x) in sol.into_iter().enumerate() {
                unknowns[ti][slot * ne..(slot + 1) * ne].copy_from_slice(&x);
            }
        }
        // Corner blocks from the jets of psi o F with l1, l2 <= s.
        let off = sys.edges.len() * ne;
        let d = Dense {
            rows: bs,
            cols: bs,
            data: (0..bs).flat_map(|l| (0..bs).map(move |a| (l, a))).map(|(l, a)| self.dvals[l][a]).collect(),
        };
        for rho in 0..v {
            let patch = vx.patches[rho].0;
            let sym = sys.syms[rho];
            for (ti, &(j1, j2)) in targets.iter().enumerate() {
                let jets = self.psi_jets(vertex, patch, sym, j1, j2, 2 * s);
                // J = D B D^T  =>  B = D^-1 J D^-T (D lower triangular).
                let jm: Vec<Vec<f64>> = (0..bs).map(|l1| (0..bs).map(|l2| jets[l1][l2]).collect()).collect();
                let y = lower_solve_cols(&d, &jm);
                let b = lower_solve_cols(&d, &y);
                for aa in 0..bs {
                    for bb in 0..bs {
                        unknowns[ti][off + rho * bs * bs + aa * bs + bb] = b[aa][bb];
                    }
                }
            }
        }
        let funcs = targets
            .iter()
            .zip(&unknowns)
            .map(|(&(j1, j2), a)| self.vertex_function(&sys, a, Provenance::VertexInterp { vertex, j1, j2 }))
            .collect::<Result<Vec<_>>>()?;
        Ok((funcs, unknowns, sys))
    }

    /// Candidates of a boundary vertex of valency two: glued functions of
    /// the shared edge and B-splines of both patches.
    fn boundary_v2_candidates(&self, vertex: usize) -> Vec<Candidate> {
        let s = self.params.s;
        let vx = &self.topo.vertices[vertex];
        let edge = vx.edges[1];
        let mut out = Vec::new();
        for j1 in 0..=s {
            for j2 in 0..=2 * s - j1 {
                let c = self.canonical_j2(edge, vertex, j1, j2);
                out.push(Candidate::Glued { edge, j1, j2: c });
            }
        }
        let other = self.topo.other_end(edge, vertex);
        for &(patch, _) in &vx.patches {
            let sym = self.topo.side_sym(patch, vertex, other);
            for t in s + 1..=2 * s {
                for a in 0..=2 * s - t {
                    let (i, j) = sym.native_index(self.params.n(), t, a);
                    out.push(Candidate::Raw { patch, i, j });
                }
            }
        }
        out
    }

    fn boundary_v1_candidates(&self, vertex: usize) -> Vec<Candidate> {
        let s = self.params.s;
        let (patch, corner) = self.topo.vertices[vertex].patches[0];
        let sym = self.corner_sym(patch, corner);
        let mut out = Vec::new();
        for a in 0..=2 * s {
            for b in 0..=2 * s - a {
                let (i, j) = sym.native_index(self.params.n(), a, b);
                out.push(Candidate::Raw { patch, i, j });
            }
        }
        out
    }

    fn corner_sym(&self, _patch: usize, corner: usize) -> Sym {
        let target = crate::multipatch::CORNER_PARAMS[corner];
        Sym::all().find(|s| s.apply([0.0, 0.0]) == target).unwrap()
    }

    /// Raw positions {a + b <= 2s} around a vertex in every incident patch.
    fn corner_triangle(&self, vertex: usize) -> Vec<Candidate> {
        let s = self.params.s;
        let mut out = Vec::new();
        for &(patch, corner) in &self.topo.vertices[vertex].patches {
            let sym = self.corner_sym(patch, corner);
            for a in 0..=2 * s {
                for b in 0..=2 * s - a {
                    let (i, j) = sym.native_index(self.params.n(), a, b);
                    out.push(Candidate::Raw { patch, i, j });
                }
            }
        }
        out
    }

    /// Glued keys and boundary raw keys touched by the system of an inner
    /// vertex or a boundary vertex of valency >= 3.
    fn system_claims(&self, vertex: usize) -> Vec<Candidate> {
        let mut out = self.corner_triangle(vertex);
        for &edge in &self.topo.vertices[vertex].edges {
            for (j1, j2) in self.vertex_edge_unknowns() {
                let e = &self.topo.edges[edge];
                if e.is_inner() {
                    out.push(Candidate::Glued { edge, j1, j2: self.canonical_j2(edge, vertex, j1, j2) });
                } else {
                    let patch = e.sides[0].0;
                    let sym = self.topo.side_sym(patch, vertex, self.topo.other_end(edge, vertex));
                    let (i, j) = sym.native_index(self.params.n(), j1, j2);
                    out.push(Candidate::Raw { patch, i, j });
                }
            }
        }
        out
    }

    fn candidate_function(&self, vertex: usize, c: &Candidate) -> Result<IsoFunction> {
        match *c {
            Candidate::Glued { edge, j1, j2 } => {
                let mut f = self.edge_function(edge, j1, j2)?;
                f.tag = Provenance::VertexGlued { vertex, edge, j1, j2 };
                Ok(f)
            }
            Candidate::Raw { patch, i, j } => {
                Ok(Self::raw(patch, i, j, Provenance::VertexRaw { vertex, patch, j1: i, j2: j }))
            }
        }
    }

    /// Assembles W^s.
    pub fn assemble(&self, strategy: Strategy) -> Result<SmoothSpace> {
        let mut functions = Vec::new();
        let mut ranges = Vec::new();
        let np = self.topo.num_patches;
        let start = functions.len();
        for patch in 0..np {
            functions.extend(self.patch_space(patch));
        }
        ranges.push((SubspaceKind::Patch, start, functions.len()));
        let start = functions.len();
        let edge_funcs: Vec<Vec<IsoFunction>> = (0..self.topo.edges.len())
            .into_par_iter()
            .map(|e| self.edge_space(e))
            .collect::<Result<_>>()?;
        functions.extend(edge_funcs.into_iter().flatten());
        ranges.push((SubspaceKind::Edge, start, functions.len()));

        let start = functions.len();
        let mut claimed: HashSet<Candidate> = HashSet::new();
        let mut kernels = BTreeMap::new();
        let verts = &self.topo.vertices;
        let sys_vertices: Vec<usize> = (0..verts.len()).filter(|&v| verts[v].valency() >= 3 || !verts[v].boundary).collect();
        let results: Vec<(Vec<IsoFunction>, Option<Kernel>)> = sys_vertices
            .par_iter()
            .map(|&v| match strategy {
                Strategy::Nullspace => self.vertex_space_nullspace(v).map(|(f, k)| (f, Some(k))),
                Strategy::Interpolation => self.vertex_space_interpolation(v).map(|(f, _, _)| (f, None)),
            })
            .collect::<Result<_>>()?;
        for (&v, (funcs, ker)) in sys_vertices.iter().zip(results) {
            functions.extend(funcs);
            if let Some(k) = ker {
                kernels.insert(v, k);
            }
            claimed.extend(self.system_claims(v));
        }
        for order in [2usize, 1] {
            for v in 0..verts.len() {
                let vx = &verts[v];
                if !vx.boundary || vx.valency() != order {
                    continue;
                }
                let cands = if order == 2 { self.boundary_v2_candidates(v) } else { self.boundary_v1_candidates(v) };
                for c in &cands {
                    if !claimed.contains(c) {
                        functions.push(self.candidate_function(v, c)?);
                    }
                }
                claimed.extend(cands);
                claimed.extend(self.corner_triangle(v));
            }
        }
        ranges.push((SubspaceKind::Vertex, start, functions.len()));
        Ok(SmoothSpace {
            params: self.params,
            strategy,
            functions,
            ranges,
            vertex_kernels: kernels,
            num_patches: np,
        })
    }

    /// Two-patch construction: interior-side B-splines of both patches plus
    /// all glued functions of the single inner edge.
    pub fn two_patch_space(&self) -> Result<SmoothSpace> {
        let edge = self
            .topo
            .inner_edges()
            .next()
            .ok_or_else(|| Error::Topology("domain has no inner edge".into()))?;
        if self.topo.num_patches != 2 {
            return Err(Error::Topology("two-patch construction needs exactly two patches".into()));
        }
        let (n, s) = (self.params.n(), self.params.s);
        let ed = self.edge_data(edge);
        let mut functions = Vec::new();
        for tau in 0..2 {
            let (patch, sym) = (ed.frame.patches[tau], ed.frame.syms[tau]);
            for j1 in s + 1..n {
                for j2 in 0..n {
                    let (i, j) = sym.native_index(n, j1, j2);
                    functions.push(Self::raw(patch, i, j, Provenance::Other { label: format!("omega {patch} {i} {j}") }));
                }
            }
        }
        let start = functions.len();
        for j1 in 0..=s {
            for j2 in 0..self.params.n_j1(j1) {
                functions.push(self.edge_function(edge, j1, j2)?);
            }
        }
        let end = functions.len();
        Ok(SmoothSpace {
            params: self.params,
            strategy: Strategy::Interpolation,
            functions,
            ranges: vec![(SubspaceKind::Patch, 0, start), (SubspaceKind::Edge, start, end)],
            vertex_kernels: BTreeMap::new(),
            num_patches: 2,
        })
    }
}

/// Solves D X = Y column-wise for lower-triangular D, with Y given as rows
/// y[i][col]; returns x[col][i].
fn lower_solve_cols(d: &Dense, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = d.rows;
    let ncols = y[0].len();
    (0..ncols)
        .map(|c| {
            let mut x = vec![0.0; n];
            for i in 0..n {
                let mut acc = y[i][c];
                for (j, xj) in x.iter().enumerate().take(i) {
                    acc -= d.get(i, j) * xj;
                }
                x[i] = acc / d.get(i, i);
            }
            x
        })
        .collect()
}

/// Deduplication key of a candidate function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Candidate {
    Glued { edge: usize, j1: usize, j2: usize },
    Raw { patch: usize, i: usize, j: usize },
}

/// Vertex system T a = 0 with its unknown layout: for every edge slot the
/// edge unknowns (j1, j2) counted from the vertex, then (s+1)^2 corner
/// coefficients per patch of the fan.
#[derive(Debug, Clone)]
pub struct VertexSystem {
    pub vertex: usize,
    pub edges: Vec<usize>,
    pub edge_unknowns: Vec<(usize, usize)>,
    pub t: Dense,
    pub syms: Vec<Sym>,
}

/// Convenience: builds topology and W^s for a domain.
pub fn assemble_w(domain: &MultiPatchDomain, params: Params, strategy: Strategy) -> Result<SmoothSpace> {
    let topo = Topology::extract(domain)?;
    Builder::new(domain, &topo, params)?.assemble(strategy)
}

/// Predicted subspace dimensions from the closed formulas (vertex spaces
/// of inner and valency >= 3 vertices need the kernel dimension for the
/// nullspace strategy and are then reported as None).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedDims {
    pub patch: i64,
    pub inner_edge: i64,
    pub boundary_edge: i64,
    pub vertex_v1: i64,
    pub vertex_v2: i64,
    /// Per inner / valency >= 3 vertex, interpolation strategy.
    pub vertex_interp: i64,
    /// Sum of the unclamped formulas with the interpolation strategy.
    pub total_interp: i64,
    /// Two-patch construction: 2 n (n-s-1) + sum_j1 n_j1.
    pub two_patch: i64,
}

pub fn predicted_dims(params: &Params, topo: &Topology) -> PredictedDims {
    let (n, s, k) = (params.n() as i64, params.s as i64, params.k as i64);
    let patch = (n - 2 * (s + 1)).pow(2);
    // (s+1)(n - ks - (7s/2 + 2)) in integer arithmetic.
    let inner_edge = (s + 1) * (2 * n - 2 * k * s - 7 * s - 4) / 2;
    let boundary_edge = (s + 1) * (n - 3 * s - 2);
    let vertex_v2 = (s + 1) * (5 * s + 2) / 2;
    let vertex_v1 = (s + 1) * (2 * s + 1);
    let vertex_interp = (s + 1) * (2 * s + 1);
    let mut total = topo.num_patches as i64 * patch;
    for e in &topo.edges {
        total += if e.is_inner() { inner_edge } else { boundary_edge };
    }
    for v in &topo.vertices {
        total += if !v.boundary || v.valency() >= 3 {
            vertex_interp
        } else if v.valency() == 2 {
            vertex_v2
        } else {
            vertex_v1
        };
    }
    let two_patch = 2 * n * (n - s - 1) + (0..=params.s).map(|j1| params.n_j1(j1) as i64).sum::<i64>();
    PredictedDims {
        patch,
        inner_edge,
        boundary_edge,
        vertex_v1,
        vertex_v2,
        vertex_interp,
        total_interp: total,
        two_patch,
    }
}

/// Writes the basis as text: a header line, then per function its
/// provenance and per-patch coefficient blocks in row-major order.
pub fn export_basis(space: &SmoothSpace) -> String {
    let mut out = String::new();
    let p = &space.params;
    out.push_str(&format!(
        "csmooth-basis 1\nparams {} {} {} {} {} {}\nfunctions {}\n",
        p.p,
        p.r,
        p.s,
        p.k,
        space.strategy,
        space.num_patches,
        space.functions.len()
    ));
    for (idx, f) in space.functions.iter().enumerate() {
        out.push_str(&format!("function {idx} {}\n", f.tag));
        for part in &f.parts {
            out.push_str(&format!(
                "part {} {} {} {} {}\n",
                part.patch, part.i0, part.j0, part.rows, part.cols
            ));
            for r in 0..part.rows {
                let row: Vec<String> = part.data[r * part.cols..(r + 1) * part.cols]
                    .iter()
                    .map(|v| format!("{v:.16e}"))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
    }
    out
}

/// Parses the output of `export_basis`.
pub fn import_basis(text: &str) -> Result<SmoothSpace> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of basis file, expected {what}")))
    };
    let (_, head) = next("header")?;
    if head.trim() != "csmooth-basis 1" {
        return Err(Error::Parse(format!("unknown basis header '{head}'")));
    }
    let (ln, pl) = next("params")?;
    let f: Vec<&str> = pl.split_whitespace().collect();
    if f.len() != 7 || f[0] != "params" {
        return Err(Error::Parse(format!("line {}: malformed params", ln + 1)));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer '{t}'")));
    let params = Params::new(num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?)?;
    let strategy: Strategy = f[5].parse()?;
    let num_patches = num(f[6])?;
    let (_, fl) = next("function count")?;
    let count = num(fl.trim_start_matches("functions").trim())?;
    let mut functions = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, hl) = next("function")?;
        let rest = hl
            .strip_prefix("function ")
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'function'", ln + 1)))?;
        let (_, tag) = rest.split_once(' ').unwrap_or((rest, ""));
        let tag: Provenance = tag.parse()?;
        let mut parts = Vec::new();
        loop {
            let (ln, l) = next("part or end")?;
            if l.trim() == "end" {
                break;
            }
            let h: Vec<&str> = l.split_whitespace().collect();
            if h.len() != 6 || h[0] != "part" {
                return Err(Error::Parse(format!("line {}: expected 'part'", ln + 1)));
            }
            let (patch, i0, j0, rows, cols) = (num(h[1])?, num(h[2])?, num(h[3])?, num(h[4])?, num(h[5])?);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = next("coefficient row")?;
                for t in row.split_whitespace() {
                    data.push(t.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: bad coefficient '{t}'", ln + 1))
                    })?);
                }
            }
            if data.len() != rows * cols {
                return Err(Error::Parse(format!("part of patch {patch}: wrong coefficient count")));
            }
            parts.push(PatchCoeffs { patch, i0, j0, rows, cols, data });
        }
        functions.push(IsoFunction { parts, tag });
    }
    let mut ranges = Vec::new();
    let mut start = 0;
    for (i, f) in functions.iter().enumerate() {
        if i > 0 && f.tag.kind() != functions[i - 1].tag.kind() {
            ranges.push((functions[i - 1].tag.kind(), start, i));
            start = i;
        }
    }
    if !functions.is_empty() {
        ranges.push((functions.last().unwrap().tag.kind(), start, functions.len()));
    }
    Ok(SmoothSpace { params, strategy, functions, ranges, vertex_kernels: BTreeMap::new(), num_patches })
}
