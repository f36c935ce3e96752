//! Smoothness oracles for isogeometric functions: interface jet matching
//! through the gluing data, trace equality, physical derivatives by Taylor
//! arithmetic through the inverse Jacobian, and finite differences in
//! physical space.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bspline::{binom, factorial, SplineSpace1D};
use crate::gluing::{gs_residual, jets_recursive, Poly1, RationalJet};
use crate::multipatch::{BilinearPatch, Point, Sym};
use crate::spacebuilder::{Builder, IsoFunction, PatchCoeffs, Provenance, SmoothSpace};

/// Pass threshold of the jet and trace checks.
pub const JET_TOL: f64 = 1e-8;
/// Pass threshold of the finite-difference check.
pub const FD_TOL: f64 = 1e-4;
/// Default number of samples along an edge.
pub const EDGE_SAMPLES: usize = 20;
/// Relative finite-difference steps (times the domain diameter).
pub const FD_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Maximum residual per derivative order on one inner edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeResiduals {
    pub edge: usize,
    pub residuals: Vec<f64>,
}

impl EdgeResiduals {
    pub fn max(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Lowest derivative order whose residual exceeds `tol`.
    pub fn first_violation(&self, tol: f64) -> Option<usize> {
        self.residuals.iter().position(|r| *r > tol)
    }
}

/// Result of the finite-difference check on one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub edge: usize,
    pub residuals: Vec<f64>,
    /// Sample points skipped because a stencil left its patch.
    pub skipped: usize,
    pub evaluated: usize,
}

/// Truncated univariate Taylor series sum c[k] d^k.
#[derive(Debug, Clone, PartialEq)]
pub struct Series1(pub Vec<f64>);

impl Series1 {
    fn order(&self) -> usize {
        self.0.len() - 1
    }

    fn truncate(mut self, m: usize) -> Self {
        self.0.truncate(m + 1);
        self
    }

    fn poly_at(p: &Poly1, x: f64, m: usize) -> Self {
        let mut c = Vec::with_capacity(m + 1);
        let mut d = p.clone();
        for k in 0..=m {
            c.push(d.eval(x) / factorial(k));
            d = d.deriv();
        }
        Series1(c)
    }

    fn mul(&self, o: &Self) -> Self {
        let m = self.order().min(o.order());
        let mut c = vec![0.0; m + 1];
        for i in 0..=m {
            for j in 0..=m - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Series1(c)
    }

    fn recip(&self) -> Self {
        let m = self.order();
        let mut r = vec![0.0; m + 1];
        r[0] = 1.0 / self.0[0];
        for k in 1..=m {
            let acc: f64 = (1..=k).map(|i| self.0[i] * r[k - i]).sum();
            r[k] = -acc / self.0[0];
        }
        Series1(r)
    }

    fn deriv(&self) -> Self {
        if self.order() == 0 {
            return Series1(vec![0.0]);
        }
        Series1((1..self.0.len()).map(|k| k as f64 * self.0[k]).collect())
    }

    fn sub(&self, o: &Self) -> Self {
        let m = self.order().min(o.order());
        Series1((0..=m).map(|k| self.0[k] - o.0[k]).collect())
    }

    fn scale(&self, f: f64) -> Self {
        Series1(self.0.iter().map(|v| v * f).collect())
    }

    fn powi(&self, e: usize) -> Self {
        let mut r = Series1(vec![0.0; self.0.len()]);
        r.0[0] = 1.0;
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }
}

/// Truncated bivariate Taylor series sum c[i][j] d1^i d2^j, i + j <= order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series2 {
    pub order: usize,
    pub c: Vec<Vec<f64>>,
}

impl Series2 {
    fn zeros(order: usize) -> Self {
        Series2 { order, c: vec![vec![0.0; order + 1]; order + 1] }
    }

    fn constant(v: f64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.c[0][0] = v;
        s
    }

    fn mul(&self, o: &Self) -> Self {
        let m = self.order.min(o.order);
        let mut r = Self::zeros(m);
        for i in 0..=m {
            for j in 0..=m - i {
                let a = self.c[i][j];
                if a == 0.0 {
                    continue;
                }
                for k in 0..=m - i - j {
                    for l in 0..=m - i - j - k {
                        r.c[i + k][j + l] += a * o.c[k][l];
                    }
                }
            }
        }
        r
    }

    fn add(&self, o: &Self) -> Self {
        let m = self.order.min(o.order);
        let mut r = Self::zeros(m);
        for i in 0..=m {
            for j in 0..=m - i {
                r.c[i][j] = self.c[i][j] + o.c[i][j];
            }
        }
        r
    }

    fn scale(&self, f: f64) -> Self {
        let mut r = self.clone();
        r.c.iter_mut().flatten().for_each(|v| *v *= f);
        r
    }

    fn recip(&self) -> Self {
        let m = self.order;
        let c0 = self.c[0][0];
        let mut rest = self.scale(-1.0 / c0);
        rest.c[0][0] = 0.0;
        let mut acc = Self::constant(1.0, m);
        let mut term = Self::constant(1.0, m);
        for _ in 0..m {
            term = term.mul(&rest);
            acc = acc.add(&term);
        }
        acc.scale(1.0 / c0)
    }

    /// Partial derivative in direction k, one order lower.
    fn partial(&self, k: usize) -> Self {
        if self.order == 0 {
            return Self::zeros(0);
        }
        let m = self.order - 1;
        let mut r = Self::zeros(m);
        for i in 0..=m {
            for j in 0..=m - i {
                r.c[i][j] = if k == 0 {
                    (i + 1) as f64 * self.c[i + 1][j]
                } else {
                    (j + 1) as f64 * self.c[i][j + 1]
                };
            }
        }
        r
    }

    /// Affine series v0 + g1 d1 + g2 d2.
    fn affine(v0: f64, g1: f64, g2: f64, order: usize) -> Self {
        let mut s = Self::constant(v0, order);
        if order > 0 {
            s.c[1][0] = g1;
            s.c[0][1] = g2;
        }
        s
    }
}

/// Taylor series of order `order` at `xi` of one patch part, in native
/// parameters.
pub fn native_taylor(space: &SplineSpace1D, part: Option<&PatchCoeffs>, xi: [f64; 2], order: usize) -> Series2 {
    let mut s = Series2::zeros(order);
    let Some(part) = part else { return s };
    let p = space.degree();
    let (f1, v1) = space.eval_active(xi[0], order);
    let (f2, v2) = space.eval_active(xi[1], order);
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
            let c = part.data[(i - part.i0) * part.cols + (j - part.j0)];
            if c == 0.0 {
                continue;
            }
            for d1 in 0..=order {
                for d2 in 0..=order - d1 {
                    s.c[d1][d2] += c * v1[d1][a] * v2[d2][b];
                }
            }
        }
    }
    for d1 in 0..=order {
        for d2 in 0..=order - d1 {
            s.c[d1][d2] /= factorial(d1) * factorial(d2);
        }
    }
    s
}

/// Physical derivatives d_x1^a d_x2^b (a + b <= order) of phi at F(xi), with
/// phi o F given by the Taylor series `f` at xi. Returns d[a][b].
pub fn physical_derivatives(geom: &BilinearPatch, xi: [f64; 2], f: &Series2) -> Vec<Vec<f64>> {
    let order = f.order;
    let (a, b, c) = geom.abc();
    // Columns of JF around xi: d1F = a + c xi2, d2F = b + c xi1.
    let col0: Vec<Series2> = (0..2).map(|k| Series2::affine(a[k] + c[k] * xi[1], 0.0, c[k], order)).collect();
    let col1: Vec<Series2> = (0..2).map(|k| Series2::affine(b[k] + c[k] * xi[0], c[k], 0.0, order)).collect();
    let det = col0[0].mul(&col1[1]).add(&col0[1].mul(&col1[0]).scale(-1.0));
    let inv = det.recip();
    // d/dx_k = sum_m Jinv[m][k] d/dxi_m with Jinv = adj(J) / det.
    let field = [
        [col1[1].mul(&inv), col0[1].mul(&inv).scale(-1.0)],
        [col1[0].mul(&inv).scale(-1.0), col0[0].mul(&inv)],
    ];
    let apply = |t: &Series2, k: usize| field[k][0].mul(&t.partial(0)).add(&field[k][1].mul(&t.partial(1)));
    let mut out = vec![vec![0.0; order + 1]; order + 1];
    let mut along2 = f.clone();
    for bb in 0..=order {
        let mut t = along2.clone();
        for aa in 0..=order - bb {
            out[aa][bb] = t.c[0][0];
            if aa < order - bb {
                t = apply(&t, 0);
            }
        }
        if bb < order {
            along2 = apply(&along2, 1);
        }
    }
    out
}

/// Physical derivatives of order <= `order` of a function on `patch` at
/// native parameter `xi`.
pub fn physical_jet(builder: &Builder, f: &IsoFunction, patch: usize, xi: [f64; 2], order: usize) -> Vec<Vec<f64>> {
    let t = native_taylor(&builder.space, f.part(patch), xi, order);
    physical_derivatives(&builder.domain.patches[patch], xi, &t)
}

/// Reference index (a, b) of native index (i, j).
fn reference_index(sym: Sym, n: usize, i: usize, j: usize) -> (usize, usize) {
    let i = if sym.flip1 { n - 1 - i } else { i };
    let j = if sym.flip2 { n - 1 - j } else { j };
    if sym.swap {
        (j, i)
    } else {
        (i, j)
    }
}

/// True when the function has a coefficient within `depth` rows of the
/// reference edge u1 = 0 of `patch`.
fn touches(f: &IsoFunction, patch: usize, sym: Sym, n: usize, depth: usize) -> bool {
    f.part(patch).is_some_and(|part| part.nonzeros().any(|(i, j, _)| reference_index(sym, n, i, j).0 <= depth))
}

/// Divides per-order maxima of residuals by (1 + M) d^l, where d is the
/// derivative scale p/h of the splines and M the largest dimensionless
/// magnitude mags[l] / d^l over all orders.
fn normalize(res: &mut [f64], mags: &[f64], d: f64) {
    let m = mags.iter().enumerate().map(|(l, &v)| v / d.powi(l as i32)).fold(0.0, f64::max);
    for (l, r) in res.iter_mut().enumerate() {
        *r /= (1.0 + m) * d.powi(l as i32);
    }
}

fn samples(count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |q| if count == 1 { 0.5 } else { q as f64 / (count - 1) as f64 })
}

/// Smoothness oracles bound to one builder.
pub struct Verifier<'a> {
    pub builder: &'a Builder<'a>,
    jets: Vec<Option<Vec<(RationalJet, RationalJet)>>>,
}

impl<'a> Verifier<'a> {
    pub fn new(builder: &'a Builder<'a>) -> Self {
        let s = builder.params.s;
        let jets = builder
            .edges
            .iter()
            .map(|e| e.as_ref().map(|ed| jets_recursive(&ed.gluing, s)))
            .collect();
        Verifier { builder, jets }
    }

    /// Derivative scale p/h of the splines in parameter space.
    pub fn param_scale(&self) -> f64 {
        (self.builder.params.p * (self.builder.params.k + 1)) as f64
    }

    /// Derivative scale p/h over the physical length of an edge.
    pub fn physical_scale(&self, edge: usize) -> f64 {
        let g = &self.builder.edge_data(edge).frame.geometry[0];
        let (a, b) = (g.eval([0.0, 0.0]), g.eval([0.0, 1.0]));
        self.param_scale() / (a[0] - b[0]).hypot(a[1] - b[1])
    }

    fn relevant(&self, f: &IsoFunction, edge: usize) -> bool {
        let ed = self.builder.edge_data(edge);
        let (n, s) = (self.builder.params.n(), self.builder.params.s);
        (0..2).any(|t| touches(f, ed.frame.patches[t], ed.frame.syms[t], n, s))
    }

    /// Interface jet matching on every inner edge: per order l = 0..=s the
    /// largest |gs_residual| over the samples, relative to the derivative
    /// scale of the function on that edge (see `normalize`). Term
    /// magnitudes are absolute sums over the active basis functions.
    pub fn jet_smoothness_check(&self, f: &IsoFunction, samples_per_edge: usize) -> Vec<EdgeResiduals> {
        let s = self.builder.params.s;
        let space = &self.builder.space;
        let mut out = Vec::new();
        for edge in self.builder.topo.inner_edges() {
            let mut res = vec![0.0; s + 1];
            if self.relevant(f, edge) {
                let ed = self.builder.edge_data(edge);
                let jets = self.jets[edge].as_ref().unwrap();
                let [(p0, y0), (p1, y1)] = [0, 1].map(|t| (ed.frame.patches[t], ed.frame.syms[t]));
                let mut mags = vec![0.0_f64; s + 1];
                for x in samples(samples_per_edge) {
                    for l in 0..=s {
                        let (v, _) = gs_residual(
                            jets,
                            l,
                            x,
                            |s1, s2| f.eval_reference(space, p0, y0, [0.0, x], s1, s2),
                            |k| f.eval_reference(space, p1, y1, [0.0, x], k, 0),
                        );
                        // Scale from absolute sums so that cancellation
                        // inside each derivative is accounted for.
                        let (_, mag) = gs_residual(
                            jets,
                            l,
                            x,
                            |s1, s2| f.eval_reference_bound(space, p0, y0, [0.0, x], s1, s2),
                            |k| f.eval_reference_bound(space, p1, y1, [0.0, x], k, 0),
                        );
                        res[l] = f64::max(res[l], v.abs());
                        mags[l] = mags[l].max(mag);
                    }
                }
                normalize(&mut res, &mags, self.param_scale());
            }
            out.push(EdgeResiduals { edge, residuals: res });
        }
        out
    }

    /// Trace functions f_l (l = 0..=s) of one side at x, by the recursion
    /// f_l = alpha^-l (d1^l f - sum_{i<l} C(l,i) beta^(l-i) alpha^i d^(l-i) f_i).
    /// Also returns per l the largest summand magnitude divided by |alpha|^l.
    pub fn traces(&self, f: &IsoFunction, edge: usize, tau: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        let s = self.builder.params.s;
        let ed = self.builder.edge_data(edge);
        let (patch, sym) = (ed.frame.patches[tau], ed.frame.syms[tau]);
        let space = &self.builder.space;
        let alpha = Series1::poly_at(ed.gluing.alpha(tau), x, s);
        let beta = Series1::poly_at(ed.gluing.beta_side(tau), x, s);
        let mut fs: Vec<Series1> = Vec::new();
        let mut mags = Vec::new();
        for l in 0..=s {
            let m = s - l;
            let g = Series1(
                (0..=m)
                    .map(|k| f.eval_reference(space, patch, sym, [0.0, x], l, k) / factorial(k))
                    .collect(),
            );
            let mut mag = g.0[0].abs();
            let mut acc = g;
            for (i, fi) in fs.iter().enumerate() {
                let mut d = fi.clone();
                for _ in 0..l - i {
                    d = d.deriv();
                }
                let term = beta.powi(l - i).mul(&alpha.powi(i)).mul(&d).scale(binom(l, i));
                mag = mag.max(term.0[0].abs());
                acc = acc.sub(&term);
            }
            let fl = acc.mul(&alpha.powi(l).truncate(m).recip());
            mags.push(mag / alpha.0[0].abs().powi(l as i32));
            fs.push(fl.truncate(m));
        }
        (fs.iter().map(|q| q.0[0]).collect(), mags)
    }

    /// Trace equality f_l^(i0) = f_l^(i1) on every inner edge; residual
    /// relative to the derivative scale of the recursion summands.
    pub fn trace_check(&self, f: &IsoFunction, samples_per_edge: usize) -> Vec<EdgeResiduals> {
        let s = self.builder.params.s;
        let mut out = Vec::new();
        for edge in self.builder.topo.inner_edges() {
            let mut res = vec![0.0; s + 1];
            if self.relevant(f, edge) {
                let mut mags = vec![0.0_f64; s + 1];
                for x in samples(samples_per_edge) {
                    let (t0, m0) = self.traces(f, edge, 0, x);
                    let (t1, m1) = self.traces(f, edge, 1, x);
                    for l in 0..=s {
                        res[l] = f64::max(res[l], (t0[l] - t1[l]).abs());
                        mags[l] = mags[l].max(m0[l]).max(m1[l]);
                    }
                }
                normalize(&mut res, &mags, self.param_scale());
            }
            out.push(EdgeResiduals { edge, residuals: res });
        }
        out
    }

    /// Physical derivative jumps of total order l = 0..=s across every
    /// inner edge, relative to the physical derivative scale.
    pub fn physical_jet_check(&self, f: &IsoFunction, samples_per_edge: usize) -> Vec<EdgeResiduals> {
        let s = self.builder.params.s;
        let mut out = Vec::new();
        for edge in self.builder.topo.inner_edges() {
            let mut res = vec![0.0; s + 1];
            if self.relevant(f, edge) {
                let ed = self.builder.edge_data(edge);
                let mut mags = vec![0.0_f64; s + 1];
                for x in samples(samples_per_edge) {
                    let d: Vec<Vec<Vec<f64>>> = (0..2)
                        .map(|t| {
                            let xi = ed.frame.syms[t].apply([0.0, x]);
                            physical_jet(self.builder, f, ed.frame.patches[t], xi, s)
                        })
                        .collect();
                    for l in 0..=s {
                        for a in 0..=l {
                            let (u, v) = (d[0][a][l - a], d[1][a][l - a]);
                            res[l] = f64::max(res[l], (u - v).abs());
                            mags[l] = mags[l].max(u.abs()).max(v.abs());
                        }
                    }
                }
                normalize(&mut res, &mags, self.physical_scale(edge));
            }
            out.push(EdgeResiduals { edge, residuals: res });
        }
        out
    }

    /// Physical derivatives of order <= 2s at a vertex through each incident
    /// patch.
    pub fn vertex_jets(&self, f: &IsoFunction, vertex: usize, order: usize) -> Vec<Vec<Vec<f64>>> {
        let vx = &self.builder.topo.vertices[vertex];
        vx.patches
            .iter()
            .map(|&(patch, corner)| {
                physical_jet(self.builder, f, patch, crate::multipatch::CORNER_PARAMS[corner], order)
            })
            .collect()
    }

    /// Finite-difference check across one inner edge in physical space;
    /// mismatches relative to the physical derivative scale.
    pub fn physical_fd_check(&self, f: &IsoFunction, edge: usize, num_samples: usize, steps: &[f64]) -> FdReport {
        let b = self.builder;
        let s = b.params.s;
        let ed = b.edge_data(edge);
        let diam = b.domain.diameter();
        let k = b.params.k + 1;
        let mut res = vec![0.0; s + 1];
        let mut mags = vec![0.0_f64; s + 1];
        let (mut skipped, mut evaluated) = (0, 0);
        let g0 = &ed.frame.geometry[0];
        let g1 = &ed.frame.geometry[1];
        // Sample at element midpoints along the edge.
        let xs: Vec<f64> = (0..num_samples)
            .map(|q| {
                let m = (q * k) / num_samples.max(1);
                (m as f64 + 0.5 + 0.25 * ((q % 3) as f64 - 1.0)) / k as f64
            })
            .collect();
        for x in xs {
            let point = g0.eval([0.0, x]);
            let j0 = g0.jacobian([0.0, x]);
            let tangent = [j0[0][1], j0[1][1]];
            let tn = tangent[0].hypot(tangent[1]);
            let mut nu = [-tangent[1] / tn, tangent[0] / tn];
            let into1 = g1.jacobian([0.0, x]);
            if nu[0] * into1[0][0] + nu[1] * into1[1][0] < 0.0 {
                nu = [-nu[0], -nu[1]];
            }
            let c = std::f64::consts::FRAC_1_SQRT_2;
            let dirs = [nu, [c * (nu[0] - nu[1]), c * (nu[0] + nu[1])], [c * (nu[0] + nu[1]), c * (nu[1] - nu[0])]];
            let mut sample_res = vec![0.0; s + 1];
            let mut sample_mag = vec![0.0_f64; s + 1];
            let mut ok = true;
            'dirs: for d in dirs {
                for l in 0..=s {
                    let m = l + 2;
                    let w = fornberg(m, l);
                    let mut est = [Vec::new(), Vec::new()];
                    for (side, sign) in [(0usize, -1.0), (1usize, 1.0)] {
                        let patch = ed.frame.patches[side];
                        for &st in steps {
                            let hs = st * diam;
                            let mut acc = 0.0;
                            for (t, wt) in w.iter().enumerate() {
                                let pt = [
                                    point[0] + sign * t as f64 * hs * d[0],
                                    point[1] + sign * t as f64 * hs * d[1],
                                ];
                                match self.eval_physical(f, patch, pt) {
                                    Some(v) => acc += wt * v,
                                    None => {
                                        ok = false;
                                        break 'dirs;
                                    }
                                }
                            }
                            let val = acc / hs.powi(l as i32) * if side == 0 && l % 2 == 1 { -1.0 } else { 1.0 };
                            est[side].push(val);
                        }
                    }
                    let q = (m + 1 - l) as i32;
                    let (r0, r1) = (richardson(&est[0], q), richardson(&est[1], q));
                    sample_res[l] = f64::max(sample_res[l], (r0 - r1).abs());
                    sample_mag[l] = sample_mag[l].max(r0.abs()).max(r1.abs());
                }
            }
            if ok {
                evaluated += 1;
                for l in 0..=s {
                    res[l] = f64::max(res[l], sample_res[l]);
                    mags[l] = f64::max(mags[l], sample_mag[l]);
                }
            } else {
                skipped += 1;
            }
        }
        normalize(&mut res, &mags, self.physical_scale(edge));
        FdReport { edge, residuals: res, skipped, evaluated }
    }

    /// phi at a physical point through a given patch, None if the point is
    /// outside that patch.
    pub fn eval_physical(&self, f: &IsoFunction, patch: usize, x: Point) -> Option<f64> {
        let xi = self.builder.domain.patches[patch].invert(x).ok()?;
        let xi = [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)];
        Some(f.eval_patch(&self.builder.space, patch, xi, 0, 0))
    }

    /// Runs the jet check on all functions of a space, and the
    /// finite-difference check on a seeded random subsample.
    pub fn check_space(&self, space: &SmoothSpace, opts: &CheckOptions) -> SpaceCheck {
        let jet: Vec<Vec<EdgeResiduals>> = space
            .functions
            .par_iter()
            .map(|f| self.jet_smoothness_check(f, opts.samples))
            .collect();
        let mut rows: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for (fi, reps) in jet.iter().enumerate() {
            for rep in reps {
                for (l, &r) in rep.residuals.iter().enumerate() {
                    let e = rows.entry((rep.edge, l)).or_insert((0.0, fi));
                    if r > e.0 {
                        *e = (r, fi);
                    }
                }
            }
        }
        let mut fd_rows: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        let mut fd_skipped = 0;
        let mut fd_checked = 0;
        if opts.fd_fraction > 0.0 && !space.functions.is_empty() {
            let count = ((space.functions.len() as f64 * opts.fd_fraction).ceil() as usize).min(space.functions.len());
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked: Vec<usize> = sample(&mut rng, space.functions.len(), count).into_vec();
            picked.sort_unstable();
            fd_checked = picked.len();
            let reports: Vec<(usize, Vec<FdReport>)> = picked
                .par_iter()
                .map(|&fi| {
                    let f = &space.functions[fi];
                    let reps = self
                        .builder
                        .topo
                        .inner_edges()
                        .filter(|&e| self.relevant(f, e))
                        .map(|e| self.physical_fd_check(f, e, opts.fd_samples, &FD_STEPS))
                        .collect();
                    (fi, reps)
                })
                .collect();
            for (fi, reps) in reports {
                for rep in reps {
                    fd_skipped += rep.skipped;
                    for (l, &r) in rep.residuals.iter().enumerate() {
                        let e = fd_rows.entry((rep.edge, l)).or_insert((0.0, fi));
                        if r > e.0 {
                            *e = (r, fi);
                        }
                    }
                }
            }
        }
        SpaceCheck { jet: rows, fd: fd_rows, fd_skipped, fd_checked, num_functions: space.functions.len() }
    }
}

/// Options of `Verifier::check_space`.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub samples: usize,
    /// Fraction of functions receiving the finite-difference check.
    pub fd_fraction: f64,
    pub fd_samples: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { samples: EDGE_SAMPLES, fd_fraction: 0.0, fd_samples: 4, seed: 0x5eed }
    }
}

/// Worst residual per (edge, order) with the function attaining it.
#[derive(Debug, Clone)]
pub struct SpaceCheck {
    pub jet: BTreeMap<(usize, usize), (f64, usize)>,
    pub fd: BTreeMap<(usize, usize), (f64, usize)>,
    pub fd_skipped: usize,
    pub fd_checked: usize,
    pub num_functions: usize,
}

impl SpaceCheck {
    pub fn jet_max(&self) -> f64 {
        self.jet.values().map(|v| v.0).fold(0.0, f64::max)
    }

    pub fn fd_max(&self) -> f64 {
        self.fd.values().map(|v| v.0).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.jet_max() <= JET_TOL && self.fd_max() <= FD_TOL
    }

    /// Failing (check, edge, order, residual, function) entries.
    pub fn failures(&self) -> Vec<(&'static str, usize, usize, f64, usize)> {
        let mut out = Vec::new();
        for (&(e, l), &(r, f)) in &self.jet {
            if r > JET_TOL {
                out.push(("jet", e, l, r, f));
            }
        }
        for (&(e, l), &(r, f)) in &self.fd {
            if r > FD_TOL {
                out.push(("fd", e, l, r, f));
            }
        }
        out
    }

    /// CSV table `check,edge,order,max_residual,worst_function`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,edge,order,max_residual,worst_function\n");
        for (name, map) in [("jet", &self.jet), ("fd", &self.fd)] {
            for (&(e, l), &(r, f)) in map {
                let _ = writeln!(s, "{name},{e},{l},{r:.16e},{f}");
            }
        }
        s
    }
}

/// Richardson extrapolation of estimates at steps h, h/2, h/4, ... with
/// leading error order q.
fn richardson(est: &[f64], q: i32) -> f64 {
    let mut row = est.to_vec();
    let mut order = q;
    while row.len() > 1 {
        let f = 2f64.powi(order);
        row = row.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        order += 1;
    }
    row[0]
}

/// Weights of the one-sided stencil on nodes 0..=m for the derivative of
/// order `d` at 0 (unit spacing), by Fornberg's recursion.
pub fn fornberg(m: usize, d: usize) -> Vec<f64> {
    let mut c = vec![vec![vec![0.0; m + 1]; m + 1]; d + 1];
    c[0][0][0] = 1.0;
    let mut c1 = 1.0;
    for n in 1..=m {
        let xn = n as f64;
        let mut c2 = 1.0;
        for nu in 0..n {
            let c3 = xn - nu as f64;
            c2 *= c3;
            for k in 0..=d.min(n) {
                let prev = if k > 0 { c[k - 1][n - 1][nu] } else { 0.0 };
                c[k][n][nu] = (xn * c[k][n - 1][nu] - k as f64 * prev) / c3;
            }
        }
        for k in 0..=d.min(n) {
            let prev = if k > 0 { c[k - 1][n - 1][n - 1] } else { 0.0 };
            c[k][n][n] = c1 / c2 * (k as f64 * prev - (n - 1) as f64 * c[k][n - 1][n - 1]);
        }
        c1 = c2;
    }
    c[d][m].clone()
}

/// A function that is C^(s-1) but not C^s across an inner edge: a glued
/// edge function plus N_s(u1) N_j(u2) on the second side.
pub fn cs_minus_one_function(builder: &Builder, edge: usize) -> crate::Result<IsoFunction> {
    let s = builder.params.s;
    let n = builder.params.n();
    let nj = builder.params.n_j1(0);
    let mut f = builder.edge_function(edge, 0, nj / 2)?;
    let ed = builder.edge_data(edge);
    let mut ent = f.entries();
    let (i, j) = ed.frame.syms[1].native_index(n, s, n / 2);
    *ent.entry((ed.frame.patches[1], i, j)).or_insert(0.0) += 1.0;
    f = IsoFunction::from_entries(&ent, Provenance::Other { label: format!("c{} edge {edge}", s - 1) });
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::{MultiPatchDomain, Topology};
    use crate::spacebuilder::{Params, Strategy};

    #[test]
    fn fornberg_one_sided_stencils() {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&fornberg(1, 1), &[-1.0, 1.0]));
        assert!(close(&fornberg(2, 1), &[-1.5, 2.0, -0.5]));
        assert!(close(&fornberg(2, 2), &[1.0, -2.0, 1.0]));
        assert!(close(&fornberg(4, 2), &[35.0 / 12.0, -26.0 / 3.0, 19.0 / 2.0, -14.0 / 3.0, 11.0 / 12.0]));
        // Exact on polynomials of degree m: d^3/dx^3 of x^3 is 6.
        let w = fornberg(5, 3);
        let v: f64 = w.iter().enumerate().map(|(i, c)| c * (i as f64).powi(3)).sum();
        assert!((v - 6.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_removes_leading_errors() {
        // Forward differences of exp at 0 with error O(h).
        let est: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|h: &f64| (h.exp() - 1.0) / h).collect();
        assert!((est[0] - 1.0).abs() > 1e-2);
        assert!((richardson(&est, 1) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn truncated_series_arithmetic() {
        let a = Series1(vec![2.0, 1.0, 0.5]);
        let r = a.recip();
        let one = a.mul(&r);
        assert!((one.0[0] - 1.0).abs() < 1e-15 && one.0[1].abs() < 1e-15 && one.0[2].abs() < 1e-15);
        assert_eq!(a.deriv().0, vec![1.0, 1.0]);
        assert_eq!(a.powi(2).0, vec![4.0, 4.0, 3.0]);
        assert_eq!(a.sub(&a.scale(2.0)).0, vec![-2.0, -1.0, -0.5]);
    }

    #[test]
    fn jet_check_separates_smooth_and_broken_functions() {
        let d = MultiPatchDomain::from_toml_str(include_str!("../examples/three_patch_fan.cfg")).unwrap();
        let t = Topology::extract(&d).unwrap();
        for s in 1..=2 {
            let b = Builder::new(&d, &t, Params::at_level(2 * s + 1, s, s, 2).unwrap()).unwrap();
            let v = Verifier::new(&b);
            let w = b.assemble(Strategy::Interpolation).unwrap();
            let report = v.check_space(&w, &CheckOptions { fd_fraction: 0.1, ..Default::default() });
            assert!(report.passed(), "s={s}: jet {:e} fd {:e}", report.jet_max(), report.fd_max());
            assert!(report.fd_checked > 0);
            let e = t.inner_edges().next().unwrap();
            let bad = cs_minus_one_function(&b, e).unwrap();
            let jet = v.jet_smoothness_check(&bad, EDGE_SAMPLES);
            let res = &jet.iter().find(|r| r.edge == e).unwrap().residuals;
            assert!(res[..s].iter().all(|&r| r <= JET_TOL), "{res:?}");
            assert!(res[s] > 1e-3, "{res:?}");
            assert_eq!(jet.iter().find(|r| r.edge == e).unwrap().first_violation(JET_TOL), Some(s));
            let fd = v.physical_fd_check(&bad, e, 4, &FD_STEPS);
            assert!(fd.residuals[s] > FD_TOL);

            // Trace and physical-jet oracles agree with the jet check.
            for f in w.functions.iter().step_by(7) {
                let worst = |reps: Vec<EdgeResiduals>| reps.iter().map(|r| r.max()).fold(0.0, f64::max);
                assert!(worst(v.trace_check(f, 8)) <= JET_TOL, "{}", f.tag);
                assert!(worst(v.physical_jet_check(f, 8)) <= JET_TOL, "{}", f.tag);
            }
            for reps in [v.trace_check(&bad, EDGE_SAMPLES), v.physical_jet_check(&bad, EDGE_SAMPLES)] {
                let rep = reps.iter().find(|r| r.edge == e).unwrap();
                assert_eq!(rep.first_violation(JET_TOL), Some(s), "{:?}", rep.residuals);
            }
        }
    }
}
