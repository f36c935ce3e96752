//! L2 projection onto a smooth space: Gauss quadrature, sparse mass matrix
//! and load vector assembly, sparse Cholesky solve, error norms and the
//! convergence study driver.

use std::collections::HashMap;
use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::bspline::SplineSpace1D;
use crate::error::{Error, Result};
use crate::multipatch::{MultiPatchDomain, Point, Topology};
use crate::spacebuilder::{Builder, IsoFunction, Params, SmoothSpace, Strategy};

/// Gauss-Legendre nodes and weights on [0, 1] with g points.
pub fn gauss_legendre(g: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(g >= 1);
    let mut nodes = vec![0.0; g];
    let mut weights = vec![0.0; g];
    for i in 0..g.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (g as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=g {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pg = if g == 1 { x } else { p1 };
            let pgm1 = if g == 1 { 1.0 } else { p0 };
            dp = g as f64 * (x * pg - pgm1) / (x * x - 1.0);
            let dx = pg / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[g - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[g - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Per-element quadrature on [0, 1]: global points and weights grouped by
/// element.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl QuadratureRule {
    /// Active basis values at every point: (element, point) -> (first, values).
    fn basis_table(&self, space: &SplineSpace1D) -> Vec<Vec<(usize, Vec<f64>)>> {
        self.points
            .iter()
            .map(|pts| {
                pts.iter()
                    .map(|&x| {
                        let (f, mut v) = space.eval_active(x, 0);
                        (f, v.swap_remove(0))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn new(space: &SplineSpace1D, g: usize) -> Self {
        let (x, w) = gauss_legendre(g);
        let h = space.h();
        let ne = space.num_elements();
        let points = (0..ne).map(|m| x.iter().map(|t| (m as f64 + t) * h).collect()).collect();
        let weights = (0..ne).map(|_| w.iter().map(|v| v * h).collect()).collect();
        QuadratureRule { points, weights }
    }
}

/// Univariate moments G[i][j] = int N_i N_j and G1[i][j] = int x N_i N_j,
/// exact with p+2 Gauss points per element.
pub fn univariate_grams(space: &SplineSpace1D) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = space.dim();
    let p = space.degree();
    let rule = QuadratureRule::new(space, p + 2);
    let mut g = vec![vec![0.0; n]; n];
    let mut g1 = vec![vec![0.0; n]; n];
    for (pts, ws) in rule.points.iter().zip(&rule.weights) {
        for (&x, &w) in pts.iter().zip(ws) {
            let (f, v) = space.eval_active(x, 0);
            for a in 0..=p {
                for b in 0..=p {
                    let val = w * v[0][a] * v[0][b];
                    g[f + a][f + b] += val;
                    g1[f + a][f + b] += val * x;
                }
            }
        }
    }
    (g, g1)
}

/// Raw tensor-product mass matrices of every patch, with entry
/// ((i1,j1),(i2,j2)) = sgn (c0 G G + c1 G1 G + c2 G G1).
struct RawMass {
    n: usize,
    p: usize,
    g: Vec<Vec<f64>>,
    g1: Vec<Vec<f64>>,
    det: Vec<[f64; 3]>,
}

impl RawMass {
    fn new(space: &SplineSpace1D, domain: &MultiPatchDomain) -> Self {
        let (g, g1) = univariate_grams(space);
        let det = domain
            .patches
            .iter()
            .map(|pt| {
                let c = pt.det_coeffs();
                let sgn = if pt.det_jacobian([0.5, 0.5]) < 0.0 { -1.0 } else { 1.0 };
                [sgn * c[0], sgn * c[1], sgn * c[2]]
            })
            .collect();
        RawMass { n: space.dim(), p: space.degree(), g, g1, det }
    }

    fn entry(&self, patch: usize, i1: usize, j1: usize, i2: usize, j2: usize) -> f64 {
        let [c0, c1, c2] = self.det[patch];
        let (gi, gj) = (self.g[i1][i2], self.g[j1][j2]);
        c0 * gi * gj + c1 * self.g1[i1][i2] * gj + c2 * gi * self.g1[j1][j2]
    }
}

/// Sparse symmetric mass matrix in upper-triangular triplet form plus its
/// dimension.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    pub dim: usize,
    /// (row, col, value) with row <= col, sorted.
    pub upper: Vec<(usize, usize, f64)>,
}

impl MassMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.upper
            .binary_search_by(|e| (e.0, e.1).cmp(&(a, b)))
            .map_or(0.0, |k| self.upper[k].2)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for &(i, j, v) in &self.upper {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(2 * self.upper.len());
        for &(i, j, v) in &self.upper {
            trip.push(Triplet::new(i, j, v));
            if i != j {
                trip.push(Triplet::new(j, i, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.dim, self.dim, &trip)
            .map_err(|e| Error::Solver(format!("sparse matrix creation failed: {e:?}")))
    }

    /// Dense copy (for small problems and tests).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for &(i, j, v) in &self.upper {
            m[i][j] = v;
            m[j][i] = v;
        }
        m
    }
}

/// Native coefficient entries of a function on one patch.
fn part_entries(f: &IsoFunction, patch: usize) -> Vec<(usize, usize, f64)> {
    f.part(patch).map_or_else(Vec::new, |p| p.nonzeros().collect())
}

/// Assembles M_{fg} = sum_P int f_P g_P |det JF_P| exactly.
pub fn assemble_mass(space: &SmoothSpace, spline: &SplineSpace1D, domain: &MultiPatchDomain) -> MassMatrix {
    let raw = RawMass::new(spline, domain);
    let (n, p) = (raw.n, raw.p);
    // Inverse index: native position -> functions with a nonzero there.
    let mut index: HashMap<(usize, usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in space.functions.iter().enumerate() {
        for part in &f.parts {
            for (i, j, _) in part.nonzeros() {
                index.entry((part.patch, i, j)).or_default().push(fi);
            }
        }
    }
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..space.functions.len())
        .into_par_iter()
        .map(|fi| {
            let f = &space.functions[fi];
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for part in &f.parts {
                let patch = part.patch;
                let ent = part_entries(f, patch);
                // w = M_raw c_f over the band around the support.
                let i_lo = part.i0.saturating_sub(p);
                let j_lo = part.j0.saturating_sub(p);
                let i_hi = (part.i0 + part.rows + p).min(n);
                let j_hi = (part.j0 + part.cols + p).min(n);
                let wc = j_hi - j_lo;
                let mut w = vec![0.0; (i_hi - i_lo) * wc];
                for &(i1, j1, c) in &ent {
                    for i2 in i1.saturating_sub(p)..(i1 + p + 1).min(n) {
                        for j2 in j1.saturating_sub(p)..(j1 + p + 1).min(n) {
                            w[(i2 - i_lo) * wc + (j2 - j_lo)] += c * raw.entry(patch, i1, j1, i2, j2);
                        }
                    }
                }
                let mut touched: Vec<usize> = Vec::new();
                for i2 in i_lo..i_hi {
                    for j2 in j_lo..j_hi {
                        if let Some(list) = index.get(&(patch, i2, j2)) {
                            touched.extend(list.iter().copied().filter(|&g| g >= fi));
                        }
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                for g in touched {
                    let gp = space.functions[g].part(patch).unwrap();
                    let mut dot = 0.0;
                    for (i2, j2, c) in gp.nonzeros() {
                        if (i_lo..i_hi).contains(&i2) && (j_lo..j_hi).contains(&j2) {
                            dot += c * w[(i2 - i_lo) * wc + (j2 - j_lo)];
                        }
                    }
                    *acc.entry(g).or_insert(0.0) += dot;
                }
            }
            let mut row: Vec<(usize, usize, f64)> =
                acc.into_iter().filter(|(_, v)| *v != 0.0).map(|(g, v)| (fi, g, v)).collect();
            row.sort_unstable_by_key(|e| e.1);
            row
        })
        .collect();
    MassMatrix { dim: space.functions.len(), upper: rows.into_iter().flatten().collect() }
}

/// Raw load moments R_P[i][j] = int N_i N_j z(F_P) |det JF_P| with p+3 Gauss
/// points per element and direction.
fn raw_loads<Z: Fn(Point) -> f64 + Sync>(spline: &SplineSpace1D, domain: &MultiPatchDomain, z: &Z) -> Vec<Vec<f64>> {
    let n = spline.dim();
    let p = spline.degree();
    let rule = QuadratureRule::new(spline, p + 3);
    let table = rule.basis_table(spline);
    domain
        .patches
        .par_iter()
        .map(|pt| {
            let mut r = vec![0.0; n * n];
            let sgn = if pt.det_jacobian([0.5, 0.5]) < 0.0 { -1.0 } else { 1.0 };
            for (m1, (px, wx)) in rule.points.iter().zip(&rule.weights).enumerate() {
                for (m2, (py, wy)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    for (q1, (&x, &ax)) in px.iter().zip(wx).enumerate() {
                        let (f1, v1) = &table[m1][q1];
                        for (q2, (&y, &ay)) in py.iter().zip(wy).enumerate() {
                            let (f2, v2) = &table[m2][q2];
                            let w = ax * ay * sgn * pt.det_jacobian([x, y]) * z(pt.eval([x, y]));
                            for a in 0..=p {
                                let wa = w * v1[a];
                                for b in 0..=p {
                                    r[(f1 + a) * n + f2 + b] += wa * v2[b];
                                }
                            }
                        }
                    }
                }
            }
            r
        })
        .collect()
}

/// Load vector b_f = int phi_f z.
pub fn assemble_load<Z: Fn(Point) -> f64 + Sync>(
    space: &SmoothSpace,
    spline: &SplineSpace1D,
    domain: &MultiPatchDomain,
    z: &Z,
) -> Vec<f64> {
    let n = spline.dim();
    let raw = raw_loads(spline, domain, z);
    space
        .functions
        .par_iter()
        .map(|f| {
            f.parts
                .iter()
                .map(|part| part.nonzeros().map(|(i, j, c)| c * raw[part.patch][i * n + j]).sum::<f64>())
                .sum()
        })
        .collect()
}

/// A fitted isogeometric function stored as dense native coefficients per
/// patch.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub n: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl Approximation {
    pub fn from_combination(space: &SmoothSpace, c: &[f64]) -> Self {
        let n = space.n();
        let mut coeffs = vec![vec![0.0; n * n]; space.num_patches];
        for (f, &cf) in space.functions.iter().zip(c) {
            for part in &f.parts {
                for (i, j, v) in part.nonzeros() {
                    coeffs[part.patch][i * n + j] += cf * v;
                }
            }
        }
        Approximation { n, coeffs }
    }

    pub fn eval_patch(&self, spline: &SplineSpace1D, patch: usize, xi: [f64; 2]) -> f64 {
        let p = spline.degree();
        let (f1, v1) = spline.eval_active(xi[0], 0);
        let (f2, v2) = spline.eval_active(xi[1], 0);
        let c = &self.coeffs[patch];
        let mut acc = 0.0;
        for a in 0..=p {
            for b in 0..=p {
                acc += c[(f1 + a) * self.n + f2 + b] * v1[0][a] * v2[0][b];
            }
        }
        acc
    }
}

/// Absolute L2 errors ||u - z|| and norms ||z|| with p+3 Gauss points.
pub fn l2_error<Z: Fn(Point) -> f64 + Sync>(
    approx: &Approximation,
    spline: &SplineSpace1D,
    domain: &MultiPatchDomain,
    z: &Z,
) -> (f64, f64) {
    let p = spline.degree();
    let rule = QuadratureRule::new(spline, p + 3);
    let table = rule.basis_table(spline);
    let parts: Vec<(f64, f64)> = (0..domain.patches.len())
        .into_par_iter()
        .map(|patch| {
            let pt = &domain.patches[patch];
            let (mut e2, mut z2) = (0.0, 0.0);
            for (m1, (px, wx)) in rule.points.iter().zip(&rule.weights).enumerate() {
                for (m2, (py, wy)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    for (q1, (&x, &ax)) in px.iter().zip(wx).enumerate() {
                        let (f1, v1) = &table[m1][q1];
                        for (q2, (&y, &ay)) in py.iter().zip(wy).enumerate() {
                            let (f2, v2) = &table[m2][q2];
                            let w = ax * ay * pt.det_jacobian([x, y]).abs();
                            let zv = z(pt.eval([x, y]));
                            let c = &approx.coeffs[patch];
                            let mut u = 0.0;
                            for a in 0..=p {
                                for b in 0..=p {
                                    u += c[(f1 + a) * approx.n + f2 + b] * v1[a] * v2[b];
                                }
                            }
                            let d = u - zv;
                            e2 += w * d * d;
                            z2 += w * zv * zv;
                        }
                    }
                }
            }
            (e2, z2)
        })
        .collect();
    let (e2, z2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (e2.sqrt(), z2.sqrt())
}

/// Outcome of an L2 projection.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coeffs: Vec<f64>,
    pub abs_error: f64,
    /// ||z_h - z|| / ||z|| (the absolute error when z = 0).
    pub rel_error: f64,
    pub h: f64,
    pub ndof: usize,
    /// ||b - M c||_inf / ||b||_inf after the solve.
    pub residual: f64,
    pub approximation: Approximation,
}

/// Solves M c = b by sparse Cholesky.
pub fn solve_spd(m: &MassMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if m.dim == 0 {
        return Ok(vec![]);
    }
    let a = m.to_faer()?;
    let llt = a.sp_cholesky(Side::Lower).map_err(|e| {
        Error::Solver(format!("mass matrix is not positive definite ({e:?}); the basis may be dependent"))
    })?;
    let rhs = Mat::from_fn(m.dim, 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    Ok((0..m.dim).map(|i| x[(i, 0)]).collect())
}

/// L2 projection of z onto the space.
pub fn l2_fit<Z: Fn(Point) -> f64 + Sync>(
    space: &SmoothSpace,
    domain: &MultiPatchDomain,
    z: &Z,
) -> Result<FitResult> {
    let p = space.params;
    let spline = SplineSpace1D::new(p.p, p.r as i32, p.k)?;
    let m = assemble_mass(space, &spline, domain);
    let b = assemble_load(space, &spline, domain, z);
    let c = solve_spd(&m, &b)?;
    let mc = m.mul_vec(&c);
    let bmax = b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let rmax = b.iter().zip(&mc).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
    let residual = if bmax > 0.0 { rmax / bmax } else { rmax };
    let approximation = Approximation::from_combination(space, &c);
    let (err, norm) = l2_error(&approximation, &spline, domain, z);
    Ok(FitResult {
        rel_error: if norm > 0.0 { err / norm } else { err },
        abs_error: err,
        coeffs: c,
        h: p.h(),
        ndof: space.dim(),
        residual,
        approximation,
    })
}

/// One level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub ndof: usize,
    pub rel_error: f64,
    /// log2(e_{L-1} / e_L), absent on the first level.
    pub order: Option<f64>,
}

/// Result of a convergence study; `failure` holds the first level that
/// could not be computed.
#[derive(Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub failure: Option<(u32, Error)>,
}

impl ConvergenceTable {
    /// CSV with header `h,ndof,rel_l2_error,empirical_order`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,ndof,rel_l2_error,empirical_order\n");
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.16e}"));
            let _ = writeln!(s, "{:.16e},{},{:.16e},{}", r.h, r.ndof, r.rel_error, order);
        }
        s
    }

    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

/// Fits z on levels h = 2^-L and reports errors and empirical orders.
pub fn convergence_study<Z: Fn(Point) -> f64 + Sync>(
    domain: &MultiPatchDomain,
    p: usize,
    r: usize,
    s: usize,
    levels: &[u32],
    strategy: Strategy,
    z: &Z,
) -> Result<ConvergenceTable> {
    let topo = Topology::extract(domain)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &level in levels {
        let step = || -> Result<ConvergenceRow> {
            let params = Params::at_level(p, r, s, level)?;
            let builder = Builder::new(domain, &topo, params)?;
            let space = builder.assemble(strategy)?;
            let fit = l2_fit(&space, domain, z)?;
            Ok(ConvergenceRow { level, h: params.h(), ndof: fit.ndof, rel_error: fit.rel_error, order: None })
        };
        match step() {
            Ok(mut row) => {
                if let Some(prev) = rows.last() {
                    if prev.level + 1 == level && row.rel_error > 0.0 {
                        row.order = Some((prev.rel_error / row.rel_error).log2());
                    }
                }
                log::info!("level {level}: ndof {} error {:.3e}", row.ndof, row.rel_error);
                rows.push(row);
            }
            Err(e) => return Ok(ConvergenceTable { rows, failure: Some((level, e)) }),
        }
    }
    Ok(ConvergenceTable { rows, failure: None })
}

/// The smooth test field 4 cos(2 x1) sin(2 x2).
pub fn trig_field(x: Point) -> f64 {
    4.0 * (2.0 * x[0]).cos() * (2.0 * x[1]).sin()
}
