//! Univariate B-spline spaces on uniform open knot vectors and their
//! per-element Bernstein (Bezier) representation.

use crate::error::{Error, Result};

/// Binomial coefficient as a float.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Factorial as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// Univariate spline space S_h^{p,r} on [0,1] with `k` uniformly spaced
/// inner knots of multiplicity `p - r`.
#[derive(Debug, Clone)]
pub struct SplineSpace1D {
    p: usize,
    r: i32,
    k: usize,
    n: usize,
    /// Per element: row-major (p+1)x(p+1) map from local B-spline
    /// coefficients to Bernstein coefficients.
    extraction: Vec<Vec<f64>>,
    /// Per element: inverse of `extraction`.
    inverse: Vec<Vec<f64>>,
}

impl SplineSpace1D {
    /// Builds S_h^{p,r} with h = 1/(k+1).
    pub fn new(p: usize, r: i32, k: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::Parameter(format!("degree must be >= 1, got {p}")));
        }
        if r < -1 || r >= p as i32 {
            return Err(Error::Parameter(format!(
                "regularity must satisfy -1 <= r <= p-1, got r={r} for p={p}"
            )));
        }
        let n = p + 1 + k * (p as i32 - r) as usize;
        let mut space = SplineSpace1D {
            p,
            r,
            k,
            n,
            extraction: Vec::new(),
            inverse: Vec::new(),
        };
        assert_eq!(space.n, space.knots().len() - p - 1);
        space.build_extraction();
        Ok(space)
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn regularity(&self) -> i32 {
        self.r
    }

    pub fn inner_knots(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_elements(&self) -> usize {
        self.k + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.k + 1) as f64
    }

    /// Breakpoint m/(k+1); computed the same way everywhere so that equal
    /// breakpoints compare equal across refinement levels.
    pub fn breakpoint(&self, m: usize) -> f64 {
        m as f64 / (self.k + 1) as f64
    }

    /// Full open knot vector.
    pub fn knots(&self) -> Vec<f64> {
        let mult = (self.p as i32 - self.r) as usize;
        let mut t = vec![0.0; self.p + 1];
        for m in 1..=self.k {
            t.extend(std::iter::repeat_n(self.breakpoint(m), mult));
        }
        t.extend(std::iter::repeat_n(1.0, self.p + 1));
        t
    }

    /// Index of the first basis function active on element `m`.
    pub fn first_active(&self, m: usize) -> usize {
        m * (self.p as i32 - self.r) as usize
    }

    /// Element containing `x`, right-continuous at inner knots and closed
    /// at x = 1.
    pub fn element_of(&self, x: f64) -> usize {
        let d = (self.k + 1) as f64;
        let mut m = (x * d).floor().max(0.0) as usize;
        m = m.min(self.k);
        if m < self.k && self.breakpoint(m + 1) <= x {
            m += 1;
        }
        if m > 0 && self.breakpoint(m) > x {
            m -= 1;
        }
        m
    }

    /// Value of the d-th derivative of N_j at x.
    pub fn eval(&self, j: usize, x: f64, d: usize) -> Result<f64> {
        if j >= self.n {
            return Err(Error::Parameter(format!("basis index {j} out of range 0..{}", self.n)));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Parameter(format!("evaluation point {x} outside [0,1]")));
        }
        let (first, vals) = self.eval_active(x, d);
        if j >= first && j < first + self.p + 1 {
            Ok(vals[d][j - first])
        } else {
            Ok(0.0)
        }
    }

    /// Derivatives of order 0..=d of all basis functions active at x.
    /// Returns the first active index and rows `ders[q][a]` for function
    /// `first + a`.
    pub fn eval_active(&self, x: f64, d: usize) -> (usize, Vec<Vec<f64>>) {
        let m = self.element_of(x);
        let first = self.first_active(m);
        let local = self.local_bernstein_ders(m, x, d);
        // Map Bernstein derivative values through the extraction matrix.
        let p = self.p;
        let c = &self.extraction[m];
        let mut out = vec![vec![0.0; p + 1]; d + 1];
        for q in 0..=d {
            for a in 0..=p {
                let mut v = 0.0;
                for i in 0..=p {
                    v += c[i * (p + 1) + a] * local[q][i];
                }
                out[q][a] = v;
            }
        }
        (first, out)
    }

    /// Derivatives of the Bernstein basis of element m at global x.
    fn local_bernstein_ders(&self, m: usize, x: f64, d: usize) -> Vec<Vec<f64>> {
        let h = self.h();
        let t = (x - self.breakpoint(m)) / h;
        let p = self.p;
        let mut out = vec![vec![0.0; p + 1]; d + 1];
        for (q, row) in out.iter_mut().enumerate() {
            if q > p {
                break;
            }
            // d^q/dt^q B_i^p = p!/(p-q)! sum_j (-1)^(q-j) C(q,j) B_{i-j}^{p-q}
            let low = bernstein_all(p - q, t);
            let scale = factorial(p) / factorial(p - q) / h.powi(q as i32);
            for (i, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..=q {
                    if i >= j && i - j <= p - q {
                        let sign = if (q - j) % 2 == 0 { 1.0 } else { -1.0 };
                        acc += sign * binom(q, j) * low[i - j];
                    }
                }
                *v = scale * acc;
            }
        }
        out
    }

    /// Exact conversion of a spline to per-element Bernstein form.
    pub fn to_bezier(&self, coeffs: &[f64]) -> PiecewisePoly {
        assert_eq!(coeffs.len(), self.n);
        let p = self.p;
        let elems = (0..=self.k)
            .map(|m| {
                let first = self.first_active(m);
                let c = &self.extraction[m];
                (0..=p)
                    .map(|i| (0..=p).map(|a| c[i * (p + 1) + a] * coeffs[first + a]).sum())
                    .collect()
            })
            .collect();
        PiecewisePoly { p, k: self.k, elems }
    }

    /// Spline coefficients of a piecewise polynomial that lies in this space.
    pub fn from_bezier(&self, pp: &PiecewisePoly) -> Result<Vec<f64>> {
        let pp = if pp.p < self.p {
            pp.elevate_to(self.p)
        } else if pp.p > self.p {
            return Err(Error::Parameter(format!(
                "piecewise degree {} exceeds space degree {}",
                pp.p, self.p
            )));
        } else {
            pp.clone()
        };
        if pp.k != self.k {
            return Err(Error::Parameter(format!(
                "element count mismatch: {} vs {}",
                pp.k + 1,
                self.k + 1
            )));
        }
        pp.check_continuity(self.r, 1e-9)?;
        let p = self.p;
        let mut acc = vec![0.0; self.n];
        let mut cnt = vec![0usize; self.n];
        for m in 0..=self.k {
            let first = self.first_active(m);
            let inv = &self.inverse[m];
            for a in 0..=p {
                let v: f64 = (0..=p).map(|i| inv[a * (p + 1) + i] * pp.elems[m][i]).sum();
                acc[first + a] += v;
                cnt[first + a] += 1;
            }
        }
        Ok(acc.iter().zip(&cnt).map(|(v, &c)| v / c as f64).collect())
    }

    /// Bernstein coefficients of every basis function restricted to element
    /// `m`: entry `[i*(p+1)+a]` is coefficient i of function first_active(m)+a.
    pub fn extraction(&self, m: usize) -> &[f64] {
        &self.extraction[m]
    }

    fn build_extraction(&mut self) {
        let p = self.p;
        let mut ext = vec![vec![0.0; (p + 1) * (p + 1)]; self.k + 1];
        if self.r < 0 {
            for em in ext.iter_mut() {
                for i in 0..=p {
                    em[i * (p + 1) + i] = 1.0;
                }
            }
            self.inverse = ext.clone();
            self.extraction = ext;
            return;
        }
        for j in 0..self.n {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            let bez = self.insert_to_bezier(&e);
            for (m, em) in ext.iter_mut().enumerate() {
                let first = self.first_active(m);
                if j >= first && j <= first + p {
                    for i in 0..=p {
                        em[i * (p + 1) + (j - first)] = bez[m * p + i];
                    }
                }
            }
        }
        self.inverse = ext.iter().map(|c| invert_dense(c, p + 1)).collect();
        self.extraction = ext;
    }

    /// Boehm knot insertion until every inner knot has multiplicity p
    /// (requires r >= 0). Element m then has Bernstein coefficients at
    /// positions m*p..=m*p+p of the result.
    fn insert_to_bezier(&self, coeffs: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut t = self.knots();
        let mut c = coeffs.to_vec();
        for m in 1..=self.k {
            let x = self.breakpoint(m);
            for _ in 0..self.r {
                let mu = t.iter().rposition(|&v| v <= x).unwrap();
                let mut nc = Vec::with_capacity(c.len() + 1);
                for i in 0..=c.len() {
                    if i + p <= mu {
                        nc.push(c[i]);
                    } else if i > mu {
                        nc.push(c[i - 1]);
                    } else {
                        let a = (x - t[i]) / (t[i + p] - t[i]);
                        nc.push(a * c[i] + (1.0 - a) * c[i - 1]);
                    }
                }
                c = nc;
                t.insert(mu + 1, x);
            }
        }
        c
    }
}

/// All Bernstein polynomials of degree p at t in [0,1].
pub fn bernstein_all(p: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; p + 1];
    b[0] = 1.0;
    let u = 1.0 - t;
    for q in 1..=p {
        let mut saved = 0.0;
        for i in 0..q {
            let tmp = b[i];
            b[i] = saved + u * tmp;
            saved = t * tmp;
        }
        b[q] = saved;
    }
    b
}

fn invert_dense(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
            .unwrap();
        for j in 0..n {
            m.swap(col * n + j, piv * n + j);
            inv.swap(col * n + j, piv * n + j);
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        m[row * n + j] -= f * m[col * n + j];
                        inv[row * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    inv
}

/// Piecewise polynomial on the uniform partition of [0,1] into k+1
/// elements, stored as Bernstein coefficients per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    pub p: usize,
    pub k: usize,
    pub elems: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn zero(p: usize, k: usize) -> Self {
        PiecewisePoly { p, k, elems: vec![vec![0.0; p + 1]; k + 1] }
    }

    /// Global polynomial given by monomial coefficients in x.
    pub fn from_monomial(coeffs: &[f64], k: usize) -> Self {
        let p = coeffs.len().saturating_sub(1);
        let h = 1.0 / (k + 1) as f64;
        let elems = (0..=k)
            .map(|m| {
                let a = m as f64 / (k + 1) as f64;
                // Taylor coefficients in local t: q(a + h t) = sum c_j t^j.
                let mut local = vec![0.0; p + 1];
                for (i, &ci) in coeffs.iter().enumerate() {
                    for j in 0..=i {
                        local[j] += ci * binom(i, j) * a.powi((i - j) as i32) * h.powi(j as i32);
                    }
                }
                monomial_to_bernstein(&local)
            })
            .collect();
        PiecewisePoly { p, k, elems }
    }

    pub fn num_elements(&self) -> usize {
        self.k + 1
    }

    /// Value of the d-th derivative at x (right-continuous, closed at 1).
    pub fn eval(&self, x: f64, d: usize) -> f64 {
        if d > self.p {
            return 0.0;
        }
        let n = (self.k + 1) as f64;
        let mut m = ((x * n).floor().max(0.0) as usize).min(self.k);
        if m < self.k && (m + 1) as f64 / n <= x {
            m += 1;
        }
        if m > 0 && m as f64 / n > x {
            m -= 1;
        }
        let t = (x - m as f64 / n) * n;
        let mut c = self.elems[m].clone();
        let mut deg = self.p;
        for _ in 0..d {
            c = (0..deg).map(|i| deg as f64 * (c[i + 1] - c[i]) * n).collect();
            deg -= 1;
        }
        de_casteljau(&c, t)
    }

    pub fn derivative(&self) -> Self {
        if self.p == 0 {
            return PiecewisePoly::zero(0, self.k);
        }
        let n = (self.k + 1) as f64;
        let p = self.p;
        let elems = self
            .elems
            .iter()
            .map(|c| (0..p).map(|i| p as f64 * (c[i + 1] - c[i]) * n).collect())
            .collect();
        PiecewisePoly { p: p - 1, k: self.k, elems }
    }

    pub fn nth_derivative(&self, d: usize) -> Self {
        (0..d).fold(self.clone(), |acc, _| acc.derivative())
    }

    pub fn elevate_to(&self, q: usize) -> Self {
        assert!(q >= self.p);
        let elems = self
            .elems
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for deg in self.p..q {
                    let mut e = vec![0.0; deg + 2];
                    e[0] = c[0];
                    e[deg + 1] = c[deg];
                    for i in 1..=deg {
                        let a = i as f64 / (deg + 1) as f64;
                        e[i] = a * c[i - 1] + (1.0 - a) * c[i];
                    }
                    c = e;
                }
                c
            })
            .collect();
        PiecewisePoly { p: q, k: self.k, elems }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.k, other.k);
        let (p, q) = (self.p, other.p);
        let elems = self
            .elems
            .iter()
            .zip(&other.elems)
            .map(|(a, b)| {
                let mut c = vec![0.0; p + q + 1];
                for i in 0..=p {
                    for j in 0..=q {
                        c[i + j] += binom(p, i) * binom(q, j) * a[i] * b[j];
                    }
                }
                for (kk, v) in c.iter_mut().enumerate() {
                    *v /= binom(p + q, kk);
                }
                c
            })
            .collect();
        PiecewisePoly { p: p + q, k: self.k, elems }
    }

    pub fn scale(&self, f: f64) -> Self {
        PiecewisePoly {
            p: self.p,
            k: self.k,
            elems: self.elems.iter().map(|c| c.iter().map(|v| v * f).collect()).collect(),
        }
    }

    /// Sum, elevating the lower-degree operand.
    pub fn add(&self, other: &Self) -> Self {
        let q = self.p.max(other.p);
        let a = if self.p < q { self.elevate_to(q) } else { self.clone() };
        let b = if other.p < q { other.elevate_to(q) } else { other.clone() };
        PiecewisePoly {
            p: q,
            k: self.k,
            elems: a
                .elems
                .iter()
                .zip(&b.elems)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
                .collect(),
        }
    }

    /// Largest absolute Bernstein coefficient.
    pub fn max_abs(&self) -> f64 {
        self.elems.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Checks C^r continuity across inner breakpoints, relative to the
    /// coefficient magnitude. Reports the worst violation.
    pub fn check_continuity(&self, r: i32, rel_tol: f64) -> Result<()> {
        if r < 0 || self.k == 0 {
            return Ok(());
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: Option<(usize, usize, f64)> = None;
        for m in 1..=self.k {
            let mut left = self.elems[m - 1].clone();
            let mut right = self.elems[m].clone();
            let mut deg = self.p;
            for d in 0..=(r as usize).min(self.p) {
                let jump = (left[deg] - right[0]).abs();
                let bound = scale * (1..=d).fold(1.0, |a, i| a * 2.0 * (self.p + 1 - i) as f64);
                let rel = jump / bound;
                if rel > rel_tol && worst.is_none_or(|w| rel > w.2) {
                    worst = Some((m, d, rel));
                }
                if deg > 0 {
                    left = (0..deg).map(|i| deg as f64 * (left[i + 1] - left[i])).collect();
                    right = (0..deg).map(|i| deg as f64 * (right[i + 1] - right[i])).collect();
                    deg -= 1;
                }
            }
        }
        match worst {
            Some((knot, order, jump)) => Err(Error::Smoothness { knot, order, jump }),
            None => Ok(()),
        }
    }
}

/// Value of a Bernstein polynomial at t.
pub fn de_casteljau(c: &[f64], t: f64) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut b = c.to_vec();
    let n = b.len();
    for q in 1..n {
        for i in 0..n - q {
            b[i] = (1.0 - t) * b[i] + t * b[i + 1];
        }
    }
    b[0]
}

/// Converts monomial coefficients on [0,1] to Bernstein coefficients.
pub fn monomial_to_bernstein(a: &[f64]) -> Vec<f64> {
    let p = a.len() - 1;
    (0..=p)
        .map(|i| (0..=i).map(|j| binom(i, j) / binom(p, j) * a[j]).sum())
        .collect()
}
