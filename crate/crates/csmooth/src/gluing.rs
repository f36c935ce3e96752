//! Gluing data of an inner edge and the transversal jets of the
//! reparameterization between the two patches.

use std::collections::BTreeMap;

use crate::bspline::{binom, factorial};
use crate::error::{Error, Result};
use crate::multipatch::EdgeFrame;

/// Univariate polynomial in the monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly1 {
    pub coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly1 { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly1::new(vec![c])
    }

    /// Degree of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn deriv(&self) -> Self {
        Poly1::new(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly1::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + o.coeffs.get(i).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, f: f64) -> Self {
        Poly1::new(self.coeffs.iter().map(|c| c * f).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly1::new(c)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Poly1::constant(1.0), |acc, _| acc.mul(self))
    }

    /// Exact integral over [0,1].
    pub fn integral01(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()))
    }
}

/// Gluing functions of an inner edge in its reference frame.
#[derive(Debug, Clone)]
pub struct GluingData {
    pub alpha0: Poly1,
    pub alpha1: Poly1,
    pub beta0: Poly1,
    pub beta1: Poly1,
    pub beta: Poly1,
    pub lambda1: f64,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl GluingData {
    /// Gluing data of the two reference patches of an edge frame.
    pub fn compute(frame: &EdgeFrame) -> Result<Self> {
        let mut d = Vec::new();
        let mut bt = Vec::new();
        let mut d1f = Vec::new();
        for g in &frame.geometry {
            let (a, b, c) = g.abc();
            // d1F(0,xi) = A + C xi, d2F(0,xi) = B.
            d.push(Poly1::new(vec![cross(a, b), cross(c, b)]));
            let bb = b[0] * b[0] + b[1] * b[1];
            bt.push(Poly1::new(vec![
                (a[0] * b[0] + a[1] * b[1]) / bb,
                (c[0] * b[0] + c[1] * b[1]) / bb,
            ]));
            d1f.push((a, c));
        }
        let num = d[1].sub(&d[0]).integral01();
        let den = d[0].mul(&d[0]).add(&d[1].mul(&d[1])).integral01();
        let lambda1 = num / den;
        let alpha0 = d[0].scale(lambda1);
        let alpha1 = d[1].scale(lambda1);
        let ((a0, c0), (a1, c1)) = (d1f[0], d1f[1]);
        // det(A0 + C0 xi, A1 + C1 xi)
        let beta = Poly1::new(vec![
            cross(a0, a1),
            cross(a0, c1) + cross(c0, a1),
            cross(c0, c1),
        ])
        .scale(lambda1);
        let g = GluingData {
            alpha0,
            alpha1,
            beta0: bt[0].clone(),
            beta1: bt[1].clone(),
            beta,
            lambda1,
        };
        for x in [0.0, 1.0] {
            if !(g.alpha0.eval(x) < 0.0 && g.alpha1.eval(x) > 0.0) {
                return Err(Error::Geometry(format!(
                    "edge {}: gluing sign condition violated at xi = {x} (alpha0 = {:.3e}, alpha1 = {:.3e})",
                    frame.edge,
                    g.alpha0.eval(x),
                    g.alpha1.eval(x)
                )));
            }
        }
        Ok(g)
    }

    pub fn alpha(&self, side: usize) -> &Poly1 {
        if side == 0 {
            &self.alpha0
        } else {
            &self.alpha1
        }
    }

    pub fn beta_side(&self, side: usize) -> &Poly1 {
        if side == 0 {
            &self.beta0
        } else {
            &self.beta1
        }
    }

    /// theta = -alpha0' / alpha0 as a rational jet.
    pub fn theta(&self) -> RationalJet {
        RationalJet { num: self.alpha0.deriv().scale(-1.0), pow: 1, alpha0: self.alpha0.clone() }
    }

    /// mu = -(alpha0 beta0' - alpha0' beta0) / alpha0 as a rational jet.
    pub fn mu(&self) -> RationalJet {
        let n = self
            .alpha0
            .mul(&self.beta0.deriv())
            .sub(&self.alpha0.deriv().mul(&self.beta0))
            .scale(-1.0);
        RationalJet { num: n, pow: 1, alpha0: self.alpha0.clone() }
    }
}

/// Rational function num / alpha0^pow.
#[derive(Debug, Clone)]
pub struct RationalJet {
    pub num: Poly1,
    pub pow: usize,
    pub alpha0: Poly1,
}

impl RationalJet {
    pub fn eval(&self, x: f64) -> f64 {
        self.num.eval(x) / self.alpha0.eval(x).powi(self.pow as i32)
    }

    pub fn mul(&self, o: &Self) -> Self {
        RationalJet { num: self.num.mul(&o.num), pow: self.pow + o.pow, alpha0: self.alpha0.clone() }
    }

    pub fn scale(&self, f: f64) -> Self {
        RationalJet { num: self.num.scale(f), pow: self.pow, alpha0: self.alpha0.clone() }
    }

    pub fn add(&self, o: &Self) -> Self {
        let pow = self.pow.max(o.pow);
        let a = self.num.mul(&self.alpha0.pow(pow - self.pow));
        let b = o.num.mul(&self.alpha0.pow(pow - o.pow));
        RationalJet { num: a.add(&b), pow, alpha0: self.alpha0.clone() }
    }
}

/// Transversal jets (a_l, b_l), l = 1..=s, of the reparameterization by the
/// recursion on c_l, in exact coefficient arithmetic.
pub fn jets_recursive(g: &GluingData, s: usize) -> Vec<(RationalJet, RationalJet)> {
    let a1 = RationalJet { num: g.alpha1.clone(), pow: 1, alpha0: g.alpha0.clone() };
    let b1 = RationalJet { num: g.beta.clone(), pow: 1, alpha0: g.alpha0.clone() };
    let mut jets = vec![(a1, b1)];
    let (theta, mu) = (g.theta(), g.mu());
    for l in 2..=s {
        let c = c_l(&jets, l);
        jets.push((theta.mul(&c), mu.mul(&c)));
    }
    jets
}

/// c_l = sum_{i=1}^{l-1} C(l,i) a_i b_{l-i}, from jets indexed from 1.
pub fn c_l(jets: &[(RationalJet, RationalJet)], l: usize) -> RationalJet {
    let mut acc: Option<RationalJet> = None;
    for i in 1..l {
        let t = jets[i - 1].0.mul(&jets[l - i - 1].1).scale(binom(l, i));
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t),
        });
    }
    acc.expect("c_l needs l >= 2")
}

/// Narayana number N(m1, m2) = C(m1,m2) C(m1,m2-1) / m1.
pub fn narayana(m1: usize, m2: usize) -> f64 {
    if m2 == 0 || m2 > m1 {
        return 0.0;
    }
    binom(m1, m2) * binom(m1, m2 - 1) / m1 as f64
}

/// Closed-form values of (a_l, b_l) at x for l >= 2.
pub fn jets_closed_form(g: &GluingData, l: usize, x: f64) -> (f64, f64) {
    assert!(l >= 2);
    let (a0, a1, beta) = (g.alpha0.eval(x), g.alpha1.eval(x), g.beta.eval(x));
    let (th, mu) = (g.theta().eval(x), g.mu().eval(x));
    let pre = factorial(l) * a1 * beta / a0.powi(l as i32);
    let sum: f64 = (0..=l - 2)
        .map(|j| {
            narayana(l - 1, j + 1) * (mu * a1).powi(j as i32) * (th * beta).powi((l - 2 - j) as i32)
        })
        .sum();
    (pre * th * sum, pre * mu * sum)
}

/// Values of the jets a_l, b_l (l = 1..=s) at x.
pub fn jet_values(jets: &[(RationalJet, RationalJet)], x: f64) -> (Vec<f64>, Vec<f64>) {
    jets.iter().map(|(a, b)| (a.eval(x), b.eval(x))).unzip()
}

/// Faa di Bruno coefficients A_{sigma;l} for all sigma with 1 <= |sigma| <= l,
/// given jet values a[rho-1], b[rho-1] for rho = 1..=l.
pub fn faa_di_bruno(a: &[f64], b: &[f64], l: usize) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    let mut i = vec![0usize; l + 1];
    let mut j = vec![0usize; l + 1];
    enumerate(1, l, &mut i, &mut j, a, b, l, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    rho: usize,
    remaining: usize,
    i: &mut Vec<usize>,
    j: &mut Vec<usize>,
    a: &[f64],
    b: &[f64],
    l: usize,
    out: &mut BTreeMap<(usize, usize), f64>,
) {
    if remaining == 0 {
        let s1: usize = i.iter().sum();
        let s2: usize = j.iter().sum();
        let mut term = factorial(l);
        for r in 1..=l {
            let (ir, jr) = (i[r], j[r]);
            if ir + jr == 0 {
                continue;
            }
            term *= a[r - 1].powi(ir as i32) * b[r - 1].powi(jr as i32)
                / (factorial(r).powi((ir + jr) as i32) * factorial(ir) * factorial(jr));
        }
        *out.entry((s1, s2)).or_insert(0.0) += term;
        return;
    }
    if rho > l {
        return;
    }
    for total in 0..=remaining / rho {
        for ir in 0..=total {
            i[rho] = ir;
            j[rho] = total - ir;
            enumerate(rho + 1, remaining - total * rho, i, j, a, b, l, out);
        }
    }
    i[rho] = 0;
    j[rho] = 0;
}

/// Order-l matching residual across the interface:
/// d1^l f1(0,x) - sum_sigma A_{sigma;l}(x) d^sigma f0(0,x).
/// `d0(s1, s2)` and `d1(l)` return derivatives of the two reference-frame
/// functions at (0, x). Returns (residual, magnitude of the largest term).
pub fn gs_residual(
    jets: &[(RationalJet, RationalJet)],
    l: usize,
    x: f64,
    d0: impl Fn(usize, usize) -> f64,
    d1: impl Fn(usize) -> f64,
) -> (f64, f64) {
    if l == 0 {
        let (u, v) = (d1(0), d0(0, 0));
        return (u - v, u.abs().max(v.abs()));
    }
    let (a, b) = jet_values(&jets[..l], x);
    let coeffs = faa_di_bruno(&a, &b, l);
    let lhs = d1(l);
    let mut mag = lhs.abs();
    let mut rhs = 0.0;
    for (&(s1, s2), &c) in &coeffs {
        let t = c * d0(s1, s2);
        mag = mag.max(t.abs());
        rhs += t;
    }
    (lhs - rhs, mag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::{MultiPatchDomain, Topology};

    /// Bivariate polynomial as a dense coefficient grid c[i][j] u1^i u2^j.
    #[derive(Clone)]
    struct Poly2(Vec<Vec<f64>>);

    impl Poly2 {
        fn linear(c: f64, a: f64, b: f64, ab: f64) -> Self {
            Poly2(vec![vec![c, b], vec![a, ab]])
        }
        fn constant(c: f64) -> Self {
            Poly2(vec![vec![c]])
        }
        fn add(&self, o: &Self) -> Self {
            let n = self.0.len().max(o.0.len());
            let m = self.0[0].len().max(o.0[0].len());
            let g = |p: &Poly2, i: usize, j: usize| p.0.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
            Poly2((0..n).map(|i| (0..m).map(|j| g(self, i, j) + g(o, i, j)).collect()).collect())
        }
        fn mul(&self, o: &Self) -> Self {
            let (n, m) = (self.0.len() + o.0.len() - 1, self.0[0].len() + o.0[0].len() - 1);
            let mut c = vec![vec![0.0; m]; n];
            for (i, r) in self.0.iter().enumerate() {
                for (j, a) in r.iter().enumerate() {
                    for (k, s) in o.0.iter().enumerate() {
                        for (l, b) in s.iter().enumerate() {
                            c[i + k][j + l] += a * b;
                        }
                    }
                }
            }
            Poly2(c)
        }
        fn deriv_at(&self, d1: usize, d2: usize, u: [f64; 2]) -> f64 {
            let mut v = 0.0;
            for (i, r) in self.0.iter().enumerate() {
                for (j, c) in r.iter().enumerate() {
                    if i >= d1 && j >= d2 {
                        let f = factorial(i) / factorial(i - d1) * factorial(j) / factorial(j - d2);
                        v += c * f * u[0].powi((i - d1) as i32) * u[1].powi((j - d2) as i32);
                    }
                }
            }
            v
        }
    }

    /// q(x, y) = 1 + x - 2y + x^2 y - 0.7 x y^2 + 0.3 x^3 + y^3 + 0.2 x^2 y^2
    /// composed with the bilinear map of a reference patch.
    fn pullback(g: &crate::multipatch::BilinearPatch) -> Poly2 {
        let (a, b, c) = g.abc();
        let o = g.corners[0];
        let x = Poly2::linear(o[0], a[0], b[0], c[0]);
        let y = Poly2::linear(o[1], a[1], b[1], c[1]);
        let terms: [(f64, usize, usize); 9] =
            [(1.0, 0, 0), (1.0, 1, 0), (-2.0, 0, 1), (1.0, 2, 1), (-0.7, 1, 2), (0.3, 3, 0), (1.0, 0, 3), (0.2, 2, 2), (0.0, 0, 0)];
        let mut q = Poly2::constant(0.0);
        for (coef, i, j) in terms {
            let mut t = Poly2::constant(coef);
            for _ in 0..i {
                t = t.mul(&x);
            }
            for _ in 0..j {
                t = t.mul(&y);
            }
            q = q.add(&t);
        }
        q
    }

    fn fan_frames() -> (MultiPatchDomain, Topology) {
        let d = MultiPatchDomain::from_toml_str(include_str!("../examples/three_patch_fan.cfg")).unwrap();
        let t = Topology::extract(&d).unwrap();
        (d, t)
    }

    #[test]
    fn mirror_squares_gluing() {
        let d = MultiPatchDomain::from_toml_str(include_str!("../examples/mirror_squares.cfg")).unwrap();
        let t = Topology::extract(&d).unwrap();
        let e = t.inner_edges().next().unwrap();
        let g = GluingData::compute(&t.canonical_edge_frame(&d, e)).unwrap();
        // Squares of width 2 and height 4: det J = -8 and 8.
        assert!((g.lambda1 - 0.125).abs() < 1e-15);
        for x in [0.0, 0.4, 1.0] {
            assert!((g.alpha0.eval(x) + 1.0).abs() < 1e-14);
            assert!((g.alpha1.eval(x) - 1.0).abs() < 1e-14);
            assert!(g.beta0.eval(x).abs() < 1e-14 && g.beta1.eval(x).abs() < 1e-14 && g.beta.eval(x).abs() < 1e-14);
        }
        let jets = jets_recursive(&g, 5);
        let (a, b) = jet_values(&jets, 0.3);
        assert!((a[0] + 1.0).abs() < 1e-14 && b[0].abs() < 1e-14);
        assert!(a[1..].iter().chain(&b[1..]).all(|v| v.abs() < 1e-14));
        // Only the pure transversal coefficient survives: (-1)^4 = 1.
        let fdb = faa_di_bruno(&a, &b, 4);
        for (&(s1, s2), &c) in &fdb {
            if (s1, s2) == (4, 0) {
                assert!((c - 1.0).abs() < 1e-14);
            } else {
                assert!(c.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn splitting_identity_and_minimizer() {
        let (d, t) = fan_frames();
        for e in t.inner_edges() {
            let fr = t.canonical_edge_frame(&d, e);
            let g = GluingData::compute(&fr).unwrap();
            let split = g.alpha0.mul(&g.beta1).sub(&g.alpha1.mul(&g.beta0));
            assert!(g.beta.sub(&split).max_abs_coeff() < 1e-13 * (1.0 + g.beta.max_abs_coeff()));
            // beta^(tau) from its definition at sample points.
            for (tau, geo) in fr.geometry.iter().enumerate() {
                for x in [0.1, 0.5, 0.9] {
                    let j = geo.jacobian([0.0, x]);
                    let (d1, d2) = ([j[0][0], j[1][0]], [j[0][1], j[1][1]]);
                    let want = (d1[0] * d2[0] + d1[1] * d2[1]) / (d2[0] * d2[0] + d2[1] * d2[1]);
                    assert!((g.beta_side(tau).eval(x) - want).abs() < 1e-12);
                    assert!((g.alpha(tau).eval(x) - g.lambda1 * geo.det_jacobian([0.0, x])).abs() < 1e-12);
                }
            }
            // lambda1 minimizes |alpha0 + 1|^2 + |alpha1 - 1|^2.
            let obj = |lam: f64| {
                let (p0, p1) = (g.alpha0.scale(lam / g.lambda1), g.alpha1.scale(lam / g.lambda1));
                let a = p0.add(&Poly1::constant(1.0));
                let b = p1.sub(&Poly1::constant(1.0));
                a.mul(&a).add(&b.mul(&b)).integral01()
            };
            let best = obj(g.lambda1);
            for dl in [-1e-3, 1e-3] {
                assert!(obj(g.lambda1 * (1.0 + dl)) > best);
            }
        }
    }

    #[test]
    fn narayana_numbers() {
        assert_eq!(narayana(1, 1), 1.0);
        assert_eq!(narayana(3, 2), 3.0);
        assert_eq!(narayana(4, 2), 6.0);
        assert_eq!(narayana(3, 0), 0.0);
        // Rows sum to Catalan numbers.
        assert_eq!((1..=5).map(|k| narayana(5, k)).sum::<f64>(), 42.0);
    }

    #[test]
    fn faa_di_bruno_low_orders() {
        let a = [0.7, -0.3, 0.45];
        let b = [0.2, 1.1, -0.6];
        let f1 = faa_di_bruno(&a, &b, 1);
        assert_eq!(f1.len(), 2);
        assert!((f1[&(1, 0)] - a[0]).abs() < 1e-15 && (f1[&(0, 1)] - b[0]).abs() < 1e-15);
        let f3 = faa_di_bruno(&a, &b, 3);
        assert!((f3[&(3, 0)] - a[0].powi(3)).abs() < 1e-14);
        assert!((f3[&(2, 1)] - 3.0 * a[0] * a[0] * b[0]).abs() < 1e-14);
        assert!((f3[&(1, 2)] - 3.0 * a[0] * b[0] * b[0]).abs() < 1e-14);
        assert!((f3[&(2, 0)] - 3.0 * a[0] * a[1]).abs() < 1e-14);
        assert!((f3[&(1, 1)] - 3.0 * (a[0] * b[1] + b[0] * a[1])).abs() < 1e-14);
        assert!((f3[&(0, 2)] - 3.0 * b[0] * b[1]).abs() < 1e-14);
        assert!((f3[&(1, 0)] - a[2]).abs() < 1e-14 && (f3[&(0, 1)] - b[2]).abs() < 1e-14);
    }

    #[test]
    fn global_polynomials_have_zero_residual() {
        let (d, t) = fan_frames();
        let s = 4;
        for e in t.inner_edges() {
            let fr = t.canonical_edge_frame(&d, e);
            let g = GluingData::compute(&fr).unwrap();
            let jets = jets_recursive(&g, s);
            let (q0, q1) = (pullback(&fr.geometry[0]), pullback(&fr.geometry[1]));
            for x in [0.1, 0.35, 0.8] {
                for l in 0..=s {
                    let (r, mag) = gs_residual(&jets, l, x, |a, b| q0.deriv_at(a, b, [0.0, x]), |a| q1.deriv_at(a, 0, [0.0, x]));
                    assert!(r.abs() <= 1e-11 * (1.0 + mag), "edge {e} l {l}: {r:e}");
                }
                // A perturbation of order 3 in the transversal direction is detected.
                let (r, _) = gs_residual(&jets, 3, x, |a, b| q0.deriv_at(a, b, [0.0, x]), |a| {
                    q1.deriv_at(a, 0, [0.0, x]) + if a == 3 { 1.0 } else { 0.0 }
                });
                assert!(r.abs() > 0.5);
            }
        }
    }

    #[test]
    fn sign_condition_is_enforced() {
        let (d, t) = fan_frames();
        let e = t.inner_edges().next().unwrap();
        let mut fr = t.canonical_edge_frame(&d, e);
        fr.geometry[1] = fr.geometry[0].clone();
        assert!(matches!(GluingData::compute(&fr), Err(Error::Geometry(_))));
    }
}
