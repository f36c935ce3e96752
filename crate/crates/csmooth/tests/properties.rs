//! Randomized properties of the building blocks.

use csmooth::bspline::{PiecewisePoly, SplineSpace1D};
use csmooth::cli::expr::Expr;
use csmooth::multipatch::{BilinearPatch, Sym};
use proptest::prelude::*;

fn space() -> impl Strategy<Value = SplineSpace1D> {
    (1usize..8, 0usize..6)
        .prop_flat_map(|(p, k)| (Just(p), -1i32..p as i32, Just(k)))
        .prop_map(|(p, r, k)| SplineSpace1D::new(p, r, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partition_of_unity(sp in space(), x in 0.0f64..=1.0) {
        let (_, v) = sp.eval_active(x, 1);
        prop_assert!((v[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v[1].iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(v[0].iter().all(|&b| b >= -1e-14));
    }

    #[test]
    fn bezier_round_trip(sp in space(), seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let c: Vec<f64> = (0..sp.dim()).map(|i| seed[i % seed.len()] + 0.01 * i as f64).collect();
        let back = sp.from_bezier(&sp.to_bezier(&c)).unwrap();
        for (a, b) in c.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn monomials_lie_in_every_space(
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..5),
        k in 0usize..5,
        x in 0.0f64..=1.0,
    ) {
        let p = coeffs.len() - 1;
        let pp = PiecewisePoly::from_monomial(&coeffs, k);
        let horner = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        prop_assert!((pp.eval(x, 0) - horner).abs() < 1e-12);
        let sp = SplineSpace1D::new(p.max(1), p.max(1) as i32 - 1, k).unwrap();
        let pp = pp.elevate_to(p.max(1));
        let c = sp.from_bezier(&pp).unwrap();
        prop_assert!((sp.to_bezier(&c).eval(x, 0) - horner).abs() < 1e-10);
    }

    #[test]
    fn patch_inversion(
        jitter in prop::collection::vec(-0.2f64..0.2, 8),
        xi in (0.0f64..=1.0, 0.0f64..=1.0),
    ) {
        let c = |i: usize, x: f64, y: f64| [x + jitter[2 * i], y + jitter[2 * i + 1]];
        let patch = BilinearPatch::new([c(0, 0.0, 0.0), c(1, 1.0, 0.0), c(2, 0.0, 1.0), c(3, 1.0, 1.0)]).unwrap();
        let back = patch.invert(patch.eval([xi.0, xi.1])).unwrap();
        prop_assert!((back[0] - xi.0).abs() < 1e-12 && (back[1] - xi.1).abs() < 1e-12);
    }

    #[test]
    fn symmetry_reordering_is_invertible(bits in 0u8..8, n in 2usize..6) {
        let sym = Sym::all().nth(bits as usize).unwrap();
        let native: Vec<f64> = (0..n * n).map(|i| i as f64).collect();
        let reference = sym.to_reference(n, &native);
        prop_assert_eq!(sym.to_native(n, &reference), native);
        // Index map agrees with the point map on grid nodes.
        let h = 1.0 / (n - 1) as f64;
        for a in 0..n {
            for b in 0..n {
                let (i, j) = sym.native_index(n, a, b);
                let xi = sym.apply([a as f64 * h, b as f64 * h]);
                prop_assert!((xi[0] - i as f64 * h).abs() < 1e-12 && (xi[1] - j as f64 * h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expressions_match_closed_forms(a in -3.0f64..3.0, b in -3.0f64..3.0, x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
        let e = Expr::parse(&format!("({a}) * x1^2 + sin(({b}) * x2) - exp(x1 * x2) / 2")).unwrap();
        let want = a * x1 * x1 + (b * x2).sin() - (x1 * x2).exp() / 2.0;
        prop_assert!((e.eval([x1, x2]) - want).abs() < 1e-12);
    }
}
