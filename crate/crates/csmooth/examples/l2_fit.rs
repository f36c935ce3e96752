//! L2 projection of a smooth field onto a C^2 space on the three-patch fan.
//!
//!     cargo run --release --example l2_fit

use csmooth::fitting::{l2_fit, trig_field};
use csmooth::multipatch::MultiPatchDomain;
use csmooth::spacebuilder::{assemble_w, Params, Strategy};

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/three_patch_fan.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let params = Params::at_level(5, 2, 2, 3)?;
    let space = assemble_w(&domain, params, Strategy::Interpolation)?;
    let fit = l2_fit(&space, &domain, &trig_field)?;
    println!(
        "ndof {} h {:.4}: relative L2 error {:.3e}, absolute {:.3e}, solve residual {:.1e}",
        fit.ndof, fit.h, fit.rel_error, fit.abs_error, fit.residual
    );
    // Sample the fitted surface at a few points.
    let spline = csmooth::bspline::SplineSpace1D::new(params.p, params.r as i32, params.k)?;
    for x in [[0.1, 0.1], [0.3, 0.2], [0.2, 0.4]] {
        if let Some((patch, xi)) = domain.locate(x) {
            let v = fit.approximation.eval_patch(&spline, patch, xi);
            println!("x = {x:?}: fit {v:+.8} exact {:+.8}", trig_field(x));
        }
    }
    Ok(())
}
