//! Checks every basis function of a space for C^s smoothness across the
//! interfaces, then shows that a perturbed coefficient is caught.
//!
//!     cargo run --release --example verify_smoothness

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{Builder, Params, Provenance, Strategy};
use csmooth::verify::{CheckOptions, Verifier};

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/three_patch_fan.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let topo = Topology::extract(&domain)?;
    let params = Params::at_level(5, 2, 2, 2)?;
    let builder = Builder::new(&domain, &topo, params)?;
    let mut space = builder.assemble(Strategy::Interpolation)?;
    let verifier = Verifier::new(&builder);

    let opts = CheckOptions { fd_fraction: 0.1, ..Default::default() };
    let report = verifier.check_space(&space, &opts);
    println!(
        "{} functions: jet residual max {:.2e}, finite differences on {} functions max {:.2e}",
        report.num_functions,
        report.jet_max(),
        report.fd_checked,
        report.fd_max()
    );
    println!("failures: {}", report.failures().len());

    // Perturb one coefficient of a glued function next to the interface.
    let idx = space
        .functions
        .iter()
        .position(|f| matches!(f.tag, Provenance::InnerEdge { .. }))
        .expect("an inner-edge function");
    let part = &mut space.functions[idx].parts[0];
    part.data[0] += 1e-3;
    let report = verifier.check_space(&space, &CheckOptions::default());
    for (check, edge, order, r, f) in report.failures().iter().take(3) {
        println!("perturbed: {check} edge {edge} order {order} residual {r:.2e} in {}", space.functions[*f].tag);
    }
    Ok(())
}
