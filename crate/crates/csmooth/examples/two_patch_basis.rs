//! The dedicated two-patch construction against the general assembly on
//! the two-patch geometry, and a look at one glued function across the
//! interface.
//!
//!     cargo run --release --example two_patch_basis

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{Builder, Params, Provenance, Strategy};
use csmooth::verify::Verifier;

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_patch.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let topo = Topology::extract(&domain)?;
    let params = Params::at_level(5, 2, 2, 2)?;
    let builder = Builder::new(&domain, &topo, params)?;

    let two = builder.two_patch_space()?;
    let general = builder.assemble(Strategy::Interpolation)?;
    println!("p=5 r=2 s=2 h=1/4: two-patch construction {} functions, general assembly {}", two.dim(), general.dim());

    // First glued function of the inner edge: print C^0..C^2 jumps of the
    // physical derivatives along the interface.
    let edge = topo.inner_edges().next().expect("one inner edge");
    let f = general
        .functions
        .iter()
        .find(|f| matches!(f.tag, Provenance::InnerEdge { edge: e, .. } if e == edge))
        .expect("an inner-edge function");
    println!("function {}", f.tag);
    let verifier = Verifier::new(&builder);
    for rep in verifier.jet_smoothness_check(f, 25) {
        for (l, r) in rep.residuals.iter().enumerate() {
            println!("  edge {} order {l}: normalized jump {r:.2e}", rep.edge);
        }
    }
    Ok(())
}
