//! Writes a basis to the text dump format, reads it back and re-verifies.
//!
//!     cargo run --release --example basis_export

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{export_basis, import_basis, Builder, Params, Strategy};
use csmooth::verify::{CheckOptions, Verifier};

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/boundary_fan.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let topo = Topology::extract(&domain)?;
    let params = Params::at_level(3, 1, 1, 1)?;
    let builder = Builder::new(&domain, &topo, params)?;
    let space = builder.assemble(Strategy::Nullspace)?;

    let text = export_basis(&space);
    println!("dump: {} bytes, {} lines", text.len(), text.lines().count());
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    let back = import_basis(&text)?;
    assert_eq!(back.dim(), space.dim());
    let report = Verifier::new(&builder).check_space(&back, &CheckOptions::default());
    println!("re-imported {} functions, jet residual max {:.2e}", back.dim(), report.jet_max());
    Ok(())
}
