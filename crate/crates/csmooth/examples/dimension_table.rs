//! Dimensions of the C^s spaces on the shipped geometries, built and
//! predicted by the closed formulas.
//!
//!     cargo run --release --example dimension_table

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{predicted_dims, Builder, Params, Strategy};

fn main() -> csmooth::Result<()> {
    for name in ["two_patch", "three_patch_fan"] {
        let path = format!("{}/examples/{name}.cfg", env!("CARGO_MANIFEST_DIR"));
        let domain = MultiPatchDomain::load(&path)?;
        let topo = Topology::extract(&domain)?;
        println!("{name}: {} patches, {} edges, {} vertices", topo.num_patches, topo.edges.len(), topo.vertices.len());
        println!("{:>2} {:>2} {:>8} {:>8} {:>8} {:>8} {:>10}", "s", "L", "patch", "edge", "vertex", "total", "predicted");
        for s in 1..=3 {
            let p = 2 * s + 1;
            for level in 0..=3 {
                let params = Params::at_level(p, s, s, level)?;
                let space = Builder::new(&domain, &topo, params)?.assemble(Strategy::Interpolation)?;
                let d = space.dims();
                let pred = predicted_dims(&params, &topo);
                println!(
                    "{s:>2} {level:>2} {:>8} {:>8} {:>8} {:>8} {:>10}",
                    d.patch,
                    d.edge,
                    d.vertex,
                    d.total(),
                    pred.total_interp
                );
            }
        }
        println!();
    }
    Ok(())
}
