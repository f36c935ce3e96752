//! Vertex spaces at the inner vertex of the three-patch fan: the
//! interpolation strategy against the kernel of the vertex system.
//!
//!     cargo run --release --example vertex_spaces

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{Builder, Params};

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/three_patch_fan.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let topo = Topology::extract(&domain)?;
    let v = topo.inner_vertices().next().expect("an inner vertex");
    println!("inner vertex {v} at {:?}, valency {}", topo.vertices[v].point, topo.vertices[v].valency());
    for s in 1..=3 {
        let params = Params::at_level(2 * s + 1, s, s, 2)?;
        let builder = Builder::new(&domain, &topo, params)?;
        let sys = builder.vertex_system(v)?;
        let (interp, _, _) = builder.vertex_space_interpolation(v)?;
        let (kernel_fns, kernel) = builder.vertex_space_nullspace(v)?;
        let sv = &kernel.singular_values;
        let tail = &sv[sv.len().saturating_sub(kernel.basis.len() + 2)..];
        println!(
            "s={s}: T is {}x{}, sigma = {:.4}, interpolation {} functions, kernel {} functions",
            sys.t.rows,
            sys.t.cols,
            builder.sigma(v),
            interp.len(),
            kernel_fns.len()
        );
        let tail: Vec<String> = tail.iter().map(|v| format!("{v:.2e}")).collect();
        println!("     cutoff {:.2e}, smallest singular values {}", kernel.cutoff, tail.join(" "));
    }
    Ok(())
}
