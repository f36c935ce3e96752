//! Builds a domain from an inline description, inspects its layout and
//! the C^1 space on it.
//!
//!     cargo run --release --example custom_geometry

use csmooth::multipatch::{MultiPatchDomain, Topology};
use csmooth::spacebuilder::{assemble_w, Params, Strategy};

const GEOMETRY: &str = r#"
# Two quadrilaterals stacked on a third one; corners are c00, c10, c01, c11.
[[patches]]
corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 0.5], [1.1, 0.6]]

[[patches]]
corners = [[0.0, 0.5], [1.1, 0.6], [0.0, 1.0], [1.0, 1.0]]

[[patches]]
corners = [[1.0, 0.0], [2.0, 0.1], [1.1, 0.6], [2.0, 0.9]]
"#;

fn main() -> csmooth::Result<()> {
    let domain = MultiPatchDomain::from_toml_str(GEOMETRY)?;
    let topo = Topology::extract(&domain)?;
    println!("area {:.4}, diameter {:.4}", domain.area(), domain.diameter());
    for (i, v) in topo.vertices.iter().enumerate() {
        let kind = if v.boundary { "boundary" } else { "inner" };
        println!("vertex {i} at {:?}: {kind}, valency {}", v.point, v.valency());
    }
    println!("{} inner edges", topo.inner_edges().count());
    let space = assemble_w(&domain, Params::at_level(3, 1, 1, 2)?, Strategy::Interpolation)?;
    let d = space.dims();
    println!("C^1 space at h=1/4: patch {} edge {} vertex {} total {}", d.patch, d.edge, d.vertex, d.total());
    Ok(())
}
