//! Gluing data of an interface and the transversal jets of the
//! reparameterization, by recursion and by the closed Narayana form.
//!
//!     cargo run --release --example gluing_jets

use csmooth::gluing::{jet_values, jets_closed_form, jets_recursive, narayana, GluingData};
use csmooth::multipatch::{MultiPatchDomain, Topology};

fn main() -> csmooth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_patch.cfg");
    let domain = MultiPatchDomain::load(path)?;
    let topo = Topology::extract(&domain)?;
    let edge = topo.inner_edges().next().expect("one inner edge");
    let frame = topo.canonical_edge_frame(&domain, edge);
    let g = GluingData::compute(&frame)?;
    println!("lambda1 = {:.6}", g.lambda1);
    for x in [0.0, 0.5, 1.0] {
        println!(
            "xi = {x:.1}: alpha0 {:+.4} alpha1 {:+.4} beta {:+.4} beta0 {:+.4} beta1 {:+.4}",
            g.alpha0.eval(x),
            g.alpha1.eval(x),
            g.beta.eval(x),
            g.beta0.eval(x),
            g.beta1.eval(x)
        );
    }

    let s = 5;
    let jets = jets_recursive(&g, s);
    let x = 0.3;
    let (a, b) = jet_values(&jets, x);
    println!("\njets at xi = {x}");
    println!("l=1: a_1 {:+.6e}  b_1 {:+.6e}", a[0], b[0]);
    for l in 2..=s {
        let (ca, cb) = jets_closed_form(&g, l, x);
        println!(
            "l={l}: a_l {:+.6e} (closed {:+.6e})  b_l {:+.6e} (closed {:+.6e})",
            a[l - 1],
            ca,
            b[l - 1],
            cb
        );
    }
    let row: Vec<String> = (1..=5).map(|m2| format!("{}", narayana(5, m2))).collect();
    println!("\nNarayana numbers N(5, 1..5): {}", row.join(" "));
    Ok(())
}
