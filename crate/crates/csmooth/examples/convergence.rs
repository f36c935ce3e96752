//! Convergence of the L2 projection under uniform refinement for s = 1, 2.
//!
//!     cargo run --release --example convergence

use csmooth::fitting::{convergence_study, trig_field};
use csmooth::multipatch::MultiPatchDomain;
use csmooth::spacebuilder::Strategy;

fn main() -> csmooth::Result<()> {
    for name in ["two_patch", "three_patch_fan"] {
        let path = format!("{}/examples/{name}.cfg", env!("CARGO_MANIFEST_DIR"));
        let domain = MultiPatchDomain::load(&path)?;
        for s in 1..=2 {
            let p = 2 * s + 1;
            let table = convergence_study(&domain, p, s, s, &[0, 1, 2, 3, 4], Strategy::Interpolation, &trig_field)?;
            println!("{name} p={p} s={s} (expected order {})", p + 1);
            for row in &table.rows {
                let order = row.order.map_or(String::from("-"), |o| format!("{o:.2}"));
                println!("  L{} ndof {:>6} error {:.3e} order {order}", row.level, row.ndof, row.rel_error);
            }
        }
    }
    Ok(())
}
