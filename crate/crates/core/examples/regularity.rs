//! Regularity classes predicted from vanishing orders, and the converse table.

use circtype::spectrum::{predict_regularity, regularity_to_vanishing};

fn main() -> circtype::Result<()> {
    for k in [2, 3, 4, 6, 7, 10] {
        println!("vanishing order {k}: {:?}", predict_regularity(k));
    }
    for two_k in [2, 6, 10] {
        println!("exhaustion of class C^{two_k}: modes {:?} vanish", regularity_to_vanishing(two_k)?);
    }
    Ok(())
}
