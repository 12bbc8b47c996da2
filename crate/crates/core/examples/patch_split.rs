//! Shows the windows each patch layout cuts from a row of M attributes.
//!
//! ```text
//! cargo run --example patch_split -- 9
//! ```

use tabdisent::data::{patch_split, PatchLayout};
use tabdisent::numerics::Tensor;

fn main() -> tabdisent::Result<()> {
    let m: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(9);
    for layout in [
        PatchLayout::ThreeHalf,
        PatchLayout::TwoHalf,
        PatchLayout::TwoThreeQuarter,
        PatchLayout::ThreeThird,
    ] {
        let windows: Vec<String> = layout
            .windows(m)?
            .iter()
            .map(|w| format!("[{}..{}]", w.start, w.end - 1))
            .collect();
        println!("{:<12} {}", layout.as_str(), windows.join(" "));
    }

    let row = Tensor::new(&[1, m], (0..m).map(|i| i as f64).collect())?;
    let patched = patch_split(&row, PatchLayout::ThreeHalf)?;
    println!("\n{:?} -> {:?}", row.shape(), patched.shape());
    for chunk in patched.data().chunks(patched.shape()[2]) {
        println!("  {chunk:?}");
    }
    Ok(())
}
