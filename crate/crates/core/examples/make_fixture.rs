//! Writes the procedural test image used by the image configs.
//!
//! cargo run --example make_fixture -- data/shapes128.pgm

use dturbo::fixtures::piecewise_smooth;
use dturbo::pgm::save_pgm;

fn main() -> dturbo::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "shapes128.pgm".into());
    let img = piecewise_smooth(128, 128, 1)?;
    save_pgm(&path, &img)?;
    println!("wrote {path} ({}×{})", img.width, img.height);
    Ok(())
}
