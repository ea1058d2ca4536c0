//! Regenerate the committed synthetic fixture: `cargo run -p hyperrag --example write_fixture`.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    hyperrag::synthetic::write_fixture(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
