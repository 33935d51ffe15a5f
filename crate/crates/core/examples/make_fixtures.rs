//! Regenerate the bundled fixture datasets.
//!
//! `cargo run -p gesture-fidelity --example make_fixtures [OUT_DIR]`
//! (defaults to `fixtures/` at the workspace root).

use std::path::PathBuf;

use gesture_fidelity::fixtures::{write_fixture_set, FixtureOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    let paths = write_fixture_set(&out, &FixtureOptions::default())?;
    println!("{}\n{}", paths.real.display(), paths.synth.display());
    Ok(())
}
