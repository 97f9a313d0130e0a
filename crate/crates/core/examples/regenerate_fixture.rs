//! Rewrites `fixtures/study_panel.csv` from the fixture generator.

fn main() -> std::io::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/study_panel.csv");
    std::fs::write(path, panelkit::fixture::canonical_csv())?;
    println!("wrote {path}");
    Ok(())
}
