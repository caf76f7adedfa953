//! A shortened run of the variant / shifter / placement grid.
//!
//! cargo run --release --example ablation -- [iterations]

use paon::cli::{ablate, AblateArgs};

fn main() -> paon::Result<()> {
    let iterations: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let dir = tempfile::tempdir().map_err(|e| paon::Error::Usage(e.to_string()))?;
    let config = dir.path().join("ablation.toml");
    let text = format!("[train]\niterations = {iterations}\nval_interval = {}\n", iterations.div_ceil(2));
    std::fs::write(&config, text).map_err(|e| paon::Error::Usage(e.to_string()))?;
    let report = ablate(&AblateArgs {
        config: Some(config),
        out: Some(dir.path().to_path_buf()),
        seed: Some(0),
        quiet: false,
    })?;
    print!("{}", report.markdown());
    Ok(())
}
