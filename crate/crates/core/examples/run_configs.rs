//! Runs every experiment config shipped in `configs/` and prints the run
//! reports. Artifacts go to a temporary directory unless one is given.
//!
//! ```text
//! cargo run --example run_configs -- [OUT_DIR]
//! ```

use std::path::{Path, PathBuf};

use partsmooth::harness::{list_configs, run_many, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map_or_else(|| tmp.path().to_path_buf(), PathBuf::from);
    let opts = RunOptions {
        out_dir: Some(out.clone()),
        ..RunOptions::default()
    };
    for result in run_many(&list_configs(&configs)?, &opts, 4)? {
        match result {
            Ok(r) => println!("{:<28} {:<12} {}", r.config.rsplit('/').next().unwrap_or(""), r.kind, serde_json::to_string(&r.verdicts)?),
            Err(e) => println!("{e}"),
        }
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
