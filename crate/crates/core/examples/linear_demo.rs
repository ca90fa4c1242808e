//! Filter vs smoother on the two-state rotation benchmark.
//!
//! cargo run --release --example linear_demo [config] [out_dir]

use std::path::PathBuf;

use zonosmooth::demos;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/linear.json")));
    let out = args.next().map(PathBuf::from);
    let summary = demos::example_from_file(&config, out.as_deref())?;
    println!("{:>3} {:>12} {:>12}", "k", "filtered", "smoothed");
    for a in &summary.aggregates {
        println!("{:>3} {:>12.5} {:>12.5}", a.k, a.filtered_diameter, a.smoothed_diameter);
    }
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
