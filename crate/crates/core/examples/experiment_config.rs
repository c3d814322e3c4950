//! Config-driven run: parse a `key = value` experiment, write the CSV table
//! and SVG plot, and print the normalized configuration.

use horomass::cli::commands::{mass_csv, mass_plot, mass_rows};
use horomass::cli::ExperimentConfig;

const TEXT: &str = "
# face mass on AdS-Schwarzschild, sigma = e^{3L/2}
evaluator = face
model.name = ads
model.m = 0.5
sweep.L = 3, 4, 5, 6
sweep.sigma_k = 1.5
normalize = true
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::parse(TEXT)?;
    print!("{}", cfg.normalized());
    let rows = mass_rows(&cfg)?;
    let table = mass_csv(&rows);
    print!("\n{table}");
    let dir = std::env::temp_dir();
    std::fs::write(dir.join("horomass_face.csv"), &table)?;
    std::fs::write(dir.join("horomass_face.svg"), mass_plot(&cfg, &rows).to_svg())?;
    println!("wrote {}/horomass_face.{{csv,svg}}", dir.display());
    Ok(())
}
