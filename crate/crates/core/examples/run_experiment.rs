//! Runs a registry experiment from a TOML string and prints its CSV.

use outcome_rl::experiment::{run, ExperimentConfig};

fn main() -> outcome_rl::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
experiment = "thm31_rate"
seeds = [0, 1, 2, 3, 4]
n_grid = [128, 512, 2048, 8192]
"#,
    )?;
    let result = run(&cfg, 0)?;
    print!("{}", result.to_csv());
    println!("all pass flags set: {}", result.passed());
    Ok(())
}
