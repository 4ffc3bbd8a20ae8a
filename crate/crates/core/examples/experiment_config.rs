//! Parses the bundled experiment files, runs one of them in memory and
//! prints the head of its CSV and its summary totals.

use aruba::harness::{parse_config, render};

const FILES: &[(&str, &str)] = &[
    ("static.toml", include_str!("configs/static.toml")),
    ("batch.toml", include_str!("configs/batch.toml")),
    ("federated.toml", include_str!("configs/federated.toml")),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, text) in FILES {
        let config = parse_config(text)?;
        println!("{name}: {} experiment, {} run(s)", config.kind.as_str(), config.run_seeds().len());
    }
    match parse_config("experiment = \"static\"\nextra = 1\n[meta]\neps = -1\n") {
        Ok(_) => unreachable!("invalid file accepted"),
        Err(errors) => println!("{errors}"),
    }

    let config = parse_config(FILES[0].1)?;
    let report = render(&config, 2)?;
    for line in report.csv.lines().take(10) {
        println!("{line}");
    }
    println!("totals: {}", serde_json::to_string_pretty(&report.summary["totals"])?);
    Ok(())
}
