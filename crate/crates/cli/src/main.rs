use std::process::ExitCode;

use clap::Parser;
use hhdmft_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let dir = &out.manifest.config.output_dir;
            for (stage, results) in &out.manifest.results {
                println!("{stage}: {}", headline(stage, results));
            }
            println!(
                "wrote {} files to {}",
                out.artifacts.len() + 1,
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn headline(stage: &str, r: &serde_json::Value) -> String {
    let keys: &[&str] = match stage {
        "ed" => &["e0", "mu"],
        "vqe" => &["energy", "theta0", "theta1"],
        "kvqa" => &["e0_exact"],
        "spectrum" => &["gap", "total_weight"],
        "dmft" => &["v_star", "z_star", "converged"],
        "dmft_scan" => &["crossing"],
        "trotter" | "vha" => &["max_abs_im_deviation"],
        "compare" => &["trotter_max_abs_im_deviation", "kvqa_max_abs_im_deviation"],
        _ => &[],
    };
    keys.iter()
        .map(|k| format!("{k} = {}", r[*k]))
        .collect::<Vec<_>>()
        .join(", ")
}
