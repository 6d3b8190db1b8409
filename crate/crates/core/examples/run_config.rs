//! Load an experiment config, run it and print the result; the library
//! counterpart of the command-line tool.
//!
//! `cargo run --example run_config -- configs/bound.json`

use std::path::PathBuf;

use rhc_lq::harness::{self, render, ExperimentConfig};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "configs/dare.json".into())
        .into();
    let result = ExperimentConfig::from_file(&path)
        .and_then(|cfg| {
            let format = cfg.output.format.unwrap_or(cfg.kind().default_format());
            harness::execute(&cfg).and_then(|out| render(&out, format))
        });
    match result {
        Ok(bytes) => print!("{}", String::from_utf8_lossy(&bytes)),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
