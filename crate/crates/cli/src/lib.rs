//! The `steinhaus` command-line runner.
//!
//! Exit status: 0 when every gated verdict passes, 1 when a verification
//! battery, a majorant certificate or the Carleson table fails (and, under
//! `--strict`, when a criteria, sweep or criterion-dist verdict is
//! negative), 2 for an invalid configuration.
//!
//! Seeds: each task draws from the counter-based streams of
//! [`steinhaus::rng`], addressed by `(seed, tag, index)`; a single master
//! seed therefore reproduces any individual task.

// `!(x > a)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run, RunError, RunManifest};

/// Parses `argv`, runs, prints a one-line summary per task and returns the
/// process exit code.
pub fn main_with<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let cfg = match parse_config(argv) {
        Ok(cfg) => cfg,
        Err(ConfigError::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(e) => {
            eprintln!("steinhaus: {e}");
            return 2;
        }
    };
    match run(&cfg) {
        Ok(manifest) => {
            for t in &manifest.tasks {
                let status = match t.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "done",
                };
                println!("{status:4}  {}", t.name);
            }
            println!("wrote {} files to {}", manifest.files.len() + 1, cfg.out.display());
            manifest.exit_code
        }
        Err(e) => {
            eprintln!("steinhaus: {e}");
            e.exit_code()
        }
    }
}
