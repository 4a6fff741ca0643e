//! One module per subcommand. Each `run` builds a serializable document,
//! prints any human-facing table to stdout, and hands the document to
//! [`crate::output::emit`].

pub mod bound;
pub mod compare;
pub mod correction;
pub mod kernel_eval;
pub mod modes_dump;
pub mod reproduce;
pub mod simulate;
pub mod spectrum;

use std::path::PathBuf;

use crate::config::RunParams;

/// Execution context shared by all subcommands.
pub struct Ctx {
    pub params: RunParams,
    pub out: Option<PathBuf>,
    pub verbose: u8,
}

impl Ctx {
    pub fn note(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Log-uniform grid with both endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
