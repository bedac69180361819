//! Experiment orchestration behind the `pcu` command line.
//!
//! Output layout under `out/`:
//!
//! ```text
//! samples/<dataset>/<split>/<model>_<scale>.xyz
//! datasets/<dataset>/<split>/<method>_<scale>/      bundle
//! models/<dataset>/<method>_<scale>_<variant>.pcuw  weights (+ .json, .history.csv, .train.json)
//! reports/                                          CSV, JSON and markdown
//! ```

mod commands;
mod config;
mod report;

pub use commands::{BundleStats, Harness, ResultRow, RunRecord, Split, TrainRecord, CSV_HEADER};
pub use config::{DataSection, DatasetSource, EvalSection, ExperimentConfig, Scale, TrainSection, RATIO};
pub use report::{ablation_footnote, render_markdown_table, rows_to_csv};

use crate::error::{Error, Result};

/// Run `f` on a rayon pool with `jobs` workers (all cores when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    let pool = b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
