//! Datasets, CSV ingestion, synthetic tasks, metrics and windowing.

mod dataset;
mod io;
mod metrics;
mod series;
mod tasks;

pub use dataset::{Dataset, Normalization, Scaler};
pub use io::{load_columns, load_csv, read_columns, read_csv, write_csv};
pub use metrics::{metrics, nmse, Metrics};
pub use series::{fm_sine_series, window_series};
pub use tasks::{gen_task, Task};
