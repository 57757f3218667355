//! Simulated datasets, coverage experiments and file formats.

mod functions;
mod io;
mod study;

pub use functions::{generate_dataset, TestFunction};
pub use io::{emit_json, format_f64, load_csv, read_csv, save_csv, write_csv, write_json};
pub use study::{
    coverage_study, CellValues, DhzCritical, GridRule, Method, PriorConfig, StudyConfig, StudyResult, StudyRow,
};
