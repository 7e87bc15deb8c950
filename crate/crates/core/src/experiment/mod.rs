//! Grid-search experiments and their file formats.

pub mod config;
pub mod export;
pub mod grid;
pub mod model_io;

pub use config::Config;
pub use export::{export_surface, surface_csv, surface_matrix, Metric, SURFACE_HEADER};
pub use grid::{
    apply_train_keys, cell_framework, cell_hyperparams, run_grid, run_grid_on, CellStatus, DatasetSource,
    GridSpec, SurfaceRow, SurfaceTable,
};
pub use model_io::{load_model, model_from_str, model_to_string, save_model};
