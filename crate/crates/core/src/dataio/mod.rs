//! Dataset ingestion, generation, partitioning, and persistence.
//!
//! Two shapes of data flow through the harness: [`DenseDataset`], a labeled
//! dense matrix in the `label,f1,...,fF` text format, and [`TabularFrame`], a
//! typed table read from RFC-4180 CSV. Multi-part datasets are described by a
//! [`DatasetManifest`].

mod dense;
mod manifest;
pub mod synthetic;
mod tabular;

pub use dense::{parse_dense, read_dense_file, sniff_num_features, write_dense, write_dense_file, DenseDataset, LabelMap};
pub use manifest::{load_manifest, split_parts, write_split, DatasetManifest, LabelKind};
pub use synthetic::{generate_movies, generate_reviews, generate_synthetic, movie_schema};
pub use tabular::{
    clean_currency, is_missing_token, parse_tabular, write_tabular, Cell, Column, ColumnKind,
    TabularFrame,
};
