//! Datasets, split protocols and synthetic texture corpora.

mod dataset;
mod split;
mod synth;

pub use dataset::{ingest_directory, Dataset, Sample, SampleSource};
pub use split::{kfold_split, read_split_csv, stratified_split, write_split_csv, Part, SplitIndices};
pub use synth::{synth_dataset, write_dataset_dir, SynthSpec};
