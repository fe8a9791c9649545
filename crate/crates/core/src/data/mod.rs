//! Dataset records, the synthetic curvature benchmark, JSONL and IDX
//! formats, and train/validation splitting.

mod curvature;
mod idx;
mod jsonl;
mod record;
mod split;

pub use curvature::{
    analytic_curvature, arc_length_table, equidistant_parameters, generate_curvature_dataset,
    generate_curvature_dataset_with, CurvatureConfig, FourierCurve, GeneratedDataset,
};
pub use idx::{parse_idx_images, parse_idx_labels, read_idx};
pub use jsonl::{read_jsonl, read_jsonl_from, write_jsonl, write_jsonl_to};
pub use record::DatasetRecord;
pub use split::{split_indices, split_train_val, SplitSpec};
