//! PLY point clouds, g2o 2D pose graphs, benchmark CSV and run manifests.

mod g2o;
mod ply;
mod records;

pub use g2o::{format_g2o_2d, parse_g2o_2d, read_g2o_2d, write_g2o_2d, G2oGraph2};
pub use ply::{downsample_and_box, parse_ply, read_ply, write_ply, PlyCloud};
pub use records::{
    format_float, parse_records_csv, read_records_csv, records_to_csv_string, write_manifest_json,
    write_records_csv, RecordWriter, RunManifest, RECORD_HEADER,
};
