//! On-disk scene records, derived annotations and point-track extraction.

mod annotations;
mod raster;
mod rays;
mod record;
mod tracks;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::render::RenderError;

pub use annotations::{compute_bbox_2d, segmentation_histogram};
pub use raster::{read_raster, write_raster, Dtype, Raster, RasterData, HEADER_LEN, RASTER_MAGIC, RASTER_VERSION};
pub use record::{
    bundle_rasters, preview_file_name, preview_ppm, raster_file_name, read_layer, read_metadata, read_scene_record,
    read_tracks_file, to_canonical_json, write_scene_record, Bbox3d, CameraFrame, EventRecord, FrameRecord,
    InstanceFrame, InstanceRecord, Metadata, SceneRecord, SceneSettings, TracksDocument, CORE_LAYERS, EVENTS_FILE,
    FORMAT_VERSION, METADATA_FILE, TRACKS_FILE,
};
pub use rays::{metadata_camera, reference_rays, RayFixture, ReferenceRay};
pub use tracks::{extract_point_tracks, local_to_world, pixel_at, track_point, PointTrack, TrackConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExportError {
    #[error("format error: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("record is missing {0}")]
    IncompleteRecord(PathBuf),
    #[error("inconsistent record: {0}")]
    InconsistentRecord(String),
    #[error("no visible surface to place queries on")]
    NoQueryCandidates,
    #[error("unknown asset {0}")]
    UnknownAsset(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl ExportError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> ExportError {
        ExportError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}
