//! Readers and writers for every external format the pipeline touches.
//!
//! All of these are pure functions of their input buffers. Binary parsers
//! bounds-check every access and report [`FormatError::Truncated`] instead of
//! returning partial results.

mod census;
mod geojson;
mod geotiff;
mod ppm;
mod rangelist;
mod shapefile;
mod types;

pub use census::{load_census_csv, load_hierarchy_csv, CensusRecord, CensusTable};
pub use geojson::read_geojson_polygons;
pub use geotiff::{read_geotiff, read_geotiff_with_info, write_geotiff, ByteOrder, TiffInfo};
pub use ppm::write_ppm;
pub use rangelist::{class_label_from_name, parse_rangelist_xml, serialize_rangelist_xml};
pub use shapefile::read_shapefile_polygons;
pub use types::{
    BandSet, ColorBand, GeoTransform, Hierarchy, RasterImage, Region, Rgb, Rgba, DEFAULT_CRS,
    MAX_BANDS,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("not a TIFF stream (bad magic)")]
    BadMagic,
    #[error("unsupported TIFF feature: {0}")]
    UnsupportedFeature(String),
    #[error("truncated input: {0}")]
    Truncated(String),
    #[error("bad shapefile file code {0} (expected 9994)")]
    BadFileCode(i32),
    #[error("unsupported shape type {0} (only Null and Polygon are read)")]
    UnsupportedShapeType(i32),
    #[error("JSON parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("CSV error at line {line}: {message}")]
    Csv { line: u64, message: String },
}

pub type Result<T> = std::result::Result<T, FormatError>;
