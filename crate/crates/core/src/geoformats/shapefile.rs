//! Polygon records from an ESRI `.shp` main file.
//!
//! The 100-byte header mixes big-endian (file code, length) and
//! little-endian (version, shape type, bounds) fields; record headers are
//! big-endian and record contents little-endian. Only Null (0) and
//! Polygon (5) records are accepted.

use super::types::Region;
use super::{FormatError, Result};

const FILE_CODE: i32 = 9994;
const HEADER_LEN: usize = 100;
const SHAPE_NULL: i32 = 0;
const SHAPE_POLYGON: i32 = 5;

fn slice<'a>(buf: &'a [u8], at: usize, len: usize, what: &str) -> Result<&'a [u8]> {
    at.checked_add(len)
        .and_then(|end| buf.get(at..end))
        .ok_or_else(|| FormatError::Truncated(format!("{what} at byte {at}")))
}

fn be_i32(buf: &[u8], at: usize, what: &str) -> Result<i32> {
    let b = slice(buf, at, 4, what)?;
    Ok(i32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn le_i32(buf: &[u8], at: usize, what: &str) -> Result<i32> {
    let b = slice(buf, at, 4, what)?;
    Ok(i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn le_f64(buf: &[u8], at: usize, what: &str) -> Result<f64> {
    let b = slice(buf, at, 8, what)?;
    let mut a = [0u8; 8];
    a.copy_from_slice(b);
    Ok(f64::from_le_bytes(a))
}

/// Reads every polygon record. Region ids are the zero-based record
/// positions in the file (null records consume a position).
pub fn read_shapefile_polygons(bytes: &[u8]) -> Result<Vec<Region>> {
    let code = be_i32(bytes, 0, "file code")?;
    if code != FILE_CODE {
        return Err(FormatError::BadFileCode(code));
    }
    slice(bytes, 0, HEADER_LEN, "file header")?;
    let declared_words = be_i32(bytes, 24, "file length")?;
    if declared_words < (HEADER_LEN / 2) as i32 {
        return Err(FormatError::Truncated(format!(
            "file length field {declared_words} is shorter than the header"
        )));
    }
    let declared = declared_words as usize * 2;
    if declared > bytes.len() {
        return Err(FormatError::Truncated(format!(
            "header declares {declared} bytes, {} present",
            bytes.len()
        )));
    }
    let file_type = le_i32(bytes, 32, "shape type")?;
    if file_type != SHAPE_NULL && file_type != SHAPE_POLYGON {
        return Err(FormatError::UnsupportedShapeType(file_type));
    }
    let body = &bytes[..declared];

    let mut regions = Vec::new();
    let mut at = HEADER_LEN;
    let mut index = 0usize;
    while at < body.len() {
        let content_words = be_i32(body, at + 4, "record header")?;
        if content_words < 2 {
            return Err(FormatError::Truncated(format!(
                "record {index} content length {content_words}"
            )));
        }
        let content = slice(body, at + 8, content_words as usize * 2, "record content")?;
        let shape = le_i32(content, 0, "record shape type")?;
        match shape {
            SHAPE_NULL => {}
            SHAPE_POLYGON => {
                let rings = polygon_rings(content)?;
                regions.push(Region::new(index.to_string(), rings)?);
            }
            other => return Err(FormatError::UnsupportedShapeType(other)),
        }
        at += 8 + content.len();
        index += 1;
    }
    Ok(regions)
}

fn polygon_rings(content: &[u8]) -> Result<Vec<Vec<(f64, f64)>>> {
    // shape type (4) + bounding box (32)
    let num_parts = le_i32(content, 36, "part count")?;
    let num_points = le_i32(content, 40, "point count")?;
    if num_parts < 0 || num_points < 0 {
        return Err(FormatError::Schema(format!(
            "negative part ({num_parts}) or point ({num_points}) count"
        )));
    }
    let (num_parts, num_points) = (num_parts as usize, num_points as usize);
    let parts_at = 44;
    let points_at = parts_at + 4 * num_parts;
    slice(content, points_at, 16 * num_points, "polygon points")?;

    let mut starts = Vec::with_capacity(num_parts);
    for i in 0..num_parts {
        let s = le_i32(content, parts_at + 4 * i, "part index")?;
        if s < 0 || s as usize > num_points {
            return Err(FormatError::Schema(format!("part start {s} out of range")));
        }
        starts.push(s as usize);
    }
    if starts.windows(2).any(|w| w[0] > w[1]) {
        return Err(FormatError::Schema("part starts are not ascending".into()));
    }

    let mut rings = Vec::with_capacity(num_parts);
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(num_points);
        let mut ring = Vec::with_capacity(end - start);
        for p in start..end {
            let at = points_at + 16 * p;
            ring.push((
                le_f64(content, at, "point x")?,
                le_f64(content, at + 8, "point y")?,
            ));
        }
        rings.push(ring);
    }
    Ok(rings)
}
