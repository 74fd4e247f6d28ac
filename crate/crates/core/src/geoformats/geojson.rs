//! Polygon subset of GeoJSON: Polygon, MultiPolygon, Feature and
//! FeatureCollection. A MultiPolygon becomes a single region holding the
//! rings of all its parts.

use serde_json::Value;

use super::types::Region;
use super::{FormatError, Result};

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn schema(msg: impl Into<String>) -> FormatError {
    FormatError::Schema(msg.into())
}

pub fn read_geojson_polygons(text: &str) -> Result<Vec<Region>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| FormatError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    collect(&doc, None, &mut out)?;
    Ok(out)
}

fn collect(obj: &Value, id: Option<String>, out: &mut Vec<Region>) -> Result<()> {
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("object without a string \"type\" member"))?;
    let default_id = || out.len().to_string();
    match kind {
        "FeatureCollection" => {
            let features = obj
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| schema("FeatureCollection without a features array"))?;
            for f in features {
                if f.get("type").and_then(Value::as_str) != Some("Feature") {
                    return Err(schema("FeatureCollection member is not a Feature"));
                }
                collect(f, None, out)?;
            }
        }
        "Feature" => {
            let props = obj.get("properties");
            let named = ["id", "name"]
                .iter()
                .find_map(|k| props.and_then(|p| p.get(*k)).and_then(Value::as_str))
                .or_else(|| obj.get("id").and_then(Value::as_str))
                .map(str::to_string);
            match obj.get("geometry") {
                None | Some(Value::Null) => {}
                Some(g) => collect(g, named, out)?,
            }
        }
        "Polygon" => {
            let rings = polygon(coordinates(obj)?)?;
            let id = id.unwrap_or_else(default_id);
            out.push(Region::new(id, rings)?);
        }
        "MultiPolygon" => {
            let parts = coordinates(obj)?
                .as_array()
                .ok_or_else(|| schema("MultiPolygon coordinates must be an array"))?;
            let mut rings = Vec::new();
            for p in parts {
                rings.extend(polygon(p)?);
            }
            let id = id.unwrap_or_else(default_id);
            out.push(Region::new(id, rings)?);
        }
        other => return Err(FormatError::UnsupportedGeometry(other.to_string())),
    }
    Ok(())
}

fn coordinates(obj: &Value) -> Result<&Value> {
    obj.get("coordinates")
        .ok_or_else(|| schema("geometry without coordinates"))
}

fn polygon(v: &Value) -> Result<Vec<Vec<(f64, f64)>>> {
    let rings = v
        .as_array()
        .ok_or_else(|| schema("polygon coordinates must be an array of rings"))?;
    rings
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| schema("ring must be an array of positions"))?
                .iter()
                .map(position)
                .collect()
        })
        .collect()
}

fn position(v: &Value) -> Result<(f64, f64)> {
    match v.as_array().map(Vec::as_slice) {
        Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(schema("position components must be numbers")),
        },
        _ => Err(schema("position must hold at least two numbers")),
    }
}
