//! Pixel georeferencing, region masks, pixel areas and per-class roll-ups.
//!
//! Region membership is decided by pixel center, so every pixel counts
//! fully or not at all.

mod aggregate;
mod compare;
mod report;

pub use aggregate::{aggregate_categorical, AggregationRule};
pub use compare::{compare, ComparisonReport, ComparisonRow, RowStatus};
pub use report::{area_report, AreaReport, BandArea, CategoryArea, ClassArea};

use rayon::prelude::*;
use thiserror::Error;

use crate::classify::Mask;
use crate::geoformats::{FormatError, GeoTransform, Region};

/// Kilometres per degree of longitude at the equator.
pub const KM_PER_DEG_LON: f64 = 111.320;
/// Kilometres per degree of latitude.
pub const KM_PER_DEG_LAT: f64 = 110.574;

#[derive(Debug, Error, PartialEq)]
pub enum ZonalError {
    #[error("fixed area mode requires a pixel area")]
    MissingFixedValue,
    #[error("fixed pixel area must be positive and finite, got {0}")]
    BadFixedValue(f64),
    #[error("aggregation factor must be at least 2, got {0}")]
    BadFactor(usize),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaModeKind {
    Fixed,
    Projected,
    Geographic,
}

/// How the ground area of a pixel is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AreaMode {
    /// Every pixel covers this many km².
    Fixed(f64),
    /// Scales are metres.
    Projected,
    /// Scales are degrees; area shrinks with the cosine of the row latitude.
    Geographic,
}

impl AreaMode {
    pub fn resolve(kind: AreaModeKind, fixed_value: Option<f64>) -> Result<AreaMode, ZonalError> {
        match kind {
            AreaModeKind::Fixed => {
                let v = fixed_value.ok_or(ZonalError::MissingFixedValue)?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ZonalError::BadFixedValue(v));
                }
                Ok(AreaMode::Fixed(v))
            }
            AreaModeKind::Projected => Ok(AreaMode::Projected),
            AreaModeKind::Geographic => Ok(AreaMode::Geographic),
        }
    }

    /// True when every row has the same pixel area.
    pub fn is_row_invariant(&self) -> bool {
        !matches!(self, AreaMode::Geographic)
    }
}

pub fn pixel_center_geo(t: &GeoTransform, row: usize, col: usize) -> (f64, f64) {
    (
        t.origin_x + (col as f64 + 0.5) * t.scale_x,
        t.origin_y - (row as f64 + 0.5) * t.scale_y,
    )
}

pub fn pixel_area_km2(t: &GeoTransform, row: usize, mode: AreaMode) -> f64 {
    match mode {
        AreaMode::Fixed(v) => v,
        AreaMode::Projected => t.scale_x * t.scale_y / 1e6,
        AreaMode::Geographic => {
            let lat = t.origin_y - (row as f64 + 0.5) * t.scale_y;
            (t.scale_x * KM_PER_DEG_LON * lat.to_radians().cos()) * (t.scale_y * KM_PER_DEG_LAT)
        }
    }
}

/// Sum of all pixel areas of a `width`×`height` grid.
pub fn grid_area_km2(t: &GeoTransform, width: usize, height: usize, mode: AreaMode) -> f64 {
    (0..height)
        .map(|row| width as f64 * pixel_area_km2(t, row, mode))
        .sum()
}

/// x coordinate where the edge a→b crosses the horizontal line at `y`, if
/// the edge straddles it under the half-open rule (one endpoint strictly
/// above `y`, the other at or below).
#[inline]
fn edge_crossing(a: (f64, f64), b: (f64, f64), y: f64) -> Option<f64> {
    if (a.1 > y) != (b.1 > y) {
        Some(a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1))
    } else {
        None
    }
}

/// Even-odd test over all rings. A point counts as inside when an odd
/// number of ring edges cross the ray running toward +x.
pub fn point_in_region(p: (f64, f64), region: &Region) -> bool {
    let mut inside = false;
    for ring in region.rings() {
        for edge in ring.windows(2) {
            if let Some(x) = edge_crossing(edge[0], edge[1], p.1) {
                if p.0 < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Marks the pixels whose centers fall inside `region`. Agrees bit for bit
/// with calling [`point_in_region`] on every center.
pub fn rasterize_region(region: &Region, t: &GeoTransform, width: usize, height: usize) -> Mask {
    let mut bits = vec![false; width * height];
    bits.par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out)| {
            let (_, y) = pixel_center_geo(t, row, 0);
            let mut xs: Vec<f64> = region
                .rings()
                .iter()
                .flat_map(|ring| ring.windows(2))
                .filter_map(|e| edge_crossing(e[0], e[1], y))
                .collect();
            if xs.is_empty() {
                return;
            }
            xs.sort_by(f64::total_cmp);
            // Parity of crossings strictly right of each center.
            let mut right = xs.len();
            let mut k = 0;
            for (col, slot) in out.iter_mut().enumerate() {
                let (x, _) = pixel_center_geo(t, row, col);
                while k < xs.len() && xs[k] <= x {
                    k += 1;
                    right -= 1;
                }
                *slot = right % 2 == 1;
            }
        });
    Mask::new(width, height, bits)
}
