//! Color-range classification.
//!
//! A pixel matches a band when every RGB channel lies within the band's
//! tolerance of the band color (L∞ distance). Among matching bands the
//! nearest center wins and ties go to the lowest band index. Pixels with
//! alpha below 128 are NODATA.

use rayon::prelude::*;
use thiserror::Error;

use crate::geoformats::{BandSet, ColorBand, GeoTransform, RasterImage, Rgb, Rgba};

/// Alpha values below this are treated as transparent (NODATA).
pub const ALPHA_THRESHOLD: u8 = 128;

pub const DEFAULT_UNCLASSIFIED_COLOR: Rgb = Rgb::new(0x80, 0x80, 0x80);

/// Per-pixel label code. Band indices sort below UNCLASSIFIED, which sorts
/// below NODATA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u16);

impl Label {
    pub const UNCLASSIFIED: Label = Label(u16::MAX - 1);
    pub const NODATA: Label = Label(u16::MAX);

    pub fn band(index: usize) -> Label {
        assert!(
            index < Label::UNCLASSIFIED.0 as usize,
            "band index {index} out of range"
        );
        Label(index as u16)
    }

    pub fn band_index(self) -> Option<usize> {
        (self.0 < Label::UNCLASSIFIED.0).then_some(self.0 as usize)
    }

    pub fn code(self) -> u16 {
        self.0
    }

    pub fn is_nodata(self) -> bool {
        self == Label::NODATA
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("mask is {mask_w}x{mask_h} but raster is {raster_w}x{raster_h}")]
    DimensionMismatch {
        mask_w: usize,
        mask_h: usize,
        raster_w: usize,
        raster_h: usize,
    },
    #[error("label field uses band {band} but only {bands} bands were supplied")]
    BandOutOfRange { band: usize, bands: usize },
}

/// Row-major boolean grid; `true` admits a pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask bit count");
        Mask {
            width,
            height,
            bits,
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Pixel counts per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bands: Vec<u64>,
    pub unclassified: u64,
    pub nodata: u64,
}

impl Histogram {
    fn zero(n_bands: usize) -> Self {
        Histogram {
            bands: vec![0; n_bands],
            unclassified: 0,
            nodata: 0,
        }
    }

    fn add(&mut self, label: Label) {
        match label.band_index() {
            Some(i) => self.bands[i] += 1,
            None if label == Label::UNCLASSIFIED => self.unclassified += 1,
            None => self.nodata += 1,
        }
    }

    pub fn count(&self, label: Label) -> u64 {
        match label.band_index() {
            Some(i) => self.bands.get(i).copied().unwrap_or(0),
            None if label == Label::UNCLASSIFIED => self.unclassified,
            None => self.nodata,
        }
    }

    pub fn total(&self) -> u64 {
        self.bands.iter().sum::<u64>() + self.unclassified + self.nodata
    }
}

/// Label grid with its histogram, tied to a band count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    width: usize,
    height: usize,
    n_bands: usize,
    labels: Vec<Label>,
    histogram: Histogram,
}

impl LabelField {
    pub fn new(
        width: usize,
        height: usize,
        n_bands: usize,
        labels: Vec<Label>,
    ) -> Result<Self, ClassifyError> {
        assert_eq!(labels.len(), width * height, "label count");
        let mut histogram = Histogram::zero(n_bands);
        for &l in &labels {
            if let Some(b) = l.band_index() {
                if b >= n_bands {
                    return Err(ClassifyError::BandOutOfRange {
                        band: b,
                        bands: n_bands,
                    });
                }
            }
            histogram.add(l);
        }
        Ok(LabelField {
            width,
            height,
            n_bands,
            labels,
            histogram,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> Label {
        self.labels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[Label] {
        &self.labels[row * self.width..(row + 1) * self.width]
    }

    pub fn histogram(&self) -> &Histogram {
        &self.histogram
    }

    /// Copy with every pixel outside `mask` recoded NODATA.
    pub fn masked(&self, mask: &Mask) -> Result<LabelField, ClassifyError> {
        check_mask(mask, self.width, self.height)?;
        let labels = self
            .labels
            .iter()
            .zip(mask.bits())
            .map(|(&l, &keep)| if keep { l } else { Label::NODATA })
            .collect();
        LabelField::new(self.width, self.height, self.n_bands, labels)
    }
}

/// L∞ distance between the RGB channels of a pixel and a band color.
pub fn channel_distance(pixel: Rgba, color: Rgb) -> u8 {
    pixel
        .r
        .abs_diff(color.r)
        .max(pixel.g.abs_diff(color.g))
        .max(pixel.b.abs_diff(color.b))
}

pub fn match_band(pixel: Rgba, band: &ColorBand) -> bool {
    channel_distance(pixel, band.color) <= band.tolerance
}

pub fn classify_pixel(pixel: Rgba, bands: &BandSet) -> Label {
    classify_with(pixel, bands.bands())
}

fn classify_with(pixel: Rgba, bands: &[ColorBand]) -> Label {
    if pixel.a < ALPHA_THRESHOLD {
        return Label::NODATA;
    }
    let mut best: Option<(u8, usize)> = None;
    for (i, band) in bands.iter().enumerate() {
        let d = channel_distance(pixel, band.color);
        if d <= band.tolerance && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    match best {
        Some((_, i)) => Label::band(i),
        None => Label::UNCLASSIFIED,
    }
}

fn check_mask(mask: &Mask, width: usize, height: usize) -> Result<(), ClassifyError> {
    if mask.width != width || mask.height != height {
        return Err(ClassifyError::DimensionMismatch {
            mask_w: mask.width,
            mask_h: mask.height,
            raster_w: width,
            raster_h: height,
        });
    }
    Ok(())
}

/// Classifies every pixel; pixels excluded by `mask` are NODATA.
/// Rows are processed in parallel, with output identical to a sequential scan.
pub fn classify_raster(
    img: &RasterImage,
    bands: &BandSet,
    mask: Option<&Mask>,
) -> Result<LabelField, ClassifyError> {
    let (w, h) = (img.width(), img.height());
    if let Some(m) = mask {
        check_mask(m, w, h)?;
    }
    let band_list = bands.bands();
    let mut labels = vec![Label::NODATA; w * h];
    labels
        .par_chunks_mut(w)
        .zip(img.pixels().par_chunks(w))
        .enumerate()
        .for_each(|(row, (out, px))| {
            for (col, (slot, &p)) in out.iter_mut().zip(px).enumerate() {
                let admitted = mask.is_none_or(|m| m.bits[row * w + col]);
                if admitted {
                    *slot = classify_with(p, band_list);
                }
            }
        });
    LabelField::new(w, h, bands.len(), labels)
}

/// Paints each label: bands in their own color, UNCLASSIFIED in
/// `unclassified_color`, NODATA transparent or `unclassified_color`.
pub fn render_labels(
    field: &LabelField,
    bands: &BandSet,
    unclassified_color: Rgb,
    nodata_transparent: bool,
    transform: Option<GeoTransform>,
) -> Result<RasterImage, ClassifyError> {
    if let Some(b) = field.labels().iter().filter_map(|l| l.band_index()).max() {
        if b >= bands.len() {
            return Err(ClassifyError::BandOutOfRange {
                band: b,
                bands: bands.len(),
            });
        }
    }
    let pixels = field
        .labels()
        .iter()
        .map(|&l| match l.band_index() {
            Some(i) => Rgba::opaque(bands.band(i).color),
            None if l == Label::NODATA && nodata_transparent => Rgba::new(0, 0, 0, 0),
            None => Rgba::opaque(unclassified_color),
        })
        .collect();
    Ok(RasterImage::new(
        field.width(),
        field.height(),
        pixels,
        transform.unwrap_or_default(),
    )
    .expect("label field dimensions are positive"))
}
