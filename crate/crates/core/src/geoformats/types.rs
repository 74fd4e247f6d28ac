use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FormatError, Result};

pub const DEFAULT_CRS: u16 = 4326;

/// Largest number of bands a [`BandSet`] may hold; the two top label codes
/// are reserved for UNCLASSIFIED and NODATA.
pub const MAX_BANDS: usize = u16::MAX as usize - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    /// Parses exactly six hex digits, either case.
    pub fn from_hex(text: &str) -> Option<Rgb> {
        if text.len() != 6 || !text.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let v = u32::from_str_radix(text, 16).ok()?;
        Some(Rgb::new((v >> 16) as u8, (v >> 8) as u8, v as u8))
    }

    pub fn to_hex(self) -> String {
        format!("{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Rgba { r, g, b, a }
    }

    pub const fn opaque(c: Rgb) -> Self {
        Rgba::new(c.r, c.g, c.b, 255)
    }

    pub fn rgb(self) -> Rgb {
        Rgb::new(self.r, self.g, self.b)
    }
}

/// Affine mapping from pixel indices to map coordinates. Rows run downward,
/// so y decreases by `scale_y` per row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub crs_code: u16,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, scale_x: f64, scale_y: f64) -> Self {
        GeoTransform {
            origin_x,
            origin_y,
            scale_x,
            scale_y,
            crs_code: DEFAULT_CRS,
        }
    }

    pub fn with_crs(mut self, crs_code: u16) -> Self {
        self.crs_code = crs_code;
        self
    }

    pub fn identity() -> Self {
        GeoTransform::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.scale_x > 0.0
            && self.scale_y > 0.0
            && self.scale_x.is_finite()
            && self.scale_y.is_finite()
            && self.origin_x.is_finite()
            && self.origin_y.is_finite()
    }

    /// Transform of a grid downsampled by an integer `factor`.
    pub fn downsampled(&self, factor: usize) -> Self {
        GeoTransform {
            scale_x: self.scale_x * factor as f64,
            scale_y: self.scale_y * factor as f64,
            ..*self
        }
    }
}

impl Default for GeoTransform {
    fn default() -> Self {
        GeoTransform::identity()
    }
}

/// Georeferenced RGBA raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgba>,
    pub transform: GeoTransform,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<Rgba>,
        transform: GeoTransform,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FormatError::Schema(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(FormatError::Schema(format!(
                "{} pixels supplied for a {width}x{height} raster",
                pixels.len()
            )));
        }
        if !transform.is_valid() {
            return Err(FormatError::Schema(
                "transform scales must be positive and finite".into(),
            ));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
            transform,
        })
    }

    pub fn filled(width: usize, height: usize, pixel: Rgba, transform: GeoTransform) -> Self {
        RasterImage::new(width, height, vec![pixel; width * height], transform)
            .expect("filled raster dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgba] {
        &mut self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> Rgba {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[Rgba] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

/// One color range: a center color and a per-channel tolerance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorBand {
    pub name: String,
    pub comment: Option<String>,
    pub color: Rgb,
    pub tolerance: u8,
    pub class_label: String,
}

impl ColorBand {
    /// Builds a band whose class label is derived from `name`
    /// ("Band 1 - Wheat" becomes "Wheat").
    pub fn new(name: impl Into<String>, color: Rgb, tolerance: u8) -> Self {
        let name = name.into();
        let class_label = super::class_label_from_name(&name);
        ColorBand {
            name,
            comment: None,
            color,
            tolerance,
            class_label,
        }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = Some(comment.into());
        self
    }

    pub fn with_class(mut self, class_label: impl Into<String>) -> Self {
        self.class_label = class_label.into();
        self
    }
}

/// Category → member edges. Members are class labels or other categories.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Hierarchy {
    categories: Vec<(String, Vec<String>)>,
}

impl Hierarchy {
    pub fn empty() -> Self {
        Hierarchy::default()
    }

    /// Builds a hierarchy from membership edges, merging repeated categories
    /// in first-seen order.
    pub fn from_edges<I, C, M>(edges: I) -> Self
    where
        I: IntoIterator<Item = (C, M)>,
        C: Into<String>,
        M: Into<String>,
    {
        let mut h = Hierarchy::empty();
        for (cat, member) in edges {
            h.add(cat.into(), member.into());
        }
        h
    }

    fn add(&mut self, category: String, member: String) {
        match self.categories.iter_mut().find(|(c, _)| *c == category) {
            Some((_, members)) => {
                if !members.contains(&member) {
                    members.push(member);
                }
            }
            None => self.categories.push((category, vec![member])),
        }
    }

    /// Crop = {Wheat, Canola, Pulses, Misc Crop}, Agri Land = {Crop, Pasture},
    /// restricted to the classes that `bands` actually defines. Categories
    /// left with no members are dropped.
    pub fn default_for(bands: &[ColorBand]) -> Self {
        let present: BTreeSet<&str> = bands.iter().map(|b| b.class_label.as_str()).collect();
        let crop: Vec<String> = ["Wheat", "Canola", "Pulses", "Misc Crop"]
            .iter()
            .filter(|c| present.contains(*c))
            .map(|c| c.to_string())
            .collect();
        let mut h = Hierarchy::empty();
        let has_crop = !crop.is_empty();
        if has_crop {
            h.categories.push(("Crop".into(), crop));
        }
        let mut agri = Vec::new();
        if has_crop {
            agri.push("Crop".to_string());
        }
        if present.contains("Pasture") {
            agri.push("Pasture".to_string());
        }
        if !agri.is_empty() {
            h.categories.push(("Agri Land".into(), agri));
        }
        h
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.categories
            .iter()
            .map(|(c, m)| (c.as_str(), m.as_slice()))
    }

    pub fn members(&self, category: &str) -> Option<&[String]> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, m)| m.as_slice())
    }

    pub fn is_category(&self, name: &str) -> bool {
        self.members(name).is_some()
    }

    /// Leaf class labels reachable from `category`, deduplicated, in
    /// first-reached order.
    pub fn leaf_classes(&self, category: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.collect_leaves(category, &mut out, &mut seen);
        out
    }

    fn collect_leaves(&self, name: &str, out: &mut Vec<String>, seen: &mut BTreeSet<String>) {
        match self.members(name) {
            Some(members) => {
                for m in members {
                    self.collect_leaves(m, out, seen);
                }
            }
            None => {
                if seen.insert(name.to_string()) {
                    out.push(name.to_string());
                }
            }
        }
    }

    fn validate(&self, classes: &BTreeSet<&str>) -> Result<()> {
        for (cat, members) in &self.categories {
            if classes.contains(cat.as_str()) {
                return Err(FormatError::Schema(format!(
                    "category {cat:?} collides with a band class label"
                )));
            }
            for m in members {
                if !classes.contains(m.as_str()) && !self.is_category(m) {
                    return Err(FormatError::Schema(format!(
                        "category {cat:?} references unknown class {m:?}"
                    )));
                }
            }
        }
        // Cycle check by depth-first search with colors.
        let index: HashMap<&str, usize> = self
            .categories
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (c.as_str(), i))
            .collect();
        let mut state = vec![0u8; self.categories.len()];
        fn visit(
            i: usize,
            h: &Hierarchy,
            index: &HashMap<&str, usize>,
            state: &mut [u8],
        ) -> Result<()> {
            match state[i] {
                1 => {
                    return Err(FormatError::Schema(format!(
                        "hierarchy cycle through {:?}",
                        h.categories[i].0
                    )))
                }
                2 => return Ok(()),
                _ => {}
            }
            state[i] = 1;
            for m in &h.categories[i].1 {
                if let Some(&j) = index.get(m.as_str()) {
                    visit(j, h, index, state)?;
                }
            }
            state[i] = 2;
            Ok(())
        }
        for i in 0..self.categories.len() {
            visit(i, self, &index, &mut state)?;
        }
        Ok(())
    }
}

/// Ordered color bands plus the category hierarchy used for roll-ups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BandSet {
    bands: Vec<ColorBand>,
    hierarchy: Hierarchy,
}

impl BandSet {
    pub fn new(bands: Vec<ColorBand>, hierarchy: Hierarchy) -> Result<Self> {
        if bands.len() > MAX_BANDS {
            return Err(FormatError::Schema(format!(
                "{} bands exceeds the limit of {MAX_BANDS}",
                bands.len()
            )));
        }
        for b in &bands {
            if b.name.trim().is_empty() {
                return Err(FormatError::Schema("band name is empty".into()));
            }
            if b.class_label.trim().is_empty() {
                return Err(FormatError::Schema(format!(
                    "band {:?} has an empty class label",
                    b.name
                )));
            }
        }
        let classes: BTreeSet<&str> = bands.iter().map(|b| b.class_label.as_str()).collect();
        hierarchy.validate(&classes)?;
        Ok(BandSet { bands, hierarchy })
    }

    pub fn with_default_hierarchy(bands: Vec<ColorBand>) -> Result<Self> {
        let hierarchy = Hierarchy::default_for(&bands);
        BandSet::new(bands, hierarchy)
    }

    pub fn bands(&self) -> &[ColorBand] {
        &self.bands
    }

    pub fn band(&self, index: usize) -> &ColorBand {
        &self.bands[index]
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Replaces the hierarchy, validating it against the bands.
    pub fn set_hierarchy(&mut self, hierarchy: Hierarchy) -> Result<()> {
        let classes: BTreeSet<&str> = self.bands.iter().map(|b| b.class_label.as_str()).collect();
        hierarchy.validate(&classes)?;
        self.hierarchy = hierarchy;
        Ok(())
    }

    /// Class labels in first-appearance order.
    pub fn classes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for b in &self.bands {
            if !out.contains(&b.class_label.as_str()) {
                out.push(&b.class_label);
            }
        }
        out
    }

    pub fn set_tolerance(&mut self, index: usize, tolerance: u8) {
        self.bands[index].tolerance = tolerance;
    }

    pub fn set_color(&mut self, index: usize, color: Rgb) {
        self.bands[index].color = color;
    }
}

/// A boundary polygon. Rings are closed and combined with the even-odd rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    rings: Vec<Vec<(f64, f64)>>,
}

impl Region {
    /// Validates ring closure and length. Open rings are closed by repeating
    /// their first point.
    pub fn new(id: impl Into<String>, rings: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let mut closed = Vec::with_capacity(rings.len());
        for mut ring in rings {
            if let (Some(&first), Some(&last)) = (ring.first(), ring.last()) {
                if first != last {
                    ring.push(first);
                }
            }
            if ring.len() < 4 {
                return Err(FormatError::Schema(format!(
                    "ring has {} points, at least 4 required",
                    ring.len()
                )));
            }
            if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(FormatError::Schema(
                    "ring contains a non-finite coordinate".into(),
                ));
            }
            closed.push(ring);
        }
        Ok(Region {
            id: id.into(),
            rings: closed,
        })
    }

    pub fn rings(&self) -> &[Vec<(f64, f64)>] {
        &self.rings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_parsing() {
        assert_eq!(Rgb::from_hex("606f55"), Some(Rgb::new(0x60, 0x6f, 0x55)));
        assert_eq!(Rgb::from_hex("606F55"), Some(Rgb::new(0x60, 0x6f, 0x55)));
        assert_eq!(Rgb::from_hex("606f5"), None);
        assert_eq!(Rgb::from_hex("+06f55"), None);
        assert_eq!(Rgb::new(0xA5, 0x93, 0x85).to_hex(), "a59385");
    }

    #[test]
    fn raster_rejects_bad_shapes() {
        let t = GeoTransform::identity();
        assert!(RasterImage::new(0, 1, vec![], t).is_err());
        assert!(RasterImage::new(2, 2, vec![Rgba::default(); 3], t).is_err());
        let bad = GeoTransform::new(0.0, 0.0, 0.0, 1.0);
        assert!(RasterImage::new(1, 1, vec![Rgba::default()], bad).is_err());
    }

    #[test]
    fn default_hierarchy_is_pruned_to_present_classes() {
        let bands = vec![
            ColorBand::new("Band 1 - Wheat", Rgb::new(0, 0, 0), 1),
            ColorBand::new("Band 2 - Water", Rgb::new(0, 0, 0), 1),
        ];
        let h = Hierarchy::default_for(&bands);
        assert_eq!(h.members("Crop").unwrap(), ["Wheat".to_string()]);
        assert_eq!(h.members("Agri Land").unwrap(), ["Crop".to_string()]);
        assert!(Hierarchy::default_for(&[]).is_empty());
    }

    #[test]
    fn hierarchy_cycles_and_dangling_members_rejected() {
        let bands = vec![ColorBand::new("A", Rgb::default(), 0)];
        let cyc = Hierarchy::from_edges([("X", "Y"), ("Y", "X")]);
        assert!(BandSet::new(bands.clone(), cyc).is_err());
        let dangling = Hierarchy::from_edges([("X", "Nope")]);
        assert!(BandSet::new(bands.clone(), dangling).is_err());
        let clash = Hierarchy::from_edges([("A", "A")]);
        assert!(BandSet::new(bands.clone(), clash).is_err());
        let ok = Hierarchy::from_edges([("X", "A"), ("Y", "X")]);
        let set = BandSet::new(bands, ok).unwrap();
        assert_eq!(set.hierarchy().leaf_classes("Y"), vec!["A".to_string()]);
    }

    #[test]
    fn region_closes_open_rings() {
        let r = Region::new("r", vec![vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]]).unwrap();
        assert_eq!(r.rings()[0].len(), 4);
        assert_eq!(r.rings()[0][0], r.rings()[0][3]);
        assert!(Region::new("r", vec![vec![(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)]]).is_err());
    }
}
