//! Baseline TIFF 6.0 subset with the three GeoTIFF tags needed to carry a
//! north-up affine transform.
//!
//! Reading accepts either byte order, uncompressed chunky strips of 8-bit
//! RGB or RGBA. Writing always emits little-endian RGBA strips of roughly
//! 64 KiB each.

use super::types::{GeoTransform, RasterImage, Rgba, DEFAULT_CRS};
use super::{FormatError, Result};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTE_COUNTS: u16 = 325;
const TAG_EXTRA_SAMPLES: u16 = 338;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_GEO_KEY_DIRECTORY: u16 = 34735;

const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

const KEY_GT_MODEL_TYPE: u16 = 1024;
const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;
const USER_DEFINED: u16 = 32767;

const TARGET_STRIP_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    LittleEndian,
    BigEndian,
}

/// Container-level facts that are not part of the raster itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TiffInfo {
    pub byte_order: ByteOrder,
    pub samples_per_pixel: u16,
    pub strips: usize,
    /// False when the pixel-scale or tiepoint tag is missing; the transform
    /// is then the identity.
    pub georeferenced: bool,
    /// GeoKey the CRS code was read from, if any.
    pub crs_key: Option<u16>,
}

struct Reader<'a> {
    buf: &'a [u8],
    order: ByteOrder,
}

impl<'a> Reader<'a> {
    fn bytes(&self, offset: usize, len: usize, what: &str) -> Result<&'a [u8]> {
        offset
            .checked_add(len)
            .and_then(|end| self.buf.get(offset..end))
            .ok_or_else(|| FormatError::Truncated(format!("{what} at offset {offset}")))
    }

    fn u16(&self, offset: usize, what: &str) -> Result<u16> {
        let b = self.bytes(offset, 2, what)?;
        let b = [b[0], b[1]];
        Ok(match self.order {
            ByteOrder::LittleEndian => u16::from_le_bytes(b),
            ByteOrder::BigEndian => u16::from_be_bytes(b),
        })
    }

    fn u32(&self, offset: usize, what: &str) -> Result<u32> {
        let b = self.bytes(offset, 4, what)?;
        let b = [b[0], b[1], b[2], b[3]];
        Ok(match self.order {
            ByteOrder::LittleEndian => u32::from_le_bytes(b),
            ByteOrder::BigEndian => u32::from_be_bytes(b),
        })
    }

    fn f64(&self, offset: usize, what: &str) -> Result<f64> {
        let b = self.bytes(offset, 8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(match self.order {
            ByteOrder::LittleEndian => f64::from_le_bytes(a),
            ByteOrder::BigEndian => f64::from_be_bytes(a),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    tag: u16,
    field_type: u16,
    count: u32,
    /// Offset of the 4-byte value/offset field inside the IFD entry.
    field_pos: usize,
}

fn type_size(field_type: u16) -> Option<usize> {
    match field_type {
        1 | 2 | 6 | 7 => Some(1),
        3 | 8 => Some(2),
        4 | 9 | 11 => Some(4),
        5 | 10 | 12 => Some(8),
        _ => None,
    }
}

impl Entry {
    fn name(&self) -> String {
        format!("tag {}", self.tag)
    }

    fn data_offset(&self, r: &Reader) -> Result<(usize, usize)> {
        let size = type_size(self.field_type).ok_or_else(|| {
            FormatError::UnsupportedFeature(format!(
                "field type {} for {}",
                self.field_type,
                self.name()
            ))
        })?;
        let total = size
            .checked_mul(self.count as usize)
            .ok_or_else(|| FormatError::Truncated(self.name()))?;
        let offset = if total <= 4 {
            self.field_pos
        } else {
            r.u32(self.field_pos, &self.name())? as usize
        };
        // Bounds check the whole payload up front.
        r.bytes(offset, total, &self.name())?;
        Ok((offset, size))
    }

    fn unsigned(&self, r: &Reader) -> Result<Vec<u64>> {
        let (offset, size) = self.data_offset(r)?;
        let name = self.name();
        (0..self.count as usize)
            .map(|i| {
                let at = offset + i * size;
                match self.field_type {
                    1 => Ok(r.bytes(at, 1, &name)?[0] as u64),
                    3 => Ok(r.u16(at, &name)? as u64),
                    4 => Ok(r.u32(at, &name)? as u64),
                    other => Err(FormatError::UnsupportedFeature(format!(
                        "{name} has non-integer type {other}"
                    ))),
                }
            })
            .collect()
    }

    fn doubles(&self, r: &Reader) -> Result<Vec<f64>> {
        if self.field_type != TYPE_DOUBLE {
            return Err(FormatError::UnsupportedFeature(format!(
                "{} must be DOUBLE, found type {}",
                self.name(),
                self.field_type
            )));
        }
        let (offset, _) = self.data_offset(r)?;
        (0..self.count as usize)
            .map(|i| r.f64(offset + i * 8, &self.name()))
            .collect()
    }
}

fn single(entry: Option<&Entry>, r: &Reader, default: Option<u64>) -> Result<u64> {
    match entry {
        Some(e) => e
            .unsigned(r)?
            .first()
            .copied()
            .ok_or_else(|| FormatError::Truncated(format!("{} has no values", e.name()))),
        None => default.ok_or_else(|| FormatError::Truncated("missing required tag".into())),
    }
}

pub fn read_geotiff(bytes: &[u8]) -> Result<RasterImage> {
    read_geotiff_with_info(bytes).map(|(img, _)| img)
}

pub fn read_geotiff_with_info(bytes: &[u8]) -> Result<(RasterImage, TiffInfo)> {
    let order = match bytes.get(0..4) {
        Some(b"II*\0") => ByteOrder::LittleEndian,
        Some(b"MM\0*") => ByteOrder::BigEndian,
        Some(_) => return Err(FormatError::BadMagic),
        None if bytes.len() >= 2 && !matches!(&bytes[..2], b"II" | b"MM") => {
            return Err(FormatError::BadMagic)
        }
        None => return Err(FormatError::Truncated("TIFF header".into())),
    };
    let r = Reader { buf: bytes, order };
    let ifd = r.u32(4, "IFD offset")? as usize;
    let n = r.u16(ifd, "IFD entry count")? as usize;
    r.bytes(ifd + 2, n * 12, "IFD entries")?;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let at = ifd + 2 + i * 12;
        entries.push(Entry {
            tag: r.u16(at, "tag id")?,
            field_type: r.u16(at + 2, "field type")?,
            count: r.u32(at + 4, "value count")?,
            field_pos: at + 8,
        });
    }
    let find = |tag: u16| entries.iter().find(|e| e.tag == tag);

    for tag in [
        TAG_TILE_WIDTH,
        TAG_TILE_LENGTH,
        TAG_TILE_OFFSETS,
        TAG_TILE_BYTE_COUNTS,
    ] {
        if find(tag).is_some() {
            return Err(FormatError::UnsupportedFeature("tiled layout".into()));
        }
    }

    let width = single(find(TAG_IMAGE_WIDTH), &r, None)
        .map_err(|_| FormatError::Truncated("ImageWidth tag missing".into()))?
        as usize;
    let height = single(find(TAG_IMAGE_LENGTH), &r, None)
        .map_err(|_| FormatError::Truncated("ImageLength tag missing".into()))?
        as usize;
    if width == 0 || height == 0 {
        return Err(FormatError::UnsupportedFeature(format!(
            "empty image {width}x{height}"
        )));
    }
    let compression = single(find(TAG_COMPRESSION), &r, Some(1))?;
    if compression != 1 {
        return Err(FormatError::UnsupportedFeature(format!(
            "compression {compression}"
        )));
    }
    let spp = single(find(TAG_SAMPLES_PER_PIXEL), &r, Some(1))?;
    if spp != 3 && spp != 4 {
        return Err(FormatError::UnsupportedFeature(format!(
            "{spp} samples per pixel"
        )));
    }
    let bps = match find(TAG_BITS_PER_SAMPLE) {
        Some(e) => e.unsigned(&r)?,
        None => vec![1],
    };
    if bps.is_empty() || bps.iter().any(|&b| b != 8) {
        return Err(FormatError::UnsupportedFeature(format!(
            "bits per sample {bps:?}"
        )));
    }
    let photometric = single(find(TAG_PHOTOMETRIC), &r, Some(2))?;
    if photometric != 2 {
        return Err(FormatError::UnsupportedFeature(format!(
            "photometric interpretation {photometric}"
        )));
    }
    let planar = single(find(TAG_PLANAR_CONFIG), &r, Some(1))?;
    if planar != 1 {
        return Err(FormatError::UnsupportedFeature(
            "planar configuration".into(),
        ));
    }
    if single(find(TAG_PREDICTOR), &r, Some(1))? != 1 {
        return Err(FormatError::UnsupportedFeature("predictor".into()));
    }
    if let Some(e) = find(TAG_SAMPLE_FORMAT) {
        if e.unsigned(&r)?.iter().any(|&f| f != 1) {
            return Err(FormatError::UnsupportedFeature(
                "non-integer sample format".into(),
            ));
        }
    }

    let rows_per_strip =
        (single(find(TAG_ROWS_PER_STRIP), &r, Some(u32::MAX as u64))? as usize).clamp(1, height);
    let strips = height.div_ceil(rows_per_strip);
    let offsets = find(TAG_STRIP_OFFSETS)
        .ok_or_else(|| FormatError::Truncated("StripOffsets tag missing".into()))?
        .unsigned(&r)?;
    let counts = find(TAG_STRIP_BYTE_COUNTS)
        .ok_or_else(|| FormatError::Truncated("StripByteCounts tag missing".into()))?
        .unsigned(&r)?;
    if offsets.len() < strips || counts.len() < strips {
        return Err(FormatError::Truncated(format!(
            "{strips} strips expected, {} offsets and {} byte counts present",
            offsets.len(),
            counts.len()
        )));
    }

    let spp = spp as usize;
    let row_bytes = width
        .checked_mul(spp)
        .ok_or_else(|| FormatError::UnsupportedFeature("image too wide".into()))?;
    let mut pixels = Vec::with_capacity(width.saturating_mul(height).min(1 << 28));
    for s in 0..strips {
        let rows = rows_per_strip.min(height - s * rows_per_strip);
        let need = row_bytes * rows;
        if (counts[s] as usize) < need {
            return Err(FormatError::Truncated(format!(
                "strip {s} holds {} bytes, {need} needed",
                counts[s]
            )));
        }
        let data = r.bytes(offsets[s] as usize, need, &format!("strip {s}"))?;
        pixels.extend(data.chunks_exact(spp).map(|c| {
            let a = if spp == 4 { c[3] } else { 255 };
            Rgba::new(c[0], c[1], c[2], a)
        }));
    }

    let scale = find(TAG_MODEL_PIXEL_SCALE)
        .map(|e| e.doubles(&r))
        .transpose()?;
    let tie = find(TAG_MODEL_TIEPOINT)
        .map(|e| e.doubles(&r))
        .transpose()?;
    let mut crs_code = DEFAULT_CRS;
    let mut crs_key = None;
    if let Some(e) = find(TAG_GEO_KEY_DIRECTORY) {
        let keys = e.unsigned(&r)?;
        if keys.len() < 4 {
            return Err(FormatError::Truncated("GeoKeyDirectory header".into()));
        }
        let declared = keys[3] as usize;
        if keys.len() < 4 + declared * 4 {
            return Err(FormatError::Truncated("GeoKeyDirectory keys".into()));
        }
        for k in keys[4..4 + declared * 4].chunks_exact(4) {
            let (id, location, value) = (k[0] as u16, k[1], k[3] as u16);
            if location == 0
                && (id == KEY_GEOGRAPHIC_TYPE || id == KEY_PROJECTED_CS_TYPE)
                && value != USER_DEFINED
                && crs_key.is_none()
            {
                crs_code = value;
                crs_key = Some(id);
            }
        }
    }

    let (transform, georeferenced) = match (scale, tie) {
        (Some(s), Some(t)) if s.len() >= 2 && t.len() >= 6 => {
            let (sx, sy) = (s[0], s[1]);
            let transform = GeoTransform {
                origin_x: t[3] - t[0] * sx,
                origin_y: t[4] + t[1] * sy,
                scale_x: sx,
                scale_y: sy,
                crs_code,
            };
            if !transform.is_valid() {
                return Err(FormatError::Schema(format!(
                    "ModelPixelScale ({sx}, {sy}) must be positive and finite"
                )));
            }
            (transform, true)
        }
        _ => (GeoTransform::identity().with_crs(crs_code), false),
    };

    let img = RasterImage::new(width, height, pixels, transform)?;
    let info = TiffInfo {
        byte_order: order,
        samples_per_pixel: spp as u16,
        strips,
        georeferenced,
        crs_key,
    };
    Ok((img, info))
}

/// Rows per strip chosen by the writer for an image of `width` pixels.
pub(crate) fn rows_per_strip(width: usize, height: usize) -> usize {
    (TARGET_STRIP_BYTES / (width * 4)).clamp(1, height)
}

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn u16(&mut self, v: u16) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
}

enum Payload {
    Shorts(Vec<u16>),
    Longs(Vec<u32>),
    Doubles(Vec<f64>),
}

impl Payload {
    fn len_bytes(&self) -> usize {
        match self {
            Payload::Shorts(v) => v.len() * 2,
            Payload::Longs(v) => v.len() * 4,
            Payload::Doubles(v) => v.len() * 8,
        }
    }
    fn count(&self) -> u32 {
        (match self {
            Payload::Shorts(v) => v.len(),
            Payload::Longs(v) => v.len(),
            Payload::Doubles(v) => v.len(),
        }) as u32
    }
    fn field_type(&self) -> u16 {
        match self {
            Payload::Shorts(_) => TYPE_SHORT,
            Payload::Longs(_) => TYPE_LONG,
            Payload::Doubles(_) => TYPE_DOUBLE,
        }
    }
    fn write(&self, w: &mut Writer) {
        match self {
            Payload::Shorts(v) => v.iter().for_each(|&x| w.u16(x)),
            Payload::Longs(v) => v.iter().for_each(|&x| w.u32(x)),
            Payload::Doubles(v) => v
                .iter()
                .for_each(|&x| w.out.extend_from_slice(&x.to_le_bytes())),
        }
    }
}

/// Encodes `img` as a little-endian, uncompressed, strip-based RGBA GeoTIFF.
///
/// Layout: 8-byte header, the IFD, out-of-line tag values, then pixel strips.
pub fn write_geotiff(img: &RasterImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let rps = rows_per_strip(w, h);
    let strips = h.div_ceil(rps);
    let strip_len = |s: usize| (rps.min(h - s * rps) * w * 4) as u32;
    let t = &img.transform;

    // Strip offsets are patched once the data start is known.
    let mut tags: Vec<(u16, Payload)> = vec![
        (TAG_IMAGE_WIDTH, Payload::Longs(vec![w as u32])),
        (TAG_IMAGE_LENGTH, Payload::Longs(vec![h as u32])),
        (TAG_BITS_PER_SAMPLE, Payload::Shorts(vec![8; 4])),
        (TAG_COMPRESSION, Payload::Shorts(vec![1])),
        (TAG_PHOTOMETRIC, Payload::Shorts(vec![2])),
        (TAG_STRIP_OFFSETS, Payload::Longs(vec![0; strips])),
        (TAG_SAMPLES_PER_PIXEL, Payload::Shorts(vec![4])),
        (TAG_ROWS_PER_STRIP, Payload::Longs(vec![rps as u32])),
        (
            TAG_STRIP_BYTE_COUNTS,
            Payload::Longs((0..strips).map(strip_len).collect()),
        ),
        (TAG_PLANAR_CONFIG, Payload::Shorts(vec![1])),
        // Unassociated alpha.
        (TAG_EXTRA_SAMPLES, Payload::Shorts(vec![2])),
        (
            TAG_MODEL_PIXEL_SCALE,
            Payload::Doubles(vec![t.scale_x, t.scale_y, 0.0]),
        ),
        (
            TAG_MODEL_TIEPOINT,
            Payload::Doubles(vec![0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0]),
        ),
        (
            TAG_GEO_KEY_DIRECTORY,
            Payload::Shorts(vec![
                1,
                1,
                0,
                2,
                KEY_GT_MODEL_TYPE,
                0,
                1,
                2,
                KEY_GEOGRAPHIC_TYPE,
                0,
                1,
                t.crs_code,
            ]),
        ),
    ];

    let ifd_len = 2 + tags.len() * 12 + 4;
    let mut extra_len = 0usize;
    for (_, p) in &tags {
        if p.len_bytes() > 4 {
            extra_len += p.len_bytes().next_multiple_of(2);
        }
    }
    let data_start = 8 + ifd_len + extra_len;
    let mut offset = data_start;
    for (tag, p) in tags.iter_mut() {
        if *tag == TAG_STRIP_OFFSETS {
            if let Payload::Longs(v) = p {
                for (s, slot) in v.iter_mut().enumerate() {
                    *slot = offset as u32;
                    offset += strip_len(s) as usize;
                }
            }
        }
    }

    let mut wr = Writer {
        out: Vec::with_capacity(data_start + w * h * 4),
    };
    wr.out.extend_from_slice(b"II");
    wr.u16(42);
    wr.u32(8);
    wr.u16(tags.len() as u16);
    let mut extra_at = 8 + ifd_len;
    for (tag, p) in &tags {
        wr.u16(*tag);
        wr.u16(p.field_type());
        wr.u32(p.count());
        if p.len_bytes() > 4 {
            wr.u32(extra_at as u32);
            extra_at += p.len_bytes().next_multiple_of(2);
        } else {
            let start = wr.out.len();
            p.write(&mut wr);
            wr.out.resize(start + 4, 0);
        }
    }
    wr.u32(0);
    for (_, p) in &tags {
        if p.len_bytes() > 4 {
            p.write(&mut wr);
            if p.len_bytes() % 2 == 1 {
                wr.out.push(0);
            }
        }
    }
    debug_assert_eq!(wr.out.len(), data_start);
    for px in img.pixels() {
        wr.out.extend_from_slice(&[px.r, px.g, px.b, px.a]);
    }
    wr.out
}
