#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use lulc_core::classify::Label;
use lulc_core::geoformats::{BandSet, ColorBand, GeoTransform, Hierarchy, RasterImage, Rgb, Rgba};
use proptest::prelude::*;

/// The seven-band listing with every `<Range>` properly closed. Band 3
/// keeps its en dash.
pub const SEVEN_BAND_XML: &str = "<RangeList>
  <Range>
    <Name>Band 1 - Wheat</Name>
    <Comment>Band 1</Comment>
    <Color>606f55</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 2 - Canola</Name>
    <Comment>Band 2</Comment>
    <Color>897966</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 3 \u{2013} Misc Crop</Name>
    <Comment>Band 3</Comment>
    <Color>a59385</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 4 - Pasture</Name>
    <Comment>Band 4</Comment>
    <Color>5f6655</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 5 - Canola</Name>
    <Comment>Band 5</Comment>
    <Color>515546</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 6 - Wheat</Name>
    <Comment>Band 6</Comment>
    <Color>918070</Color>
    <Tolerance>10</Tolerance>
  </Range>
  <Range>
    <Name>Band 7 - Pulses</Name>
    <Comment>Band 7</Comment>
    <Color>988775</Color>
    <Tolerance>10</Tolerance>
  </Range>
</RangeList>
";

/// Hand-assembled little-endian 1×1 RGBA TIFF holding (0x60, 0x6f, 0x55,
/// 0xff); 11 tags, BitsPerSample stored out of line at 146, pixel at 154.
/// Pillow decodes it to the same pixel.
pub const TIFF_1X1_HEX: &str = concat!(
    "49492a0008000000",
    "0b00",
    "000104000100000001000000",
    "010104000100000001000000",
    "020103000400000092000000",
    "030103000100000001000000",
    "060103000100000002000000",
    "11010400010000009a000000",
    "150103000100000004000000",
    "160104000100000001000000",
    "170104000100000004000000",
    "1c0103000100000001000000",
    "520103000100000002000000",
    "00000000",
    "0800080008000800",
    "606f55ff",
);

pub fn tiff_1x1() -> Vec<u8> {
    hex::decode(TIFF_1X1_HEX).unwrap()
}

fn type_size(t: u16) -> usize {
    match t {
        1 | 2 | 6 | 7 => 1,
        3 | 8 => 2,
        4 | 9 | 11 => 4,
        5 | 10 | 12 => 8,
        other => panic!("unexpected TIFF type {other}"),
    }
}

/// Element width used for byte swapping; rationals swap as two longs.
fn swap_width(t: u16) -> usize {
    match t {
        5 | 10 => 4,
        _ => type_size(t),
    }
}

fn swap_elements(buf: &mut [u8], width: usize) {
    if width > 1 {
        buf.chunks_exact_mut(width).for_each(|c| c.reverse());
    }
}

/// Re-encodes a little-endian single-IFD TIFF as big-endian with the same
/// layout. 8-bit sample data is byte-order free and is left alone.
pub fn to_big_endian(le: &[u8]) -> Vec<u8> {
    assert_eq!(&le[..4], b"II*\0");
    let u16le = |o: usize| u16::from_le_bytes([le[o], le[o + 1]]);
    let u32le = |o: usize| u32::from_le_bytes(le[o..o + 4].try_into().unwrap());
    let mut be = le.to_vec();
    be[..4].copy_from_slice(b"MM\0*");
    let ifd = u32le(4) as usize;
    be[4..8].copy_from_slice(&(ifd as u32).to_be_bytes());
    let n = u16le(ifd) as usize;
    be[ifd..ifd + 2].copy_from_slice(&(n as u16).to_be_bytes());
    for i in 0..n {
        let e = ifd + 2 + 12 * i;
        let (tag, typ, count) = (u16le(e), u16le(e + 2), u32le(e + 4) as usize);
        be[e..e + 2].copy_from_slice(&tag.to_be_bytes());
        be[e + 2..e + 4].copy_from_slice(&typ.to_be_bytes());
        be[e + 4..e + 8].copy_from_slice(&(count as u32).to_be_bytes());
        let len = count * type_size(typ);
        if len <= 4 {
            swap_elements(&mut be[e + 8..e + 8 + len], swap_width(typ));
        } else {
            let off = u32le(e + 8) as usize;
            be[e + 8..e + 12].copy_from_slice(&(off as u32).to_be_bytes());
            swap_elements(&mut be[off..off + len], swap_width(typ));
        }
    }
    let next = ifd + 2 + 12 * n;
    let v = u32le(next);
    be[next..next + 4].copy_from_slice(&v.to_be_bytes());
    be
}

/// Shapefile main file with one Polygon record holding the square
/// (0,0),(0,10),(10,10),(10,0),(0,0). Laid out byte by byte: 100-byte
/// header, 8-byte record header, 128-byte record content.
pub fn shapefile_square() -> Vec<u8> {
    let ring = [
        (0.0, 0.0),
        (0.0, 10.0),
        (10.0, 10.0),
        (10.0, 0.0),
        (0.0, 0.0),
    ];
    let bbox = [0.0f64, 0.0, 10.0, 10.0];
    let mut b = Vec::new();
    b.extend(9994i32.to_be_bytes());
    b.extend([0u8; 20]);
    b.extend(118i32.to_be_bytes()); // 236 bytes
    b.extend(1000i32.to_le_bytes());
    b.extend(5i32.to_le_bytes());
    bbox.iter().for_each(|v| b.extend(v.to_le_bytes()));
    b.extend([0u8; 32]); // z and m ranges
    assert_eq!(b.len(), 100);
    b.extend(1i32.to_be_bytes());
    b.extend(64i32.to_be_bytes()); // 128 bytes of content
    b.extend(5i32.to_le_bytes());
    bbox.iter().for_each(|v| b.extend(v.to_le_bytes()));
    b.extend(1i32.to_le_bytes());
    b.extend(5i32.to_le_bytes());
    b.extend(0i32.to_le_bytes());
    for (x, y) in ring {
        b.extend(f64::to_le_bytes(x));
        b.extend(f64::to_le_bytes(y));
    }
    assert_eq!(b.len(), 236);
    b
}

pub fn seven_bands() -> BandSet {
    lulc_core::geoformats::parse_rangelist_xml(SEVEN_BAND_XML).unwrap()
}

/// Reference classifier: every band's distance recomputed from scratch,
/// nearest wins, first index on ties.
pub fn naive_label(p: Rgba, bands: &[(Rgb, u8)]) -> Label {
    if p.a < 128 {
        return Label::NODATA;
    }
    let mut best: Option<(i32, usize)> = None;
    for (i, &(c, tol)) in bands.iter().enumerate() {
        let d = [
            (p.r as i32 - c.r as i32).abs(),
            (p.g as i32 - c.g as i32).abs(),
            (p.b as i32 - c.b as i32).abs(),
        ]
        .into_iter()
        .max()
        .unwrap();
        if d <= tol as i32 && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map_or(Label::UNCLASSIFIED, |(_, i)| Label::band(i))
}

pub fn band_set(ranges: &[(Rgb, u8)]) -> BandSet {
    let bands = ranges
        .iter()
        .enumerate()
        .map(|(i, &(c, t))| ColorBand::new(format!("Band {} - C{i}", i + 1), c, t))
        .collect();
    BandSet::new(bands, Hierarchy::empty()).unwrap()
}

/// Upward ray cast counting segment crossings with an orientation test.
/// Agrees with the even-odd rule for points off every edge.
pub fn crossing_oracle(p: (f64, f64), rings: &[Vec<(f64, f64)>]) -> bool {
    let mut crossings = 0usize;
    for ring in rings {
        for w in ring.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            if a.0 > b.0 {
                std::mem::swap(&mut a, &mut b);
            }
            // Half-open in x so a vertex is counted once.
            if !(a.0 <= p.0 && p.0 < b.0) {
                continue;
            }
            // Segment lies above p when p is to the right of a→b (with a.x < b.x).
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross < 0.0 {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

/// Distance from `p` to the closest segment of any ring.
pub fn edge_distance(p: (f64, f64), rings: &[Vec<(f64, f64)>]) -> f64 {
    let mut best = f64::INFINITY;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
            };
            let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
            best = best.min(((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt());
        }
    }
    best
}

/// Block-by-block reference for categorical downsampling.
pub fn brute_aggregate(
    labels: &[Label],
    w: usize,
    h: usize,
    f: usize,
    majority: bool,
) -> Vec<Label> {
    let mut out = Vec::new();
    for by in (0..h).step_by(f) {
        for bx in (0..w).step_by(f) {
            let cells: Vec<(usize, usize)> = (by..(by + f).min(h))
                .flat_map(|r| (bx..(bx + f).min(w)).map(move |c| (r, c)))
                .collect();
            if majority {
                let mut counts = std::collections::BTreeMap::new();
                for &(r, c) in &cells {
                    let l = labels[r * w + c];
                    if l != Label::NODATA {
                        *counts.entry(l.code()).or_insert(0usize) += 1;
                    }
                }
                let top = counts.values().copied().max();
                let pick = counts
                    .iter()
                    .find(|(_, &n)| Some(n) == top)
                    .map(|(&code, _)| code);
                out.push(match pick {
                    Some(code) if code == Label::UNCLASSIFIED.code() => Label::UNCLASSIFIED,
                    Some(code) => Label::band(code as usize),
                    None => Label::NODATA,
                });
            } else {
                let r = (by + f / 2).min(h - 1);
                let c = (bx + f / 2).min(w - 1);
                out.push(labels[r * w + c]);
            }
        }
    }
    out
}

pub fn arb_rgba() -> impl Strategy<Value = Rgba> {
    (any::<u8>(), any::<u8>(), any::<u8>(), any::<u8>())
        .prop_map(|(r, g, b, a)| Rgba::new(r, g, b, a))
}

pub fn arb_rgb() -> impl Strategy<Value = Rgb> {
    (any::<u8>(), any::<u8>(), any::<u8>()).prop_map(|(r, g, b)| Rgb::new(r, g, b))
}

pub fn arb_transform() -> impl Strategy<Value = GeoTransform> {
    (
        -1.0e6..1.0e6f64,
        -1.0e6..1.0e6f64,
        1.0e-6..1.0e3f64,
        1.0e-6..1.0e3f64,
        1u16..=u16::MAX,
    )
        .prop_map(|(x, y, sx, sy, crs)| GeoTransform::new(x, y, sx, sy).with_crs(crs))
}

pub fn arb_raster(max_w: usize, max_h: usize) -> impl Strategy<Value = RasterImage> {
    (1..=max_w, 1..=max_h, arb_transform()).prop_flat_map(|(w, h, t)| {
        proptest::collection::vec(arb_rgba(), w * h)
            .prop_map(move |px| RasterImage::new(w, h, px, t).unwrap())
    })
}

/// Pixels drawn near a few palette colors so bands actually match.
pub fn arb_clustered_raster(max_w: usize, max_h: usize) -> impl Strategy<Value = RasterImage> {
    (
        1..=max_w,
        1..=max_h,
        proptest::collection::vec(arb_rgb(), 1..4),
    )
        .prop_flat_map(|(w, h, palette)| {
            let px = (
                0..palette.len(),
                -12i16..=12,
                -12i16..=12,
                -12i16..=12,
                any::<u8>(),
            )
                .prop_map(move |(k, dr, dg, db, a)| {
                    let c = palette[k];
                    let j = |v: u8, d: i16| (v as i16 + d).clamp(0, 255) as u8;
                    Rgba::new(j(c.r, dr), j(c.g, dg), j(c.b, db), a)
                });
            proptest::collection::vec(px, w * h)
                .prop_map(move |px| RasterImage::new(w, h, px, GeoTransform::identity()).unwrap())
        })
}

/// A scripted HTTP/1.1 server on localhost that counts the requests it
/// answers. Routes: `/ok/*` → 200 with a body derived from the path,
/// `/missing` → 404, `/hop/N` → redirect to `/hop/N-1` and `/hop/0` → 200,
/// `/slow` → 200 after two seconds.
pub struct StubServer {
    pub base: String,
    pub hits: Arc<AtomicUsize>,
}

pub fn ok_body(path: &str) -> Vec<u8> {
    format!("tile bytes for {path}").into_bytes()
}

impl StubServer {
    pub fn start() -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let counter = counter.clone();
                thread::spawn(move || serve(stream, &counter));
            }
        });
        StubServer { base, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(mut stream: TcpStream, hits: &AtomicUsize) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
        match stream.read(&mut chunk) {
            Ok(0) | Err(_) => return,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
        }
    }
    hits.fetch_add(1, Ordering::SeqCst);
    let head = String::from_utf8_lossy(&buf).to_string();
    let path = head.split_whitespace().nth(1).unwrap_or("/").to_string();
    let (status, extra, body): (&str, String, Vec<u8>) = if path.starts_with("/ok/") {
        ("200 OK", String::new(), ok_body(&path))
    } else if path == "/missing" {
        ("404 Not Found", String::new(), b"no such layer".to_vec())
    } else if let Some(n) = path.strip_prefix("/hop/") {
        let n: usize = n.parse().unwrap_or(0);
        if n == 0 {
            ("200 OK", String::new(), ok_body(&path))
        } else {
            (
                "302 Found",
                format!("Location: /hop/{}\r\n", n - 1),
                Vec::new(),
            )
        }
    } else if path == "/slow" {
        thread::sleep(Duration::from_secs(2));
        ("200 OK", String::new(), b"late".to_vec())
    } else {
        ("500 Internal Server Error", String::new(), Vec::new())
    };
    let head = format!(
        "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n{extra}\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&body);
    let _ = stream.flush();
}
