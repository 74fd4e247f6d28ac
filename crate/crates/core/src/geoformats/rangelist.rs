//! The `<RangeList>` color-band document.
//!
//! ```xml
//! <RangeList>
//!   <Range>
//!     <Name>Band 1 - Wheat</Name>
//!     <Comment>Band 1</Comment>
//!     <Color>606f55</Color>
//!     <Tolerance>10</Tolerance>
//!   </Range>
//! </RangeList>
//! ```

use std::sync::LazyLock;

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;

use super::types::{BandSet, ColorBand, Rgb};
use super::{FormatError, Result};

static BAND_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Band\s*\d+\s*[-\u{2013}\u{2014}]\s*(\S.*)$").unwrap());

/// Strips a leading "Band N - " (hyphen, en or em dash) from a band name.
pub fn class_label_from_name(name: &str) -> String {
    let name = name.trim();
    match BAND_PREFIX.captures(name) {
        Some(c) => c[1].trim_end().to_string(),
        None => name.to_string(),
    }
}

fn xml_err(e: impl std::fmt::Display) -> FormatError {
    FormatError::Xml(e.to_string())
}

#[derive(Default)]
struct PartialRange {
    name: Option<String>,
    comment: Option<String>,
    color: Option<String>,
    tolerance: Option<String>,
}

impl PartialRange {
    fn slot(&mut self, field: &str) -> Result<&mut Option<String>> {
        let slot = match field {
            "Name" => &mut self.name,
            "Comment" => &mut self.comment,
            "Color" => &mut self.color,
            "Tolerance" => &mut self.tolerance,
            other => {
                return Err(FormatError::Schema(format!(
                    "unexpected element <{other}> in <Range>"
                )))
            }
        };
        if slot.is_some() {
            return Err(FormatError::Schema(format!(
                "duplicate <{field}> in <Range>"
            )));
        }
        Ok(slot)
    }

    fn finish(self, ordinal: usize) -> Result<ColorBand> {
        let missing = |f: &str| FormatError::Schema(format!("range {ordinal} is missing <{f}>"));
        let name = self.name.ok_or_else(|| missing("Name"))?;
        if name.is_empty() {
            return Err(FormatError::Schema(format!(
                "range {ordinal} has an empty <Name>"
            )));
        }
        let color_text = self.color.ok_or_else(|| missing("Color"))?;
        let color = Rgb::from_hex(&color_text).ok_or_else(|| {
            FormatError::Schema(format!(
                "range {ordinal}: color {color_text:?} is not 6 hex digits"
            ))
        })?;
        let tol_text = self.tolerance.ok_or_else(|| missing("Tolerance"))?;
        let tolerance = if tol_text.bytes().all(|b| b.is_ascii_digit()) {
            tol_text.parse::<u8>().ok()
        } else {
            None
        }
        .ok_or_else(|| {
            FormatError::Schema(format!(
                "range {ordinal}: tolerance {tol_text:?} is not an integer in 0..=255"
            ))
        })?;
        let mut band = ColorBand::new(name, color, tolerance);
        band.comment = self.comment;
        Ok(band)
    }
}

/// Parses a RangeList document and attaches the default category hierarchy.
pub fn parse_rangelist_xml(text: &str) -> Result<BandSet> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    // 0: before root, 1: in RangeList, 2: in Range, 3: in field, 4: after root
    let mut depth = 0u8;
    let mut bands = Vec::new();
    let mut current = PartialRange::default();
    let mut field: Option<String> = None;
    let mut field_text = String::new();

    loop {
        let event = reader.read_event().map_err(|e| {
            FormatError::Xml(format!("{e} (near byte {})", reader.error_position()))
        })?;
        match event {
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Start(e) | Event::Empty(e) if depth == 3 => {
                return Err(FormatError::Schema(format!(
                    "element <{}> nested inside <{}>",
                    String::from_utf8_lossy(e.name().as_ref()),
                    field.as_deref().unwrap_or_default()
                )));
            }
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match (depth, name.as_str()) {
                    (0, "RangeList") => depth = 1,
                    (1, "Range") => {
                        current = PartialRange::default();
                        depth = 2;
                    }
                    (2, "Range") => {
                        return Err(FormatError::Xml(format!(
                            "<Range> opened inside an unclosed <Range> (near byte {})",
                            reader.buffer_position()
                        )))
                    }
                    (2, _) => {
                        current.slot(&name)?;
                        field = Some(name);
                        field_text.clear();
                        depth = 3;
                    }
                    (4, _) => return Err(xml_err("content after the root element")),
                    _ => return Err(FormatError::Schema(format!("unexpected element <{name}>"))),
                }
            }
            Event::Empty(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match (depth, name.as_str()) {
                    (0, "RangeList") => depth = 4,
                    (1, "Range") => {
                        PartialRange::default().finish(bands.len() + 1)?;
                    }
                    (2, _) => *current.slot(&name)? = Some(String::new()),
                    _ => return Err(FormatError::Schema(format!("unexpected element <{name}/>"))),
                }
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(xml_err)?;
                if depth == 3 {
                    field_text.push_str(&s);
                } else if !s.trim().is_empty() {
                    return Err(FormatError::Schema(format!(
                        "stray text {:?} outside a field element",
                        s.trim()
                    )));
                }
            }
            Event::CData(c) => {
                if depth != 3 {
                    return Err(FormatError::Schema("CDATA outside a field element".into()));
                }
                field_text.push_str(&String::from_utf8_lossy(&c));
            }
            Event::End(_) => match depth {
                3 => {
                    let f = field.take().expect("field open at depth 3");
                    *current.slot(&f)? = Some(field_text.trim().to_string());
                    depth = 2;
                }
                2 => {
                    let band = std::mem::take(&mut current).finish(bands.len() + 1)?;
                    bands.push(band);
                    depth = 1;
                }
                1 => depth = 4,
                _ => return Err(xml_err("unbalanced end tag")),
            },
        }
    }
    match depth {
        4 => BandSet::with_default_hierarchy(bands),
        0 => Err(xml_err("missing <RangeList> root element")),
        _ => Err(xml_err("document ended inside an unclosed element")),
    }
}

/// Emits the document in Name, Comment, Color, Tolerance order with
/// lower-case hex colors. The hierarchy is not part of the document.
pub fn serialize_rangelist_xml(set: &BandSet) -> String {
    let mut out = String::from("<RangeList>\n");
    for b in set.bands() {
        out.push_str("  <Range>\n");
        out.push_str(&format!("    <Name>{}</Name>\n", escape(b.name.as_str())));
        if let Some(c) = &b.comment {
            out.push_str(&format!("    <Comment>{}</Comment>\n", escape(c.as_str())));
        }
        out.push_str(&format!("    <Color>{}</Color>\n", b.color.to_hex()));
        out.push_str(&format!("    <Tolerance>{}</Tolerance>\n", b.tolerance));
        out.push_str("  </Range>\n");
    }
    out.push_str("</RangeList>\n");
    out
}
