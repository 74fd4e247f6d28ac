use serde::{Deserialize, Serialize};

use super::{pixel_area_km2, AreaMode};
use crate::classify::{Label, LabelField};
use crate::geoformats::{BandSet, FormatError, GeoTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandArea {
    pub name: String,
    pub class_label: String,
    pub pixels: u64,
    pub km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassArea {
    pub class: String,
    pub pixels: u64,
    pub km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryArea {
    pub category: String,
    pub pixels: u64,
    pub km2: f64,
}

/// Areas computed for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub region_id: String,
    /// In band order.
    pub per_band: Vec<BandArea>,
    /// In first-appearance order of the class labels.
    pub per_class: Vec<ClassArea>,
    /// In hierarchy order.
    pub per_category: Vec<CategoryArea>,
    pub unclassified_pixels: u64,
    pub unclassified_km2: f64,
    pub nodata_pixels: u64,
    pub nodata_km2: f64,
    pub total_pixels: u64,
    pub total_km2: f64,
}

fn same_name(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

impl AreaReport {
    /// Report holding only class and category totals, e.g. areas measured
    /// elsewhere. Pixel counts are zero.
    pub fn from_areas(
        region_id: impl Into<String>,
        classes: impl IntoIterator<Item = (String, f64)>,
        categories: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let per_class: Vec<ClassArea> = classes
            .into_iter()
            .map(|(class, km2)| ClassArea {
                class,
                pixels: 0,
                km2,
            })
            .collect();
        let per_category = categories
            .into_iter()
            .map(|(category, km2)| CategoryArea {
                category,
                pixels: 0,
                km2,
            })
            .collect();
        let total_km2 = per_class.iter().map(|c| c.km2).sum();
        AreaReport {
            region_id: region_id.into(),
            per_band: Vec::new(),
            per_class,
            per_category,
            unclassified_pixels: 0,
            unclassified_km2: 0.0,
            nodata_pixels: 0,
            nodata_km2: 0.0,
            total_pixels: 0,
            total_km2,
        }
    }

    /// Case-insensitive class lookup.
    pub fn class(&self, name: &str) -> Option<&ClassArea> {
        self.per_class.iter().find(|c| same_name(&c.class, name))
    }

    /// Case-insensitive category lookup.
    pub fn category(&self, name: &str) -> Option<&CategoryArea> {
        self.per_category
            .iter()
            .find(|c| same_name(&c.category, name))
    }

    /// Sum of class, unclassified and nodata areas.
    pub fn accounted_km2(&self) -> f64 {
        self.per_class.iter().map(|c| c.km2).sum::<f64>() + self.unclassified_km2 + self.nodata_km2
    }

    /// `region,kind,name,pixels,area_km2` rows; kind is one of band, class,
    /// category, unclassified, nodata, total.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["region", "kind", "name", "pixels", "area_km2"])
            .expect("writing to memory");
        let mut row = |kind: &str, name: &str, pixels: u64, km2: f64| {
            w.write_record([
                self.region_id.as_str(),
                kind,
                name,
                &pixels.to_string(),
                &format!("{km2:.6}"),
            ])
            .expect("writing to memory");
        };
        for b in &self.per_band {
            row("band", &b.name, b.pixels, b.km2);
        }
        for c in &self.per_class {
            row("class", &c.class, c.pixels, c.km2);
        }
        for c in &self.per_category {
            row("category", &c.category, c.pixels, c.km2);
        }
        row(
            "unclassified",
            "",
            self.unclassified_pixels,
            self.unclassified_km2,
        );
        row("nodata", "", self.nodata_pixels, self.nodata_km2);
        row("total", "", self.total_pixels, self.total_km2);
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Parses a [`to_csv`](Self::to_csv) document. Band rows come back
    /// without their class label, which the CSV does not carry.
    pub fn from_csv(text: &str) -> Result<AreaReport, FormatError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| FormatError::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().collect::<Vec<_>>() != ["region", "kind", "name", "pixels", "area_km2"] {
            return Err(FormatError::Csv {
                line: 1,
                message: "header must be region,kind,name,pixels,area_km2".into(),
            });
        }
        let mut report = AreaReport::from_areas("", [], []);
        report.total_km2 = 0.0;
        let mut have_total = false;
        for row in reader.records() {
            let row = row.map_err(|e| FormatError::Csv {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let bad = |what: &str, value: &str| FormatError::Csv {
                line,
                message: format!("{what} {value:?} is invalid"),
            };
            let pixels: u64 = row[3].parse().map_err(|_| bad("pixels", &row[3]))?;
            let km2: f64 = row[4].parse().map_err(|_| bad("area_km2", &row[4]))?;
            if !(km2 >= 0.0 && km2.is_finite()) {
                return Err(bad("area_km2", &row[4]));
            }
            if report.region_id.is_empty() {
                report.region_id = row[0].to_string();
            } else if report.region_id != row[0] {
                return Err(FormatError::Csv {
                    line,
                    message: format!("mixed regions {:?} and {:?}", report.region_id, &row[0]),
                });
            }
            let name = row[2].to_string();
            match &row[1] {
                "band" => report.per_band.push(BandArea {
                    class_label: String::new(),
                    name,
                    pixels,
                    km2,
                }),
                "class" => report.per_class.push(ClassArea {
                    class: name,
                    pixels,
                    km2,
                }),
                "category" => report.per_category.push(CategoryArea {
                    category: name,
                    pixels,
                    km2,
                }),
                "unclassified" => {
                    report.unclassified_pixels = pixels;
                    report.unclassified_km2 = km2;
                }
                "nodata" => {
                    report.nodata_pixels = pixels;
                    report.nodata_km2 = km2;
                }
                "total" => {
                    report.total_pixels = pixels;
                    report.total_km2 = km2;
                    have_total = true;
                }
                other => {
                    return Err(FormatError::Csv {
                        line,
                        message: format!("unknown row kind {other:?}"),
                    })
                }
            }
        }
        if !have_total {
            report.total_km2 = report.accounted_km2();
        }
        Ok(report)
    }
}

/// Per-band, per-class and per-category areas of a classified field.
///
/// Counts are exact; areas are counts times pixel area. In geographic mode
/// the pixel area varies by row, so counts are scaled row by row.
pub fn area_report(
    field: &LabelField,
    bands: &BandSet,
    t: &GeoTransform,
    mode: AreaMode,
    region_id: &str,
) -> AreaReport {
    let classes = bands.classes();
    let class_of_band: Vec<usize> = bands
        .bands()
        .iter()
        .map(|b| classes.iter().position(|c| *c == b.class_label).unwrap())
        .collect();
    let n = bands.len();
    // Slots: bands, then unclassified, then nodata.
    let slot = |l: Label| match l.band_index() {
        Some(i) => i,
        None if l == Label::UNCLASSIFIED => n,
        None => n + 1,
    };

    let mut pixels = vec![0u64; n + 2];
    let mut band_km2 = vec![0.0f64; n + 2];
    let mut class_pixels = vec![0u64; classes.len()];
    let mut class_km2 = vec![0.0f64; classes.len()];

    if mode.is_row_invariant() {
        for &l in field.labels() {
            pixels[slot(l)] += 1;
        }
        let a = pixel_area_km2(t, 0, mode);
        for (i, &p) in pixels.iter().enumerate() {
            band_km2[i] = p as f64 * a;
        }
        for b in 0..n {
            class_pixels[class_of_band[b]] += pixels[b];
        }
        for (c, &p) in class_pixels.iter().enumerate() {
            class_km2[c] = p as f64 * a;
        }
    } else {
        let mut row_counts = vec![0u64; n + 2];
        let mut row_class = vec![0u64; classes.len()];
        for row in 0..field.height() {
            row_counts.iter_mut().for_each(|c| *c = 0);
            row_class.iter_mut().for_each(|c| *c = 0);
            for &l in field.row(row) {
                row_counts[slot(l)] += 1;
            }
            for b in 0..n {
                row_class[class_of_band[b]] += row_counts[b];
            }
            let a = pixel_area_km2(t, row, mode);
            for i in 0..n + 2 {
                pixels[i] += row_counts[i];
                band_km2[i] += row_counts[i] as f64 * a;
            }
            for c in 0..classes.len() {
                class_pixels[c] += row_class[c];
                class_km2[c] += row_class[c] as f64 * a;
            }
        }
    }

    let per_band = bands
        .bands()
        .iter()
        .enumerate()
        .map(|(i, b)| BandArea {
            name: b.name.clone(),
            class_label: b.class_label.clone(),
            pixels: pixels[i],
            km2: band_km2[i],
        })
        .collect();
    let per_class: Vec<ClassArea> = classes
        .iter()
        .enumerate()
        .map(|(c, name)| ClassArea {
            class: name.to_string(),
            pixels: class_pixels[c],
            km2: class_km2[c],
        })
        .collect();

    let hierarchy = bands.hierarchy();
    fn roll_up(
        name: &str,
        hierarchy: &crate::geoformats::Hierarchy,
        per_class: &[ClassArea],
    ) -> (u64, f64) {
        match hierarchy.members(name) {
            Some(members) => members.iter().fold((0, 0.0), |(p, a), m| {
                let (mp, ma) = roll_up(m, hierarchy, per_class);
                (p + mp, a + ma)
            }),
            None => per_class
                .iter()
                .find(|c| c.class == name)
                .map(|c| (c.pixels, c.km2))
                .unwrap_or((0, 0.0)),
        }
    }
    let per_category = hierarchy
        .categories()
        .map(|(cat, _)| {
            let (pixels, km2) = roll_up(cat, hierarchy, &per_class);
            CategoryArea {
                category: cat.to_string(),
                pixels,
                km2,
            }
        })
        .collect();

    let mut report = AreaReport {
        region_id: region_id.to_string(),
        per_band,
        per_class,
        per_category,
        unclassified_pixels: pixels[n],
        unclassified_km2: band_km2[n],
        nodata_pixels: pixels[n + 1],
        nodata_km2: band_km2[n + 1],
        total_pixels: (field.width() * field.height()) as u64,
        total_km2: 0.0,
    };
    report.total_km2 = report.accounted_km2();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoformats::{ColorBand, Rgb};

    #[test]
    fn duplicate_bands_roll_into_one_class() {
        let bands = BandSet::with_default_hierarchy(vec![
            ColorBand::new("Band 1 - Wheat", Rgb::new(1, 1, 1), 0),
            ColorBand::new("Band 2 - Canola", Rgb::new(2, 2, 2), 0),
            ColorBand::new("Band 3 - Wheat", Rgb::new(3, 3, 3), 0),
        ])
        .unwrap();
        let mut labels = vec![Label::band(0); 10];
        labels.extend(vec![Label::band(2); 5]);
        labels.push(Label::UNCLASSIFIED);
        let field = LabelField::new(16, 1, 3, labels).unwrap();
        let r = area_report(
            &field,
            &bands,
            &GeoTransform::identity(),
            AreaMode::Fixed(1.0),
            "r",
        );
        assert_eq!(r.class("Wheat").unwrap().km2, 15.0);
        assert_eq!(r.class("wheat").unwrap().pixels, 15);
        assert_eq!(r.class("Canola").unwrap().km2, 0.0);
        assert_eq!(r.category("Crop").unwrap().km2, 15.0);
        assert_eq!(r.category("Agri Land").unwrap().pixels, 15);
        assert_eq!(r.unclassified_km2, 1.0);
        assert_eq!(r.total_km2, 16.0);
    }

    #[test]
    fn csv_round_trip_of_class_rows() {
        let r = AreaReport::from_areas(
            "TO39R20W4",
            [("Wheat".to_string(), 24.03), ("Water".to_string(), 1.87)],
            [("Crop".to_string(), 24.03)],
        );
        let back = AreaReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.region_id, "TO39R20W4");
        assert_eq!(back.class("water").unwrap().km2, 1.87);
        assert_eq!(back.category("crop").unwrap().km2, 24.03);
        assert!(AreaReport::from_csv("a,b\n").is_err());
    }
}
