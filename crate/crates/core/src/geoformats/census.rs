use std::collections::HashSet;

use super::types::Hierarchy;
use super::{FormatError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRecord {
    pub region_id: String,
    pub class_name: String,
    pub area_km2: f64,
}

/// Reference areas per (region, class).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensusTable {
    records: Vec<CensusRecord>,
}

/// Key used to match class names: trimmed and case-folded.
pub(crate) fn class_key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn validate(records: &[CensusRecord]) -> std::result::Result<(), (usize, String)> {
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !(r.area_km2 >= 0.0 && r.area_km2.is_finite()) {
            return Err((
                i,
                format!("area {} must be a finite nonnegative number", r.area_km2),
            ));
        }
        if !seen.insert((r.region_id.trim().to_string(), class_key(&r.class_name))) {
            return Err((
                i,
                format!(
                    "duplicate record for region {:?}, class {:?}",
                    r.region_id, r.class_name
                ),
            ));
        }
    }
    Ok(())
}

impl CensusTable {
    pub fn new(records: Vec<CensusRecord>) -> Result<Self> {
        validate(&records).map_err(|(i, message)| FormatError::Csv {
            line: i as u64 + 2,
            message,
        })?;
        Ok(CensusTable { records })
    }

    pub fn records(&self) -> &[CensusRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_region<'a>(&'a self, region_id: &'a str) -> impl Iterator<Item = &'a CensusRecord> {
        self.records
            .iter()
            .filter(move |r| r.region_id.trim() == region_id.trim())
    }

    /// Case-insensitive lookup of a class in one region.
    pub fn lookup(&self, region_id: &str, class_name: &str) -> Option<f64> {
        let key = class_key(class_name);
        self.for_region(region_id)
            .find(|r| class_key(&r.class_name) == key)
            .map(|r| r.area_km2)
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> FormatError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    FormatError::Csv {
        line,
        message: e.to_string(),
    }
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(FormatError::Csv {
            line: 1,
            message: format!(
                "header must be {}, found {}",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

/// Reads `region,class,area_km2` rows.
pub fn load_census_csv(text: &str) -> Result<CensusTable> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &["region", "class", "area_km2"])?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let area: f64 = row[2].parse().map_err(|_| FormatError::Csv {
            line,
            message: format!("area {:?} is not a number", &row[2]),
        })?;
        records.push(CensusRecord {
            region_id: row[0].to_string(),
            class_name: row[1].to_string(),
            area_km2: area,
        });
        lines.push(line);
    }
    validate(&records).map_err(|(i, message)| FormatError::Csv {
        line: lines[i],
        message,
    })?;
    Ok(CensusTable { records })
}

/// Reads `category,member` edges for an explicit hierarchy.
pub fn load_hierarchy_csv(text: &str) -> Result<Hierarchy> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &["category", "member"])?;
    let mut edges = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row[0].is_empty() || row[1].is_empty() {
            return Err(FormatError::Csv {
                line: row.position().map(|p| p.line()).unwrap_or(0),
                message: "empty category or member".into(),
            });
        }
        edges.push((row[0].to_string(), row[1].to_string()));
    }
    Ok(Hierarchy::from_edges(edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_1: &str = "region,class,area_km2
TO39R20W4,Wheat,25.69
TO39R20W4,Canola,23.24
TO39R20W4,Pulses,2.13
TO39R20W4,Pasture,12.58
";

    #[test]
    fn loads_census_rows() {
        let t = load_census_csv(TABLE_1).unwrap();
        assert_eq!(t.records().len(), 4);
        assert_eq!(t.lookup("TO39R20W4", " wheat "), Some(25.69));
        assert_eq!(t.lookup("TO38R21W4", "Wheat"), None);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(load_census_csv("region,class,area_km2\n")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rejects_bad_rows() {
        let bad = [
            "region,class,area\nA,B,1\n",
            "region,class,area_km2\nA,B\n",
            "region,class,area_km2\nA,B,x\n",
            "region,class,area_km2\nA,B,-1\n",
            "region,class,area_km2\nA,B,NaN\n",
            "region,class,area_km2\nA,Wheat,1\nA, wheat,2\n",
        ];
        for text in bad {
            assert!(
                matches!(load_census_csv(text), Err(FormatError::Csv { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn duplicate_reports_its_line() {
        let text = "region,class,area_km2\nA,Wheat,1\nA,Canola,1\nA,Wheat,2\n";
        match load_census_csv(text) {
            Err(FormatError::Csv { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hierarchy_edges() {
        let h = load_hierarchy_csv("category,member\nCrop,Wheat\nCrop,Canola\nAgri Land,Crop\n")
            .unwrap();
        assert_eq!(h.members("Crop").unwrap().len(), 2);
        assert_eq!(h.leaf_classes("Agri Land"), ["Wheat", "Canola"]);
    }
}
