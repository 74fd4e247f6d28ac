use serde::{Deserialize, Serialize};

use super::AreaReport;
use crate::geoformats::CensusTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Compared,
    NoCensusReference,
    NoComputedValue,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Compared => "compared",
            RowStatus::NoCensusReference => "no-census-reference",
            RowStatus::NoComputedValue => "no-computed-value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub class: String,
    pub census_km2: Option<f64>,
    pub computed_km2: Option<f64>,
    /// computed − census.
    pub abs_error_km2: Option<f64>,
    /// |abs_error| / census, absent when census is zero.
    pub rel_error: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub region_id: String,
    pub rows: Vec<ComparisonRow>,
    /// Σ |abs_error| over compared rows.
    pub objective_km2: f64,
}

fn fmt_fixed(v: f64, places: usize) -> String {
    let s = format!("{v:.places$}");
    // Avoid "-0.00".
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl ComparisonReport {
    pub fn row(&self, class: &str) -> Option<&ComparisonRow> {
        let key = class.trim().to_lowercase();
        self.rows
            .iter()
            .find(|r| r.class.trim().to_lowercase() == key)
    }

    /// True when every census row has a computed value with
    /// |computed − census| ≤ ε·census.
    pub fn within(&self, epsilon_rel: f64) -> bool {
        self.rows
            .iter()
            .filter(|r| r.census_km2.is_some())
            .all(|r| match (r.census_km2, r.abs_error_km2) {
                (Some(census), Some(err)) => err.abs() <= epsilon_rel * census,
                _ => false,
            })
    }

    /// CSV with areas to 2 decimals and relative errors to 4; absent values
    /// are empty fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "class",
            "census_km2",
            "computed_km2",
            "abs_error_km2",
            "rel_error",
            "status",
        ])
        .expect("writing to memory");
        let opt = |v: Option<f64>, places| v.map(|v| fmt_fixed(v, places)).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.class.clone(),
                opt(r.census_km2, 2),
                opt(r.computed_km2, 2),
                opt(r.abs_error_km2, 2),
                opt(r.rel_error, 4),
                r.status.as_str().to_string(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Same field names as the CSV, full precision.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Matches census rows for `region_id` against computed classes (then
/// categories), case-insensitively. Census rows come first in table order,
/// followed by computed classes the census does not mention.
pub fn compare(report: &AreaReport, census: &CensusTable, region_id: &str) -> ComparisonReport {
    let mut rows = Vec::new();
    let mut objective = 0.0;
    let mut matched = vec![false; report.per_class.len()];

    for rec in census.for_region(region_id) {
        let key = rec.class_name.trim().to_lowercase();
        let computed = match report
            .per_class
            .iter()
            .position(|c| c.class.trim().to_lowercase() == key)
        {
            Some(i) => {
                matched[i] = true;
                Some(report.per_class[i].km2)
            }
            None => report.category(&rec.class_name).map(|c| c.km2),
        };
        let row = match computed {
            Some(computed) => {
                let err = computed - rec.area_km2;
                objective += err.abs();
                ComparisonRow {
                    class: rec.class_name.trim().to_string(),
                    census_km2: Some(rec.area_km2),
                    computed_km2: Some(computed),
                    abs_error_km2: Some(err),
                    rel_error: (rec.area_km2 > 0.0).then(|| err.abs() / rec.area_km2),
                    status: RowStatus::Compared,
                }
            }
            None => ComparisonRow {
                class: rec.class_name.trim().to_string(),
                census_km2: Some(rec.area_km2),
                computed_km2: None,
                abs_error_km2: None,
                rel_error: None,
                status: RowStatus::NoComputedValue,
            },
        };
        rows.push(row);
    }
    for (c, _) in report.per_class.iter().zip(&matched).filter(|(_, &m)| !m) {
        rows.push(ComparisonRow {
            class: c.class.clone(),
            census_km2: None,
            computed_km2: Some(c.km2),
            abs_error_km2: None,
            rel_error: None,
            status: RowStatus::NoCensusReference,
        });
    }
    ComparisonReport {
        region_id: region_id.to_string(),
        rows,
        objective_km2: objective,
    }
}
