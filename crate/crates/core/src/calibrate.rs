//! Census-driven tuning of band tolerances.
//!
//! The objective is the L1 area mismatch between computed and census areas
//! over the censused classes of one region. It is piecewise constant in the
//! integer tolerances, so the search is a cyclic coordinate descent: each
//! band tries `tolerance ± step` for every step of a coarse-to-fine
//! schedule and keeps a candidate only if it strictly lowers the objective.
//! When no step helps, the band also tries the nearest tolerances at which
//! its matched pixel set actually changes, which moves it off flat stretches
//! of the objective that are wider than the largest step.

use thiserror::Error;

use crate::classify::{
    channel_distance, classify_raster, ClassifyError, Label, LabelField, Mask, ALPHA_THRESHOLD,
};
use crate::geoformats::{BandSet, CensusTable, RasterImage, Rgb};
use crate::zonal::{area_report, compare, AreaMode, ComparisonReport};

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("calibration needs at least one band")]
    NoBands,
    #[error("invalid calibration config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Per-class relative area error at which the search stops.
    pub epsilon_rel: f64,
    pub max_passes: usize,
    /// Strictly descending positive steps.
    pub step_schedule: Vec<u8>,
    /// Replace band centers by the median of their matched pixels after
    /// each pass.
    pub recenter: bool,
    /// Inclusive tolerance range searched.
    pub tolerance_bounds: (u8, u8),
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            epsilon_rel: 0.10,
            max_passes: 50,
            step_schedule: vec![16, 8, 4, 2, 1],
            recenter: false,
            tolerance_bounds: (0, 255),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: &str| Err(CalibrationError::BadConfig(m.to_string()));
        if !(self.epsilon_rel > 0.0 && self.epsilon_rel < 1.0) {
            return bad("epsilon_rel must lie strictly between 0 and 1");
        }
        if self.step_schedule.is_empty() {
            return bad("step schedule is empty");
        }
        if self.step_schedule.contains(&0) {
            return bad("steps must be positive");
        }
        if self.step_schedule.windows(2).any(|w| w[0] <= w[1]) {
            return bad("steps must be strictly descending");
        }
        if self.tolerance_bounds.0 > self.tolerance_bounds.1 {
            return bad("tolerance bounds are inverted");
        }
        Ok(())
    }
}

/// One accepted tolerance move.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub pass: usize,
    pub band: usize,
    pub old_tolerance: u8,
    pub new_tolerance: u8,
    pub objective_km2: f64,
}

/// One accepted center replacement (only with `recenter`).
#[derive(Debug, Clone, PartialEq)]
pub struct RecenterStep {
    pub pass: usize,
    pub band: usize,
    pub old_color: Rgb,
    pub new_color: Rgb,
    pub objective_km2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub bands: BandSet,
    pub trace: Vec<TraceStep>,
    pub recentered: Vec<RecenterStep>,
    pub converged: bool,
    /// Passes started.
    pub passes: usize,
    pub final_report: ComparisonReport,
}

impl CalibrationResult {
    /// `pass,band,old_tol,new_tol,objective_km2`
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("pass,band,old_tol,new_tol,objective_km2\n");
        for s in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                s.pass, s.band, s.old_tolerance, s.new_tolerance, s.objective_km2
            ));
        }
        out
    }
}

/// Fixed inputs of one calibration run.
#[derive(Clone, Copy)]
struct Scene<'a> {
    img: &'a RasterImage,
    mask: Option<&'a Mask>,
    census: &'a CensusTable,
    region_id: &'a str,
    area_mode: AreaMode,
}

impl Scene<'_> {
    fn classify(&self, bands: &BandSet) -> Result<LabelField, ClassifyError> {
        classify_raster(self.img, bands, self.mask)
    }

    fn evaluate(&self, bands: &BandSet) -> Result<ComparisonReport, ClassifyError> {
        let field = self.classify(bands)?;
        let report = area_report(
            &field,
            bands,
            &self.img.transform,
            self.area_mode,
            self.region_id,
        );
        Ok(compare(&report, self.census, self.region_id))
    }

    fn admitted(&self, i: usize) -> bool {
        self.img.pixels()[i].a >= ALPHA_THRESHOLD && self.mask.is_none_or(|m| m.bits()[i])
    }

    /// Which L∞ distances to `color` occur among admitted pixels.
    fn distances_present(&self, color: Rgb) -> [bool; 256] {
        let mut present = [false; 256];
        for (i, &p) in self.img.pixels().iter().enumerate() {
            if self.admitted(i) {
                present[channel_distance(p, color) as usize] = true;
            }
        }
        present
    }
}

/// Σ |computed − census| over the censused classes of `region_id`.
pub fn objective(
    bands: &BandSet,
    img: &RasterImage,
    mask: Option<&Mask>,
    census: &CensusTable,
    region_id: &str,
    area_mode: AreaMode,
) -> Result<f64, CalibrationError> {
    let scene = Scene {
        img,
        mask,
        census,
        region_id,
        area_mode,
    };
    Ok(scene.evaluate(bands)?.objective_km2)
}

struct Search<'a> {
    scene: Scene<'a>,
    cfg: &'a CalibrationConfig,
    bands: BandSet,
    current: ComparisonReport,
    trace: Vec<TraceStep>,
    recentered: Vec<RecenterStep>,
    converged: bool,
}

impl Search<'_> {
    fn objective(&self) -> f64 {
        self.current.objective_km2
    }

    /// Evaluates the candidate tolerances in order and applies the first
    /// one with the lowest strictly improving objective.
    fn try_tolerances(
        &mut self,
        pass: usize,
        band: usize,
        candidates: &[u8],
    ) -> Result<bool, CalibrationError> {
        let old = self.bands.band(band).tolerance;
        let mut best: Option<(u8, ComparisonReport)> = None;
        for &tol in candidates {
            if tol == old {
                continue;
            }
            let mut trial = self.bands.clone();
            trial.set_tolerance(band, tol);
            let report = self.scene.evaluate(&trial)?;
            let to_beat = best
                .as_ref()
                .map_or(self.objective(), |(_, r)| r.objective_km2);
            if report.objective_km2 < to_beat {
                best = Some((tol, report));
            }
        }
        let Some((tol, report)) = best else {
            return Ok(false);
        };
        self.bands.set_tolerance(band, tol);
        self.trace.push(TraceStep {
            pass,
            band,
            old_tolerance: old,
            new_tolerance: tol,
            objective_km2: report.objective_km2,
        });
        self.current = report;
        self.converged = self.current.within(self.cfg.epsilon_rel);
        Ok(true)
    }

    fn step_candidates(&self, band: usize, step: u8) -> [u8; 2] {
        let (lo, hi) = self.cfg.tolerance_bounds;
        let t = self.bands.band(band).tolerance;
        [
            t.saturating_sub(step).max(lo),
            t.saturating_add(step).min(hi),
        ]
    }

    /// Nearest tolerances below and above the current one at which the
    /// band's matched set changes.
    fn breakpoint_candidates(&self, band: usize) -> Vec<u8> {
        let (lo, hi) = self.cfg.tolerance_bounds;
        let b = self.bands.band(band);
        let t = b.tolerance as usize;
        let present = self.scene.distances_present(b.color);
        let mut out = Vec::with_capacity(2);
        // Dropping the farthest matched distance d needs tolerance d − 1.
        if let Some(d) = (1..=t).rev().find(|&d| present[d]) {
            let tol = (d - 1) as u8;
            if tol >= lo {
                out.push(tol);
            }
        }
        if let Some(d) = (t + 1..256).find(|&d| present[d]) {
            let tol = d as u8;
            if tol <= hi {
                out.push(tol);
            }
        }
        out
    }

    fn recenter(&mut self, pass: usize) -> Result<bool, CalibrationError> {
        let mut changed = false;
        for band in 0..self.bands.len() {
            if self.converged {
                break;
            }
            let field = self.scene.classify(&self.bands)?;
            let Some(new_color) = median_color(self.scene.img, &field, band) else {
                continue;
            };
            let old_color = self.bands.band(band).color;
            if new_color == old_color {
                continue;
            }
            let mut trial = self.bands.clone();
            trial.set_color(band, new_color);
            let report = self.scene.evaluate(&trial)?;
            if report.objective_km2 <= self.objective() {
                self.recentered.push(RecenterStep {
                    pass,
                    band,
                    old_color,
                    new_color,
                    objective_km2: report.objective_km2,
                });
                self.bands = trial;
                self.current = report;
                self.converged = self.current.within(self.cfg.epsilon_rel);
                changed = true;
            }
        }
        Ok(changed)
    }
}

/// Per-channel lower median of the pixels labelled `band`.
fn median_color(img: &RasterImage, field: &LabelField, band: usize) -> Option<Rgb> {
    let target = Label::band(band);
    let mut channels: [Vec<u8>; 3] = Default::default();
    for (p, &l) in img.pixels().iter().zip(field.labels()) {
        if l == target {
            channels[0].push(p.r);
            channels[1].push(p.g);
            channels[2].push(p.b);
        }
    }
    if channels[0].is_empty() {
        return None;
    }
    let mid = (channels[0].len() - 1) / 2;
    let [r, g, b] = channels.map(|mut c| *c.select_nth_unstable(mid).1);
    Some(Rgb::new(r, g, b))
}

/// Tunes band tolerances (and optionally centers) until every censused
/// class of `region_id` is within `cfg.epsilon_rel` of its census area, a
/// full pass changes nothing, or `cfg.max_passes` passes have run.
pub fn calibrate_tolerances(
    img: &RasterImage,
    mask: Option<&Mask>,
    bands: &BandSet,
    census: &CensusTable,
    region_id: &str,
    area_mode: AreaMode,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult, CalibrationError> {
    cfg.validate()?;
    if bands.is_empty() {
        return Err(CalibrationError::NoBands);
    }
    let scene = Scene {
        img,
        mask,
        census,
        region_id,
        area_mode,
    };
    let current = scene.evaluate(bands)?;
    let converged = current.within(cfg.epsilon_rel);
    let mut search = Search {
        scene,
        cfg,
        bands: bands.clone(),
        current,
        trace: Vec::new(),
        recentered: Vec::new(),
        converged,
    };

    let mut passes = 0;
    while !search.converged && passes < cfg.max_passes {
        passes += 1;
        let mut changed = false;
        for band in 0..search.bands.len() {
            let mut moved = false;
            for &step in &cfg.step_schedule {
                if search.converged {
                    break;
                }
                let cands = search.step_candidates(band, step);
                moved |= search.try_tolerances(passes, band, &cands)?;
            }
            if !moved && !search.converged {
                let cands = search.breakpoint_candidates(band);
                moved = search.try_tolerances(passes, band, &cands)?;
            }
            changed |= moved;
            if search.converged {
                break;
            }
        }
        if cfg.recenter && !search.converged {
            changed |= search.recenter(passes)?;
        }
        if !changed {
            break;
        }
    }

    Ok(CalibrationResult {
        bands: search.bands,
        trace: search.trace,
        recentered: search.recentered,
        converged: search.converged,
        passes,
        final_report: search.current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoformats::{CensusRecord, ColorBand, GeoTransform, Hierarchy, Rgba};

    fn census(class: &str, km2: f64) -> CensusTable {
        CensusTable::new(vec![CensusRecord {
            region_id: "R".into(),
            class_name: class.into(),
            area_km2: km2,
        }])
        .unwrap()
    }

    fn single_band(tol: u8) -> BandSet {
        BandSet::new(
            vec![ColorBand::new(
                "Band 1 - Wheat",
                Rgb::new(100, 100, 100),
                tol,
            )],
            Hierarchy::empty(),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = CalibrationConfig::default();
        assert!(ok.validate().is_ok());
        for cfg in [
            CalibrationConfig {
                epsilon_rel: 0.0,
                ..ok.clone()
            },
            CalibrationConfig {
                epsilon_rel: 1.0,
                ..ok.clone()
            },
            CalibrationConfig {
                step_schedule: vec![],
                ..ok.clone()
            },
            CalibrationConfig {
                step_schedule: vec![4, 4],
                ..ok.clone()
            },
            CalibrationConfig {
                step_schedule: vec![1, 2],
                ..ok.clone()
            },
            CalibrationConfig {
                step_schedule: vec![2, 0],
                ..ok.clone()
            },
            CalibrationConfig {
                tolerance_bounds: (5, 4),
                ..ok.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn no_bands_is_an_error() {
        let img = RasterImage::filled(1, 1, Rgba::default(), GeoTransform::identity());
        let r = calibrate_tolerances(
            &img,
            None,
            &BandSet::default(),
            &census("Wheat", 1.0),
            "R",
            AreaMode::Fixed(1.0),
            &CalibrationConfig::default(),
        );
        assert_eq!(r, Err(CalibrationError::NoBands));
    }

    #[test]
    fn already_within_tolerance_is_untouched() {
        let img = RasterImage::filled(
            10,
            1,
            Rgba::new(100, 100, 100, 255),
            GeoTransform::identity(),
        );
        let bands = single_band(3);
        let r = calibrate_tolerances(
            &img,
            None,
            &bands,
            &census("Wheat", 10.5),
            "R",
            AreaMode::Fixed(1.0),
            &CalibrationConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.trace.is_empty());
        assert_eq!(r.passes, 0);
        assert_eq!(r.bands, bands);
    }

    #[test]
    fn escapes_a_plateau_wider_than_the_largest_step() {
        // All pixels sit at distance 60; no ±16 step from 0 changes anything.
        let img = RasterImage::filled(
            4,
            1,
            Rgba::new(160, 100, 100, 255),
            GeoTransform::identity(),
        );
        let r = calibrate_tolerances(
            &img,
            None,
            &single_band(0),
            &census("Wheat", 4.0),
            "R",
            AreaMode::Fixed(1.0),
            &CalibrationConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.bands.band(0).tolerance, 60);
        assert_eq!(r.final_report.objective_km2, 0.0);
    }

    #[test]
    fn shrinks_an_overly_wide_band() {
        let mut px = vec![Rgba::new(100, 100, 100, 255); 5];
        px.extend(vec![Rgba::new(130, 100, 100, 255); 5]);
        let img = RasterImage::new(10, 1, px, GeoTransform::identity()).unwrap();
        let r = calibrate_tolerances(
            &img,
            None,
            &single_band(200),
            &census("Wheat", 5.0),
            "R",
            AreaMode::Fixed(1.0),
            &CalibrationConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.bands.band(0).tolerance < 30);
        assert!(r
            .trace
            .windows(2)
            .all(|w| w[1].objective_km2 < w[0].objective_km2));
    }

    #[test]
    fn recentering_moves_center_to_median() {
        // Pixels cluster around (120, 100, 100); band starts off-center at 100
        // with a tolerance that catches only some of them.
        let px: Vec<Rgba> = (0..9)
            .map(|i| Rgba::new(116 + i, 100, 100, 255))
            .chain((0..6).map(|_| Rgba::new(0, 0, 0, 255)))
            .collect();
        let img = RasterImage::new(15, 1, px, GeoTransform::identity()).unwrap();
        let cfg = CalibrationConfig {
            recenter: true,
            step_schedule: vec![1],
            epsilon_rel: 0.01,
            tolerance_bounds: (0, 20),
            ..Default::default()
        };
        let r = calibrate_tolerances(
            &img,
            None,
            &single_band(17),
            &census("Wheat", 9.0),
            "R",
            AreaMode::Fixed(1.0),
            &cfg,
        )
        .unwrap();
        assert!(r.converged, "{r:?}");
        assert_eq!(r.final_report.objective_km2, 0.0);
    }

    #[test]
    fn median_is_lower_median() {
        let px = vec![
            Rgba::new(1, 10, 7, 255),
            Rgba::new(3, 30, 5, 255),
            Rgba::new(2, 20, 9, 255),
            Rgba::new(4, 40, 1, 255),
        ];
        let img = RasterImage::new(4, 1, px, GeoTransform::identity()).unwrap();
        let field = LabelField::new(4, 1, 1, vec![Label::band(0); 4]).unwrap();
        assert_eq!(median_color(&img, &field, 0), Some(Rgb::new(2, 20, 5)));
    }

    #[test]
    fn trace_csv_header() {
        let img = RasterImage::filled(
            4,
            1,
            Rgba::new(160, 100, 100, 255),
            GeoTransform::identity(),
        );
        let r = calibrate_tolerances(
            &img,
            None,
            &single_band(0),
            &census("Wheat", 4.0),
            "R",
            AreaMode::Fixed(1.0),
            &CalibrationConfig::default(),
        )
        .unwrap();
        let csv = r.trace_csv();
        assert!(csv.starts_with("pass,band,old_tol,new_tol,objective_km2\n"));
        assert!(csv.contains("1,0,0,60,0.000000"));
    }
}
