use std::path::{Path, PathBuf};
use std::time::Duration;

use lulc_core::calibrate::{calibrate_tolerances, CalibrationConfig};
use lulc_core::classify::{
    classify_raster, render_labels, LabelField, Mask, DEFAULT_UNCLASSIFIED_COLOR,
};
use lulc_core::geoformats::{
    load_census_csv, load_hierarchy_csv, parse_rangelist_xml, read_geojson_polygons,
    read_geotiff_with_info, read_shapefile_polygons, serialize_rangelist_xml, write_geotiff,
    write_ppm, BandSet, ByteOrder, CensusTable, RasterImage, Region, TiffInfo,
};
use lulc_core::wms::{build_getmap_url, fetch_map, WmsRequest};
use lulc_core::zonal::{
    aggregate_categorical, area_report, compare as compare_areas, rasterize_region,
    AggregationRule, AreaMode, AreaModeKind, AreaReport, ComparisonReport,
};

use crate::error::{config_error, CliError};
use crate::output::{write_all, write_atomic};
use crate::{AreaArgs, InputArgs, RegionArgs, RenderArgs};

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::parse_in(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::parse_in(path, e))
}

fn load_raster(path: &Path) -> Result<(RasterImage, TiffInfo), CliError> {
    read_geotiff_with_info(&read_bytes(path)?).map_err(|e| CliError::parse_in(path, e))
}

fn load_bands(input: &InputArgs) -> Result<BandSet, CliError> {
    let mut bands = parse_rangelist_xml(&read_text(&input.ranges)?)
        .map_err(|e| CliError::parse_in(&input.ranges, e))?;
    if let Some(path) = &input.hierarchy {
        let h = load_hierarchy_csv(&read_text(path)?).map_err(|e| CliError::parse_in(path, e))?;
        bands.set_hierarchy(h).map_err(config_error)?;
    }
    Ok(bands)
}

fn load_census(path: &Path) -> Result<CensusTable, CliError> {
    load_census_csv(&read_text(path)?).map_err(|e| CliError::parse_in(path, e))
}

fn load_regions(path: &Path) -> Result<Vec<Region>, CliError> {
    let is_shp = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("shp"));
    let regions = if is_shp {
        read_shapefile_polygons(&read_bytes(path)?)
    } else {
        read_geojson_polygons(&read_text(path)?)
    };
    regions.map_err(|e| CliError::parse_in(path, e))
}

/// Region mask (if a boundary was given) and the id reports carry.
fn select_region(
    args: &RegionArgs,
    img: &RasterImage,
    raster_path: &Path,
) -> Result<(Option<Mask>, String), CliError> {
    let Some(boundary) = &args.boundary else {
        let id = args.region_id.clone().unwrap_or_else(|| {
            raster_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "raster".into())
        });
        return Ok((None, id));
    };
    let regions = load_regions(boundary)?;
    let region = match (&args.region_id, args.region_index) {
        (Some(id), _) => regions.iter().find(|r| r.id == *id).ok_or_else(|| {
            CliError::Config(format!(
                "no region with id {id:?} in {}",
                boundary.display()
            ))
        })?,
        (None, Some(i)) => regions.get(i).ok_or_else(|| {
            CliError::Config(format!(
                "region index {i} out of range ({} regions)",
                regions.len()
            ))
        })?,
        (None, None) if regions.len() == 1 => &regions[0],
        (None, None) => {
            return Err(CliError::Config(format!(
                "{} holds {} regions; choose one with --region-id or --region-index",
                boundary.display(),
                regions.len()
            )))
        }
    };
    let mask = rasterize_region(region, &img.transform, img.width(), img.height());
    Ok((Some(mask), region.id.clone()))
}

fn area_mode(args: &AreaArgs, info: &TiffInfo) -> Result<AreaMode, CliError> {
    let kind = match (args.pixel_area, args.area_mode) {
        (Some(_), None) => AreaModeKind::Fixed,
        (Some(_), Some(m)) if AreaModeKind::from(m) != AreaModeKind::Fixed => {
            return Err(CliError::Config(
                "--pixel-area only applies to the fixed area mode".into(),
            ))
        }
        (_, Some(m)) => m.into(),
        (None, None) => {
            return Err(CliError::Config("give --pixel-area or --area-mode".into()));
        }
    };
    if kind != AreaModeKind::Fixed && !info.georeferenced {
        return Err(CliError::Config(
            "projected and geographic area modes need a georeferenced raster".into(),
        ));
    }
    Ok(AreaMode::resolve(kind, args.pixel_area)?)
}

struct Classified {
    img: RasterImage,
    info: TiffInfo,
    bands: BandSet,
    field: LabelField,
    region_id: String,
}

fn classify_input(input: &InputArgs, region: &RegionArgs) -> Result<Classified, CliError> {
    let (img, info) = load_raster(&input.raster)?;
    let bands = load_bands(input)?;
    let (mask, region_id) = select_region(region, &img, &input.raster)?;
    let field = classify_raster(&img, &bands, mask.as_ref())?;
    Ok(Classified {
        img,
        info,
        bands,
        field,
        region_id,
    })
}

fn render(
    field: &LabelField,
    bands: &BandSet,
    transform: lulc_core::geoformats::GeoTransform,
    args: &RenderArgs,
) -> Result<RasterImage, CliError> {
    Ok(render_labels(
        field,
        bands,
        DEFAULT_UNCLASSIFIED_COLOR,
        !args.opaque_nodata,
        Some(transform),
    )?)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flush")
}

pub fn info(path: &Path) -> Result<(), CliError> {
    let (img, info) = load_raster(path)?;
    let t = &img.transform;
    println!("{}", path.display());
    println!("size: {} x {}", img.width(), img.height());
    let order = match info.byte_order {
        ByteOrder::LittleEndian => "little-endian (II)",
        ByteOrder::BigEndian => "big-endian (MM)",
    };
    println!("byte order: {order}");
    let layout = if info.samples_per_pixel == 4 {
        "RGBA"
    } else {
        "RGB"
    };
    println!(
        "samples per pixel: {} ({layout}, 8-bit, chunky)",
        info.samples_per_pixel
    );
    println!("strips: {}", info.strips);
    if info.georeferenced {
        println!("origin: {}, {}", t.origin_x, t.origin_y);
        println!("pixel scale: {} x {}", t.scale_x, t.scale_y);
        match info.crs_key {
            Some(_) => println!("crs: EPSG:{}", t.crs_code),
            None => println!("crs: EPSG:{} (assumed, no GeoKey)", t.crs_code),
        }
    } else {
        println!("georeferencing: ungeoreferenced (identity transform assumed)");
    }
    Ok(())
}

pub fn classify(
    input: &InputArgs,
    region: &RegionArgs,
    render_args: &RenderArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let c = classify_input(input, region)?;
    let rendered = render(&c.field, &c.bands, c.img.transform, render_args)?;
    let h = c.field.histogram();
    let mut rows: Vec<Vec<String>> = c
        .bands
        .bands()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                i.to_string(),
                b.name.clone(),
                b.class_label.clone(),
                h.bands[i].to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "UNCLASSIFIED".into(),
        String::new(),
        String::new(),
        h.unclassified.to_string(),
    ]);
    rows.push(vec![
        "NODATA".into(),
        String::new(),
        String::new(),
        h.nodata.to_string(),
    ]);

    let mut files = vec![
        ("classified.tif", write_geotiff(&rendered)),
        (
            "histogram.csv",
            csv_bytes(&["label", "name", "class", "pixels"], rows),
        ),
    ];
    if render_args.ppm {
        files.push(("classified.ppm", write_ppm(&rendered)));
    }
    write_all(out_dir, &files)?;
    Ok(())
}

pub fn zonal(
    input: &InputArgs,
    region: &RegionArgs,
    area: &AreaArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let c = classify_input(input, region)?;
    let mode = area_mode(area, &c.info)?;
    let report = area_report(&c.field, &c.bands, &c.img.transform, mode, &c.region_id);
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_all(
        out_dir,
        &[
            ("zonal.csv", report.to_csv().into_bytes()),
            ("zonal.json", json),
        ],
    )?;
    println!(
        "region {}: {:.2} km2 total",
        report.region_id, report.total_km2
    );
    Ok(())
}

pub enum AreaSource {
    Csv(PathBuf),
    Raster(InputArgs),
}

fn write_comparison(cmp: &ComparisonReport, out_dir: &Path) -> Result<(), CliError> {
    write_all(
        out_dir,
        &[
            ("comparison.csv", cmp.to_csv().into_bytes()),
            ("comparison.json", cmp.to_json().into_bytes()),
        ],
    )?;
    Ok(())
}

pub fn compare(
    census_path: &Path,
    source: AreaSource,
    region: &RegionArgs,
    area: &AreaArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let census = load_census(census_path)?;
    let report: AreaReport = match source {
        AreaSource::Csv(path) => {
            let mut r = AreaReport::from_csv(&read_text(&path)?)
                .map_err(|e| CliError::parse_in(&path, e))?;
            if let Some(id) = &region.region_id {
                r.region_id = id.clone();
            }
            r
        }
        AreaSource::Raster(input) => {
            let c = classify_input(&input, region)?;
            let mode = area_mode(area, &c.info)?;
            area_report(&c.field, &c.bands, &c.img.transform, mode, &c.region_id)
        }
    };
    let cmp = compare_areas(&report, &census, &report.region_id);
    write_comparison(&cmp, out_dir)?;
    println!(
        "region {}: objective {:.2} km2",
        cmp.region_id, cmp.objective_km2
    );
    Ok(())
}

pub fn calibrate(
    input: &InputArgs,
    census_path: &Path,
    region: &RegionArgs,
    area: &AreaArgs,
    cfg: CalibrationConfig,
    out_dir: &Path,
) -> Result<(), CliError> {
    cfg.validate()?;
    let census = load_census(census_path)?;
    let (img, info) = load_raster(&input.raster)?;
    let bands = load_bands(input)?;
    let (mask, region_id) = select_region(region, &img, &input.raster)?;
    let mode = area_mode(area, &info)?;
    if census.for_region(&region_id).next().is_none() {
        return Err(CliError::Config(format!(
            "census has no rows for region {region_id:?}"
        )));
    }
    let result =
        calibrate_tolerances(&img, mask.as_ref(), &bands, &census, &region_id, mode, &cfg)?;
    write_all(
        out_dir,
        &[
            (
                "calibrated.xml",
                serialize_rangelist_xml(&result.bands).into_bytes(),
            ),
            ("trace.csv", result.trace_csv().into_bytes()),
        ],
    )?;
    write_comparison(&result.final_report, out_dir)?;
    println!(
        "{} moves over {} passes, objective {:.4} km2",
        result.trace.len(),
        result.passes,
        result.final_report.objective_km2
    );
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "some class is still off by more than {} of its census area",
            cfg.epsilon_rel
        )))
    }
}

pub fn fetch(
    req: &WmsRequest,
    cache_dir: &Path,
    timeout_secs: u64,
    out: &Path,
) -> Result<(), CliError> {
    let url = build_getmap_url(req)?;
    let bytes = fetch_map(&url, cache_dir, Duration::from_secs(timeout_secs))?;
    write_atomic(out, &bytes)?;
    println!("{url}");
    println!("wrote {} ({} bytes)", out.display(), bytes.len());
    Ok(())
}

pub fn aggregate(
    input: &InputArgs,
    region: &RegionArgs,
    factor: usize,
    rule: AggregationRule,
    render_args: &RenderArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let c = classify_input(input, region)?;
    let coarse = aggregate_categorical(&c.field, factor, rule)?;
    let rendered = render(
        &coarse,
        &c.bands,
        c.img.transform.downsampled(factor),
        render_args,
    )?;
    let mut files = vec![("aggregated.tif", write_geotiff(&rendered))];
    if render_args.ppm {
        files.push(("aggregated.ppm", write_ppm(&rendered)));
    }
    write_all(out_dir, &files)?;
    println!(
        "{} x {} -> {} x {}",
        c.field.width(),
        c.field.height(),
        coarse.width(),
        coarse.height()
    );
    Ok(())
}
