mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lulc_core::wms::WmsVersion;
use lulc_core::zonal::{AggregationRule, AreaModeKind};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "lulc",
    version,
    about = "Color-range land cover classification and census comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dimensions, georeferencing and layout of a GeoTIFF.
    Info {
        #[arg(long)]
        raster: PathBuf,
    },
    /// Classify a raster and write a rendered label GeoTIFF and a histogram.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Per-band, per-class and per-category areas for one region.
    Zonal {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        area: AreaArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compare computed areas against census areas.
    Compare {
        #[arg(long)]
        census: PathBuf,
        /// Area CSV written by `zonal`; when absent, areas are computed from
        /// --raster and --ranges.
        #[arg(long, conflicts_with_all = ["raster", "ranges"])]
        areas: Option<PathBuf>,
        #[arg(long, required_unless_present = "areas")]
        raster: Option<PathBuf>,
        #[arg(long, required_unless_present = "areas")]
        ranges: Option<PathBuf>,
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        area: AreaArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Tune band tolerances until areas match the census.
    Calibrate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        census: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        area: AreaArgs,
        /// Relative area error accepted per class.
        #[arg(long, default_value_t = 0.10)]
        epsilon: f64,
        #[arg(long, default_value_t = 50)]
        max_passes: usize,
        /// Also move band centers to the median of their matched pixels.
        #[arg(long)]
        recenter: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Download a WMS GetMap image through the local cache.
    Fetch {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        layer: String,
        /// min_x,min_y,max_x,max_y
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bbox: Vec<f64>,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long = "wms-version", default_value = "1.1.1", value_parser = parse_version)]
        wms_version: WmsVersion,
        #[arg(long, default_value_t = 4326)]
        crs: u32,
        #[arg(long, default_value = "image/tiff")]
        format: String,
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        #[arg(long, env = "LULC_CACHE_DIR")]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downsample a classified raster by blocks.
    Aggregate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        factor: usize,
        #[arg(long, default_value = "majority", value_parser = parse_rule)]
        rule: AggregationRule,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    raster: PathBuf,
    /// RangeList XML.
    #[arg(long)]
    ranges: PathBuf,
    /// category,member CSV replacing the built-in hierarchy.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    /// Shapefile (.shp) or GeoJSON boundary.
    #[arg(long)]
    boundary: Option<PathBuf>,
    /// Region to use; without --boundary it only names the report.
    #[arg(long, conflicts_with = "region_index")]
    region_id: Option<String>,
    /// 0-based ordinal of the boundary region.
    #[arg(long, requires = "boundary")]
    region_index: Option<usize>,
}

#[derive(Args)]
struct AreaArgs {
    /// Fixed ground area of one pixel in km².
    #[arg(long)]
    pixel_area: Option<f64>,
    #[arg(long, value_enum)]
    area_mode: Option<ModeArg>,
}

#[derive(Args)]
struct RenderArgs {
    /// Paint NODATA with the unclassified color instead of transparent.
    #[arg(long)]
    opaque_nodata: bool,
    /// Also write a PPM quick-view next to the GeoTIFF.
    #[arg(long)]
    ppm: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Projected,
    Geographic,
}

impl From<ModeArg> for AreaModeKind {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fixed => AreaModeKind::Fixed,
            ModeArg::Projected => AreaModeKind::Projected,
            ModeArg::Geographic => AreaModeKind::Geographic,
        }
    }
}

fn parse_version(s: &str) -> Result<WmsVersion, String> {
    s.parse()
}

fn parse_rule(s: &str) -> Result<AggregationRule, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Info { raster } => commands::info(&raster),
        Command::Classify {
            input,
            region,
            render,
            out_dir,
        } => commands::classify(&input, &region, &render, &out_dir),
        Command::Zonal {
            input,
            region,
            area,
            out_dir,
        } => commands::zonal(&input, &region, &area, &out_dir),
        Command::Compare {
            census,
            areas,
            raster,
            ranges,
            hierarchy,
            region,
            area,
            out_dir,
        } => {
            let source = match areas {
                Some(path) => commands::AreaSource::Csv(path),
                None => commands::AreaSource::Raster(InputArgs {
                    raster: raster.expect("required by clap"),
                    ranges: ranges.expect("required by clap"),
                    hierarchy,
                }),
            };
            commands::compare(&census, source, &region, &area, &out_dir)
        }
        Command::Calibrate {
            input,
            census,
            region,
            area,
            epsilon,
            max_passes,
            recenter,
            out_dir,
        } => {
            let cfg = lulc_core::calibrate::CalibrationConfig {
                epsilon_rel: epsilon,
                max_passes,
                recenter,
                ..Default::default()
            };
            commands::calibrate(&input, &census, &region, &area, cfg, &out_dir)
        }
        Command::Fetch {
            endpoint,
            layer,
            bbox,
            width,
            height,
            wms_version,
            crs,
            format,
            timeout,
            cache_dir,
            out,
        } => {
            let [min_x, min_y, max_x, max_y] = bbox[..] else {
                return Err(CliError::Config(format!(
                    "--bbox needs 4 numbers, got {}",
                    bbox.len()
                )));
            };
            let mut req = lulc_core::wms::WmsRequest::new(
                endpoint,
                wms_version,
                layer,
                crs,
                (min_x, min_y, max_x, max_y),
                width,
                height,
            );
            req.format = format;
            let cache_dir =
                cache_dir.unwrap_or_else(|| std::env::temp_dir().join("lulc-wms-cache"));
            commands::fetch(&req, &cache_dir, timeout, &out)
        }
        Command::Aggregate {
            input,
            region,
            factor,
            rule,
            render,
            out_dir,
        } => commands::aggregate(&input, &region, factor, rule, &render, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lulc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
