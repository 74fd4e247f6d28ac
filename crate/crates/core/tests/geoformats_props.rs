mod common;

use common::*;
use lulc_core::geoformats::*;
use proptest::prelude::*;

#[test]
fn hand_built_tiff_decodes_to_its_pixel() {
    let (img, info) = read_geotiff_with_info(&tiff_1x1()).unwrap();
    assert_eq!((img.width(), img.height()), (1, 1));
    assert_eq!(img.pixels(), &[Rgba::new(0x60, 0x6f, 0x55, 0xff)]);
    assert!(!info.georeferenced);
    assert_eq!(info.byte_order, ByteOrder::LittleEndian);
}

#[test]
fn big_endian_fixture_reads_the_same() {
    let be = to_big_endian(&tiff_1x1());
    assert_eq!(&be[..4], b"MM\0*");
    let (img, info) = read_geotiff_with_info(&be).unwrap();
    assert_eq!(info.byte_order, ByteOrder::BigEndian);
    assert_eq!(img.pixels(), &[Rgba::new(0x60, 0x6f, 0x55, 0xff)]);
}

#[test]
fn xxxx_is_bad_magic() {
    assert_eq!(read_geotiff(b"XXXX\0\0\0\0"), Err(FormatError::BadMagic));
}

#[test]
fn seven_band_listing_parses() {
    let set = seven_bands();
    let colors: Vec<String> = set.bands().iter().map(|b| b.color.to_hex()).collect();
    assert_eq!(
        colors,
        ["606f55", "897966", "a59385", "5f6655", "515546", "918070", "988775"]
    );
    assert!(set.bands().iter().all(|b| b.tolerance == 10));
    assert_eq!(
        set.classes(),
        ["Wheat", "Canola", "Misc Crop", "Pasture", "Pulses"]
    );
    assert_eq!(set.band(2).name, "Band 3 \u{2013} Misc Crop");
    assert_eq!(set.band(0).comment.as_deref(), Some("Band 1"));
}

#[test]
fn uncorrected_listing_is_rejected() {
    // The original listing opens a new <Range> where it should close one.
    let broken = SEVEN_BAND_XML.replacen("</Range>", "<Range>", 1);
    assert!(matches!(
        parse_rangelist_xml(&broken),
        Err(FormatError::Xml(_))
    ));
}

#[test]
fn shapefile_square_fixture() {
    let regions = read_shapefile_polygons(&shapefile_square()).unwrap();
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0].id, "0");
    assert_eq!(regions[0].rings().len(), 1);
    assert_eq!(
        regions[0].rings()[0],
        vec![
            (0.0, 0.0),
            (0.0, 10.0),
            (10.0, 10.0),
            (10.0, 0.0),
            (0.0, 0.0)
        ]
    );
}

#[test]
fn shapefile_prefixes_never_succeed_partially() {
    let full = shapefile_square();
    for n in 0..full.len() {
        let prefix = &full[..n];
        if let Ok(regions) = read_shapefile_polygons(prefix) {
            panic!("prefix of {n} bytes parsed to {regions:?}");
        }
    }
}

#[test]
fn township_geojson() {
    let text = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"name":"TO39R20W4"},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[0,10],[10,10],[10,0],[0,0]]]}},
        {"type":"Feature","properties":{"name":"TO38R21W4"},
         "geometry":{"type":"Polygon","coordinates":[[[10,0],[10,10],[20,10],[20,0],[10,0]]]}}]}"#;
    let ids: Vec<String> = read_geojson_polygons(text)
        .unwrap()
        .into_iter()
        .map(|r| r.id)
        .collect();
    assert_eq!(ids, ["TO39R20W4", "TO38R21W4"]);
}

#[test]
fn table_census_loads() {
    let t = load_census_csv(
        "region,class,area_km2\nTO39R20W4,Wheat,25.69\nTO39R20W4,Canola,23.24\nTO39R20W4,Pulses,2.13\nTO39R20W4,Pasture,12.58\n",
    )
    .unwrap();
    assert_eq!(t.records().len(), 4);
    assert_eq!(t.lookup("TO39R20W4", " wheat "), Some(25.69));
}

fn arb_band() -> impl Strategy<Value = ColorBand> {
    (
        "[A-Za-z][A-Za-z &<>'\"]{0,12}",
        proptest::option::of("[ -~]{0,16}"),
        arb_rgb(),
        any::<u8>(),
        proptest::option::of(1u8..20),
    )
        .prop_map(|(class, comment, color, tol, band_no)| {
            let class = class.trim().to_string();
            let class = if class.is_empty() {
                "X".to_string()
            } else {
                class
            };
            let name = match band_no {
                Some(n) => format!("Band {n} - {class}"),
                None => class,
            };
            let mut b = ColorBand::new(name, color, tol);
            if let Some(c) = comment {
                b = b.with_comment(c.trim());
            }
            b
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn geotiff_round_trip(img in arb_raster(40, 40)) {
        let bytes = write_geotiff(&img);
        prop_assert_eq!(&bytes[..4], b"II*\0");
        let (back, info) = read_geotiff_with_info(&bytes).unwrap();
        prop_assert!(info.georeferenced);
        prop_assert_eq!(back, img);
    }

    #[test]
    fn geotiff_big_endian_reencoding(img in arb_raster(12, 12)) {
        let be = to_big_endian(&write_geotiff(&img));
        prop_assert_eq!(read_geotiff(&be).unwrap(), img);
    }

    #[test]
    fn geotiff_truncation_always_errors(img in arb_raster(6, 6), cut in any::<prop::sample::Index>()) {
        let bytes = write_geotiff(&img);
        let n = cut.index(bytes.len());
        prop_assert!(read_geotiff(&bytes[..n]).is_err());
    }

    #[test]
    fn geotiff_corruption_never_panics(
        img in arb_raster(4, 4),
        edits in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8),
    ) {
        let mut bytes = write_geotiff(&img);
        for (i, v) in edits {
            let at = i.index(bytes.len());
            bytes[at] = v;
        }
        let _ = read_geotiff(&bytes);
    }

    #[test]
    fn shapefile_corruption_never_panics(
        edits in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8),
    ) {
        let mut bytes = shapefile_square();
        for (i, v) in edits {
            let at = i.index(bytes.len());
            bytes[at] = v;
        }
        if let Ok(regions) = read_shapefile_polygons(&bytes) {
            for r in regions {
                for ring in r.rings() {
                    prop_assert!(ring.len() >= 4);
                    prop_assert_eq!(ring.first(), ring.last());
                }
            }
        }
    }

    #[test]
    fn rangelist_fixpoint(bands in proptest::collection::vec(arb_band(), 0..10)) {
        let set = BandSet::with_default_hierarchy(bands).unwrap();
        let text = serialize_rangelist_xml(&set);
        let back = parse_rangelist_xml(&text).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(serialize_rangelist_xml(&back), text);
    }

    #[test]
    fn rangelist_garbage_never_panics(text in "[<>/a-zA-Z0-9 ]{0,80}") {
        let _ = parse_rangelist_xml(&text);
    }

    #[test]
    fn geojson_garbage_never_panics(text in "[\\[\\]{}\",:0-9a-zA-Z ]{0,80}") {
        if let Err(FormatError::Parse { offset, .. }) = read_geojson_polygons(&text) {
            prop_assert!(offset <= text.len());
        }
    }
}
