use super::types::RasterImage;

/// Binary P6 quick-view with alpha composited over white.
pub fn write_ppm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for p in img.pixels() {
        let a = p.a as u32;
        for c in [p.r, p.g, p.b] {
            let v = (c as u32 * a + 255 * (255 - a) + 127) / 255;
            out.push(v as u8);
        }
    }
    out
}
