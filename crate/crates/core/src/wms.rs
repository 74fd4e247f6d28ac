//! WMS GetMap requests and a content-addressed disk cache for the
//! responses.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Everything outside the RFC 3986 unreserved set gets escaped.
const VALUE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// Redirect hops followed before giving up.
pub const MAX_REDIRECTS: usize = 3;

#[derive(Debug, Error)]
pub enum WmsError {
    #[error("bounding box must satisfy min < max on both axes")]
    BadBbox,
    #[error("image size must be at least 1x1, got {0}x{1}")]
    BadSize(u32, u32),
    #[error("request timed out")]
    Timeout,
    #[error("server answered with HTTP status {0}")]
    HttpStatus(u16),
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("cache error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmsVersion {
    V1_1_1,
    V1_3_0,
}

impl WmsVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            WmsVersion::V1_1_1 => "1.1.1",
            WmsVersion::V1_3_0 => "1.3.0",
        }
    }
}

impl fmt::Display for WmsVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WmsVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1.1.1" => Ok(WmsVersion::V1_1_1),
            "1.3.0" => Ok(WmsVersion::V1_3_0),
            other => Err(format!("unsupported WMS version {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmsRequest {
    pub endpoint: String,
    pub version: WmsVersion,
    pub layer: String,
    pub crs_code: u32,
    /// (min_x, min_y, max_x, max_y) in CRS units, x being easting or
    /// longitude.
    pub bbox: (f64, f64, f64, f64),
    pub width: u32,
    pub height: u32,
    pub format: String,
}

impl WmsRequest {
    pub fn new(
        endpoint: impl Into<String>,
        version: WmsVersion,
        layer: impl Into<String>,
        crs_code: u32,
        bbox: (f64, f64, f64, f64),
        width: u32,
        height: u32,
    ) -> Self {
        WmsRequest {
            endpoint: endpoint.into(),
            version,
            layer: layer.into(),
            crs_code,
            bbox,
            width,
            height,
            format: "image/tiff".into(),
        }
    }

    pub fn validate(&self) -> Result<(), WmsError> {
        let (x0, y0, x1, y1) = self.bbox;
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x0 >= x1 || y0 >= y1 {
            return Err(WmsError::BadBbox);
        }
        if self.width == 0 || self.height == 0 {
            return Err(WmsError::BadSize(self.width, self.height));
        }
        Ok(())
    }
}

fn enc(v: &str) -> String {
    utf8_percent_encode(v, VALUE).to_string()
}

/// GetMap URL with parameters in a fixed order. WMS 1.3.0 with EPSG:4326
/// lists the box as lat/lon.
pub fn build_getmap_url(req: &WmsRequest) -> Result<String, WmsError> {
    req.validate()?;
    let (x0, y0, x1, y1) = req.bbox;
    let corners = match (req.version, req.crs_code) {
        (WmsVersion::V1_3_0, 4326) => [y0, x0, y1, x1],
        _ => [x0, y0, x1, y1],
    };
    let bbox: Vec<String> = corners.iter().map(|v| enc(&v.to_string())).collect();
    let crs_key = match req.version {
        WmsVersion::V1_1_1 => "SRS",
        WmsVersion::V1_3_0 => "CRS",
    };
    let sep = match req.endpoint.as_bytes().last() {
        Some(b'?') | Some(b'&') => "",
        _ if req.endpoint.contains('?') => "&",
        _ => "?",
    };
    Ok(format!(
        "{}{sep}SERVICE=WMS&VERSION={}&REQUEST=GetMap&LAYERS={}&STYLES=&{crs_key}={}&BBOX={}&WIDTH={}&HEIGHT={}&FORMAT={}",
        req.endpoint,
        req.version,
        enc(&req.layer),
        enc(&format!("EPSG:{}", req.crs_code)),
        bbox.join(","),
        req.width,
        req.height,
        enc(&req.format),
    ))
}

/// Cache file for `url`: `<sha256 of the URL in hex>.bin`.
pub fn cache_path(cache_dir: &Path, url: &str) -> PathBuf {
    let digest = Sha256::digest(url.as_bytes());
    cache_dir.join(format!("{}.bin", hex::encode(digest)))
}

/// Returns the body for `url`, from the cache when present, otherwise by a
/// single HTTP GET whose 200 response is stored in the cache.
pub fn fetch_map(url: &str, cache_dir: &Path, timeout: Duration) -> Result<Vec<u8>, WmsError> {
    let path = cache_path(cache_dir, url);
    match std::fs::read(&path) {
        Ok(bytes) => return Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }

    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
        .build()
        .map_err(|e| WmsError::NetworkError(e.to_string()))?;
    let net = |e: reqwest::Error| {
        if e.is_timeout() {
            WmsError::Timeout
        } else {
            WmsError::NetworkError(e.to_string())
        }
    };
    let resp = client.get(url).send().map_err(net)?;
    let status = resp.status();
    if status != reqwest::StatusCode::OK {
        return Err(WmsError::HttpStatus(status.as_u16()));
    }
    let body = resp.bytes().map_err(net)?.to_vec();

    std::fs::create_dir_all(cache_dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(cache_dir)?;
    tmp.write_all(&body)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(body)
}
