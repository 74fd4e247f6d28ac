pub mod calibrate;
pub mod classify;
pub mod geoformats;
pub mod wms;
pub mod zonal;
