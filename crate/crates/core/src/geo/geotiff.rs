//! GeoTIFF ingestion: pixel data through the `tiff` crate, georeferencing
//! from the ModelPixelScale / ModelTiepoint / GeoKeyDirectory tags.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::compression::DeflateLevel;
use tiff::encoder::{colortype, Compression, TiffEncoder};
use tiff::tags::Tag;
use tiff::{ColorType, TiffError};

use super::{GeoError, GeoRaster, PixelSize, UtmCrs};

const KEY_MODEL_TYPE: u16 = 1024;
const KEY_RASTER_TYPE: u16 = 1025;
const KEY_PROJECTED_CS: u16 = 3072;

const MODEL_TYPE_PROJECTED: u16 = 1;
const MODEL_TYPE_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_POINT: u16 = 2;
const USER_DEFINED: u16 = 32767;

pub fn load_raster(path: impl AsRef<Path>) -> Result<GeoRaster, GeoError> {
    read_raster(BufReader::new(File::open(path)?))
}

pub fn read_raster<R: Read + Seek>(reader: R) -> Result<GeoRaster, GeoError> {
    let mut dec = Decoder::new(reader).map_err(tiff_err)?.with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions().map_err(tiff_err)?;
    let georef = read_georeference(&mut dec)?;

    if dec.find_tag_unsigned::<u16>(Tag::PlanarConfiguration).map_err(tiff_err)? == Some(2) {
        return Err(GeoError::UnsupportedEncoding("planar sample layout".into()));
    }
    let bands = match dec.colortype().map_err(tiff_err)? {
        ColorType::RGB(8) => 3,
        ColorType::RGBA(8) => 4,
        ColorType::Multiband { bit_depth: 8, num_samples } if num_samples >= 3 => num_samples as usize,
        other => return Err(GeoError::UnsupportedEncoding(format!("color type {other:?}"))),
    };
    let data = match dec.read_image().map_err(tiff_err)? {
        DecodingResult::U8(v) => v,
        _ => return Err(GeoError::UnsupportedEncoding("non 8-bit unsigned samples".into())),
    };
    let pixels = width as usize * height as usize;
    if data.len() != pixels * bands {
        return Err(GeoError::UnsupportedEncoding(format!(
            "decoded {} samples for {pixels} pixels x {bands} bands",
            data.len()
        )));
    }
    // Extra bands (alpha, near-infrared) are dropped.
    let samples = if bands == 3 {
        data
    } else {
        data.chunks_exact(bands).flat_map(|px| px[..3].iter().copied()).collect()
    };

    GeoRaster::new(width, height, samples, georef.origin, georef.pixel_size, georef.crs)
}

struct Georeference {
    origin: (f64, f64),
    pixel_size: PixelSize,
    crs: UtmCrs,
}

fn read_georeference<R: Read + Seek>(dec: &mut Decoder<R>) -> Result<Georeference, GeoError> {
    let keys = dec
        .find_tag(Tag::GeoKeyDirectoryTag)
        .map_err(tiff_err)?
        .ok_or_else(|| GeoError::MissingGeoreference("GeoKeyDirectory tag absent".into()))?
        .into_u16_vec()
        .map_err(tiff_err)?;
    let keys = parse_geokeys(&keys)?;

    match keys.get(KEY_MODEL_TYPE) {
        Some(MODEL_TYPE_GEOGRAPHIC) => return Err(GeoError::ProjectionNotProjected),
        Some(MODEL_TYPE_PROJECTED) | None => {}
        Some(other) => {
            return Err(GeoError::MissingGeoreference(format!("unsupported model type {other}")))
        }
    }
    let epsg = match keys.get(KEY_PROJECTED_CS) {
        Some(USER_DEFINED) | None if keys.get(KEY_MODEL_TYPE).is_none() => {
            return Err(GeoError::MissingGeoreference("no model type or projected CRS key".into()))
        }
        Some(USER_DEFINED) | None => return Err(GeoError::UnsupportedProjection(USER_DEFINED as u32)),
        Some(code) => code as u32,
    };
    let crs = UtmCrs::from_epsg(epsg)?;

    let (mut origin, pixel_size) = match dec.find_tag(Tag::ModelTransformationTag).map_err(tiff_err)? {
        Some(v) => from_transformation(&v.into_f64_vec().map_err(tiff_err)?)?,
        None => from_scale_and_tiepoint(dec)?,
    };
    if keys.get(KEY_RASTER_TYPE) == Some(RASTER_PIXEL_IS_POINT) {
        // Tie point refers to the pixel centre; shift to the corner.
        origin.0 -= 0.5 * pixel_size.x;
        origin.1 += 0.5 * pixel_size.y;
    }
    Ok(Georeference { origin, pixel_size, crs })
}

fn from_scale_and_tiepoint<R: Read + Seek>(dec: &mut Decoder<R>) -> Result<((f64, f64), PixelSize), GeoError> {
    let scale = dec
        .find_tag(Tag::ModelPixelScaleTag)
        .map_err(tiff_err)?
        .ok_or_else(|| GeoError::MissingGeoreference("ModelPixelScale tag absent".into()))?
        .into_f64_vec()
        .map_err(tiff_err)?;
    let tie = dec
        .find_tag(Tag::ModelTiepointTag)
        .map_err(tiff_err)?
        .ok_or_else(|| GeoError::MissingGeoreference("ModelTiepoint tag absent".into()))?
        .into_f64_vec()
        .map_err(tiff_err)?;
    if scale.len() < 2 || tie.len() < 6 {
        return Err(GeoError::MissingGeoreference("truncated scale or tie-point tag".into()));
    }
    if tie.len() > 6 {
        return Err(GeoError::RotatedRaster);
    }
    let size = PixelSize { x: scale[0], y: scale[1] };
    let (i, j, x, y) = (tie[0], tie[1], tie[3], tie[4]);
    Ok(((x - i * size.x, y + j * size.y), size))
}

fn from_transformation(m: &[f64]) -> Result<((f64, f64), PixelSize), GeoError> {
    if m.len() != 16 {
        return Err(GeoError::MissingGeoreference("malformed ModelTransformation tag".into()));
    }
    if m[1] != 0.0 || m[4] != 0.0 {
        return Err(GeoError::RotatedRaster);
    }
    Ok(((m[3], m[7]), PixelSize { x: m[0], y: -m[5] }))
}

/// Short-valued GeoKeys keyed by id; keys stored in other tags are skipped.
struct GeoKeys(Vec<(u16, u16)>);

impl GeoKeys {
    fn get(&self, key: u16) -> Option<u16> {
        self.0.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

fn parse_geokeys(dir: &[u16]) -> Result<GeoKeys, GeoError> {
    if dir.len() < 4 {
        return Err(GeoError::MissingGeoreference("GeoKeyDirectory header truncated".into()));
    }
    let count = dir[3] as usize;
    let entries = dir[4..]
        .chunks_exact(4)
        .take(count)
        .filter(|e| e[1] == 0 && e[2] == 1)
        .map(|e| (e[0], e[3]))
        .collect();
    Ok(GeoKeys(entries))
}

fn tiff_err(e: TiffError) -> GeoError {
    match e {
        TiffError::UnsupportedError(u) => GeoError::UnsupportedEncoding(u.to_string()),
        TiffError::IoError(io) => GeoError::Io(io),
        other => GeoError::Tiff(other),
    }
}

/// Writes a Deflate-compressed RGB GeoTIFF that [`load_raster`] reads back
/// to an identical raster.
pub fn write_geotiff<W: Write + Seek>(raster: &GeoRaster, writer: W) -> Result<(), GeoError> {
    let mut enc = TiffEncoder::new(BufWriter::new(writer))
        .map_err(tiff_err)?
        .with_compression(Compression::Deflate(DeflateLevel::Best));
    let mut image = enc
        .new_image::<colortype::RGB8>(raster.width(), raster.height())
        .map_err(tiff_err)?;
    let size = raster.pixel_size();
    let origin = raster.origin();
    let dir = image.encoder();
    dir.write_tag(Tag::ModelPixelScaleTag, &[size.x, size.y, 0.0][..])
        .map_err(tiff_err)?;
    dir.write_tag(
        Tag::ModelTiepointTag,
        &[0.0, 0.0, 0.0, origin.easting, origin.northing, 0.0][..],
    )
    .map_err(tiff_err)?;
    let epsg = u16::try_from(raster.epsg()).map_err(|_| GeoError::UnsupportedProjection(raster.epsg()))?;
    let keys: [u16; 16] = [
        1, 1, 0, 3, //
        KEY_MODEL_TYPE, 0, 1, MODEL_TYPE_PROJECTED, //
        KEY_RASTER_TYPE, 0, 1, 1, //
        KEY_PROJECTED_CS, 0, 1, epsg,
    ];
    dir.write_tag(Tag::GeoKeyDirectoryTag, &keys[..]).map_err(tiff_err)?;
    image.write_data(raster.samples()).map_err(tiff_err)?;
    Ok(())
}
