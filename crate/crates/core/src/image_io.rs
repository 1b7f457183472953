//! Planar rasters, tiled grids and PNG / netpbm output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Planar `channels × height × width` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Raster {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Sample `index` of a `BCHW` tensor.
    pub fn from_sample(t: &Tensor, index: usize) -> Result<Self> {
        let (b, c, h, w) = t.dims4()?;
        if index >= b {
            return Err(Error::dim("raster", format!("sample {index} of a batch of {b}")));
        }
        Ok(Raster {
            channels: c,
            height: h,
            width: w,
            data: t.sample_slice(index).to_vec(),
        })
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(vec![1, self.channels, self.height, self.width], self.data.clone())
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Interleaved 8-bit samples, rounding and clamping to `[0, 255]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let plane = self.height * self.width;
        let mut out = Vec::with_capacity(plane * self.channels);
        for p in 0..plane {
            for c in 0..self.channels {
                out.push((self.data[c * plane + p].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    /// Write as PNG, or as binary PGM/PPM when the extension is `pgm` or `ppm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Image(format!("cannot encode {} channels", self.channels)));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        let fail = |e: image::ImageError| Error::Image(format!("{}: {e}", path.display()));
        let (w, h) = (self.width as u32, self.height as u32);
        if matches!(ext.as_str(), "pgm" | "ppm" | "pnm") {
            use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
            use image::ImageEncoder;
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let subtype = if self.channels == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(std::io::BufWriter::new(file))
                .with_subtype(subtype)
                .write_image(&self.to_bytes(), w, h, color)
                .map_err(fail)
        } else {
            image::save_buffer_with_format(path, &self.to_bytes(), w, h, color, image::ImageFormat::Png).map_err(fail)
        }
    }

    /// Read a PNG or binary PGM/PPM as gray or RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let (channels, raw) = if img.color().has_color() {
            (3, img.to_rgb8().into_raw())
        } else {
            (1, img.to_luma8().into_raw())
        };
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut r = Raster::filled(channels, h, w, 0.0);
        for (p, px) in raw.chunks(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                r.set(c, p / w, p % w, v as f32 / 255.0);
            }
        }
        Ok(r)
    }
}

/// Tile equally sized rasters row-major into `cols` columns with `sep`-pixel gutters.
pub fn tile(tiles: &[Raster], cols: usize, sep: usize, background: f32) -> Result<Raster> {
    let first = tiles
        .first()
        .ok_or_else(|| Error::InvalidArgument("no tiles to lay out".into()))?;
    let (c, th, tw) = (first.channels, first.height, first.width);
    if tiles.iter().any(|t| (t.channels, t.height, t.width) != (c, th, tw)) {
        return Err(Error::dim("tile", "tiles differ in shape"));
    }
    let cols = cols.clamp(1, tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let mut out = Raster::filled(c, rows * th + (rows - 1) * sep, cols * tw + (cols - 1) * sep, background);
    for (i, t) in tiles.iter().enumerate() {
        let (oy, ox) = ((i / cols) * (th + sep), (i % cols) * (tw + sep));
        for ch in 0..c {
            for y in 0..th {
                for x in 0..tw {
                    out.set(ch, oy + y, ox + x, t.get(ch, y, x));
                }
            }
        }
    }
    Ok(out)
}

/// Tile position `(row, col)` of pixel `(y, x)` and its in-tile offset, if not on a gutter.
pub fn tile_at(y: usize, x: usize, th: usize, tw: usize, sep: usize) -> Option<((usize, usize), (usize, usize))> {
    let (ty, iy) = (y / (th + sep), y % (th + sep));
    let (tx, ix) = (x / (tw + sep), x % (tw + sep));
    (iy < th && ix < tw).then_some(((ty, tx), (iy, ix)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout_and_gutters() {
        let tiles: Vec<Raster> = (0..5).map(|i| Raster::filled(1, 2, 3, i as f32 / 10.0)).collect();
        let g = tile(&tiles, 2, 1, 1.0).unwrap();
        assert_eq!((g.height, g.width), (3 * 2 + 2, 2 * 3 + 1));
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(0, 0, 3), 1.0);
        assert_eq!(g.get(0, 3, 4), 0.3);
        assert_eq!(tile_at(3, 4, 2, 3, 1), Some(((1, 1), (0, 0))));
        assert_eq!(tile_at(2, 0, 2, 3, 1), None);
    }

    #[test]
    fn png_and_pgm_round_trip_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster {
            channels: 1,
            height: 2,
            width: 2,
            data: vec![0.0, 0.5, 1.0, 0.25],
        };
        let png = dir.path().join("a.png");
        r.save(&png).unwrap();
        let back = Raster::load(&png).unwrap();
        assert_eq!(back.to_bytes(), r.to_bytes());
        let pgm = dir.path().join("sub/a.pgm");
        r.save(&pgm).unwrap();
        let bytes = std::fs::read(&pgm).unwrap();
        let header: Vec<&str> = std::str::from_utf8(&bytes[..bytes.len() - 4]).unwrap().split_whitespace().collect();
        assert_eq!(header, ["P5", "2", "2", "255"]);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 255, 64]);
    }

    #[test]
    fn rgb_bytes_interleave_planes() {
        let r = Raster {
            channels: 3,
            height: 1,
            width: 2,
            data: vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(r.to_bytes(), vec![255, 0, 0, 0, 255, 0]);
    }
}
