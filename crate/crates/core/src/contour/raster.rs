//! Fixed colour ramps and PNG thumbnails of contour products.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use super::{ContourError, ContourProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    const fn hex(v: u32) -> Rgb {
        Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8])
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampId {
    /// Yellow-green-blue, for absolute precipitation.
    YlGnBu,
    /// Red-pale yellow-blue, for signed relative change: decreases red,
    /// increases blue.
    RdYlBu,
    /// Blue-yellow-red, for temperatures.
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ramp {
    pub id: RampId,
    pub name: &'static str,
    pub colors: &'static [Rgb],
}

const YLGNBU: [Rgb; 9] = [
    Rgb::hex(0xffffd9),
    Rgb::hex(0xedf8b1),
    Rgb::hex(0xc7e9b4),
    Rgb::hex(0x7fcdbb),
    Rgb::hex(0x41b6c4),
    Rgb::hex(0x1d91c0),
    Rgb::hex(0x225ea8),
    Rgb::hex(0x253494),
    Rgb::hex(0x081d58),
];

const RDYLBU: [Rgb; 9] = [
    Rgb::hex(0xd73027),
    Rgb::hex(0xf46d43),
    Rgb::hex(0xfdae61),
    Rgb::hex(0xfee090),
    Rgb::hex(0xffffbf),
    Rgb::hex(0xe0f3f8),
    Rgb::hex(0xabd9e9),
    Rgb::hex(0x74add1),
    Rgb::hex(0x4575b4),
];

const TEMPERATURE: [Rgb; 9] = [
    Rgb::hex(0x4575b4),
    Rgb::hex(0x74add1),
    Rgb::hex(0xabd9e9),
    Rgb::hex(0xe0f3f8),
    Rgb::hex(0xffffbf),
    Rgb::hex(0xfee090),
    Rgb::hex(0xfdae61),
    Rgb::hex(0xf46d43),
    Rgb::hex(0xd73027),
];

pub fn ramp(id: RampId) -> Ramp {
    match id {
        RampId::YlGnBu => Ramp {
            id,
            name: "yellow-green-blue",
            colors: &YLGNBU,
        },
        RampId::RdYlBu => Ramp {
            id,
            name: "red-pale yellow-blue",
            colors: &RDYLBU,
        },
        RampId::Temperature => Ramp {
            id,
            name: "blue-yellow-red",
            colors: &TEMPERATURE,
        },
    }
}

pub fn ramps() -> Vec<Ramp> {
    [RampId::YlGnBu, RampId::RdYlBu, RampId::Temperature]
        .into_iter()
        .map(ramp)
        .collect()
}

impl Ramp {
    /// Colour of band `i` out of `n`, spread evenly over the table.
    pub fn band_color(&self, i: usize, n: usize) -> Rgb {
        let last = self.colors.len() - 1;
        if n <= 1 {
            return self.colors[last / 2];
        }
        let pos = (i.min(n - 1) * last + (n - 1) / 2) / (n - 1);
        self.colors[pos]
    }

    /// Nearest table entry for `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> Rgb {
        let n = self.colors.len();
        let t = if t.is_nan() { 0.5 } else { t.clamp(0.0, 1.0) };
        self.colors[((t * n as f64) as usize).min(n - 1)]
    }
}

/// Rasterizes the product's bands onto a `width` x `height` RGBA image
/// covering the grid's bounding box; pixels outside every band stay
/// transparent.
pub fn render_thumbnail(
    product: &ContourProduct,
    width: u32,
    height: u32,
    ramp_id: RampId,
) -> Result<Vec<u8>, ContourError> {
    let (w, h) = (width.max(1) as usize, height.max(1) as usize);
    let [x0, y0, x1, y1] = product.bbox;
    let (sx, sy) = (w as f64 / (x1 - x0), h as f64 / (y1 - y0));
    let ramp = ramp(ramp_id);
    let nbands = product.spec.band_count();
    let mut rgba = vec![0u8; w * h * 4];
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); h];
    for band in &product.bands {
        rows.iter_mut().for_each(Vec::clear);
        let rings = band
            .polygons
            .iter()
            .flat_map(|p| std::iter::once(&p.exterior).chain(&p.holes));
        for ring in rings {
            for seg in ring.windows(2) {
                let (ax, ay) = ((seg[0][0] - x0) * sx, (y1 - seg[0][1]) * sy);
                let (bx, by) = ((seg[1][0] - x0) * sx, (y1 - seg[1][1]) * sy);
                if ay == by {
                    continue;
                }
                let (top, bottom) = (ay.min(by), ay.max(by));
                let first = (top - 0.5).ceil().max(0.0) as usize;
                let end = ((bottom - 0.5).ceil().max(0.0) as usize).min(h);
                for (row, xs) in rows.iter_mut().enumerate().take(end).skip(first) {
                    let yc = row as f64 + 0.5;
                    xs.push(ax + (yc - ay) / (by - ay) * (bx - ax));
                }
            }
        }
        let Rgb([r, g, b]) = ramp.band_color(band.band_id, nbands);
        for (row, xs) in rows.iter_mut().enumerate() {
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let from = (pair[0] - 0.5).ceil().max(0.0) as usize;
                let to = ((pair[1] - 0.5).ceil().max(0.0) as usize).min(w);
                for col in from..to {
                    let k = (row * w + col) * 4;
                    rgba[k..k + 4].copy_from_slice(&[r, g, b, 255]);
                }
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| ContourError::Png(e.to_string()))?;
        writer
            .write_image_data(&rgba)
            .map_err(|e| ContourError::Png(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{marching_squares_bands, BandSpec, ContourParams};
    use crate::grid::{GridSnapshot, Scenario, Variable};
    use crate::index::make_index;

    fn decode(png_bytes: &[u8]) -> (usize, usize, Vec<u8>) {
        let dec = png::Decoder::new(std::io::Cursor::new(png_bytes));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info.width as usize, info.height as usize, buf)
    }

    fn product(values: Vec<f64>, th: Vec<f64>) -> ContourProduct {
        let s = GridSnapshot::new(
            Variable::Pr,
            "CESM1-CAM5",
            Scenario::Rcp85,
            2021,
            3,
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            values,
            vec![false; 4],
        )
        .unwrap();
        let idx = make_index("NEX-DCP", "CESM1-CAM5", "pr", 2021, 3).unwrap();
        marching_squares_bands(&s, &BandSpec::new(th).unwrap(), idx, ContourParams::default()).unwrap()
    }

    #[test]
    fn split_cell_transition_row() {
        let p = product(vec![0.0, 0.0, 10.0, 10.0], vec![-1.0, 5.0, 11.0]);
        let png_bytes = render_thumbnail(&p, 100, 100, RampId::YlGnBu).unwrap();
        let (w, h, px) = decode(&png_bytes);
        assert_eq!((w, h), (100, 100));
        let color = |row: usize| &px[(row * w + 50) * 4..(row * w + 50) * 4 + 4];
        let top = color(0).to_vec();
        let bottom = color(99).to_vec();
        assert_ne!(top, bottom);
        let transition = (1..h).find(|&r| color(r) != top.as_slice()).unwrap();
        assert!((49..=51).contains(&transition), "{transition}");
        for r in transition..h {
            assert_eq!(color(r), bottom.as_slice());
        }
    }

    #[test]
    fn uniform_is_one_color_and_deterministic() {
        let p = product(vec![1.0; 4], vec![0.0, 2.0]);
        let a = render_thumbnail(&p, 32, 20, RampId::YlGnBu).unwrap();
        let b = render_thumbnail(&p, 32, 20, RampId::YlGnBu).unwrap();
        assert_eq!(a, b);
        let (_, _, px) = decode(&a);
        let first = px[..4].to_vec();
        assert_eq!(first[3], 255);
        assert!(px.chunks(4).all(|c| c == first.as_slice()));
    }

    #[test]
    fn band_colors_span_ramp() {
        let r = ramp(RampId::YlGnBu);
        assert_eq!(r.band_color(0, 7), r.colors[0]);
        assert_eq!(r.band_color(6, 7), r.colors[8]);
        assert_eq!(r.band_color(0, 1), r.colors[4]);
        assert_eq!(ramp(RampId::RdYlBu).at(1.0).to_string(), "#4575b4");
    }
}
