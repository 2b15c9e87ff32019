//! Filled contour bands from gridded snapshots, GeoJSON output and PNG
//! thumbnails.

mod geojson;
mod iso;
mod raster;
mod rings;

use serde::{Deserialize, Serialize};

pub use geojson::{parse_geojson, to_geojson};
pub use raster::{ramp, ramps, render_thumbnail, Ramp, RampId, Rgb};

use crate::grid::{GridSnapshot, Scenario, Variable};
use crate::index::DataIndex;
use iso::{band_edges, Field, Refinement};

#[derive(Debug, thiserror::Error)]
pub enum ContourError {
    #[error("grid is {0} x {1}; contouring needs at least 2 x 2")]
    GridTooSmall(usize, usize),
    #[error("invalid band spec: {0}")]
    InvalidBands(String),
    #[error("invalid geojson: {0}")]
    GeoJson(String),
    #[error("png encoding failed: {0}")]
    Png(String),
}

/// Ascending thresholds; band `i` covers `[thresholds[i], thresholds[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BandSpec {
    thresholds: Vec<f64>,
}

impl BandSpec {
    pub fn new(thresholds: Vec<f64>) -> Result<Self, ContourError> {
        if thresholds.len() < 2 {
            return Err(ContourError::InvalidBands("need at least 2 thresholds".into()));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(ContourError::InvalidBands("thresholds must be finite".into()));
        }
        if thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ContourError::InvalidBands(
                "thresholds must be strictly ascending".into(),
            ));
        }
        Ok(BandSpec { thresholds })
    }

    /// `lo, lo + step, ...` up to and including `hi`.
    pub fn stepped(lo: f64, hi: f64, step: f64) -> Result<Self, ContourError> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(ContourError::InvalidBands(format!("bad range {lo}..{hi} step {step}")));
        }
        let n = ((hi - lo) / step).round() as usize;
        BandSpec::new((0..=n).map(|i| lo + step * i as f64).collect())
    }

    /// Precipitation 0-14 mm/day in 2 mm/day steps; temperatures in 10 °C steps.
    pub fn default_for(variable: Variable) -> Self {
        match variable {
            Variable::Pr => BandSpec::stepped(0.0, 14.0, 2.0),
            Variable::Tasmax => BandSpec::stepped(-30.0, 50.0, 10.0),
            Variable::Tasmin => BandSpec::stepped(-40.0, 40.0, 10.0),
        }
        .expect("static band spec")
    }

    /// Parses whitespace, comma or newline separated thresholds.
    pub fn parse(text: &str) -> Result<Self, ContourError> {
        let th = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| ContourError::InvalidBands(format!("bad threshold `{t}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        BandSpec::new(th)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn band_count(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn band_range(&self, band: usize) -> (f64, f64) {
        (self.thresholds[band], self.thresholds[band + 1])
    }

    /// Band whose half-open range holds `v`.
    pub fn band_of(&self, v: f64) -> Option<usize> {
        let c = iso::class_of(&self.thresholds, v);
        (c >= 0 && (c as usize) < self.band_count()).then_some(c as usize)
    }
}

impl TryFrom<Vec<f64>> for BandSpec {
    type Error = ContourError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        BandSpec::new(v)
    }
}

impl From<BandSpec> for Vec<f64> {
    fn from(b: BandSpec) -> Vec<f64> {
        b.thresholds
    }
}

/// Accuracy knobs of band extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    /// Allowed deviation of band edges from the bilinear surface, as a
    /// fraction of the snapshot's value range.
    pub tolerance_fraction: f64,
    /// Upper bound on per-cell subdivision.
    pub max_refine: usize,
    /// Decimal places kept in output coordinates; `None` keeps full precision.
    #[serde(default)]
    pub decimals: Option<u32>,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            tolerance_fraction: 1e-4,
            max_refine: 64,
            decimals: None,
        }
    }
}

/// A closed ring of `[lon, lat]` positions; the last position repeats the
/// first.
pub type Ring = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    /// Counter-clockwise.
    pub exterior: Ring,
    /// Clockwise.
    pub holes: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub band_id: usize,
    pub lo: f64,
    pub hi: f64,
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourProduct {
    pub index: DataIndex,
    pub scenario: Scenario,
    pub variable: Variable,
    pub units: String,
    /// Only bands with at least one polygon.
    pub bands: Vec<Band>,
    /// `[min_lon, min_lat, max_lon, max_lat]` of the grid.
    pub bbox: [f64; 4],
    pub spec: BandSpec,
    /// `(lat, lon)` cell counts of the source grid.
    pub shape: (usize, usize),
    pub params: ContourParams,
}

fn axis_map(axis: &[f64], x: f64) -> f64 {
    let last = axis.len() - 1;
    let i = (x.floor().max(0.0) as usize).min(last - 1);
    let t = x - i as f64;
    if t == 0.0 {
        axis[i]
    } else if t == 1.0 {
        axis[i + 1]
    } else {
        axis[i] + t * (axis[i + 1] - axis[i])
    }
}

fn round_to(x: f64, scale: Option<f64>) -> f64 {
    match scale {
        Some(s) => (x * s).round() / s + 0.0,
        None => x,
    }
}

fn to_geo_ring(ring: &[[f64; 2]], lat: &[f64], lon: &[f64], scale: Option<f64>) -> Option<Ring> {
    let mut out: Ring = Vec::with_capacity(ring.len() + 1);
    for p in ring {
        let q = [
            round_to(axis_map(lon, p[0]), scale),
            round_to(axis_map(lat, p[1]), scale),
        ];
        if out.last() != Some(&q) {
            out.push(q);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return None;
    }
    out.push(out[0]);
    Some(out)
}

/// Filled bands of `snapshot` for the thresholds in `spec`.
///
/// Band edges follow linear interpolation along grid edges; inside a cell
/// the bilinear surface is tracked by a triangulation whose centre values are
/// the corner average, refined where the surface twists more than
/// `params.tolerance_fraction` of the value range. Cells with a missing
/// corner are left out of every band.
pub fn marching_squares_bands(
    snapshot: &GridSnapshot,
    spec: &BandSpec,
    index: DataIndex,
    params: ContourParams,
) -> Result<ContourProduct, ContourError> {
    let (nlat, nlon) = snapshot.shape();
    if nlat < 2 || nlon < 2 {
        return Err(ContourError::GridTooSmall(nlat, nlon));
    }
    let range = snapshot.value_range().map_or(0.0, |(lo, hi)| hi - lo);
    let refine = Refinement {
        tolerance: params.tolerance_fraction * range,
        max_k: params.max_refine.max(1),
    };
    let field = Field {
        nrows: nlat,
        ncols: nlon,
        values: snapshot.values(),
        missing: snapshot.missing_mask(),
    };
    let edges = band_edges(&field, spec.thresholds(), &refine);
    let scale = params.decimals.map(|d| 10f64.powi(d.min(15) as i32));
    let mut bands = Vec::new();
    for (band_id, band_edges) in edges.bands.iter().enumerate() {
        if band_edges.is_empty() {
            continue;
        }
        let polygons: Vec<Polygon> = rings::assemble(band_edges)
            .into_iter()
            .filter_map(|raw| {
                let exterior = to_geo_ring(&raw.exterior, &snapshot.lat, &snapshot.lon, scale)?;
                let holes = raw
                    .holes
                    .iter()
                    .filter_map(|h| to_geo_ring(h, &snapshot.lat, &snapshot.lon, scale))
                    .collect();
                Some(Polygon { exterior, holes })
            })
            .collect();
        if polygons.is_empty() {
            continue;
        }
        let (lo, hi) = spec.band_range(band_id);
        bands.push(Band {
            band_id,
            lo,
            hi,
            polygons,
        });
    }
    Ok(ContourProduct {
        index,
        scenario: snapshot.scenario,
        variable: snapshot.variable,
        units: snapshot.units().to_string(),
        bands,
        bbox: [
            snapshot.lon[0],
            snapshot.lat[0],
            snapshot.lon[nlon - 1],
            snapshot.lat[nlat - 1],
        ],
        spec: spec.clone(),
        shape: (nlat, nlon),
        params,
    })
}

impl ContourProduct {
    /// Band containing `[lon, lat]`, by even-odd test over each band's rings.
    pub fn band_at(&self, p: [f64; 2]) -> Option<&Band> {
        self.bands.iter().find(|b| {
            b.polygons.iter().any(|poly| {
                rings::point_in_ring(p, &poly.exterior)
                    && !poly.holes.iter().any(|h| rings::point_in_ring(p, h))
            })
        })
    }

    /// Total area of a band in degree units.
    pub fn band_area(band: &Band) -> f64 {
        band.polygons
            .iter()
            .map(|p| {
                rings::signed_area(&p.exterior)
                    + p.holes.iter().map(|h| rings::signed_area(h)).sum::<f64>()
            })
            .sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.bands
            .iter()
            .flat_map(|b| &b.polygons)
            .map(|p| p.exterior.len() + p.holes.iter().map(Vec::len).sum::<usize>())
            .sum()
    }
}
