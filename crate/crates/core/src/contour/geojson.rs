use serde_json::{json, Map, Value};

use super::{Band, BandSpec, ContourError, ContourParams, ContourProduct, Polygon, Ring};

/// Serializes a product as a GeoJSON FeatureCollection with one MultiPolygon
/// feature per band. Generation metadata travels in the `product` member.
pub fn to_geojson(product: &ContourProduct) -> String {
    let index = product.index.to_string();
    let features: Vec<Value> = product
        .bands
        .iter()
        .map(|band| {
            let coords: Vec<Vec<&Ring>> = band
                .polygons
                .iter()
                .map(|p| std::iter::once(&p.exterior).chain(&p.holes).collect())
                .collect();
            json!({
                "type": "Feature",
                "properties": {
                    "band_id": band.band_id,
                    "lo": band.lo,
                    "hi": band.hi,
                    "variable": product.variable,
                    "units": product.units,
                    "index": index,
                },
                "geometry": { "type": "MultiPolygon", "coordinates": coords },
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "bbox": product.bbox,
        "product": {
            "index": index,
            "scenario": product.scenario,
            "variable": product.variable,
            "units": product.units,
            "thresholds": product.spec,
            "shape": [product.shape.0, product.shape.1],
            "params": product.params,
        },
        "features": features,
    })
    .to_string()
}

fn bad(msg: impl Into<String>) -> ContourError {
    ContourError::GeoJson(msg.into())
}

fn ring_of(v: &Value) -> Result<Ring, ContourError> {
    let arr = v.as_array().ok_or_else(|| bad("ring is not an array"))?;
    arr.iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("bad position"))?;
            Ok([
                xy[0].as_f64().ok_or_else(|| bad("bad coordinate"))?,
                xy[1].as_f64().ok_or_else(|| bad("bad coordinate"))?,
            ])
        })
        .collect()
}

fn field<'a>(m: &'a Map<String, Value>, k: &str) -> Result<&'a Value, ContourError> {
    m.get(k).ok_or_else(|| bad(format!("missing `{k}`")))
}

fn from<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, ContourError> {
    serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))
}

/// Rebuilds a product from [`to_geojson`] output.
pub fn parse_geojson(text: &str) -> Result<ContourProduct, ContourError> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let root = root.as_object().ok_or_else(|| bad("not an object"))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("not a FeatureCollection"));
    }
    let meta = field(root, "product")?
        .as_object()
        .ok_or_else(|| bad("`product` is not an object"))?;
    let shape: [usize; 2] = from(field(meta, "shape")?)?;
    let spec: BandSpec = from(field(meta, "thresholds")?)?;
    let params: ContourParams = from(field(meta, "params")?)?;
    let mut bands = Vec::new();
    for f in field(root, "features")?
        .as_array()
        .ok_or_else(|| bad("`features` is not an array"))?
    {
        let props = f
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("feature without properties"))?;
        let coords = f
            .pointer("/geometry/coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("feature without coordinates"))?;
        let polygons = coords
            .iter()
            .map(|poly| {
                let rings = poly.as_array().ok_or_else(|| bad("polygon is not an array"))?;
                let mut rings = rings.iter().map(ring_of);
                let exterior = rings.next().ok_or_else(|| bad("empty polygon"))??;
                Ok(Polygon {
                    exterior,
                    holes: rings.collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, ContourError>>()?;
        bands.push(Band {
            band_id: from(field(props, "band_id")?)?,
            lo: from(field(props, "lo")?)?,
            hi: from(field(props, "hi")?)?,
            polygons,
        });
    }
    Ok(ContourProduct {
        index: from(field(meta, "index")?)?,
        scenario: from(field(meta, "scenario")?)?,
        variable: from(field(meta, "variable")?)?,
        units: from(field(meta, "units")?)?,
        bands,
        bbox: from(field(root, "bbox")?)?,
        spec,
        shape: (shape[0], shape[1]),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::marching_squares_bands;
    use crate::grid::{GridSnapshot, Scenario, Variable};
    use crate::index::make_index;

    #[test]
    fn empty_product() {
        let s = GridSnapshot::new(
            Variable::Pr,
            "CESM1-CAM5",
            Scenario::Rcp85,
            2021,
            3,
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![-1.0; 4],
            vec![false; 4],
        )
        .unwrap();
        let idx = make_index("NEX-DCP", "CESM1-CAM5", "pr", 2021, 3).unwrap();
        let p = marching_squares_bands(&s, &BandSpec::default_for(Variable::Pr), idx, ContourParams::default())
            .unwrap();
        let text = to_geojson(&p);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["features"].as_array().unwrap().len(), 0);
        assert_eq!(parse_geojson(&text).unwrap(), p);
    }
}
