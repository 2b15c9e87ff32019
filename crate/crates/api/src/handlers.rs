use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use dcpviz_core::analytics::{RegionalSeries, ScenarioSpread, TreeNode};
use dcpviz_core::grid::{RegionMask, Scenario, SeasonIndex, Variable};
use dcpviz_core::index::DataIndex;
use dcpviz_core::store::{
    Annotation, AnnotationFilter, NewAnnotation, Pin, ProductKey, ProductKind, ProductRef, Query as StoreQuery,
};
use dcpviz_core::views::{self, Heatmap, HeatmapParams, SeriesKey, VariableSeries};

use crate::error::ApiError;
use crate::params::Params;
use crate::{AppState, DEFAULT_SCENARIO};

type St = State<Arc<AppState>>;
type Q = Query<BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub next_offset: Option<usize>,
}

fn paginate<T>(all: Vec<T>, offset: usize, limit: usize) -> Page<T> {
    let total = all.len();
    let items: Vec<T> = all.into_iter().skip(offset).take(limit).collect();
    let end = offset.saturating_add(items.len());
    Page {
        items,
        total,
        offset,
        limit,
        next_offset: (end < total).then_some(end),
    }
}

fn mask(state: &AppState) -> Result<Option<RegionMask>, ApiError> {
    Ok(state.store.load_mask()?)
}

fn region_name(mask: Option<&RegionMask>, id: u32) -> Option<String> {
    mask.and_then(|m| m.name(id)).map(str::to_string)
}

fn scenario(p: &Params) -> Result<Scenario, ApiError> {
    Ok(p.parse("scenario")?.unwrap_or(DEFAULT_SCENARIO))
}

fn years_or_native(p: &Params, scenario: Scenario) -> Result<std::ops::RangeInclusive<i32>, ApiError> {
    Ok(match p.year_range("year")? {
        Some((a, b)) => a..=b,
        None => views::native_years(scenario),
    })
}

fn parse_index(s: &str, param: &str) -> Result<DataIndex, ApiError> {
    s.parse()
        .map_err(|e| ApiError::bad_param(param, "malformed_index", format!("`{s}`: {e}")))
}

pub async fn index_page() -> Html<&'static str> {
    Html(include_str!("index.html"))
}

pub async fn unknown_endpoint(Path(rest): Path<String>) -> ApiError {
    ApiError::not_found("unknown_endpoint", format!("no endpoint /api/{rest}"))
}

pub async fn catalog(State(state): St) -> Result<Json<views::Catalog>, ApiError> {
    Ok(Json(views::catalog(&state.store)?))
}

pub async fn products(State(state): St, Query(q): Q) -> Result<Json<Page<ProductRef>>, ApiError> {
    let p = Params(q);
    let month: Option<u32> = p.parse("month")?;
    let query = StoreQuery {
        dataset: p.raw("dataset").map(str::to_string),
        model: p.raw("model").map(str::to_string),
        variable: p.parse::<Variable>("variable")?.map(|v| v.as_str().to_string()),
        scenario: p.parse("scenario")?,
        years: p.year_range("year")?,
        months: month.map(|m| [m].into()),
        kind: p.parse("kind")?,
    };
    let (offset, limit) = p.page(state.config.default_page, state.config.max_page)?;
    Ok(Json(paginate(state.store.query(&query), offset, limit)))
}

pub async fn snapshot(State(state): St, Path(index): Path<String>, Query(q): Q) -> Result<Response, ApiError> {
    let p = Params(q);
    let idx = parse_index(&index, "index")?;
    let kind = match p.raw("fmt").unwrap_or("geojson") {
        "geojson" => ProductKind::Geojson,
        "thumb" | "png" => ProductKind::Thumbnail,
        "csv" | "aggregate" => ProductKind::Aggregate,
        other => {
            return Err(ApiError::bad_param("fmt", "bad_parameter", format!("unknown fmt `{other}`")));
        }
    };
    let stored = state.store.scenarios_of(&idx);
    let scenario = match p.parse::<Scenario>("scenario")? {
        Some(s) => s,
        None => match stored[..] {
            [] => return Err(ApiError::not_found("unknown_snapshot", format!("no products for {idx}"))),
            [s] => s,
            _ => {
                let names: Vec<&str> = stored.iter().map(|s| s.as_str()).collect();
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "ambiguous_scenario",
                    format!("{idx} is stored under {}; pass `scenario`", names.join(", ")),
                ));
            }
        },
    };
    let key = ProductKey::new(idx, scenario, kind);
    let bytes = state.store.get(&key)?;
    Ok(([(header::CONTENT_TYPE, kind.media_type())], bytes).into_response())
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapResponse {
    pub dataset: String,
    pub region: Option<String>,
    pub units: &'static str,
    #[serde(flatten)]
    pub heatmap: Heatmap,
}

pub async fn heatmap(State(state): St, Query(q): Q) -> Result<Json<HeatmapResponse>, ApiError> {
    let p = Params(q);
    let mask = mask(&state)?;
    let region = p.region(mask.as_ref())?;
    let variable: Variable = p.parse("variable")?.unwrap_or(Variable::Pr);
    let scenario = scenario(&p)?;
    let params = HeatmapParams {
        relative: p.flag("relative")?,
        window: p.retro()?,
        lo: p.number("lo")?,
        hi: p.number("hi")?,
        years: p.year_range("year")?,
    };
    let (dataset, model) = state.resolve_source(p.raw("dataset"), p.raw("model"))?;
    let key = SeriesKey {
        dataset: dataset.clone(),
        model: model.clone(),
        variable,
        scenario,
    };
    let all = state.series(&key)?;
    let empty = RegionalSeries::new(region, variable, model, scenario);
    let series = all.get(&region).unwrap_or(&empty);
    Ok(Json(HeatmapResponse {
        dataset,
        region: region_name(mask.as_ref(), region),
        units: variable.canonical_units(),
        heatmap: views::heatmap(series, &params),
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeseriesResponse {
    pub dataset: String,
    pub model: String,
    pub scenario: Scenario,
    pub region_id: u32,
    pub region: Option<String>,
    /// `None` means yearly means.
    pub season: Option<SeasonIndex>,
    pub series: Vec<VariableSeriesOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableSeriesOut {
    pub units: &'static str,
    #[serde(flatten)]
    pub series: VariableSeries,
}

fn variables(p: &Params, default: &[Variable]) -> Result<Vec<Variable>, ApiError> {
    let Some(raw) = p.raw("variables") else {
        return Ok(default.to_vec());
    };
    let mut out = Vec::new();
    for part in raw.split(',') {
        let v: Variable = part
            .trim()
            .parse()
            .map_err(|e| ApiError::bad_param("variables", "bad_parameter", format!("variables: {e}")))?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

pub async fn timeseries(State(state): St, Query(q): Q) -> Result<Json<TimeseriesResponse>, ApiError> {
    let p = Params(q);
    let mask = mask(&state)?;
    let region = p.region(mask.as_ref())?;
    let season = p.season("season")?;
    let vars = variables(&p, &[Variable::Pr, Variable::Tasmax])?;
    let scenario = scenario(&p)?;
    let years = years_or_native(&p, scenario)?;
    let (dataset, model) = state.resolve_source(p.raw("dataset"), p.raw("model"))?;
    let mut series = Vec::new();
    for variable in vars {
        let all = state.series(&SeriesKey {
            dataset: dataset.clone(),
            model: model.clone(),
            variable,
            scenario,
        })?;
        let empty = RegionalSeries::new(region, variable, model.clone(), scenario);
        let s = all.get(&region).unwrap_or(&empty);
        series.push(VariableSeriesOut {
            units: variable.canonical_units(),
            series: views::yearly_points(s, season, &years),
        });
    }
    Ok(Json(TimeseriesResponse {
        dataset,
        model,
        scenario,
        region_id: region,
        region: region_name(mask.as_ref(), region),
        season,
        series,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct RcpCompareResponse {
    pub dataset: String,
    pub model: String,
    pub variable: Variable,
    pub units: &'static str,
    pub region: Option<String>,
    #[serde(flatten)]
    pub spread: ScenarioSpread,
}

pub async fn rcp_compare(State(state): St, Query(q): Q) -> Result<Json<RcpCompareResponse>, ApiError> {
    let p = Params(q);
    let mask = mask(&state)?;
    let region = p.region(mask.as_ref())?;
    let season = p
        .season("season")?
        .ok_or_else(|| ApiError::bad_param("season", "missing_parameter", "`season` is required"))?;
    let variable: Variable = p.parse("variable")?.unwrap_or(Variable::Pr);
    let years = years_or_native(&p, Scenario::Rcp85)?;
    let (dataset, model) = state.resolve_source(p.raw("dataset"), p.raw("model"))?;
    let scenarios: Vec<Scenario> = match p.raw("scenarios") {
        Some(raw) => raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e| ApiError::bad_param("scenarios", "bad_parameter", format!("scenarios: {e}")))?,
        None => Scenario::ALL
            .into_iter()
            .filter(|s| s.is_projection())
            .filter(|&s| {
                let q = StoreQuery {
                    dataset: Some(dataset.clone()),
                    model: Some(model.clone()),
                    variable: Some(variable.as_str().to_string()),
                    scenario: Some(s),
                    kind: Some(ProductKind::Aggregate),
                    ..StoreQuery::default()
                };
                !state.store.query(&q).is_empty()
            })
            .collect(),
    };
    let mut series = Vec::new();
    for scenario in scenarios {
        let all = state.series(&SeriesKey {
            dataset: dataset.clone(),
            model: model.clone(),
            variable,
            scenario,
        })?;
        if let Some(s) = all.get(&region) {
            series.push(s.clone());
        }
    }
    Ok(Json(RcpCompareResponse {
        dataset,
        model,
        variable,
        units: variable.canonical_units(),
        region: region_name(mask.as_ref(), region),
        spread: views::rcp_compare(&series, season, &years),
    }))
}

pub async fn treemap(State(state): St, Query(q): Q) -> Result<Json<TreeNode>, ApiError> {
    let p = Params(q);
    let scenario = scenario(&p)?;
    let years = years_or_native(&p, scenario)?;
    let (dataset, model) = state.resolve_source(p.raw("dataset"), p.raw("model"))?;
    let load = |variable| {
        state.series(&SeriesKey {
            dataset: dataset.clone(),
            model: model.clone(),
            variable,
            scenario,
        })
    };
    let pr = load(Variable::Pr)?;
    let tasmax = load(Variable::Tasmax)?;
    let mask = mask(&state)?;
    Ok(Json(views::treemap(&pr, &tasmax, mask.as_ref(), years)))
}

#[derive(Debug, Deserialize)]
struct AnnotationBody {
    author: Option<String>,
    #[serde(default)]
    text: String,
    pin: Option<Pin>,
    snapshot: Option<String>,
}

pub async fn add_annotation(State(state): St, body: Bytes) -> Result<(StatusCode, Json<Annotation>), ApiError> {
    let body: AnnotationBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_body", format!("annotation body: {e}")))?;
    let author = body.author.map(|a| a.trim().to_string()).unwrap_or_default();
    if author.is_empty() {
        return Err(ApiError::bad_param("author", "missing_author", "`author` is required"));
    }
    if let Some(pin) = body.pin {
        let ok = pin.lat.is_finite() && pin.lon.is_finite() && pin.lat.abs() <= 90.0 && pin.lon.abs() <= 180.0;
        if !ok {
            return Err(ApiError::bad_param("pin", "bad_pin", "pin must be a valid lat/lon"));
        }
    }
    let snapshot = body.snapshot.as_deref().map(|s| parse_index(s, "snapshot")).transpose()?;
    let new = NewAnnotation {
        author,
        text: body.text,
        pin: body.pin,
        snapshot,
    };
    let a = state.store.add_annotation(new)?;
    Ok((StatusCode::CREATED, Json(a)))
}

pub async fn list_annotations(State(state): St, Query(q): Q) -> Result<Json<Page<Annotation>>, ApiError> {
    let p = Params(q);
    let snapshot = p.raw("snapshot").map(|s| parse_index(s, "snapshot")).transpose()?;
    let bbox = match p.raw("bbox") {
        None => None,
        Some(raw) => {
            let bad = || ApiError::bad_param("bbox", "bad_bbox", "bbox is `lon_min,lat_min,lon_max,lat_max`");
            let v: Vec<f64> = raw
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            match v[..] {
                [x0, y0, x1, y1] if v.iter().all(|x| x.is_finite()) && x0 <= x1 && y0 <= y1 => Some([x0, y0, x1, y1]),
                _ => return Err(bad()),
            }
        }
    };
    let (offset, limit) = p.page(state.config.default_page, state.config.max_page)?;
    let all = state.store.list_annotations(&AnnotationFilter { snapshot, bbox });
    Ok(Json(paginate(all, offset, limit)))
}
