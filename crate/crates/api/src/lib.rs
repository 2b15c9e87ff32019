//! HTTP API over a product store: discovery, snapshots, chart data and
//! annotations, all under `/api`.

mod error;
mod handlers;
mod params;

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use dcpviz_core::analytics::RegionalSeries;
use dcpviz_core::grid::Scenario;
use dcpviz_core::store::{Query, Store, StoreError};
use dcpviz_core::views::{load_series, SeriesKey, ViewError};

pub use error::{ApiError, Problem};
pub use handlers::{HeatmapResponse, Page, RcpCompareResponse, TimeseriesResponse, VariableSeriesOut};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub store: PathBuf,
    /// Served under `/` when set.
    pub static_dir: Option<PathBuf>,
    pub cors: bool,
    pub default_page: usize,
    pub max_page: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: PathBuf::from("store"),
            static_dir: None,
            cors: false,
            default_page: 100,
            max_page: 1000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("store path {0} does not exist")]
    MissingStore(PathBuf),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type SeriesMap = Arc<std::collections::BTreeMap<u32, RegionalSeries>>;

pub struct AppState {
    pub store: Store,
    pub config: ApiConfig,
    cache: Mutex<HashMap<SeriesKey, (u64, SeriesMap)>>,
}

impl AppState {
    pub fn new(store: Store, config: ApiConfig) -> Self {
        AppState {
            store,
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Stored series, reloaded whenever the store has changed since the
    /// cached copy was read.
    pub fn series(&self, key: &SeriesKey) -> Result<SeriesMap, ViewError> {
        let generation = self.store.generation();
        if let Some((g, s)) = self.cache.lock().unwrap().get(key) {
            if *g == generation {
                return Ok(s.clone());
            }
        }
        let s = Arc::new(load_series(&self.store, key)?);
        self.cache.lock().unwrap().insert(key.clone(), (generation, s.clone()));
        Ok(s)
    }

    fn defaults(&self) -> (Option<String>, BTreeSet<(String, String)>) {
        let pairs: BTreeSet<(String, String)> = self
            .store
            .query(&Query::default())
            .into_iter()
            .map(|r| (r.index.dataset, r.index.model))
            .collect();
        (pairs.iter().next().map(|(d, _)| d.clone()), pairs)
    }

    /// Dataset and model for a request: given values are checked against
    /// the store, missing ones default to the first stored.
    pub fn resolve_source(&self, dataset: Option<&str>, model: Option<&str>) -> Result<(String, String), ApiError> {
        let (first, pairs) = self.defaults();
        let dataset = match dataset {
            Some(d) => d.to_string(),
            None => first.ok_or_else(|| ApiError::not_found("no_data", "the store holds no products"))?,
        };
        let models: Vec<&String> = pairs.iter().filter(|(d, _)| *d == dataset).map(|(_, m)| m).collect();
        if models.is_empty() {
            return Err(ApiError::bad_param("dataset", "unknown_dataset", format!("no products for dataset `{dataset}`")));
        }
        let model = match model {
            Some(m) if models.iter().any(|x| *x == m) => m.to_string(),
            Some(m) => return Err(ApiError::bad_param("model", "unknown_model", format!("no products for model `{m}`"))),
            None => models[0].clone(),
        };
        Ok((dataset, model))
    }
}

pub const DEFAULT_SCENARIO: Scenario = Scenario::Rcp85;

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/catalog", get(handlers::catalog))
        .route("/api/products", get(handlers::products))
        .route("/api/snapshot/{index}", get(handlers::snapshot))
        .route("/api/heatmap", get(handlers::heatmap))
        .route("/api/timeseries", get(handlers::timeseries))
        .route("/api/rcp-compare", get(handlers::rcp_compare))
        .route("/api/treemap", get(handlers::treemap))
        .route("/api/annotations", get(handlers::list_annotations).post(handlers::add_annotation))
        .route("/api/{*rest}", get(handlers::unknown_endpoint));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(handlers::index_page)),
    };
    let app = if state.config.cors { app.layer(CorsLayer::permissive()) } else { app };
    app.with_state(state)
}

/// Opens the configured store and serves until interrupted.
pub async fn serve(config: ApiConfig) -> Result<(), ServeError> {
    if !config.store.is_dir() {
        return Err(ServeError::MissingStore(config.store.clone()));
    }
    let store = Store::open(&config.store)?;
    let addr = config.bind;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = router(Arc::new(AppState::new(store, config)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
