//! HTTP backend for cluster-assisted labeling.
//!
//! Source images live in an images directory (`<id>.png`). Each image gets
//! an in-memory session holding its K-means model and legend; exporting
//! writes the labeled mask into a dataset directory.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/api/images` | | `[{id, labeled}]` |
//! | GET | `/api/images/{id}` | | PNG of the working crop |
//! | POST | `/api/images/{id}/cluster` | `{k, colorspace, seed}` | legend |
//! | GET | `/api/images/{id}/legend` | | legend |
//! | GET | `/api/images/{id}/quantized` | | PNG |
//! | GET | `/api/images/{id}/overlay` | `?enabled=1,3,4` | PNG |
//! | POST | `/api/images/{id}/labels` | `{"<index>": "sea" \| null, ...}` | legend |
//! | POST | `/api/images/{id}/enabled` | `{enabled: [indices]}` | legend |
//! | POST | `/api/images/{id}/export` | | `{mask_path, labeled_pixels}` |
//!
//! Errors come back as `{"error": kind, "message": text}` with 400 for bad
//! input, 404 for unknown images and 409 when the session is not ready.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use pengauge::cluster::{self, ClusterLegend, ClusterModel, ColorSpace, DEFAULT_K};
use pengauge::dataset::{Dataset, DatasetEntry, ExampleMeta};
use pengauge::imaging::{self, CropRect, Image, PixelClass};

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub images_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    /// share of each axis kept by the centered working crop
    pub crop_fraction: f64,
    pub year: String,
    pub location: String,
}

impl ServerConfig {
    pub fn new(images_dir: impl Into<PathBuf>, dataset_dir: impl Into<PathBuf>) -> Self {
        Self {
            images_dir: images_dir.into(),
            dataset_dir: dataset_dir.into(),
            static_dir: None,
            crop_fraction: 1.0,
            year: "unknown".into(),
            location: "unknown".into(),
        }
    }
}

/// Labeling state of one image.
pub struct Session {
    pub image: Image,
    pub crop: CropRect,
    pub model: Option<ClusterModel>,
    pub legend: Option<ClusterLegend>,
    /// legend changed since the last export
    pub dirty: bool,
}

#[derive(Clone)]
pub struct AppState {
    cfg: Arc<ServerConfig>,
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Session>>>>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no image `{id}`"))
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid-argument", message)
    }
}

impl From<pengauge::Error> for ApiError {
    fn from(e: pengauge::Error) -> Self {
        use pengauge::Error as E;
        let status = match &e {
            E::InvalidArgument(_) | E::Parse(_) | E::DimensionMismatch { .. } => StatusCode::BAD_REQUEST,
            E::DuplicateEntry(_) => StatusCode::CONFLICT,
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.kind, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Loads `<images_dir>/<id>.png` and applies the centered working crop.
pub fn load_working_image(images_dir: &Path, id: &str, crop_fraction: f64) -> pengauge::Result<(Image, CropRect)> {
    let img = imaging::read_image(images_dir.join(format!("{id}.png")))?;
    let rect = CropRect::centered(img.width(), img.height(), crop_fraction)?;
    Ok((imaging::crop(&img, rect)?, rect))
}

/// Writes the mask implied by `legend` into the dataset. Shared with the
/// command-line export so both produce the same files.
pub fn export_legend(
    dataset: &Dataset,
    meta: &ExampleMeta,
    image: &Image,
    model: &ClusterModel,
    legend: &ClusterLegend,
) -> pengauge::Result<DatasetEntry> {
    let mask = cluster::legend_to_mask(model, legend)?;
    dataset.upsert_example(meta, image, &mask)
}

/// Parses `{"<index>": "<class>" | null}` into assignments.
pub fn parse_assignments(body: &BTreeMap<String, Option<String>>) -> pengauge::Result<Vec<(usize, Option<PixelClass>)>> {
    body.iter()
        .map(|(k, v)| {
            let index = k
                .parse::<usize>()
                .map_err(|_| pengauge::Error::InvalidArgument(format!("cluster index `{k}` is not a number")))?;
            let class = match v {
                None => None,
                Some(name) => Some(PixelClass::from_name(name).ok_or_else(|| {
                    pengauge::Error::InvalidArgument(format!(
                        "unknown class `{name}`, expected sea, cage, fish or blurry"
                    ))
                })?),
            };
            Ok((index, class))
        })
        .collect()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl AppState {
    pub fn new(cfg: ServerConfig) -> Self {
        Self {
            cfg: Arc::new(cfg),
            sessions: Arc::default(),
        }
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        if !valid_id(id) {
            return Err(ApiError::not_found(id));
        }
        if let Some(s) = self.sessions.lock().expect("session table").get(id) {
            return Ok(s.clone());
        }
        let path = self.cfg.images_dir.join(format!("{id}.png"));
        if !path.is_file() {
            return Err(ApiError::not_found(id));
        }
        let (image, crop) = load_working_image(&self.cfg.images_dir, id, self.cfg.crop_fraction)?;
        let mut table = self.sessions.lock().expect("session table");
        let entry = table.entry(id.to_string()).or_insert_with(|| {
            Arc::new(Mutex::new(Session {
                image,
                crop,
                model: None,
                legend: None,
                dirty: false,
            }))
        });
        Ok(entry.clone())
    }
}

/// Runs `f` on the session of `id` off the async executor.
async fn with_session<T: Send + 'static>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let session = state.session(id)?;
    tokio::task::spawn_blocking(move || {
        let mut s = session.lock().expect("session lock");
        f(&mut s)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn clustered(s: &Session) -> ApiResult<(&ClusterModel, &ClusterLegend)> {
    match (&s.model, &s.legend) {
        (Some(m), Some(l)) => Ok((m, l)),
        _ => Err(ApiError::conflict("image has not been clustered yet")),
    }
}

#[derive(Serialize)]
struct ImageItem {
    id: String,
    labeled: bool,
}

async fn list_images(State(state): State<AppState>) -> ApiResult<Json<Vec<ImageItem>>> {
    let mut ids: Vec<String> = std::fs::read_dir(&state.cfg.images_dir)
        .map_err(pengauge::Error::from)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let id = name.strip_suffix(".png")?;
            valid_id(id).then(|| id.to_string())
        })
        .collect();
    ids.sort();
    let labeled: Vec<String> = match Dataset::open(&state.cfg.dataset_dir) {
        Ok(ds) => ds.entries()?.into_iter().map(|e| e.id).collect(),
        Err(_) => Vec::new(),
    };
    Ok(Json(
        ids.into_iter()
            .map(|id| ImageItem {
                labeled: labeled.contains(&id),
                id,
            })
            .collect(),
    ))
}

async fn get_image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let bytes = with_session(&state, &id, |s| Ok(imaging::encode_image(&s.image)?)).await?;
    Ok(png(bytes))
}

#[derive(Deserialize)]
struct ClusterRequest {
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    colorspace: Option<String>,
    #[serde(default)]
    seed: u64,
}

fn default_k() -> usize {
    DEFAULT_K
}

async fn cluster_image(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ClusterRequest>,
) -> ApiResult<Json<ClusterLegend>> {
    let space: ColorSpace = match req.colorspace.as_deref() {
        None => ColorSpace::Rgb,
        Some(s) => s.parse()?,
    };
    let legend = with_session(&state, &id, move |s| {
        let model = cluster::kmeans(&s.image, req.k, space, req.seed)?;
        let legend = ClusterLegend::from_model(&model);
        s.model = Some(model);
        s.legend = Some(legend.clone());
        s.dirty = true;
        Ok(legend)
    })
    .await?;
    Ok(Json(legend))
}

async fn get_legend(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ClusterLegend>> {
    let legend = with_session(&state, &id, |s| Ok(clustered(s)?.1.clone())).await?;
    Ok(Json(legend))
}

async fn quantized(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let bytes = with_session(&state, &id, |s| {
        let (model, _) = clustered(s)?;
        Ok(imaging::encode_image(&cluster::quantize(&s.image, model)?)?)
    })
    .await?;
    Ok(png(bytes))
}

#[derive(Deserialize)]
struct OverlayQuery {
    enabled: Option<String>,
}

fn parse_index_list(text: &str) -> Result<Vec<usize>, ApiError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| ApiError::bad_request(format!("cluster index `{t}` is not a number")))
        })
        .collect()
}

async fn overlay(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<OverlayQuery>,
) -> ApiResult<Response> {
    let enabled = q.enabled.as_deref().map(parse_index_list).transpose()?;
    let bytes = with_session(&state, &id, move |s| {
        let (model, legend) = clustered(s)?;
        let flags = match enabled {
            Some(list) => {
                let mut l = legend.clone();
                l.set_enabled(&list)?;
                l.enabled_flags()
            }
            None => legend.enabled_flags(),
        };
        Ok(imaging::encode_image(&cluster::overlay(&s.image, model, &flags)?)?)
    })
    .await?;
    Ok(png(bytes))
}

async fn set_labels(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<BTreeMap<String, Option<String>>>,
) -> ApiResult<Json<ClusterLegend>> {
    let assignments = parse_assignments(&body)?;
    let legend = with_session(&state, &id, move |s| {
        let mut legend = clustered(s)?.1.clone();
        for (index, class) in assignments {
            legend.assign(index, class)?;
        }
        s.legend = Some(legend.clone());
        s.dirty = true;
        Ok(legend)
    })
    .await?;
    Ok(Json(legend))
}

#[derive(Deserialize)]
struct EnabledRequest {
    enabled: Vec<usize>,
}

async fn set_enabled(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<EnabledRequest>,
) -> ApiResult<Json<ClusterLegend>> {
    let legend = with_session(&state, &id, move |s| {
        let mut legend = clustered(s)?.1.clone();
        legend.set_enabled(&req.enabled)?;
        s.legend = Some(legend.clone());
        s.dirty = true;
        Ok(legend)
    })
    .await?;
    Ok(Json(legend))
}

#[derive(Serialize)]
struct ExportResponse {
    mask_path: String,
    labeled_pixels: usize,
}

async fn export(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ExportResponse>> {
    let cfg = state.cfg.clone();
    let id2 = id.clone();
    let resp = with_session(&state, &id, move |s| {
        let (model, legend) = clustered(s)?;
        if !legend.has_assignments() {
            return Err(ApiError::conflict("no enabled cluster has a class assigned"));
        }
        let ds = Dataset::create(&cfg.dataset_dir)?;
        let meta = ExampleMeta {
            id: id2.clone(),
            year: cfg.year.clone(),
            location: cfg.location.clone(),
            crop: s.crop,
        };
        let entry = export_legend(&ds, &meta, &s.image, model, legend)?;
        s.dirty = false;
        Ok(ExportResponse {
            mask_path: ds.mask_path(&id2).display().to_string(),
            labeled_pixels: entry.labeled_pixels,
        })
    })
    .await?;
    Ok(Json(resp))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<AppState>, uri: Uri) -> Response {
    let Some(root) = state.cfg.static_dir.as_ref() else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = Path::new(uri.path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let mut path = root.join(rel);
    if rel.as_os_str().is_empty() || path.is_dir() {
        path = path.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

pub fn router(cfg: ServerConfig) -> Router {
    Router::new()
        .route("/api/images", get(list_images))
        .route("/api/images/{id}", get(get_image))
        .route("/api/images/{id}/cluster", post(cluster_image))
        .route("/api/images/{id}/legend", get(get_legend))
        .route("/api/images/{id}/quantized", get(quantized))
        .route("/api/images/{id}/overlay", get(overlay))
        .route("/api/images/{id}/labels", post(set_labels))
        .route("/api/images/{id}/enabled", post(set_enabled))
        .route("/api/images/{id}/export", post(export))
        .fallback(static_file)
        .with_state(AppState::new(cfg))
}

/// Serves until the process is stopped.
pub async fn serve(cfg: ServerConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(cfg)).await
}
