//! HTTP service around a loaded denoising model.
//!
//! | Route | |
//! |---|---|
//! | `POST /api/denoise` | multipart body with an `image` part (PNG) and a `map` part (JSON map spec) |
//! | `GET /api/model` | model metadata |
//!
//! Map specs, with every sigma in 0..=75 (8-bit) units:
//!
//! ```json
//! {"kind":"uniform","sigma":25}
//! {"kind":"anchors","points":[{"r":10,"c":20,"sigma":15},{"r":40,"c":5,"sigma":30}]}
//! {"kind":"raw","encoding":"f32le","width":64,"height":48,"data":"<base64>"}
//! ```
//!
//! `raw` data is `width * height` little-endian f32 sigma values in row-major
//! order and must match the image size. Anchors are interpolated by inverse
//! squared distance; a single anchor is equivalent to a uniform map.
//!
//! A successful denoise returns JSON:
//!
//! ```json
//! {"image":"<base64 PNG>","width":64,"height":48,
//!  "map":{"encoding":"f32le","width":64,"height":48,"data":"<base64>"}}
//! ```
//!
//! where `map` is the resolved full-resolution map in the same units as `raw`.
//! Errors are `{"error":"..."}` with status 400 (malformed request), 413 (image
//! over the pixel limit) or 500 (internal failure, message carries an opaque id
//! that also appears in the log).

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Multipart, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use ffdnet::data::image::{decode_png, encode_png, to_color, to_grayscale};
use ffdnet::model::{denoise, ParameterSet, NOISE_RANGE};
use ffdnet::noise::{anchored_map, uniform_map, NoiseLevelMap, RegionAnchor, MAX_SIGMA, SIGMA_SCALE};
use ffdnet::Tensor4;

/// Default limit on `width * height` of a request image.
pub const DEFAULT_MAX_PIXELS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub max_pixels: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_pixels: DEFAULT_MAX_PIXELS,
        }
    }
}

struct AppState {
    params: ParameterSet,
    config: ServiceConfig,
    next_error_id: AtomicU64,
}

/// A noise level map request, sigma in 8-bit units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSpec {
    Uniform { sigma: f64 },
    Anchors { points: Vec<AnchorPoint> },
    Raw { encoding: String, width: usize, height: usize, data: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub r: usize,
    pub c: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMap {
    pub encoding: String,
    pub width: usize,
    pub height: usize,
    pub data: String,
}

impl EncodedMap {
    /// f32 little-endian sigma values (8-bit units) of `map`.
    pub fn from_map(map: &NoiseLevelMap) -> Self {
        let bytes: Vec<u8> = map
            .values()
            .iter()
            .flat_map(|v| ((v * SIGMA_SCALE) as f32).to_le_bytes())
            .collect();
        Self {
            encoding: "f32le".into(),
            width: map.width(),
            height: map.height(),
            data: BASE64.encode(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseResponse {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub map: EncodedMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub layers: usize,
    pub channels: usize,
    pub color_mode: String,
    pub in_channels: usize,
    pub downsample_factor: usize,
    pub noise_range: [f64; 2],
    pub bn_merged: bool,
}

impl ModelInfo {
    pub fn of(params: &ParameterSet) -> Self {
        let c = &params.config;
        Self {
            layers: c.num_layers,
            channels: c.num_channels,
            color_mode: if c.in_channels == 3 { "color" } else { "gray" }.into(),
            in_channels: c.in_channels,
            downsample_factor: c.downsample_factor,
            noise_range: [NOISE_RANGE.0, NOISE_RANGE.1],
            bn_merged: params.bn_merged,
        }
    }
}

/// Error response; `Internal` carries the message logged under its id.
#[derive(Debug)]
enum ApiError {
    BadRequest(String),
    TooLarge(String),
    Internal(String),
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::BadRequest(msg.into())
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error_response(status: StatusCode, message: String) -> Response {
    (status, Json(ErrorBody { error: message })).into_response()
}

/// Resolves a spec to a full-resolution map for an `height x width` image.
pub fn resolve_map(spec: &MapSpec, height: usize, width: usize) -> Result<NoiseLevelMap, String> {
    let check = |sigma: f64| {
        if sigma.is_finite() && (0.0..=MAX_SIGMA).contains(&sigma) {
            Ok(())
        } else {
            Err(format!("sigma {sigma} is outside [0, {MAX_SIGMA}]"))
        }
    };
    match spec {
        MapSpec::Uniform { sigma } => {
            check(*sigma)?;
            uniform_map(height, width, *sigma).map_err(|e| e.to_string())
        }
        MapSpec::Anchors { points } => {
            if points.is_empty() {
                return Err("anchors map needs at least one point".into());
            }
            let anchors: Vec<RegionAnchor> = points
                .iter()
                .map(|p| RegionAnchor {
                    row: p.r,
                    col: p.c,
                    sigma: p.sigma,
                })
                .collect();
            anchored_map(height, width, &anchors).map_err(|e| e.to_string())
        }
        MapSpec::Raw {
            encoding,
            width: w,
            height: h,
            data,
        } => {
            if encoding != "f32le" {
                return Err(format!("unsupported map encoding `{encoding}`"));
            }
            if (*h, *w) != (height, width) {
                return Err(format!("map is {h}x{w} but the image is {height}x{width}"));
            }
            let bytes = BASE64.decode(data).map_err(|e| format!("map data is not base64: {e}"))?;
            if bytes.len() != 4 * h * w {
                return Err(format!("map data has {} bytes, expected {}", bytes.len(), 4 * h * w));
            }
            let mut values = Vec::with_capacity(h * w);
            for chunk in bytes.chunks_exact(4) {
                let sigma = f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
                check(sigma)?;
                values.push(sigma / SIGMA_SCALE);
            }
            NoiseLevelMap::custom(height, width, values).map_err(|e| e.to_string())
        }
    }
}

fn run_denoise(state: &AppState, png: &[u8], spec: &MapSpec) -> Result<DenoiseResponse, ApiError> {
    let image = decode_png(png).map_err(|e| bad(format!("image: {e}")))?;
    let s = image.shape();
    if s.height * s.width > state.config.max_pixels {
        return Err(ApiError::TooLarge(format!(
            "image has {} pixels; the limit is {}",
            s.height * s.width,
            state.config.max_pixels
        )));
    }
    let map = resolve_map(spec, s.height, s.width).map_err(|e| bad(format!("map: {e}")))?;
    let image: Tensor4 = match state.params.config.in_channels {
        3 => to_color(&image),
        _ => to_grayscale(&image),
    }
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    let out = denoise(&state.params, &image, &map).map_err(|e| ApiError::Internal(e.to_string()))?;
    let bytes = encode_png(&out).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(DenoiseResponse {
        image: BASE64.encode(bytes),
        width: s.width,
        height: s.height,
        map: EncodedMap::from_map(&map),
    })
}

async fn read_parts(mut multipart: Multipart) -> Result<(Vec<u8>, MapSpec), ApiError> {
    let (mut image, mut map) = (None, None);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| bad(format!("malformed multipart body: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| bad(format!("malformed multipart body: {e}")))?;
        match name.as_str() {
            "image" => image = Some(bytes.to_vec()),
            "map" => {
                let spec: MapSpec =
                    serde_json::from_slice(&bytes).map_err(|e| bad(format!("map spec: {e}")))?;
                map = Some(spec);
            }
            other => return Err(bad(format!("unexpected part `{other}`"))),
        }
    }
    match (image, map) {
        (Some(i), Some(m)) => Ok((i, m)),
        (None, _) => Err(bad("missing `image` part")),
        (_, None) => Err(bad("missing `map` part")),
    }
}

async fn denoise_handler(State(state): State<Arc<AppState>>, multipart: Multipart) -> Response {
    let result = match read_parts(multipart).await {
        Ok((png, spec)) => {
            let worker = Arc::clone(&state);
            tokio::task::spawn_blocking(move || run_denoise(&worker, &png, &spec))
                .await
                .unwrap_or_else(|e| Err(ApiError::Internal(format!("worker failed: {e}"))))
        }
        Err(e) => Err(e),
    };
    match result {
        Ok(body) => Json(body).into_response(),
        Err(ApiError::BadRequest(m)) => error_response(StatusCode::BAD_REQUEST, m),
        Err(ApiError::TooLarge(m)) => error_response(StatusCode::PAYLOAD_TOO_LARGE, m),
        Err(ApiError::Internal(m)) => {
            let id = state.next_error_id.fetch_add(1, Ordering::Relaxed);
            log::error!("error_id={id:016x} {m}");
            error_response(
                StatusCode::INTERNAL_SERVER_ERROR,
                format!("internal error {id:016x}"),
            )
        }
    }
}

async fn model_handler(State(state): State<Arc<AppState>>) -> Json<ModelInfo> {
    Json(ModelInfo::of(&state.params))
}

async fn access_log(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(request).await;
    log::info!(
        "method={method} path={path} status={} duration_ms={:.1}",
        response.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    response
}

/// Routes for a model; unknown paths answer 404.
pub fn router(params: ParameterSet, config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        params,
        config,
        next_error_id: AtomicU64::new(1),
    });
    // A raw 8-bit RGB image plus multipart framing; PNG is never larger in practice.
    let body_limit = config.max_pixels.saturating_mul(4).saturating_add(1 << 20);
    Router::new()
        .route("/api/denoise", post(denoise_handler))
        .route("/api/model", get(model_handler))
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(middleware::from_fn(access_log))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, params: ParameterSet, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(params, config)).await
}
