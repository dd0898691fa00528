//! HTTP + WebSocket front end for a teleoperation [`Session`].
//!
//! A single stepper task owns the session. Commands reach it over a channel
//! and are applied between steps in arrival order; frames leave through a
//! `watch` channel so slow clients only ever see the latest one.
//!
//! Endpoints:
//! - `GET /health`  protocol version and session status
//! - `GET /lumen`   lumen geometry and actuator limits
//! - `GET /state`   latest message
//! - `POST /command` one command frame, answered with an ack
//! - `GET /ws`      state stream out, command frames in (acks are sent back
//!   to the issuing client only)

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use softscreen_core::service::{Ack, LumenView};
use softscreen_core::{
    ResolvedScenario, ScenarioSpec, ServerMessage, Session, SimTrace, PROTO_VERSION,
};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;
use tracing::{info, warn};

use crate::manifest::{Manifest, OutDir};

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// Frame rate per client.
    pub rate_hz: f64,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Where the trace is flushed on shutdown.
    pub out_dir: PathBuf,
    /// Static files served at `/`.
    pub assets: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            rate_hz: 20.0,
            time_scale: 1.0,
            out_dir: PathBuf::from("softscreen-out"),
            assets: None,
        }
    }
}

struct CommandRequest {
    text: String,
    reply: oneshot::Sender<Ack>,
}

#[derive(Clone)]
struct AppState {
    frames: watch::Receiver<Arc<ServerMessage>>,
    commands: mpsc::Sender<CommandRequest>,
    lumen: Arc<LumenView>,
    scenario: Arc<str>,
    config_hash: Arc<str>,
    frame_period: Duration,
}

/// What a stopped server leaves behind.
#[derive(Debug)]
pub struct ServeOutcome {
    pub trace: SimTrace,
    pub out_dir: PathBuf,
    pub end_reason: String,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: watch::Sender<bool>,
    stepper: JoinHandle<(Session, String)>,
    http: JoinHandle<std::io::Result<()>>,
    manifest: Manifest,
    out_dir: PathBuf,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops stepping, ends every stream and writes the trace.
    pub async fn shutdown(self) -> Result<ServeOutcome> {
        let _ = self.stop.send(true);
        let (session, end_reason) = self.stepper.await.context("stepper task")?;
        match tokio::time::timeout(Duration::from_secs(5), self.http).await {
            Ok(r) => r.context("http task")?.context("http server")?,
            Err(_) => warn!("http server did not drain within 5 s"),
        }
        let trace = session.trace();
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        let mut dir = OutDir::create(&self.out_dir, self.manifest.arg("end_reason", &end_reason))?;
        dir.write("trace.csv", &csv)?;
        dir.write("summary.json", (trace.summary_json() + "\n").as_bytes())?;
        dir.finish()?;
        info!(steps = trace.summary.steps, dir = %self.out_dir.display(), "trace flushed");
        Ok(ServeOutcome {
            trace,
            out_dir: self.out_dir,
            end_reason,
        })
    }
}

pub async fn start(
    spec: &ScenarioSpec,
    scenario: &ResolvedScenario,
    listener: TcpListener,
    opts: ServeOptions,
) -> Result<ServerHandle> {
    if !(opts.rate_hz > 0.0 && opts.rate_hz.is_finite()) {
        return Err(anyhow!("rate_hz must be > 0"));
    }
    if !(opts.time_scale > 0.0 && opts.time_scale.is_finite()) {
        return Err(anyhow!("time_scale must be > 0"));
    }
    let session = Session::new(scenario)?;
    let lumen = Arc::new(session.lumen_view()?);
    let (frame_tx, frame_rx) =
        watch::channel(Arc::new(ServerMessage::State(session.latest().clone())));
    let (cmd_tx, cmd_rx) = mpsc::channel(64);
    let (stop_tx, stop_rx) = watch::channel(false);
    let step_period = Duration::from_secs_f64(session.dt_s() / opts.time_scale);
    let stepper = tokio::spawn(step_loop(
        session,
        step_period,
        cmd_rx,
        frame_tx,
        stop_rx.clone(),
    ));

    let state = AppState {
        frames: frame_rx,
        commands: cmd_tx,
        lumen,
        scenario: scenario.name.as_str().into(),
        config_hash: scenario.config_hash().into(),
        frame_period: Duration::from_secs_f64(1.0 / opts.rate_hz),
    };
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/lumen", get(lumen_view))
        .route("/state", get(latest_state))
        .route("/command", post(command))
        .route("/ws", get(ws_upgrade))
        .with_state(state);
    if let Some(dir) = &opts.assets {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let addr = listener.local_addr()?;
    let mut stop_http = stop_rx;
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = stop_http.wait_for(|s| *s).await;
            })
            .await
    });
    info!(%addr, scenario = %scenario.name, "serving");

    let mut manifest = Manifest::new("serve", scenario.config_hash(), &scenario.calibration)
        .arg("rate_hz", opts.rate_hz)
        .arg("time_scale", opts.time_scale);
    manifest.scenario = Some(spec.clone());
    Ok(ServerHandle {
        addr,
        stop: stop_tx,
        stepper,
        http,
        manifest,
        out_dir: opts.out_dir,
    })
}

async fn step_loop(
    mut session: Session,
    period: Duration,
    mut commands: mpsc::Receiver<CommandRequest>,
    frames: watch::Sender<Arc<ServerMessage>>,
    mut stop: watch::Receiver<bool>,
) -> (Session, String) {
    let mut ticker = tokio::time::interval(period);
    // Burst keeps simulated time pinned to the wall clock after a hiccup.
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    ticker.tick().await;
    let reason = loop {
        tokio::select! {
            biased;
            _ = stop.wait_for(|s| *s) => break "stopped".to_string(),
            Some(req) = commands.recv() => {
                let ack = session.apply_json(&req.text);
                let _ = req.reply.send(ack);
            }
            _ = ticker.tick() => match session.tick() {
                Ok(f) => {
                    frames.send_replace(Arc::new(ServerMessage::State(f)));
                }
                Err(e) => {
                    warn!(error = %e, "simulation error");
                    break format!("error: {e}");
                }
            },
        }
    };
    frames.send_replace(Arc::new(session.end_message(&reason)));
    (session, reason)
}

async fn health(State(st): State<AppState>) -> Json<serde_json::Value> {
    let ended = matches!(**st.frames.borrow(), ServerMessage::End { .. });
    Json(serde_json::json!({
        "status": if ended { "ended" } else { "ok" },
        "proto_version": PROTO_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": &*st.scenario,
        "config_hash": &*st.config_hash,
    }))
}

async fn lumen_view(State(st): State<AppState>) -> Json<LumenView> {
    Json((*st.lumen).clone())
}

async fn latest_state(State(st): State<AppState>) -> Json<ServerMessage> {
    Json((**st.frames.borrow()).clone())
}

async fn submit(st: &AppState, text: String) -> Option<Ack> {
    let (reply, rx) = oneshot::channel();
    st.commands
        .send(CommandRequest { text, reply })
        .await
        .ok()?;
    rx.await.ok()
}

async fn command(State(st): State<AppState>, body: String) -> Response {
    match submit(&st, body).await {
        Some(ack) => {
            let code = if ack.accepted {
                StatusCode::OK
            } else {
                StatusCode::UNPROCESSABLE_ENTITY
            };
            (code, Json(ServerMessage::Ack(ack))).into_response()
        }
        None => (StatusCode::SERVICE_UNAVAILABLE, "session ended").into_response(),
    }
}

async fn ws_upgrade(State(st): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| client(socket, st))
}

async fn client(socket: WebSocket, st: AppState) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = st.frames.clone();
    let mut ticker = tokio::time::interval(st.frame_period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut last_seq = 0;
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                let msg = frames.borrow_and_update().clone();
                let send = match &*msg {
                    ServerMessage::State(f) if f.seq > last_seq => {
                        last_seq = f.seq;
                        true
                    }
                    ServerMessage::End { .. } => true,
                    _ => false,
                };
                if send && tx.send(Message::Text(msg.to_json().into())).await.is_err() {
                    break;
                }
                if matches!(*msg, ServerMessage::End { .. }) {
                    let _ = tx.send(Message::Close(None)).await;
                    break;
                }
            }
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let Some(ack) = submit(&st, text.to_string()).await else { continue };
                    if tx.send(Message::Text(ServerMessage::Ack(ack).to_json().into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let ack = softscreen_core::service::Ack {
                        proto_version: PROTO_VERSION,
                        accepted: false,
                        applied: None,
                        clamped: Vec::new(),
                        error: Some("binary frames are not supported".into()),
                        effective_step: None,
                    };
                    if tx.send(Message::Text(ServerMessage::Ack(ack).to_json().into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
