//! WebSocket endpoint `/session` (one JSON frame per message) and `/healthz`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use ipteach::session::{SessionManager, PROTOCOL_VERSION};
use serde_json::json;

pub fn app(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/session", get(upgrade))
        .with_state(manager)
}

async fn healthz(State(manager): State<Arc<SessionManager>>) -> impl IntoResponse {
    Json(json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "protocol": PROTOCOL_VERSION,
        "sessions": manager.len(),
    }))
}

async fn upgrade(ws: WebSocketUpgrade, State(manager): State<Arc<SessionManager>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, manager))
}

async fn connection(socket: WebSocket, manager: Arc<SessionManager>) {
    let (mut tx, mut rx) = socket.split();
    while let Some(msg) = rx.next().await {
        let text = match msg {
            Ok(WsMessage::Text(t)) => t,
            Ok(WsMessage::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        let m = manager.clone();
        let reply = match tokio::task::spawn_blocking(move || m.handle_text(&text)).await {
            Ok(r) => r,
            Err(e) => {
                log::error!("handler panicked: {e}");
                json!({"v": PROTOCOL_VERSION, "type": "error", "code": "internal", "message": "handler failed"})
                    .to_string()
            }
        };
        if tx.send(WsMessage::Text(reply)).await.is_err() {
            break;
        }
    }
    log::debug!("connection closed");
}

pub async fn serve(addr: SocketAddr, manager: Arc<SessionManager>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(manager)).await?;
    Ok(())
}
