use std::net::SocketAddr;
use std::sync::Arc;

use futures::{SinkExt, StreamExt};
use ipteach::session::SessionManager;
use ipteach_cli::server::app;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;

async fn start() -> (SocketAddr, Arc<SessionManager>) {
    let manager = Arc::new(SessionManager::new());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let router = app(manager.clone());
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    (addr, manager)
}

#[tokio::test]
async fn websocket_session_roundtrip() {
    let (addr, manager) = start().await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
        .await
        .unwrap();
    async fn send(
        ws: &mut tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>,
        frame: Value,
    ) -> Value {
        ws.send(Message::Text(frame.to_string())).await.unwrap();
        loop {
            match ws.next().await.unwrap().unwrap() {
                Message::Text(t) => return serde_json::from_str(&t).unwrap(),
                _ => continue,
            }
        }
    }

    let created = send(&mut ws, json!({"v": 1, "type": "create_session"})).await;
    assert_eq!(created["type"], "session_created");
    assert_eq!(created["state"]["entropy_bits"], 2.0);
    let id = created["session_id"].as_str().unwrap().to_string();

    let unknown = send(&mut ws, json!({"v": 1, "type": "teleport"})).await;
    assert_eq!(unknown["code"], "unknown_type");

    let state = send(
        &mut ws,
        json!({"v": 1, "type": "signal", "session_id": id,
               "signal": {"kind": "utter_feature", "feature": 0}}),
    )
    .await;
    assert_eq!(state["type"], "state", "{state}");
    assert_eq!(state["seq"], 1);

    let snap = send(&mut ws, json!({"v": 1, "type": "snapshot_request", "session_id": id})).await;
    assert_eq!(snap, state);
    assert_eq!(serde_json::to_value(manager.get(&id).unwrap().snapshot()).unwrap()["seq"], 1);

    ws.send(Message::Text("not json".into())).await.unwrap();
    let Message::Text(t) = ws.next().await.unwrap().unwrap() else { panic!() };
    assert_eq!(serde_json::from_str::<Value>(&t).unwrap()["code"], "parse");
    ws.close(None).await.unwrap();
}

#[tokio::test]
async fn healthz_reports_protocol_and_sessions() {
    let (addr, manager) = start().await;
    manager.create(None).unwrap();
    let mut stream = TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    let body: Value = serde_json::from_str(buf.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["status"], "ok");
    assert_eq!(body["protocol"], 1);
    assert_eq!(body["sessions"], 1);
}
