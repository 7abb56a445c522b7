//! Plain-TCP fallback for the pub/sub bus: one `<topic> <json>` message per
//! line. Each line gets a reply, `ok <seq>` or `error <code> <message>`.

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

use crate::app::SharedApp;
use crate::error::ApiError;

/// Handles one line and returns the reply without its newline.
pub fn handle_line(app: &SharedApp, line: &str) -> String {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return "error empty_line expected `<topic> <json>`".into();
    }
    let Some((topic, payload)) = line.split_once(' ') else {
        return "error malformed_line expected `<topic> <json>`".into();
    };
    let building = app.building_id().to_string();
    match app.write(|s| s.ingest(&building, topic, payload.trim().as_bytes())) {
        Ok((_, outcome)) => format!("ok {}", outcome.reading_seq),
        Err(e) => {
            let e = ApiError::from(e);
            format!("error {} {}", e.code, e.message)
        }
    }
}

async fn serve_connection(app: SharedApp, stream: TcpStream) -> std::io::Result<()> {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    while let Some(line) = lines.next_line().await? {
        let app = app.clone();
        let reply = tokio::task::spawn_blocking(move || handle_line(&app, &line)).await.map_err(std::io::Error::other)?;
        write.write_all(reply.as_bytes()).await?;
        write.write_all(b"\n").await?;
    }
    Ok(())
}

/// Accepts connections until the task is dropped.
pub async fn run_line_ingest(listener: TcpListener, app: SharedApp) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let app = app.clone();
                tokio::spawn(async move {
                    if let Err(e) = serve_connection(app, stream).await {
                        tracing::debug!(%peer, error = %e, "ingest connection closed");
                    }
                });
            }
            Err(e) => tracing::warn!(error = %e, "ingest accept failed"),
        }
    }
}
