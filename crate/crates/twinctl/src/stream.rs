use std::convert::Infallible;
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::response::sse::{Event, KeepAlive, Sse};
use futures::Stream;
use serde::Deserialize;
use tokio::sync::broadcast::{self, error::RecvError};
use twin_core::telemetry::SensorKind;

use crate::api::parse_enum;
use crate::app::{SharedApp, StreamReading};
use crate::error::ApiError;

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    pub equipment: Option<String>,
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamFilter {
    pub equipment: Option<String>,
    pub kind: Option<SensorKind>,
}

impl StreamFilter {
    pub fn matches(&self, r: &StreamReading) -> bool {
        self.equipment.as_ref().is_none_or(|e| &r.equipment_id == e) && self.kind.is_none_or(|k| r.kind == k)
    }
}

fn bad_filter(message: String) -> ApiError {
    ApiError::bad_request("bad_filter", message)
}

/// Validates a stream query against the current graph.
pub fn parse_filter(app: &SharedApp, q: &StreamQuery) -> Result<StreamFilter, ApiError> {
    let kind = q.kind.as_deref().map(|k| parse_enum::<SensorKind>("kind", k)).transpose().map_err(|e| bad_filter(e.message))?;
    if let Some(id) = &q.equipment {
        if !app.read(|s| s.graph().equipment.contains_key(id)) {
            return Err(bad_filter(format!("unknown equipment {id:?}")));
        }
    }
    Ok(StreamFilter { equipment: q.equipment.clone(), kind })
}

/// What a subscriber sees next.
#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Reading(Arc<StreamReading>),
    /// The subscriber fell more than the buffer behind and is dropped.
    Lagged(u64),
}

/// Pulls the next matching reading. `None` ends the stream.
pub async fn next_delivery(rx: &mut broadcast::Receiver<Arc<StreamReading>>, filter: &StreamFilter) -> Option<Delivery> {
    loop {
        match rx.recv().await {
            Ok(r) if filter.matches(&r) => return Some(Delivery::Reading(r)),
            Ok(_) => continue,
            Err(RecvError::Lagged(n)) => return Some(Delivery::Lagged(n)),
            Err(RecvError::Closed) => return None,
        }
    }
}

/// Readings committed from now on, as SSE `reading` events with the event
/// sequence number as id. A subscriber that lags gets one `lagged` event and
/// is disconnected.
pub fn reading_events(
    rx: broadcast::Receiver<Arc<StreamReading>>,
    filter: StreamFilter,
    closed: impl Future<Output = ()> + Send + 'static,
) -> impl Stream<Item = Result<Event, Infallible>> {
    let closed: Pin<Box<dyn Future<Output = ()> + Send>> = Box::pin(closed);
    futures::stream::unfold(Some((rx, filter, closed)), |state| async move {
        let (mut rx, filter, mut closed) = state?;
        let delivery = tokio::select! {
            d = next_delivery(&mut rx, &filter) => d?,
            _ = &mut closed => return None,
        };
        match delivery {
            Delivery::Reading(r) => {
                let event = Event::default().event("reading").id(r.seq.to_string()).json_data(&*r).expect("readings serialize");
                Some((Ok(event), Some((rx, filter, closed))))
            }
            Delivery::Lagged(n) => {
                let event = Event::default().event("lagged").data(format!("{{\"dropped\":{n}}}"));
                Some((Ok(event), None))
            }
        }
    })
}

pub async fn stream_readings(
    State(app): State<SharedApp>,
    Query(q): Query<StreamQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let filter = parse_filter(&app, &q)?;
    let rx = app.subscribe();
    Ok(Sse::new(reading_events(rx, filter, app.closed())).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
