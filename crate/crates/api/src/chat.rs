use std::time::Duration;

use axum::extract::{Path, State};
use axum::response::IntoResponse;
use axum::Json;
use citadel_core::auth::Principal;
use citadel_core::model::ChatMessage;
use citadel_core::store::{Id, Stored};
use serde::{Deserialize, Serialize};

use crate::error::Failure;
use crate::extract::{Caller, Params};
use crate::handlers::{run, Reply};
use crate::AppState;

#[derive(Deserialize)]
pub struct ChatQuery {
    #[serde(default)]
    after: u64,
    /// Seconds to hold the request open; capped by the server setting.
    wait: Option<u64>,
}

#[derive(Serialize)]
struct ChatPage {
    course_code: String,
    messages: Vec<Stored<ChatMessage>>,
    last_seq: u64,
}

fn page(course_code: String, after: u64, messages: Vec<Stored<ChatMessage>>) -> Reply {
    let last_seq = messages.last().map_or(after, |m| m.seq);
    Ok(Json(ChatPage {
        course_code,
        messages,
        last_seq,
    })
    .into_response())
}

async fn fetch(s: &AppState, p: &Principal, course: &str, after: u64) -> Result<(Id, Vec<Stored<ChatMessage>>), Failure> {
    let (p, course) = (p.clone(), course.to_owned());
    run(s, move |x| x.chat_fetch(&p, &course, after)).await
}

/// Messages with seq greater than `after`. With nothing new, waits for a
/// post to the room, the timeout, or server shutdown, whichever is first.
pub async fn chat_fetch(State(s): State<AppState>, Caller(p): Caller, Path(course): Path<String>, Params(q): Params<ChatQuery>) -> Reply {
    let wait = q.wait.map_or(s.longpoll, Duration::from_secs).min(s.longpoll);
    let (course_id, msgs) = fetch(&s, &p, &course, q.after).await?;
    if !msgs.is_empty() || wait.is_zero() {
        return page(course, q.after, msgs);
    }
    // Long polls are capped; past the cap a request answers immediately.
    let Ok(_permit) = s.polls.clone().try_acquire_owned() else {
        return page(course, q.after, msgs);
    };
    let mut room = s.citadel.chat_subscribe(&course_id);
    let (_, msgs) = fetch(&s, &p, &course, q.after).await?;
    if !msgs.is_empty() {
        return page(course, q.after, msgs);
    }
    let mut closing = s.closing.subscribe();
    tokio::select! {
        _ = tokio::time::timeout(wait, room.changed()) => {}
        _ = closing.wait_for(|c| *c) => {}
    }
    let (_, msgs) = fetch(&s, &p, &course, q.after).await?;
    page(course, q.after, msgs)
}
