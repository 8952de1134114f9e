//! Open/close windows for timed assessments. Both ends are inclusive.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowState {
    NotYetOpen,
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("window must open strictly before it closes")]
pub struct InvalidWindow;

pub fn window_state(
    now: Timestamp,
    opens_at: Timestamp,
    closes_at: Timestamp,
) -> Result<WindowState, InvalidWindow> {
    if opens_at >= closes_at {
        return Err(InvalidWindow);
    }
    Ok(if now < opens_at {
        WindowState::NotYetOpen
    } else if now > closes_at {
        WindowState::Closed
    } else {
        WindowState::Open
    })
}
