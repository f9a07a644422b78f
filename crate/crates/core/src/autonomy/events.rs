use super::{AutonomyError, AutonomyEvent, EventKind};
use std::path::Path;

/// Time-ordered injected events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventScript {
    events: Vec<AutonomyEvent>,
    next: usize,
}

impl EventScript {
    pub fn new(mut events: Vec<AutonomyEvent>) -> Self {
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self { events, next: 0 }
    }

    pub fn load(path: &Path) -> Result<Self, AutonomyError> {
        let text = std::fs::read_to_string(path).map_err(|e| AutonomyError::Script { line: 0, message: e.to_string() })?;
        parse_event_script(&text)
    }

    pub fn events(&self) -> &[AutonomyEvent] {
        &self.events
    }

    /// Events with time ≤ `t` not yet returned.
    pub fn due(&mut self, t: f64) -> Vec<AutonomyEvent> {
        let start = self.next;
        while self.next < self.events.len() && self.events[self.next].time <= t + 1e-9 {
            self.next += 1;
        }
        self.events[start..self.next].to_vec()
    }
}

/// Lines of `<time s> <EventName>`; `#` starts a comment.
pub fn parse_event_script(text: &str) -> Result<EventScript, AutonomyError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| AutonomyError::Script { line: i + 1, message: m };
        let mut parts = line.split_whitespace();
        let t: f64 = parts.next().unwrap_or("").parse().map_err(|_| err(format!("bad time in {line:?}")))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(err(format!("time {t} must be finite and non-negative")));
        }
        let name = parts.next().ok_or_else(|| err("missing event name".into()))?;
        let kind: EventKind = name.parse().map_err(|e: AutonomyError| err(e.to_string()))?;
        if parts.next().is_some() {
            return Err(err("trailing fields".into()));
        }
        events.push(AutonomyEvent::new(kind, t));
    }
    Ok(EventScript::new(events))
}
