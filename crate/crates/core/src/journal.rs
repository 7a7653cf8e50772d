//! Ground-truth extraction from ATM journals.
//!
//! An ATM is down while any of card reader, keypad or network is in an error
//! state. Intervals are half-open: down from the error's timestamp, up again
//! from the recovery's timestamp.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::simnet::{Cause, OutageInterval, TransactionRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    CardReaderError,
    CardReaderRecovered,
    KeypadError,
    KeypadRecovered,
    NetworkDown,
    NetworkUp,
    Activity,
}

impl EventKind {
    pub fn error_for(cause: Cause) -> EventKind {
        match cause {
            Cause::CardReader => EventKind::CardReaderError,
            Cause::Keypad => EventKind::KeypadError,
            Cause::Network => EventKind::NetworkDown,
        }
    }

    pub fn recovery_for(cause: Cause) -> EventKind {
        match cause {
            Cause::CardReader => EventKind::CardReaderRecovered,
            Cause::Keypad => EventKind::KeypadRecovered,
            Cause::Network => EventKind::NetworkUp,
        }
    }

    /// `(component, entering_error)` for status-bearing events.
    fn transition(self) -> Option<(usize, bool)> {
        match self {
            EventKind::CardReaderError => Some((0, true)),
            EventKind::CardReaderRecovered => Some((0, false)),
            EventKind::KeypadError => Some((1, true)),
            EventKind::KeypadRecovered => Some((1, false)),
            EventKind::NetworkDown => Some((2, true)),
            EventKind::NetworkUp => Some((2, false)),
            EventKind::Activity => None,
        }
    }

    /// Within one timestamp recoveries sort before errors, so a component
    /// that fails again at the instant it recovers stays down.
    fn order(self) -> u8 {
        match self.transition() {
            Some((_, false)) => 0,
            Some((_, true)) => 1,
            None => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEvent {
    pub atm_id: String,
    pub ts: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: i64,
    pub end_s: i64,
    pub up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTimeline {
    pub atm_id: String,
    pub intervals: Vec<Span>,
}

impl StatusTimeline {
    pub fn start_s(&self) -> i64 {
        self.intervals.first().map_or(0, |s| s.start_s)
    }

    pub fn end_s(&self) -> i64 {
        self.intervals.last().map_or(0, |s| s.end_s)
    }

    pub fn down_spans(&self) -> impl Iterator<Item = &Span> {
        self.intervals.iter().filter(|s| !s.up)
    }

    /// Total up/down seconds.
    pub fn durations(&self) -> (i64, i64) {
        self.intervals.iter().fold((0, 0), |(u, d), s| {
            let len = s.end_s - s.start_s;
            if s.up {
                (u + len, d)
            } else {
                (u, d + len)
            }
        })
    }

    /// Checks contiguity, positive lengths and alternation.
    pub fn is_normalized(&self) -> bool {
        self.intervals.iter().all(|s| s.start_s < s.end_s)
            && self
                .intervals
                .windows(2)
                .all(|w| w[0].end_s == w[1].start_s && w[0].up != w[1].up)
    }
}

/// Sweeps one ATM's events and returns its normalized up/down timeline over
/// `horizon = (start, end)`. Events must be sorted by timestamp.
pub fn extract_truth(
    atm_id: &str,
    events: &[JournalEvent],
    horizon: (i64, i64),
) -> Result<StatusTimeline> {
    let (start, end) = horizon;
    if start >= end {
        return Err(Error::Domain(format!("empty horizon [{start}, {end})")));
    }
    let mut failed = [false; 3];
    let mut spans: Vec<Span> = Vec::new();
    let mut cursor = start;
    let mut up = true;
    let mut i = 0;
    while i < events.len() {
        let ts = events[i].ts;
        if i > 0 && ts < events[i - 1].ts {
            return Err(malformed(&events[i], "events not sorted by timestamp"));
        }
        // Apply every event at this instant, recoveries first.
        let mut j = i;
        while j < events.len() && events[j].ts == ts {
            j += 1;
        }
        let mut batch: Vec<&JournalEvent> = events[i..j].iter().collect();
        batch.sort_by_key(|e| e.kind.order());
        for ev in batch {
            if ev.atm_id != atm_id {
                return Err(malformed(ev, "event belongs to another atm"));
            }
            if let Some((component, entering)) = ev.kind.transition() {
                if !entering && !failed[component] {
                    return Err(malformed(ev, "recovery without a preceding error"));
                }
                failed[component] = entering;
            }
        }
        let now_up = !failed.iter().any(|&f| f);
        let at = ts.clamp(start, end);
        if now_up != up {
            push_span(&mut spans, cursor, at, up);
            cursor = at;
            up = now_up;
        }
        i = j;
    }
    push_span(&mut spans, cursor, end, up);
    Ok(StatusTimeline {
        atm_id: String::from(atm_id),
        intervals: spans,
    })
}

fn push_span(spans: &mut Vec<Span>, start_s: i64, end_s: i64, up: bool) {
    if start_s >= end_s {
        return;
    }
    match spans.last_mut() {
        Some(prev) if prev.up == up => prev.end_s = end_s,
        _ => spans.push(Span { start_s, end_s, up }),
    }
}

fn malformed(ev: &JournalEvent, reason: &str) -> Error {
    Error::MalformedJournal {
        atm_id: ev.atm_id.clone(),
        ts: ev.ts,
        reason: String::from(reason),
    }
}

/// Groups a mixed journal by ATM and extracts each timeline. ATMs listed in
/// `atm_ids` with no events get an all-up timeline.
pub fn extract_all(
    events: &[JournalEvent],
    atm_ids: &[String],
    horizon: (i64, i64),
) -> Result<Vec<StatusTimeline>> {
    let mut by_atm: BTreeMap<&str, Vec<JournalEvent>> = BTreeMap::new();
    for id in atm_ids {
        by_atm.entry(id.as_str()).or_default();
    }
    for ev in events {
        by_atm.entry(ev.atm_id.as_str()).or_default().push(ev.clone());
    }
    by_atm
        .into_iter()
        .map(|(id, evs)| extract_truth(id, &evs, horizon))
        .collect()
}

/// Up flag of the interval covering `ts`.
pub fn label_at(timeline: &StatusTimeline, ts: i64) -> Result<bool> {
    let (start, end) = (timeline.start_s(), timeline.end_s());
    if ts < start || ts >= end {
        return Err(Error::OutOfRange { ts, start, end });
    }
    let idx = timeline.intervals.partition_point(|s| s.end_s <= ts);
    Ok(timeline.intervals[idx].up)
}

/// Synthesizes a journal from simulated ground truth: an error/recovery pair
/// per outage and an activity event per transaction, sorted by
/// `(atm_id, ts, kind order)`.
pub fn journal_from_world(
    outages: &[OutageInterval],
    transactions: &[TransactionRecord],
) -> Vec<JournalEvent> {
    let mut events = Vec::with_capacity(outages.len() * 2 + transactions.len());
    for o in outages {
        events.push(JournalEvent {
            atm_id: o.atm_id.clone(),
            ts: o.start_s,
            kind: EventKind::error_for(o.cause),
        });
        events.push(JournalEvent {
            atm_id: o.atm_id.clone(),
            ts: o.end_s,
            kind: EventKind::recovery_for(o.cause),
        });
    }
    events.extend(transactions.iter().map(|t| JournalEvent {
        atm_id: t.atm_id.clone(),
        ts: t.ts,
        kind: EventKind::Activity,
    }));
    events.sort_by(|a, b| {
        (a.atm_id.as_str(), a.ts, a.kind.order()).cmp(&(b.atm_id.as_str(), b.ts, b.kind.order()))
    });
    events
}
