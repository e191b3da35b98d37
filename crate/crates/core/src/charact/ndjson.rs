//! Newline-delimited JSON session logs: a header line, then one entry per line.

use serde::{Deserialize, Serialize};

use super::{CharacterizationSession, SelectionEvent};
use crate::error::{Error, Result};
use crate::fitts::MovementSample;
use crate::hexgeom::{angle_deg, distance_px, HexGrid};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub seed: u64,
    pub grid: HexGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEntry {
    Selection(SelectionEvent),
    Pause { t0: f64, t1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn parse(text: &str) -> Result<SessionLog> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "missing header line"))?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| Error::parse(1, e))?;
        if header.version != LOG_VERSION {
            return Err(Error::parse(1, format!("unsupported log version {}", header.version)));
        }
        let entries = lines
            .map(|(i, line)| serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e)))
            .collect::<Result<Vec<LogEntry>>>()?;
        Ok(SessionLog { header, entries })
    }

    pub fn events(&self) -> impl Iterator<Item = &SelectionEvent> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Selection(ev) => Some(ev),
            LogEntry::Pause { .. } => None,
        })
    }

    /// Movement samples read straight off the successful selections.
    pub fn samples(&self) -> Result<Vec<MovementSample>> {
        self.events()
            .filter(|e| e.success)
            .map(|e| {
                let distance = distance_px(&e.origin_key, &e.target_key);
                let angle = if distance > 0.0 {
                    Some(angle_deg(&e.origin_key, &e.target_key)?)
                } else {
                    None
                };
                Ok(MovementSample {
                    distance,
                    angle,
                    movement_time: e.movement_time,
                    demanded_bin: e.demand.angle_bin as usize,
                    distance_class: e.demand.distance_class,
                })
            })
            .collect()
    }

    pub fn header_line(&self) -> String {
        serde_json::to_string(&self.header).expect("header serializes")
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&entry_line(e));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn entry_line(entry: &LogEntry) -> String {
    serde_json::to_string(entry).expect("log entries serialize")
}

impl CharacterizationSession {
    pub fn header(&self) -> LogHeader {
        LogHeader {
            version: LOG_VERSION,
            seed: self.seed,
            grid: self.grid.clone(),
        }
    }

    pub fn export_log(&self) -> String {
        SessionLog {
            header: self.header(),
            entries: self.entries.clone(),
        }
        .to_ndjson()
    }

    /// Serialized form of one entry, exactly as it appears in the exported log.
    pub fn log_line(entry: &LogEntry) -> String {
        entry_line(entry)
    }

    /// Re-runs a parsed log through the state machine.
    pub fn replay(log: &SessionLog) -> Result<CharacterizationSession> {
        let mut session = CharacterizationSession::new(log.header.grid.clone(), log.header.seed);
        for (i, entry) in log.entries.iter().enumerate() {
            let applied = match *entry {
                LogEntry::Selection(event) => session.record_selection(event),
                LogEntry::Pause { t0, t1 } => session.pause(t0, t1),
            };
            // header is line 1
            applied.map_err(|e| Error::parse(i + 2, e))?;
        }
        Ok(session)
    }
}

pub fn import_log(text: &str) -> Result<CharacterizationSession> {
    CharacterizationSession::replay(&SessionLog::parse(text)?)
}
