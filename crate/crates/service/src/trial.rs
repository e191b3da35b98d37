//! Typing trials logged by the web UI on a generated layout.
//!
//! The log is `trials/{id}.ndjson`: a header naming the layout and prompt,
//! then one line per keystroke, then a finish marker.

use anyhow::{anyhow, bail, Context};
use hexkey_core::corpus::{normalize_line, symbols};
use hexkey_core::eval::{compute_metrics, start_key, Keystroke};
use hexkey_core::{EvalReport, KeyboardLayout, Symbol, TranscriptionTrial};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TrialLine {
    Header { layout_id: String, prompt: String },
    Keystroke(KeystrokeInput),
    Finish,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeystrokeInput {
    pub char_target: char,
    /// `None` for a click on a key with no symbol.
    pub char_selected: Option<char>,
    /// Seconds since the prompt appeared.
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub layout_id: String,
    pub layout: KeyboardLayout,
    pub prompt: String,
    targets: Vec<Symbol>,
    // index into `targets` of the character being typed
    next: usize,
    cursor: usize,
    last_t: f64,
    keystrokes: Vec<Keystroke>,
    pub finished: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TrialError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
}

impl TrialRecord {
    pub fn new(layout_id: String, layout: KeyboardLayout, prompt: &str) -> Result<TrialRecord, TrialError> {
        let prompt = normalize_line(prompt);
        let targets = symbols(&prompt);
        if targets.is_empty() {
            return Err(TrialError::Invalid("prompt has no typeable characters".into()));
        }
        let cursor = start_key(&layout);
        Ok(TrialRecord {
            layout_id,
            layout,
            prompt,
            targets,
            next: 0,
            cursor,
            last_t: 0.0,
            keystrokes: Vec::new(),
            finished: false,
        })
    }

    pub fn header(&self) -> TrialLine {
        TrialLine::Header {
            layout_id: self.layout_id.clone(),
            prompt: self.prompt.clone(),
        }
    }

    /// Rebuilds a trial from its log; `load_layout` resolves the layout id.
    pub fn parse(
        text: &str,
        load_layout: impl Fn(&str) -> anyhow::Result<KeyboardLayout>,
    ) -> anyhow::Result<TrialRecord> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).enumerate();
        let (_, first) = lines.next().ok_or_else(|| anyhow!("empty trial log"))?;
        let TrialLine::Header { layout_id, prompt } = serde_json::from_str(first).context("line 1")? else {
            bail!("line 1: expected a header");
        };
        let layout = load_layout(&layout_id)?;
        let mut record = TrialRecord::new(layout_id, layout, &prompt).map_err(|e| anyhow!("{e}"))?;
        for (i, line) in lines {
            match serde_json::from_str(line).with_context(|| format!("line {}", i + 1))? {
                TrialLine::Keystroke(k) => record.keystroke(k).map_err(|e| anyhow!("line {}: {e}", i + 1))?,
                TrialLine::Finish => record.finished = true,
                TrialLine::Header { .. } => bail!("line {}: repeated header", i + 1),
            }
        }
        Ok(record)
    }

    pub fn is_typed(&self) -> bool {
        self.next == self.targets.len()
    }

    /// Checks and applies one keystroke.
    pub fn keystroke(&mut self, k: KeystrokeInput) -> Result<(), TrialError> {
        if self.finished {
            return Err(TrialError::Conflict("trial is finished".into()));
        }
        if self.is_typed() {
            return Err(TrialError::Conflict("prompt is already fully typed".into()));
        }
        let sym = |c: char, field: &str| {
            Symbol::from_char(c.to_ascii_uppercase())
                .ok_or_else(|| TrialError::Invalid(format!("{field}: {c:?} is not a keyboard symbol")))
        };
        let target = sym(k.char_target, "char_target")?;
        let expected = self.targets[self.next];
        if target != expected {
            return Err(TrialError::Invalid(format!(
                "char_target: expected {:?}, got {:?}",
                expected.to_char(),
                target.to_char()
            )));
        }
        let selected = k.char_selected.map(|c| sym(c, "char_selected")).transpose()?;
        if !(k.t.is_finite() && k.t >= self.last_t) {
            return Err(TrialError::Invalid(format!(
                "t: {} precedes the previous keystroke at {}",
                k.t, self.last_t
            )));
        }

        let grid = self.layout.grid();
        let first_attempt = self
            .keystrokes
            .last()
            .is_none_or(|prev| prev.target != target || prev.hit());
        self.keystrokes.push(Keystroke {
            target,
            selected,
            movement_time: k.t - self.last_t,
            origin: *grid.position(self.cursor),
            origin_symbol: self.layout.symbol_at(self.cursor),
            target_position: *self.layout.position_of(target),
            first_attempt,
        });
        // a click on an unlabeled key leaves the cursor where the layout can't say
        if let Some(s) = selected {
            self.cursor = self.layout.index_of(s);
        }
        self.last_t = k.t;
        if selected == Some(target) {
            self.next += 1;
        }
        Ok(())
    }

    pub fn report(&self) -> Result<EvalReport, TrialError> {
        let trial = TranscriptionTrial {
            prompt: self.prompt.clone(),
            keystrokes: self.keystrokes.clone(),
            total_time: self.last_t,
        };
        compute_metrics(&[trial], &self.layout_id, "live").map_err(|e| TrialError::Invalid(e.to_string()))
    }
}
