//! Simulated transcription and text-entry metrics.

mod user;

pub use user::{anisotropic_model, NoiseKind, SimulatedUser};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{symbols, Symbol, ALPHABET_LEN};
use crate::error::{Error, Result};
use crate::hexgeom::KeyPosition;
use crate::layout::KeyboardLayout;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keystroke {
    pub target: Symbol,
    /// `None` when the click landed on a key without a symbol.
    pub selected: Option<Symbol>,
    pub movement_time: f64,
    pub origin: KeyPosition,
    /// Symbol under the cursor before the movement, if any.
    pub origin_symbol: Option<Symbol>,
    pub target_position: KeyPosition,
    pub first_attempt: bool,
}

impl Keystroke {
    pub fn hit(&self) -> bool {
        self.selected == Some(self.target)
    }

    fn touches_space(&self) -> bool {
        self.target.is_space() || self.origin_symbol.is_some_and(Symbol::is_space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionTrial {
    pub prompt: String,
    pub keystrokes: Vec<Keystroke>,
    pub total_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub layout: String,
    pub user: String,
    pub n_trials: usize,
    pub accuracy_pct: f64,
    pub wpm: f64,
    pub wpm_star: f64,
    pub itr_bits_per_min: f64,
}

/// The key a trial starts from: the assigned key nearest the layout's centroid.
pub fn start_key(layout: &KeyboardLayout) -> usize {
    let keys = layout.keys();
    let n = keys.len() as f64;
    let cx = keys.iter().map(|k| k.cx).sum::<f64>() / n;
    let cy = keys.iter().map(|k| k.cy).sum::<f64>() / n;
    let nearest = keys
        .iter()
        .min_by(|a, b| {
            let da = (a.cx - cx).powi(2) + (a.cy - cy).powi(2);
            let db = (b.cx - cx).powi(2) + (b.cy - cy).powi(2);
            da.total_cmp(&db)
        })
        .expect("27 keys");
    layout.index_of(nearest.char)
}

/// Types every prompt on `layout` as `user` would, retrying after misses.
///
/// Prompt `i` draws from its own stream of the user's seed, so trials are
/// independent of each other and of scheduling.
pub fn simulate_transcription(
    user: &SimulatedUser,
    layout: &KeyboardLayout,
    prompts: &[String],
) -> Result<Vec<TranscriptionTrial>> {
    user.validate()?;
    let trials: Vec<Option<TranscriptionTrial>> = prompts
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| transcribe(user, layout, prompt, i as u64))
        .collect::<Result<_>>()?;
    Ok(trials.into_iter().flatten().collect())
}

fn transcribe(
    user: &SimulatedUser,
    layout: &KeyboardLayout,
    prompt: &str,
    stream: u64,
) -> Result<Option<TranscriptionTrial>> {
    let text = symbols(prompt);
    if text.is_empty() {
        log::warn!("skipping prompt with no typeable characters: {prompt:?}");
        return Ok(None);
    }
    let grid = layout.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(user.seed);
    rng.set_stream(stream);
    let mut cursor = start_key(layout);
    let mut keystrokes = Vec::new();
    for &target in &text {
        let goal = layout.index_of(target);
        let mut first_attempt = true;
        loop {
            let landed = if user.misses(&mut rng) {
                let labeled: Vec<usize> = grid
                    .neighbors(goal)
                    .into_iter()
                    .filter(|&n| layout.symbol_at(n).is_some())
                    .collect();
                labeled.choose(&mut rng).copied().unwrap_or(goal)
            } else {
                goal
            };
            let from = grid.position(cursor);
            let mt = user.movement_time(&mut rng, from, grid.position(landed))?;
            keystrokes.push(Keystroke {
                target,
                selected: layout.symbol_at(landed),
                movement_time: mt,
                origin: *from,
                origin_symbol: layout.symbol_at(cursor),
                target_position: *grid.position(goal),
                first_attempt,
            });
            cursor = landed;
            first_attempt = false;
            if landed == goal {
                break;
            }
        }
    }
    let total_time = keystrokes.iter().map(|k| k.movement_time).sum();
    Ok(Some(TranscriptionTrial {
        prompt: text.iter().map(|s| s.to_char()).collect(),
        keystrokes,
        total_time,
    }))
}

/// Wolpaw information transfer rate in bits per minute.
pub fn wolpaw_itr(n_targets: usize, p: f64, selections_per_min: f64) -> Result<f64> {
    if n_targets < 2 {
        return Err(Error::invalid(format!("ITR needs at least 2 targets, got {n_targets}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("accuracy must be a probability, got {p}")));
    }
    let n = n_targets as f64;
    if p <= 1.0 / n {
        return Ok(0.0);
    }
    let plogp = |x: f64| if x == 0.0 { 0.0 } else { x * x.log2() };
    let q = 1.0 - p;
    let miss_term = if q == 0.0 { 0.0 } else { q * (q / (n - 1.0)).log2() };
    let bits = n.log2() + plogp(p) + miss_term;
    Ok((bits * selections_per_min).max(0.0))
}

fn words_per_minute(chars: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        chars as f64 / (seconds / 60.0) / 5.0
    } else {
        0.0
    }
}

pub fn compute_metrics(trials: &[TranscriptionTrial], layout: &str, user: &str) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::Degenerate("no trials to score".into()));
    }
    let strokes = || trials.iter().flat_map(|t| t.keystrokes.iter());
    let total_time: f64 = trials.iter().map(|t| t.total_time).sum();
    if !(total_time > 0.0) {
        return Err(Error::Degenerate("trials took no time".into()));
    }
    let n_strokes = strokes().count();
    let firsts = strokes().filter(|k| k.first_attempt).count();
    let first_hits = strokes().filter(|k| k.first_attempt && k.hit()).count();
    let accuracy = first_hits as f64 / firsts as f64;

    let kept: Vec<&Keystroke> = strokes().filter(|k| !k.touches_space()).collect();
    let kept_time: f64 = kept.iter().map(|k| k.movement_time).sum();

    let per_min = n_strokes as f64 / (total_time / 60.0);
    Ok(EvalReport {
        layout: layout.to_string(),
        user: user.to_string(),
        n_trials: trials.len(),
        accuracy_pct: 100.0 * accuracy,
        wpm: words_per_minute(n_strokes, total_time),
        wpm_star: words_per_minute(kept.len(), kept_time),
        itr_bits_per_min: wolpaw_itr(ALPHABET_LEN, accuracy, per_min)?,
    })
}
