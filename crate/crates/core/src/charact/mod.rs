//! The movement-characterization protocol.
//!
//! A session walks a queue of (distance class, angle bin) demands, turning
//! each into a concrete target key relative to the last key the user hit.
//! Successful clicks become [`MovementSample`]s; once the queue drains, bins
//! with weak fits are re-seeded and outliers re-presented until every bin is
//! healthy or 400 targets have been shown.

mod ndjson;
mod queue;

pub use ndjson::{import_log, LogEntry, LogHeader, SessionLog, LOG_VERSION};
pub use queue::{distance_class, seed_initial_queue, Reachability};

use std::collections::{BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitts::{fit_bins_detailed, DirectionalFittsModel, MovementSample};
use crate::hexgeom::{angle_deg, distance_px, HexGrid, KeyPosition, N_BINS};

pub const INITIAL_TARGETS: usize = 225;
pub const TARGET_CAP: usize = 400;
pub const PER_CLASS: usize = 25;
pub const MAX_CLASS: u8 = 8;
pub const MIN_BIN_SAMPLES: usize = 10;
pub const R2_THRESHOLD: f64 = 0.25;
pub const MAX_DEFERRALS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetDemand {
    pub distance_class: u8,
    pub angle_bin: u8,
}

impl TargetDemand {
    pub fn new(distance_class: u8, angle_bin: u8) -> Self {
        TargetDemand {
            distance_class,
            angle_bin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub sequence_no: u64,
    pub demand: TargetDemand,
    pub target_key: KeyPosition,
    pub origin_key: KeyPosition,
    pub click_time: f64,
    pub movement_time: f64,
    pub success: bool,
    pub clicked_key: KeyPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Refining,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub presented: usize,
    pub cap: usize,
    pub phase: Phase,
    /// `None` for bins that cannot be fitted yet.
    pub per_bin_r2: Vec<Option<f64>>,
    pub per_bin_n: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    demand: TargetDemand,
    deferrals: u32,
    /// Sample index this demand re-presents, if any.
    represents: Option<usize>,
}

impl Pending {
    fn fresh(demand: TargetDemand) -> Self {
        Pending {
            demand,
            deferrals: 0,
            represents: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outstanding {
    demand: TargetDemand,
    target: usize,
    origin: usize,
}

#[derive(Debug, Clone)]
pub struct CharacterizationSession {
    grid: HexGrid,
    seed: u64,
    reach: Reachability,
    rng: ChaCha8Rng,
    queue: VecDeque<Pending>,
    phase: Phase,
    presented: usize,
    outstanding: Option<Outstanding>,
    current: usize,
    entries: Vec<LogEntry>,
    n_events: u64,
    samples: Vec<MovementSample>,
    represented: BTreeSet<usize>,
    last_success_time: f64,
    last_time: f64,
    paused: f64,
    round_issued: usize,
    round_dropped: Vec<TargetDemand>,
    stalled: Option<Vec<TargetDemand>>,
}

impl CharacterizationSession {
    /// Starts a session and issues its first target from the grid's center key.
    pub fn new(grid: HexGrid, seed: u64) -> Self {
        let reach = Reachability::new(&grid);
        let queue = seed_initial_queue(&grid, seed)
            .into_iter()
            .map(Pending::fresh)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let current = grid.center_index();
        let mut session = CharacterizationSession {
            grid,
            seed,
            reach,
            rng,
            queue,
            phase: Phase::Initial,
            presented: 0,
            outstanding: None,
            current,
            entries: Vec::new(),
            n_events: 0,
            samples: Vec::new(),
            represented: BTreeSet::new(),
            last_success_time: 0.0,
            last_time: 0.0,
            paused: 0.0,
            round_issued: 0,
            round_dropped: Vec::new(),
            stalled: None,
        };
        session.advance();
        session
    }

    pub fn grid(&self) -> &HexGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn presented(&self) -> usize {
        self.presented
    }

    pub fn samples(&self) -> &[MovementSample] {
        &self.samples
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn events(&self) -> impl Iterator<Item = &SelectionEvent> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Selection(ev) => Some(ev),
            LogEntry::Pause { .. } => None,
        })
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// The key the next movement starts from.
    pub fn current_key(&self) -> &KeyPosition {
        self.grid.position(self.current)
    }

    /// The highlighted target, or `None` once the session is complete.
    pub fn next_target(&self) -> Result<Option<KeyPosition>> {
        if let Some(dropped) = &self.stalled {
            return Err(Error::ProtocolStall {
                dropped: dropped.clone(),
            });
        }
        Ok(self.outstanding.map(|o| *self.grid.position(o.target)))
    }

    pub fn outstanding_demand(&self) -> Option<TargetDemand> {
        self.outstanding.map(|o| o.demand)
    }

    /// Records a click on key `clicked` at `t` seconds since session start.
    pub fn click(&mut self, clicked: usize, t: f64) -> Result<SelectionEvent> {
        let o = self
            .outstanding
            .ok_or_else(|| Error::InvalidState("no outstanding target".into()))?;
        if clicked >= self.grid.len() {
            return Err(Error::invalid(format!("key index {clicked} is off the grid")));
        }
        let event = SelectionEvent {
            sequence_no: self.n_events + 1,
            demand: o.demand,
            target_key: *self.grid.position(o.target),
            origin_key: *self.grid.position(o.origin),
            click_time: t,
            movement_time: t - self.last_success_time - self.paused,
            success: clicked == o.target,
            clicked_key: *self.grid.position(clicked),
        };
        self.record_selection(event)?;
        Ok(event)
    }

    /// Appends a fully specified event after checking it against the protocol state.
    pub fn record_selection(&mut self, event: SelectionEvent) -> Result<()> {
        let o = self
            .outstanding
            .ok_or_else(|| Error::InvalidState("no outstanding target".into()))?;
        if event.sequence_no != self.n_events + 1 {
            return Err(Error::InvalidState(format!(
                "event {} out of sequence, expected {}",
                event.sequence_no,
                self.n_events + 1
            )));
        }
        let target = self.grid.position(o.target);
        let origin = self.grid.position(o.origin);
        if event.demand != o.demand || !event.target_key.same_key(target) || !event.origin_key.same_key(origin) {
            return Err(Error::InvalidState(format!(
                "event {} does not match the outstanding target",
                event.sequence_no
            )));
        }
        let Some(clicked) = self.grid.index_of_key(&event.clicked_key) else {
            return Err(Error::invalid("clicked key is off the grid"));
        };
        if event.success != (clicked == o.target) {
            return Err(Error::InvalidState(
                "success flag disagrees with the clicked key".into(),
            ));
        }
        if !(event.click_time.is_finite() && event.click_time >= self.last_time) {
            return Err(Error::InvalidState(format!(
                "click time {} precedes the previous event at {}",
                event.click_time, self.last_time
            )));
        }
        let expected_mt = event.click_time - self.last_success_time - self.paused;
        if !(event.movement_time > 0.0) || (event.movement_time - expected_mt).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "movement time {} inconsistent with the log (expected {expected_mt})",
                event.movement_time
            )));
        }

        self.n_events += 1;
        self.last_time = event.click_time;
        self.entries.push(LogEntry::Selection(event));
        if event.success {
            let distance = distance_px(origin, target);
            let angle = if distance > 0.0 {
                Some(angle_deg(origin, target)?)
            } else {
                None
            };
            self.samples.push(MovementSample {
                distance,
                angle,
                movement_time: event.movement_time,
                demanded_bin: o.demand.angle_bin as usize,
                distance_class: o.demand.distance_class,
            });
            self.current = o.target;
            self.last_success_time = event.click_time;
            self.paused = 0.0;
            self.outstanding = None;
            self.advance();
        }
        Ok(())
    }

    /// Marks `[t0, t1]` as a rest; the span is excluded from the next movement time.
    pub fn pause(&mut self, t0: f64, t1: f64) -> Result<()> {
        if self.phase == Phase::Complete {
            return Err(Error::InvalidState("session is complete".into()));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::invalid(format!("pause [{t0}, {t1}] is not a forward interval")));
        }
        if t0 < self.last_time {
            return Err(Error::InvalidState(format!(
                "pause starts at {t0}, before the last event at {}",
                self.last_time
            )));
        }
        self.paused += t1 - t0;
        self.last_time = t1;
        self.entries.push(LogEntry::Pause { t0, t1 });
        Ok(())
    }

    pub fn fit(&self) -> Result<DirectionalFittsModel> {
        Ok(fit_bins_detailed(&self.samples, self.grid.key_width())?.model)
    }

    pub fn progress(&self) -> Progress {
        let fit = fit_bins_detailed(&self.samples, self.grid.key_width()).ok();
        let (per_bin_r2, per_bin_n) = match &fit {
            Some(f) => (
                f.model.bins.iter().map(|b| b.fitted.then_some(b.r_squared)).collect(),
                f.model.bins.iter().map(|b| b.n_samples).collect(),
            ),
            None => (vec![None; N_BINS], vec![0; N_BINS]),
        };
        Progress {
            presented: self.presented,
            cap: TARGET_CAP,
            phase: self.phase,
            per_bin_r2,
            per_bin_n,
        }
    }

    /// Appends demands for weak bins and unrepresented outliers, or completes.
    ///
    /// Only valid between rounds, i.e. with an empty queue and no outstanding target.
    pub fn refine(&mut self) -> Result<()> {
        if self.phase == Phase::Complete {
            return Ok(());
        }
        if self.outstanding.is_some() || !self.queue.is_empty() {
            return Err(Error::InvalidState("refinement runs only between rounds".into()));
        }
        let budget = TARGET_CAP.saturating_sub(self.presented);
        if budget == 0 {
            self.phase = Phase::Complete;
            return Ok(());
        }

        let mut batch: Vec<Pending> = Vec::new();
        let mut weak: Vec<(usize, usize)> = Vec::new();
        match fit_bins_detailed(&self.samples, self.grid.key_width()) {
            Ok(fit) => {
                for &i in &fit.outliers {
                    if !self.represented.contains(&i) {
                        let s = &self.samples[i];
                        let mut p = Pending::fresh(TargetDemand::new(s.distance_class, s.bin() as u8));
                        p.represents = Some(i);
                        batch.push(p);
                    }
                }
                for b in &fit.model.bins {
                    if !b.fitted || b.r_squared <= R2_THRESHOLD || b.n_samples < MIN_BIN_SAMPLES {
                        weak.push((b.index, b.n_samples));
                    }
                }
            }
            Err(_) => weak.extend((0..N_BINS).map(|b| (b, 0))),
        }

        // one pass over classes 1..=8 per weak bin, more if the bin is short of samples
        let per_bin: Vec<Vec<TargetDemand>> = weak
            .iter()
            .map(|&(bin, n)| {
                let classes: Vec<u8> = (1..=MAX_CLASS)
                    .filter(|&k| self.reach.pair_exists(k, bin as u8))
                    .collect();
                if classes.is_empty() {
                    return vec![TargetDemand::new(1, bin as u8)];
                }
                let want = (MAX_CLASS as usize).max(MIN_BIN_SAMPLES.saturating_sub(n));
                (0..want)
                    .map(|i| TargetDemand::new(classes[i % classes.len()], bin as u8))
                    .collect()
            })
            .collect();
        let longest = per_bin.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..longest {
            for demands in &per_bin {
                if let Some(&d) = demands.get(i) {
                    batch.push(Pending::fresh(d));
                }
            }
        }

        batch.truncate(budget);
        self.represented.extend(batch.iter().filter_map(|p| p.represents));
        if batch.is_empty() {
            self.phase = Phase::Complete;
            return Ok(());
        }
        use rand::seq::SliceRandom;
        batch.shuffle(&mut self.rng);
        self.queue.extend(batch);
        self.phase = Phase::Refining;
        self.round_issued = 0;
        self.round_dropped.clear();
        Ok(())
    }

    /// Issues the next target, refining between rounds, or completes the session.
    fn advance(&mut self) {
        debug_assert!(self.outstanding.is_none());
        while self.phase != Phase::Complete {
            if self.presented >= TARGET_CAP {
                self.queue.clear();
                self.phase = Phase::Complete;
                break;
            }
            if self.queue.is_empty() {
                if self.round_issued == 0 && !self.round_dropped.is_empty() {
                    // a whole round with nothing presentable; another round cannot do better
                    let dropped = std::mem::take(&mut self.round_dropped);
                    log::warn!("characterization stalled; {} demand(s) unreachable", dropped.len());
                    self.stalled = Some(dropped);
                    self.phase = Phase::Complete;
                    break;
                }
                self.refine().expect("between rounds");
                continue;
            }
            if self.try_issue() {
                break;
            }
        }
    }

    /// One scheduling step. Returns true when a target was issued.
    fn try_issue(&mut self) -> bool {
        let head = *self.queue.front().expect("nonempty queue");
        let here = self.current;

        if self.reach.is_feasible(here, head.demand) {
            self.queue.pop_front();
            let candidates = self.reach.targets(here, head.demand);
            let target = match self.queue.front().map(|p| p.demand) {
                Some(next) if next.distance_class > 0 && head.demand.distance_class > 0 => {
                    let steering: Vec<usize> = candidates
                        .iter()
                        .copied()
                        .filter(|&c| self.reach.is_feasible(c, next))
                        .collect();
                    let pool = if steering.is_empty() { candidates } else { &steering[..] };
                    *pool.choose(&mut self.rng).expect("feasible")
                }
                _ => *candidates.choose(&mut self.rng).expect("feasible"),
            };
            self.issue(head.demand, target);
            return true;
        }

        // bridge: a later demand that lands somewhere the head becomes reachable from
        for i in 1..self.queue.len() {
            let d = self.queue[i].demand;
            if d.distance_class == 0 {
                continue;
            }
            let bridges: Vec<usize> = self
                .reach
                .targets(here, d)
                .iter()
                .copied()
                .filter(|&c| self.reach.is_feasible(c, head.demand))
                .collect();
            if let Some(&target) = bridges.choose(&mut self.rng) {
                self.queue.remove(i);
                self.issue(d, target);
                return true;
            }
        }

        self.queue.pop_front();
        if head.deferrals >= MAX_DEFERRALS || self.queue.is_empty() {
            match self.reach.substitute(here, head.demand) {
                Some(sub) => {
                    log::debug!("substituting {sub:?} for unreachable {:?}", head.demand);
                    self.queue.push_front(Pending { demand: sub, ..head });
                }
                None => {
                    log::warn!("dropping unreachable demand {:?}", head.demand);
                    self.round_dropped.push(head.demand);
                }
            }
        } else {
            let at = self.rng.random_range(1..=self.queue.len());
            self.queue.insert(
                at,
                Pending {
                    deferrals: head.deferrals + 1,
                    ..head
                },
            );
        }
        false
    }

    fn issue(&mut self, demand: TargetDemand, target: usize) {
        self.outstanding = Some(Outstanding {
            demand,
            target,
            origin: self.current,
        });
        self.presented += 1;
        self.round_issued += 1;
    }
}
