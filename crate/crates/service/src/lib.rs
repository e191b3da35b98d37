//! Local HTTP service for characterization sessions, layout generation and
//! typing trials.
//!
//! Every session mutation is appended to `sessions/{id}.ndjson` and synced
//! before the response goes out; on startup the logs are replayed, so a
//! restarted service picks up exactly where the old one stopped.

mod api;
mod store;
mod trial;

pub use api::router;
pub use store::Store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::Context;
use hexkey_core::charact::{CharacterizationSession, SessionLog};
use hexkey_core::KeyboardLayout;

use trial::TrialRecord;

pub type Shared<T> = Arc<tokio::sync::Mutex<T>>;

pub struct SessionRecord {
    pub session: CharacterizationSession,
}

/// Everything the handlers share.
pub struct AppState {
    store: Store,
    sessions: Mutex<HashMap<String, Shared<SessionRecord>>>,
    trials: Mutex<HashMap<String, Shared<TrialRecord>>>,
    // serializes id allocation for new files
    ids: Mutex<IdCounters>,
}

struct IdCounters {
    session: u64,
    layout: u64,
    trial: u64,
}

impl AppState {
    /// Opens (or creates) a data directory and replays every session log in it.
    pub fn open(data_dir: impl Into<PathBuf>) -> anyhow::Result<AppState> {
        let store = Store::open(data_dir)?;
        let mut sessions = HashMap::new();
        let session_ids = store.list(store::SESSIONS, "ndjson")?;
        for id in &session_ids {
            let text = store.read(store::SESSIONS, id, "ndjson")?;
            let log = SessionLog::parse(&text).with_context(|| format!("session {id}"))?;
            let session = CharacterizationSession::replay(&log).with_context(|| format!("replaying session {id}"))?;
            sessions.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(SessionRecord { session })));
        }
        let mut trials = HashMap::new();
        let trial_ids = store.list(store::TRIALS, "ndjson")?;
        for id in &trial_ids {
            let text = store.read(store::TRIALS, id, "ndjson")?;
            let record = TrialRecord::parse(&text, |layout_id| {
                let doc = store.read(store::LAYOUTS, layout_id, "json")?;
                Ok(KeyboardLayout::from_json(&doc)?)
            })
            .with_context(|| format!("trial {id}"))?;
            trials.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(record)));
        }
        let layout_ids = store.list(store::LAYOUTS, "json")?;
        if !session_ids.is_empty() {
            log::info!(
                "replayed {} session(s) from {}",
                session_ids.len(),
                store.root().display()
            );
        }
        Ok(AppState {
            ids: Mutex::new(IdCounters {
                session: store::next_id("s", &session_ids),
                layout: store::next_id("l", &layout_ids),
                trial: store::next_id("t", &trial_ids),
            }),
            store,
            sessions: Mutex::new(sessions),
            trials: Mutex::new(trials),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn next_id(&self, kind: char) -> String {
        let mut ids = self.ids.lock().expect("id lock");
        let counter = match kind {
            's' => &mut ids.session,
            'l' => &mut ids.layout,
            _ => &mut ids.trial,
        };
        let id = format!("{kind}{:06}", *counter);
        *counter += 1;
        id
    }

    fn session(&self, id: &str) -> Option<Shared<SessionRecord>> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }

    fn trial(&self, id: &str) -> Option<Shared<TrialRecord>> {
        self.trials.lock().expect("trial map").get(id).cloned()
    }
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> anyhow::Result<()> {
    let state = Arc::new(AppState::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
