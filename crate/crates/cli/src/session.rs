//! Per-client overlay storage.

use offroad_core::{AreaOverlay, PlanRequest, PlanResult};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredArea {
    pub id: String,
    #[serde(flatten)]
    pub area: AreaOverlay,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    /// In insertion order.
    pub areas: Vec<StoredArea>,
    next_id: u64,
    #[serde(default)]
    pub last_request: Option<PlanRequest>,
    #[serde(default)]
    pub last_result: Option<PlanResult>,
}

impl SessionState {
    pub fn new(id: &str) -> Self {
        SessionState {
            id: id.to_string(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, area: AreaOverlay) -> String {
        self.next_id += 1;
        let id = format!("a{}", self.next_id);
        self.areas.push(StoredArea { id: id.clone(), area });
        id
    }

    pub fn remove(&mut self, id: &str) -> bool {
        let n = self.areas.len();
        self.areas.retain(|a| a.id != id);
        self.areas.len() != n
    }

    pub fn overlays(&self) -> Vec<AreaOverlay> {
        self.areas.iter().map(|a| a.area.clone()).collect()
    }
}

pub type SharedSession = Arc<Mutex<SessionState>>;

/// All sessions, optionally mirrored to a JSON snapshot file.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, SharedSession>>,
    snapshot: Option<PathBuf>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Restores sessions from `path` if it exists; later changes are saved
    /// back to it.
    pub fn with_snapshot(path: &Path) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        if path.exists() {
            let list: Vec<SessionState> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            for s in list {
                sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(SessionStore {
            sessions: Mutex::new(sessions),
            snapshot: Some(path.to_path_buf()),
        })
    }

    pub fn get(&self, id: &str) -> SharedSession {
        let mut map = self.sessions.lock().expect("session map poisoned");
        map.entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(SessionState::new(id))))
            .clone()
    }

    /// Writes the snapshot file, if one is configured.
    pub fn persist(&self) -> std::io::Result<()> {
        let Some(path) = &self.snapshot else {
            return Ok(());
        };
        let handles: Vec<SharedSession> = self.sessions.lock().expect("session map poisoned").values().cloned().collect();
        let mut list: Vec<SessionState> = handles.iter().map(|s| s.lock().expect("session poisoned").clone()).collect();
        list.sort_by(|a, b| a.id.cmp(&b.id));
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&list)?)?;
        std::fs::rename(tmp, path)
    }
}
