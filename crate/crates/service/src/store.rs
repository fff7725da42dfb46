//! Session store: one engine per uploaded table, evicted after a TTL, optionally spilled to
//! disk as canonical CSV so sessions survive a restart.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant, SystemTime};

use tabqa_core::pipeline::Engine;
use tabqa_core::table::{load_table, DataTable, LoadOptions};

#[derive(Clone)]
pub struct Session {
    pub table_id: String,
    pub engine: Arc<Engine>,
    pub created_at: SystemTime,
    pub ttl: Duration,
    expires: Instant,
}

impl Session {
    pub fn is_expired(&self, now: Instant) -> bool {
        now >= self.expires
    }
}

pub struct SessionStore {
    ttl: Duration,
    spill: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Session>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl SessionStore {
    pub fn new(ttl: Duration, spill: Option<PathBuf>) -> SessionStore {
        SessionStore { ttl, spill, sessions: RwLock::new(HashMap::new()) }
    }

    fn spill_path(&self, id: &str) -> Option<PathBuf> {
        self.spill.as_deref().map(|d: &Path| d.join(format!("{id}.csv")))
    }

    fn open(&self, id: String, table: DataTable) -> Session {
        Session {
            table_id: id,
            engine: Arc::new(Engine::new(table)),
            created_at: SystemTime::now(),
            ttl: self.ttl,
            expires: Instant::now() + self.ttl,
        }
    }

    /// Registers a table under a fresh id.
    pub fn insert(&self, table: DataTable) -> std::io::Result<Session> {
        self.sweep();
        let id = uuid::Uuid::new_v4().simple().to_string();
        if let Some(path) = self.spill_path(&id) {
            std::fs::create_dir_all(path.parent().expect("spill file has a directory"))?;
            std::fs::write(&path, table.to_csv())?;
        }
        let s = self.open(id.clone(), table);
        self.sessions.write().expect("store lock").insert(id, s.clone());
        Ok(s)
    }

    /// A live session. Expired sessions are evicted; spilled ones are reloaded.
    pub fn get(&self, id: &str) -> Option<Session> {
        if !valid_id(id) {
            return None;
        }
        let now = Instant::now();
        let found = self.sessions.read().expect("store lock").get(id).cloned();
        match found {
            Some(s) if !s.is_expired(now) => Some(s),
            Some(_) => {
                self.evict(id);
                None
            }
            None => self.restore(id),
        }
    }

    fn restore(&self, id: &str) -> Option<Session> {
        let path = self.spill_path(id)?;
        let bytes = std::fs::read(path).ok()?;
        let table = load_table(&bytes, &LoadOptions::named(id)).ok()?;
        let s = self.open(id.to_string(), table);
        self.sessions.write().expect("store lock").insert(id.to_string(), s.clone());
        Some(s)
    }

    fn evict(&self, id: &str) {
        self.sessions.write().expect("store lock").remove(id);
        if let Some(p) = self.spill_path(id) {
            let _ = std::fs::remove_file(p);
        }
    }

    /// Evicts expired sessions and returns how many.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let expired: Vec<String> = self
            .sessions
            .read()
            .expect("store lock")
            .iter()
            .filter(|(_, s)| s.is_expired(now))
            .map(|(k, _)| k.clone())
            .collect();
        for id in &expired {
            self.evict(id);
        }
        expired.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
