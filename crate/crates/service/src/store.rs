//! Child profiles and game progress, persisted as one append-only JSON-lines
//! event log per child plus a compacted snapshot.
//!
//! Layout: `<data_dir>/children/<child_id>/events.jsonl` and `snapshot.json`.
//! Every event carries a sequence number; the snapshot records the last one
//! it includes, so replay after a crash between snapshot and log truncation
//! never double-applies an attempt.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use arpa_core::dataset::Label;
use arpa_core::fsutil::atomic_write;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

const SNAPSHOT_VERSION: u32 = 1;
pub const MIN_AGE: u32 = 3;
pub const MAX_AGE: u32 = 12;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardianRole {
    Parent,
    Therapist,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewChild {
    pub display_name: String,
    pub age_years: u32,
    #[serde(default)]
    pub gender: Gender,
    pub guardian_role: GuardianRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildProfile {
    pub child_id: String,
    pub display_name: String,
    pub age_years: u32,
    pub gender: Gender,
    pub guardian_role: GuardianRole,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub timestamp: DateTime<Utc>,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub child_id: String,
    pub letter_id: String,
    pub level: u64,
    pub history: Vec<Attempt>,
}

/// A correct attempt moves up one level; an incorrect one stays put.
pub fn next_level(level: u64, label: Label) -> u64 {
    match label {
        Label::Correct => level + 1,
        Label::Incorrect => level,
    }
}

pub fn replay_level(history: &[Attempt]) -> u64 {
    history.iter().fold(0, |lvl, a| next_level(lvl, a.label))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Registered { seq: u64, profile: ChildProfile },
    Attempt { seq: u64, letter_id: String, attempt: Attempt },
}

impl Event {
    fn seq(&self) -> u64 {
        match self {
            Event::Registered { seq, .. } | Event::Attempt { seq, .. } => *seq,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    last_seq: u64,
    profile: ChildProfile,
    progress: Vec<ProgressRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error("a child named {0:?} is already registered by this guardian")]
    Duplicate(String),
    #[error("unknown child {0:?}")]
    UnknownChild(String),
    #[error("storage failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

impl From<arpa_core::Error> for StoreError {
    fn from(e: arpa_core::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

struct ChildState {
    dir: PathBuf,
    profile: ChildProfile,
    progress: BTreeMap<String, ProgressRecord>,
    last_seq: u64,
}

impl ChildState {
    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(event).expect("event serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join("events.jsonl"))?;
        f.write_all(&line)?;
        f.sync_data()?;
        self.last_seq = event.seq();
        Ok(())
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::Registered { seq, profile } => {
                self.profile = profile;
                self.last_seq = seq;
            }
            Event::Attempt { seq, letter_id, attempt } => {
                let child_id = self.profile.child_id.clone();
                let rec = self
                    .progress
                    .entry(letter_id.clone())
                    .or_insert_with(|| ProgressRecord {
                        child_id,
                        letter_id,
                        level: 0,
                        history: Vec::new(),
                    });
                rec.level = next_level(rec.level, attempt.label);
                rec.history.push(attempt);
                self.last_seq = seq;
            }
        }
    }

    fn compact(&self) -> Result<(), StoreError> {
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            last_seq: self.last_seq,
            profile: self.profile.clone(),
            progress: self.progress.values().cloned().collect(),
        };
        let bytes = serde_json::to_vec_pretty(&snap).expect("snapshot serializes");
        atomic_write(&self.dir.join("snapshot.json"), &bytes)?;
        atomic_write(&self.dir.join("events.jsonl"), b"")?;
        Ok(())
    }

    fn load(dir: &Path) -> Result<Option<Self>, StoreError> {
        let mut state: Option<ChildState> = None;
        let snap_path = dir.join("snapshot.json");
        if snap_path.exists() {
            let text = std::fs::read_to_string(&snap_path)?;
            let snap: Snapshot =
                serde_json::from_str(&text).map_err(|e| StoreError::Io(format!("{}: {e}", snap_path.display())))?;
            state = Some(ChildState {
                dir: dir.to_path_buf(),
                progress: snap
                    .progress
                    .into_iter()
                    .map(|r| (r.letter_id.clone(), r))
                    .collect(),
                profile: snap.profile,
                last_seq: snap.last_seq,
            });
        }
        let log = match std::fs::read_to_string(dir.join("events.jsonl")) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<&str> = log.lines().filter(|l| !l.trim().is_empty()).collect();
        for (i, line) in lines.iter().enumerate() {
            let event: Event = match serde_json::from_str(line) {
                Ok(ev) => ev,
                Err(e) if i + 1 == lines.len() => {
                    tracing::warn!(dir = %dir.display(), error = %e, "dropping torn final log line");
                    let mut kept = lines[..i].join("\n");
                    if !kept.is_empty() {
                        kept.push('\n');
                    }
                    atomic_write(&dir.join("events.jsonl"), kept.as_bytes())?;
                    break;
                }
                Err(e) => return Err(StoreError::Io(format!("{}: line {}: {e}", dir.display(), i + 1))),
            };
            match (&mut state, event) {
                (Some(s), ev) if ev.seq() > s.last_seq => s.apply(ev),
                (Some(_), _) => {}
                (None, Event::Registered { seq, profile }) => {
                    state = Some(ChildState {
                        dir: dir.to_path_buf(),
                        profile,
                        progress: BTreeMap::new(),
                        last_seq: seq,
                    });
                }
                (None, Event::Attempt { .. }) => {
                    return Err(StoreError::Io(format!("{}: attempt before registration", dir.display())));
                }
            }
        }
        Ok(state)
    }
}

pub struct Store {
    root: PathBuf,
    clock: Arc<dyn Clock>,
    register_lock: Mutex<()>,
    children: RwLock<BTreeMap<String, Arc<Mutex<ChildState>>>>,
}

impl Store {
    pub fn open(data_dir: &Path, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let root = data_dir.join("children");
        std::fs::create_dir_all(&root)?;
        let mut children = BTreeMap::new();
        for entry in std::fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            match ChildState::load(&dir)? {
                Some(state) => {
                    children.insert(state.profile.child_id.clone(), Arc::new(Mutex::new(state)));
                }
                None => tracing::warn!(dir = %dir.display(), "skipping child directory without records"),
            }
        }
        Ok(Self {
            root,
            clock,
            register_lock: Mutex::new(()),
            children: RwLock::new(children),
        })
    }

    fn child(&self, child_id: &str) -> Option<Arc<Mutex<ChildState>>> {
        self.children.read().expect("store lock").get(child_id).cloned()
    }

    pub fn contains(&self, child_id: &str) -> bool {
        self.child(child_id).is_some()
    }

    pub fn register(&self, new: NewChild) -> Result<ChildProfile, StoreError> {
        let name = new.display_name.trim().to_string();
        if name.is_empty() || name.chars().count() > 64 {
            return Err(StoreError::Invalid("display_name must be 1 to 64 characters".into()));
        }
        if !(MIN_AGE..=MAX_AGE).contains(&new.age_years) {
            return Err(StoreError::Invalid(format!(
                "age_years must lie in {MIN_AGE}..={MAX_AGE}, got {}",
                new.age_years
            )));
        }
        let _guard = self.register_lock.lock().expect("register lock");
        let taken = self.children.read().expect("store lock").values().any(|c| {
            let c = c.lock().expect("child lock");
            c.profile.display_name == name && c.profile.guardian_role == new.guardian_role
        });
        if taken {
            return Err(StoreError::Duplicate(name));
        }
        let profile = ChildProfile {
            child_id: uuid::Uuid::new_v4().simple().to_string(),
            display_name: name,
            age_years: new.age_years,
            gender: new.gender,
            guardian_role: new.guardian_role,
            created_at: self.clock.now(),
        };
        let dir = self.root.join(&profile.child_id);
        std::fs::create_dir_all(&dir)?;
        let mut state = ChildState {
            dir,
            profile: profile.clone(),
            progress: BTreeMap::new(),
            last_seq: 0,
        };
        state.append(&Event::Registered {
            seq: 1,
            profile: profile.clone(),
        })?;
        self.children
            .write()
            .expect("store lock")
            .insert(profile.child_id.clone(), Arc::new(Mutex::new(state)));
        Ok(profile)
    }

    pub fn profile(&self, child_id: &str) -> Option<ChildProfile> {
        self.child(child_id)
            .map(|c| c.lock().expect("child lock").profile.clone())
    }

    /// Appends an attempt and applies the level rule. Timestamps within a
    /// record never go backwards even if the clock does.
    pub fn record_attempt(
        &self,
        child_id: &str,
        letter_id: &str,
        label: Label,
        score: f64,
    ) -> Result<ProgressRecord, StoreError> {
        let child = self
            .child(child_id)
            .ok_or_else(|| StoreError::UnknownChild(child_id.to_string()))?;
        let mut state = child.lock().expect("child lock");
        let mut timestamp = self.clock.now();
        if let Some(last) = state
            .progress
            .get(letter_id)
            .and_then(|r| r.history.last())
        {
            timestamp = timestamp.max(last.timestamp);
        }
        let event = Event::Attempt {
            seq: state.last_seq + 1,
            letter_id: letter_id.to_string(),
            attempt: Attempt { timestamp, label, score },
        };
        state.append(&event)?;
        state.apply(event);
        Ok(state.progress[letter_id].clone())
    }

    /// All progress records of a child, ordered by letter.
    pub fn progress(&self, child_id: &str) -> Option<Vec<ProgressRecord>> {
        self.child(child_id).map(|c| {
            c.lock()
                .expect("child lock")
                .progress
                .values()
                .cloned()
                .collect()
        })
    }

    pub fn child_ids(&self) -> Vec<String> {
        self.children.read().expect("store lock").keys().cloned().collect()
    }

    /// Writes a snapshot for every child and truncates the event logs.
    pub fn compact(&self) -> Result<(), StoreError> {
        let children: Vec<_> = self.children.read().expect("store lock").values().cloned().collect();
        for child in children {
            child.lock().expect("child lock").compact()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicI64, Ordering};

    /// Advances one second per call from a fixed epoch.
    struct StepClock(AtomicI64);

    impl Clock for StepClock {
        fn now(&self) -> DateTime<Utc> {
            DateTime::from_timestamp(1_700_000_000 + self.0.fetch_add(1, Ordering::SeqCst), 0).unwrap()
        }
    }

    struct BackwardsClock(AtomicI64);

    impl Clock for BackwardsClock {
        fn now(&self) -> DateTime<Utc> {
            DateTime::from_timestamp(1_700_000_000 - self.0.fetch_add(10, Ordering::SeqCst), 0).unwrap()
        }
    }

    fn kid(name: &str) -> NewChild {
        NewChild {
            display_name: name.into(),
            age_years: 6,
            gender: Gender::Unspecified,
            guardian_role: GuardianRole::Parent,
        }
    }

    fn open(dir: &Path) -> Store {
        Store::open(dir, Arc::new(StepClock(AtomicI64::new(0)))).unwrap()
    }

    #[test]
    fn registration_rules() {
        let dir = tempfile::tempdir().unwrap();
        let store = open(dir.path());
        store.register(kid("Lina")).unwrap();
        assert!(matches!(store.register(kid("Lina")), Err(StoreError::Duplicate(_))));
        let mut other = kid("Lina");
        other.guardian_role = GuardianRole::Therapist;
        store.register(other).unwrap();
        let mut old = kid("Omar");
        old.age_years = 99;
        assert!(matches!(store.register(old), Err(StoreError::Invalid(_))));
        assert!(matches!(store.register(kid("  ")), Err(StoreError::Invalid(_))));
    }

    #[test]
    fn level_rule_and_history() {
        let dir = tempfile::tempdir().unwrap();
        let store = open(dir.path());
        let id = store.register(kid("Sara")).unwrap().child_id;
        assert_eq!(store.progress(&id).unwrap(), vec![]);
        let script = [Label::Correct, Label::Incorrect, Label::Correct, Label::Incorrect, Label::Correct];
        for l in script {
            store.record_attempt(&id, "raa", l, 0.5).unwrap();
        }
        store.record_attempt(&id, "thaa", Label::Incorrect, 0.1).unwrap();
        let p = store.progress(&id).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].letter_id.as_str(), p[0].level, p[0].history.len()), ("raa", 3, 5));
        assert_eq!(p[1].level, 0);
        assert!(matches!(
            store.record_attempt("nobody", "raa", Label::Correct, 1.0),
            Err(StoreError::UnknownChild(_))
        ));
    }

    #[test]
    fn timestamps_never_decrease() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), Arc::new(BackwardsClock(AtomicI64::new(0)))).unwrap();
        let id = store.register(kid("Adam")).unwrap().child_id;
        for _ in 0..5 {
            store.record_attempt(&id, "raa", Label::Correct, 0.9).unwrap();
        }
        let h = &store.progress(&id).unwrap()[0].history;
        assert!(h.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn state_survives_reopen_with_and_without_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let id;
        let before;
        {
            let store = open(dir.path());
            id = store.register(kid("Huda")).unwrap().child_id;
            for i in 0..7 {
                let l = if i % 3 == 0 { Label::Incorrect } else { Label::Correct };
                store.record_attempt(&id, "ghaa", l, 0.25 * (i % 4) as f64).unwrap();
            }
            before = store.progress(&id).unwrap();
        }
        let store = open(dir.path());
        assert_eq!(store.progress(&id).unwrap(), before);
        store.compact().unwrap();
        store.record_attempt(&id, "ghaa", Label::Correct, 1.0).unwrap();
        let after = store.progress(&id).unwrap();
        drop(store);
        let store = open(dir.path());
        assert_eq!(store.progress(&id).unwrap(), after);
        assert_eq!(after[0].level, replay_level(&after[0].history));
    }

    #[test]
    fn snapshot_plus_stale_log_is_not_double_applied() {
        let dir = tempfile::tempdir().unwrap();
        let store = open(dir.path());
        let id = store.register(kid("Yusuf")).unwrap().child_id;
        store.record_attempt(&id, "raa", Label::Correct, 1.0).unwrap();
        let log = std::fs::read(dir.path().join("children").join(&id).join("events.jsonl")).unwrap();
        store.compact().unwrap();
        drop(store);
        // a crash between writing the snapshot and truncating the log
        std::fs::write(dir.path().join("children").join(&id).join("events.jsonl"), log).unwrap();
        let store = open(dir.path());
        assert_eq!(store.progress(&id).unwrap()[0].level, 1);
    }

    #[test]
    fn torn_last_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let store = open(dir.path());
        let id = store.register(kid("Mona")).unwrap().child_id;
        store.record_attempt(&id, "raa", Label::Correct, 1.0).unwrap();
        drop(store);
        let path = dir.path().join("children").join(&id).join("events.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"attempt\",\"seq\":3,").unwrap();
        let store = open(dir.path());
        assert_eq!(store.progress(&id).unwrap()[0].history.len(), 1);
        store.record_attempt(&id, "raa", Label::Correct, 1.0).unwrap();
        drop(store);
        assert_eq!(open(dir.path()).progress(&id).unwrap()[0].level, 2);
    }
}
