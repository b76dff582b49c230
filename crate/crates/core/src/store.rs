//! On-disk layout under the data directory:
//!
//! ```text
//! sessions/<session_id>/events.jsonl     append-only event log
//! sessions/<session_id>/snapshot.json    cached state, rebuilt from the log
//! sessions/<session_id>/images/<job>.png generated images
//! jobs/<job_id>.json                     finished image jobs
//! cards/<card_id>.json                   recorded word cards
//! cards/<card_id>.png                    the card's image
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::card::WordCard;
use crate::error::{Error, Result};
use crate::session::{LearningSession, SessionEvent};

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn safe_id(id: &str) -> Result<&str> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(id)
    } else {
        Err(Error::InvalidArgument(format!("malformed id `{id}`")))
    }
}

/// Writes through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

impl Store {
    /// Creates the layout and checks that the directory is writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let fail = |e: std::io::Error| {
            Error::Config(format!("data directory {} is not usable: {e}", root.display()))
        };
        for sub in ["sessions", "cards", "jobs"] {
            fs::create_dir_all(root.join(sub)).map_err(fail)?;
        }
        let probe = root.join(".write-probe");
        fs::write(&probe, b"ok").map_err(fail)?;
        fs::remove_file(&probe).map_err(fail)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, session_id: &str) -> Result<PathBuf> {
        Ok(self.root.join("sessions").join(safe_id(session_id)?))
    }

    pub fn session_ids(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("events.jsonl").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn append_events(&self, session_id: &str, events: &[SessionEvent]) -> Result<()> {
        let dir = self.session_dir(session_id)?;
        fs::create_dir_all(&dir)?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("events.jsonl"))?;
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    pub fn load_events(&self, session_id: &str) -> Result<Vec<SessionEvent>> {
        let path = self.session_dir(session_id)?.join("events.jsonl");
        if !path.is_file() {
            return Err(Error::UnknownSession(session_id.to_string()));
        }
        fs::read_to_string(&path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    pub fn write_snapshot(&self, session: &LearningSession) -> Result<()> {
        let dir = self.session_dir(&session.session_id)?;
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("snapshot.json"), &serde_json::to_vec_pretty(session)?)
    }

    /// Stores an image and returns its path relative to the data directory.
    pub fn write_session_image(&self, session_id: &str, job_id: &str, bytes: &[u8]) -> Result<String> {
        let dir = self.session_dir(session_id)?.join("images");
        fs::create_dir_all(&dir)?;
        let name = format!("{}.png", safe_id(job_id)?);
        write_atomic(&dir.join(&name), bytes)?;
        Ok(format!("sessions/{session_id}/images/{name}"))
    }

    /// Absolute path of a stored relative reference.
    pub fn resolve(&self, rel: &str) -> Result<PathBuf> {
        let path = Path::new(rel);
        if path.is_absolute() || path.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Error::InvalidArgument(format!("bad reference `{rel}`")));
        }
        Ok(self.root.join(path))
    }

    pub fn read_ref(&self, rel: &str) -> Result<Vec<u8>> {
        Ok(fs::read(self.resolve(rel)?)?)
    }

    pub fn write_job<T: Serialize>(&self, job_id: &str, job: &T) -> Result<()> {
        let path = self.root.join("jobs").join(format!("{}.json", safe_id(job_id)?));
        write_atomic(&path, &serde_json::to_vec_pretty(job)?)
    }

    pub fn read_job<T: DeserializeOwned>(&self, job_id: &str) -> Result<Option<T>> {
        let path = self.root.join("jobs").join(format!("{}.json", safe_id(job_id)?));
        if path.is_file() {
            read_json(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn job_ids(&self) -> Result<Vec<String>> {
        Ok(fs::read_dir(self.root.join("jobs"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter_map(|n| n.strip_suffix(".json").map(str::to_string))
            .collect())
    }

    /// Persists a card and its image. Cards are never overwritten.
    pub fn write_card(&self, card: &WordCard, image: Option<&[u8]>) -> Result<()> {
        let dir = self.root.join("cards");
        let id = safe_id(&card.card_id)?;
        let json_path = dir.join(format!("{id}.json"));
        if json_path.exists() {
            return Err(Error::SessionClosed);
        }
        if let Some(bytes) = image {
            write_atomic(&dir.join(format!("{id}.png")), bytes)?;
        }
        write_atomic(&json_path, &serde_json::to_vec_pretty(card)?)
    }

    pub fn read_card(&self, card_id: &str) -> Result<WordCard> {
        let path = self.root.join("cards").join(format!("{}.json", safe_id(card_id)?));
        if !path.is_file() {
            return Err(Error::UnknownWordCard(card_id.to_string()));
        }
        read_json(&path)
    }

    pub fn card_bytes(&self, card_id: &str) -> Result<Vec<u8>> {
        let path = self.root.join("cards").join(format!("{}.json", safe_id(card_id)?));
        fs::read(&path).map_err(|_| Error::UnknownWordCard(card_id.to_string()))
    }

    pub fn card_image_path(&self, card_id: &str) -> Result<PathBuf> {
        let path = self.root.join("cards").join(format!("{}.png", safe_id(card_id)?));
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::NoImage)
        }
    }

    /// All cards, newest first.
    pub fn list_cards(&self) -> Result<Vec<WordCard>> {
        let mut cards: Vec<WordCard> = fs::read_dir(self.root.join("cards"))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .map(|p| read_json(&p))
            .collect::<Result<_>>()?;
        cards.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| b.card_id.cmp(&a.card_id)));
        Ok(cards)
    }
}
