//! The application facade: sessions, suggestions, image jobs and cards
//! over a data directory.
//!
//! Each session has one writer at a time. Provider calls for a session are
//! serialized by a second lock so edits can continue while a suggestion is
//! in flight.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::canvas::{build_image_request, derive_recall_path, BBox, CanvasElement, CanvasRelation, RecallPath, StyleRegistry};
use crate::card::WordCard;
use crate::clock::{Clock, SystemClock};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::gateway::provider::{Provider, ProviderMode};
use crate::gateway::template::TemplateId;
use crate::gateway::validate::ConceptSuggestion;
use crate::gateway::Gateway;
use crate::jobs::{ImageJob, JobFailure, JobState, WorkerPool};
use crate::keywords::{KeywordBatch, KeywordChoice, KeywordSource, Origin, Segment, SemanticNode};
use crate::lexicon::{Lexicon, WordEntry};
use crate::map::AssociationLink;
use crate::profile::LanguageProfile;
use crate::session::{ImageRecord, LearningSession, SessionEvent, Stage};
use crate::store::Store;
use crate::suggest;

/// Bundled word list.
pub const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub mode: ProviderMode,
    pub profile: String,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSemanticNode {
    pub anchor_id: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    pub concept: String,
    #[serde(default)]
    pub cue: String,
    #[serde(default)]
    pub translation: String,
    #[serde(default = "user_origin")]
    pub origin: Origin,
}

fn user_origin() -> Origin {
    Origin::User
}

struct Slot {
    state: Mutex<LearningSession>,
    provider: Mutex<()>,
}

#[derive(Default)]
struct Jobs {
    by_id: BTreeMap<String, ImageJob>,
}

struct Inner {
    lexicon: Lexicon,
    gateway: Gateway,
    styles: StyleRegistry,
    store: Store,
    clock: Arc<dyn Clock>,
    profile: LanguageProfile,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    session_seq: AtomicU64,
    jobs: Mutex<Jobs>,
    job_seq: AtomicU64,
    pool: WorkerPool,
}

#[derive(Clone)]
pub struct Wordcraft {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Wordcraft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wordcraft")
            .field("data_dir", &self.inner.store.root())
            .field("gateway", &self.inner.gateway)
            .finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn max_suffix(ids: &[String]) -> u64 {
    ids.iter()
        .filter_map(|id| id.rsplit('-').next()?.parse::<u64>().ok())
        .max()
        .unwrap_or(0)
}

/// The live provider named by `config`.
#[cfg(feature = "live")]
pub fn live_provider(config: &Config) -> Result<Arc<dyn Provider>> {
    Ok(Arc::new(crate::gateway::http::HttpProvider::from_config(&config.provider)?))
}

#[cfg(not(feature = "live"))]
pub fn live_provider(_config: &Config) -> Result<Arc<dyn Provider>> {
    Err(Error::Config("built without live provider support".into()))
}

impl Wordcraft {
    pub fn open(config: &Config, provider: Arc<dyn Provider>) -> Result<Self> {
        Self::open_with_clock(config, provider, Arc::new(SystemClock))
    }

    pub fn open_with_clock(config: &Config, provider: Arc<dyn Provider>, clock: Arc<dyn Clock>) -> Result<Self> {
        let profile = LanguageProfile::builtin(&config.profile)?;
        let lexicon = match &config.lexicon {
            Some(path) => Lexicon::load(path, &profile.ipa)?,
            None => Lexicon::parse(BUILTIN_LEXICON, &profile.ipa)?,
        };
        let mut provider_config = config.provider.clone();
        provider_config.profile = profile.id.clone();
        let mut gateway = Gateway::new(provider, config.templates()?, profile.clone(), provider_config);
        for (id, params) in config.generation_params()? {
            gateway = gateway.with_params(id, params)?;
        }
        let store = Store::open(&config.data_dir)?;
        let session_seq = max_suffix(&store.session_ids()?);
        let job_seq = max_suffix(&store.job_ids()?);
        Ok(Self {
            inner: Arc::new(Inner {
                lexicon,
                gateway,
                styles: config.style_registry(),
                store,
                clock,
                profile,
                sessions: Mutex::new(HashMap::new()),
                session_seq: AtomicU64::new(session_seq),
                jobs: Mutex::new(Jobs::default()),
                job_seq: AtomicU64::new(job_seq),
                pool: WorkerPool::new(config.workers),
            }),
        })
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            mode: self.inner.gateway.mode(),
            profile: self.inner.profile.id.clone(),
            words: self.inner.lexicon.len(),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.inner.gateway
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn styles(&self) -> &StyleRegistry {
        &self.inner.styles
    }

    fn now(&self) -> u64 {
        self.inner.clock.now_ms()
    }

    // Lexicon

    pub fn search_words(&self, query: &str, limit: usize) -> Vec<WordEntry> {
        let hits: Vec<&WordEntry> = if query.trim().is_empty() {
            self.inner.lexicon.iter().collect()
        } else {
            self.inner.lexicon.search(query)
        };
        hits.into_iter().take(limit).cloned().collect()
    }

    pub fn word(&self, word_id: &str) -> Result<WordEntry> {
        self.inner
            .lexicon
            .get(word_id)
            .or_else(|| self.inner.lexicon.by_surface(word_id))
            .cloned()
            .ok_or_else(|| Error::UnknownWord(word_id.to_string()))
    }

    // Sessions

    fn slot(&self, session_id: &str) -> Result<Arc<Slot>> {
        let mut sessions = lock(&self.inner.sessions);
        if let Some(slot) = sessions.get(session_id) {
            return Ok(Arc::clone(slot));
        }
        let events = self.inner.store.load_events(session_id)?;
        let session = LearningSession::replay(&events)?;
        let slot = Arc::new(Slot {
            state: Mutex::new(session),
            provider: Mutex::new(()),
        });
        sessions.insert(session_id.to_string(), Arc::clone(&slot));
        Ok(slot)
    }

    /// Runs `f` as the session's single writer and persists any new events.
    fn write<T>(&self, session_id: &str, f: impl FnOnce(&mut LearningSession, u64) -> Result<T>) -> Result<T> {
        let slot = self.slot(session_id)?;
        let mut session = lock(&slot.state);
        let before = session.events.len();
        let at = self.now();
        let out = f(&mut session, at)?;
        if session.events.len() > before {
            self.inner.store.append_events(session_id, &session.events[before..])?;
            self.inner.store.write_snapshot(&session)?;
        }
        Ok(out)
    }

    fn read<T>(&self, session_id: &str, f: impl FnOnce(&LearningSession) -> Result<T>) -> Result<T> {
        let slot = self.slot(session_id)?;
        let session = lock(&slot.state);
        f(&session)
    }

    pub fn create_session(&self, word_id: &str, sense_id: Option<&str>) -> Result<LearningSession> {
        let entry = self.word(word_id)?;
        let sense_id = match sense_id {
            Some(s) => s.to_string(),
            None => entry.senses[0].sense_id.clone(),
        };
        let n = self.inner.session_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let session_id = format!("s-{n:04}");
        let session = LearningSession::create(&session_id, &entry, &sense_id, &self.inner.profile, self.now())?;
        self.inner.store.append_events(&session_id, &session.events)?;
        self.inner.store.write_snapshot(&session)?;
        lock(&self.inner.sessions).insert(
            session_id,
            Arc::new(Slot {
                state: Mutex::new(session.clone()),
                provider: Mutex::new(()),
            }),
        );
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Result<LearningSession> {
        self.read(session_id, |s| Ok(s.clone()))
    }

    pub fn events(&self, session_id: &str) -> Result<Vec<SessionEvent>> {
        self.read(session_id, |s| Ok(s.events.clone()))
    }

    pub fn list_sessions(&self) -> Result<Vec<String>> {
        self.inner.store.session_ids()
    }

    pub fn goto_stage(&self, session_id: &str, stage: Stage) -> Result<LearningSession> {
        self.write(session_id, |s, at| {
            s.goto_stage(stage, at)?;
            Ok(s.clone())
        })
    }

    pub fn tick(&self, session_id: &str, delta_ms: u64) -> Result<u64> {
        self.write(session_id, |s, at| s.tick_active(delta_ms, at))
    }

    // Keyword selection

    pub fn brush_segment(&self, session_id: &str, start: usize, end: usize) -> Result<Segment> {
        self.write(session_id, |s, at| s.brush_segment(start, end, at))
    }

    pub fn clear_segments(&self, session_id: &str) -> Result<LearningSession> {
        self.write(session_id, |s, at| {
            s.clear_segments(at)?;
            Ok(s.clone())
        })
    }

    pub fn add_semantic_node(&self, session_id: &str, node: &NewSemanticNode) -> Result<SemanticNode> {
        self.write(session_id, |s, at| {
            s.add_semantic_node(
                &node.anchor_id,
                node.parent_id.as_deref(),
                &node.concept,
                &node.cue,
                &node.translation,
                node.origin,
                at,
            )
        })
    }

    /// A consistent copy of the session, taken while holding the provider
    /// lock so one session never has two provider calls in flight.
    fn with_provider<T>(&self, session_id: &str, f: impl FnOnce(&LearningSession) -> Result<T>) -> Result<T> {
        let slot = self.slot(session_id)?;
        let _turn = lock(&slot.provider);
        let snapshot = lock(&slot.state).clone();
        f(&snapshot)
    }

    pub fn suggest_semantic_nodes(&self, session_id: &str, anchor_id: &str, count: usize) -> Result<Vec<ConceptSuggestion>> {
        self.with_provider(session_id, |s| {
            suggest::suggest_semantic_nodes(s, &self.inner.gateway, anchor_id, count)
        })
    }

    /// Runs the two-stage pipeline and records the resulting batch.
    pub fn suggest_keywords(&self, session_id: &str, segment_id: &str, node_ids: &[String]) -> Result<KeywordBatch> {
        let slot = self.slot(session_id)?;
        let _turn = lock(&slot.provider);
        let snapshot = lock(&slot.state).clone();
        if snapshot.is_recorded() {
            return Err(Error::SessionClosed);
        }
        let cards = suggest::suggest_keywords(&snapshot, &self.inner.gateway, segment_id, node_ids)?;
        self.write(session_id, |s, at| s.record_keyword_batch(segment_id, node_ids.to_vec(), cards, at))
    }

    pub fn select_keyword(
        &self,
        session_id: &str,
        segment_id: &str,
        source: KeywordSource,
        chain_node_ids: Vec<String>,
    ) -> Result<KeywordChoice> {
        self.write(session_id, |s, at| s.select_keyword(segment_id, source, chain_node_ids, at))
    }

    pub fn replace_keyword(&self, session_id: &str, keyword_id: &str, source: KeywordSource) -> Result<KeywordChoice> {
        self.write(session_id, |s, at| s.propagate_keyword_change(keyword_id, source, at))
    }

    // Association map

    pub fn upsert_link(&self, session_id: &str, node_a: &str, node_b: &str) -> Result<AssociationLink> {
        self.write(session_id, |s, at| s.upsert_link(node_a, node_b, at))
    }

    pub fn delete_link(&self, session_id: &str, link_id: &str) -> Result<()> {
        self.write(session_id, |s, at| s.delete_link(link_id, at))
    }

    /// Sets the chain text and/or appends a note; both or neither may be given.
    pub fn update_link(
        &self,
        session_id: &str,
        link_id: &str,
        chain: Option<&str>,
        note: Option<&str>,
    ) -> Result<AssociationLink> {
        self.write(session_id, |s, at| {
            let snapshot = s.clone();
            let result = (|| {
                if let Some(text) = chain {
                    s.set_chain(link_id, text, at)?;
                }
                if let Some(text) = note {
                    s.add_note(link_id, text, at)?;
                }
                s.map
                    .link(link_id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownLink(link_id.to_string()))
            })();
            if result.is_err() {
                *s = snapshot;
            }
            result
        })
    }

    pub fn set_association(&self, session_id: &str, text: &str) -> Result<LearningSession> {
        self.write(session_id, |s, at| {
            s.set_association(text, at)?;
            Ok(s.clone())
        })
    }

    pub fn suggest_hints(&self, session_id: &str, link_id: &str) -> Result<Vec<String>> {
        self.with_provider(session_id, |s| suggest::suggest_hints(s, &self.inner.gateway, link_id))
    }

    // Canvas

    pub fn add_element(&self, session_id: &str, bbox: BBox, tags: Vec<String>, description: &str) -> Result<CanvasElement> {
        self.write(session_id, |s, at| s.add_element(bbox, tags, description, at))
    }

    pub fn update_element(
        &self,
        session_id: &str,
        element_id: &str,
        bbox: Option<BBox>,
        tags: Option<Vec<String>>,
        description: Option<String>,
    ) -> Result<CanvasElement> {
        self.write(session_id, |s, at| s.update_element(element_id, bbox, tags, description, at))
    }

    pub fn delete_element(&self, session_id: &str, element_id: &str) -> Result<()> {
        self.write(session_id, |s, at| s.delete_element(element_id, at))
    }

    pub fn add_relation(&self, session_id: &str, a: &str, b: &str, text: &str) -> Result<CanvasRelation> {
        self.write(session_id, |s, at| s.add_relation(a, b, text, at))
    }

    pub fn delete_relation(&self, session_id: &str, relation_id: &str) -> Result<()> {
        self.write(session_id, |s, at| s.delete_relation(relation_id, at))
    }

    pub fn suggest_visual_elements(&self, session_id: &str, node_ids: &[String]) -> Result<Vec<String>> {
        self.with_provider(session_id, |s| {
            suggest::suggest_visual_elements(s, &self.inner.gateway, node_ids)
        })
    }

    pub fn suggest_relations(&self, session_id: &str, a: &str, b: &str) -> Result<Vec<String>> {
        self.with_provider(session_id, |s| suggest::suggest_relations(s, &self.inner.gateway, a, b))
    }

    pub fn recall_path(&self, session_id: &str) -> Result<RecallPath> {
        self.read(session_id, |s| Ok(derive_recall_path(s)))
    }

    pub fn image_request(&self, session_id: &str, style: &str) -> Result<crate::canvas::ImageRequest> {
        let template = self.inner.gateway.templates().get(TemplateId::ImageCompose)?;
        self.read(session_id, |s| build_image_request(s, style, &self.inner.styles, template))
    }

    // Image jobs

    /// Starts an image job. A repeated idempotency key returns the job it
    /// first created.
    pub fn request_image(&self, session_id: &str, style: &str, idempotency_key: Option<&str>) -> Result<ImageJob> {
        let slot = self.slot(session_id)?;
        let session = lock(&slot.state);
        let mut jobs = lock(&self.inner.jobs);
        if let Some(key) = idempotency_key {
            if let Some(job) = jobs
                .by_id
                .values()
                .find(|j| j.session_id == session_id && j.idempotency_key.as_deref() == Some(key))
            {
                return Ok(job.clone());
            }
        }
        if session.is_recorded() {
            return Err(Error::SessionClosed);
        }
        if let Some(pending) = jobs
            .by_id
            .values()
            .find(|j| j.session_id == session_id && j.state == JobState::Pending)
        {
            return Err(Error::JobPending(pending.job_id.clone()));
        }
        let template = self.inner.gateway.templates().get(TemplateId::ImageCompose)?;
        let request = build_image_request(&session, style, &self.inner.styles, template)?;
        let n = self.inner.job_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let job = ImageJob {
            job_id: format!("job-{n:04}"),
            session_id: session_id.to_string(),
            style: request.style.clone(),
            state: JobState::Pending,
            idempotency_key: idempotency_key.map(str::to_string),
            image_ref: None,
            width: None,
            height: None,
            error: None,
            created_at: self.now(),
            finished_at: None,
        };
        jobs.by_id.insert(job.job_id.clone(), job.clone());
        drop(jobs);
        drop(session);
        let this = self.clone();
        let job_id = job.job_id.clone();
        self.inner.pool.submit(move || this.run_image_job(&job_id, request));
        Ok(self.job(&job.job_id).unwrap_or(job))
    }

    fn run_image_job(&self, job_id: &str, request: crate::canvas::ImageRequest) {
        let Some(job) = lock(&self.inner.jobs).by_id.get(job_id).cloned() else {
            return;
        };
        let outcome = self.inner.gateway.call_image(&request).and_then(|image| {
            let image_ref = self
                .inner
                .store
                .write_session_image(&job.session_id, job_id, &image.bytes)?;
            let record = ImageRecord {
                job_id: job_id.to_string(),
                image_ref: image_ref.clone(),
                style: job.style.clone(),
                width: image.width,
                height: image.height,
            };
            self.write(&job.session_id, |s, at| s.attach_image(record, at))?;
            Ok((image_ref, image.width, image.height))
        });
        let mut jobs = lock(&self.inner.jobs);
        let Some(entry) = jobs.by_id.get_mut(job_id) else {
            return;
        };
        entry.finished_at = Some(self.now());
        match outcome {
            Ok((image_ref, w, h)) => {
                entry.state = JobState::Done;
                entry.image_ref = Some(image_ref);
                entry.width = w;
                entry.height = h;
            }
            Err(e) => {
                tracing::warn!(job = job_id, error = %e, "image job failed");
                entry.state = JobState::Failed;
                entry.error = Some(JobFailure {
                    code: e.code().as_str().to_string(),
                    message: match e {
                        Error::ContentPolicy(m) => m,
                        other => other.to_string(),
                    },
                });
            }
        }
        let finished = entry.clone();
        drop(jobs);
        if let Err(e) = self.inner.store.write_job(job_id, &finished) {
            tracing::warn!(job = job_id, error = %e, "could not persist job");
        }
    }

    pub fn job(&self, job_id: &str) -> Result<ImageJob> {
        if let Some(job) = lock(&self.inner.jobs).by_id.get(job_id) {
            return Ok(job.clone());
        }
        self.inner
            .store
            .read_job(job_id)?
            .ok_or_else(|| Error::UnknownJob(job_id.to_string()))
    }

    /// Blocks until the job leaves the pending state or `timeout` passes.
    pub fn wait_for_job(&self, job_id: &str, timeout: std::time::Duration) -> Result<ImageJob> {
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let job = self.job(job_id)?;
            if job.state != JobState::Pending || std::time::Instant::now() >= deadline {
                return Ok(job);
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }

    // Word cards

    pub fn record_card(&self, session_id: &str, allow_no_image: bool) -> Result<WordCard> {
        let card_id = format!("card-{session_id}");
        self.write(session_id, |s, at| {
            let draft = {
                let mut d = s.clone();
                d.record(&card_id, allow_no_image, at)?;
                d
            };
            let card = WordCard::from_session(&draft)?;
            let image = match draft.latest_image() {
                Some(img) => Some(self.inner.store.read_ref(&img.image_ref)?),
                None => None,
            };
            self.inner.store.write_card(&card, image.as_deref())?;
            *s = draft;
            Ok(card)
        })
    }

    pub fn card(&self, card_id: &str) -> Result<WordCard> {
        self.inner.store.read_card(card_id)
    }

    /// The card exactly as stored.
    pub fn card_json(&self, card_id: &str) -> Result<Vec<u8>> {
        self.inner.store.card_bytes(card_id)
    }

    pub fn list_cards(&self) -> Result<Vec<WordCard>> {
        self.inner.store.list_cards()
    }

    pub fn card_image(&self, card_id: &str) -> Result<Vec<u8>> {
        Ok(std::fs::read(self.inner.store.card_image_path(card_id)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FixedClock;
    use crate::gateway::mock::{Fixture, MockProvider};

    fn open(dir: &std::path::Path, script: Vec<Fixture>) -> (Wordcraft, Arc<MockProvider>) {
        let mock = Arc::new(MockProvider::new(script));
        let config = Config {
            data_dir: dir.to_path_buf(),
            workers: 0,
            ..Config::default()
        };
        let app = Wordcraft::open_with_clock(&config, mock.clone(), Arc::new(FixedClock(7))).unwrap();
        (app, mock)
    }

    #[test]
    fn sessions_survive_restart() {
        let dir = tempfile::tempdir().unwrap();
        let (app, _) = open(dir.path(), vec![]);
        let s = app.create_session("labyrinth", Some("maze")).unwrap();
        app.brush_segment(&s.session_id, 0, 3).unwrap();
        let before = app.session(&s.session_id).unwrap();
        drop(app);
        let (app, _) = open(dir.path(), vec![]);
        assert_eq!(app.session(&s.session_id).unwrap(), before);
        let next = app.create_session("labyrinth", None).unwrap();
        assert_eq!(next.session_id, "s-0002");
        assert!(matches!(app.session("s-0099"), Err(Error::UnknownSession(_))));
    }

    #[test]
    fn update_link_is_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let (app, _) = open(dir.path(), vec![]);
        let s = app.create_session("labyrinth", Some("maze")).unwrap();
        let seg = app.brush_segment(&s.session_id, 0, 3).unwrap();
        let c = app
            .select_keyword(&s.session_id, &seg.segment_id, KeywordSource::User { keyword: "喇叭".into(), explanation: String::new() }, vec![])
            .unwrap();
        let link = app.session(&s.session_id).unwrap().map.links[0].link_id.clone();
        let before = app.session(&s.session_id).unwrap();
        assert!(app.update_link(&s.session_id, &link, Some("dizziness"), Some("  ")).is_err());
        assert_eq!(app.session(&s.session_id).unwrap(), before);
        let updated = app.update_link(&s.session_id, &link, Some("dizziness"), Some("note")).unwrap();
        assert_eq!(updated.chain.text, "dizziness");
        assert_eq!(updated.notes.len(), 1);
        assert!(c.node_id.starts_with("cn-"));
    }

    #[test]
    fn failed_image_job_leaves_session_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let (app, _) = open(dir.path(), vec![Fixture::Error("boom".into()), Fixture::Image(crate::gateway::mock::PLACEHOLDER_PNG.to_vec())]);
        let s = app.create_session("labyrinth", Some("maze")).unwrap();
        let maze = s.map.meaning_node().node_id.clone();
        app.add_element(&s.session_id, BBox::new(0.1, 0.1, 0.5, 0.5), vec![maze], "maze").unwrap();
        let before = app.session(&s.session_id).unwrap();
        let job = app.request_image(&s.session_id, "sketch", Some("k1")).unwrap();
        assert_eq!(job.state, JobState::Failed);
        assert_eq!(job.error.as_ref().unwrap().code, "PROVIDER_ERROR");
        assert_eq!(app.session(&s.session_id).unwrap(), before);
        let again = app.request_image(&s.session_id, "sketch", Some("k1")).unwrap();
        assert_eq!(again.job_id, job.job_id);
        let ok = app.request_image(&s.session_id, "sketch", Some("k2")).unwrap();
        assert_eq!(ok.state, JobState::Done);
        let rel = ok.image_ref.unwrap();
        assert!(app.store().resolve(&rel).unwrap().is_file());
        assert_eq!(app.session(&s.session_id).unwrap().images.len(), 1);
    }
}
