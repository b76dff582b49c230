//! Python bindings. Every operation goes through [`Api`], which speaks
//! JSON values; the Python layer converts those to and from native objects.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use wordcraft_core::gateway::mock::load_script;
use wordcraft_core::{
    BBox, Config, Error, FixedClock, KeywordSource, MockProvider, NewSemanticNode, Provider, Stage, Wordcraft,
};

/// Options for opening a service from Python.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub data_dir: PathBuf,
    pub config: Option<PathBuf>,
    pub profile: Option<String>,
    /// Serve scripted responses instead of calling a live model.
    pub mock: bool,
    pub script: Option<PathBuf>,
    /// Pins the clock so card timestamps are reproducible.
    pub fixed_clock_ms: Option<u64>,
    pub workers: Option<usize>,
}

/// JSON-in, JSON-out facade over [`Wordcraft`].
#[derive(Debug, Clone)]
pub struct Api {
    app: Wordcraft,
    mock: Option<Arc<MockProvider>>,
}

fn to_value<T: Serialize>(v: T) -> Result<Value, Error> {
    Ok(serde_json::to_value(v)?)
}

fn from_value<T: DeserializeOwned>(v: Value, what: &str) -> Result<T, Error> {
    serde_json::from_value(v).map_err(|e| Error::InvalidArgument(format!("{what}: {e}")))
}

impl Api {
    pub fn open(opts: &Options) -> Result<Self, Error> {
        let mut config = match &opts.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        config.data_dir = opts.data_dir.clone();
        if let Some(profile) = &opts.profile {
            config.profile = profile.clone();
        }
        if let Some(workers) = opts.workers {
            config.workers = workers;
        }
        let (provider, mock): (Arc<dyn Provider>, _) = if opts.mock {
            let script = match &opts.script {
                Some(path) => load_script(path)?,
                None => Vec::new(),
            };
            let mock = Arc::new(MockProvider::new(script));
            (mock.clone(), Some(mock))
        } else {
            config.provider = config.provider.with_env();
            (wordcraft_core::service::live_provider(&config)?, None)
        };
        let app = match opts.fixed_clock_ms {
            Some(ms) => Wordcraft::open_with_clock(&config, provider, Arc::new(FixedClock(ms)))?,
            None => Wordcraft::open(&config, provider)?,
        };
        Ok(Self { app, mock })
    }

    pub fn app(&self) -> &Wordcraft {
        &self.app
    }

    /// Fixtures left in the mock script, if a mock is in use.
    pub fn mock_remaining(&self) -> Option<usize> {
        self.mock.as_ref().map(|m| m.remaining())
    }

    pub fn search_words(&self, query: &str, limit: usize) -> Result<Value, Error> {
        to_value(self.app.search_words(query, limit))
    }

    pub fn create_session(&self, word_id: &str, sense_id: Option<&str>) -> Result<Value, Error> {
        to_value(self.app.create_session(word_id, sense_id)?)
    }

    pub fn session(&self, session_id: &str) -> Result<Value, Error> {
        to_value(self.app.session(session_id)?)
    }

    pub fn goto_stage(&self, session_id: &str, stage: &str) -> Result<Value, Error> {
        let stage: Stage = from_value(Value::String(stage.into()), "stage")?;
        to_value(self.app.goto_stage(session_id, stage)?)
    }

    pub fn tick(&self, session_id: &str, delta_ms: u64) -> Result<u64, Error> {
        self.app.tick(session_id, delta_ms)
    }

    pub fn brush_segment(&self, session_id: &str, start: usize, end: usize) -> Result<Value, Error> {
        to_value(self.app.brush_segment(session_id, start, end)?)
    }

    pub fn add_semantic_node(&self, session_id: &str, node: Value) -> Result<Value, Error> {
        let node: NewSemanticNode = from_value(node, "semantic node")?;
        to_value(self.app.add_semantic_node(session_id, &node)?)
    }

    pub fn suggest_semantic_nodes(&self, session_id: &str, anchor_id: &str, count: usize) -> Result<Value, Error> {
        to_value(self.app.suggest_semantic_nodes(session_id, anchor_id, count)?)
    }

    pub fn suggest_keywords(&self, session_id: &str, segment_id: &str, node_ids: &[String]) -> Result<Value, Error> {
        to_value(self.app.suggest_keywords(session_id, segment_id, node_ids)?)
    }

    pub fn select_keyword(
        &self,
        session_id: &str,
        segment_id: &str,
        source: Value,
        chain_node_ids: Vec<String>,
    ) -> Result<Value, Error> {
        let source: KeywordSource = from_value(source, "keyword source")?;
        to_value(self.app.select_keyword(session_id, segment_id, source, chain_node_ids)?)
    }

    pub fn upsert_link(&self, session_id: &str, node_a: &str, node_b: &str) -> Result<Value, Error> {
        to_value(self.app.upsert_link(session_id, node_a, node_b)?)
    }

    pub fn update_link(
        &self,
        session_id: &str,
        link_id: &str,
        chain: Option<&str>,
        note: Option<&str>,
    ) -> Result<Value, Error> {
        to_value(self.app.update_link(session_id, link_id, chain, note)?)
    }

    pub fn set_association(&self, session_id: &str, text: &str) -> Result<Value, Error> {
        to_value(self.app.set_association(session_id, text)?)
    }

    pub fn suggest_hints(&self, session_id: &str, link_id: &str) -> Result<Value, Error> {
        to_value(self.app.suggest_hints(session_id, link_id)?)
    }

    pub fn add_element(&self, session_id: &str, bbox: Value, tags: Vec<String>, description: &str) -> Result<Value, Error> {
        let bbox: BBox = from_value(bbox, "bbox")?;
        to_value(self.app.add_element(session_id, bbox, tags, description)?)
    }

    pub fn update_element(
        &self,
        session_id: &str,
        element_id: &str,
        bbox: Option<Value>,
        tags: Option<Vec<String>>,
        description: Option<String>,
    ) -> Result<Value, Error> {
        let bbox = bbox.map(|b| from_value::<BBox>(b, "bbox")).transpose()?;
        to_value(self.app.update_element(session_id, element_id, bbox, tags, description)?)
    }

    pub fn add_relation(&self, session_id: &str, a: &str, b: &str, text: &str) -> Result<Value, Error> {
        to_value(self.app.add_relation(session_id, a, b, text)?)
    }

    pub fn suggest_visual_elements(&self, session_id: &str, node_ids: &[String]) -> Result<Value, Error> {
        to_value(self.app.suggest_visual_elements(session_id, node_ids)?)
    }

    pub fn suggest_relations(&self, session_id: &str, a: &str, b: &str) -> Result<Value, Error> {
        to_value(self.app.suggest_relations(session_id, a, b)?)
    }

    pub fn recall_path(&self, session_id: &str) -> Result<Value, Error> {
        to_value(self.app.recall_path(session_id)?)
    }

    pub fn image_request(&self, session_id: &str, style: &str) -> Result<Value, Error> {
        to_value(self.app.image_request(session_id, style)?)
    }

    pub fn request_image(&self, session_id: &str, style: &str, idempotency_key: Option<&str>) -> Result<Value, Error> {
        to_value(self.app.request_image(session_id, style, idempotency_key)?)
    }

    pub fn job(&self, job_id: &str) -> Result<Value, Error> {
        to_value(self.app.job(job_id)?)
    }

    pub fn wait_for_job(&self, job_id: &str, timeout: Duration) -> Result<Value, Error> {
        to_value(self.app.wait_for_job(job_id, timeout)?)
    }

    pub fn record_card(&self, session_id: &str, allow_no_image: bool) -> Result<Value, Error> {
        to_value(self.app.record_card(session_id, allow_no_image)?)
    }

    pub fn card(&self, card_id: &str) -> Result<Value, Error> {
        to_value(self.app.card(card_id)?)
    }

    /// The stored card file, byte for byte.
    pub fn card_json(&self, card_id: &str) -> Result<String, Error> {
        String::from_utf8(self.app.card_json(card_id)?).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn list_cards(&self) -> Result<Value, Error> {
        to_value(self.app.list_cards()?)
    }

    pub fn card_image(&self, card_id: &str) -> Result<Vec<u8>, Error> {
        self.app.card_image(card_id)
    }
}

create_exception!(wordcraft, WordcraftError, PyException, "A failed wordcraft operation; args are (code, message, details).");

fn py_err(e: Error) -> PyErr {
    let details = e.details().to_string();
    WordcraftError::new_err((e.code().as_str(), e.to_string(), details))
}

fn to_py(py: Python<'_>, v: Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

fn from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let json = py.import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| WordcraftError::new_err(("INVALID_ARGUMENT", e.to_string(), "null")))
}

/// A wordcraft service over a data directory.
#[pyclass(name = "Wordcraft", module = "wordcraft", frozen)]
struct PyWordcraft {
    api: Api,
}

impl PyWordcraft {
    fn call<T: Send>(&self, py: Python<'_>, f: impl FnOnce(&Api) -> Result<T, Error> + Send) -> PyResult<T> {
        let api = &self.api;
        py.detach(|| f(api)).map_err(py_err)
    }

    fn value(&self, py: Python<'_>, f: impl FnOnce(&Api) -> Result<Value, Error> + Send) -> PyResult<Py<PyAny>> {
        let v = self.call(py, f)?;
        to_py(py, v)
    }
}

#[pymethods]
impl PyWordcraft {
    #[new]
    #[pyo3(signature = (data_dir, *, config=None, profile=None, mock=true, script=None, fixed_clock_ms=None, workers=None))]
    fn new(
        data_dir: PathBuf,
        config: Option<PathBuf>,
        profile: Option<String>,
        mock: bool,
        script: Option<PathBuf>,
        fixed_clock_ms: Option<u64>,
        workers: Option<usize>,
    ) -> PyResult<Self> {
        let opts = Options {
            data_dir,
            config,
            profile,
            mock,
            script,
            fixed_clock_ms,
            workers,
        };
        Ok(Self {
            api: Api::open(&opts).map_err(py_err)?,
        })
    }

    #[getter]
    fn mock_remaining(&self) -> Option<usize> {
        self.api.mock_remaining()
    }

    #[pyo3(signature = (query, limit=10))]
    fn search_words(&self, py: Python<'_>, query: &str, limit: usize) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.search_words(query, limit))
    }

    #[pyo3(signature = (word_id, sense_id=None))]
    fn create_session(&self, py: Python<'_>, word_id: &str, sense_id: Option<&str>) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.create_session(word_id, sense_id))
    }

    fn session(&self, py: Python<'_>, session_id: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.session(session_id))
    }

    fn goto_stage(&self, py: Python<'_>, session_id: &str, stage: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.goto_stage(session_id, stage))
    }

    fn tick(&self, py: Python<'_>, session_id: &str, delta_ms: u64) -> PyResult<u64> {
        self.call(py, |a| a.tick(session_id, delta_ms))
    }

    fn brush_segment(&self, py: Python<'_>, session_id: &str, start: usize, end: usize) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.brush_segment(session_id, start, end))
    }

    fn add_semantic_node(&self, py: Python<'_>, session_id: &str, node: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let node = from_py(py, node)?;
        self.value(py, |a| a.add_semantic_node(session_id, node))
    }

    #[pyo3(signature = (session_id, anchor_id, count=3))]
    fn suggest_semantic_nodes(&self, py: Python<'_>, session_id: &str, anchor_id: &str, count: usize) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.suggest_semantic_nodes(session_id, anchor_id, count))
    }

    #[pyo3(signature = (session_id, segment_id, node_ids=Vec::new()))]
    fn suggest_keywords(&self, py: Python<'_>, session_id: &str, segment_id: &str, node_ids: Vec<String>) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.suggest_keywords(session_id, segment_id, &node_ids))
    }

    #[pyo3(signature = (session_id, segment_id, source, chain_node_ids=Vec::new()))]
    fn select_keyword(
        &self,
        py: Python<'_>,
        session_id: &str,
        segment_id: &str,
        source: &Bound<'_, PyAny>,
        chain_node_ids: Vec<String>,
    ) -> PyResult<Py<PyAny>> {
        let source = from_py(py, source)?;
        self.value(py, |a| a.select_keyword(session_id, segment_id, source, chain_node_ids))
    }

    fn upsert_link(&self, py: Python<'_>, session_id: &str, node_a: &str, node_b: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.upsert_link(session_id, node_a, node_b))
    }

    #[pyo3(signature = (session_id, link_id, *, chain=None, note=None))]
    fn update_link(
        &self,
        py: Python<'_>,
        session_id: &str,
        link_id: &str,
        chain: Option<&str>,
        note: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.update_link(session_id, link_id, chain, note))
    }

    fn set_association(&self, py: Python<'_>, session_id: &str, text: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.set_association(session_id, text))
    }

    fn suggest_hints(&self, py: Python<'_>, session_id: &str, link_id: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.suggest_hints(session_id, link_id))
    }

    #[pyo3(signature = (session_id, bbox, tags, description=""))]
    fn add_element(
        &self,
        py: Python<'_>,
        session_id: &str,
        bbox: &Bound<'_, PyAny>,
        tags: Vec<String>,
        description: &str,
    ) -> PyResult<Py<PyAny>> {
        let bbox = from_py(py, bbox)?;
        self.value(py, |a| a.add_element(session_id, bbox, tags, description))
    }

    #[pyo3(signature = (session_id, element_id, *, bbox=None, tags=None, description=None))]
    fn update_element(
        &self,
        py: Python<'_>,
        session_id: &str,
        element_id: &str,
        bbox: Option<&Bound<'_, PyAny>>,
        tags: Option<Vec<String>>,
        description: Option<String>,
    ) -> PyResult<Py<PyAny>> {
        let bbox = bbox.map(|b| from_py(py, b)).transpose()?;
        self.value(py, |a| a.update_element(session_id, element_id, bbox, tags, description))
    }

    #[pyo3(signature = (session_id, a, b, text=""))]
    fn add_relation(&self, py: Python<'_>, session_id: &str, a: &str, b: &str, text: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |api| api.add_relation(session_id, a, b, text))
    }

    fn suggest_visual_elements(&self, py: Python<'_>, session_id: &str, node_ids: Vec<String>) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.suggest_visual_elements(session_id, &node_ids))
    }

    fn suggest_relations(&self, py: Python<'_>, session_id: &str, a: &str, b: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |api| api.suggest_relations(session_id, a, b))
    }

    fn recall_path(&self, py: Python<'_>, session_id: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.recall_path(session_id))
    }

    fn image_request(&self, py: Python<'_>, session_id: &str, style: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.image_request(session_id, style))
    }

    #[pyo3(signature = (session_id, style, idempotency_key=None))]
    fn request_image(&self, py: Python<'_>, session_id: &str, style: &str, idempotency_key: Option<&str>) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.request_image(session_id, style, idempotency_key))
    }

    fn job(&self, py: Python<'_>, job_id: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.job(job_id))
    }

    #[pyo3(signature = (job_id, timeout_s=30.0))]
    fn wait_for_job(&self, py: Python<'_>, job_id: &str, timeout_s: f64) -> PyResult<Py<PyAny>> {
        let timeout = Duration::from_secs_f64(timeout_s.max(0.0));
        self.value(py, |a| a.wait_for_job(job_id, timeout))
    }

    #[pyo3(signature = (session_id, allow_no_image=false))]
    fn record_card(&self, py: Python<'_>, session_id: &str, allow_no_image: bool) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.record_card(session_id, allow_no_image))
    }

    fn card(&self, py: Python<'_>, card_id: &str) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.card(card_id))
    }

    fn card_json(&self, py: Python<'_>, card_id: &str) -> PyResult<String> {
        self.call(py, |a| a.card_json(card_id))
    }

    fn list_cards(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.value(py, |a| a.list_cards())
    }

    fn card_image<'py>(&self, py: Python<'py>, card_id: &str) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.call(py, |a| a.card_image(card_id))?;
        Ok(PyBytes::new(py, &bytes))
    }
}

#[pymodule]
fn wordcraft(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWordcraft>()?;
    m.add("WordcraftError", m.py().get_type::<WordcraftError>())?;
    Ok(())
}
