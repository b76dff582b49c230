use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A recall-path item (concept node or association link) that is not yet
/// represented on the canvas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct MissingItem {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate word id `{0}`")]
    DuplicateWordId(String),
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("unknown sense `{0}`")]
    UnknownSense(String),
    #[error("no response for `{word_id}` from participant `{participant}`")]
    MissingResponse { word_id: String, participant: String },

    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session is recorded and can no longer change")]
    SessionClosed,
    #[error("segment [{start}, {end}) overlaps active segment `{segment_id}`")]
    Overlap {
        start: usize,
        end: usize,
        segment_id: String,
    },
    #[error("segment [{start}, {end}) is not a valid range over {len} phonemes")]
    Range { start: usize, end: usize, len: usize },
    #[error("all segment colors are in use")]
    PaletteExhausted,
    #[error("semantic tree is limited to depth {max}")]
    DepthExceeded { max: u8 },
    #[error("concept `{0}` already exists under this anchor")]
    DuplicateConcept(String),
    #[error("unknown anchor `{0}`")]
    UnknownAnchor(String),
    #[error("unknown semantic node `{0}`")]
    UnknownSemanticNode(String),
    #[error("invalid semantic chain: {0}")]
    InvalidChain(String),
    #[error("unknown or inactive segment `{0}`")]
    UnknownSegment(String),
    #[error("unknown keyword card `{0}`")]
    UnknownCard(String),
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),

    #[error("unknown concept node `{0}`")]
    UnknownNode(String),
    #[error("unknown association link `{0}`")]
    UnknownLink(String),
    #[error("a link needs two distinct nodes")]
    SelfLink,
    #[error("note text is empty")]
    EmptyNote,
    #[error("text is {actual} units long, the limit is {limit}")]
    TextTooLong { limit: usize, actual: usize },

    #[error("tag `{0}` does not name a concept node")]
    UnknownConceptTag(String),
    #[error("bad bounding box: {0}")]
    BadBBox(String),
    #[error("unknown canvas element `{0}`")]
    UnknownElement(String),
    #[error("unknown canvas relation `{0}`")]
    UnknownRelation(String),
    #[error("recall path incomplete: {} node(s) and {} link(s) not on the canvas", missing_nodes.len(), missing_links.len())]
    RecallPathIncomplete {
        missing_nodes: Vec<MissingItem>,
        missing_links: Vec<MissingItem>,
    },
    #[error("unknown style `{0}`")]
    UnknownStyle(String),
    #[error("no image has been generated for this session")]
    NoImage,
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("image job `{0}` is still pending for this session")]
    JobPending(String),
    #[error("unknown word card `{0}`")]
    UnknownWordCard(String),

    #[error("provider error: {0}")]
    Provider(String),
    #[error("{template}: provider output rejected: {reason}")]
    Format { template: String, reason: String },
    #[error("provider call timed out after {ms} ms")]
    Timeout { ms: u64 },
    #[error("provider refused the request: {0}")]
    ContentPolicy(String),
    #[error("mock script exhausted after {served} call(s)")]
    ScriptExhausted { served: usize },
    #[error("{template}: missing variable `{variable}`")]
    MissingVariable { template: String, variable: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("{template}: {reason}")]
    Template { template: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Stable error codes published to API clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    ParseError,
    DuplicateWordId,
    UnknownWord,
    UnknownSense,
    MissingResponse,
    UnknownSession,
    SessionClosed,
    OverlapError,
    RangeError,
    PaletteExhausted,
    DepthExceeded,
    DuplicateConcept,
    UnknownAnchor,
    UnknownSemanticNode,
    InvalidChain,
    UnknownSegment,
    UnknownCard,
    UnknownKeyword,
    UnknownNode,
    UnknownLink,
    SelfLink,
    EmptyNote,
    TextTooLong,
    UnknownConceptTag,
    BadBbox,
    UnknownElement,
    UnknownRelation,
    RecallPathIncomplete,
    UnknownStyle,
    NoImage,
    UnknownJob,
    JobPending,
    UnknownWordCard,
    ProviderError,
    FormatError,
    TimeoutError,
    ContentPolicyRejection,
    ScriptExhausted,
    MissingVariable,
    UnknownTemplate,
    TemplateError,
    ConfigError,
    InvalidArgument,
    StorageError,
    // transport-level codes raised by the HTTP layer
    NotFound,
    BadRequest,
    Unauthorized,
    PortInUse,
}

impl ErrorCode {
    pub const ALL: &'static [ErrorCode] = &[
        ErrorCode::ParseError,
        ErrorCode::DuplicateWordId,
        ErrorCode::UnknownWord,
        ErrorCode::UnknownSense,
        ErrorCode::MissingResponse,
        ErrorCode::UnknownSession,
        ErrorCode::SessionClosed,
        ErrorCode::OverlapError,
        ErrorCode::RangeError,
        ErrorCode::PaletteExhausted,
        ErrorCode::DepthExceeded,
        ErrorCode::DuplicateConcept,
        ErrorCode::UnknownAnchor,
        ErrorCode::UnknownSemanticNode,
        ErrorCode::InvalidChain,
        ErrorCode::UnknownSegment,
        ErrorCode::UnknownCard,
        ErrorCode::UnknownKeyword,
        ErrorCode::UnknownNode,
        ErrorCode::UnknownLink,
        ErrorCode::SelfLink,
        ErrorCode::EmptyNote,
        ErrorCode::TextTooLong,
        ErrorCode::UnknownConceptTag,
        ErrorCode::BadBbox,
        ErrorCode::UnknownElement,
        ErrorCode::UnknownRelation,
        ErrorCode::RecallPathIncomplete,
        ErrorCode::UnknownStyle,
        ErrorCode::NoImage,
        ErrorCode::UnknownJob,
        ErrorCode::JobPending,
        ErrorCode::UnknownWordCard,
        ErrorCode::ProviderError,
        ErrorCode::FormatError,
        ErrorCode::TimeoutError,
        ErrorCode::ContentPolicyRejection,
        ErrorCode::ScriptExhausted,
        ErrorCode::MissingVariable,
        ErrorCode::UnknownTemplate,
        ErrorCode::TemplateError,
        ErrorCode::ConfigError,
        ErrorCode::InvalidArgument,
        ErrorCode::StorageError,
        ErrorCode::NotFound,
        ErrorCode::BadRequest,
        ErrorCode::Unauthorized,
        ErrorCode::PortInUse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ParseError => "PARSE_ERROR",
            ErrorCode::DuplicateWordId => "DUPLICATE_WORD_ID",
            ErrorCode::UnknownWord => "UNKNOWN_WORD",
            ErrorCode::UnknownSense => "UNKNOWN_SENSE",
            ErrorCode::MissingResponse => "MISSING_RESPONSE",
            ErrorCode::UnknownSession => "UNKNOWN_SESSION",
            ErrorCode::SessionClosed => "SESSION_CLOSED",
            ErrorCode::OverlapError => "OVERLAP_ERROR",
            ErrorCode::RangeError => "RANGE_ERROR",
            ErrorCode::PaletteExhausted => "PALETTE_EXHAUSTED",
            ErrorCode::DepthExceeded => "DEPTH_EXCEEDED",
            ErrorCode::DuplicateConcept => "DUPLICATE_CONCEPT",
            ErrorCode::UnknownAnchor => "UNKNOWN_ANCHOR",
            ErrorCode::UnknownSemanticNode => "UNKNOWN_SEMANTIC_NODE",
            ErrorCode::InvalidChain => "INVALID_CHAIN",
            ErrorCode::UnknownSegment => "UNKNOWN_SEGMENT",
            ErrorCode::UnknownCard => "UNKNOWN_CARD",
            ErrorCode::UnknownKeyword => "UNKNOWN_KEYWORD",
            ErrorCode::UnknownNode => "UNKNOWN_NODE",
            ErrorCode::UnknownLink => "UNKNOWN_LINK",
            ErrorCode::SelfLink => "SELF_LINK",
            ErrorCode::EmptyNote => "EMPTY_NOTE",
            ErrorCode::TextTooLong => "TEXT_TOO_LONG",
            ErrorCode::UnknownConceptTag => "UNKNOWN_CONCEPT_TAG",
            ErrorCode::BadBbox => "BAD_BBOX",
            ErrorCode::UnknownElement => "UNKNOWN_ELEMENT",
            ErrorCode::UnknownRelation => "UNKNOWN_RELATION",
            ErrorCode::RecallPathIncomplete => "RECALL_PATH_INCOMPLETE",
            ErrorCode::UnknownStyle => "UNKNOWN_STYLE",
            ErrorCode::NoImage => "NO_IMAGE",
            ErrorCode::UnknownJob => "UNKNOWN_JOB",
            ErrorCode::JobPending => "JOB_PENDING",
            ErrorCode::UnknownWordCard => "UNKNOWN_WORD_CARD",
            ErrorCode::ProviderError => "PROVIDER_ERROR",
            ErrorCode::FormatError => "FORMAT_ERROR",
            ErrorCode::TimeoutError => "TIMEOUT_ERROR",
            ErrorCode::ContentPolicyRejection => "CONTENT_POLICY_REJECTION",
            ErrorCode::ScriptExhausted => "SCRIPT_EXHAUSTED",
            ErrorCode::MissingVariable => "MISSING_VARIABLE",
            ErrorCode::UnknownTemplate => "UNKNOWN_TEMPLATE",
            ErrorCode::TemplateError => "TEMPLATE_ERROR",
            ErrorCode::ConfigError => "CONFIG_ERROR",
            ErrorCode::InvalidArgument => "INVALID_ARGUMENT",
            ErrorCode::StorageError => "STORAGE_ERROR",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::BadRequest => "BAD_REQUEST",
            ErrorCode::Unauthorized => "UNAUTHORIZED",
            ErrorCode::PortInUse => "PORT_IN_USE",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Parse { .. } => ErrorCode::ParseError,
            Error::DuplicateWordId(_) => ErrorCode::DuplicateWordId,
            Error::UnknownWord(_) => ErrorCode::UnknownWord,
            Error::UnknownSense(_) => ErrorCode::UnknownSense,
            Error::MissingResponse { .. } => ErrorCode::MissingResponse,
            Error::UnknownSession(_) => ErrorCode::UnknownSession,
            Error::SessionClosed => ErrorCode::SessionClosed,
            Error::Overlap { .. } => ErrorCode::OverlapError,
            Error::Range { .. } => ErrorCode::RangeError,
            Error::PaletteExhausted => ErrorCode::PaletteExhausted,
            Error::DepthExceeded { .. } => ErrorCode::DepthExceeded,
            Error::DuplicateConcept(_) => ErrorCode::DuplicateConcept,
            Error::UnknownAnchor(_) => ErrorCode::UnknownAnchor,
            Error::UnknownSemanticNode(_) => ErrorCode::UnknownSemanticNode,
            Error::InvalidChain(_) => ErrorCode::InvalidChain,
            Error::UnknownSegment(_) => ErrorCode::UnknownSegment,
            Error::UnknownCard(_) => ErrorCode::UnknownCard,
            Error::UnknownKeyword(_) => ErrorCode::UnknownKeyword,
            Error::UnknownNode(_) => ErrorCode::UnknownNode,
            Error::UnknownLink(_) => ErrorCode::UnknownLink,
            Error::SelfLink => ErrorCode::SelfLink,
            Error::EmptyNote => ErrorCode::EmptyNote,
            Error::TextTooLong { .. } => ErrorCode::TextTooLong,
            Error::UnknownConceptTag(_) => ErrorCode::UnknownConceptTag,
            Error::BadBBox(_) => ErrorCode::BadBbox,
            Error::UnknownElement(_) => ErrorCode::UnknownElement,
            Error::UnknownRelation(_) => ErrorCode::UnknownRelation,
            Error::RecallPathIncomplete { .. } => ErrorCode::RecallPathIncomplete,
            Error::UnknownStyle(_) => ErrorCode::UnknownStyle,
            Error::NoImage => ErrorCode::NoImage,
            Error::UnknownJob(_) => ErrorCode::UnknownJob,
            Error::JobPending(_) => ErrorCode::JobPending,
            Error::UnknownWordCard(_) => ErrorCode::UnknownWordCard,
            Error::Provider(_) => ErrorCode::ProviderError,
            Error::Format { .. } => ErrorCode::FormatError,
            Error::Timeout { .. } => ErrorCode::TimeoutError,
            Error::ContentPolicy(_) => ErrorCode::ContentPolicyRejection,
            Error::ScriptExhausted { .. } => ErrorCode::ScriptExhausted,
            Error::MissingVariable { .. } => ErrorCode::MissingVariable,
            Error::UnknownTemplate(_) => ErrorCode::UnknownTemplate,
            Error::Template { .. } => ErrorCode::TemplateError,
            Error::Config(_) => ErrorCode::ConfigError,
            Error::InvalidArgument(_) => ErrorCode::InvalidArgument,
            Error::Io(_) | Error::Json(_) => ErrorCode::StorageError,
        }
    }

    /// Structured details for API clients; `null` when the message says it all.
    pub fn details(&self) -> Value {
        match self {
            Error::Parse { line, reason } => json!({ "line": line, "reason": reason }),
            Error::MissingResponse {
                word_id,
                participant,
            } => json!({ "word_id": word_id, "participant": participant }),
            Error::Overlap {
                start,
                end,
                segment_id,
            } => json!({ "start": start, "end": end, "segment_id": segment_id }),
            Error::Range { start, end, len } => json!({ "start": start, "end": end, "len": len }),
            Error::DepthExceeded { max } => json!({ "max_depth": max }),
            Error::TextTooLong { limit, actual } => json!({ "limit": limit, "actual": actual }),
            Error::RecallPathIncomplete {
                missing_nodes,
                missing_links,
            } => json!({ "missing_nodes": missing_nodes, "missing_links": missing_links }),
            Error::Format { template, reason } => json!({ "template": template, "reason": reason }),
            Error::Timeout { ms } => json!({ "timeout_ms": ms }),
            Error::ContentPolicy(message) => json!({ "provider_message": message }),
            Error::MissingVariable { template, variable } => {
                json!({ "template": template, "variable": variable })
            }
            _ => Value::Null,
        }
    }
}
