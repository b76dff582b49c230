//! Keyword-mnemonic vocabulary learning: a learner picks a sound-alike
//! keyword for a target word, links it to the word's meaning through an
//! association map, sketches a scene on a canvas and records a word card
//! with a generated image.

pub mod canvas;
pub mod card;
pub mod clock;
pub mod config;
pub mod error;
pub mod gateway;
pub mod jobs;
pub mod keywords;
pub mod lexicon;
pub mod map;
pub mod profile;
pub mod service;
pub mod session;
pub mod store;
pub mod suggest;

pub use canvas::{BBox, CanvasElement, CanvasRelation, Coverage, ImageRequest, RecallPath, StyleRegistry};
pub use card::WordCard;
pub use clock::{Clock, FixedClock, SystemClock};
pub use config::Config;
pub use error::{Error, ErrorCode, Result};
pub use gateway::mock::{Fixture, MockProvider};
pub use gateway::provider::{Provider, ProviderConfig, ProviderMode};
pub use gateway::template::{PromptTemplate, TemplateId, TemplateSet};
pub use gateway::Gateway;
pub use jobs::{ImageJob, JobState};
pub use keywords::{KeywordBatch, KeywordCard, KeywordChoice, KeywordSource, Origin, Segment};
pub use lexicon::{Lexicon, WordEntry};
pub use map::{AssociationLink, AssociationMap};
pub use profile::LanguageProfile;
pub use service::{NewSemanticNode, Wordcraft};
pub use session::{Command, LearningSession, SessionEvent, Stage};
