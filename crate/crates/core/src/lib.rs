//! Headless core of a complaint-pooling and collaborative problem-solving
//! service.
//!
//! Workers pool complaints from subreddit dumps, app-store review dumps and
//! manual entry ([`ingestion`]). An LLM-backed [`pipeline`] sorts them into
//! problem categories, summarizes each category and drafts candidate
//! solutions. [`analytics`] serves the zoom-out and zoom-in views, and
//! [`collaboration`] hosts the per-category chat, shared document and
//! solution board where human proposals always rank above AI ones.
//! [`eval`] carries the task timing and SUS scoring utilities.
//!
//! Every mutation is recorded as an [`Event`] in an append-only log
//! ([`store`]); [`Workspace`] is the single entry point that validates a
//! request, appends the event and applies it to the in-memory [`State`].

pub mod analytics;
pub mod clock;
pub mod collaboration;
pub mod config;
pub mod error;
pub mod eval;
pub mod ids;
pub mod ingestion;
pub mod par;
pub mod pipeline;
pub mod state;
pub mod store;
pub mod workspace;

pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use config::{Config, ProviderConfig, ProviderKind};
pub use error::{Error, Result};
pub use ids::{CategoryId, ComplaintId, IdGen, RunId, SolutionId};
pub use state::{Event, State};
pub use workspace::Workspace;
