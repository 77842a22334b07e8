//! Asking a chat model the four time-point questions (does event 1 start
//! first, start later, end first, end later) and turning its answers into a
//! temporal relation, alongside direct classification prompts for
//! comparison.

pub mod answer;
pub mod error;
pub mod run;
pub mod template;
pub mod transport;

pub use answer::{parse_answer, parse_answer_with_triggers, parse_relation};
pub use error::{LlmError, Result, TransportError};
pub use run::{run_unified, Instance, RunConfig, UnifiedRun, UnifiedTrace};
pub use template::{render, PromptTemplate};
pub use transport::{CachedTransport, HttpTransport, MockScript, MockTransport, ReplayTransport, ResponseCache, Transport};
