//! Point-algebra engine for event temporal relations.
//!
//! Relations between two events are written as boolean expressions over the
//! relations of their start and end points ([`schema`]). Each point relation
//! is encoded by two yes/no questions ([`point`]), so every schema compiles to
//! expressions over eight question atoms ([`logic`]). Those expressions decode
//! binary answers ([`inference::convert`]) and, under soft-logic operators,
//! turn answer probabilities into relation scores that a small sorter head can
//! be trained against ([`learner`]).

pub mod dataio;
pub mod error;
pub mod expr;
pub mod inference;
pub mod learner;
pub mod logic;
pub mod metrics;
pub mod par;
pub mod point;
pub mod schema;

pub use error::{Error, Result};
pub use inference::{convert, predict, soft_distribution, transfer_decode, Semantics};
pub use logic::{Assignment, Atom, LogicExpr, QVector};
pub use point::{ConsistencyMode, PointConfiguration, PointPair, PointRelation, QuestionAnswers};
pub use schema::{builtin, RelationSchema, ValidationDomain};
