//! Maps between backends, sections along them and vector fields on the source.

mod audit;
pub mod calculus;
mod map;
mod poly;
mod section;
mod vector_field;

pub use audit::{nonexistence_audit, NonexistenceAudit};
pub use map::{Jet, Jet2, MapField, MapKind};
pub use poly::Polynomial;
pub use section::{Section, SectionKind, SourceScalar};
pub use vector_field::{
    classify_field, divergence, divergence_and_lie_norm, lie_derivative, FieldClass,
    FieldClassification,
};
