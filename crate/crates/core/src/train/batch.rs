use crate::kb::{ConceptId, EntityId};
use crate::query::Query;

/// Concept retrieval: a query, one concept answer and `m` non-answers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConItem {
    pub query: Query,
    pub positive: ConceptId,
    pub negatives: Vec<ConceptId>,
}

/// Entity retrieval: a query, one entity answer and `m` non-answers.
#[derive(Debug, Clone, PartialEq)]
pub struct EntItem {
    pub query: Query,
    pub positive: EntityId,
    pub negatives: Vec<EntityId>,
}

/// A subsumption axiom `sub ⊑ sup` with `m` corrupted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SubItem {
    pub sub: ConceptId,
    pub sup: ConceptId,
    pub negatives: Vec<(ConceptId, ConceptId)>,
}

/// An instantiation `entity ◁ concept` with `m` corrupted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct InsItem {
    pub concept: ConceptId,
    pub entity: EntityId,
    pub negatives: Vec<(ConceptId, EntityId)>,
}

/// One mini-batch per task. An empty task list contributes nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub con: Vec<ConItem>,
    pub ent: Vec<EntItem>,
    pub sub: Vec<SubItem>,
    pub ins: Vec<InsItem>,
}
