//! Crisp symbolic answering used as ground truth.

use std::collections::BTreeSet;

use crate::kb::{ConceptId, EntityId, KnowledgeBase, RelationId};

use super::Query;

/// Adjacency lists over a knowledge base, sorted for deterministic walks.
#[derive(Debug, Clone)]
pub struct KbIndex {
    num_entities: usize,
    /// Per head: `(relation, tail)` sorted.
    out: Vec<Vec<(RelationId, EntityId)>>,
    /// Per tail: `(relation, head)` sorted.
    incoming: Vec<Vec<(RelationId, EntityId)>>,
    /// Per entity: concepts it instantiates, closed under subsumption.
    concepts: Vec<Vec<ConceptId>>,
}

impl KbIndex {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let n = kb.num_entities();
        let mut out = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for t in &kb.abox_ee {
            out[t.head.index()].push((t.rel, t.tail));
            incoming[t.tail.index()].push((t.rel, t.head));
        }
        for v in out.iter_mut().chain(incoming.iter_mut()) {
            v.sort_unstable();
        }
        let mut concepts = vec![Vec::new(); n];
        for (e, c) in kb.instance_closure() {
            concepts[e.index()].push(c);
        }
        KbIndex {
            num_entities: n,
            out,
            incoming,
            concepts,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn incoming(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.incoming[e.index()]
    }

    pub fn tails(&self, head: EntityId, rel: RelationId) -> impl Iterator<Item = EntityId> + '_ {
        let edges = &self.out[head.index()];
        let start = edges.partition_point(|&(r, _)| r < rel);
        edges[start..]
            .iter()
            .take_while(move |&&(r, _)| r == rel)
            .map(|&(_, t)| t)
    }

    pub fn concepts_of(&self, e: EntityId) -> &[ConceptId] {
        &self.concepts[e.index()]
    }

    pub fn answer(&self, q: &Query) -> BTreeSet<EntityId> {
        match q {
            Query::Anchor(e) => BTreeSet::from([*e]),
            Query::Proj(r, c) => {
                let mut out = BTreeSet::new();
                for h in self.answer(c) {
                    out.extend(self.tails(h, *r));
                }
                out
            }
            Query::And(cs) => {
                let mut it = cs.iter().map(|c| self.answer(c));
                let first = it.next().unwrap_or_default();
                it.fold(first, |acc, s| acc.intersection(&s).copied().collect())
            }
            Query::Or(cs) => cs.iter().flat_map(|c| self.answer(c)).collect(),
            Query::Not(c) => {
                let inner = self.answer(c);
                (0..self.num_entities)
                    .map(EntityId::from_index)
                    .filter(|e| !inner.contains(e))
                    .collect()
            }
        }
    }

    pub fn answer_concepts<'a>(&self, entities: impl IntoIterator<Item = &'a EntityId>) -> BTreeSet<ConceptId> {
        entities
            .into_iter()
            .flat_map(|e| self.concepts[e.index()].iter().copied())
            .collect()
    }
}

/// Entities satisfying `q` under crisp semantics.
pub fn answer_entities(kb: &KnowledgeBase, q: &Query) -> BTreeSet<EntityId> {
    KbIndex::new(kb).answer(q)
}

/// Concepts instantiated by at least one of `entities`, through the
/// subsumption-closed instantiation links.
pub fn answer_concepts(kb: &KnowledgeBase, entities: &BTreeSet<EntityId>) -> BTreeSet<ConceptId> {
    KbIndex::new(kb).answer_concepts(entities)
}
