//! Query sampling by backward random walks from a randomly chosen answer.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{EntityId, KnowledgeBase, RelationId, Triple};

use super::{KbIndex, Query, QueryInstance, QueryType};

pub const DEFAULT_MAX_ANSWERS: usize = 100;

enum Template {
    Anchor,
    Proj(Box<Template>),
    And(Vec<Template>),
    Or(Vec<Template>),
}

fn template(t: QueryType) -> Template {
    use Template::*;
    let p = |c: Template| Proj(Box::new(c));
    match t {
        QueryType::P1 => p(Anchor),
        QueryType::P2 => p(p(Anchor)),
        QueryType::P3 => p(p(p(Anchor))),
        QueryType::I2 => And(vec![p(Anchor), p(Anchor)]),
        QueryType::I3 => And(vec![p(Anchor), p(Anchor), p(Anchor)]),
        QueryType::Pi => And(vec![p(p(Anchor)), p(Anchor)]),
        QueryType::Ip => p(And(vec![p(Anchor), p(Anchor)])),
        QueryType::U2 => Or(vec![p(Anchor), p(Anchor)]),
        QueryType::Up => p(Or(vec![p(Anchor), p(Anchor)])),
    }
}

fn walk(t: &Template, target: EntityId, index: &KbIndex, rng: &mut ChaCha8Rng) -> Option<Query> {
    match t {
        Template::Anchor => Some(Query::Anchor(target)),
        Template::Proj(child) => {
            let &(rel, head) = index.incoming(target).choose(rng)?;
            Some(Query::proj(rel, walk(child, head, index, rng)?))
        }
        Template::And(children) | Template::Or(children) => {
            let mut branches: Vec<Query> = Vec::with_capacity(children.len());
            for c in children {
                let b = walk(c, target, index, rng)?;
                if branches.contains(&b) {
                    return None;
                }
                branches.push(b);
            }
            Some(if matches!(t, Template::And(_)) {
                Query::And(branches)
            } else {
                Query::Or(branches)
            })
        }
    }
}

fn fill(t: &Template, ne: usize, nr: usize, rng: &mut ChaCha8Rng) -> Query {
    match t {
        Template::Anchor => Query::Anchor(EntityId::from_index(rng.gen_range(0..ne))),
        Template::Proj(child) => {
            let r = RelationId::from_index(rng.gen_range(0..nr));
            Query::proj(r, fill(child, ne, nr, rng))
        }
        Template::And(cs) => Query::And(cs.iter().map(|c| fill(c, ne, nr, rng)).collect()),
        Template::Or(cs) => Query::Or(cs.iter().map(|c| fill(c, ne, nr, rng)).collect()),
    }
}

/// A query of shape `qtype` with uniformly drawn anchors and relations,
/// ignoring whether it has answers.
pub fn random_query(qtype: QueryType, num_entities: usize, num_relations: usize, rng: &mut ChaCha8Rng) -> Query {
    assert!(num_entities > 0 && num_relations > 0, "empty vocabulary");
    fill(&template(qtype), num_entities, num_relations, rng)
}

struct Sampler<'a> {
    index: &'a KbIndex,
    /// When set, instances must have an answer not reachable in this graph.
    baseline: Option<&'a KbIndex>,
    max_answers: usize,
}

impl Sampler<'_> {
    fn run(&self, qtype: QueryType, n: usize, seed: u64) -> Result<Vec<QueryInstance>> {
        if n == 0 {
            return Err(Error::Config("requested zero queries".into()));
        }
        let targets: Vec<EntityId> = (0..self.index.num_entities())
            .map(EntityId::from_index)
            .filter(|&e| !self.index.incoming(e).is_empty())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tpl = template(qtype);
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(n);
        let budget = 10 * n;
        let mut attempts = 0;
        while out.len() < n && attempts < budget && !targets.is_empty() {
            attempts += 1;
            let target = targets[rng.gen_range(0..targets.len())];
            let Some(q) = walk(&tpl, target, self.index, &mut rng) else {
                continue;
            };
            if seen.contains(&q) {
                continue;
            }
            let answers = self.index.answer(&q);
            if answers.is_empty() || answers.len() > self.max_answers {
                continue;
            }
            if let Some(base) = self.baseline {
                let known = base.answer(&q);
                if answers.iter().all(|a| known.contains(a)) {
                    continue;
                }
            }
            let concepts = self.index.answer_concepts(&answers);
            seen.insert(q.clone());
            out.push(QueryInstance {
                ast: q,
                qtype,
                entity_answers: answers.into_iter().collect(),
                concept_answers: concepts.into_iter().collect(),
            });
        }
        if out.len() < n {
            return Err(Error::SamplerExhausted {
                qtype: qtype.to_string(),
                requested: n,
                achieved: out.len(),
            });
        }
        Ok(out)
    }
}

/// Samples `n` distinct queries of shape `qtype` with between one and
/// `max_answers` answers. Deterministic for a fixed seed.
pub fn sample_queries(
    kb: &KnowledgeBase,
    qtype: QueryType,
    n: usize,
    seed: u64,
    max_answers: usize,
) -> Result<Vec<QueryInstance>> {
    let index = KbIndex::new(kb);
    Sampler {
        index: &index,
        baseline: None,
        max_answers,
    }
    .run(qtype, n, seed)
}

/// Samples evaluation queries over `full` whose answer sets include at
/// least one entity that `visible` alone does not entail. Stored answers
/// are those of `full`.
pub fn sample_eval_queries(
    full: &KnowledgeBase,
    visible: &KnowledgeBase,
    qtype: QueryType,
    n: usize,
    seed: u64,
    max_answers: usize,
) -> Result<Vec<QueryInstance>> {
    let index = KbIndex::new(full);
    let base = KbIndex::new(visible);
    Sampler {
        index: &index,
        baseline: Some(&base),
        max_answers,
    }
    .run(qtype, n, seed)
}

/// One `1p` instance per role assertion, answers taken over `kb`.
pub fn enumerate_1p(kb: &KnowledgeBase) -> Vec<QueryInstance> {
    let index = KbIndex::new(kb);
    kb.abox_ee
        .iter()
        .map(|t| {
            let ast = Query::proj(t.rel, Query::Anchor(t.head));
            let answers: Vec<EntityId> = index.tails(t.head, t.rel).collect();
            let concepts = index.answer_concepts(&answers);
            QueryInstance {
                ast,
                qtype: QueryType::P1,
                entity_answers: answers,
                concept_answers: concepts.into_iter().collect(),
            }
        })
        .collect()
}

/// One `1p` instance per distinct (head, relation) among `held_out`,
/// answered over `full`. Used to evaluate on exactly the held-out edges.
pub fn enumerate_eval_1p<'a>(full: &KnowledgeBase, held_out: impl IntoIterator<Item = &'a Triple>) -> Vec<QueryInstance> {
    let index = KbIndex::new(full);
    let pairs: BTreeSet<(EntityId, RelationId)> = held_out.into_iter().map(|t| (t.head, t.rel)).collect();
    pairs
        .into_iter()
        .map(|(h, r)| {
            let answers: Vec<EntityId> = index.tails(h, r).collect();
            let concepts = index.answer_concepts(&answers);
            QueryInstance {
                ast: Query::proj(r, Query::Anchor(h)),
                qtype: QueryType::P1,
                entity_answers: answers,
                concept_answers: concepts.into_iter().collect(),
            }
        })
        .collect()
}
