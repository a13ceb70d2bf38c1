use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{ConceptId, EntityId};

/// A positive training instance of one of the four tasks, reduced to the
/// parts that negative sampling corrupts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Con(ConceptId),
    Ent(EntityId),
    Sub(ConceptId, ConceptId),
    Ins(ConceptId, EntityId),
}

/// Seeded source of corrupted instances.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    rng: ChaCha8Rng,
    num_entities: usize,
    num_concepts: usize,
}

impl NegativeSampler {
    pub fn new(num_entities: usize, num_concepts: usize, seed: u64) -> Self {
        NegativeSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            num_entities,
            num_concepts,
        }
    }

    /// Uniform draw from `0..pool` excluding `keep`.
    fn other(&mut self, pool: usize, keep: usize) -> Result<usize> {
        if pool < 2 {
            return Err(Error::CannotCorrupt(pool));
        }
        let k = self.rng.gen_range(0..pool - 1);
        Ok(if k >= keep { k + 1 } else { k })
    }

    pub fn concept_other_than(&mut self, c: ConceptId) -> Result<ConceptId> {
        Ok(ConceptId::from_index(self.other(self.num_concepts, c.index())?))
    }

    pub fn entity_other_than(&mut self, e: EntityId) -> Result<EntityId> {
        Ok(EntityId::from_index(self.other(self.num_entities, e.index())?))
    }

    /// `m` corruptions of `positive`.
    ///
    /// Subsumptions corrupt either side with equal probability;
    /// instantiations corrupt the concept for the first `⌈m/2⌉` negatives
    /// and the entity for the rest.
    pub fn sample(&mut self, positive: Task, m: usize) -> Result<Vec<Task>> {
        if m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            out.push(match positive {
                Task::Con(c) => Task::Con(self.concept_other_than(c)?),
                Task::Ent(e) => Task::Ent(self.entity_other_than(e)?),
                Task::Sub(a, b) => {
                    if self.rng.gen_bool(0.5) {
                        Task::Sub(self.concept_other_than(a)?, b)
                    } else {
                        Task::Sub(a, self.concept_other_than(b)?)
                    }
                }
                Task::Ins(c, e) => {
                    if i < m.div_ceil(2) {
                        Task::Ins(self.concept_other_than(c)?, e)
                    } else {
                        Task::Ins(c, self.entity_other_than(e)?)
                    }
                }
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instantiation_split() {
        let mut s = NegativeSampler::new(20, 6, 1);
        let pos = Task::Ins(ConceptId(2), EntityId(7));
        let negs = s.sample(pos, 4).unwrap();
        let concept_side = negs
            .iter()
            .filter(|t| matches!(t, Task::Ins(c, e) if *c != ConceptId(2) && *e == EntityId(7)))
            .count();
        let entity_side = negs
            .iter()
            .filter(|t| matches!(t, Task::Ins(c, e) if *c == ConceptId(2) && *e != EntityId(7)))
            .count();
        assert_eq!((concept_side, entity_side), (2, 2));
        let negs = s.sample(pos, 5).unwrap();
        assert!(matches!(negs[2], Task::Ins(c, _) if c != ConceptId(2)));
        assert!(matches!(negs[3], Task::Ins(c, _) if c == ConceptId(2)));
    }

    #[test]
    fn never_equal_to_positive() {
        let mut s = NegativeSampler::new(3, 2, 9);
        for _ in 0..200 {
            for pos in [
                Task::Con(ConceptId(1)),
                Task::Ent(EntityId(0)),
                Task::Sub(ConceptId(0), ConceptId(1)),
                Task::Ins(ConceptId(0), EntityId(2)),
            ] {
                for n in s.sample(pos, 4).unwrap() {
                    assert_ne!(n, pos);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_stream() {
        let mut a = NegativeSampler::new(50, 10, 5);
        let mut b = NegativeSampler::new(50, 10, 5);
        for _ in 0..10 {
            let pos = Task::Sub(ConceptId(3), ConceptId(4));
            assert_eq!(a.sample(pos, 4).unwrap(), b.sample(pos, 4).unwrap());
        }
    }

    #[test]
    fn single_candidate_cannot_be_corrupted() {
        let mut s = NegativeSampler::new(5, 1, 0);
        assert!(matches!(
            s.sample(Task::Con(ConceptId(0)), 2),
            Err(Error::CannotCorrupt(1))
        ));
    }
}
