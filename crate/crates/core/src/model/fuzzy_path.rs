//! Fuzzy-set evaluation of queries. A query is decomposed into atomic
//! projection chains rooted at anchors, which are fused element-wise.
//!
//! A projection applied above a connective is pushed into every branch:
//! `Proj(r, And(a, b))` evaluates as `And(Proj(r, a), Proj(r, b))`, and
//! likewise for `Or`. Projection over a negation has no chain form and is
//! rejected.

use crate::error::{Error, Result};
use crate::fuzzy::TNormKind;
use crate::kb::{EntityId, RelationId};
use crate::query::Query;

use super::{GradientBundle, ParameterStore};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum FuzzyPlan {
    /// An anchor followed by a projection chain. With no relations the
    /// anchor is read as the crisp singleton set.
    Atom { anchor: EntityId, rels: Vec<RelationId> },
    And(Box<FuzzyPlan>, Box<FuzzyPlan>),
    Or(Box<FuzzyPlan>, Box<FuzzyPlan>),
    Not(Box<FuzzyPlan>),
}

impl FuzzyPlan {
    pub fn build(q: &Query) -> Result<Self> {
        match q {
            Query::Anchor(e) => Ok(FuzzyPlan::Atom {
                anchor: *e,
                rels: Vec::new(),
            }),
            Query::Proj(r, c) => FuzzyPlan::build(c)?.push_relation(*r),
            Query::And(cs) => fold(cs, |a, b| FuzzyPlan::And(Box::new(a), Box::new(b))),
            Query::Or(cs) => fold(cs, |a, b| FuzzyPlan::Or(Box::new(a), Box::new(b))),
            Query::Not(c) => Ok(FuzzyPlan::Not(Box::new(FuzzyPlan::build(c)?))),
        }
    }

    fn push_relation(self, r: RelationId) -> Result<Self> {
        Ok(match self {
            FuzzyPlan::Atom { anchor, mut rels } => {
                rels.push(r);
                FuzzyPlan::Atom { anchor, rels }
            }
            FuzzyPlan::And(a, b) => {
                FuzzyPlan::And(Box::new(a.push_relation(r)?), Box::new(b.push_relation(r)?))
            }
            FuzzyPlan::Or(a, b) => {
                FuzzyPlan::Or(Box::new(a.push_relation(r)?), Box::new(b.push_relation(r)?))
            }
            FuzzyPlan::Not(_) => {
                return Err(Error::Unsupported(
                    "projection over a negated sub-query has no fuzzy-set form".into(),
                ))
            }
        })
    }

    pub fn eval(&self, p: &ParameterStore) -> Vec<f64> {
        self.trace(p).value
    }

    pub fn trace(&self, p: &ParameterStore) -> FuzzyTrace {
        let kind = p.config.tnorm;
        match self {
            FuzzyPlan::Atom { anchor, rels } => {
                if rels.is_empty() {
                    let mut value = vec![0.0; p.num_entities()];
                    value[anchor.index()] = 1.0;
                    return FuzzyTrace {
                        value,
                        node: Node::Singleton,
                    };
                }
                let generator = p.chain_generator(*anchor, rels);
                FuzzyTrace {
                    value: p.memberships(&generator),
                    node: Node::Atom {
                        anchor: *anchor,
                        rels: rels.clone(),
                        generator,
                    },
                }
            }
            FuzzyPlan::And(a, b) | FuzzyPlan::Or(a, b) => {
                let (ta, tb) = (a.trace(p), b.trace(p));
                let conj = matches!(self, FuzzyPlan::And(..));
                let value = ta
                    .value
                    .iter()
                    .zip(&tb.value)
                    .map(|(&x, &y)| if conj { kind.apply(x, y) } else { kind.co_apply(x, y) })
                    .collect();
                FuzzyTrace {
                    value,
                    node: Node::Binary {
                        conj,
                        lhs: Box::new(ta),
                        rhs: Box::new(tb),
                    },
                }
            }
            FuzzyPlan::Not(a) => {
                let ta = a.trace(p);
                FuzzyTrace {
                    value: ta.value.iter().map(|x| 1.0 - x).collect(),
                    node: Node::Not(Box::new(ta)),
                }
            }
        }
    }
}

fn fold(cs: &[Query], join: impl Fn(FuzzyPlan, FuzzyPlan) -> FuzzyPlan) -> Result<FuzzyPlan> {
    let mut it = cs.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Invalid("connective without operands".into()))?;
    let mut acc = FuzzyPlan::build(first)?;
    for c in it {
        acc = join(acc, FuzzyPlan::build(c)?);
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
enum Node {
    Singleton,
    Atom {
        anchor: EntityId,
        rels: Vec<RelationId>,
        generator: Vec<f64>,
    },
    Binary {
        conj: bool,
        lhs: Box<FuzzyTrace>,
        rhs: Box<FuzzyTrace>,
    },
    Not(Box<FuzzyTrace>),
}

/// Forward values of every plan node, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct FuzzyTrace {
    pub value: Vec<f64>,
    node: Node,
}

impl FuzzyTrace {
    /// Accumulates parameter gradients given `g` = dL/d(value).
    pub fn backward(&self, p: &ParameterStore, g: &[f64], grads: &mut GradientBundle) {
        match &self.node {
            Node::Singleton => {}
            Node::Atom {
                anchor,
                rels,
                generator,
            } => {
                let g_gen = membership_backward(p, generator, &self.value, g, grads);
                grads.entity.add_scaled(anchor.index(), &g_gen, 1.0);
                for r in rels {
                    grads.relation.add_scaled(r.index(), &g_gen, 1.0);
                }
            }
            Node::Binary { conj, lhs, rhs } => {
                let kind: TNormKind = p.config.tnorm;
                let n = g.len();
                let mut gl = vec![0.0; n];
                let mut gr = vec![0.0; n];
                for i in 0..n {
                    let (x, y) = (lhs.value[i], rhs.value[i]);
                    let (dx, dy) = if *conj { kind.grad(x, y) } else { kind.co_grad(x, y) };
                    gl[i] = g[i] * dx;
                    gr[i] = g[i] * dy;
                }
                lhs.backward(p, &gl, grads);
                rhs.backward(p, &gr, grads);
            }
            Node::Not(a) => {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                a.backward(p, &neg, grads);
            }
        }
    }
}

/// Backward pass of `μ = σ(generator · E_eᵀ)`. Accumulates entity-row
/// gradients and returns dL/d(generator).
pub(crate) fn membership_backward(
    p: &ParameterStore,
    generator: &[f64],
    mu: &[f64],
    g: &[f64],
    grads: &mut GradientBundle,
) -> Vec<f64> {
    let mut g_gen = vec![0.0; generator.len()];
    for e in 0..mu.len() {
        let gz = g[e] * mu[e] * (1.0 - mu[e]);
        if gz == 0.0 {
            continue;
        }
        for (acc, x) in g_gen.iter_mut().zip(p.entity.row(e)) {
            *acc += gz * x;
        }
        grads.entity.add_scaled(e, generator, gz);
    }
    g_gen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn e(i: u32) -> Query {
        Query::Anchor(EntityId(i))
    }

    fn p(r: u32, q: Query) -> Query {
        Query::proj(RelationId(r), q)
    }

    #[test]
    fn trailing_projection_is_distributed() {
        let ip = p(2, Query::And(vec![p(0, e(0)), p(1, e(1))]));
        let plan = FuzzyPlan::build(&ip).unwrap();
        let want = FuzzyPlan::And(
            Box::new(FuzzyPlan::Atom {
                anchor: EntityId(0),
                rels: vec![RelationId(0), RelationId(2)],
            }),
            Box::new(FuzzyPlan::Atom {
                anchor: EntityId(1),
                rels: vec![RelationId(1), RelationId(2)],
            }),
        );
        assert_eq!(plan, want);
        assert!(FuzzyPlan::build(&p(0, Query::negate(p(1, e(0))))).is_err());
    }

    #[test]
    fn union_uses_dual_conorm() {
        let store = init_params(7, 1, 2, ModelConfig { dim: 4, ..Default::default() }, 3).unwrap();
        let q = Query::Or(vec![p(0, e(0)), p(1, e(1))]);
        let got = store.query_fuzzy_set(&q).unwrap();
        let a = store.atomic_query_fuzzy_set(EntityId(0), &[RelationId(0)]).unwrap();
        let b = store.atomic_query_fuzzy_set(EntityId(1), &[RelationId(1)]).unwrap();
        for i in 0..7 {
            let want = 1.0 - (1.0 - a.get(i)) * (1.0 - b.get(i));
            assert!((got.get(i) - want).abs() < 1e-15);
        }
    }
}
