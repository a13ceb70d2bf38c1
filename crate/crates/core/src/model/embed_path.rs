//! Query embeddings for entity retrieval: translation for projection,
//! learned element-wise attention for intersection and element-wise max
//! for union. N-ary connectives fold left to right.

use crate::error::{Error, Result};
use crate::kb::{EntityId, RelationId};
use crate::query::Query;

use super::{GradientBundle, ParameterStore};

#[derive(Debug, Clone)]
enum Node {
    Anchor(EntityId),
    Proj(RelationId, Box<EmbedTrace>),
    And {
        lhs: Box<EmbedTrace>,
        rhs: Box<EmbedTrace>,
        input: Vec<f64>,
        pre: Vec<f64>,
        hidden: Vec<f64>,
        attention: Vec<f64>,
    },
    Or {
        lhs: Box<EmbedTrace>,
        rhs: Box<EmbedTrace>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct EmbedTrace {
    pub value: Vec<f64>,
    node: Node,
}

fn intersect(p: &ParameterStore, lhs: EmbedTrace, rhs: EmbedTrace) -> EmbedTrace {
    let d = p.dim();
    let input = p.concat(&lhs.value, &rhs.value);
    let cache = p.omega.forward_cached(&input);
    let a = &cache.out;
    let value = (0..d)
        .map(|k| a[k] * lhs.value[k] + a[d + k] * rhs.value[k])
        .collect();
    EmbedTrace {
        value,
        node: Node::And {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            input,
            pre: cache.pre,
            hidden: cache.hidden,
            attention: cache.out,
        },
    }
}

fn unite(lhs: EmbedTrace, rhs: EmbedTrace) -> EmbedTrace {
    let value = lhs
        .value
        .iter()
        .zip(&rhs.value)
        .map(|(&a, &b)| if a >= b { a } else { b })
        .collect();
    EmbedTrace {
        value,
        node: Node::Or {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
    }
}

pub(crate) fn embed_forward(p: &ParameterStore, q: &Query) -> Result<EmbedTrace> {
    Ok(match q {
        Query::Anchor(e) => EmbedTrace {
            value: p.entity.row(e.index()).to_vec(),
            node: Node::Anchor(*e),
        },
        Query::Proj(r, c) => {
            let child = embed_forward(p, c)?;
            let value = child
                .value
                .iter()
                .zip(p.relation.row(r.index()))
                .map(|(a, b)| a + b)
                .collect();
            EmbedTrace {
                value,
                node: Node::Proj(*r, Box::new(child)),
            }
        }
        Query::And(cs) | Query::Or(cs) => {
            let conj = matches!(q, Query::And(_));
            let mut it = cs.iter();
            let first = it
                .next()
                .ok_or_else(|| Error::Invalid("connective without operands".into()))?;
            let mut acc = embed_forward(p, first)?;
            for c in it {
                let next = embed_forward(p, c)?;
                acc = if conj { intersect(p, acc, next) } else { unite(acc, next) };
            }
            acc
        }
        Query::Not(_) => {
            return Err(Error::Unsupported(
                "negation has no query-embedding form for entity retrieval".into(),
            ))
        }
    })
}

impl EmbedTrace {
    pub fn backward(&self, p: &ParameterStore, g: &[f64], grads: &mut GradientBundle) {
        match &self.node {
            Node::Anchor(e) => grads.entity.add_scaled(e.index(), g, 1.0),
            Node::Proj(r, c) => {
                grads.relation.add_scaled(r.index(), g, 1.0);
                c.backward(p, g, grads);
            }
            Node::And {
                lhs,
                rhs,
                input,
                pre,
                hidden,
                attention,
            } => {
                let d = p.dim();
                let mut g_att = vec![0.0; 2 * d];
                let mut gl = vec![0.0; d];
                let mut gr = vec![0.0; d];
                for k in 0..d {
                    g_att[k] = g[k] * lhs.value[k];
                    g_att[d + k] = g[k] * rhs.value[k];
                    gl[k] = g[k] * attention[k];
                    gr[k] = g[k] * attention[d + k];
                }
                let g_in = grads.omega.backprop(&p.omega, input, pre, hidden, &g_att);
                for k in 0..d {
                    gl[k] += g_in[k];
                    gr[k] += g_in[d + k];
                }
                lhs.backward(p, &gl, grads);
                rhs.backward(p, &gr, grads);
            }
            Node::Or { lhs, rhs } => {
                let d = g.len();
                let mut gl = vec![0.0; d];
                let mut gr = vec![0.0; d];
                for k in 0..d {
                    if lhs.value[k] >= rhs.value[k] {
                        gl[k] = g[k];
                    } else {
                        gr[k] = g[k];
                    }
                }
                lhs.backward(p, &gl, grads);
                rhs.backward(p, &gr, grads);
            }
        }
    }
}
