use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{EntityId, RelationId};

/// A query tree. Leaves are anchor entities; `And`/`Or` carry at least two
/// children in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    Anchor(EntityId),
    Proj(RelationId, Box<Query>),
    And(Vec<Query>),
    Or(Vec<Query>),
    Not(Box<Query>),
}

impl Query {
    pub fn anchor(e: EntityId) -> Self {
        Query::Anchor(e)
    }

    pub fn proj(r: RelationId, child: Query) -> Self {
        Query::Proj(r, Box::new(child))
    }

    /// A projection chain `anchor -r1-> ... -rn->`.
    pub fn chain(anchor: EntityId, rels: &[RelationId]) -> Self {
        rels.iter().fold(Query::Anchor(anchor), |q, &r| Query::proj(r, q))
    }

    pub fn negate(child: Query) -> Self {
        Query::Not(Box::new(child))
    }

    /// Checks the structural invariants: connectives have at least two
    /// children and the root is not a bare anchor.
    pub fn validate(&self) -> Result<()> {
        if matches!(self, Query::Anchor(_)) {
            return Err(Error::Invalid("a bare anchor is not a query".into()));
        }
        self.validate_node()
    }

    fn validate_node(&self) -> Result<()> {
        match self {
            Query::Anchor(_) => Ok(()),
            Query::Proj(_, c) | Query::Not(c) => c.validate_node(),
            Query::And(cs) | Query::Or(cs) => {
                if cs.len() < 2 {
                    return Err(Error::Invalid("connectives need at least two operands".into()));
                }
                cs.iter().try_for_each(Query::validate_node)
            }
        }
    }

    pub fn contains_negation(&self) -> bool {
        match self {
            Query::Anchor(_) => false,
            Query::Not(_) => true,
            Query::Proj(_, c) => c.contains_negation(),
            Query::And(cs) | Query::Or(cs) => cs.iter().any(Query::contains_negation),
        }
    }

    /// If this is a pure projection chain, its anchor and relations in
    /// application order.
    pub fn as_chain(&self) -> Option<(EntityId, Vec<RelationId>)> {
        match self {
            Query::Anchor(e) => Some((*e, Vec::new())),
            Query::Proj(r, c) => {
                let (e, mut rels) = c.as_chain()?;
                rels.push(*r);
                Some((e, rels))
            }
            _ => None,
        }
    }

    pub fn anchors(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.collect_anchors(&mut out);
        out
    }

    fn collect_anchors(&self, out: &mut Vec<EntityId>) {
        match self {
            Query::Anchor(e) => out.push(*e),
            Query::Proj(_, c) | Query::Not(c) => c.collect_anchors(out),
            Query::And(cs) | Query::Or(cs) => cs.iter().for_each(|c| c.collect_anchors(out)),
        }
    }

    /// A structural shape name. The nine standard shapes get their usual
    /// names; other shapes are named by appending `p` for each projection
    /// over a connective (so an `ip` query with one more hop is `ipp`).
    pub fn shape_name(&self) -> String {
        if let Some(t) = QueryType::classify(self) {
            return t.as_str().to_string();
        }
        match self {
            Query::Anchor(_) => "e".into(),
            Query::Proj(_, c) => match c.as_chain() {
                Some((_, rels)) => format!("{}p", rels.len() + 1),
                None => format!("{}p", c.shape_name()),
            },
            Query::Not(c) => format!("n({})", c.shape_name()),
            Query::And(cs) => format!("and({})", join_shapes(cs)),
            Query::Or(cs) => format!("or({})", join_shapes(cs)),
        }
    }
}

fn join_shapes(cs: &[Query]) -> String {
    cs.iter().map(Query::shape_name).collect::<Vec<_>>().join(",")
}

/// The nine query shapes used for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryType {
    #[serde(rename = "1p")]
    P1,
    #[serde(rename = "2p")]
    P2,
    #[serde(rename = "3p")]
    P3,
    #[serde(rename = "2i")]
    I2,
    #[serde(rename = "3i")]
    I3,
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "ip")]
    Ip,
    #[serde(rename = "2u")]
    U2,
    #[serde(rename = "up")]
    Up,
}

impl QueryType {
    pub const ALL: [QueryType; 9] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Pi,
        QueryType::Ip,
        QueryType::U2,
        QueryType::Up,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::Pi => "pi",
            QueryType::Ip => "ip",
            QueryType::U2 => "2u",
            QueryType::Up => "up",
        }
    }

    /// Recognizes one of the nine shapes. `pi` accepts its two branches in
    /// either order.
    pub fn classify(q: &Query) -> Option<QueryType> {
        let chain_len = |q: &Query| q.as_chain().map(|(_, r)| r.len());
        let all_1p = |cs: &[Query]| cs.iter().all(|c| chain_len(c) == Some(1));
        match q {
            Query::Proj(_, c) => match (chain_len(q), c.as_ref()) {
                (Some(1), _) => Some(QueryType::P1),
                (Some(2), _) => Some(QueryType::P2),
                (Some(3), _) => Some(QueryType::P3),
                (None, Query::And(cs)) if cs.len() == 2 && all_1p(cs) => Some(QueryType::Ip),
                (None, Query::Or(cs)) if cs.len() == 2 && all_1p(cs) => Some(QueryType::Up),
                _ => None,
            },
            Query::And(cs) if all_1p(cs) && cs.len() == 2 => Some(QueryType::I2),
            Query::And(cs) if all_1p(cs) && cs.len() == 3 => Some(QueryType::I3),
            Query::And(cs) if cs.len() == 2 => {
                let mut lens: Vec<_> = cs.iter().map(chain_len).collect();
                lens.sort();
                (lens == [Some(1), Some(2)]).then_some(QueryType::Pi)
            }
            Query::Or(cs) if cs.len() == 2 && all_1p(cs) => Some(QueryType::U2),
            _ => None,
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown query type `{s}`")))
    }
}
