//! Multi-hop logical queries: representation, concrete syntax, crisp
//! answering and BetaE-style sampling.

mod ast;
mod instance;
mod oracle;
mod parse;
mod sample;

pub use ast::{Query, QueryType};
pub use instance::{read_instances, write_instances, QueryInstance};
pub use oracle::{answer_concepts, answer_entities, KbIndex};
pub use parse::{parse_query, render_query};
pub use sample::{enumerate_1p, enumerate_eval_1p, random_query, sample_eval_queries, sample_queries, DEFAULT_MAX_ANSWERS};
