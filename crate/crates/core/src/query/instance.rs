use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{ConceptId, EntityId, Vocab};

use super::{parse_query, render_query, Query, QueryType};

/// A query together with its entity-level and concept-level answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryInstance {
    pub ast: Query,
    pub qtype: QueryType,
    pub entity_answers: Vec<EntityId>,
    pub concept_answers: Vec<ConceptId>,
}

#[derive(Serialize, Deserialize)]
struct InstanceLine {
    qtype: QueryType,
    query: String,
    entity_answers: Vec<String>,
    concept_answers: Vec<String>,
}

impl QueryInstance {
    pub fn to_json_line(&self, vocab: &Vocab) -> String {
        let line = InstanceLine {
            qtype: self.qtype,
            query: render_query(&self.ast, vocab),
            entity_answers: self
                .entity_answers
                .iter()
                .map(|&e| vocab.entity_name(e).to_string())
                .collect(),
            concept_answers: self
                .concept_answers
                .iter()
                .map(|&c| vocab.concept_name(c).to_string())
                .collect(),
        };
        serde_json::to_string(&line).expect("instance serializes")
    }

    pub fn from_json_line(text: &str, vocab: &Vocab) -> Result<Self> {
        let line: InstanceLine =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("instance line: {e}")))?;
        let ast = parse_query(&line.query, vocab)?;
        if QueryType::classify(&ast) != Some(line.qtype) {
            return Err(Error::Invalid(format!(
                "query `{}` does not have shape {}",
                line.query, line.qtype
            )));
        }
        let entity_answers = line
            .entity_answers
            .iter()
            .map(|n| {
                vocab.entity(n).ok_or_else(|| Error::UnknownName {
                    kind: "entity",
                    name: n.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let concept_answers = line
            .concept_answers
            .iter()
            .map(|n| {
                vocab.concept(n).ok_or_else(|| Error::UnknownName {
                    kind: "concept",
                    name: n.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(QueryInstance {
            ast,
            qtype: line.qtype,
            entity_answers,
            concept_answers,
        })
    }
}

pub fn write_instances(path: &Path, vocab: &Vocab, instances: &[QueryInstance]) -> Result<()> {
    let mut out = Vec::new();
    for i in instances {
        writeln!(out, "{}", i.to_json_line(vocab)).expect("write to vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path, vocab: &Vocab) -> Result<Vec<QueryInstance>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(QueryInstance::from_json_line(&line, vocab).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: n + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
