//! Filtered ranking metrics and combined entity/concept answering.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy;
use crate::kb::{ConceptId, DegradedKb, EntityId, Vocab};
use crate::model::ParameterStore;
use crate::query::{Query, QueryInstance};

/// Average-tie rank of `target` after removing the other known positives.
///
/// `rank = #{strictly greater} + (#{equal, including target} + 1) / 2`.
pub fn rank_filtered(scores: &[f64], target: usize, known_positives: &HashSet<usize>) -> Result<f64> {
    let t = *scores
        .get(target)
        .ok_or_else(|| Error::Invalid(format!("target {target} is not a candidate")))?;
    if !t.is_finite() {
        return Err(Error::Invalid("non-finite target score".into()));
    }
    let mut greater = 0usize;
    let mut equal = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i != target && known_positives.contains(&i) {
            continue;
        }
        if s > t {
            greater += 1;
        } else if s == t {
            equal += 1;
        }
    }
    Ok(greater as f64 + (equal as f64 + 1.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerLevel {
    /// Concept-level answers.
    TBox,
    /// Entity-level answers.
    ABox,
}

impl fmt::Display for AnswerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerLevel::TBox => "TBox",
            AnswerLevel::ABox => "ABox",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n: usize,
}

/// Per-query metrics: averages over the query's gold answers.
fn query_metrics(ranks: &[f64]) -> [f64; 4] {
    let n = ranks.len() as f64;
    let mut acc = [0.0; 4];
    for &r in ranks {
        acc[0] += 1.0 / r;
        acc[1] += (r <= 1.0) as u8 as f64;
        acc[2] += (r <= 3.0) as u8 as f64;
        acc[3] += (r <= 10.0) as u8 as f64;
    }
    acc.map(|v| v / n)
}

fn mean_metrics(per_query: &[[f64; 4]]) -> Metrics {
    let n = per_query.len();
    let mut acc = [0.0; 4];
    for q in per_query {
        for k in 0..4 {
            acc[k] += q[k];
        }
    }
    let d = n.max(1) as f64;
    Metrics {
        mrr: acc[0] / d,
        hits1: acc[1] / d,
        hits3: acc[2] / d,
        hits10: acc[3] / d,
        n,
    }
}

/// Metrics per answer level and query shape, plus an unweighted average
/// across shapes for each level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub rows: BTreeMap<AnswerLevel, BTreeMap<String, Metrics>>,
}

impl RankingReport {
    fn from_ranks(ranks: BTreeMap<(AnswerLevel, String), Vec<[f64; 4]>>) -> Self {
        let mut rows: BTreeMap<AnswerLevel, BTreeMap<String, Metrics>> = BTreeMap::new();
        for ((level, shape), per_query) in ranks {
            rows.entry(level).or_default().insert(shape, mean_metrics(&per_query));
        }
        RankingReport { rows }
    }

    /// Element-wise mean of reports over independent runs. Rows missing
    /// from any run are dropped.
    pub fn mean(reports: &[RankingReport]) -> Option<RankingReport> {
        let (first, rest) = reports.split_first()?;
        let k = reports.len() as f64;
        let mut rows = BTreeMap::new();
        for (level, shapes) in &first.rows {
            let mut out = BTreeMap::new();
            for (shape, m0) in shapes {
                let others: Option<Vec<&Metrics>> = rest.iter().map(|r| r.get(*level, shape)).collect();
                let Some(others) = others else { continue };
                let all = std::iter::once(m0).chain(others);
                let mut acc = Metrics { mrr: 0.0, hits1: 0.0, hits3: 0.0, hits10: 0.0, n: m0.n };
                for m in all {
                    acc.mrr += m.mrr / k;
                    acc.hits1 += m.hits1 / k;
                    acc.hits3 += m.hits3 / k;
                    acc.hits10 += m.hits10 / k;
                }
                out.insert(shape.clone(), acc);
            }
            rows.insert(*level, out);
        }
        Some(RankingReport { rows })
    }

    pub fn get(&self, level: AnswerLevel, shape: &str) -> Option<&Metrics> {
        self.rows.get(&level)?.get(shape)
    }

    /// Arithmetic mean of the per-shape rows of one level.
    pub fn average(&self, level: AnswerLevel) -> Option<Metrics> {
        let rows = self.rows.get(&level)?;
        if rows.is_empty() {
            return None;
        }
        let k = rows.len() as f64;
        let sum = |f: fn(&Metrics) -> f64| rows.values().map(f).sum::<f64>() / k;
        Some(Metrics {
            mrr: sum(|m| m.mrr),
            hits1: sum(|m| m.hits1),
            hits3: sum(|m| m.hits3),
            hits10: sum(|m| m.hits10),
            n: rows.values().map(|m| m.n).sum(),
        })
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            level: AnswerLevel,
            qtype: &'a str,
            #[serde(flatten)]
            metrics: Metrics,
        }
        let mut rows = Vec::new();
        let avgs: Vec<(AnswerLevel, Metrics)> = self
            .rows
            .keys()
            .filter_map(|&l| self.average(l).map(|m| (l, m)))
            .collect();
        for (level, shapes) in &self.rows {
            for (shape, m) in shapes {
                rows.push(Row {
                    level: *level,
                    qtype: shape,
                    metrics: *m,
                });
            }
            if let Some((_, m)) = avgs.iter().find(|(l, _)| l == level) {
                rows.push(Row {
                    level: *level,
                    qtype: "avg",
                    metrics: *m,
                });
            }
        }
        serde_json::to_string_pretty(&rows).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<6} {:<6} {:>6} {:>8} {:>8} {:>8} {:>8}",
            "level", "qtype", "n", "mrr", "hits@1", "hits@3", "hits@10"
        )
        .unwrap();
        for (level, shapes) in &self.rows {
            let line = |out: &mut String, shape: &str, m: &Metrics| {
                writeln!(
                    out,
                    "{:<6} {:<6} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                    level.to_string(),
                    shape,
                    m.n,
                    m.mrr,
                    m.hits1,
                    m.hits3,
                    m.hits10
                )
                .unwrap();
            };
            for (shape, m) in shapes {
                line(&mut out, shape, m);
            }
            if let Some(m) = self.average(*level) {
                line(&mut out, "avg", &m);
            }
        }
        out
    }
}

/// Scores of every concept for a query, from precomputed normalized
/// concept fuzzy sets.
pub(crate) struct ConceptTable {
    normalized: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ConceptTable {
    pub fn new(p: &ParameterStore) -> Self {
        let normalized = (0..p.num_concepts())
            .into_par_iter()
            .map(|c| {
                let mu = p.memberships(p.concept.row(c));
                let n = fuzzy::normalize(&mu, p.config.p_norm, p.config.eps).0;
                let logs = fuzzy::clamped_logs(&n);
                (n, logs)
            })
            .collect();
        ConceptTable { normalized }
    }

    pub fn scores(&self, p: &ParameterStore, q: &Query) -> Result<Vec<f64>> {
        let q_fs = p.query_fuzzy_set(q)?;
        let (qn, _) = fuzzy::normalize(q_fs.memberships(), p.config.p_norm, p.config.eps);
        let lq = fuzzy::clamped_logs(&qn);
        let mut lm = Vec::with_capacity(qn.len());
        Ok(self
            .normalized
            .iter()
            .map(|(c, lc)| -fuzzy::js_forward(c, lc, &qn, &lq, &mut lm))
            .collect())
    }
}

pub(crate) fn entity_scores(p: &ParameterStore, q: &Query) -> Result<Vec<f64>> {
    let emb = p.query_embedding(q)?;
    Ok((0..p.num_entities())
        .map(|e| p.score_entity(&emb, EntityId::from_index(e)))
        .collect())
}

fn ranks_for(scores: &[f64], gold: &[usize]) -> Result<Vec<f64>> {
    let filter: HashSet<usize> = gold.iter().copied().collect();
    gold.iter().map(|&g| rank_filtered(scores, g, &filter)).collect()
}

/// Ranks every entity and concept for each instance and aggregates
/// filtered MRR and Hits@{1,3,10} per query shape.
///
/// Gold answers double as the filter set, so instances must be labeled
/// against the full knowledge base. Instances without concept answers are
/// left out of the concept-level rows.
pub fn evaluate(p: &ParameterStore, instances: &[QueryInstance]) -> Result<RankingReport> {
    let table = ConceptTable::new(p);
    let per: Vec<Result<(String, [f64; 4], Option<[f64; 4]>)>> = instances
        .par_iter()
        .map(|inst| {
            if inst.entity_answers.is_empty() {
                return Err(Error::Invalid("instance with empty gold answer set".into()));
            }
            let gold: Vec<usize> = inst.entity_answers.iter().map(|e| e.index()).collect();
            let ent = query_metrics(&ranks_for(&entity_scores(p, &inst.ast)?, &gold)?);
            let con = if inst.concept_answers.is_empty() {
                None
            } else {
                let gold: Vec<usize> = inst.concept_answers.iter().map(|c| c.index()).collect();
                Some(query_metrics(&ranks_for(&table.scores(p, &inst.ast)?, &gold)?))
            };
            Ok((inst.qtype.to_string(), ent, con))
        })
        .collect();
    let mut ranks: BTreeMap<(AnswerLevel, String), Vec<[f64; 4]>> = BTreeMap::new();
    for r in per {
        let (shape, ent, con) = r?;
        ranks.entry((AnswerLevel::ABox, shape.clone())).or_default().push(ent);
        if let Some(c) = con {
            ranks.entry((AnswerLevel::TBox, shape)).or_default().push(c);
        }
    }
    Ok(RankingReport::from_ranks(ranks))
}

/// Evaluation of a model trained on the degraded knowledge base: entity
/// answers are ranked among the original entities and concept answers are
/// retrieved by one extra `isInstanceOf` hop, ranked among the entities
/// standing in for concepts.
pub fn one_more_hop_eval(p: &ParameterStore, degraded: &DegradedKb, instances: &[QueryInstance]) -> Result<RankingReport> {
    if p.num_relations() != degraded.kb.num_relations() || p.num_entities() != degraded.kb.num_entities() {
        return Err(Error::Invalid(
            "parameters were not trained on the degraded knowledge base (isInstanceOf missing)".into(),
        ));
    }
    let ne = degraded.original_entities;
    let per: Vec<Result<(String, [f64; 4], Option<[f64; 4]>)>> = instances
        .par_iter()
        .map(|inst| {
            if inst.entity_answers.is_empty() {
                return Err(Error::Invalid("instance with empty gold answer set".into()));
            }
            let scores = entity_scores(p, &inst.ast)?;
            let gold: Vec<usize> = inst.entity_answers.iter().map(|e| e.index()).collect();
            let ent = query_metrics(&ranks_for(&scores[..ne], &gold)?);
            let con = if inst.concept_answers.is_empty() {
                None
            } else {
                let hop = Query::proj(degraded.instance_of, inst.ast.clone());
                let scores = entity_scores(p, &hop)?;
                let gold: Vec<usize> = inst.concept_answers.iter().map(|c| c.index()).collect();
                Some(query_metrics(&ranks_for(&scores[ne..ne + degraded.original_concepts], &gold)?))
            };
            Ok((inst.qtype.to_string(), ent, con))
        })
        .collect();
    let mut ranks: BTreeMap<(AnswerLevel, String), Vec<[f64; 4]>> = BTreeMap::new();
    for r in per {
        let (shape, ent, con) = r?;
        ranks.entry((AnswerLevel::ABox, shape.clone())).or_default().push(ent);
        if let Some(c) = con {
            ranks.entry((AnswerLevel::TBox, shape)).or_default().push(c);
        }
    }
    Ok(RankingReport::from_ranks(ranks))
}

/// One row of a combined answer list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerRow {
    pub level: AnswerLevel,
    pub id: u32,
    pub name: String,
    pub score: f64,
}

fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Top-`k` entities followed by top-`k` concepts, each list sorted by
/// descending score.
pub fn answer(p: &ParameterStore, vocab: &Vocab, q: &Query, k: usize) -> Result<Vec<AnswerRow>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let ent = entity_scores(p, q)?;
    let con = ConceptTable::new(p).scores(p, q)?;
    let mut out = Vec::with_capacity(2 * k);
    for i in top_k(&ent, k) {
        out.push(AnswerRow {
            level: AnswerLevel::ABox,
            id: i as u32,
            name: vocab.entity_name(EntityId::from_index(i)).to_string(),
            score: ent[i],
        });
    }
    for i in top_k(&con, k) {
        out.push(AnswerRow {
            level: AnswerLevel::TBox,
            id: i as u32,
            name: vocab.concept_name(ConceptId::from_index(i)).to_string(),
            score: con[i],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_tie_rank() {
        let s = [5.0, 3.0, 3.0, 1.0];
        assert_eq!(rank_filtered(&s, 1, &HashSet::new()).unwrap(), 2.5);
        assert_eq!(rank_filtered(&s, 0, &HashSet::new()).unwrap(), 1.0);
        assert_eq!(rank_filtered(&s, 3, &HashSet::new()).unwrap(), 4.0);
        assert!(rank_filtered(&s, 4, &HashSet::new()).is_err());
    }

    #[test]
    fn filtering_higher_positive_improves_by_one() {
        let s = [0.9, 0.7, 0.4, 0.2];
        let plain = rank_filtered(&s, 2, &HashSet::new()).unwrap();
        let filt = rank_filtered(&s, 2, &HashSet::from([0, 2])).unwrap();
        assert_eq!(plain - filt, 1.0);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(query_metrics(&[1.0]), [1.0, 1.0, 1.0, 1.0]);
        let m = query_metrics(&[4.0]);
        assert_eq!(m[0], 0.25);
        assert_eq!(m[2], 0.0);
        assert_eq!(m[3], 1.0);
    }
}
