use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, AnswerLevel};
use crate::fuzzy::TNormKind;
use crate::kb::{ConceptId, EntityId, KnowledgeBase};
use crate::model::{init_params, ModelConfig, ParameterStore};
use crate::query::QueryInstance;

use super::{adam_step, loss_and_gradients, AdamState, Batch, ConItem, EntItem, InsItem, NegativeSampler, SubItem, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub dim: usize,
    pub batch_size: usize,
    /// Negatives per positive.
    pub m: usize,
    pub max_steps: usize,
    /// Steps between validation runs.
    pub valid_interval: usize,
    pub patience: usize,
    pub seed: u64,
    pub tnorm: TNormKind,
    pub gamma: f64,
    pub eps: f64,
    pub p_norm: f64,
    pub use_con: bool,
    pub use_ent: bool,
    pub use_sub: bool,
    pub use_ins: bool,
    /// Upper bound on validation instances per run; 0 means all.
    pub valid_limit: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        TrainConfig {
            lr: 1e-3,
            dim: model.dim,
            batch_size: 512,
            m: 4,
            max_steps: 10_000,
            valid_interval: 50,
            patience: 3,
            seed: 0,
            tnorm: model.tnorm,
            gamma: model.gamma,
            eps: model.eps,
            p_norm: model.p_norm,
            use_con: true,
            use_ent: true,
            use_sub: true,
            use_ins: true,
            valid_limit: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be positive");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.dim == 0 || self.valid_interval == 0 {
            return bad("batch_size, dim and valid_interval must be at least 1");
        }
        if !(self.use_con || self.use_ent || self.use_sub || self.use_ins) {
            return bad("every task is disabled");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            gamma: self.gamma,
            eps: self.eps,
            p_norm: self.p_norm,
            tnorm: self.tnorm,
        }
    }
}

/// Inputs of a training run. `kb` is the training graph; its vocabulary
/// fixes the parameter shapes.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub kb: &'a KnowledgeBase,
    pub train: &'a [QueryInstance],
    pub valid: &'a [QueryInstance],
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Step {
        step: usize,
        loss: f64,
        con: f64,
        ent: f64,
        sub: f64,
        ins: f64,
        lr: f64,
    },
    Valid {
        step: usize,
        con_mrr: Option<f64>,
        ent_mrr: Option<f64>,
        best: bool,
    },
}

impl LogRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

/// Stops after `patience` consecutive validations without strict
/// improvement over the best value so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<f64>,
    bad: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: None,
            bad: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, metric: f64) -> Observation {
        if self.best.map_or(true, |b| metric > b) {
            self.best = Some(metric);
            self.bad = 0;
            Observation {
                improved: true,
                stop: false,
            }
        } else {
            self.bad += 1;
            Observation {
                improved: false,
                stop: self.bad >= self.patience,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation point, or the final ones when no
    /// validation ran.
    pub params: ParameterStore,
    pub best_step: usize,
    pub best_metric: Option<f64>,
    pub steps_run: usize,
    pub stopped_early: bool,
    pub log: Vec<LogRecord>,
}

/// Endless shuffled pass over a fixed list, reshuffled at every wrap.
struct Stream<T> {
    items: Vec<T>,
    order: Vec<usize>,
    pos: usize,
}

impl<T> Stream<T> {
    fn new(items: Vec<T>, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(rng);
        Stream { items, order, pos: 0 }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> &T {
        if self.pos == self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        &self.items[self.order[self.pos - 1]]
    }

    /// Items per step: the configured batch size, capped by the stream
    /// length so no item repeats within a batch.
    fn take(&self, batch_size: usize) -> usize {
        batch_size.min(self.items.len())
    }
}

fn required<T>(items: Vec<T>, on: bool, name: &str, rng: &mut ChaCha8Rng) -> Result<Option<Stream<T>>> {
    if !on {
        return Ok(None);
    }
    if items.is_empty() {
        return Err(Error::Config(format!("the {name} stream is empty; disable the task to train without it")));
    }
    Ok(Some(Stream::new(items, rng)))
}

/// Validation metric: mean of the concept-level and entity-level average
/// MRR over whichever levels have queries.
fn validation_metric(p: &ParameterStore, valid: &[QueryInstance]) -> Result<(Option<f64>, Option<f64>, f64)> {
    let report = evaluate(p, valid)?;
    let con = report.average(AnswerLevel::TBox).map(|m| m.mrr);
    let ent = report.average(AnswerLevel::ABox).map(|m| m.mrr);
    let vals: Vec<f64> = [con, ent].into_iter().flatten().collect();
    let metric = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
    Ok((con, ent, metric))
}

/// Runs mini-batch training with one batch per active task per step and
/// early stopping on the validation metric.
pub fn train(data: TrainData<'_>, config: &TrainConfig, mut on_log: impl FnMut(&LogRecord)) -> Result<TrainOutcome> {
    config.validate()?;
    let kb = data.kb;
    let (ne, nc, nr) = (kb.num_entities(), kb.num_concepts(), kb.num_relations());
    let mut params = init_params(ne, nc, nr, config.model_config(), config.seed)?;
    let mut adam = AdamState::new(&params);
    let mut negatives = NegativeSampler::new(ne, nc, config.seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));

    let con_items: Vec<&QueryInstance> = data.train.iter().filter(|q| !q.concept_answers.is_empty()).collect();
    let ent_items: Vec<&QueryInstance> = data.train.iter().filter(|q| !q.entity_answers.is_empty()).collect();
    let mut con = required(con_items, config.use_con, "concept retrieval", &mut rng)?;
    let mut ent = required(ent_items, config.use_ent, "entity retrieval", &mut rng)?;
    let sub_items: Vec<(ConceptId, ConceptId)> = kb.tbox.iter().copied().collect();
    let mut sub = required(sub_items, config.use_sub, "subsumption", &mut rng)?;
    let ins_items: Vec<(EntityId, ConceptId)> = kb.abox_ec.iter().copied().collect();
    let mut ins = required(ins_items, config.use_ins, "instantiation", &mut rng)?;

    let valid: &[QueryInstance] = match config.valid_limit {
        0 => data.valid,
        n => &data.valid[..n.min(data.valid.len())],
    };
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best: Option<(ParameterStore, usize)> = None;
    let mut log = Vec::new();
    let mut emit = |r: LogRecord, log: &mut Vec<LogRecord>| {
        on_log(&r);
        log.push(r);
    };
    let m = config.m;
    let mut steps_run = 0;
    let mut stopped_early = false;

    for step in 0..config.max_steps {
        let mut batch = Batch::default();
        if let Some(s) = con.as_mut() {
            for _ in 0..s.take(config.batch_size) {
                let inst = *s.next(&mut rng);
                let positive = inst.concept_answers[rng.gen_range(0..inst.concept_answers.len())];
                let negs = negatives.sample(Task::Con(positive), m)?;
                batch.con.push(ConItem {
                    query: inst.ast.clone(),
                    positive,
                    negatives: negs.into_iter().map(|t| match t {
                        Task::Con(c) => c,
                        _ => unreachable!(),
                    }).collect(),
                });
            }
        }
        if let Some(s) = ent.as_mut() {
            for _ in 0..s.take(config.batch_size) {
                let inst = *s.next(&mut rng);
                let positive = inst.entity_answers[rng.gen_range(0..inst.entity_answers.len())];
                let negs = negatives.sample(Task::Ent(positive), m)?;
                batch.ent.push(EntItem {
                    query: inst.ast.clone(),
                    positive,
                    negatives: negs.into_iter().map(|t| match t {
                        Task::Ent(e) => e,
                        _ => unreachable!(),
                    }).collect(),
                });
            }
        }
        if let Some(s) = sub.as_mut() {
            for _ in 0..s.take(config.batch_size) {
                let (a, b) = *s.next(&mut rng);
                let negs = negatives.sample(Task::Sub(a, b), m)?;
                batch.sub.push(SubItem {
                    sub: a,
                    sup: b,
                    negatives: negs.into_iter().map(|t| match t {
                        Task::Sub(x, y) => (x, y),
                        _ => unreachable!(),
                    }).collect(),
                });
            }
        }
        if let Some(s) = ins.as_mut() {
            for _ in 0..s.take(config.batch_size) {
                let (e, c) = *s.next(&mut rng);
                let negs = negatives.sample(Task::Ins(c, e), m)?;
                batch.ins.push(InsItem {
                    concept: c,
                    entity: e,
                    negatives: negs.into_iter().map(|t| match t {
                        Task::Ins(x, y) => (x, y),
                        _ => unreachable!(),
                    }).collect(),
                });
            }
        }

        let (l, grads) = loss_and_gradients(&params, &batch, m)?;
        if !l.total.is_finite() {
            return Err(Error::Diverged(format!("loss is {} at step {step}", l.total)));
        }
        emit(
            LogRecord::Step {
                step,
                loss: l.total,
                con: l.con,
                ent: l.ent,
                sub: l.sub,
                ins: l.ins,
                lr: config.lr,
            },
            &mut log,
        );
        adam_step(&mut params, &mut adam, &grads, config.lr);
        if !params.is_finite() {
            return Err(Error::Diverged(format!("non-finite parameter after step {step}")));
        }
        steps_run = step + 1;

        if steps_run % config.valid_interval == 0 && !valid.is_empty() {
            let (con_mrr, ent_mrr, metric) = validation_metric(&params, valid)?;
            let obs = stopper.observe(metric);
            if obs.improved {
                best = Some((params.clone(), steps_run));
            }
            log::info!("step {steps_run}: validation {metric:.4} (best {:.4})", stopper.best().unwrap_or(metric));
            emit(
                LogRecord::Valid {
                    step: steps_run,
                    con_mrr,
                    ent_mrr,
                    best: obs.improved,
                },
                &mut log,
            );
            if obs.stop {
                stopped_early = true;
                break;
            }
        }
    }

    let best_metric = stopper.best();
    let (params, best_step) = best.unwrap_or((params, steps_run));
    Ok(TrainOutcome {
        params,
        best_step,
        best_metric,
        steps_run,
        stopped_early,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_sequence() {
        let mut s = EarlyStopper::new(3);
        let seq = [0.2, 0.25, 0.24, 0.23, 0.22];
        let mut best_at = 0;
        let mut stopped_at = None;
        for (i, &v) in seq.iter().enumerate() {
            let o = s.observe(v);
            if o.improved {
                best_at = i + 1;
            }
            if o.stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(5));
        assert_eq!(best_at, 2);
        assert_eq!(s.best(), Some(0.25));
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { lr: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { m: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { patience: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn log_line_shapes() {
        let r = LogRecord::Valid {
            step: 50,
            con_mrr: Some(0.5),
            ent_mrr: Some(0.25),
            best: true,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(v["step"], 50);
        assert_eq!(v["best"], true);
        let back: LogRecord = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
    }
}
