//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fuzzy::TNormKind;
use crate::kb::{ConceptId, EntityId};
use crate::model::{init_params, ModelConfig, ParameterStore};
use crate::query::{random_query, QueryType};

use super::{loss, loss_and_gradients, Batch, ConItem, EntItem, InsItem, NegativeSampler, SubItem, Task};

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub dim: usize,
    pub entities: usize,
    pub concepts: usize,
    pub relations: usize,
    pub m: usize,
    pub seed: u64,
    /// Step is `h_scale * max(1, |x|)`.
    pub h_scale: f64,
    /// Floor of the relative-error denominator.
    pub denom_floor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            dim: 8,
            entities: 50,
            concepts: 10,
            relations: 5,
            m: 4,
            seed: 7,
            h_scale: 1e-6,
            denom_floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub head: &'static str,
    pub qtype: Option<QueryType>,
    pub tnorm: TNormKind,
    /// Largest relative error over every parameter coordinate.
    pub max_rel_err: f64,
    /// Tensor and flat index where it occurred.
    pub worst: (&'static str, usize),
    pub coords: usize,
}

fn compare(p: &mut ParameterStore, batch: &Batch, m: usize, cfg: &GradcheckConfig) -> Result<(f64, (&'static str, usize), usize)> {
    let (_, grads) = loss_and_gradients(p, batch, m)?;
    let analytic: Vec<(&'static str, Vec<f64>)> =
        grads.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let mut worst = (0.0, ("", 0));
    let mut coords = 0;
    for (k, (name, a)) in analytic.iter().enumerate() {
        for i in 0..a.len() {
            let x = p.tensors_mut()[k].1[i];
            let h = cfg.h_scale * x.abs().max(1.0);
            p.tensors_mut()[k].1[i] = x + h;
            let up = loss(p, batch, m)?.total;
            p.tensors_mut()[k].1[i] = x - h;
            let down = loss(p, batch, m)?.total;
            p.tensors_mut()[k].1[i] = x;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a[i] - numeric).abs() / a[i].abs().max(numeric.abs()).max(cfg.denom_floor);
            if rel > worst.0 {
                worst = (rel, (*name, i));
            }
            coords += 1;
        }
    }
    Ok((worst.0, worst.1, coords))
}

/// Checks every loss head against finite differences: the concept and
/// entity heads once per query shape, subsumption and instantiation once,
/// all under each t-norm kind.
pub fn gradcheck(cfg: &GradcheckConfig) -> Result<Vec<GradcheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut neg = NegativeSampler::new(cfg.entities, cfg.concepts, cfg.seed ^ 0x5eed);
    let mut rows = Vec::new();
    for tnorm in TNormKind::ALL {
        let model = ModelConfig {
            dim: cfg.dim,
            tnorm,
            ..ModelConfig::default()
        };
        let mut p = init_params(cfg.entities, cfg.concepts, cfg.relations, model, rng.gen())?;
        let concept = |rng: &mut ChaCha8Rng| ConceptId::from_index(rng.gen_range(0..cfg.concepts));
        let entity = |rng: &mut ChaCha8Rng| EntityId::from_index(rng.gen_range(0..cfg.entities));

        for qtype in QueryType::ALL {
            let query = random_query(qtype, cfg.entities, cfg.relations, &mut rng);
            let c = concept(&mut rng);
            let negatives = neg
                .sample(Task::Con(c), cfg.m)?
                .into_iter()
                .map(|t| match t {
                    Task::Con(x) => x,
                    _ => unreachable!(),
                })
                .collect();
            let batch = Batch {
                con: vec![ConItem { query: query.clone(), positive: c, negatives }],
                ..Batch::default()
            };
            let (err, worst, coords) = compare(&mut p, &batch, cfg.m, cfg)?;
            rows.push(GradcheckRow { head: "con", qtype: Some(qtype), tnorm, max_rel_err: err, worst, coords });

            let e = entity(&mut rng);
            let negatives = neg
                .sample(Task::Ent(e), cfg.m)?
                .into_iter()
                .map(|t| match t {
                    Task::Ent(x) => x,
                    _ => unreachable!(),
                })
                .collect();
            let batch = Batch {
                ent: vec![EntItem { query, positive: e, negatives }],
                ..Batch::default()
            };
            let (err, worst, coords) = compare(&mut p, &batch, cfg.m, cfg)?;
            rows.push(GradcheckRow { head: "ent", qtype: Some(qtype), tnorm, max_rel_err: err, worst, coords });
        }

        let (a, b) = (concept(&mut rng), concept(&mut rng));
        let negatives = neg
            .sample(Task::Sub(a, b), cfg.m)?
            .into_iter()
            .map(|t| match t {
                Task::Sub(x, y) => (x, y),
                _ => unreachable!(),
            })
            .collect();
        let batch = Batch {
            sub: vec![SubItem { sub: a, sup: b, negatives }],
            ..Batch::default()
        };
        let (err, worst, coords) = compare(&mut p, &batch, cfg.m, cfg)?;
        rows.push(GradcheckRow { head: "sub", qtype: None, tnorm, max_rel_err: err, worst, coords });

        let (c, e) = (concept(&mut rng), entity(&mut rng));
        let negatives = neg
            .sample(Task::Ins(c, e), cfg.m)?
            .into_iter()
            .map(|t| match t {
                Task::Ins(x, y) => (x, y),
                _ => unreachable!(),
            })
            .collect();
        let batch = Batch {
            ins: vec![InsItem { concept: c, entity: e, negatives }],
            ..Batch::default()
        };
        let (err, worst, coords) = compare(&mut p, &batch, cfg.m, cfg)?;
        rows.push(GradcheckRow { head: "ins", qtype: None, tnorm, max_rel_err: err, worst, coords });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let rows = gradcheck(&GradcheckConfig::default()).unwrap();
        assert_eq!(rows.len(), 3 * (2 * 9 + 2));
        for r in &rows {
            println!("{:?} {:>3} {:<4} {:.3e} at {:?}", r.tnorm, r.head, r.qtype.map(|q| q.as_str()).unwrap_or("-"), r.max_rel_err, r.worst);
        }
        for r in &rows {
            assert!(r.max_rel_err <= 1e-4, "{r:?}");
        }
    }
}
