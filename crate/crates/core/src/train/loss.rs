//! The four-task ranking loss
//! `L = -(1/(4m)) Σ_task mean_batch Σ_i log σ(S⁺ - S⁻_i)`
//! and its exact gradient.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fuzzy;
use crate::kb::ConceptId;
use crate::model::{
    embed_forward, log_sigmoid, membership_backward, sigmoid, FuzzyPlan, GradientBundle,
    ParameterStore,
};

use super::Batch;

/// Total loss and the contribution of each task (already weighted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub con: f64,
    pub ent: f64,
    pub sub: f64,
    pub ins: f64,
}

pub fn loss(p: &ParameterStore, batch: &Batch, m: usize) -> Result<LossBreakdown> {
    run(p, batch, m, None)
}

pub fn loss_and_gradients(p: &ParameterStore, batch: &Batch, m: usize) -> Result<(LossBreakdown, GradientBundle)> {
    let mut grads = GradientBundle::zeros_like(p);
    let l = run(p, batch, m, Some(&mut grads))?;
    if !grads.is_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    Ok((l, grads))
}

/// Accumulates `-w Σ_i log σ(s⁺ - s⁻_i)` into `acc` and returns dL/dS for
/// the positive and each negative.
fn pair_terms(pos: f64, negs: &[f64], w: f64, acc: &mut f64) -> Result<(f64, Vec<f64>)> {
    if !pos.is_finite() || negs.iter().any(|s| !s.is_finite()) {
        return Err(Error::Diverged("non-finite score".into()));
    }
    let mut g_pos = 0.0;
    let mut g_negs = Vec::with_capacity(negs.len());
    for &s in negs {
        let delta = pos - s;
        *acc -= w * log_sigmoid(delta);
        // d/dΔ [-log σ(Δ)] = -σ(-Δ)
        let coef = -w * sigmoid(-delta);
        g_pos += coef;
        g_negs.push(-coef);
    }
    Ok((g_pos, g_negs))
}

fn check_m(len: usize, m: usize, task: &str) -> Result<()> {
    if len != m {
        return Err(Error::Invalid(format!(
            "{task} instance has {len} negatives, expected {m}"
        )));
    }
    Ok(())
}

struct ConceptSet {
    mu: Vec<f64>,
    normalized: Vec<f64>,
    logs: Vec<f64>,
    grad_normalized: Vec<f64>,
}

fn run(p: &ParameterStore, batch: &Batch, m: usize, mut grads: Option<&mut GradientBundle>) -> Result<LossBreakdown> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let cfg = p.config;
    let mut out = LossBreakdown::default();
    let weight = |n: usize| 1.0 / (4.0 * m as f64 * n as f64);

    if !batch.con.is_empty() {
        let w = weight(batch.con.len());
        let mut sets: BTreeMap<ConceptId, ConceptSet> = BTreeMap::new();
        for item in &batch.con {
            check_m(item.negatives.len(), m, "concept retrieval")?;
            for &c in std::iter::once(&item.positive).chain(&item.negatives) {
                sets.entry(c).or_insert_with(|| {
                    let mu = p.memberships(p.concept.row(c.index()));
                    let (normalized, _) = fuzzy::normalize(&mu, cfg.p_norm, cfg.eps);
                    let n = mu.len();
                    let logs = fuzzy::clamped_logs(&normalized);
                    ConceptSet {
                        mu,
                        normalized,
                        logs,
                        grad_normalized: vec![0.0; n],
                    }
                });
            }
            let trace = FuzzyPlan::build(&item.query)?.trace(p);
            let (qn, _) = fuzzy::normalize(&trace.value, cfg.p_norm, cfg.eps);
            let lq = fuzzy::clamped_logs(&qn);
            let candidates: Vec<ConceptId> = std::iter::once(item.positive).chain(item.negatives.iter().copied()).collect();
            let mut mixture_logs = vec![Vec::new(); candidates.len()];
            let scores: Vec<f64> = candidates
                .iter()
                .zip(mixture_logs.iter_mut())
                .map(|(c, lm)| {
                    let set = &sets[c];
                    -fuzzy::js_forward(&set.normalized, &set.logs, &qn, &lq, lm)
                })
                .collect();
            let (g_pos, g_negs) = pair_terms(scores[0], &scores[1..], w, &mut out.con)?;
            if let Some(g) = grads.as_deref_mut() {
                let mut g_qn = vec![0.0; qn.len()];
                for ((c, lm), gs) in candidates.iter().zip(&mixture_logs).zip(std::iter::once(g_pos).chain(g_negs)) {
                    let set = sets.get_mut(c).expect("cached");
                    // S = -JS, so dL/dJS = -dL/dS
                    fuzzy::js_backward(&set.normalized, &set.logs, &qn, &lq, lm, -gs, &mut set.grad_normalized, &mut g_qn);
                }
                let mut g_q = vec![0.0; qn.len()];
                fuzzy::normalize_grad(&trace.value, cfg.p_norm, cfg.eps, &g_qn, &mut g_q);
                trace.backward(p, &g_q, g);
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            for (c, set) in &sets {
                let mut g_mu = vec![0.0; set.mu.len()];
                fuzzy::normalize_grad(&set.mu, cfg.p_norm, cfg.eps, &set.grad_normalized, &mut g_mu);
                let row = p.concept.row(c.index());
                let g_c = membership_backward(p, row, &set.mu, &g_mu, g);
                g.concept.add_scaled(c.index(), &g_c, 1.0);
            }
        }
    }

    if !batch.ent.is_empty() {
        let w = weight(batch.ent.len());
        for item in &batch.ent {
            check_m(item.negatives.len(), m, "entity retrieval")?;
            let trace = embed_forward(p, &item.query)?;
            let q = &trace.value;
            let pos = p.score_entity(q, item.positive);
            let negs: Vec<f64> = item.negatives.iter().map(|&e| p.score_entity(q, e)).collect();
            let (g_pos, g_negs) = pair_terms(pos, &negs, w, &mut out.ent)?;
            if let Some(g) = grads.as_deref_mut() {
                let mut g_q = vec![0.0; q.len()];
                for (&e, gs) in std::iter::once(&item.positive)
                    .chain(&item.negatives)
                    .zip(std::iter::once(g_pos).chain(g_negs))
                {
                    // S = γ - Σ|q - e|
                    let row = p.entity.row(e.index());
                    let ge = g.entity.row_mut(e.index());
                    for k in 0..q.len() {
                        let s = sign(q[k] - row[k]);
                        g_q[k] -= gs * s;
                        ge[k] += gs * s;
                    }
                }
                trace.backward(p, &g_q, g);
            }
        }
    }

    if !batch.sub.is_empty() {
        let w = weight(batch.sub.len());
        for item in &batch.sub {
            check_m(item.negatives.len(), m, "subsumption")?;
            let pairs: Vec<(ConceptId, ConceptId)> =
                std::iter::once((item.sub, item.sup)).chain(item.negatives.iter().copied()).collect();
            let caches: Vec<_> = pairs
                .iter()
                .map(|&(a, b)| {
                    let x = p.concat(p.concept.row(a.index()), p.concept.row(b.index()));
                    let c = p.theta.forward_cached(&x);
                    (x, c)
                })
                .collect();
            let scores: Vec<f64> = caches.iter().map(|(_, c)| c.out[0]).collect();
            let (g_pos, g_negs) = pair_terms(scores[0], &scores[1..], w, &mut out.sub)?;
            if let Some(g) = grads.as_deref_mut() {
                let d = p.dim();
                for ((&(a, b), (x, c)), gs) in pairs
                    .iter()
                    .zip(&caches)
                    .zip(std::iter::once(g_pos).chain(g_negs))
                {
                    let g_x = g.theta.backprop(&p.theta, x, &c.pre, &c.hidden, &[gs]);
                    g.concept.add_scaled(a.index(), &g_x[..d], 1.0);
                    g.concept.add_scaled(b.index(), &g_x[d..], 1.0);
                }
            }
        }
    }

    if !batch.ins.is_empty() {
        let w = weight(batch.ins.len());
        for item in &batch.ins {
            check_m(item.negatives.len(), m, "instantiation")?;
            let pairs: Vec<_> = std::iter::once((item.concept, item.entity))
                .chain(item.negatives.iter().copied())
                .collect();
            let scores: Vec<f64> = pairs.iter().map(|&(c, e)| p.score_instantiation(c, e)).collect();
            let (g_pos, g_negs) = pair_terms(scores[0], &scores[1..], w, &mut out.ins)?;
            if let Some(g) = grads.as_deref_mut() {
                for ((&(c, e), &s), gs) in pairs
                    .iter()
                    .zip(&scores)
                    .zip(std::iter::once(g_pos).chain(g_negs))
                {
                    let gz = gs * s * (1.0 - s);
                    g.concept.add_scaled(c.index(), p.entity.row(e.index()), gz);
                    g.entity.add_scaled(e.index(), p.concept.row(c.index()), gz);
                }
            }
        }
    }

    out.total = out.con + out.ent + out.sub + out.ins;
    if !out.total.is_finite() {
        return Err(Error::Diverged("non-finite loss".into()));
    }
    Ok(out)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
