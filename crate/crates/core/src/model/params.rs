use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{self, FuzzySet, TNormKind};
use crate::kb::{ConceptId, EntityId, RelationId};
use crate::query::Query;

use super::{dot, embed_forward, sigmoid, FuzzyPlan};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Xavier-uniform entries on `±sqrt(6 / (rows + cols))`.
    pub fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| dist.sample(rng)).collect(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }
}

/// Two-layer perceptron `W2 · relu(W1 · x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

pub(crate) struct MlpCache {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            w1: Matrix::zeros(hidden, input),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(output, hidden),
            b2: vec![0.0; output],
        }
    }

    fn xavier(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let w1 = Matrix::xavier(hidden, input, rng);
        let w2 = Matrix::xavier(output, hidden, rng);
        Mlp {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> MlpCache {
        let pre: Vec<f64> = self
            .w1
            .mul_vec(x)
            .iter()
            .zip(&self.b1)
            .map(|(a, b)| a + b)
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let out = self
            .w2
            .mul_vec(&hidden)
            .iter()
            .zip(&self.b2)
            .map(|(a, b)| a + b)
            .collect();
        MlpCache { pre, hidden, out }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).out
    }
}

/// Hyperparameters fixed for the lifetime of a parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    /// Margin of the entity score.
    pub gamma: f64,
    /// Floor of the norm used to normalize fuzzy sets.
    pub eps: f64,
    pub p_norm: f64,
    pub tnorm: TNormKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 256,
            gamma: 12.0,
            eps: 1e-12,
            p_norm: 1.0,
            tnorm: TNormKind::Product,
        }
    }
}

/// Every trainable tensor: entity, concept and relation embeddings, the
/// subsumption network and the intersection-attention network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub config: ModelConfig,
    pub entity: Matrix,
    pub concept: Matrix,
    pub relation: Matrix,
    /// Subsumption scorer: `2d -> d -> 1`.
    pub theta: Mlp,
    /// Intersection attention: `2d -> d -> 2d`.
    pub omega: Mlp,
}

pub fn init_params(
    num_entities: usize,
    num_concepts: usize,
    num_relations: usize,
    config: ModelConfig,
    seed: u64,
) -> Result<ParameterStore> {
    let d = config.dim;
    if d == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    if !(config.p_norm >= 1.0) || !(config.eps > 0.0) {
        return Err(Error::Config("p_norm must be >= 1 and eps > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entity = Matrix::xavier(num_entities, d, &mut rng);
    let concept = Matrix::xavier(num_concepts, d, &mut rng);
    let relation = Matrix::xavier(num_relations, d, &mut rng);
    let theta = Mlp::xavier(2 * d, d, 1, &mut rng);
    let omega = Mlp::xavier(2 * d, d, 2 * d, &mut rng);
    Ok(ParameterStore {
        config,
        entity,
        concept,
        relation,
        theta,
        omega,
    })
}

impl ParameterStore {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entity.rows
    }

    pub fn num_concepts(&self) -> usize {
        self.concept.rows
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows
    }

    /// Membership of every entity given a generator vector.
    pub(crate) fn memberships(&self, generator: &[f64]) -> Vec<f64> {
        (0..self.entity.rows)
            .map(|e| sigmoid(dot(generator, self.entity.row(e))))
            .collect()
    }

    /// `σ(c · E_eᵀ)`: the fuzzy set interpreting concept `c`.
    pub fn concept_fuzzy_set(&self, c: ConceptId) -> FuzzySet {
        FuzzySet::from_raw(self.memberships(self.concept.row(c.index())))
    }

    /// The generator `e + r1 + ... + rn` of a projection chain.
    pub(crate) fn chain_generator(&self, anchor: EntityId, rels: &[RelationId]) -> Vec<f64> {
        let mut g = self.entity.row(anchor.index()).to_vec();
        for r in rels {
            for (gi, ri) in g.iter_mut().zip(self.relation.row(r.index())) {
                *gi += ri;
            }
        }
        g
    }

    /// Fuzzy set of an atomic query `anchor -r1-> ... -rn->`.
    pub fn atomic_query_fuzzy_set(&self, anchor: EntityId, rels: &[RelationId]) -> Result<FuzzySet> {
        if rels.is_empty() {
            return Err(Error::Invalid("an atomic query needs at least one relation".into()));
        }
        Ok(FuzzySet::from_raw(self.memberships(&self.chain_generator(anchor, rels))))
    }

    /// Fuzzy set of a full query: atomic chains fused with the configured
    /// t-norm, its dual t-conorm and complement.
    pub fn query_fuzzy_set(&self, q: &Query) -> Result<FuzzySet> {
        let plan = FuzzyPlan::build(q)?;
        Ok(FuzzySet::from_raw(plan.eval(self)))
    }

    /// Negative Jensen-Shannon divergence between the normalized sets.
    pub fn score_concept(&self, q_fs: &FuzzySet, c_fs: &FuzzySet) -> Result<f64> {
        if q_fs.len() != c_fs.len() {
            return Err(Error::LengthMismatch {
                left: q_fs.len(),
                right: c_fs.len(),
            });
        }
        Ok(self.score_concept_raw(q_fs.memberships(), c_fs.memberships()))
    }

    pub(crate) fn score_concept_raw(&self, q: &[f64], c: &[f64]) -> f64 {
        let (p, _) = fuzzy::normalize(c, self.config.p_norm, self.config.eps);
        let (qn, _) = fuzzy::normalize(q, self.config.p_norm, self.config.eps);
        -fuzzy::js_unchecked(&p, &qn)
    }

    /// Query embedding for entity retrieval. Negation is not supported.
    pub fn query_embedding(&self, q: &Query) -> Result<Vec<f64>> {
        Ok(embed_forward(self, q)?.value)
    }

    /// `γ - ‖q - e‖₁`.
    pub fn score_entity(&self, q_emb: &[f64], e: EntityId) -> f64 {
        let l1: f64 = q_emb
            .iter()
            .zip(self.entity.row(e.index()))
            .map(|(a, b)| (a - b).abs())
            .sum();
        self.config.gamma - l1
    }

    /// Degree to which `sub ⊑ sup`, from the raw concept embeddings.
    pub fn score_subsumption(&self, sub: ConceptId, sup: ConceptId) -> f64 {
        let x = self.concat(self.concept.row(sub.index()), self.concept.row(sup.index()));
        self.theta.forward(&x)[0]
    }

    /// `σ(c · e)`.
    pub fn score_instantiation(&self, c: ConceptId, e: EntityId) -> f64 {
        sigmoid(dot(self.concept.row(c.index()), self.entity.row(e.index())))
    }

    pub(crate) fn concat(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(a.len() + b.len());
        x.extend_from_slice(a);
        x.extend_from_slice(b);
        x
    }

    /// Every tensor in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("E_e", &self.entity.data[..]),
            ("E_c", &self.concept.data[..]),
            ("E_r", &self.relation.data[..]),
            ("theta.w1", &self.theta.w1.data[..]),
            ("theta.b1", &self.theta.b1[..]),
            ("theta.w2", &self.theta.w2.data[..]),
            ("theta.b2", &self.theta.b2[..]),
            ("omega.w1", &self.omega.w1.data[..]),
            ("omega.b1", &self.omega.b1[..]),
            ("omega.w2", &self.omega.w2.data[..]),
            ("omega.b2", &self.omega.b2[..]),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("E_e", &mut self.entity.data[..]),
            ("E_c", &mut self.concept.data[..]),
            ("E_r", &mut self.relation.data[..]),
            ("theta.w1", &mut self.theta.w1.data[..]),
            ("theta.b1", &mut self.theta.b1[..]),
            ("theta.w2", &mut self.theta.w2.data[..]),
            ("theta.b2", &mut self.theta.b2[..]),
            ("omega.w1", &mut self.omega.w1.data[..]),
            ("omega.b1", &mut self.omega.b1[..]),
            ("omega.w2", &mut self.omega.w2.data[..]),
            ("omega.b2", &mut self.omega.b2[..]),
        ]
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.entity.data,
            &self.concept.data,
            &self.relation.data,
            &self.theta.w1.data,
            &self.theta.b1,
            &self.theta.w2.data,
            &self.theta.b2,
            &self.omega.w1.data,
            &self.omega.b1,
            &self.omega.w2.data,
            &self.omega.b2,
        ]
        .iter()
        .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(d: usize, ne: usize, nc: usize, nr: usize, seed: u64) -> ParameterStore {
        init_params(ne, nc, nr, ModelConfig { dim: d, ..Default::default() }, seed).unwrap()
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let p = store(4, 10, 3, 2, 1);
        let bound = (6.0f64 / 14.0).sqrt();
        assert!(p.entity.data.iter().all(|v| v.abs() <= bound));
        assert_eq!(p, store(4, 10, 3, 2, 1));
        assert_ne!(p, store(4, 10, 3, 2, 2));
        assert!(p.theta.b1.iter().all(|&b| b == 0.0));
        assert_eq!((p.theta.w1.rows, p.theta.w1.cols, p.theta.w2.rows), (4, 8, 1));
        assert_eq!((p.omega.w1.rows, p.omega.w1.cols, p.omega.w2.rows), (4, 8, 8));
    }

    #[test]
    fn xavier_mean_is_centered() {
        let p = store(64, 500, 1, 1, 3);
        let n = p.entity.data.len() as f64;
        let mean = p.entity.data.iter().sum::<f64>() / n;
        let bound = (6.0f64 / 564.0).sqrt();
        // uniform on [-b, b] has variance b²/3
        let sigma = (bound * bound / 3.0 / n).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn orthogonal_concept_gives_half() {
        let mut p = store(4, 5, 2, 1, 0);
        p.concept.row_mut(0).fill(0.0);
        let fs = p.concept_fuzzy_set(ConceptId(0));
        assert_eq!(fs.len(), 5);
        assert!(fs.memberships().iter().all(|&m| m == 0.5));
        for e in 0..5 {
            assert_eq!(p.score_instantiation(ConceptId(0), EntityId(e)), 0.5);
        }
    }

    #[test]
    fn instantiation_matches_concept_set() {
        let p = store(6, 12, 4, 1, 5);
        for c in 0..4 {
            let fs = p.concept_fuzzy_set(ConceptId(c));
            for e in 0..12 {
                assert_eq!(fs.get(e as usize), p.score_instantiation(ConceptId(c), EntityId(e)));
            }
        }
        let mut q = p.clone();
        q.concept.row_mut(0).copy_from_slice(&[10.0; 6]);
        q.entity.row_mut(0).copy_from_slice(&[10.0; 6]);
        assert!(q.score_instantiation(ConceptId(0), EntityId(0)) > 1.0 - 1e-12);
    }

    #[test]
    fn atomic_generator_cancellation_and_saturation() {
        let mut p = store(3, 4, 1, 2, 0);
        p.entity.row_mut(0).copy_from_slice(&[1.0, -2.0, 0.5]);
        p.relation.row_mut(0).copy_from_slice(&[-1.0, 2.0, -0.5]);
        let fs = p.atomic_query_fuzzy_set(EntityId(0), &[RelationId(0)]).unwrap();
        assert!(fs.memberships().iter().all(|&m| m == 0.5));
        assert!(p.atomic_query_fuzzy_set(EntityId(0), &[]).is_err());

        // generator = 0 + r, with r a large multiple of entity 2's row
        let e2 = p.entity.row(2).to_vec();
        p.entity.row_mut(1).fill(0.0);
        let r: Vec<f64> = e2.iter().map(|v| 200.0 * v).collect();
        p.relation.row_mut(1).copy_from_slice(&r);
        let fs = p.atomic_query_fuzzy_set(EntityId(1), &[RelationId(1)]).unwrap();
        assert!(fs.get(2) > 1.0 - 1e-9);

        let a = p.atomic_query_fuzzy_set(EntityId(0), &[RelationId(0), RelationId(1)]).unwrap();
        let b = p.atomic_query_fuzzy_set(EntityId(0), &[RelationId(1), RelationId(0)]).unwrap();
        for (x, y) in a.memberships().iter().zip(b.memberships()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn entity_score() {
        let p = store(4, 3, 1, 1, 0);
        let e = p.entity.row(1).to_vec();
        assert_eq!(p.score_entity(&e, EntityId(1)), 12.0);
        let mut far = e.clone();
        far[0] += 12.0;
        assert!((p.score_entity(&far, EntityId(1))).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let mut q = e.clone();
            q[2] += k as f64 * 0.3;
            let s = p.score_entity(&q, EntityId(1));
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn subsumption_zero_net_and_asymmetry() {
        let mut p = store(5, 3, 4, 1, 2);
        let s = p.score_subsumption(ConceptId(0), ConceptId(1));
        let t = p.score_subsumption(ConceptId(1), ConceptId(0));
        assert!((s - t).abs() > 1e-9);
        p.theta = Mlp::zeros(10, 5, 1);
        assert_eq!(p.score_subsumption(ConceptId(2), ConceptId(3)), 0.0);
    }

    #[test]
    fn subsumption_matches_independent_mlp() {
        let p = store(6, 3, 5, 1, 11);
        for a in 0..5u32 {
            for b in 0..5u32 {
                // independent evaluation with explicit index loops
                let c1 = p.concept.row(a as usize);
                let c2 = p.concept.row(b as usize);
                let x: Vec<f64> = c1.iter().chain(c2).copied().collect();
                let mut h = vec![0.0; 6];
                for i in 0..6 {
                    let mut s = p.theta.b1[i];
                    for j in 0..12 {
                        s += p.theta.w1.data[i * 12 + j] * x[j];
                    }
                    h[i] = if s > 0.0 { s } else { 0.0 };
                }
                let mut out = p.theta.b2[0];
                for i in 0..6 {
                    out += p.theta.w2.data[i] * h[i];
                }
                let got = p.score_subsumption(ConceptId(a), ConceptId(b));
                assert!((got - out).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn concept_score_properties() {
        let p = store(4, 6, 3, 1, 4);
        let q = p.concept_fuzzy_set(ConceptId(0));
        assert!(p.score_concept(&q, &q).unwrap().abs() < 1e-15);
        let scaled = FuzzySet::new(q.memberships().iter().map(|v| v * 0.3).collect()).unwrap();
        assert!(p.score_concept(&q, &scaled).unwrap().abs() < 1e-12);
        let a = FuzzySet::new(vec![0.8, 0.4, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = FuzzySet::new(vec![0.0, 0.0, 0.1, 0.9, 0.3, 0.0]).unwrap();
        let s = p.score_concept(&a, &b).unwrap();
        assert!((s + std::f64::consts::LN_2).abs() < 1e-9);
        let short = FuzzySet::new(vec![0.5]).unwrap();
        assert!(p.score_concept(&a, &short).is_err());
    }
}
