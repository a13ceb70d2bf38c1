use super::{Mlp, ParameterStore};

/// Gradient rows for an embedding matrix. Only rows touched by a batch are
/// reported; untouched rows stay zero and are skipped by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrads {
    cols: usize,
    data: Vec<f64>,
    touched: Vec<bool>,
}

impl RowGrads {
    pub fn new(rows: usize, cols: usize) -> Self {
        RowGrads {
            cols,
            data: vec![0.0; rows * cols],
            touched: vec![false; rows],
        }
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.touched[i] = true;
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Adds `scale * v` into row `i`.
    #[inline]
    pub fn add_scaled(&mut self, i: usize, v: &[f64], scale: f64) {
        for (g, x) in self.row_mut(i).iter_mut().zip(v) {
            *g += scale * x;
        }
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.touched[i].then(|| &self.data[i * self.cols..(i + 1) * self.cols])
    }

    pub fn is_touched(&self, i: usize) -> bool {
        self.touched[i]
    }

    /// `(row index, gradient)` for every touched row, in index order.
    pub fn touched_rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.touched
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(move |(i, _)| (i, &self.data[i * self.cols..(i + 1) * self.cols]))
    }

    pub fn rows(&self) -> usize {
        self.touched.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub(crate) fn dense(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(m: &Mlp) -> Self {
        MlpGrads {
            w1: vec![0.0; m.w1.data.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.data.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|t| t.iter().all(|&v| v == 0.0))
    }

    /// Backward pass of `W2 · relu(W1 x + b1) + b2`; returns dL/dx.
    pub(crate) fn backprop(
        &mut self,
        mlp: &Mlp,
        x: &[f64],
        pre: &[f64],
        hidden: &[f64],
        g_out: &[f64],
    ) -> Vec<f64> {
        let h = mlp.w1.rows;
        let n_in = mlp.w1.cols;
        let mut g_hidden = vec![0.0; h];
        for (o, &go) in g_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            self.b2[o] += go;
            let wrow = mlp.w2.row(o);
            let grow = &mut self.w2[o * h..(o + 1) * h];
            for j in 0..h {
                grow[j] += go * hidden[j];
                g_hidden[j] += go * wrow[j];
            }
        }
        let mut g_x = vec![0.0; n_in];
        for j in 0..h {
            if pre[j] <= 0.0 {
                continue;
            }
            let gp = g_hidden[j];
            self.b1[j] += gp;
            let wrow = mlp.w1.row(j);
            let grow = &mut self.w1[j * n_in..(j + 1) * n_in];
            for k in 0..n_in {
                grow[k] += gp * x[k];
                g_x[k] += gp * wrow[k];
            }
        }
        g_x
    }
}

/// Gradients of the loss with respect to every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub entity: RowGrads,
    pub concept: RowGrads,
    pub relation: RowGrads,
    pub theta: MlpGrads,
    pub omega: MlpGrads,
}

impl GradientBundle {
    pub fn zeros_like(p: &ParameterStore) -> Self {
        let d = p.dim();
        GradientBundle {
            entity: RowGrads::new(p.num_entities(), d),
            concept: RowGrads::new(p.num_concepts(), d),
            relation: RowGrads::new(p.num_relations(), d),
            theta: MlpGrads::zeros_like(&p.theta),
            omega: MlpGrads::zeros_like(&p.omega),
        }
    }

    /// Dense views in the same order as [`ParameterStore::tensors`].
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("E_e", self.entity.dense()),
            ("E_c", self.concept.dense()),
            ("E_r", self.relation.dense()),
            ("theta.w1", &self.theta.w1[..]),
            ("theta.b1", &self.theta.b1[..]),
            ("theta.w2", &self.theta.w2[..]),
            ("theta.b2", &self.theta.b2[..]),
            ("omega.w1", &self.omega.w1[..]),
            ("omega.b1", &self.omega.b1[..]),
            ("omega.w2", &self.omega.w2[..]),
            ("omega.b2", &self.omega.b2[..]),
        ]
    }

    pub fn is_finite(&self) -> bool {
        [
            self.entity.dense(),
            self.concept.dense(),
            self.relation.dense(),
            &self.theta.w1,
            &self.theta.b1,
            &self.theta.w2,
            &self.theta.b2,
            &self.omega.w1,
            &self.omega.b1,
            &self.omega.w2,
            &self.omega.b2,
        ]
        .iter()
        .all(|t| t.iter().all(|v| v.is_finite()))
    }
}
