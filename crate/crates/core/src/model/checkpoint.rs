//! Checkpoint layout: a little-endian `u32` byte length, a JSON header
//! of that length, then every tensor as little-endian `f32` in manifest
//! order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::TNormKind;

use super::{Matrix, Mlp, ModelConfig, ParameterStore};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    d: usize,
    entities: usize,
    concepts: usize,
    relations: usize,
    tnorm_kind: TNormKind,
    gamma: f64,
    eps: f64,
    p_norm: f64,
    tensors: Vec<TensorEntry>,
}

fn tensors(p: &ParameterStore) -> Vec<(&'static str, Vec<usize>, &[f64])> {
    let mut out: Vec<(&'static str, Vec<usize>, &[f64])> = vec![
        ("E_e", vec![p.entity.rows, p.entity.cols], &p.entity.data),
        ("E_c", vec![p.concept.rows, p.concept.cols], &p.concept.data),
        ("E_r", vec![p.relation.rows, p.relation.cols], &p.relation.data),
    ];
    for (prefix, mlp) in [("theta", &p.theta), ("omega", &p.omega)] {
        out.extend(mlp_tensors(prefix, mlp));
    }
    out
}

fn mlp_tensors<'a>(prefix: &str, m: &'a Mlp) -> Vec<(&'static str, Vec<usize>, &'a [f64])> {
    let names: [&'static str; 4] = if prefix == "theta" {
        ["theta.w1", "theta.b1", "theta.w2", "theta.b2"]
    } else {
        ["omega.w1", "omega.b1", "omega.w2", "omega.b2"]
    };
    vec![
        (names[0], vec![m.w1.rows, m.w1.cols], &m.w1.data[..]),
        (names[1], vec![m.b1.len()], &m.b1[..]),
        (names[2], vec![m.w2.rows, m.w2.cols], &m.w2.data[..]),
        (names[3], vec![m.b2.len()], &m.b2[..]),
    ]
}

pub fn checkpoint_bytes(p: &ParameterStore) -> Vec<u8> {
    let list = tensors(p);
    let header = Header {
        version: CHECKPOINT_VERSION,
        d: p.dim(),
        entities: p.num_entities(),
        concepts: p.num_concepts(),
        relations: p.num_relations(),
        tnorm_kind: p.config.tnorm,
        gamma: p.config.gamma,
        eps: p.config.eps,
        p_norm: p.config.p_norm,
        tensors: list
            .iter()
            .map(|(n, s, _)| TensorEntry {
                name: n.to_string(),
                shape: s.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(4 + json.len() + 4 * list.iter().map(|t| t.2.len()).sum::<usize>());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, data) in &list {
        for &v in *data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ParameterStore> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 4 {
        return Err(bad("truncated header length"));
    }
    let hlen = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(4..4 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    let d = header.d;
    let config = ModelConfig {
        dim: d,
        gamma: header.gamma,
        eps: header.eps,
        p_norm: header.p_norm,
        tnorm: header.tnorm_kind,
    };
    let mut store = ParameterStore {
        config,
        entity: Matrix::zeros(header.entities, d),
        concept: Matrix::zeros(header.concepts, d),
        relation: Matrix::zeros(header.relations, d),
        theta: Mlp::zeros(2 * d, d, 1),
        omega: Mlp::zeros(2 * d, d, 2 * d),
    };
    let expected: Vec<(String, Vec<usize>)> = tensors(&store)
        .into_iter()
        .map(|(n, s, _)| (n.to_string(), s))
        .collect();
    let got: Vec<(String, Vec<usize>)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if expected != got {
        return Err(bad("tensor manifest does not match header dimensions"));
    }
    let mut data = &bytes[4 + hlen..];
    let mut fill = |dst: &mut [f64]| -> Result<()> {
        let need = dst.len() * 4;
        if data.len() < need {
            return Err(bad("truncated tensor data"));
        }
        for (o, chunk) in dst.iter_mut().zip(data[..need].chunks_exact(4)) {
            *o = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
        data = &data[need..];
        Ok(())
    };
    fill(&mut store.entity.data)?;
    fill(&mut store.concept.data)?;
    fill(&mut store.relation.data)?;
    for mlp in [&mut store.theta, &mut store.omega] {
        fill(&mut mlp.w1.data)?;
        fill(&mut mlp.b1)?;
        fill(&mut mlp.w2.data)?;
        fill(&mut mlp.b2)?;
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes after tensors"));
    }
    Ok(store)
}

pub fn save_checkpoint(p: &ParameterStore, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(p)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ParameterStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
