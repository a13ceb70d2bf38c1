//! Membership-degree arithmetic: t-norms, their dual t-conorms, negation,
//! element-wise fuzzy set operations and the Jensen-Shannon divergence used
//! to compare normalized fuzzy sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TNormKind {
    Godel,
    #[default]
    Product,
    Lukasiewicz,
}

impl TNormKind {
    pub const ALL: [TNormKind; 3] = [TNormKind::Godel, TNormKind::Product, TNormKind::Lukasiewicz];

    pub fn as_str(self) -> &'static str {
        match self {
            TNormKind::Godel => "godel",
            TNormKind::Product => "product",
            TNormKind::Lukasiewicz => "lukasiewicz",
        }
    }

    /// Conjunction without range checks. Inputs are assumed to lie in [0, 1].
    #[inline]
    pub fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            TNormKind::Godel => x.min(y),
            TNormKind::Product => x * y,
            TNormKind::Lukasiewicz => (x + y - 1.0).max(0.0),
        }
    }

    /// Disjunction defined by duality with [`TNormKind::apply`].
    #[inline]
    pub fn co_apply(self, x: f64, y: f64) -> f64 {
        1.0 - self.apply(1.0 - x, 1.0 - y)
    }

    /// Partial derivatives of the t-norm at `(x, y)`.
    ///
    /// Non-smooth points use a fixed subgradient: `min` routes to the first
    /// argument on ties and the Łukasiewicz norm is flat on its boundary.
    #[inline]
    pub fn grad(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            TNormKind::Godel => {
                if x <= y {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
            TNormKind::Product => (y, x),
            TNormKind::Lukasiewicz => {
                if x + y - 1.0 > 0.0 {
                    (1.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// Partial derivatives of the dual t-conorm at `(x, y)`.
    #[inline]
    pub fn co_grad(self, x: f64, y: f64) -> (f64, f64) {
        // d/dx [1 - T(1-x, 1-y)] = T_x(1-x, 1-y)
        self.grad(1.0 - x, 1.0 - y)
    }
}

impl fmt::Display for TNormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TNormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "godel" | "goedel" | "min" => Ok(TNormKind::Godel),
            "product" | "prod" => Ok(TNormKind::Product),
            "lukasiewicz" | "luk" => Ok(TNormKind::Lukasiewicz),
            other => Err(Error::Config(format!("unknown t-norm `{other}`"))),
        }
    }
}

fn check_degree(x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::Domain(x))
    }
}

pub fn tnorm(kind: TNormKind, x: f64, y: f64) -> Result<f64> {
    Ok(kind.apply(check_degree(x)?, check_degree(y)?))
}

pub fn tconorm(kind: TNormKind, x: f64, y: f64) -> Result<f64> {
    Ok(kind.co_apply(check_degree(x)?, check_degree(y)?))
}

pub fn fuzzy_not(x: f64) -> Result<f64> {
    Ok(1.0 - check_degree(x)?)
}

/// A fuzzy subset of the entity universe: one membership degree per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySet(Vec<f64>);

impl FuzzySet {
    /// Validates that every degree is finite and within [0, 1].
    pub fn new(memberships: Vec<f64>) -> Result<Self> {
        for &m in &memberships {
            if !m.is_finite() {
                return Err(Error::Domain(m));
            }
            check_degree(m)?;
        }
        Ok(FuzzySet(memberships))
    }

    /// Wraps degrees produced by a closed operation. Debug builds still check.
    pub(crate) fn from_raw(memberships: Vec<f64>) -> Self {
        debug_assert!(memberships.iter().all(|m| (0.0..=1.0).contains(m)));
        FuzzySet(memberships)
    }

    pub fn constant(len: usize, degree: f64) -> Result<Self> {
        FuzzySet::new(vec![degree; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn memberships(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

fn zip_with(a: &FuzzySet, b: &FuzzySet, f: impl Fn(f64, f64) -> f64) -> Result<FuzzySet> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(FuzzySet::from_raw(
        a.0.iter().zip(&b.0).map(|(&x, &y)| f(x, y)).collect(),
    ))
}

pub fn fs_and(kind: TNormKind, a: &FuzzySet, b: &FuzzySet) -> Result<FuzzySet> {
    zip_with(a, b, |x, y| kind.apply(x, y))
}

pub fn fs_or(kind: TNormKind, a: &FuzzySet, b: &FuzzySet) -> Result<FuzzySet> {
    zip_with(a, b, |x, y| kind.co_apply(x, y))
}

pub fn fs_not(a: &FuzzySet) -> FuzzySet {
    FuzzySet::from_raw(a.0.iter().map(|x| 1.0 - x).collect())
}

/// Jensen-Shannon divergence (natural log) between two probability vectors.
///
/// Both inputs must be nonnegative and sum to one within `1e-6`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "{name} has entry {x}"
            )));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDistribution(format!(
                "{name} sums to {total}"
            )));
        }
    }
    Ok(js_unchecked(p, q))
}

#[inline]
fn clamp_log(x: f64) -> f64 {
    x.max(LOG_CLAMP).ln()
}

/// Divergence without validating the inputs. Used on vectors normalized by
/// an arbitrary p-norm, which need not sum to one.
pub(crate) fn js_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let lm = clamp_log(0.5 * (pi + qi));
        acc += pi * (clamp_log(pi) - lm) + qi * (clamp_log(qi) - lm);
    }
    0.5 * acc
}

/// Gradient of [`js_unchecked`] with respect to both arguments, accumulated
/// (scaled by `upstream`) into `gp` and `gq`.
#[cfg(test)]
pub(crate) fn js_grad(p: &[f64], q: &[f64], upstream: f64, gp: &mut [f64], gq: &mut [f64]) {
    for i in 0..p.len() {
        let (pi, qi) = (p[i], q[i]);
        let m = 0.5 * (pi + qi);
        let lm = clamp_log(m);
        // d/dm of -(p + q) ln max(m, eps), times dm/dp = 1/2
        let dm = if m > LOG_CLAMP { -(pi + qi) / m } else { 0.0 };
        let dp_self = if pi > LOG_CLAMP { 1.0 } else { 0.0 };
        let dq_self = if qi > LOG_CLAMP { 1.0 } else { 0.0 };
        gp[i] += upstream * 0.5 * (clamp_log(pi) - lm + dp_self + 0.5 * dm);
        gq[i] += upstream * 0.5 * (clamp_log(qi) - lm + dq_self + 0.5 * dm);
    }
}

/// Element-wise `ln max(x, LOG_CLAMP)`.
pub(crate) fn clamped_logs(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| clamp_log(v)).collect()
}

/// [`js_unchecked`] with the logs of both arguments precomputed. The
/// mixture logs are written to `lm` for [`js_backward`].
pub(crate) fn js_forward(p: &[f64], lp: &[f64], q: &[f64], lq: &[f64], lm: &mut Vec<f64>) -> f64 {
    lm.clear();
    let mut acc = 0.0;
    for i in 0..p.len() {
        let l = clamp_log(0.5 * (p[i] + q[i]));
        lm.push(l);
        acc += p[i] * (lp[i] - l) + q[i] * (lq[i] - l);
    }
    0.5 * acc
}

/// [`js_grad`] reusing the logs from [`js_forward`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn js_backward(
    p: &[f64],
    lp: &[f64],
    q: &[f64],
    lq: &[f64],
    lm: &[f64],
    upstream: f64,
    gp: &mut [f64],
    gq: &mut [f64],
) {
    let h = 0.5 * upstream;
    for i in 0..p.len() {
        let (pi, qi) = (p[i], q[i]);
        let m = 0.5 * (pi + qi);
        let dm = if m > LOG_CLAMP { -0.5 * (pi + qi) / m } else { 0.0 };
        let dp_self = if pi > LOG_CLAMP { 1.0 } else { 0.0 };
        let dq_self = if qi > LOG_CLAMP { 1.0 } else { 0.0 };
        gp[i] += h * (lp[i] - lm[i] + dp_self + dm);
        gq[i] += h * (lq[i] - lm[i] + dq_self + dm);
    }
}

/// `x / max(‖x‖_p, eps)`; returns the normalized vector and the denominator.
pub(crate) fn normalize(x: &[f64], p_norm: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = p_norm_of(x, p_norm);
    let denom = n.max(eps);
    (x.iter().map(|v| v / denom).collect(), denom)
}

pub(crate) fn p_norm_of(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Backward pass of [`normalize`]: given `g` = dL/dy, accumulates dL/dx.
pub(crate) fn normalize_grad(x: &[f64], p_norm: f64, eps: f64, g: &[f64], gx: &mut [f64]) {
    let n = p_norm_of(x, p_norm);
    if n <= eps {
        for (o, gi) in gx.iter_mut().zip(g) {
            *o += gi / eps;
        }
        return;
    }
    let dot: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
    let k = dot / (n * n);
    for i in 0..x.len() {
        let dn = if p_norm == 1.0 {
            x[i].signum() * if x[i] == 0.0 { 0.0 } else { 1.0 }
        } else {
            x[i].signum() * x[i].abs().powf(p_norm - 1.0) * n.powf(1.0 - p_norm)
        };
        gx[i] += g[i] / n - k * dn;
    }
}
