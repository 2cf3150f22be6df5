use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_weight_vector, weighted, OverlapDraw, OverlapSample};
use crate::error::{Error, Result};
use crate::stats::jackknife;

const MAX_TUPLES: usize = 40_320;

/// Built-in bounded test functions of the first `n` replicas' overlaps.
/// Replica indices are 0-based; `species: None` reads the combined array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant { value: f64 },
    Indicator { species: Option<usize>, l: usize, lp: usize, threshold: f64 },
    Monomial { factors: Vec<(Option<usize>, usize, usize)> },
}

impl TestFunction {
    /// `1{R_{12} ≥ threshold}` on the combined array.
    pub fn indicator(threshold: f64) -> Self {
        Self::Indicator { species: None, l: 0, lp: 1, threshold }
    }

    /// `R_{12} R_{1n}` on the combined array.
    pub fn degree_two(n: usize) -> Self {
        Self::Monomial { factors: vec![(None, 0, 1), (None, 0, n - 1)] }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Constant { value } => format!("const({value})"),
            Self::Indicator { threshold, .. } => format!("indicator(R12>={threshold})"),
            Self::Monomial { factors } => format!("monomial(degree {})", factors.len()),
        }
    }

    fn check(&self, n: usize, n_species: usize) -> Result<()> {
        let ok = |s: &Option<usize>, l: &usize, lp: &usize| s.is_none_or(|s| s < n_species) && *l < n && *lp < n;
        let valid = match self {
            Self::Constant { value } => value.is_finite(),
            Self::Indicator { species, l, lp, threshold } => ok(species, l, lp) && !threshold.is_nan(),
            Self::Monomial { factors } => factors.iter().all(|(s, l, lp)| ok(s, l, lp)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::config(format!("test function {} does not fit n = {n}", self.name())))
        }
    }

    /// Value on the array restricted to replicas `idx`.
    fn eval(&self, d: &OverlapDraw, idx: &[usize]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Indicator { species, l, lp, threshold } => {
                if d.entry(*species, idx[*l], idx[*lp]) >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Monomial { factors } => factors.iter().map(|(s, l, lp)| d.entry(*s, idx[*l], idx[*lp])).product(),
        }
    }
}

/// Weighted median of the combined `R_{12}` over draws.
pub fn median_overlap(sample: &OverlapSample) -> f64 {
    let mut v: Vec<(f64, f64)> = sample.draws().iter().map(|d| (d.r(0, 1), d.weight())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|x| x.1).sum();
    let mut acc = 0.0;
    for (x, w) in &v {
        acc += w;
        if acc >= total / 2.0 {
            return *x;
        }
    }
    f64::NAN
}

#[derive(Clone, Debug, Serialize)]
pub struct GgDelta {
    pub value: f64,
    /// The quantity inside the absolute value; its jackknife SE is `se`.
    pub signed: f64,
    pub se: f64,
    /// `E⟨f R_w(1,n+1)^p⟩`, `E⟨f⟩`, `E⟨R_w(1,2)^p⟩`, `(1/n) Σ_l E⟨f R_w(1,l)^p⟩`.
    pub terms: [f64; 4],
    pub draws: usize,
}

fn tuples(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; m];
    fn rec(m: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(m, k, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(m, k, &mut cur, &mut used, &mut out);
    out
}

/// The Ghirlanda-Guerra statistic
/// `|E⟨f R_w(1,n+1)^p⟩ - (1/n) E⟨f⟩ E⟨R_w(1,2)^p⟩ - (1/n) Σ_{l=2}^n E⟨f R_w(1,l)^p⟩|`.
///
/// Within each draw the summands are averaged over every ordered choice of
/// `n+1` distinct replicas, so the result does not depend on replica labels.
/// Expectations are draw-weighted means; the SE is a delete-one jackknife.
pub fn gg_delta(sample: &OverlapSample, f: &TestFunction, n: usize, w: &[f64], p: u32) -> Result<GgDelta> {
    Error::check_len(sample.n_species(), w.len())?;
    check_weight_vector(w)?;
    if n < 2 || p == 0 {
        return Err(Error::config("gg_delta needs n >= 2 and p >= 1"));
    }
    if sample.is_empty() || sample.min_replicas() < n + 1 {
        return Err(Error::config(format!(
            "gg_delta with n = {n} needs at least {} replicas per draw",
            n + 1
        )));
    }
    f.check(n, sample.n_species())?;
    let lambda = sample.lambda();
    let per_draw: Vec<Vec<f64>> = sample
        .draws()
        .par_iter()
        .map(|d| {
            let m = d.n();
            let ts = tuples(m, n + 1);
            if ts.len() > MAX_TUPLES {
                return Err(Error::CapExceeded(format!("{} replica tuples per draw", ts.len())));
            }
            let rw: Vec<f64> = (0..m * m).map(|k| weighted(d, lambda, w, k / m, k % m).powi(p as i32)).collect();
            let mut acc = [0.0; 4];
            for t in &ts {
                let fv = f.eval(d, &t[..n]);
                acc[0] += fv * rw[t[0] * m + t[n]];
                acc[1] += fv;
                acc[2] += rw[t[0] * m + t[1]];
                acc[3] += (1..n).map(|l| fv * rw[t[0] * m + t[l]]).sum::<f64>() / n as f64;
            }
            let c = ts.len() as f64;
            Ok(acc.iter().map(|a| a / c).collect())
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = sample.draws().iter().map(|d| d.weight()).collect();
    let nf = n as f64;
    let stat = |m: &[f64]| m[0] - m[1] * m[2] / nf - m[3];
    let est = jackknife(&per_draw, &weights, stat);
    let wt: f64 = weights.iter().sum();
    let mut terms = [0.0; 4];
    for (v, w) in per_draw.iter().zip(&weights) {
        for j in 0..4 {
            terms[j] += w * v[j] / wt;
        }
    }
    Ok(GgDelta { value: est.mean.abs(), signed: est.mean, se: est.se, terms, draws: sample.len() })
}
