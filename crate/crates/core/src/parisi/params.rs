use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

const ENDPOINT_TOL: f64 = 1e-12;

/// JSON form: `{"r": 2, "zeta": [..], "q": {"a": [..], "b": [..]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub r: usize,
    pub zeta: Vec<f64>,
    pub q: BTreeMap<String, Vec<f64>>,
}

/// Replica symmetry breaking parameters; `q` is indexed by species in model
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct RsbParams {
    zeta: Vec<f64>,
    q: Vec<Vec<f64>>,
}

impl RsbParams {
    /// Validates `ζ` strictly increasing in (0,1) and each `q^s`
    /// non-decreasing from 0 to 1. Endpoints within 1e-12 are snapped.
    pub fn new(zeta: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let r = zeta.len();
        if r == 0 {
            return Err(Error::params("r must be at least 1"));
        }
        for (l, &z) in zeta.iter().enumerate() {
            if !(z > 0.0 && z < 1.0) {
                return Err(Error::params(format!("zeta[{l}] = {z} is not in (0,1)")));
            }
            if l > 0 && z <= zeta[l - 1] {
                return Err(Error::params(format!("zeta is not strictly increasing at index {l}")));
            }
        }
        if q.is_empty() {
            return Err(Error::params("q needs one sequence per species"));
        }
        let mut q = q;
        for (s, seq) in q.iter_mut().enumerate() {
            if seq.len() != r + 1 {
                return Err(Error::params(format!(
                    "q sequence {s} has length {}, expected r+1 = {}",
                    seq.len(),
                    r + 1
                )));
            }
            if seq.iter().any(|v| !v.is_finite()) {
                return Err(Error::params(format!("q sequence {s} is not finite")));
            }
            if seq[0].abs() > ENDPOINT_TOL || (seq[r] - 1.0).abs() > ENDPOINT_TOL {
                return Err(Error::params(format!(
                    "q sequence {s} must start at 0 and end at 1, got {} and {}",
                    seq[0], seq[r]
                )));
            }
            seq[0] = 0.0;
            seq[r] = 1.0;
            if let Some(l) = (1..=r).find(|&l| seq[l] < seq[l - 1]) {
                return Err(Error::params(format!("q sequence {s} decreases at index {l}")));
            }
        }
        Ok(Self { zeta, q })
    }

    /// Every species shares the same sequence.
    pub fn uniform(zeta: Vec<f64>, q: Vec<f64>, n_species: usize) -> Result<Self> {
        Self::new(zeta, vec![q; n_species])
    }

    pub fn r(&self) -> usize {
        self.zeta.len()
    }

    pub fn n_species(&self) -> usize {
        self.q.len()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn q(&self, s: usize) -> &[f64] {
        &self.q[s]
    }

    pub fn q_all(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn from_raw(raw: &RawParams, spec: &ModelSpec) -> Result<Self> {
        if raw.zeta.len() != raw.r {
            return Err(Error::params(format!(
                "r = {} but zeta has {} entries",
                raw.r,
                raw.zeta.len()
            )));
        }
        if let Some(extra) = raw.q.keys().find(|k| spec.species_index(k).is_none()) {
            return Err(Error::params(format!("q lists unknown species {extra:?}")));
        }
        let q = spec
            .species()
            .iter()
            .map(|s| {
                raw.q
                    .get(s)
                    .cloned()
                    .ok_or_else(|| Error::params(format!("q is missing species {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.zeta.clone(), q)
    }

    pub fn to_raw(&self, spec: &ModelSpec) -> RawParams {
        RawParams {
            r: self.r(),
            zeta: self.zeta.clone(),
            q: spec.species().iter().cloned().zip(self.q.iter().cloned()).collect(),
        }
    }

    /// Combined sequence `q_ℓ = Σ_s λ_s q^s_ℓ`.
    pub fn combined_q(&self, lambda: &[f64]) -> Vec<f64> {
        (0..=self.r())
            .map(|l| self.q.iter().zip(lambda).map(|(q, lam)| lam * q[l]).sum())
            .collect()
    }

    /// `r+1` level parameters with `q_j` repeated at positions `j, j+1` and a
    /// new `ζ` at the midpoint of its neighbours. The functional is unchanged
    /// because the new level carries a zero increment.
    pub fn with_duplicate_level(&self, j: usize) -> Result<Self> {
        let r = self.r();
        if j > r {
            return Err(Error::params(format!("cannot duplicate level {j} of r = {r}")));
        }
        let lo = if j == 0 { 0.0 } else { self.zeta[j - 1] };
        let hi = if j == r { 1.0 } else { self.zeta[j] };
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::params("no room for a new zeta between neighbouring levels"));
        }
        let mut zeta = self.zeta.clone();
        zeta.insert(j, mid);
        let q = self
            .q
            .iter()
            .map(|seq| {
                let mut s = seq.clone();
                s.insert(j, seq[j]);
                s
            })
            .collect();
        Self::new(zeta, q)
    }
}
