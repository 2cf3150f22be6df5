//! Truncated Ruelle probability cascades with hierarchical Gaussian fields.
//!
//! Each internal node at depth `d` keeps the `M_d` largest atoms of a Poisson
//! process with intensity `ζ_d x^{-ζ_d-1}`, generated as `Γ_k^{-1/ζ_d}` from
//! the arrival times `Γ_k` of a unit-rate process. Leaf weights are products
//! of atoms along the path, normalized over the kept leaves.
//!
//! Truncating the last level removes a tail whose expected mass given the
//! last kept arrival is `ζ/(1-ζ) Γ_M^{1-1/ζ}`. With [`TailMode::Compensate`]
//! (the default) every last-level node gets one extra *lump* slot carrying
//! that mass; field functionals on the lump use the conditional mean over a
//! fresh last-level increment. Tails of intermediate levels are dropped and
//! only reported.
//!
//! All randomness is keyed by `(seed, sample, node)`, so a tree with larger
//! `M` extends the one with smaller `M` on the same sample (common random
//! numbers across truncations).

mod fields;
mod interpolation;
mod overlaps;

pub use fields::{cascade_log_ch, cascade_log_exp, sample_fields, FieldSample};
pub use interpolation::{interpolation_phi, interpolation_phi_curve, PhiConfig, PhiCurve};
pub use overlaps::{cascade_overlap_sample, sample_overlap_array};

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix, StreamKey};
use crate::stats::LogSumExp;

const ROOT_ID: u64 = 0x5250_4320_726f_6f74;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    Discard,
    Compensate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Kept children per node, one entry per level; a single entry applies
    /// to every level.
    pub branching: Vec<usize>,
    /// Largest allowed number of leaf slots.
    pub leaf_cap: usize,
    pub tail: TailMode,
}

impl CascadeConfig {
    pub fn uniform(m: usize) -> Self {
        Self { branching: vec![m], leaf_cap: 100_000, tail: TailMode::Compensate }
    }

    pub fn with_leaf_cap(mut self, cap: usize) -> Self {
        self.leaf_cap = cap;
        self
    }

    pub fn with_tail(mut self, tail: TailMode) -> Self {
        self.tail = tail;
        self
    }

    pub fn branching_for(&self, r: usize) -> Result<Vec<usize>> {
        let b = match self.branching.len() {
            1 => vec![self.branching[0]; r],
            n if n == r => self.branching.clone(),
            n => {
                return Err(Error::config(format!("branching lists {n} levels for a depth-{r} cascade")));
            }
        };
        if let Some(m) = b.iter().find(|&&m| m < 2) {
            return Err(Error::config(format!("branching M = {m} is below 2")));
        }
        let lump = usize::from(self.tail == TailMode::Compensate);
        let parents: usize = b[..r - 1].iter().product();
        let slots = parents.saturating_mul(b[r - 1] + lump);
        if slots > self.leaf_cap {
            return Err(Error::CapExceeded(format!(
                "{slots} leaf slots exceed the cap of {}",
                self.leaf_cap
            )));
        }
        Ok(b)
    }
}

fn validate_zeta(zeta: &[f64]) -> Result<()> {
    if zeta.is_empty() {
        return Err(Error::params("a cascade needs at least one level"));
    }
    for (l, &z) in zeta.iter().enumerate() {
        if !(z > 0.0 && z < 1.0) || (l > 0 && z <= zeta[l - 1]) {
            return Err(Error::params("zeta must be strictly increasing in (0,1)"));
        }
    }
    Ok(())
}

/// Reusable sampler: one tree and one field set per sample index.
#[derive(Clone, Debug)]
pub struct CascadeSampler {
    zeta: Vec<f64>,
    branching: Vec<usize>,
    tail: TailMode,
    key: StreamKey,
}

impl CascadeSampler {
    pub fn new(zeta: &[f64], config: &CascadeConfig, seed: u64) -> Result<Self> {
        Self::with_key(zeta, config, StreamKey::new(seed).derive("cascade"))
    }

    pub fn with_key(zeta: &[f64], config: &CascadeConfig, key: StreamKey) -> Result<Self> {
        validate_zeta(zeta)?;
        let branching = config.branching_for(zeta.len())?;
        Ok(Self { zeta: zeta.to_vec(), branching, tail: config.tail, key })
    }

    pub fn r(&self) -> usize {
        self.zeta.len()
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    pub fn tree(&self, sample: u64) -> CascadeTree {
        let r = self.r();
        let compensate = self.tail == TailMode::Compensate;
        let atoms_key = self.key.derive("atoms");
        let mut node_ids = vec![vec![ROOT_ID]];
        // Unnormalized log mass of the path to each node at the current depth.
        let mut node_logw = vec![0.0f64];
        let mut arrivals = Vec::with_capacity(r);
        let mut discarded = Vec::with_capacity(r);
        let mut log_weights = Vec::new();
        let mut weights = Vec::new();
        for d in 0..r {
            let m = self.branching[d];
            let z = self.zeta[d];
            let last = d + 1 == r;
            let ids = &node_ids[d];
            let mut gam = Vec::with_capacity(ids.len() * m);
            let mut rel = Vec::with_capacity(ids.len() * m);
            let mut rel_log = Vec::with_capacity(ids.len() * m);
            let mut frac = 0.0;
            let mut parent_mass = Vec::with_capacity(ids.len());
            for &id in ids {
                let mut rng = atoms_key.stream(mix(sample, id));
                let mut t = 0.0;
                for _ in 0..m {
                    let e: f64 = Exp1.sample(&mut rng);
                    t += e;
                    gam.push(t);
                }
                let g = &gam[gam.len() - m..];
                let l0 = g[0].ln();
                let mut kept = 0.0;
                for &gk in g {
                    let lx = -(gk.ln() - l0) / z;
                    let x = lx.exp();
                    kept += x;
                    rel.push(x);
                    rel_log.push(lx);
                }
                // Expected tail mass relative to the first atom.
                let tail = ((z / (1.0 - z)).ln() + (1.0 - 1.0 / z) * g[m - 1].ln() + l0 / z).exp();
                frac += tail / (kept + tail);
                parent_mass.push((-l0 / z, kept, tail));
            }
            discarded.push(frac / ids.len() as f64);
            if last {
                let stride = m + usize::from(compensate);
                let log_mass: Vec<f64> = node_logw
                    .iter()
                    .zip(&parent_mass)
                    .map(|(&lw, &(la0, kept, tail))| {
                        lw + la0 + if compensate { (kept + tail).ln() } else { kept.ln() }
                    })
                    .collect();
                let mut lse = LogSumExp::default();
                log_mass.iter().for_each(|&w| lse.push(w));
                let norm = lse.value();
                log_weights.reserve(ids.len() * stride);
                weights.reserve(ids.len() * stride);
                for (p, &(la0, _, tail)) in parent_mass.iter().enumerate() {
                    let base_log = node_logw[p] + la0 - norm;
                    let base = base_log.exp();
                    for c in p * m..(p + 1) * m {
                        weights.push(base * rel[c]);
                        log_weights.push(base_log + rel_log[c]);
                    }
                    if compensate {
                        weights.push(base * tail);
                        log_weights.push(base_log + tail.ln());
                    }
                }
            } else {
                let mut next_ids = Vec::with_capacity(ids.len() * m);
                let mut next_logw = Vec::with_capacity(ids.len() * m);
                for (p, &id) in ids.iter().enumerate() {
                    for c in 0..m {
                        next_ids.push(mix(id, c as u64 + 1));
                        next_logw.push(node_logw[p] + parent_mass[p].0 + rel_log[p * m + c]);
                    }
                }
                node_ids.push(next_ids);
                node_logw = next_logw;
            }
            arrivals.push(gam);
        }
        CascadeTree {
            zeta: self.zeta.clone(),
            branching: self.branching.clone(),
            tail: self.tail,
            sample,
            node_ids,
            arrivals,
            log_weights,
            weights,
            discarded,
        }
    }

    pub fn fields(&self, tree: &CascadeTree, sequences: &[&[f64]]) -> Result<FieldSample> {
        fields::generate(tree, sequences, &self.key.derive("fields"))
    }
}

/// One realization of a truncated cascade.
#[derive(Clone, Debug)]
pub struct CascadeTree {
    zeta: Vec<f64>,
    branching: Vec<usize>,
    tail: TailMode,
    sample: u64,
    node_ids: Vec<Vec<u64>>,
    arrivals: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    discarded: Vec<f64>,
}

/// Samples tree 0 of the seed's cascade stream.
pub fn sample_cascade(zeta: &[f64], config: &CascadeConfig, seed: u64) -> Result<CascadeTree> {
    Ok(CascadeSampler::new(zeta, config, seed)?.tree(0))
}

impl CascadeTree {
    pub fn r(&self) -> usize {
        self.zeta.len()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn sample_index(&self) -> u64 {
        self.sample
    }

    pub fn tail_mode(&self) -> TailMode {
        self.tail
    }

    /// Normalized slot weights (kept leaves and, if enabled, one lump per
    /// last-level node).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `Σ v_α²` over kept leaves. Lump mass is dust made of infinitesimal
    /// atoms and adds nothing.
    pub fn pair_probability(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(a, _)| !self.is_lump(*a))
            .map(|(_, w)| w * w)
            .sum()
    }

    pub fn n_slots(&self) -> usize {
        self.weights.len()
    }

    pub fn n_parents(&self) -> usize {
        self.node_ids[self.r() - 1].len()
    }

    /// Slots per last-level node.
    pub fn stride(&self) -> usize {
        self.branching[self.r() - 1] + usize::from(self.tail == TailMode::Compensate)
    }

    pub fn is_lump(&self, slot: usize) -> bool {
        self.tail == TailMode::Compensate && slot % self.stride() == self.stride() - 1
    }

    /// Arrival times of the kept children of every node at `depth`.
    pub fn arrivals(&self, depth: usize) -> &[f64] {
        &self.arrivals[depth]
    }

    pub(crate) fn node_ids(&self, depth: usize) -> &[u64] {
        &self.node_ids[depth]
    }

    /// Mean estimated fraction of each node's mass lying beyond the kept
    /// atoms, per level.
    pub fn discarded_mass(&self) -> &[f64] {
        &self.discarded
    }

    /// Path digits of a last-level node (one per depth `0..r-1`).
    fn parent_digits(&self, parent: usize) -> Vec<usize> {
        let r = self.r();
        let mut digits = vec![0; r - 1];
        let mut p = parent;
        for d in (0..r - 1).rev() {
            digits[d] = p % self.branching[d];
            p /= self.branching[d];
        }
        digits
    }

    /// `α ∧ β` for two slots; two draws from one lump are distinct leaves.
    pub fn wedge(&self, a: usize, b: usize) -> usize {
        let r = self.r();
        let stride = self.stride();
        let (pa, pb) = (a / stride, b / stride);
        if pa != pb {
            let da = self.parent_digits(pa);
            let db = self.parent_digits(pb);
            return da.iter().zip(&db).take_while(|(x, y)| x == y).count();
        }
        if a == b && !self.is_lump(a) {
            r
        } else {
            r - 1
        }
    }
}
