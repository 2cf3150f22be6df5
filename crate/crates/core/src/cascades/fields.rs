use rand_distr::{Distribution, StandardNormal};

use super::{CascadeTree, ROOT_ID};
use crate::error::{Error, Result};
use crate::parisi::PathSequences;
use crate::rng::{mix, StreamKey};
use crate::stats::{log_cosh, LogSumExp};

const INCREMENT_TOL: f64 = 1e-13;
// Above this the per-parent sums switch to the log domain.
const LINEAR_LIMIT: f64 = 300.0;

/// Hierarchical Gaussian fields attached to the leaves of one tree.
///
/// Each field is stored as its value at every last-level node plus the
/// final-edge increment of every slot. Lump slots carry a zero increment;
/// the functionals average them analytically using the last-level variance.
#[derive(Clone, Debug)]
pub struct FieldSample {
    sample: u64,
    stride: usize,
    lump: bool,
    parent: Vec<Vec<f64>>,
    increments: Vec<Vec<f64>>,
    leaf_var: Vec<f64>,
}

impl FieldSample {
    pub fn n_fields(&self) -> usize {
        self.parent.len()
    }

    pub fn sample_index(&self) -> u64 {
        self.sample
    }

    /// Field `f` at slot `slot`.
    pub fn value(&self, f: usize, slot: usize) -> f64 {
        self.parent[f][slot / self.stride] + self.increments[f][slot]
    }

    pub fn values(&self, f: usize) -> Vec<f64> {
        (0..self.increments[f].len()).map(|a| self.value(f, a)).collect()
    }

    pub fn parent_values(&self, f: usize) -> &[f64] {
        &self.parent[f]
    }

    pub fn increments(&self, f: usize) -> &[f64] {
        &self.increments[f]
    }

    pub fn leaf_variance(&self, f: usize) -> f64 {
        self.leaf_var[f]
    }

    fn is_zero(&self, f: usize) -> bool {
        self.leaf_var[f] == 0.0
            && self.parent[f].iter().all(|&x| x == 0.0)
            && self.increments[f].iter().all(|&x| x == 0.0)
    }
}

fn level_variances(seq: &[f64], r: usize) -> Result<Vec<f64>> {
    Error::check_len(r + 1, seq.len())?;
    if seq[0] < -INCREMENT_TOL {
        return Err(Error::params(format!("negative root variance {}", seq[0])));
    }
    let mut v = vec![seq[0].max(0.0)];
    for w in seq.windows(2) {
        let d = w[1] - w[0];
        if d < -INCREMENT_TOL {
            return Err(Error::params(format!("path sequence decreases by {}", -d)));
        }
        v.push(d.max(0.0));
    }
    Ok(v)
}

/// Builds one field per sequence; field `f` uses the streams of `key.derive_index(f)`.
pub(crate) fn generate(tree: &CascadeTree, sequences: &[&[f64]], key: &StreamKey) -> Result<FieldSample> {
    let r = tree.r();
    let sample = tree.sample_index();
    let stride = tree.stride();
    let lump = tree.tail_mode() == super::TailMode::Compensate;
    let mut parent = Vec::with_capacity(sequences.len());
    let mut increments = Vec::with_capacity(sequences.len());
    let mut leaf_var = Vec::with_capacity(sequences.len());
    for (f, seq) in sequences.iter().enumerate() {
        let var = level_variances(seq, r)?;
        let fkey = key.derive_index(f as u64);
        let root = if var[0] > 0.0 {
            let z: f64 = StandardNormal.sample(&mut fkey.stream(mix(sample, ROOT_ID ^ 1)));
            var[0].sqrt() * z
        } else {
            0.0
        };
        let mut node_vals = vec![root];
        for d in 0..r - 1 {
            let m = tree.branching()[d];
            let sd = var[d + 1].sqrt();
            let mut next = Vec::with_capacity(node_vals.len() * m);
            for (p, &id) in tree.node_ids(d).iter().enumerate() {
                let mut rng = fkey.stream(mix(sample, id));
                for _ in 0..m {
                    let z: f64 = if sd > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
                    next.push(node_vals[p] + sd * z);
                }
            }
            node_vals = next;
        }
        let m = tree.branching()[r - 1];
        let sd = var[r].sqrt();
        let mut inc = Vec::with_capacity(node_vals.len() * stride);
        for &id in tree.node_ids(r - 1) {
            let mut rng = fkey.stream(mix(sample, id));
            for _ in 0..m {
                let z: f64 = if sd > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
                inc.push(sd * z);
            }
            if lump {
                inc.push(0.0);
            }
        }
        parent.push(node_vals);
        increments.push(inc);
        leaf_var.push(var[r]);
    }
    Ok(FieldSample { sample, stride, lump, parent, increments, leaf_var })
}

/// Species fields `C^s` (indices `0..S`) and the combined field `D` (index `S`)
/// for the tree's sample, from the streams of `seed`.
pub fn sample_fields(tree: &CascadeTree, paths: &PathSequences, seed: u64) -> Result<FieldSample> {
    let key = StreamKey::new(seed).derive("cascade").derive("fields");
    let mut seqs: Vec<&[f64]> = paths.species.iter().map(Vec::as_slice).collect();
    seqs.push(&paths.combined);
    generate(tree, &seqs, &key)
}

/// `log Σ_a v_a g_p(u_a)` where slot `a` sits under parent `p`, `u_a` is its
/// increment and the per-parent factor is `exp(t·c_p)` for the two signs `t = ±1`
/// (`cosh`) or a single sign (`exp`). Lumps contribute `lump_factor` per sign.
fn parent_factorized(
    tree: &CascadeTree,
    fields: &FieldSample,
    f: usize,
    scale: f64,
    symmetric: bool,
) -> f64 {
    let stride = tree.stride();
    let w = tree.weights();
    let lw = tree.log_weights();
    let inc = &fields.increments[f];
    let lump_log = scale * scale * fields.leaf_var[f] / 2.0;
    let mut total = LogSumExp::default();
    for (p, &c) in fields.parent[f].iter().enumerate() {
        let range = p * stride..(p + 1) * stride;
        let big = inc[range.clone()].iter().any(|&u| (scale * u).abs() > LINEAR_LIMIT) || lump_log > LINEAR_LIMIT;
        let c = scale * c;
        if big {
            for a in range {
                let u = if fields.lump && tree.is_lump(a) { 0.0 } else { scale * inc[a] };
                let extra = if fields.lump && tree.is_lump(a) { lump_log } else { 0.0 };
                let g = if symmetric { log_cosh(c + u) } else { c + u };
                total.push(lw[a] + extra + g);
            }
            continue;
        }
        let (mut plus, mut minus) = (0.0, 0.0);
        for a in range {
            if fields.lump && tree.is_lump(a) {
                let e = lump_log.exp();
                plus += w[a] * e;
                minus += w[a] * e;
            } else {
                let e = (scale * inc[a]).exp();
                plus += w[a] * e;
                if symmetric {
                    minus += w[a] / e;
                }
            }
        }
        let term = if !symmetric {
            c + plus.ln()
        } else if c >= 0.0 {
            c + (plus + (-2.0 * c).exp() * minus).ln() - std::f64::consts::LN_2
        } else {
            -c + (minus + (2.0 * c).exp() * plus).ln() - std::f64::consts::LN_2
        };
        total.push(term);
    }
    total.value()
}

/// `log Σ_α v_α ch F(α)` for field `f`; zero fields give exactly 0.
pub fn cascade_log_ch(tree: &CascadeTree, fields: &FieldSample, f: usize) -> f64 {
    if fields.is_zero(f) {
        return 0.0;
    }
    parent_factorized(tree, fields, f, 1.0, true)
}

/// `log Σ_α v_α exp(t F(α))` for field `f`; `t = 0` or a zero field gives exactly 0.
pub fn cascade_log_exp(tree: &CascadeTree, fields: &FieldSample, f: usize, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::params(format!("scale t must be finite and non-negative, got {t}")));
    }
    if t == 0.0 || fields.is_zero(f) {
        return Ok(0.0);
    }
    Ok(parent_factorized(tree, fields, f, t, false))
}
