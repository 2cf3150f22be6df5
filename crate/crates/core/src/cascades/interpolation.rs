use rayon::prelude::*;
use serde::Serialize;

use super::{CascadeConfig, CascadeSampler, CascadeTree, FieldSample};
use crate::enumeration::{energy_table, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::model::{assign_species, disorder_draw, ModelSpec, SpinAssignment};
use crate::parisi::{path_sequences, RsbParams};
use crate::rng::StreamKey;
use crate::stats::{mean_se, paired_difference, Estimate, LogSumExp};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiConfig {
    pub samples: usize,
    pub cascade: CascadeConfig,
    /// Upper bound on `2^N` times the number of leaf slots.
    pub work_cap: f64,
    pub seed: u64,
}

impl PhiConfig {
    pub fn new(samples: usize, m: usize, seed: u64) -> Self {
        Self { samples, cascade: CascadeConfig::uniform(m), work_cap: 1e9, seed }
    }
}

/// `φ(x)` estimates on a grid of `x`, all computed from the same disorder,
/// cascades and fields.
#[derive(Clone, Debug, Serialize)]
pub struct PhiCurve {
    pub xs: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Per-sample values, `per_sample[i][k]` for `xs[i]` and sample `k`.
    #[serde(skip)]
    pub per_sample: Vec<Vec<f64>>,
}

impl PhiCurve {
    /// Estimate of `φ(xs[i]) - φ(xs[j])` from paired samples.
    pub fn difference(&self, i: usize, j: usize) -> Estimate {
        paired_difference(&self.per_sample[i], &self.per_sample[j])
    }
}

pub fn interpolation_phi(
    spec: &ModelSpec,
    n: usize,
    params: &RsbParams,
    x: f64,
    config: &PhiConfig,
) -> Result<Estimate> {
    Ok(interpolation_phi_curve(spec, n, params, &[x], config)?.estimates[0])
}

/// Sample `k` uses disorder draw `k` of the seed's disorder stream (the same
/// draws as [`crate::model::free_energy_mc`]) and cascade sample `k`.
pub fn interpolation_phi_curve(
    spec: &ModelSpec,
    n: usize,
    params: &RsbParams,
    xs: &[f64],
    config: &PhiConfig,
) -> Result<PhiCurve> {
    if let Some(x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::config(format!("interpolation parameter {x} is outside [0,1]")));
    }
    if config.samples < 2 {
        return Err(Error::config("phi estimation needs at least 2 samples"));
    }
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the enumeration cap of {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    let assign = assign_species(spec, n)?;
    let paths = path_sequences(spec, params)?;
    let root = StreamKey::new(config.seed);
    let disorder_key = root.derive("disorder");
    let sampler = CascadeSampler::with_key(params.zeta(), &config.cascade, root.derive("cascade"))?;
    let slots = {
        let b = config.cascade.branching_for(params.r())?;
        let lump = usize::from(config.cascade.tail == super::TailMode::Compensate);
        b[..b.len() - 1].iter().product::<usize>() * (b[b.len() - 1] + lump)
    };
    let work = (slots as f64) * 2f64.powi(n as i32);
    if xs.iter().any(|&x| x > 0.0 && x < 1.0) && work > config.work_cap {
        return Err(Error::CapExceeded(format!(
            "{work:e} state-leaf pairs exceed the work cap of {:e}",
            config.work_cap
        )));
    }
    let field_key = sampler.key().derive("spin-fields");
    let mut seqs: Vec<&[f64]> = (0..n).map(|i| paths.species[assign.species_of(i)].as_slice()).collect();
    seqs.push(&paths.combined);

    if spec.is_null() {
        let per_sample = vec![vec![std::f64::consts::LN_2; config.samples]; xs.len()];
        return Ok(PhiCurve {
            xs: xs.to_vec(),
            estimates: per_sample.iter().map(|v| mean_se(v)).collect(),
            per_sample,
        });
    }
    let rows: Vec<Vec<f64>> = (0..config.samples as u64)
        .into_par_iter()
        .map(|k| {
            let g = disorder_draw(spec, &assign, &disorder_key, k)?;
            let tree = sampler.tree(k);
            let fields = super::fields::generate(&tree, &seqs, &field_key)?;
            let energies = natural_energies(&g.to_polynomial(), n)?;
            Ok(xs.iter().map(|&x| phi_sample(&tree, &fields, &energies, &assign, x)).collect())
        })
        .collect::<Result<_>>()?;
    let per_sample: Vec<Vec<f64>> = (0..xs.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    Ok(PhiCurve {
        xs: xs.to_vec(),
        estimates: per_sample.iter().map(|v| mean_se(v)).collect(),
        per_sample,
    })
}

/// Energies indexed by configuration code (bit `i` set means `σ_i = -1`).
fn natural_energies(poly: &crate::enumeration::SpinPolynomial, n: usize) -> Result<Vec<f64>> {
    let table = energy_table(poly, DEFAULT_ENUMERATION_CAP)?;
    let mut e = vec![0.0; 1 << n];
    for (k, &v) in table.energies().iter().enumerate() {
        e[table.code(k) as usize] = v;
    }
    Ok(e)
}

/// `(1/N) log Σ_{σ,α} v_α exp(√x H(σ) + √(1-x) Σ_i σ_i C_i(α) + √(xN) D(α))`.
fn phi_sample(
    tree: &CascadeTree,
    fields: &FieldSample,
    energies: &[f64],
    assign: &SpinAssignment,
    x: f64,
) -> f64 {
    let n = assign.n_total();
    let nf = n as f64;
    let sx = x.sqrt();
    let b = (1.0 - x).sqrt();
    let dscale = (x * nf).sqrt();
    let lump_extra = {
        let v_spins: f64 = (0..n).map(|i| fields.leaf_variance(i)).sum();
        (1.0 - x) * v_spins / 2.0 + x * nf * fields.leaf_variance(n) / 2.0
    };
    let lw = tree.log_weights();
    let mut total = LogSumExp::default();

    if b == 0.0 {
        // Spin part and cascade part separate.
        let mut z = LogSumExp::default();
        energies.iter().for_each(|&e| z.push(e));
        for a in 0..tree.n_slots() {
            let extra = if tree.is_lump(a) { lump_extra } else { 0.0 };
            total.push(lw[a] + extra + dscale * fields.value(n, a));
        }
        return (z.value() + total.value()) / nf;
    }

    let hmax = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let base: Vec<f64> = energies.iter().map(|&e| (sx * (e - hmax)).exp()).collect();
    let mut scratch = vec![0.0; base.len() / 2];
    let mut c = vec![0.0; n];
    for a in 0..tree.n_slots() {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = b * fields.value(i, a);
        }
        let shift: f64 = c.iter().map(|v| v.abs()).sum();
        let s = if sx == 0.0 {
            // Uniform base: the sum factorizes over sites.
            c.iter().map(|&v| (1.0 + (-2.0 * v.abs()).exp()).ln()).sum::<f64>()
        } else {
            fold(&base, &mut scratch, &c).ln()
        };
        let extra = if tree.is_lump(a) { lump_extra } else { 0.0 };
        total.push(lw[a] + extra + s + shift + sx * hmax + dscale * fields.value(n, a));
    }
    total.value() / nf
}

/// `Σ_σ base(σ) Π_i exp(σ_i c_i - |c_i|)`, contracting the highest spin first.
fn fold(base: &[f64], scratch: &mut [f64], c: &[f64]) -> f64 {
    let n = c.len();
    let factors = |ci: f64| {
        let small = (-2.0 * ci.abs()).exp();
        if ci >= 0.0 { (1.0, small) } else { (small, 1.0) }
    };
    let half = 1usize << (n - 1);
    let (p, m) = factors(c[n - 1]);
    for j in 0..half {
        scratch[j] = base[j] * p + base[j + half] * m;
    }
    for i in (0..n - 1).rev() {
        let h = 1usize << i;
        let (p, m) = factors(c[i]);
        let (lo, hi) = scratch[..2 * h].split_at_mut(h);
        for (l, &u) in lo.iter_mut().zip(hi.iter()) {
            *l = *l * p + u * m;
        }
    }
    scratch[0]
}
