use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::{OverlapDraw, OverlapSample, PerturbationSpec};
use crate::enumeration::{energy_table, SpinPolynomial, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::model::{assign_species, disorder_draw, ModelSpec};
use crate::replica::perturbation_polynomial;
use crate::rng::StreamKey;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GibbsConfig {
    pub replicas: usize,
    pub draws: usize,
    pub seed: u64,
    pub perturbation: Option<PerturbationSpec>,
}

/// Exact Gibbs probabilities `exp E(σ) / Z`, indexed by configuration code.
pub fn gibbs_probabilities(energy: &SpinPolynomial) -> Result<Vec<f64>> {
    let table = energy_table(energy, DEFAULT_ENUMERATION_CAP)?;
    let probs = table.probabilities();
    let mut out = vec![0.0; probs.len()];
    for (k, p) in probs.into_iter().enumerate() {
        out[table.code(k) as usize] = p;
    }
    Ok(out)
}

/// Each draw takes fresh disorder (draw `k` of the seed's disorder stream),
/// fresh perturbation couplings, and `replicas` i.i.d. configurations from
/// the exact Gibbs measure of `H_N + s_N h_N`. Overlap proportions are the
/// realized `N_s / N`.
pub fn gibbs_replica_samples(spec: &ModelSpec, n: usize, config: &GibbsConfig) -> Result<OverlapSample> {
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the enumeration cap of {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    if config.replicas < 2 {
        return Err(Error::config("at least 2 replicas are required"));
    }
    let assign = assign_species(spec, n)?;
    let root = StreamKey::new(config.seed);
    let disorder_key = root.derive("disorder");
    let pert_key = root.derive("perturbation").derive("couplings");
    let replica_key = root.derive("replicas");
    let pert = match &config.perturbation {
        Some(p) => {
            p.validate(spec.n_species())?;
            Some((p, p.coefficients(config.seed), p.strength(n)))
        }
        None => None,
    };
    let lambda = assign.realized_lambda();
    let draws: Vec<OverlapDraw> = (0..config.draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut poly = disorder_draw(spec, &assign, &disorder_key, k)?.to_polynomial();
            if let Some((p, coeffs, s_n)) = &pert {
                let h = perturbation_polynomial(p, coeffs, &assign, &pert_key, k)?;
                poly.add_scaled(&h, *s_n);
            }
            let probs = gibbs_probabilities(&poly)?;
            let dist = WeightedIndex::new(&probs).map_err(|e| Error::params(format!("Gibbs weights: {e}")))?;
            let mut rng = replica_key.stream(k);
            let codes: Vec<u64> = (0..config.replicas).map(|_| dist.sample(&mut rng) as u64).collect();
            Ok(overlap_draw(&assign, &lambda, &codes))
        })
        .collect::<Result<_>>()?;
    OverlapSample::new(spec.species().to_vec(), lambda, draws)
}

fn overlap_draw(assign: &crate::model::SpinAssignment, lambda: &[f64], codes: &[u64]) -> OverlapDraw {
    let n = codes.len();
    let ns = assign.n_species();
    let mut species = vec![vec![0.0; n * n]; ns];
    let mut combined = vec![0.0; n * n];
    for l in 0..n {
        for lp in l..n {
            let diff = codes[l] ^ codes[lp];
            let mut r = 0.0;
            for s in 0..ns {
                let range = assign.range(s);
                let len = range.len();
                let mask = ((1u64 << len) - 1) << range.start;
                let flips = (diff & mask).count_ones() as f64;
                let v = (len as f64 - 2.0 * flips) / len as f64;
                species[s][l * n + lp] = v;
                species[s][lp * n + l] = v;
                r += lambda[s] * v;
            }
            combined[l * n + lp] = r;
            combined[lp * n + l] = r;
        }
    }
    OverlapDraw::new(n, combined, species, 1.0)
}
