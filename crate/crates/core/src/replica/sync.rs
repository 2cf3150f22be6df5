use serde::Serialize;

use super::OverlapSample;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UltrametricityReport {
    /// Largest `min(R_{ll'}, R_{ll''}) - R_{l'l''}`, clipped at 0.
    pub max_violation: f64,
    /// Fraction of checked triples whose violation exceeds the tolerance.
    pub violating_fraction: f64,
    pub triples: usize,
}

/// Checks every ordered triple of distinct replicas in every draw, on each
/// species array and on the combined array.
pub fn ultrametricity_violation(sample: &OverlapSample, tol: f64) -> Result<UltrametricityReport> {
    if sample.min_replicas() < 3 {
        return Err(Error::config("ultrametricity needs at least 3 replicas per draw"));
    }
    let mut max_violation: f64 = 0.0;
    let mut bad = 0usize;
    let mut triples = 0usize;
    for d in sample.draws() {
        let n = d.n();
        let arrays = std::iter::once(None).chain((0..d.n_species()).map(Some));
        for sp in arrays {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if a == b || a == c || b == c {
                            continue;
                        }
                        let v = (d.entry(sp, a, b).min(d.entry(sp, a, c)) - d.entry(sp, b, c)).max(0.0);
                        max_violation = max_violation.max(v);
                        triples += 1;
                        if v > tol {
                            bad += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(UltrametricityReport {
        max_violation,
        violating_fraction: if triples == 0 { 0.0 } else { bad as f64 / triples as f64 },
        triples,
    })
}

/// Overlaps closer than this are treated as one knot.
const KNOT_TOL: f64 = 1e-12;

/// Isotonic fit of `R^s` against `R` for one species.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeciesFit {
    pub species: String,
    /// Distinct observed `R` values with the fitted `L̂_s(R)`.
    pub knots: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// Largest secant slope between consecutive knots (0 with fewer than two).
    pub lipschitz: f64,
    /// The theoretical bound `1/λ_s`.
    pub lipschitz_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyncFit {
    pub species: Vec<SpeciesFit>,
    pub pairs: usize,
}

/// Weighted pool-adjacent-violators on points already sorted by `x` with
/// distinct `x`. Returns the fitted value per point.
fn pav(y: &[f64], w: &[f64]) -> Vec<f64> {
    // Blocks of (weighted mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((yi, wi, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let wt = w1 + w2;
            let m = if wt > 0.0 { (m1 * w1 + m2 * w2) / wt } else { (m1 + m2) / 2.0 };
            *blocks.last_mut().unwrap() = (m, wt, n1 + n2);
        }
    }
    blocks.iter().flat_map(|&(m, _, n)| std::iter::repeat_n(m, n)).collect()
}

/// Pools all pairs `l < l'` of every draw and fits a non-decreasing
/// least-squares map `R ↦ R^s` per species with draw weights.
pub fn fit_synchronization(sample: &OverlapSample) -> Result<SyncFit> {
    if sample.is_empty() || sample.min_replicas() < 2 {
        return Err(Error::config("synchronization fit needs a nonempty sample with n >= 2"));
    }
    let mut pairs: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for d in sample.draws() {
        for l in 0..d.n() {
            for lp in (l + 1)..d.n() {
                let rs = (0..d.n_species()).map(|s| d.rs(s, l, lp)).collect();
                pairs.push((d.r(l, lp), rs, d.weight()));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Group R values equal up to rounding (finite-N overlaps are rationals
    // summed in different orders).
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (k, p) in pairs.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if p.0 - g.0 <= KNOT_TOL => g.2 = k + 1,
            _ => groups.push((p.0, k, k + 1)),
        }
    }
    let mut fits = Vec::with_capacity(sample.n_species());
    for s in 0..sample.n_species() {
        let mut ys = Vec::with_capacity(groups.len());
        let mut ws = Vec::with_capacity(groups.len());
        for &(_, a, b) in &groups {
            let wt: f64 = pairs[a..b].iter().map(|p| p.2).sum();
            let mean = if wt > 0.0 {
                pairs[a..b].iter().map(|p| p.2 * p.1[s]).sum::<f64>() / wt
            } else {
                pairs[a..b].iter().map(|p| p.1[s]).sum::<f64>() / (b - a) as f64
            };
            ys.push(mean);
            ws.push(wt);
        }
        let fitted = pav(&ys, &ws);
        let mut max_residual: f64 = 0.0;
        for (g, &(_, a, b)) in groups.iter().enumerate() {
            for p in &pairs[a..b] {
                max_residual = max_residual.max((p.1[s] - fitted[g]).abs());
            }
        }
        let knots: Vec<(f64, f64)> = groups.iter().zip(&fitted).map(|(g, &f)| (g.0, f)).collect();
        let lipschitz = knots
            .windows(2)
            .map(|k| (k[1].1 - k[0].1) / (k[1].0 - k[0].0))
            .fold(0.0, f64::max);
        fits.push(SpeciesFit {
            species: sample.species()[s].clone(),
            knots,
            max_residual,
            lipschitz,
            lipschitz_bound: 1.0 / sample.lambda()[s],
        });
    }
    Ok(SyncFit { species: fits, pairs: pairs.len() })
}

/// Kolmogorov distance between the weighted laws of the combined `R_{12}`
/// in two samples.
pub fn overlap_law_distance(a: &OverlapSample, b: &OverlapSample) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.min_replicas() < 2 || b.min_replicas() < 2 {
        return Err(Error::config("both samples need draws with at least 2 replicas"));
    }
    let law = |s: &OverlapSample| {
        let mut v: Vec<(f64, f64)> = s.draws().iter().map(|d| (d.r(0, 1), d.weight())).collect();
        let t: f64 = v.iter().map(|x| x.1).sum();
        v.iter_mut().for_each(|x| x.1 /= t);
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        v
    };
    let (la, lb) = (law(a), law(b));
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut dist) = (0.0f64, 0.0f64, 0.0f64);
    while i < la.len() || j < lb.len() {
        let x = match (la.get(i), lb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => break,
        };
        while i < la.len() && la[i].0 == x {
            fa += la[i].1;
            i += 1;
        }
        while j < lb.len() && lb[j].0 == x {
            fb += lb[j].1;
            j += 1;
        }
        dist = dist.max((fa - fb).abs());
    }
    Ok(dist)
}
