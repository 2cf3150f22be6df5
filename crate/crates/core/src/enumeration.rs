//! Exact enumeration of spin polynomials over `{-1, +1}^N`.
//!
//! Energies are multilinear polynomials of degree at most three. The walk
//! visits configurations in reflected Gray-code order so that consecutive
//! states differ by one spin; each flip costs O(N) (O(N²) with cubic terms).
//! The code space is cut into fixed chunks that restart from an exact
//! evaluation, which bounds rounding drift and lets chunks run in parallel
//! while the merge order stays fixed.
//!
//! Bit `i` of a configuration code is set when `σ_i = -1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::LogSumExp;

/// Default largest N accepted by exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

const CHUNK_BITS: usize = 12;

/// `E(σ) = c + Σ_i a_i σ_i + Σ_{i<j} A_ij σ_i σ_j + Σ_{i<j<k} T_ijk σ_i σ_j σ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinPolynomial {
    n: usize,
    constant: f64,
    linear: Vec<f64>,
    pair: Vec<f64>,
    triple: Option<Vec<f64>>,
}

impl SpinPolynomial {
    pub fn zero(n: usize) -> Self {
        Self { n, constant: 0.0, linear: vec![0.0; n], pair: vec![0.0; n * n], triple: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn has_cubic_terms(&self) -> bool {
        self.triple.is_some()
    }

    /// Adds `c · Π_{i ∈ idx} σ_i`, reducing repeated indices with `σ_i² = 1`.
    pub fn add_monomial(&mut self, idx: &[usize], c: f64) {
        let mut odd: Vec<usize> = Vec::with_capacity(idx.len());
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let mut k = 0;
        while k < sorted.len() {
            let mut m = k;
            while m < sorted.len() && sorted[m] == sorted[k] {
                m += 1;
            }
            if (m - k) % 2 == 1 {
                odd.push(sorted[k]);
            }
            k = m;
        }
        assert!(odd.iter().all(|&i| i < self.n), "spin index out of range");
        let n = self.n;
        match odd.as_slice() {
            [] => self.constant += c,
            [i] => self.linear[*i] += c,
            [i, j] => {
                self.pair[i * n + j] += c;
                self.pair[j * n + i] += c;
            }
            [i, j, l] => {
                let t = self.triple.get_or_insert_with(|| vec![0.0; n * n * n]);
                for (a, b, d) in [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)] {
                    t[(a * n + b) * n + d] += c;
                }
            }
            _ => panic!("monomials of degree above three are not supported"),
        }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &SpinPolynomial, c: f64) {
        assert_eq!(self.n, other.n);
        self.constant += c * other.constant;
        self.linear.iter_mut().zip(&other.linear).for_each(|(a, b)| *a += c * b);
        self.pair.iter_mut().zip(&other.pair).for_each(|(a, b)| *a += c * b);
        if let Some(ot) = &other.triple {
            let n = self.n;
            let t = self.triple.get_or_insert_with(|| vec![0.0; n * n * n]);
            t.iter_mut().zip(ot).for_each(|(a, b)| *a += c * b);
        }
    }

    /// Direct evaluation at a configuration code.
    pub fn energy_of_code(&self, code: u64) -> f64 {
        let s = code_to_spins(code, self.n);
        self.energy(&s)
    }

    /// Direct evaluation at `σ ∈ {-1, +1}^N` given as floats.
    pub fn energy(&self, s: &[f64]) -> f64 {
        let n = self.n;
        let mut e = self.constant;
        for i in 0..n {
            e += self.linear[i] * s[i];
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in (i + 1)..n {
                acc += self.pair[i * n + j] * s[j];
            }
            e += acc * s[i];
        }
        if let Some(t) = &self.triple {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut acc = 0.0;
                    for l in (j + 1)..n {
                        acc += t[(i * n + j) * n + l] * s[l];
                    }
                    e += acc * s[i] * s[j];
                }
            }
        }
        e
    }
}

/// Spins as `±1.0` for a configuration code.
pub fn code_to_spins(code: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if code >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Configuration code visited at Gray-code step `k`.
#[inline]
pub fn gray(k: u64) -> u64 {
    k ^ (k >> 1)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n > 40 {
        return Err(Error::CapExceeded(format!(
            "exhaustive enumeration of N = {n} spins exceeds the cap of {cap}"
        )));
    }
    Ok(())
}

struct Walker<'a> {
    poly: &'a SpinPolynomial,
    s: Vec<f64>,
    field: Vec<f64>,
    pairf: Vec<f64>,
    energy: f64,
}

impl<'a> Walker<'a> {
    fn at(poly: &'a SpinPolynomial, code: u64) -> Self {
        let n = poly.n;
        let s = code_to_spins(code, n);
        let energy = poly.energy(&s);
        let mut pairf = poly.pair.clone();
        if let Some(t) = &poly.triple {
            for k in 0..n {
                for j in 0..n {
                    let row = &t[(k * n + j) * n..(k * n + j + 1) * n];
                    pairf[k * n + j] += row.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        let mut field = poly.linear.clone();
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += pairf[k * n + j] * s[j];
            }
            // the pair field double counts each cubic term once per partner
            if let Some(t) = &poly.triple {
                let mut cub = 0.0;
                for j in 0..n {
                    let row = &t[(k * n + j) * n..(k * n + j + 1) * n];
                    cub += s[j] * row.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
                }
                acc -= 0.5 * cub;
            }
            field[k] += acc;
        }
        Self { poly, s, field, pairf, energy }
    }

    #[inline]
    fn flip(&mut self, b: usize) {
        let n = self.poly.n;
        let sb = self.s[b];
        self.energy -= 2.0 * sb * self.field[b];
        let col = &self.pairf[b * n..(b + 1) * n];
        for j in 0..n {
            if j != b {
                self.field[j] -= 2.0 * sb * col[j];
            }
        }
        if let Some(t) = &self.poly.triple {
            for j in 0..n {
                let trow = &t[(j * n + b) * n..(j * n + b + 1) * n];
                let prow = &mut self.pairf[j * n..(j + 1) * n];
                for l in 0..n {
                    prow[l] -= 2.0 * sb * trow[l];
                }
            }
        }
        self.s[b] = -sb;
    }
}

fn chunk_layout(n: usize) -> (u64, u64) {
    let bits = n.min(CHUNK_BITS);
    let len = 1u64 << bits;
    (len, (1u64 << n) / len)
}

/// Visits Gray-code steps `start..start+len`, calling `f(k, energy)`.
fn walk_chunk(poly: &SpinPolynomial, start: u64, len: u64, mut f: impl FnMut(u64, f64)) {
    let mut w = Walker::at(poly, gray(start));
    f(start, w.energy);
    for k in (start + 1)..(start + len) {
        w.flip(k.trailing_zeros() as usize);
        f(k, w.energy);
    }
}

/// Energies of all `2^N` configurations, stored in Gray-code order.
#[derive(Clone, Debug)]
pub struct EnergyTable {
    n: usize,
    energies: Vec<f64>,
}

impl EnergyTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Energy at Gray step `k`; the configuration is `gray(k)`.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn code(&self, k: usize) -> u64 {
        gray(k as u64)
    }

    pub fn log_partition(&self) -> f64 {
        let mut l = LogSumExp::default();
        self.energies.iter().for_each(|&e| l.push(e));
        l.value()
    }

    /// Normalized Boltzmann weights `exp(E - log Z)`, Gray order.
    pub fn probabilities(&self) -> Vec<f64> {
        let lz = self.log_partition();
        self.energies.iter().map(|&e| (e - lz).exp()).collect()
    }
}

pub fn energy_table(poly: &SpinPolynomial, cap: usize) -> Result<EnergyTable> {
    let n = poly.n;
    check_cap(n, cap)?;
    let (len, chunks) = chunk_layout(n);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::with_capacity(len as usize);
            walk_chunk(poly, c * len, len, |_, e| out.push(e));
            out
        })
        .collect();
    Ok(EnergyTable { n, energies: parts.concat() })
}

/// `log Σ_σ exp E(σ)` by Gray-code enumeration with chunked log-sum-exp.
pub fn log_partition(poly: &SpinPolynomial, cap: usize) -> Result<f64> {
    let n = poly.n;
    check_cap(n, cap)?;
    let (len, chunks) = chunk_layout(n);
    let parts: Vec<LogSumExp> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut l = LogSumExp::default();
            walk_chunk(poly, c * len, len, |_, e| l.push(e));
            l
        })
        .collect();
    let mut total = LogSumExp::default();
    parts.iter().for_each(|p| total.merge(p));
    Ok(total.value())
}

/// Smallest and largest energy.
pub fn energy_range(poly: &SpinPolynomial, cap: usize) -> Result<(f64, f64)> {
    let t = energy_table(poly, cap)?;
    let lo = t.energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(n: usize, cubic: bool, seed: u64) -> SpinPolynomial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = SpinPolynomial::zero(n);
        p.add_monomial(&[], rng.random_range(-1.0..1.0));
        for i in 0..n {
            p.add_monomial(&[i], rng.random_range(-1.0..1.0));
            for j in 0..n {
                p.add_monomial(&[i, j], rng.random_range(-1.0..1.0));
                if cubic {
                    for l in 0..n {
                        p.add_monomial(&[i, j, l], rng.random_range(-0.3..0.3));
                    }
                }
            }
        }
        p
    }

    fn naive(p: &SpinPolynomial) -> Vec<f64> {
        (0..1u64 << p.n).map(|c| p.energy_of_code(c)).collect()
    }

    #[test]
    fn gray_walk_matches_direct_evaluation() {
        for (n, cubic) in [(1, false), (3, false), (7, true), (13, false), (13, true)] {
            let p = random_poly(n, cubic, n as u64);
            let direct = naive(&p);
            let t = energy_table(&p, 24).unwrap();
            for (k, &e) in t.energies().iter().enumerate() {
                let want = direct[t.code(k) as usize];
                assert!((e - want).abs() < 1e-10, "n={n} k={k}: {e} vs {want}");
            }
        }
    }

    #[test]
    fn log_partition_matches_naive_sum() {
        let p = random_poly(9, true, 3);
        let naive_lz = naive(&p).iter().map(|e| e.exp()).sum::<f64>().ln();
        assert!((log_partition(&p, 24).unwrap() - naive_lz).abs() < 1e-12);
    }

    #[test]
    fn repeated_indices_reduce() {
        let mut p = SpinPolynomial::zero(3);
        p.add_monomial(&[1, 1], 2.0);
        p.add_monomial(&[0, 2, 2], 1.5);
        p.add_monomial(&[1, 1, 1], -1.0);
        assert_eq!(p.constant(), 2.0);
        assert_eq!(p.energy(&[1.0, -1.0, 1.0]), 2.0 + 1.5 + 1.0);
        assert!(!p.has_cubic_terms());
    }

    #[test]
    fn cap_is_enforced() {
        let p = SpinPolynomial::zero(5);
        assert!(matches!(log_partition(&p, 4), Err(Error::CapExceeded(_))));
    }
}
