//! Small statistics helpers shared by the Monte Carlo estimators.

use serde::Serialize;

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `|mean - target| <= k * se`, treating a zero SE as an exact comparison
    /// up to `1e-12` relative slack.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let slack = 1e-12 * (1.0 + target.abs());
        (self.mean - target).abs() <= k * self.se + slack
    }

    /// Standardized distance to a target.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut s = KahanSum::default();
    xs.iter().for_each(|&x| s.add(x));
    s.value()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN, n };
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Estimate { mean: xs[0], se: if n < 2 { f64::NAN } else { 0.0 }, n };
    }
    let mean = sum(xs) / n as f64;
    if n < 2 {
        return Estimate { mean, se: f64::NAN, n };
    }
    let mut ss = KahanSum::default();
    xs.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    let var = ss.value() / (n - 1) as f64;
    Estimate { mean, se: (var / n as f64).sqrt(), n }
}

/// Mean and SE of paired differences `a_i - b_i`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_se(&d)
}

/// Delete-one jackknife for a statistic that is a smooth function of
/// weighted means. `values[i]` holds the per-draw vector of summands and
/// `stat` maps the vector of weighted means to the statistic.
pub fn jackknife<F>(values: &[Vec<f64>], weights: &[f64], stat: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN, n };
    }
    let k = values[0].len();
    let mut totals = vec![KahanSum::default(); k];
    let mut wsum = KahanSum::default();
    for (v, &w) in values.iter().zip(weights) {
        wsum.add(w);
        for (t, &x) in totals.iter_mut().zip(v) {
            t.add(w * x);
        }
    }
    let wtot = wsum.value();
    let tot: Vec<f64> = totals.iter().map(KahanSum::value).collect();
    let full: Vec<f64> = tot.iter().map(|t| t / wtot).collect();
    let theta = stat(&full);
    if n < 2 {
        return Estimate { mean: theta, se: f64::NAN, n };
    }
    let mut loo = vec![0.0; k];
    let mut reps = Vec::with_capacity(n);
    for (v, &w) in values.iter().zip(weights) {
        let wl = wtot - w;
        for j in 0..k {
            loo[j] = (tot[j] - w * v[j]) / wl;
        }
        reps.push(stat(&loo));
    }
    let rbar = sum(&reps) / n as f64;
    let mut ss = KahanSum::default();
    reps.iter().for_each(|&r| ss.add((r - rbar) * (r - rbar)));
    let var = ss.value() * (n - 1) as f64 / n as f64;
    Estimate { mean: theta, se: var.sqrt(), n }
}

/// Numerically stable `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming log-sum-exp with a running maximum and compensated sum of the
/// rescaled terms.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    acc: KahanSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, acc: KahanSum::default() }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x <= self.max {
            self.acc.add((x - self.max).exp());
        } else {
            let scale = (self.max - x).exp();
            let old = self.acc.value();
            self.acc = KahanSum::default();
            self.acc.add(old * scale);
            self.acc.add(1.0);
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.acc.add(other.acc.value() * (other.max - self.max).exp());
        } else {
            let mine = self.acc.value() * (self.max - other.max).exp();
            self.acc = KahanSum::default();
            self.acc.add(other.acc.value());
            self.acc.add(mine);
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.value().ln()
        }
    }
}

/// Stable `log cosh x`.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_hand_values() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jackknife_of_mean_is_classical_se() {
        let xs = [0.3, -1.2, 2.5, 0.7, 1.1];
        let v: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let jk = jackknife(&v, &[1.0; 5], |m| m[0]);
        let cl = mean_se(&xs);
        assert!((jk.mean - cl.mean).abs() < 1e-15);
        assert!((jk.se - cl.se).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let mut l = LogSumExp::default();
        for x in [1000.0, 1000.0, -5.0] {
            l.push(x);
        }
        assert!((l.value() - (1000.0 + (2.0 + (-1005.0f64).exp()).ln())).abs() < 1e-12);
        let mut a = LogSumExp::default();
        a.push(1.0);
        let mut b = LogSumExp::default();
        b.push(3.0);
        a.merge(&b);
        assert!((a.value() - log_add_exp(1.0, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn log_cosh_is_stable() {
        assert_eq!(log_cosh(0.0), 0.0);
        assert!((log_cosh(0.5) - 0.5f64.cosh().ln()).abs() < 1e-15);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
