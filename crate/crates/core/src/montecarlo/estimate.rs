//! Covariance and cumulant estimators with jackknife standard errors.

use serde::{Deserialize, Serialize};

/// Column-major view of `n` samples of `m` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    m: usize,
    /// `columns[p][i]`.
    columns: Vec<Vec<f64>>,
}

impl SampleMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let columns = (0..m).map(|p| rows.iter().map(|r| r[p]).collect()).collect();
        SampleMatrix { n, m, columns }
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let m = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        SampleMatrix { n, m, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, p: usize) -> &[f64] {
        &self.columns[p]
    }
}

/// Mean computed around the first value, so constant data is centred exactly.
pub fn mean(x: &[f64]) -> f64 {
    match x.first() {
        None => f64::NAN,
        Some(&x0) => x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64,
    }
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mu = mean(x);
    x.iter().map(|v| v - mu).collect()
}

/// Unbiased covariance and its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub value: f64,
    pub stderr: f64,
}

/// `Σ(x-x̄)(y-ȳ)/(n-1)` with leave-one-out jackknife error; needs `n >= 3`.
pub fn covariance_with_stderr(dx: &[f64], dy: &[f64]) -> CovarianceEntry {
    let n = dx.len();
    let nf = n as f64;
    let c: f64 = dx.iter().zip(dy).map(|(a, b)| a * b).sum();
    let value = c / (nf - 1.0);
    let shrink = nf / (nf - 1.0);
    let loo = |i: usize| (c - shrink * dx[i] * dy[i]) / (nf - 2.0);
    let avg = (0..n).map(loo).sum::<f64>() / nf;
    let ss: f64 = (0..n).map(|i| (loo(i) - avg).powi(2)).sum();
    CovarianceEntry {
        value,
        stderr: ((nf - 1.0) / nf * ss).sqrt(),
    }
}

/// Full `m x m` table of covariance entries (row-major, symmetric).
pub fn covariance_table(data: &SampleMatrix) -> Vec<CovarianceEntry> {
    let m = data.m();
    let cols: Vec<Vec<f64>> = (0..m).map(|p| centered(data.column(p))).collect();
    let mut out = vec![CovarianceEntry { value: 0.0, stderr: 0.0 }; m * m];
    for p in 0..m {
        for q in p..m {
            let e = covariance_with_stderr(&cols[p], &cols[q]);
            out[p * m + q] = e;
            out[q * m + p] = e;
        }
    }
    out
}

/// k-statistics `k2, k3, k4` from central moments of `n` values.
fn k_statistics(n: f64, m2: f64, m3: f64, m4: f64) -> (f64, f64, f64) {
    let k2 = n / (n - 1.0) * m2;
    let k3 = n * n * m3 / ((n - 1.0) * (n - 2.0));
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    (k2, k3, k4)
}

/// Third and fourth cumulant estimates of one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub k2: f64,
    pub k3: f64,
    pub k3_stderr: f64,
    /// Fourth cumulant, i.e. the excess over the Gaussian value.
    pub k4: f64,
    pub k4_stderr: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// `estimate_cumulants`: unbiased k-statistics with jackknife errors;
/// needs `n >= 5`.
pub fn estimate_cumulants(x: &[f64]) -> CumulantEstimate {
    let n = x.len();
    let nf = n as f64;
    let d = centered(x);
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for v in &d {
        let v2 = v * v;
        s2 += v2;
        s3 += v2 * v;
        s4 += v2 * v2;
    }
    let (k2, k3, k4) = k_statistics(nf, s2 / nf, s3 / nf, s4 / nf);
    let nl = nf - 1.0;
    let loo = |v: f64| {
        let (t2, t3, t4) = (s2 - v * v, s3 - v * v * v, s4 - v * v * v * v);
        let mu = -v / nl;
        let m2 = t2 / nl - mu * mu;
        let m3 = t3 / nl - 3.0 * mu * t2 / nl + 2.0 * mu.powi(3);
        let m4 = t4 / nl - 4.0 * mu * t3 / nl + 6.0 * mu * mu * t2 / nl - 3.0 * mu.powi(4);
        let (_, a, b) = k_statistics(nl, m2, m3, m4);
        (a, b)
    };
    let reps: Vec<(f64, f64)> = d.iter().map(|&v| loo(v)).collect();
    let (a3, a4) = reps.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
    let (a3, a4) = (a3 / nf, a4 / nf);
    let (v3, v4) = reps
        .iter()
        .fold((0.0, 0.0), |acc, r| (acc.0 + (r.0 - a3).powi(2), acc.1 + (r.1 - a4).powi(2)));
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    CumulantEstimate {
        k2,
        k3,
        k3_stderr: ((nf - 1.0) / nf * v3).sqrt(),
        k4,
        k4_stderr: ((nf - 1.0) / nf * v4).sqrt(),
        skewness: ratio(k3, k2.powf(1.5)),
        excess_kurtosis: ratio(k4, k2 * k2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp, StandardNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn covariance_matches_direct_jackknife() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let x: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v * 0.5 + { let g: f64 = StandardNormal.sample(&mut rng); g }).collect();
        let e = covariance_with_stderr(&centered(&x), &centered(&y));
        let direct = |xs: &[f64], ys: &[f64]| {
            let (mx, my) = (mean(xs), mean(ys));
            xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
        };
        assert!((e.value - direct(&x, &y)).abs() < 1e-12);
        let n = x.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let xs: Vec<f64> = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                let ys: Vec<f64> = y.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                direct(&xs, &ys)
            })
            .collect();
        let avg = loo.iter().sum::<f64>() / n as f64;
        let se = ((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - avg).powi(2)).sum::<f64>()).sqrt();
        assert!((e.stderr - se).abs() < 1e-12);
    }

    #[test]
    fn cumulants_match_direct_jackknife() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let x: Vec<f64> = (0..30).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
        let direct = |xs: &[f64]| {
            let n = xs.len() as f64;
            let mu = xs.iter().sum::<f64>() / n;
            let m = |r: i32| xs.iter().map(|v| (v - mu).powi(r)).sum::<f64>() / n;
            k_statistics(n, m(2), m(3), m(4))
        };
        let est = estimate_cumulants(&x);
        let (_, k3, k4) = direct(&x);
        assert!((est.k3 - k3).abs() < 1e-12 && (est.k4 - k4).abs() < 1e-12);
        let n = x.len();
        let reps: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let xs: Vec<f64> = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                let (_, a, b) = direct(&xs);
                (a, b)
            })
            .collect();
        let a3 = reps.iter().map(|r| r.0).sum::<f64>() / n as f64;
        let se3 = ((n as f64 - 1.0) / n as f64 * reps.iter().map(|r| (r.0 - a3).powi(2)).sum::<f64>()).sqrt();
        assert!((est.k3_stderr - se3).abs() < 1e-10);
    }

    #[test]
    fn gaussian_and_exponential_cumulants() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let g: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = estimate_cumulants(&g);
        assert!(e.k3.abs() <= 5.0 * e.k3_stderr);
        assert!(e.k4.abs() <= 5.0 * e.k4_stderr);
        let x: Vec<f64> = (0..100_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng) - 1.0).collect();
        let e = estimate_cumulants(&x);
        assert!((e.k3 - 2.0).abs() <= 5.0 * e.k3_stderr, "{e:?}");
    }

    #[test]
    fn constant_samples() {
        let e = estimate_cumulants(&[0.1; 500]);
        assert_eq!((e.k3, e.k4), (0.0, 0.0));
    }
}
