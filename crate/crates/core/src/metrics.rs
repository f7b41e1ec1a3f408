//! Empirical distances between projected samples and the standard Gaussian.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MgError, Result};
use crate::rng::RandomStream;
use crate::stats::{mean_se, split_counts, BATCHES};

/// Largest problem size accepted by [`w1_matching`].
pub const MATCHING_CAP: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MetricKind {
    W1OneDim,
    W1Matching,
    W1Sliced,
    Ks,
    TvHist,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::W1OneDim => "w1-1d",
            MetricKind::W1Matching => "w1-matching",
            MetricKind::W1Sliced => "w1-sliced",
            MetricKind::Ks => "ks",
            MetricKind::TvHist => "tv-hist",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub metric: MetricKind,
    pub value: f64,
    pub se: Option<f64>,
    pub note: Option<String>,
    pub samples: usize,
    pub k: usize,
}

impl DistanceEstimate {
    pub const CSV_HEADER: &'static str = "metric,value,se,note,N,k";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.metric,
            crate::harness::fmt_real(self.value),
            self.se.map(crate::harness::fmt_real).unwrap_or_default(),
            self.note.as_deref().unwrap_or("").replace(',', ";"),
            self.samples,
            self.k
        )
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `(1/N) sum_i |x_(i) - Phi^{-1}((i - 1/2)/N)|` on unsorted input.
fn w1_value(xs: &[f64]) -> f64 {
    let nrm = std_normal();
    let m = xs.len() as f64;
    sorted(xs)
        .iter()
        .enumerate()
        .map(|(i, x)| (x - nrm.inverse_cdf((i as f64 + 0.5) / m)).abs())
        .sum::<f64>()
        / m
}

fn batch_se(xs: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let mut start = 0;
    let vals: Vec<f64> = split_counts(xs.len(), BATCHES)
        .into_iter()
        .map(|c| {
            let v = stat(&xs[start..start + c]);
            start += c;
            v
        })
        .collect();
    mean_se(&vals).1
}

/// Empirical `W1` to `N(0, 1)` via the quantile coupling.
pub fn w1_1d(samples: &[f64]) -> Result<DistanceEstimate> {
    if samples.len() < 100 {
        return Err(MgError::invalid("w1_1d needs at least 100 samples"));
    }
    Ok(DistanceEstimate {
        metric: MetricKind::W1OneDim,
        value: w1_value(samples),
        se: Some(batch_se(samples, w1_value)),
        note: None,
        samples: samples.len(),
        k: 1,
    })
}

/// Exact min-cost perfect matching between two equal-size point sets in
/// `R^k` (row-major), under Euclidean cost, divided by `N`.
pub fn w1_matching(a: &[f64], b: &[f64], k: usize) -> Result<DistanceEstimate> {
    if k == 0 || !a.len().is_multiple_of(k) || b.len() != a.len() {
        return Err(MgError::invalid(
            "w1_matching needs two equal-size point sets",
        ));
    }
    let n = a.len() / k;
    if n == 0 {
        return Err(MgError::invalid("w1_matching needs at least one point"));
    }
    if n > MATCHING_CAP {
        return Err(MgError::MatchingTooLarge {
            n,
            cap: MATCHING_CAP,
        });
    }
    let cost: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ai = &a[i * k..(i + 1) * k];
            (0..n).map(move |j| {
                let bj = &b[j * k..(j + 1) * k];
                ai.iter()
                    .zip(bj)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok(DistanceEstimate {
        metric: MetricKind::W1Matching,
        value: total / n as f64,
        se: None,
        note: Some("exact assignment between the two samples".into()),
        samples: n,
        k,
    })
}

/// Shortest-augmenting-path Hungarian algorithm with potentials, `O(n^3)`.
/// Returns the column assigned to each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    // 1-based rows/columns; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            let base = (i0 - 1) * n;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[base + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

fn random_directions(k: usize, directions: usize, stream: &mut RandomStream) -> Vec<Vec<f64>> {
    (0..directions)
        .map(|_| loop {
            let g: Vec<f64> = (0..k).map(|_| stream.normal()).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break g.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

fn project_all(points: &[f64], k: usize, dir: &[f64]) -> Vec<f64> {
    points
        .chunks_exact(k)
        .map(|p| p.iter().zip(dir).map(|(a, b)| a * b).sum())
        .collect()
}

/// Average over `directions` uniform directions of the 1-D `W1` between the
/// projected sample and `N(0, 1)`. A lower bound on the `k`-dimensional `W1`.
pub fn w1_sliced(
    points: &[f64],
    k: usize,
    directions: usize,
    stream: &mut RandomStream,
) -> Result<DistanceEstimate> {
    if directions < 16 {
        return Err(MgError::invalid("w1_sliced needs at least 16 directions"));
    }
    if k == 0 || !points.len().is_multiple_of(k) || points.len() / k < 100 {
        return Err(MgError::invalid(
            "w1_sliced needs at least 100 points in R^k",
        ));
    }
    let dirs = random_directions(k, directions, stream);
    let vals: Vec<f64> = dirs
        .par_iter()
        .map(|d| w1_value(&project_all(points, k, d)))
        .collect();
    let (value, se) = mean_se(&vals);
    Ok(DistanceEstimate {
        metric: MetricKind::W1Sliced,
        value,
        se: Some(se),
        note: Some("sliced lower-bound proxy for W1".into()),
        samples: points.len() / k,
        k,
    })
}

/// Sliced `W1` between two equal-size samples; never exceeds
/// [`w1_matching`] on the same pair.
pub fn w1_sliced_pair(
    a: &[f64],
    b: &[f64],
    k: usize,
    directions: usize,
    stream: &mut RandomStream,
) -> Result<DistanceEstimate> {
    if directions < 16 {
        return Err(MgError::invalid("w1_sliced needs at least 16 directions"));
    }
    if k == 0 || !a.len().is_multiple_of(k) || a.len() != b.len() || a.is_empty() {
        return Err(MgError::invalid(
            "w1_sliced_pair needs two equal-size point sets",
        ));
    }
    let dirs = random_directions(k, directions, stream);
    let vals: Vec<f64> = dirs
        .par_iter()
        .map(|d| {
            let pa = sorted(&project_all(a, k, d));
            let pb = sorted(&project_all(b, k, d));
            pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / pa.len() as f64
        })
        .collect();
    let (value, se) = mean_se(&vals);
    Ok(DistanceEstimate {
        metric: MetricKind::W1Sliced,
        value,
        se: Some(se),
        note: Some("sliced lower-bound proxy for W1 between the two samples".into()),
        samples: a.len() / k,
        k,
    })
}

fn ks_value(xs: &[f64]) -> f64 {
    let nrm = std_normal();
    let m = xs.len() as f64;
    sorted(xs)
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = nrm.cdf(x);
            ((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// `sup_x |F_N(x) - Phi(x)|`.
pub fn ks_1d(samples: &[f64]) -> Result<DistanceEstimate> {
    if samples.is_empty() {
        return Err(MgError::invalid("ks_1d needs at least one sample"));
    }
    let se = (samples.len() >= 2 * BATCHES).then(|| batch_se(samples, ks_value));
    Ok(DistanceEstimate {
        metric: MetricKind::Ks,
        value: ks_value(samples),
        se,
        note: None,
        samples: samples.len(),
        k: 1,
    })
}

/// Histogram estimate of `||f - phi||_1` on `bins` equal bins of
/// `[lo, hi]`, with both tails as two extra cells.
///
/// Biased upward by bin noise (roughly `sum_b sqrt(2 p_b / (pi N))`, reported
/// in the note) and downward by discretization.
pub fn tv_hist_1d(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<DistanceEstimate> {
    if bins < 40 {
        return Err(MgError::invalid("tv_hist_1d needs at least 40 bins"));
    }
    if !(lo <= -6.0 && hi >= 6.0) {
        return Err(MgError::invalid("tv_hist_1d range must contain [-6, 6]"));
    }
    if samples.is_empty() {
        return Err(MgError::invalid("tv_hist_1d needs at least one sample"));
    }
    let nrm = std_normal();
    let m = samples.len() as f64;
    let width = (hi - lo) / bins as f64;
    // cells: 0 = below lo, 1..=bins, bins+1 = above hi
    let mut counts = vec![0usize; bins + 2];
    for &x in samples {
        let cell = if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + (((x - lo) / width) as usize).min(bins - 1)
        };
        counts[cell] += 1;
    }
    let mut mass = Vec::with_capacity(bins + 2);
    mass.push(nrm.cdf(lo));
    for b in 0..bins {
        let a = lo + b as f64 * width;
        mass.push(nrm.cdf(a + width) - nrm.cdf(a));
    }
    mass.push(1.0 - nrm.cdf(hi));
    let value: f64 = counts
        .iter()
        .zip(&mass)
        .map(|(&c, &p)| (c as f64 / m - p).abs())
        .sum();
    let noise: f64 = mass
        .iter()
        .map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * m)).sqrt())
        .sum();
    Ok(DistanceEstimate {
        metric: MetricKind::TvHist,
        value,
        se: None,
        note: Some(format!(
            "histogram TV; upward noise bias ~{noise:.3e}; downward discretization bias"
        )),
        samples: samples.len(),
        k: 1,
    })
}

/// Expected upward noise bias of [`tv_hist_1d`] for a Gaussian truth.
pub fn tv_hist_noise_bias(samples: usize, bins: usize, lo: f64, hi: f64) -> f64 {
    let nrm = std_normal();
    let width = (hi - lo) / bins as f64;
    let mut mass = vec![nrm.cdf(lo), 1.0 - nrm.cdf(hi)];
    for b in 0..bins {
        let a = lo + b as f64 * width;
        mass.push(nrm.cdf(a + width) - nrm.cdf(a));
    }
    mass.iter()
        .map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * samples as f64)).sqrt())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn normals(seed: u64, n: usize, mean: f64, sd: f64) -> Vec<f64> {
        let mut s = substream(seed, 0);
        (0..n).map(|_| mean + sd * s.normal()).collect()
    }

    #[test]
    fn w1_gaussian_small() {
        let xs = normals(1, 100_000, 0.0, 1.0);
        assert!(w1_1d(&xs).unwrap().value <= 0.02);
    }

    #[test]
    fn w1_translation() {
        let xs = normals(2, 100_000, 0.5, 1.0);
        let d = w1_1d(&xs).unwrap();
        assert!((d.value - 0.5).abs() <= 3.0 * d.se.unwrap(), "{d:?}");
    }

    #[test]
    fn w1_point_mass() {
        let d = w1_1d(&vec![0.0; 100_000]).unwrap();
        assert!((d.value - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-3);
        assert!(w1_1d(&[0.0; 10]).is_err());
    }

    #[test]
    fn matching_trivial_cases() {
        let mut s = substream(3, 0);
        let a: Vec<f64> = (0..3 * 50).map(|_| s.normal()).collect();
        assert_eq!(w1_matching(&a, &a, 3).unwrap().value, 0.0);
        let shifted: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 3 == 0 { v + 0.7 } else { *v })
            .collect();
        assert!((w1_matching(&a, &shifted, 3).unwrap().value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn matching_one_dim_is_sorted_pairing() {
        let a = normals(4, 300, 0.0, 1.0);
        let b = normals(5, 300, 0.2, 1.3);
        let sa = sorted(&a);
        let sb = sorted(&b);
        let oracle = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 300.0;
        let m = w1_matching(&a, &b, 1).unwrap().value;
        assert!((m - oracle).abs() < 1e-10, "{m} vs {oracle}");
    }

    #[test]
    fn matching_against_brute_force() {
        // all permutations of 6 points
        let mut s = substream(6, 0);
        let k = 2;
        let a: Vec<f64> = (0..12).map(|_| s.normal()).collect();
        let b: Vec<f64> = (0..12).map(|_| s.normal()).collect();
        let d = |i: usize, j: usize| {
            ((a[2 * i] - b[2 * j]).powi(2) + (a[2 * i + 1] - b[2 * j + 1]).powi(2)).sqrt()
        };
        let mut perm: Vec<usize> = (0..6).collect();
        let mut best = f64::INFINITY;
        fn heap(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if k == 1 {
                f(p);
                return;
            }
            for i in 0..k {
                heap(k - 1, p, f);
                if k % 2 == 0 {
                    p.swap(i, k - 1)
                } else {
                    p.swap(0, k - 1)
                }
            }
        }
        heap(6, &mut perm, &mut |p| {
            best = best.min(p.iter().enumerate().map(|(i, &j)| d(i, j)).sum());
        });
        let m = w1_matching(&a, &b, k).unwrap().value * 6.0;
        assert!((m - best).abs() < 1e-12);
    }

    #[test]
    fn matching_cap() {
        let a = vec![0.0; MATCHING_CAP + 1];
        assert!(matches!(
            w1_matching(&a, &a, 1),
            Err(MgError::MatchingTooLarge { .. })
        ));
    }

    #[test]
    fn sliced_scaled_gaussian() {
        let mut s = substream(7, 0);
        let k = 3;
        let pts: Vec<f64> = (0..k * 100_000).map(|_| 2.0 * s.normal()).collect();
        let d = w1_sliced(&pts, k, 32, &mut s).unwrap();
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (d.value - want).abs() <= 3.0 * d.se.unwrap() + 5e-3,
            "{d:?}"
        );
    }

    #[test]
    fn sliced_pair_below_matching() {
        let mut s = substream(8, 0);
        let k = 3;
        let a: Vec<f64> = (0..k * 200).map(|_| s.normal()).collect();
        let b: Vec<f64> = (0..k * 200).map(|_| 1.2 * s.normal() + 0.1).collect();
        let sl = w1_sliced_pair(&a, &b, k, 64, &mut s).unwrap().value;
        let m = w1_matching(&a, &b, k).unwrap().value;
        assert!(sl <= m + 1e-12, "{sl} > {m}");
    }

    #[test]
    fn ks_cases() {
        assert_eq!(ks_1d(&[0.0; 1000]).unwrap().value, 0.5);
        let xs = normals(9, 100_000, 0.0, 1.0);
        assert!(ks_1d(&xs).unwrap().value <= 1.95 / (1e5f64).sqrt() * 1.5);
    }

    #[test]
    fn tv_hist_gaussian_and_tails() {
        let xs = normals(10, 1_000_000, 0.0, 1.0);
        let d = tv_hist_1d(&xs, 60, -8.0, 8.0).unwrap();
        assert!(d.value <= 0.02, "{d:?}");
        let nrm = std_normal();
        assert!(2.0 * nrm.cdf(-6.0) < 1e-8);
        assert!(tv_hist_1d(&xs, 30, -8.0, 8.0).is_err());
        assert!(tv_hist_1d(&xs, 60, -5.0, 8.0).is_err());
    }

    #[test]
    fn tv_hist_scaled_gaussian() {
        let xs = normals(11, 1_000_000, 0.0, 1.25f64.sqrt());
        let d = tv_hist_1d(&xs, 60, -8.0, 8.0).unwrap();
        let exact = crate::gauss::gaussian_tv_exact(1.0, 1.25f64.sqrt(), 1).unwrap();
        assert!((d.value - exact).abs() < 0.01, "{} vs {exact}", d.value);
    }

    #[test]
    fn quantile_grid_gives_zero() {
        let nrm = std_normal();
        let n = 10_000;
        let q: Vec<f64> = (0..n)
            .map(|i| nrm.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(w1_1d(&q).unwrap().value < 1e-9);
        assert!(ks_1d(&q).unwrap().value <= 0.5 / n as f64 + 1e-9);
        let d = tv_hist_1d(&q, 60, -8.0, 8.0).unwrap();
        assert!(d.value < 60.0 / n as f64);
    }
}
