//! Plain Gaussian mixtures: seeded k-means initialization, EM, and Gaussian
//! mixture regression conditioned on the first (time) coordinate.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{floor_eigenvalues, log_sum_exp, to_matrix, to_row_major, GaussianEval};

/// Mean and row-major covariance of one Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: &DMatrix<f64>) -> Self {
        GaussianComponent {
            mean,
            covariance: to_row_major(covariance),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        to_matrix(self.dim(), &self.covariance)
    }

    pub fn cov(&self, r: usize, c: usize) -> f64 {
        self.covariance[r * self.dim() + c]
    }
}

/// A weighted mixture of full-covariance Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub priors: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

/// Row-major sample matrix.
#[derive(Debug, Clone)]
pub struct Samples<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Samples<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len() % dim == 0);
        Samples { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means (k-means++ seeding, Lloyd iterations). Returns the cluster
/// index of every sample; every cluster is nonempty.
pub fn kmeans(samples: &Samples<'_>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyComponents { k, samples: n });
    }
    let dim = samples.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(samples.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(samples.row(i), samples.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = samples.row(pick);
        centers.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(samples.row(i), c));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let x = samples.row(i);
            let mut best = (0, f64::INFINITY);
            for j in 0..k {
                let d = sq_dist(x, &centers[j * dim..(j + 1) * dim]);
                if d < best.1 {
                    best = (j, d);
                }
            }
            if assign[i] != best.0 {
                assign[i] = best.0;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0; k * dim];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, x) in sums[assign[i] * dim..].iter_mut().zip(samples.row(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // steal the sample farthest from its own center
                let far = (0..n)
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(
                            samples.row(a),
                            &centers[assign[a] * dim..(assign[a] + 1) * dim],
                        );
                        let db = sq_dist(
                            samples.row(b),
                            &centers[assign[b] * dim..(assign[b] + 1) * dim],
                        );
                        da.partial_cmp(&db)
                            .unwrap_or(core::cmp::Ordering::Equal)
                            .then(b.cmp(&a))
                    })
                    .expect("k <= n leaves a cluster with two samples");
                let old = assign[far];
                counts[old] -= 1;
                for (s, x) in sums[old * dim..].iter_mut().zip(samples.row(far)) {
                    *s -= x;
                }
                assign[far] = j;
                counts[j] = 1;
                sums[j * dim..(j + 1) * dim].copy_from_slice(samples.row(far));
                changed = true;
            }
        }
        for j in 0..k {
            for d in 0..dim {
                centers[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assign)
}

/// Weighted mean and floored covariance of `samples` under `weights`.
pub(crate) fn weighted_moments(
    samples: &Samples<'_>,
    weights: &[f64],
    floor: f64,
) -> (Vec<f64>, DMatrix<f64>) {
    let dim = samples.dim;
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; dim];
    for (i, w) in weights.iter().enumerate() {
        for (m, x) in mean.iter_mut().zip(samples.row(i)) {
            *m += w * x;
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for (i, w) in weights.iter().enumerate() {
        let x = samples.row(i);
        for r in 0..dim {
            let dr = x[r] - mean[r];
            for c in r..dim {
                cov[(r, c)] += w * dr * (x[c] - mean[c]);
            }
        }
    }
    for r in 0..dim {
        for c in r..dim {
            let v = cov[(r, c)] / total;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    (mean, floor_eigenvalues(&cov, floor))
}

/// EM stopping rule and regularization shared by the plain and
/// task-parameterized fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: usize,
    /// Floor on covariance eigenvalues.
    pub regularization: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when the mean per-sample log-likelihood improves by less than this.
    pub tolerance: f64,
}

impl EmConfig {
    pub fn new(k: usize, regularization: f64, seed: u64) -> Self {
        EmConfig {
            k,
            regularization,
            seed,
            max_iterations: 200,
            tolerance: 1e-6,
        }
    }

    pub(crate) fn validate(&self, samples: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::InvalidConfig(
                "regularization must be positive".into(),
            ));
        }
        if self.k > samples {
            return Err(Error::TooManyComponents { k: self.k, samples });
        }
        Ok(())
    }
}

/// Log-likelihood after every E-step, starting from the initialization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmTrace {
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl Gmm {
    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Fit by EM from a k-means initialization.
    pub fn fit(samples: &Samples<'_>, config: &EmConfig) -> Result<(Gmm, EmTrace)> {
        config.validate(samples.len())?;
        let n = samples.len();
        let k = config.k;
        let assign = kmeans(samples, k, config.seed)?;
        let mut components = Vec::with_capacity(k);
        for j in 0..k {
            let w: Vec<f64> = assign
                .iter()
                .map(|&a| if a == j { 1.0 } else { 0.0 })
                .collect();
            let (mean, cov) = weighted_moments(samples, &w, config.regularization);
            components.push(GaussianComponent::new(mean, &cov));
        }
        let mut gmm = Gmm {
            priors: vec![1.0 / k as f64; k],
            components,
        };
        let mut trace = EmTrace::default();
        let mut resp = vec![0.0; n * k];
        loop {
            let ll = gmm.e_step(samples, &mut resp)?;
            let done = match trace.log_likelihood.last() {
                Some(prev) => (ll - prev) / (n as f64) < config.tolerance,
                None => false,
            };
            trace.log_likelihood.push(ll);
            if done {
                trace.converged = true;
                break;
            }
            if trace.log_likelihood.len() > config.max_iterations {
                break;
            }
            for j in 0..k {
                let w: Vec<f64> = (0..n).map(|i| resp[i * k + j]).collect();
                let nk: f64 = w.iter().sum();
                gmm.priors[j] = nk / n as f64;
                if nk > 0.0 {
                    let (mean, cov) = weighted_moments(samples, &w, config.regularization);
                    gmm.components[j] = GaussianComponent::new(mean, &cov);
                }
            }
        }
        Ok((gmm, trace))
    }

    /// Fill row-major responsibilities and return the total log-likelihood.
    fn e_step(&self, samples: &Samples<'_>, resp: &mut [f64]) -> Result<f64> {
        let k = self.priors.len();
        let evals = self
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                GaussianEval::new(&c.mean, &c.covariance_matrix())
                    .ok_or(Error::SingularComponent { component: j })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        let mut row = vec![0.0; k];
        for i in 0..samples.len() {
            let x = samples.row(i);
            for j in 0..k {
                row[j] = self.priors[j].ln() + evals[j].log_pdf(x);
            }
            let lse = log_sum_exp(&row);
            for j in 0..k {
                resp[i * k + j] = (row[j] - lse).exp();
            }
            total += lse;
        }
        Ok(total)
    }

    pub fn log_likelihood(&self, samples: &Samples<'_>) -> Result<f64> {
        let mut resp = vec![0.0; samples.len() * self.priors.len()];
        self.e_step(samples, &mut resp)
    }

    /// Condition on the first coordinate (time) at `t`.
    pub fn gmr(&self, t: f64) -> GmrOutput {
        gmr(self, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmrOutput {
    pub mean: Vec<f64>,
    /// Row-major, `mean.len()` squared.
    pub covariance: Vec<f64>,
    /// Every time-marginal density underflowed; the nearest component in time
    /// was used alone.
    pub fallback: bool,
}

/// Log-densities below this underflow to zero in linear space.
const UNDERFLOW_LOG: f64 = -708.0;

/// Gaussian mixture regression of the remaining coordinates on coordinate 0.
pub fn gmr(gmm: &Gmm, t: f64) -> GmrOutput {
    let k = gmm.priors.len();
    let d = gmm.dim();
    let out = d - 1;
    let mut log_h = vec![f64::NEG_INFINITY; k];
    for (j, c) in gmm.components.iter().enumerate() {
        if gmm.priors[j] > 0.0 {
            log_h[j] = gmm.priors[j].ln() + crate::linalg::log_normal_1d(t, c.mean[0], c.cov(0, 0));
        }
    }
    let max_log = log_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fallback = !(max_log > UNDERFLOW_LOG);
    let h: Vec<f64> = if fallback {
        let nearest = (0..k)
            .filter(|&j| gmm.priors[j] > 0.0)
            .min_by(|&a, &b| {
                let da = (t - gmm.components[a].mean[0]).abs();
                let db = (t - gmm.components[b].mean[0]).abs();
                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        (0..k)
            .map(|j| if j == nearest { 1.0 } else { 0.0 })
            .collect()
    } else {
        let lse = log_sum_exp(&log_h);
        log_h.iter().map(|l| (l - lse).exp()).collect()
    };

    let mut mean = vec![0.0; out];
    let mut second = vec![0.0; out * out];
    for (j, c) in gmm.components.iter().enumerate() {
        if h[j] == 0.0 {
            continue;
        }
        let stt = c.cov(0, 0);
        let dt = t - c.mean[0];
        let m: Vec<f64> = (0..out)
            .map(|a| c.mean[a + 1] + c.cov(a + 1, 0) / stt * dt)
            .collect();
        for a in 0..out {
            mean[a] += h[j] * m[a];
            for b in 0..out {
                let cond = c.cov(a + 1, b + 1) - c.cov(a + 1, 0) * c.cov(0, b + 1) / stt;
                second[a * out + b] += h[j] * (cond + m[a] * m[b]);
            }
        }
    }
    let covariance = (0..out * out)
        .map(|i| second[i] - mean[i / out] * mean[i % out])
        .collect();
    GmrOutput {
        mean,
        covariance,
        fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn comp(mean: Vec<f64>, cov: &[f64]) -> GaussianComponent {
        let d = mean.len();
        GaussianComponent::new(mean, &to_matrix(d, cov))
    }

    #[test]
    fn gmr_at_mean_and_independence() {
        let g = Gmm {
            priors: vec![1.0],
            components: vec![comp(
                vec![0.5, 1.0, 2.0],
                &[0.1, 0.02, 0.0, 0.02, 1.0, 0.0, 0.0, 0.0, 1.0],
            )],
        };
        let out = g.gmr(0.5);
        assert!((out.mean[0] - 1.0).abs() < 1e-15 && (out.mean[1] - 2.0).abs() < 1e-15);
        let indep = Gmm {
            priors: vec![1.0],
            components: vec![comp(vec![0.5, 1.0], &[0.1, 0.0, 0.0, 1.0])],
        };
        for t in [0.0, 0.3, 2.0] {
            assert_eq!(indep.gmr(t).mean, vec![1.0]);
        }
    }

    #[test]
    fn gmr_two_components_hand_computed() {
        // t ~ N(0,1) with x = 1 + 0.5 t (cov 0.5) and t ~ N(2,1) with x = -1 (independent)
        let g = Gmm {
            priors: vec![0.25, 0.75],
            components: vec![
                comp(vec![0.0, 1.0], &[1.0, 0.5, 0.5, 1.0]),
                comp(vec![2.0, -1.0], &[1.0, 0.0, 0.0, 2.0]),
            ],
        };
        let t = 1.0;
        // both components: N(1 | mu_t, 1) equal, so h = priors
        let m1 = 1.0 + 0.5 * 1.0;
        let m2 = -1.0;
        let mean = 0.25 * m1 + 0.75 * m2;
        let c1 = 1.0 - 0.25;
        let c2 = 2.0;
        let var = 0.25 * (c1 + m1 * m1) + 0.75 * (c2 + m2 * m2) - mean * mean;
        let out = g.gmr(t);
        assert!((out.mean[0] - mean).abs() < 1e-12);
        assert!((out.covariance[0] - var).abs() < 1e-12);
        assert!(!out.fallback);
    }

    #[test]
    fn gmr_falls_back_far_from_all_components() {
        let g = Gmm {
            priors: vec![0.5, 0.5],
            components: vec![
                comp(vec![0.0, 1.0], &[1e-6, 0.0, 0.0, 1.0]),
                comp(vec![1.0, 3.0], &[1e-6, 0.0, 0.0, 1.0]),
            ],
        };
        let out = g.gmr(50.0);
        assert!(out.fallback);
        assert_eq!(out.mean, vec![3.0]);
    }

    #[test]
    fn kmeans_is_seeded_and_nonempty() {
        let data: Vec<f64> = (0..40)
            .map(|i| (i % 20) as f64 + if i < 20 { 0.0 } else { 100.0 })
            .collect();
        let s = Samples::new(&data, 1);
        let a = kmeans(&s, 4, 3).unwrap();
        assert_eq!(a, kmeans(&s, 4, 3).unwrap());
        for j in 0..4 {
            assert!(a.contains(&j));
        }
        assert!(matches!(
            kmeans(&s, 41, 0),
            Err(Error::TooManyComponents { .. })
        ));
    }

    #[test]
    fn em_recovers_separated_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, 0.1).unwrap();
        let mut data = Vec::new();
        for i in 0..400 {
            let (cx, cy) = if i % 2 == 0 { (0.0, 0.0) } else { (3.0, 1.0) };
            data.push(cx + n.sample(&mut rng));
            data.push(cy + n.sample(&mut rng));
        }
        let s = Samples::new(&data, 2);
        let (g, trace) = Gmm::fit(&s, &EmConfig::new(2, 1e-6, 5)).unwrap();
        let mut means: Vec<_> = g
            .components
            .iter()
            .map(|c| (c.mean[0], c.mean[1]))
            .collect();
        means.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((means[0].0).abs() < 0.05 && (means[0].1).abs() < 0.05);
        assert!((means[1].0 - 3.0).abs() < 0.05 && (means[1].1 - 1.0).abs() < 0.05);
        for w in trace.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }
}
