//! Head-pose clustering with a 2-D Gaussian mixture over (pitch, yaw).

use crate::numerics::{ModelIo, Packer, Rng, Tensor, Unpacker};
use crate::real::Real;
use crate::{tags, Error, Result};

/// Head orientation in degrees. Roll is carried along for alignment but the
/// mixture itself clusters on (pitch, yaw) only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl HeadPose {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        HeadPose { yaw, pitch, roll }
    }
}

/// Smallest eigenvalue allowed in a component covariance. Keeps every
/// component invertible even when a cluster collapses onto nearly
/// identical points.
const COVARIANCE_FLOOR: f64 = 1e-6;

/// Maximum EM iterations before giving up on the relative tolerance.
const MAX_EM_ITERATIONS: usize = 200;

/// Relative change in mean log-likelihood below which EM is converged.
const EM_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Gaussian mixture over (pitch, yaw) pairs. Covariances are full 2x2
/// matrices stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPoseModel<T: Real> {
    weights: Vec<T>,
    /// k x 2 matrix of component means, columns ordered (pitch, yaw).
    means: Tensor<T>,
    /// One [a, b, b, c] covariance per component.
    covariances: Vec<[T; 4]>,
}

/// Fitting diagnostics: the mean log-likelihood after every E step, in
/// iteration order. EM guarantees this sequence never decreases.
#[derive(Debug, Clone)]
pub struct GmmFitInfo {
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> GmmPoseModel<T> {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Component means as a k x 2 matrix with columns (pitch, yaw).
    pub fn means(&self) -> &Tensor<T> {
        &self.means
    }

    pub fn covariances(&self) -> &[[T; 4]] {
        &self.covariances
    }

    /// Posterior component probabilities for one pose. Always sums to 1
    /// within 1e-9; uniform when every component density underflows.
    pub fn responsibilities(&self, pose: &HeadPose) -> Vec<T> {
        let x = [T::of(pose.pitch), T::of(pose.yaw)];
        let k = self.weights.len();
        let mut log_terms = vec![T::zero(); k];
        for c in 0..k {
            log_terms[c] = self.weights[c].max(T::of(1e-300)).ln() + self.log_density(c, x);
        }
        normalized_exp(&log_terms)
    }

    /// Mean log-likelihood of a pose set under the mixture.
    pub fn mean_log_likelihood(&self, poses: &[HeadPose]) -> T {
        let k = self.weights.len();
        let mut total = T::zero();
        let mut log_terms = vec![T::zero(); k];
        for pose in poses {
            let x = [T::of(pose.pitch), T::of(pose.yaw)];
            for c in 0..k {
                log_terms[c] = self.weights[c].max(T::of(1e-300)).ln() + self.log_density(c, x);
            }
            total += log_sum_exp(&log_terms);
        }
        total / T::of(poses.len() as f64)
    }

    /// Index of the most responsible component for a pose.
    pub fn assign(&self, pose: &HeadPose) -> usize {
        let resp = self.responsibilities(pose);
        let mut best = 0;
        for c in 1..resp.len() {
            if resp[c] > resp[best] {
                best = c;
            }
        }
        best
    }

    /// Log of the component Gaussian density at x = (pitch, yaw).
    fn log_density(&self, component: usize, x: [T; 2]) -> T {
        let [a, b, _, c] = self.covariances[component];
        let det = a * c - b * b;
        let dx = x[0] - self.means.at(component, 0);
        let dy = x[1] - self.means.at(component, 1);
        // Quadratic form with the explicit 2x2 inverse.
        let quad = (c * dx * dx - (b + b) * dx * dy + a * dy * dy) / det;
        let two_pi = T::of(std::f64::consts::TAU);
        -(two_pi.ln()) - T::of(0.5) * det.ln() - T::of(0.5) * quad
    }
}

impl<T: Real> ModelIo for GmmPoseModel<T> {
    const TAG: u32 = tags::GMM;

    fn encode(&self, p: &mut Packer) {
        let k = self.weights.len();
        p.push_usize(k);
        for w in &self.weights {
            p.push(w.as_f64());
        }
        for c in 0..k {
            p.push(self.means.at(c, 0).as_f64());
            p.push(self.means.at(c, 1).as_f64());
        }
        for cov in &self.covariances {
            for v in cov {
                p.push(v.as_f64());
            }
        }
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let k = u.take_usize()?;
        if k == 0 {
            return Err(Error::Parse("mixture must have at least one component".into()));
        }
        let mut weights = Vec::with_capacity(k);
        for _ in 0..k {
            weights.push(T::of(u.take()?));
        }
        let mut means = Tensor::zeros(vec![k, 2]);
        for c in 0..k {
            means.set(c, 0, T::of(u.take()?));
            means.set(c, 1, T::of(u.take()?));
        }
        let mut covariances = Vec::with_capacity(k);
        for _ in 0..k {
            let mut cov = [T::zero(); 4];
            for v in cov.iter_mut() {
                *v = T::of(u.take()?);
            }
            covariances.push(cov);
        }
        Ok(GmmPoseModel { weights, means, covariances })
    }
}

/// Fits a k-component mixture with k-means++ seeding followed by EM.
/// Requires at least 2k distinct (pitch, yaw) pairs so every component can
/// claim its own mass.
pub fn fit_gmm<T: Real>(
    poses: &[HeadPose],
    k: usize,
    rng: &mut Rng,
) -> Result<(GmmPoseModel<T>, GmmFitInfo)> {
    if k == 0 {
        return Err(Error::DegenerateInput("component count must be positive".into()));
    }
    let points: Vec<[f64; 2]> = poses.iter().map(|p| [p.pitch, p.yaw]).collect();
    let distinct = count_distinct(&points);
    if distinct < 2 * k {
        return Err(Error::DegenerateInput(format!(
            "{} distinct (pitch, yaw) pairs is too few for {} components (need {})",
            distinct,
            k,
            2 * k
        )));
    }

    let n = points.len();
    let seeds = kmeans_pp_seeds(&points, k, rng);

    // Shared initial covariance: the global covariance of the data, floored.
    let mut mean = [0.0f64; 2];
    for p in &points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n as f64;
    mean[1] /= n as f64;
    let mut global_cov = [0.0f64; 4];
    for p in &points {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        global_cov[0] += dx * dx;
        global_cov[1] += dx * dy;
        global_cov[3] += dy * dy;
    }
    for v in global_cov.iter_mut() {
        *v /= n as f64;
    }
    global_cov[2] = global_cov[1];
    floor_covariance(&mut global_cov);

    let mut weights = vec![T::of(1.0 / k as f64); k];
    let mut means = Tensor::zeros(vec![k, 2]);
    for c in 0..k {
        means.set(c, 0, T::of(points[seeds[c]][0]));
        means.set(c, 1, T::of(points[seeds[c]][1]));
    }
    let mut covariances = vec![global_cov.map(T::of); k];

    let mut model = GmmPoseModel { weights: weights.clone(), means: means.clone(), covariances: covariances.clone() };
    let mut info = GmmFitInfo { log_likelihoods: Vec::new(), iterations: 0, converged: false };
    let mut resp = Tensor::<T>::zeros(vec![n, k]);
    let mut log_terms = vec![T::zero(); k];

    for iter in 0..MAX_EM_ITERATIONS {
        // E step: responsibilities and the current mean log-likelihood.
        let mut total_ll = T::zero();
        for (i, pose) in points.iter().enumerate() {
            let x = [T::of(pose[0]), T::of(pose[1])];
            for c in 0..k {
                log_terms[c] = model.weights[c].max(T::of(1e-300)).ln() + model.log_density(c, x);
            }
            total_ll += log_sum_exp(&log_terms);
            let r = normalized_exp(&log_terms);
            for c in 0..k {
                resp.set(i, c, r[c]);
            }
        }
        let ll = (total_ll / T::of(n as f64)).as_f64();
        info.log_likelihoods.push(ll);
        info.iterations = iter + 1;

        if iter > 0 {
            let prev = info.log_likelihoods[iter - 1];
            if (ll - prev).abs() <= EM_RELATIVE_TOLERANCE * prev.abs() {
                info.converged = true;
                break;
            }
        }

        // M step. A component whose mass collapses keeps its previous
        // parameters, which cannot lower the likelihood.
        for c in 0..k {
            let mut mass = T::zero();
            for i in 0..n {
                mass += resp.at(i, c);
            }
            if mass.as_f64() < 1e-10 {
                continue;
            }
            let mut mu = [T::zero(); 2];
            for (i, p) in points.iter().enumerate() {
                let r = resp.at(i, c);
                mu[0] += r * T::of(p[0]);
                mu[1] += r * T::of(p[1]);
            }
            mu[0] /= mass;
            mu[1] /= mass;
            let mut cov = [0.0f64; 4];
            for (i, p) in points.iter().enumerate() {
                let r = resp.at(i, c).as_f64();
                let dx = p[0] - mu[0].as_f64();
                let dy = p[1] - mu[1].as_f64();
                cov[0] += r * dx * dx;
                cov[1] += r * dx * dy;
                cov[3] += r * dy * dy;
            }
            for v in cov.iter_mut() {
                *v /= mass.as_f64();
            }
            cov[2] = cov[1];
            floor_covariance(&mut cov);

            weights[c] = mass / T::of(n as f64);
            means.set(c, 0, mu[0]);
            means.set(c, 1, mu[1]);
            covariances[c] = cov.map(T::of);
        }
        // Renormalize weights in case a collapsed component kept stale mass.
        let wsum: T = weights.iter().copied().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        model.weights.clone_from(&weights);
        model.means = means.clone();
        model.covariances.clone_from(&covariances);
    }

    Ok((model, info))
}

/// k-means++ seeding: iteratively picks points with probability proportional
/// to squared distance from the nearest seed chosen so far.
fn kmeans_pp_seeds(points: &[[f64; 2]], k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = points.len();
    let mut seeds = Vec::with_capacity(k);
    seeds.push(rng.next_below(n));
    let mut dist2 = vec![0.0f64; n];
    for (i, p) in points.iter().enumerate() {
        dist2[i] = squared_distance(p, &points[seeds[0]]);
    }
    while seeds.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a seed; fall back to a
            // uniform draw (the distinct-point precondition keeps the final
            // mixture sound).
            rng.next_below(n)
        } else {
            let mut target = rng.next_f64() * total;
            let mut chosen = n - 1;
            for (i, d) in dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        seeds.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, &points[next]);
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    seeds
}

fn squared_distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn count_distinct(points: &[[f64; 2]]) -> usize {
    let mut sorted: Vec<[f64; 2]> = points.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("pose coordinates must not be NaN"));
    let mut distinct = 0;
    for (i, p) in sorted.iter().enumerate() {
        if i == 0 || sorted[i - 1] != *p {
            distinct += 1;
        }
    }
    distinct
}

/// Shifts the diagonal so the smallest eigenvalue is at least the floor.
/// The 2x2 eigenvalues are tr/2 +- sqrt((a-c)^2/4 + b^2).
fn floor_covariance(cov: &mut [f64; 4]) {
    let (a, b, c) = (cov[0], cov[1], cov[3]);
    let half_gap = ((a - c) * 0.5).hypot(b);
    let lambda_min = (a + c) * 0.5 - half_gap;
    if lambda_min < COVARIANCE_FLOOR {
        let shift = COVARIANCE_FLOOR - lambda_min;
        cov[0] += shift;
        cov[3] += shift;
    }
}

/// exp-normalizes a vector of log weights into probabilities summing to 1.
fn normalized_exp<T: Real>(log_terms: &[T]) -> Vec<T> {
    let mut max = log_terms[0];
    for &v in &log_terms[1..] {
        if v > max {
            max = v;
        }
    }
    let mut out: Vec<T> = log_terms.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

fn log_sum_exp<T: Real>(log_terms: &[T]) -> T {
    let mut max = log_terms[0];
    for &v in &log_terms[1..] {
        if v > max {
            max = v;
        }
    }
    let sum: T = log_terms.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}
