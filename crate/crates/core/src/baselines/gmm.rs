use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::{check_k, kmeans_pp};
use crate::data::Point2;
use crate::error::Result;

pub const GMM_REG: f64 = 1e-6;
pub const GMM_TOL: f64 = 1e-6;
pub const GMM_MAX_ITER: usize = 200;

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    fn log_density(&self, mean: &Point2, p: &Point2) -> f64 {
        let det = self.det();
        let (dx, dy) = (p.x - mean.x, p.y - mean.y);
        let maha = (self.yy * dx * dx - 2.0 * self.xy * dx * dy + self.xx * dy * dy) / det;
        -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * maha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub labels: Vec<u32>,
    pub weights: Vec<f64>,
    pub means: Vec<Point2>,
    pub covariances: Vec<Cov2>,
    /// Total log-likelihood at every E-step.
    pub log_likelihood: Vec<f64>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Expectation–maximisation for a full-covariance Gaussian mixture.
///
/// Means start at k-means++ seeds, covariances at the regularised sample
/// covariance, weights uniform. Stops once an iteration gains less than
/// the tolerance in log-likelihood or after the iteration cap.
pub fn gmm_fit(points: &[Point2], k: usize, seed: u64) -> Result<GmmFit> {
    let n = points.len();
    check_k(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = kmeans_pp(points, k, &mut rng);
    let nf = n as f64;
    let (mx, my) = (
        points.iter().map(|p| p.x).sum::<f64>() / nf,
        points.iter().map(|p| p.y).sum::<f64>() / nf,
    );
    let mut global = Cov2 { xx: GMM_REG, xy: 0.0, yy: GMM_REG };
    for p in points {
        global.xx += (p.x - mx) * (p.x - mx) / nf;
        global.xy += (p.x - mx) * (p.y - my) / nf;
        global.yy += (p.y - my) * (p.y - my) / nf;
    }
    let mut covs = vec![global; k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; n * k];
    let mut trace: Vec<f64> = Vec::new();

    loop {
        // E-step.
        let mut ll = 0.0;
        let mut row = vec![0.0; k];
        for (i, p) in points.iter().enumerate() {
            for c in 0..k {
                row[c] = weights[c].ln() + covs[c].log_density(&means[c], p);
            }
            let lse = log_sum_exp(&row);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (row[c] - lse).exp();
            }
        }
        let converged = trace.last().is_some_and(|&prev| ll - prev < GMM_TOL);
        trace.push(ll);
        if converged || trace.len() >= GMM_MAX_ITER {
            break;
        }
        // M-step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            weights[c] = nk / nf;
            if nk <= 0.0 {
                continue;
            }
            let mut m = (0.0, 0.0);
            for (i, p) in points.iter().enumerate() {
                let r = resp[i * k + c];
                m.0 += r * p.x;
                m.1 += r * p.y;
            }
            let mean = Point2::new(m.0 / nk, m.1 / nk);
            let mut cov = Cov2 { xx: 0.0, xy: 0.0, yy: 0.0 };
            for (i, p) in points.iter().enumerate() {
                let r = resp[i * k + c];
                let (dx, dy) = (p.x - mean.x, p.y - mean.y);
                cov.xx += r * dx * dx;
                cov.xy += r * dx * dy;
                cov.yy += r * dy * dy;
            }
            means[c] = mean;
            covs[c] = Cov2 {
                xx: cov.xx / nk + GMM_REG,
                xy: cov.xy / nk,
                yy: cov.yy / nk + GMM_REG,
            };
        }
    }

    let labels = (0..n)
        .map(|i| {
            let r = &resp[i * k..(i + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best as u32 + 1
        })
        .collect();
    Ok(GmmFit {
        labels,
        weights,
        means,
        covariances: covs,
        log_likelihood: trace,
    })
}

pub fn gmm(points: &[Point2], k: usize, seed: u64) -> Result<Vec<u32>> {
    Ok(gmm_fit(points, k, seed)?.labels)
}
