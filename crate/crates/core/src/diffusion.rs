//! Variance-exploding diffusion on Gaussian-mixture targets, sampled with
//! the closed-form optimal denoiser in place of a network.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{indexed_substream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GmmComponent>", into = "Vec<GmmComponent>")]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<GmmComponent>,
}

impl TryFrom<Vec<GmmComponent>> for GaussianMixture {
    type Error = Error;

    fn try_from(components: Vec<GmmComponent>) -> Result<Self> {
        GaussianMixture::new(components)
    }
}

impl From<GaussianMixture> for Vec<GmmComponent> {
    fn from(g: GaussianMixture) -> Self {
        g.components
    }
}

impl GaussianMixture {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("mixture has no components".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("mixture dimension must be at least 1".into()));
        }
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "component {k} has dimension {}, expected {dim}",
                    c.mean.len()
                )));
            }
            if !(c.std > 0.0) || !(c.weight >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "component {k} needs std > 0 and weight >= 0"
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(GaussianMixture { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Log-weights plus log-densities of `x` under each component with its
    /// variance inflated by `sigma^2`.
    fn log_joint(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let d = self.dim as f64;
        self.components
            .iter()
            .map(|c| {
                let var = c.std * c.std + sigma * sigma;
                let sq: f64 = x.iter().zip(&c.mean).map(|(a, m)| (a - m).powi(2)).sum();
                c.weight.ln() - 0.5 * sq / var - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln()
            })
            .collect()
    }

    /// Component posterior probabilities of `x` at noise level `sigma`.
    pub fn responsibilities(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let lj = self.log_joint(x, sigma);
        let m = lj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lj.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    /// Index of the most probable component for `x` (noise-free).
    pub fn assign(&self, x: &[f64]) -> usize {
        let lj = self.log_joint(x, 0.0);
        (0..lj.len()).fold(0, |best, k| if lj[k] > lj[best] { k } else { best })
    }

    /// Exact draws from the mixture.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut rng = indexed_substream(seed, "target", i as u64);
                let u: f64 = rand::Rng::random(&mut rng);
                let mut acc = 0.0;
                let mut pick = self.components.len() - 1;
                for (k, c) in self.components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                let c = &self.components[pick];
                c.mean.iter().map(|m| m + c.std * normal(&mut rng)).collect()
            })
            .collect()
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    pub sigmas: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
}

pub const DEFAULT_RHO: f64 = 7.0;

/// `sigma_i = (smax^(1/rho) + i/(n-1) (smin^(1/rho) - smax^(1/rho)))^rho`.
pub fn karras_schedule(n: usize, sigma_min: f64, sigma_max: f64, rho: f64) -> Result<SigmaSchedule> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("schedule needs at least 2 steps, got {n}")));
    }
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}"
        )));
    }
    if sigma_min < 1e-4 {
        return Err(Error::InvalidParameter(format!("sigma_min must be at least 1e-4, got {sigma_min}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let (a, b) = (sigma_max.powf(1.0 / rho), sigma_min.powf(1.0 / rho));
    let mut sigmas: Vec<f64> = (0..n)
        .map(|i| (a + i as f64 / (n - 1) as f64 * (b - a)).powf(rho))
        .collect();
    sigmas[0] = sigma_max;
    sigmas[n - 1] = sigma_min;
    Ok(SigmaSchedule {
        sigmas,
        sigma_min,
        sigma_max,
        rho,
    })
}

/// `E[X0 | X_sigma = x]` in closed form (log-sum-exp responsibilities).
pub fn gmm_posterior_mean(target: &GaussianMixture, x: &[f64], sigma: f64) -> Vec<f64> {
    let r = target.responsibilities(x, sigma);
    let mut out = vec![0.0; x.len()];
    for (c, rk) in target.components.iter().zip(r) {
        let shrink = c.std * c.std / (c.std * c.std + sigma * sigma);
        for (o, (xi, mi)) in out.iter_mut().zip(x.iter().zip(&c.mean)) {
            *o += rk * (mi + shrink * (xi - mi));
        }
    }
    out
}

/// `(denoised - x) / sigma^2`.
pub fn score_from_denoiser(denoised: &[f64], x: &[f64], sigma: f64) -> Vec<f64> {
    let s2 = sigma * sigma;
    denoised.iter().zip(x).map(|(d, xi)| (d - xi) / s2).collect()
}

/// Stochastic-churn knobs (Karras-style sampler as used at inference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChurnParams {
    pub gamma0: f64,
    /// Churn is applied only while sigma exceeds this.
    pub gamma_min: f64,
    pub noise_scale: f64,
    pub step_scale: f64,
}

impl Default for ChurnParams {
    fn default() -> Self {
        ChurnParams {
            gamma0: 0.8,
            gamma_min: 1.0,
            noise_scale: 1.003,
            step_scale: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    #[default]
    EulerMaruyama,
    ProbabilityFlowOde,
    Churn(ChurnParams),
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "em" | "euler_maruyama" => Ok(SamplerMethod::EulerMaruyama),
            "ode" | "probability_flow_ode" | "pf_ode" => Ok(SamplerMethod::ProbabilityFlowOde),
            "churn" => Ok(SamplerMethod::Churn(ChurnParams::default())),
            other => Err(Error::InvalidParameter(format!("unknown sampler '{other}'"))),
        }
    }
}

fn run_chain(target: &GaussianMixture, schedule: &SigmaSchedule, method: SamplerMethod, rng: &mut StreamRng) -> Vec<f64> {
    let d = target.dim;
    let sig = &schedule.sigmas;
    let mut x: Vec<f64> = (0..d).map(|_| sig[0] * normal(rng)).collect();
    for w in sig.windows(2) {
        let (s_cur, s_next) = (w[0], w[1]);
        match method {
            SamplerMethod::EulerMaruyama | SamplerMethod::ProbabilityFlowOde => {
                let dvar = s_cur * s_cur - s_next * s_next;
                let den = gmm_posterior_mean(target, &x, s_cur);
                let score = score_from_denoiser(&den, &x, s_cur);
                if method == SamplerMethod::EulerMaruyama {
                    let noise = dvar.sqrt();
                    for (xi, si) in x.iter_mut().zip(&score) {
                        *xi += dvar * si + noise * normal(rng);
                    }
                } else {
                    for (xi, si) in x.iter_mut().zip(&score) {
                        *xi += 0.5 * dvar * si;
                    }
                }
            }
            SamplerMethod::Churn(p) => {
                let gamma = if s_cur > p.gamma_min { p.gamma0 } else { 0.0 };
                let t_hat = s_cur * (gamma + 1.0);
                let spread = p.noise_scale * (t_hat * t_hat - s_cur * s_cur).max(0.0).sqrt();
                for xi in x.iter_mut() {
                    *xi += spread * normal(rng);
                }
                let den = gmm_posterior_mean(target, &x, t_hat);
                let dt = s_next - t_hat;
                for (xi, di) in x.iter_mut().zip(&den) {
                    let slope = (*xi - di) / t_hat;
                    *xi += p.step_scale * dt * slope;
                }
            }
        }
    }
    x
}

/// Integrates the reverse-time dynamics from `x ~ N(0, sigma_max^2 I)`
/// down the schedule. Chain `i` uses its own random stream, so results do
/// not depend on thread count.
pub fn reverse_sample(
    target: &GaussianMixture,
    schedule: &SigmaSchedule,
    n_samples: usize,
    seed: u64,
    method: SamplerMethod,
) -> Vec<Vec<f64>> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = indexed_substream(seed, "chain", i as u64);
            run_chain(target, schedule, method, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub n: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Fraction of samples assigned to each component.
    pub component_weights: Vec<f64>,
    /// Mean of the samples assigned to each component (empty when none).
    pub component_means: Vec<Vec<f64>>,
}

pub fn diagnostics(target: &GaussianMixture, samples: &[Vec<f64>]) -> SampleDiagnostics {
    let d = target.dim;
    let n = samples.len();
    let nf = n.max(1) as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / nf;
        }
    }
    let mut covariance = vec![vec![0.0; d]; d];
    if n > 1 {
        for s in samples {
            for i in 0..d {
                for j in 0..d {
                    covariance[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
    }
    let k = target.components.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; d]; k];
    for s in samples {
        let a = target.assign(s);
        counts[a] += 1;
        for (acc, v) in sums[a].iter_mut().zip(s) {
            *acc += v;
        }
    }
    SampleDiagnostics {
        n,
        mean,
        covariance,
        component_weights: counts.iter().map(|&c| c as f64 / nf).collect(),
        component_means: sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { Vec::new() } else { s.into_iter().map(|v| v / c as f64).collect() })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard(d: usize) -> GaussianMixture {
        GaussianMixture::new(vec![GmmComponent {
            weight: 1.0,
            mean: vec![0.0; d],
            std: 1.0,
        }])
        .unwrap()
    }

    #[test]
    fn conjugate_shrinkage() {
        let g = standard(1);
        assert!((gmm_posterior_mean(&g, &[2.0], 1.0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_endpoints() {
        let s = karras_schedule(2, 0.01, 80.0, 7.0).unwrap();
        assert_eq!(s.sigmas, vec![80.0, 0.01]);
        let lin = karras_schedule(5, 1.0, 5.0, 1.0).unwrap();
        assert_eq!(lin.sigmas, vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!(karras_schedule(1, 0.01, 1.0, 7.0).is_err());
        assert!(karras_schedule(4, 2.0, 1.0, 7.0).is_err());
    }

    #[test]
    fn zero_samples() {
        let s = karras_schedule(10, 0.01, 10.0, 7.0).unwrap();
        assert!(reverse_sample(&standard(2), &s, 0, 1, SamplerMethod::EulerMaruyama).is_empty());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let c = GmmComponent {
            weight: 0.6,
            mean: vec![0.0],
            std: 1.0,
        };
        assert!(GaussianMixture::new(vec![c.clone(), c]).is_err());
    }
}
