//! Seeded linear structural causal models with known ground truth.
//!
//! The generator plants a scalar shared confounder `u`, any number of
//! instruments (each with its own first-stage strength, exclusion leak into
//! the outcome, and loading on the confounder), and a true treatment effect.
//! It is the brute-force oracle behind the estimator and consistency tests:
//! every validity condition can be switched on or broken per instrument.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{PanelDataset, VariableMeta};
use crate::error::{Error, Result};

/// One instrument channel of the structural model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScmInstrument {
    /// First-stage coefficient of the instrument in the treatment equation.
    pub strength: f64,
    /// Direct coefficient of the instrument in the outcome equation; nonzero
    /// values break the exclusion restriction.
    pub exclusion_leak: f64,
    /// Loading of the instrument on the shared confounder; nonzero values
    /// break independence.
    pub confounder_loading: f64,
}

impl ScmInstrument {
    pub fn valid(strength: f64) -> Self {
        Self { strength, exclusion_leak: 0.0, confounder_loading: 0.0 }
    }

    pub fn noise() -> Self {
        Self::valid(0.0)
    }
}

/// Noise standard deviations per structural equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScmNoise {
    pub z: f64,
    pub t: f64,
    pub y: f64,
}

impl Default for ScmNoise {
    fn default() -> Self {
        Self { z: 1.0, t: 1.0, y: 1.0 }
    }
}

/// Full specification of a linear SCM draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    /// True causal effect of the treatment on the outcome.
    pub beta_star: f64,
    /// (gamma_t, gamma_y): confounder coefficients in the treatment and
    /// outcome equations.
    pub confounder_strengths: (f64, f64),
    pub instruments: Vec<ScmInstrument>,
    pub noise_sds: ScmNoise,
    pub n: usize,
    pub seed: u64,
    /// AR(1) coefficient of the treatment's idiosyncratic noise. Zero keeps
    /// rows i.i.d.; nonzero values give the panel genuine lead-lag structure
    /// (the treatment then helps predict the outcome one step ahead) without
    /// touching instrument validity.
    #[serde(default)]
    pub treatment_noise_ar: f64,
}

impl ScmSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("scm sample size must be >= 10, got {}", self.n)));
        }
        if self.noise_sds.z <= 0.0 || self.noise_sds.t <= 0.0 || self.noise_sds.y <= 0.0 {
            return Err(Error::Config("scm noise standard deviations must be positive".into()));
        }
        if self.treatment_noise_ar.abs() >= 1.0 {
            return Err(Error::Unstable(format!(
                "treatment noise AR coefficient must satisfy |a| < 1, got {}",
                self.treatment_noise_ar
            )));
        }
        Ok(())
    }

    /// Stationary variance of the treatment's idiosyncratic noise.
    fn noise_t_var(&self) -> f64 {
        let s2 = self.noise_sds.t * self.noise_sds.t;
        s2 / (1.0 - self.treatment_noise_ar * self.treatment_noise_ar)
    }

    /// Population variance of the treatment implied by the coefficients.
    pub fn var_treatment(&self) -> f64 {
        let su: f64 = self
            .instruments
            .iter()
            .map(|z| z.strength * z.confounder_loading)
            .sum::<f64>()
            + self.confounder_strengths.0;
        let sz: f64 = self.instruments.iter().map(|z| z.strength * z.strength).sum::<f64>()
            * self.noise_sds.z
            * self.noise_sds.z;
        su * su + sz + self.noise_t_var()
    }

    /// Population covariance of instrument `k` with the treatment.
    pub fn cov_instrument_treatment(&self, k: usize) -> f64 {
        let su: f64 = self
            .instruments
            .iter()
            .map(|z| z.strength * z.confounder_loading)
            .sum::<f64>()
            + self.confounder_strengths.0;
        let zk = &self.instruments[k];
        zk.confounder_loading * su + zk.strength * self.noise_sds.z * self.noise_sds.z
    }

    /// Population covariance of instrument `k` with the outcome.
    pub fn cov_instrument_outcome(&self, k: usize) -> f64 {
        let zk = &self.instruments[k];
        let mut v = self.beta_star * self.cov_instrument_treatment(k)
            + self.confounder_strengths.1 * zk.confounder_loading;
        for (j, zj) in self.instruments.iter().enumerate() {
            let cov_zz = zk.confounder_loading * zj.confounder_loading
                + if j == k { self.noise_sds.z * self.noise_sds.z } else { 0.0 };
            v += zj.exclusion_leak * cov_zz;
        }
        v
    }
}

/// Raw columns drawn from an SCM, before any dataset packaging.
#[derive(Debug, Clone)]
pub struct ScmSample {
    pub u: Vec<f64>,
    /// One column per instrument, in spec order.
    pub z: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

/// Ground truth retained alongside a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmGroundTruth {
    pub beta_star: f64,
    pub treatment: String,
    pub outcome: String,
    pub instrument_names: Vec<String>,
    pub spec: ScmSpec,
}

/// Draw the raw structural columns for a spec.
pub fn simulate(spec: &ScmSpec) -> Result<ScmSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let k = spec.instruments.len();
    let mut u = Vec::with_capacity(n);
    let mut z = vec![Vec::with_capacity(n); k];
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let (gamma_t, gamma_y) = spec.confounder_strengths;
    let phi = spec.treatment_noise_ar;
    // start the AR noise at its stationary distribution
    let mut noise_t = spec.noise_t_var().sqrt() * rng.sample::<f64, _>(StandardNormal);
    for i in 0..n {
        let ui: f64 = rng.sample(StandardNormal);
        if i > 0 {
            noise_t = phi * noise_t + spec.noise_sds.t * rng.sample::<f64, _>(StandardNormal);
        }
        let mut ti = gamma_t * ui + noise_t;
        let mut leak = 0.0;
        for (col, inst) in z.iter_mut().zip(&spec.instruments) {
            let zi =
                inst.confounder_loading * ui + spec.noise_sds.z * rng.sample::<f64, _>(StandardNormal);
            ti += inst.strength * zi;
            leak += inst.exclusion_leak * zi;
            col.push(zi);
        }
        let yi = spec.beta_star * ti
            + gamma_y * ui
            + leak
            + spec.noise_sds.y * rng.sample::<f64, _>(StandardNormal);
        u.push(ui);
        t.push(ti);
        y.push(yi);
    }
    Ok(ScmSample { u, z, t, y })
}

/// Package an SCM draw as a single-entity panel with a synthetic time index.
pub fn generate(spec: &ScmSpec) -> Result<(PanelDataset, ScmGroundTruth)> {
    let sample = simulate(spec)?;
    let mut builder = PanelDataset::builder();
    builder.add_variable(VariableMeta::new("t", "synthetic treatment", ""))?;
    builder.add_variable(VariableMeta::new("y", "synthetic outcome", ""))?;
    let mut instrument_names = Vec::new();
    for k in 0..spec.instruments.len() {
        let name = format!("z{}", k + 1);
        builder.add_variable(VariableMeta::new(&name, format!("synthetic instrument channel {}", k + 1), ""))?;
        instrument_names.push(name);
    }
    for i in 0..spec.n {
        let time = i as i64;
        builder.add_observation("s0", time, "t", sample.t[i])?;
        builder.add_observation("s0", time, "y", sample.y[i])?;
        for (k, name) in instrument_names.iter().enumerate() {
            builder.add_observation("s0", time, name, sample.z[k][i])?;
        }
    }
    let truth = ScmGroundTruth {
        beta_star: spec.beta_star,
        treatment: "t".into(),
        outcome: "y".into(),
        instrument_names,
        spec: spec.clone(),
    };
    Ok((builder.build(), truth))
}

/// Specification for a pair of series with known lead-lag structure:
/// `x_t = driver x_{t-1} + e`, `y_t = own y_{t-1} + cross x_{t-1} + e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaggedSpec {
    /// AR(1) coefficient of y on its own lag.
    pub own: f64,
    /// Coefficient of y on the lagged x; zero for null calibration.
    pub cross: f64,
    /// AR(1) coefficient of the driving series x.
    pub driver: f64,
    pub noise_x: f64,
    pub noise_y: f64,
    pub n: usize,
    pub seed: u64,
}

/// Generate (x, y) with the requested Granger structure. Noise-free specs
/// are allowed so deterministic lead-lag fixtures can be built.
pub fn generate_lagged(spec: &LaggedSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if spec.own.abs() >= 1.0 || spec.driver.abs() >= 1.0 {
        return Err(Error::Unstable(format!(
            "autoregressive coefficients must satisfy |a| < 1 (own {}, driver {})",
            spec.own, spec.driver
        )));
    }
    if spec.noise_x < 0.0 || spec.noise_y < 0.0 {
        return Err(Error::Config("noise standard deviations must be nonnegative".into()));
    }
    let burn_in = 100;
    let total = spec.n + burn_in;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let mut xp = rng.sample::<f64, _>(StandardNormal) * spec.noise_x.max(1.0);
    let mut yp = 0.0;
    for _ in 0..total {
        let xi = spec.driver * xp + spec.noise_x * rng.sample::<f64, _>(StandardNormal);
        let yi = spec.own * yp + spec.cross * xp + spec.noise_y * rng.sample::<f64, _>(StandardNormal);
        x.push(xi);
        y.push(yi);
        xp = xi;
        yp = yi;
    }
    Ok((x.split_off(burn_in), y.split_off(burn_in)))
}

/// A binary-instrument draw with threshold-crossing compliance: the
/// instrument shifts the latent take-up propensity by `compliance`.
pub fn generate_binary_iv(
    n: usize,
    compliance: f64,
    effect: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = 0.3;
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let ti = if rng.random::<f64>() < base + compliance * zi { 1.0 } else { 0.0 };
        let yi = effect * ti + rng.sample::<f64, _>(StandardNormal);
        z.push(zi);
        t.push(ti);
        y.push(yi);
    }
    (y, t, z)
}
