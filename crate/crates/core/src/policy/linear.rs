//! Linear-softmax policy over action templates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::DecisionTrace;
use crate::env::Observation;
use crate::policy::features::{features, N_FEATURES};
use crate::policy::templates::{resolve, valid_mask, Template, TemplateFilter, N_TEMPLATES};
use crate::policy::{Decision, Policy, PolicyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Row-major `n_templates x n_features`.
    pub weights: Vec<f64>,
    pub n_templates: usize,
    pub n_features: usize,
    pub temperature: f64,
    pub version: String,
}

impl PolicyParams {
    pub fn zeros(version: &str) -> Self {
        Self {
            weights: vec![0.0; N_TEMPLATES * N_FEATURES],
            n_templates: N_TEMPLATES,
            n_features: N_FEATURES,
            temperature: 1.0,
            version: version.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.weights.len() != self.n_templates * self.n_features {
            return Err(PolicyError::Argument(format!(
                "weight count {} does not match {}x{}",
                self.weights.len(),
                self.n_templates,
                self.n_features
            )));
        }
        if self.n_templates != N_TEMPLATES || self.n_features != N_FEATURES {
            return Err(PolicyError::Argument(format!(
                "expected {N_TEMPLATES}x{N_FEATURES} weights, found {}x{}",
                self.n_templates, self.n_features
            )));
        }
        if !self.weights.iter().all(|w| w.is_finite()) {
            return Err(PolicyError::Argument("non-finite weight".into()));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(PolicyError::Argument(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.weights[t * self.n_features..(t + 1) * self.n_features]
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

fn check_inputs(params: &PolicyParams, features: &[f64], mask: &[bool]) -> Result<(), PolicyError> {
    if features.len() != params.n_features {
        return Err(PolicyError::Argument(format!(
            "feature length {} != {}",
            features.len(),
            params.n_features
        )));
    }
    if mask.len() != params.n_templates {
        return Err(PolicyError::Argument(format!("mask length {} != {}", mask.len(), params.n_templates)));
    }
    if !mask.iter().any(|&m| m) {
        return Err(PolicyError::Argument("every template is masked".into()));
    }
    Ok(())
}

/// Scaled logits `w_t . f / temperature`; masked entries are `-inf`.
pub fn logits(params: &PolicyParams, features: &[f64], mask: &[bool]) -> Vec<f64> {
    (0..params.n_templates)
        .map(|t| {
            if mask[t] {
                params.row(t).iter().zip(features).map(|(w, x)| w * x).sum::<f64>() / params.temperature
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Log-probabilities over templates; masked entries are `-inf`.
pub fn log_distribution(params: &PolicyParams, features: &[f64], mask: &[bool]) -> Result<Vec<f64>, PolicyError> {
    check_inputs(params, features, mask)?;
    let z = logits(params, features, mask);
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    Ok(z.iter().map(|v| v - lse).collect())
}

pub fn action_distribution(params: &PolicyParams, features: &[f64], mask: &[bool]) -> Result<Vec<f64>, PolicyError> {
    Ok(log_distribution(params, features, mask)?.into_iter().map(f64::exp).collect())
}

/// Draw a template; returns it with its log-probability.
pub fn sample_template(
    params: &PolicyParams,
    features: &[f64],
    mask: &[bool],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, f64), PolicyError> {
    let lp = log_distribution(params, features, mask)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_valid = 0;
    for (t, l) in lp.iter().enumerate() {
        if !mask[t] {
            continue;
        }
        last_valid = t;
        acc += l.exp();
        if u < acc {
            return Ok((t, *l));
        }
    }
    Ok((last_valid, lp[last_valid]))
}

pub fn greedy_template(params: &PolicyParams, features: &[f64], mask: &[bool]) -> Result<(usize, f64), PolicyError> {
    let lp = log_distribution(params, features, mask)?;
    let mut best = None;
    for (t, l) in lp.iter().enumerate() {
        if mask[t] && best.map_or(true, |(_, b)| *l > b) {
            best = Some((t, *l));
        }
    }
    Ok(best.expect("mask checked nonempty"))
}

pub fn log_prob_of(params: &PolicyParams, features: &[f64], mask: &[bool], template: usize) -> Result<f64, PolicyError> {
    if template >= params.n_templates {
        return Err(PolicyError::Argument(format!("template {template} is not in the template set")));
    }
    if !mask[template] {
        return Err(PolicyError::Argument(format!(
            "template {} is masked and has zero probability",
            Template::from_index(template).map_or(template.to_string(), |t| t.label())
        )));
    }
    Ok(log_distribution(params, features, mask)?[template])
}

/// Gradient of `log pi(template)` with respect to the weights, row-major.
/// Masked rows are exactly zero.
pub fn grad_log_prob(
    params: &PolicyParams,
    features: &[f64],
    mask: &[bool],
    template: usize,
) -> Result<Vec<f64>, PolicyError> {
    let p = action_distribution(params, features, mask)?;
    let mut g = vec![0.0; params.weights.len()];
    accumulate_grad_log_prob(params, features, mask, &p, template, 1.0, &mut g);
    Ok(g)
}

/// `out += scale * d log pi(template) / dW` given the distribution `p`.
pub fn accumulate_grad_log_prob(
    params: &PolicyParams,
    features: &[f64],
    mask: &[bool],
    p: &[f64],
    template: usize,
    scale: f64,
    out: &mut [f64],
) {
    let nf = params.n_features;
    for t in 0..params.n_templates {
        if !mask[t] {
            continue;
        }
        let coef = scale * ((t == template) as u8 as f64 - p[t]) / params.temperature;
        if coef == 0.0 {
            continue;
        }
        let row = &mut out[t * nf..(t + 1) * nf];
        for (r, x) in row.iter_mut().zip(features) {
            *r += coef * x;
        }
    }
}

/// Sampling (or greedy) policy driven by [`PolicyParams`].
#[derive(Debug, Clone)]
pub struct LinearPolicy {
    pub params: PolicyParams,
    pub filter: TemplateFilter,
    pub greedy: bool,
}

impl LinearPolicy {
    pub fn new(params: PolicyParams) -> Self {
        Self {
            params,
            filter: TemplateFilter::FULL,
            greedy: false,
        }
    }

    pub fn with_filter(mut self, filter: TemplateFilter) -> Self {
        self.filter = filter;
        self
    }
}

impl Policy for LinearPolicy {
    fn name(&self) -> String {
        format!("linear:{}", self.params.version)
    }

    fn decide(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError> {
        let f = features(obs);
        let mask = valid_mask(obs, self.filter);
        let (t, lp) = if self.greedy {
            greedy_template(&self.params, &f, &mask)?
        } else {
            sample_template(&self.params, &f, &mask, rng)?
        };
        let template = Template::from_index(t).expect("index within template set");
        let action = resolve(template, obs, self.filter).expect("sampled template is valid");
        Ok(Decision {
            action: Ok(action),
            log_prob: lp,
            trace: Some(DecisionTrace {
                features: f,
                mask,
                template: t,
            }),
        })
    }
}
