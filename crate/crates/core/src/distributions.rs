//! Predictive distributions: Normal, non-standardized Student-t and Normal
//! mixtures.
//!
//! All three families are parametrized by variance (or squared scale), so
//! `StudentT::new(18.0, 0.0, 1.1)` is the t distribution with 18 degrees of
//! freedom, location 0 and squared scale 1.1. Constructors validate their
//! parameters; once built, evaluation cannot fail.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::special::{self, ln_t_norm, std_normal_cdf, std_normal_pdf, std_normal_quantile};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} = {x} is not finite")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} = {x} must be > 0")))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mu: f64,
    sigma2: f64,
}

impl Normal {
    /// Zero variance is rejected: every score divides by sigma.
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma2", sigma2)?;
        Ok(Normal { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.sigma();
        std_normal_pdf((x - self.mu) / s) / s
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let r = x - self.mu;
        -0.5 * (LN_2PI + self.sigma2.ln() + r * r / self.sigma2)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mu) / self.sigma())
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.mu + self.sigma() * std_normal_quantile(p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + self.sigma() * z
    }
}

/// Location-scale Student-t with `nu` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    nu: f64,
    mu: f64,
    sigma2: f64,
}

impl StudentT {
    pub fn new(nu: f64, mu: f64, sigma2: f64) -> Result<Self> {
        check_positive("nu", nu)?;
        check_finite("mu", mu)?;
        check_positive("sigma2", sigma2)?;
        Ok(StudentT { nu, mu, sigma2 })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z2 = (x - self.mu) * (x - self.mu) / self.sigma2;
        ln_t_norm(self.nu) - 0.5 * self.sigma2.ln()
            - 0.5 * (self.nu + 1.0) * (z2 / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        special::central_t_cdf((x - self.mu) / self.sigma(), self.nu)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        if p == 0.5 {
            return Ok(self.mu);
        }
        let target = |x: f64| self.cdf(x) - p;
        let (lo, hi) = expand_bracket(&target, self.mu, self.sigma())?;
        bisect(&target, lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = rand_distr::StudentT::new(self.nu)
            .expect("nu validated at construction")
            .sample(rng);
        self.mu + self.sigma() * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma2: f64,
}

/// Finite mixture of Normal distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    components: Vec<MixtureComponent>,
}

impl NormalMixture {
    /// Weights must be non-negative and sum to one within 1e-12.
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ParameterDomain("mixture has no components".into()));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            check_finite(&format!("weight[{k}]"), c.weight)?;
            if c.weight < 0.0 {
                return Err(Error::ParameterDomain(format!("weight[{k}] = {} is negative", c.weight)));
            }
            check_finite(&format!("mu[{k}]"), c.mu)?;
            check_positive(&format!("sigma2[{k}]"), c.sigma2)?;
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(NormalMixture { components })
    }

    /// Equally weighted mixture of `(mu, sigma2)` pairs.
    pub fn equal_weights(params: &[(f64, f64)]) -> Result<Self> {
        let w = 1.0 / params.len() as f64;
        Self::new(
            params
                .iter()
                .map(|&(mu, sigma2)| MixtureComponent { weight: w, mu, sigma2 })
                .collect(),
        )
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let s = c.sigma2.sqrt();
                c.weight * std_normal_pdf((x - c.mu) / s) / s
            })
            .sum()
    }

    /// Log density via log-sum-exp, finite far into the tails.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| {
                let r = x - c.mu;
                c.weight.ln() - 0.5 * (LN_2PI + c.sigma2.ln() + r * r / c.sigma2)
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let v: f64 = self
            .components
            .iter()
            .map(|c| c.weight * std_normal_cdf((x - c.mu) / c.sigma2.sqrt()))
            .sum();
        v.clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mu).sum()
    }

    /// Mean component variance plus the variance of the component means.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.sigma2 + (c.mu - mean) * (c.mu - mean)))
            .sum()
    }

    /// Bisection on the cdf inside `[min mu - 20 max sigma, max mu + 20 max sigma]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let max_sigma = self
            .components
            .iter()
            .map(|c| c.sigma2.sqrt())
            .fold(0.0, f64::max);
        let min_mu = self.components.iter().map(|c| c.mu).fold(f64::INFINITY, f64::min);
        let max_mu = self.components.iter().map(|c| c.mu).fold(f64::NEG_INFINITY, f64::max);
        let target = |x: f64| self.cdf(x) - p;
        let mut lo = min_mu - 20.0 * max_sigma;
        let mut hi = max_mu + 20.0 * max_sigma;
        if target(lo) > 0.0 || target(hi) < 0.0 {
            // Only reachable for p within ~1e-89 of 0 or 1.
            (lo, hi) = expand_bracket(&target, 0.5 * (min_mu + max_mu), max_sigma)?;
        }
        bisect(&target, lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("non-empty mixture");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mu + chosen.sigma2.sqrt() * z
    }
}

/// Grows `[center - w, center + w]` geometrically until `f` changes sign
/// from negative to positive across it.
fn expand_bracket<F: Fn(f64) -> f64>(f: &F, center: f64, scale: f64) -> Result<(f64, f64)> {
    let mut width = scale.max(f64::MIN_POSITIVE);
    for _ in 0..2100 {
        let (lo, hi) = (center - width, center + width);
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            return Ok((lo, hi));
        }
        width *= 2.0;
        if !width.is_finite() {
            break;
        }
    }
    Err(Error::Numeric("could not bracket quantile".into()))
}

/// Bisection for an increasing function with `f(lo) <= 0 <= f(hi)`, run
/// until the bracket cannot be split further in floating point.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever endpoint is closer in probability.
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// The common currency of prediction and scoring.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDist {
    Normal(Normal),
    StudentT(StudentT),
    Mixture(NormalMixture),
}

impl From<Normal> for PredictiveDist {
    fn from(d: Normal) -> Self {
        PredictiveDist::Normal(d)
    }
}

impl From<StudentT> for PredictiveDist {
    fn from(d: StudentT) -> Self {
        PredictiveDist::StudentT(d)
    }
}

impl From<NormalMixture> for PredictiveDist {
    fn from(d: NormalMixture) -> Self {
        PredictiveDist::Mixture(d)
    }
}

impl PredictiveDist {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            PredictiveDist::Normal(d) => d.pdf(x),
            PredictiveDist::StudentT(d) => d.pdf(x),
            PredictiveDist::Mixture(d) => d.pdf(x),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            PredictiveDist::Normal(d) => d.ln_pdf(x),
            PredictiveDist::StudentT(d) => d.ln_pdf(x),
            PredictiveDist::Mixture(d) => d.ln_pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PredictiveDist::Normal(d) => d.cdf(x),
            PredictiveDist::StudentT(d) => d.cdf(x),
            PredictiveDist::Mixture(d) => d.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            PredictiveDist::Normal(d) => d.quantile(p),
            PredictiveDist::StudentT(d) => d.quantile(p),
            PredictiveDist::Mixture(d) => d.quantile(p),
        }
    }

    /// Draws `k` values. Deterministic for a given generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<f64> {
        (0..k)
            .map(|_| match self {
                PredictiveDist::Normal(d) => d.sample(rng),
                PredictiveDist::StudentT(d) => d.sample(rng),
                PredictiveDist::Mixture(d) => d.sample(rng),
            })
            .collect()
    }

    /// Location: the mean for Normal and mixtures, mu for the t.
    pub fn location(&self) -> f64 {
        match self {
            PredictiveDist::Normal(d) => d.mu(),
            PredictiveDist::StudentT(d) => d.mu(),
            PredictiveDist::Mixture(d) => d.mean(),
        }
    }

    /// Same distribution translated by `delta`.
    pub fn shifted(&self, delta: f64) -> PredictiveDist {
        match self {
            PredictiveDist::Normal(d) => PredictiveDist::Normal(Normal {
                mu: d.mu + delta,
                sigma2: d.sigma2,
            }),
            PredictiveDist::StudentT(d) => PredictiveDist::StudentT(StudentT {
                mu: d.mu + delta,
                ..*d
            }),
            PredictiveDist::Mixture(d) => PredictiveDist::Mixture(NormalMixture {
                components: d
                    .components
                    .iter()
                    .map(|c| MixtureComponent { mu: c.mu + delta, ..*c })
                    .collect(),
            }),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PredictiveDist::Normal(_) => "normal",
            PredictiveDist::StudentT(_) => "student-t",
            PredictiveDist::Mixture(_) => "normal-mixture",
        }
    }
}
