//! Proper scores and reliability diagnostics for predictive distributions.
//!
//! Ignorance is reported in bits. CRPS is in the units of the forecast
//! variable and uses closed forms for Normal and Normal-mixture forecasts;
//! for the Student-t it is computed by adaptive quadrature of
//! `int (F(x) - H(x - y))^2 dx`, which also serves as a reference for the
//! closed forms.

use std::f64::consts::{LN_2, PI};

use crate::distributions::{NormalMixture, PredictiveDist, StudentT};
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadSettings};
use crate::special::{ln_t_norm, std_normal_cdf, std_normal_pdf, FRAC_1_SQRT_PI};

pub const PIT_BINS: usize = 20;

/// Per-forecast verification triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationRecord {
    pub pit: f64,
    pub ignorance: f64,
    pub crps: f64,
}

/// All three scores of one forecast against its observation.
pub fn verify(d: &PredictiveDist, y: f64) -> Result<VerificationRecord> {
    Ok(VerificationRecord {
        pit: pit(d, y),
        ignorance: ignorance(d, y)?,
        crps: crps(d, y)?,
    })
}

/// Ignorance `-log2 f(y)` in bits.
pub fn ignorance(d: &PredictiveDist, y: f64) -> Result<f64> {
    let nats = match d {
        PredictiveDist::Normal(n) => {
            let r = y - n.mu();
            0.5 * (2.0 * PI * n.sigma2()).ln() + r * r / (2.0 * n.sigma2())
        }
        PredictiveDist::StudentT(t) => {
            let (nu, s2) = (t.nu(), t.sigma2());
            let r = y - t.mu();
            -ln_t_norm(nu) + 0.5 * s2.ln()
                + 0.5 * (nu + 1.0) * (r * r / (nu * s2)).ln_1p()
        }
        PredictiveDist::Mixture(m) => -m.ln_pdf(y),
    };
    let bits = nats / LN_2;
    if bits.is_finite() {
        Ok(bits)
    } else if bits == f64::INFINITY || d.pdf(y) == 0.0 {
        Err(Error::ZeroDensity { y })
    } else {
        Err(Error::Numeric(format!("ignorance evaluated to {bits} at y = {y}")))
    }
}

/// `A(mu, s2) = 2 s phi(mu / s) + mu (2 Phi(mu / s) - 1)`, the expected
/// absolute value of a `N(mu, s2)` variable.
pub fn a_function(mu: f64, s2: f64) -> f64 {
    let s = s2.sqrt();
    let z = mu / s;
    2.0 * s * std_normal_pdf(z) + mu * (2.0 * std_normal_cdf(z) - 1.0)
}

/// Normal CRPS, `sigma {z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)}`.
pub fn crps_normal(mu: f64, sigma2: f64, y: f64) -> f64 {
    let s = sigma2.sqrt();
    let z = (y - mu) / s;
    s * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - FRAC_1_SQRT_PI)
}

/// Mixture CRPS,
/// `sum_k w_k A(y - mu_k, s2_k) - 1/2 sum_k sum_l w_k w_l A(mu_k - mu_l, s2_k + s2_l)`.
pub fn crps_mixture(m: &NormalMixture, y: f64) -> f64 {
    let cs = m.components();
    let mut first = CompensatedSum::default();
    for c in cs {
        first.add(c.weight * a_function(y - c.mu, c.sigma2));
    }
    let mut pairs = CompensatedSum::default();
    for (k, ck) in cs.iter().enumerate() {
        pairs.add(ck.weight * ck.weight * a_function(0.0, 2.0 * ck.sigma2));
        for cl in &cs[k + 1..] {
            pairs.add(2.0 * ck.weight * cl.weight * a_function(ck.mu - cl.mu, ck.sigma2 + cl.sigma2));
        }
    }
    (first.value() - 0.5 * pairs.value()).max(0.0)
}

/// Neumaier summation; the mixture sums have up to K^2 terms.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// CRPS of a Student-t forecast by quadrature. Requires `nu > 1`.
pub fn crps_t(t: &StudentT, y: f64) -> Result<f64> {
    if t.nu() <= 1.0 {
        return Err(Error::UndefinedScore(format!(
            "CRPS of a t distribution needs nu > 1, got {}",
            t.nu()
        )));
    }
    crps_numerical(&PredictiveDist::StudentT(*t), y)
}

/// CRPS for any forecast by adaptive quadrature over
/// `[Q(1e-9), Q(1 - 1e-9)]` extended to include `y`, split at `y`, with
/// relative tolerance 1e-8.
pub fn crps_numerical(d: &PredictiveDist, y: f64) -> Result<f64> {
    let lo = d.quantile(1e-9)?.min(y);
    let hi = d.quantile(1.0 - 1e-9)?.max(y);
    let loc = d.location();
    let scale = match d {
        PredictiveDist::Normal(n) => n.sigma(),
        PredictiveDist::StudentT(t) => t.sigma(),
        PredictiveDist::Mixture(m) => m.variance().sqrt(),
    };
    let mut breaks = vec![y, loc];
    for k in [1.0, 3.0, 10.0, 30.0] {
        breaks.push(loc - k * scale);
        breaks.push(loc + k * scale);
    }
    if let PredictiveDist::Mixture(m) = d {
        if m.len() <= 64 {
            breaks.extend(m.components().iter().map(|c| c.mu));
        }
    }
    let settings = QuadSettings {
        abs_tol: 1e-13 * scale,
        ..QuadSettings::default()
    };
    let below = quadrature::integrate(|x| d.cdf(x).powi(2), lo, y, &breaks, settings)?;
    let above = quadrature::integrate(|x| (1.0 - d.cdf(x)).powi(2), y, hi, &breaks, settings)?;
    Ok(below + above)
}

/// Closed form for Normal and mixtures, quadrature for the t.
pub fn crps(d: &PredictiveDist, y: f64) -> Result<f64> {
    match d {
        PredictiveDist::Normal(n) => Ok(crps_normal(n.mu(), n.sigma2(), y).max(0.0)),
        PredictiveDist::Mixture(m) => Ok(crps_mixture(m, y)),
        PredictiveDist::StudentT(t) => crps_t(t, y),
    }
}

/// Relative CRPS improvement of a new forecast over a reference,
/// `(ref - new) / ref`. Bounded above by one.
pub fn crpss(mean_crps_ref: f64, mean_crps_new: f64) -> Result<f64> {
    if !(mean_crps_ref > 0.0) {
        return Err(Error::Domain(format!("reference mean CRPS {mean_crps_ref} must be > 0")));
    }
    Ok((mean_crps_ref - mean_crps_new) / mean_crps_ref)
}

/// Probability integral transform: the forecast cdf at the observation.
pub fn pit(d: &PredictiveDist, y: f64) -> f64 {
    d.cdf(y)
}

/// Counts of PIT values in twenty 5% bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitHistogram {
    pub counts: [u64; PIT_BINS],
    pub n_total: u64,
}

impl PitHistogram {
    pub fn bin_edges() -> [f64; PIT_BINS + 1] {
        std::array::from_fn(|k| k as f64 / PIT_BINS as f64)
    }

    /// Bin index of a PIT value; values on an interior edge go to the lower bin.
    pub fn bin_of(p: f64) -> usize {
        let edges = Self::bin_edges();
        (1..PIT_BINS).find(|&k| p <= edges[k]).map_or(PIT_BINS - 1, |k| k - 1)
    }

    /// Pearson chi-square statistic against a flat histogram (19 d.o.f.).
    pub fn chi_square(&self) -> f64 {
        let expected = self.n_total as f64 / PIT_BINS as f64;
        self.counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    }

    /// Fraction of values in the first and last bins together.
    pub fn outer_fraction(&self) -> f64 {
        (self.counts[0] + self.counts[PIT_BINS - 1]) as f64 / self.n_total as f64
    }
}

pub fn pit_histogram(pits: &[f64]) -> Result<PitHistogram> {
    let mut counts = [0u64; PIT_BINS];
    for (i, &p) in pits.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!("PIT value {p} at position {i} is outside [0, 1]")));
        }
        counts[PitHistogram::bin_of(p)] += 1;
    }
    Ok(PitHistogram {
        counts,
        n_total: pits.len() as u64,
    })
}

/// Fraction of observations inside the closed central `level` interval of
/// their forecasts.
pub fn interval_coverage(dists: &[PredictiveDist], ys: &[f64], level: f64) -> Result<f64> {
    if dists.len() != ys.len() {
        return Err(Error::Input(format!(
            "{} forecasts but {} observations",
            dists.len(),
            ys.len()
        )));
    }
    if dists.is_empty() {
        return Err(Error::Input("no forecasts to compute coverage over".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("coverage level {level} outside (0, 1)")));
    }
    let mut covered = 0usize;
    for (d, &y) in dists.iter().zip(ys) {
        if is_covered(d, y, level)? {
            covered += 1;
        }
    }
    Ok(covered as f64 / ys.len() as f64)
}

pub(crate) fn is_covered(d: &PredictiveDist, y: f64, level: f64) -> Result<bool> {
    let lo = d.quantile(0.5 * (1.0 - level))?;
    let hi = d.quantile(0.5 * (1.0 + level))?;
    Ok(lo <= y && y <= hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{MixtureComponent, Normal};
    use approx::assert_abs_diff_eq;

    fn normal(mu: f64, s2: f64) -> PredictiveDist {
        Normal::new(mu, s2).unwrap().into()
    }

    #[test]
    fn ignorance_standard_normal_at_mean() {
        let expected = 0.5 * (2.0 * PI).ln() / LN_2;
        assert_abs_diff_eq!(ignorance(&normal(0.0, 1.0), 0.0).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 1.3257, epsilon = 1e-4);
    }

    #[test]
    fn ignorance_cauchy_at_center() {
        let t: PredictiveDist = StudentT::new(1.0, 0.0, 1.0).unwrap().into();
        assert_abs_diff_eq!(ignorance(&t, 0.0).unwrap(), PI.log2(), epsilon = 1e-14);
    }

    #[test]
    fn ignorance_one_bit_for_double_density() {
        // For N(0,1), pdf(y2) = 2 pdf(y1) when y1^2 - y2^2 = 2 ln 2.
        let d = normal(0.0, 1.0);
        let y2 = 0.4;
        let y1 = (y2 * y2 + 2.0 * LN_2).sqrt();
        let diff = ignorance(&d, y1).unwrap() - ignorance(&d, y2).unwrap();
        assert_abs_diff_eq!(diff, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn ignorance_mixture_far_tail_is_finite() {
        let m: PredictiveDist = NormalMixture::equal_weights(&[(0.0, 1.0), (1.0, 1.0)]).unwrap().into();
        let v = ignorance(&m, 100.0).unwrap();
        assert!(v.is_finite() && v > 1000.0);
    }

    #[test]
    fn crps_normal_at_mean() {
        let v = crps(&normal(0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(v, (2.0 / PI).sqrt() - FRAC_1_SQRT_PI, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.23370, epsilon = 1e-5);
        let q = crps_numerical(&normal(0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(q, v, epsilon = 1e-8);
    }

    #[test]
    fn crps_approaches_absolute_error() {
        let d = normal(1.0, 4.0);
        for y in [1e4, -1e4] {
            let ratio = crps(&d, y).unwrap() / (y - 1.0f64).abs();
            assert_abs_diff_eq!(ratio, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn crps_scale_equivariance() {
        for (s, y, s2) in [(2.0, 0.7, 1.0), (0.1, -3.0, 2.5), (7.0, 1.2, 0.3)] {
            let lhs = crps(&normal(0.0, s * s * s2), s * y).unwrap();
            let rhs = s * crps(&normal(0.0, s2), y).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn a_function_identities() {
        assert_abs_diff_eq!(a_function(0.0, 2.3), (2.3f64 * 2.0 / PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a_function(-1.7, 1e-20), 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(a_function(2.2, 1e-20), 2.2, epsilon = 1e-12);
    }

    #[test]
    fn single_component_mixture_crps() {
        let m: PredictiveDist = NormalMixture::equal_weights(&[(1.5, 0.8)]).unwrap().into();
        for y in [-2.0, 1.5, 4.0] {
            assert_abs_diff_eq!(crps(&m, y).unwrap(), crps_normal(1.5, 0.8, y), epsilon = 1e-12);
        }
    }

    #[test]
    fn crps_t_requires_finite_mean() {
        let t: PredictiveDist = StudentT::new(1.0, 0.0, 1.0).unwrap().into();
        assert!(matches!(crps(&t, 0.3), Err(Error::UndefinedScore(_))));
    }

    #[test]
    fn crps_t_large_nu_matches_normal() {
        let t: PredictiveDist = StudentT::new(1e7, 0.5, 2.0).unwrap().into();
        for y in [-1.0, 0.5, 3.0] {
            assert_abs_diff_eq!(crps(&t, y).unwrap(), crps_normal(0.5, 2.0, y), epsilon = 1e-6);
        }
    }

    #[test]
    fn crps_t_wider_than_normal_at_center() {
        let t: PredictiveDist = StudentT::new(3.0, 0.0, 1.0).unwrap().into();
        assert!(crps(&t, 0.0).unwrap() > crps_normal(0.0, 1.0, 0.0));
    }

    #[test]
    fn crpss_examples() {
        assert_eq!(crpss(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(crpss(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(crpss(2.0, 3.0).unwrap(), -0.5);
        assert!(crpss(0.0, 1.0).is_err());
    }

    #[test]
    fn pit_examples() {
        assert_eq!(pit(&normal(3.0, 2.0), 3.0), 0.5);
        let t: PredictiveDist = StudentT::new(18.0, 0.0, 1.1).unwrap().into();
        assert_abs_diff_eq!(pit(&t, 0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pit(&normal(0.0, 1.0), 1.644_854), 0.95, epsilon = 1e-6);
    }

    #[test]
    fn mixture_pit_is_weighted_component_pits() {
        let cs = vec![
            MixtureComponent { weight: 0.2, mu: -1.0, sigma2: 0.5 },
            MixtureComponent { weight: 0.8, mu: 2.0, sigma2: 3.0 },
        ];
        let m: PredictiveDist = NormalMixture::new(cs).unwrap().into();
        let y = 0.4;
        let expected = 0.2 * pit(&normal(-1.0, 0.5), y) + 0.8 * pit(&normal(2.0, 3.0), y);
        assert_abs_diff_eq!(pit(&m, y), expected, epsilon = 1e-15);
    }

    #[test]
    fn histogram_examples() {
        let h = pit_histogram(&[0.025, 0.075, 0.975]).unwrap();
        let mut expected = [0u64; 20];
        expected[0] = 1;
        expected[1] = 1;
        expected[19] = 1;
        assert_eq!(h.counts, expected);
        assert_eq!(h.n_total, 3);

        let mids: Vec<f64> = (0..20).map(|k| 0.025 + 0.05 * k as f64).collect();
        assert_eq!(pit_histogram(&mids).unwrap().counts, [1u64; 20]);
    }

    #[test]
    fn histogram_edges_and_errors() {
        let h = pit_histogram(&[0.0, 0.05, 0.1, 0.5, 1.0]).unwrap();
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[9], 1);
        assert_eq!(h.counts[19], 1);
        assert!(matches!(pit_histogram(&[0.5, 1.2]), Err(Error::Input(_))));
        assert!(pit_histogram(&[f64::NAN]).is_err());
        let edges = PitHistogram::bin_edges();
        assert_eq!(edges[0], 0.0);
        assert_eq!(edges[20], 1.0);
    }

    #[test]
    fn coverage_examples() {
        let d = vec![normal(0.0, 1.0)];
        assert_eq!(interval_coverage(&d, &[0.0], 0.9).unwrap(), 1.0);
        let hi = d[0].quantile(0.95).unwrap();
        assert_eq!(interval_coverage(&d, &[hi], 0.9).unwrap(), 1.0);
        assert_eq!(interval_coverage(&d, &[hi + 1e-9], 0.9).unwrap(), 0.0);
        assert!(interval_coverage(&[], &[], 0.9).is_err());
        assert!(interval_coverage(&d, &[0.0, 1.0], 0.9).is_err());
    }
}
