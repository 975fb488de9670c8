//! MOS recalibration: Normal linear regression of the observation on the
//! ensemble mean, `y = a + b m + c eps`.
//!
//! Two predictive distributions are offered. The plug-in Normal treats the
//! estimates as exact. The Student-t predictive accounts for estimation
//! error in all three parameters: the sampling variance of `(a, b)`
//! inflates the scale and the uncertainty in `c^2` turns the Normal into a
//! t with `n - 2` degrees of freedom.

use crate::distributions::{Normal, PredictiveDist, StudentT};
use crate::error::{Error, Result};
use crate::training::TrainingSet;

pub const MIN_TRAINING: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosFit {
    pub a_hat: f64,
    pub b_hat: f64,
    /// Residual variance with the unbiased `n - 2` divisor.
    pub c2_hat: f64,
    pub n: usize,
    /// Training mean of the ensemble means.
    pub m_bar: f64,
    /// Sum of squared deviations of the ensemble means from `m_bar`.
    pub ss_m: f64,
}

/// Least-squares fit of `y` on `m`.
///
/// The sample covariance and variance both use the `n - 1` divisor; only
/// their ratio enters the slope.
pub fn fit_mos(train: &TrainingSet) -> Result<MosFit> {
    let n = train.len();
    if n < MIN_TRAINING {
        return Err(Error::InsufficientData { needed: MIN_TRAINING, got: n });
    }
    if !train.has_distinct_means() {
        return Err(Error::DegenerateDesign);
    }
    let records = train.canonical();
    let nf = n as f64;
    let m_bar = records.iter().map(|r| r.m).sum::<f64>() / nf;
    let y_bar = records.iter().map(|r| r.y).sum::<f64>() / nf;
    let ss_m: f64 = records.iter().map(|r| (r.m - m_bar) * (r.m - m_bar)).sum();
    let sp_my: f64 = records.iter().map(|r| (r.m - m_bar) * (r.y - y_bar)).sum();
    if !(ss_m > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let s2_m = ss_m / (nf - 1.0);
    let s_my = sp_my / (nf - 1.0);
    let b_hat = s_my / s2_m;
    let a_hat = y_bar - b_hat * m_bar;
    let ssr: f64 = records
        .iter()
        .map(|r| {
            let e = r.y - a_hat - b_hat * r.m;
            e * e
        })
        .sum();
    Ok(MosFit {
        a_hat,
        b_hat,
        c2_hat: ssr / (nf - 2.0),
        n,
        m_bar,
        ss_m,
    })
}

impl MosFit {
    pub fn mean(&self, m_star: f64) -> f64 {
        self.a_hat + self.b_hat * m_star
    }

    /// Variance inflation `1 + 1/n + (m* - m_bar)^2 / ss_m` of the
    /// parameter-uncertainty predictive.
    pub fn inflation_factor(&self, m_star: f64) -> f64 {
        let dm = m_star - self.m_bar;
        1.0 + 1.0 / self.n as f64 + dm * dm / self.ss_m
    }

    pub fn degrees_of_freedom(&self) -> f64 {
        (self.n - 2) as f64
    }

    fn check_variance(&self) -> Result<()> {
        if self.c2_hat > 0.0 && self.c2_hat.is_finite() {
            Ok(())
        } else {
            Err(Error::DegenerateVariance { variance: self.c2_hat, replicate: None })
        }
    }

    /// `Normal(a + b m*, c^2)` with the estimates plugged in.
    pub fn predict_plugin(&self, m_star: f64) -> Result<Normal> {
        self.check_variance()?;
        Normal::new(self.mean(m_star), self.c2_hat)
    }

    /// `t_{n-2}(a + b m*, c^2 * inflation(m*))`.
    pub fn predict_t(&self, m_star: f64) -> Result<StudentT> {
        self.check_variance()?;
        if self.n < MIN_TRAINING {
            return Err(Error::InsufficientData { needed: MIN_TRAINING, got: self.n });
        }
        StudentT::new(
            self.degrees_of_freedom(),
            self.mean(m_star),
            self.c2_hat * self.inflation_factor(m_star),
        )
    }
}

pub fn mos_predict_plugin(fit: &MosFit, m_star: f64) -> Result<PredictiveDist> {
    fit.predict_plugin(m_star).map(Into::into)
}

pub fn mos_predict_t(fit: &MosFit, m_star: f64) -> Result<PredictiveDist> {
    fit.predict_t(m_star).map(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ts(pairs: &[(f64, f64)]) -> TrainingSet {
        TrainingSet::from_triples(&pairs.iter().map(|&(m, y)| (m, 0.0, y)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn perfect_line() {
        let f = fit_mos(&ts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])).unwrap();
        assert_abs_diff_eq!(f.a_hat, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.b_hat, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.c2_hat, 0.0, epsilon = 1e-15);
        assert!(matches!(f.predict_plugin(1.0), Err(Error::DegenerateVariance { .. })));
        assert!(matches!(f.predict_t(1.0), Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn hand_computed_fit() {
        let f = fit_mos(&ts(&[(0.0, 0.0), (1.0, 2.0), (2.0, 2.0)])).unwrap();
        assert_abs_diff_eq!(f.a_hat, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.b_hat, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.c2_hat, 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(f.n, 3);
        assert_abs_diff_eq!(f.m_bar, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.ss_m, 2.0, epsilon = 1e-15);

        let p = f.predict_plugin(1.0).unwrap();
        assert_abs_diff_eq!(p.mu(), 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.sigma2(), 2.0 / 3.0, epsilon = 1e-14);

        let t = f.predict_t(3.0).unwrap();
        assert_eq!(t.nu(), 1.0);
        assert_abs_diff_eq!(t.mu(), 10.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.sigma2(), 20.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_mos(&ts(&[(0.0, 0.0), (1.0, 1.0)])),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        assert!(matches!(
            fit_mos(&ts(&[(0.1, 0.0), (0.1, 1.0), (0.1, 3.0)])),
            Err(Error::DegenerateDesign)
        ));
    }

    #[test]
    fn constant_climatology() {
        let f = MosFit { a_hat: 0.0, b_hat: 0.0, c2_hat: 1.0, n: 10, m_bar: 0.0, ss_m: 1.0 };
        for m in [-3.0, 0.0, 7.5] {
            assert_eq!(f.predict_plugin(m).unwrap(), Normal::new(0.0, 1.0).unwrap());
        }
    }

    #[test]
    fn identity_regression_at_training_mean() {
        let f = MosFit { a_hat: 0.0, b_hat: 1.0, c2_hat: 0.4, n: 10, m_bar: 2.5, ss_m: 3.0 };
        assert_eq!(f.predict_plugin(2.5).unwrap().mu(), 2.5);
        assert_abs_diff_eq!(f.inflation_factor(2.5), 1.1, epsilon = 1e-15);
    }

    #[test]
    fn one_sd_inflation_with_twenty_cases() {
        let s2_m = 0.7;
        let f = MosFit { a_hat: 0.0, b_hat: 1.0, c2_hat: 1.0, n: 20, m_bar: 0.3, ss_m: 19.0 * s2_m };
        let factor = f.inflation_factor(0.3 + s2_m.sqrt());
        assert_abs_diff_eq!(factor, 1.0 + 1.0 / 20.0 + 1.0 / 19.0, epsilon = 1e-12);
        assert_eq!(f.predict_t(1.0).unwrap().nu(), 18.0);
    }

    #[test]
    fn large_n_at_training_mean_approaches_plugin() {
        let f = MosFit { a_hat: 1.0, b_hat: 2.0, c2_hat: 0.5, n: 10_000_000, m_bar: 0.0, ss_m: 1e7 };
        let t: PredictiveDist = f.predict_t(0.0).unwrap().into();
        let n: PredictiveDist = f.predict_plugin(0.0).unwrap().into();
        for x in [-2.0, 0.0, 1.0, 3.5] {
            assert_abs_diff_eq!(t.pdf(x), n.pdf(x), epsilon = 1e-6);
        }
    }

    #[test]
    fn translation_equivariance() {
        let base = [(0.3, 1.2), (1.1, 0.4), (2.0, 2.9), (2.7, 3.3), (4.0, 3.1)];
        let f0 = fit_mos(&ts(&base)).unwrap();
        let shifted: Vec<_> = base.iter().map(|&(m, y)| (m, y + 10.0)).collect();
        let f1 = fit_mos(&ts(&shifted)).unwrap();
        assert_abs_diff_eq!(f1.a_hat - f0.a_hat, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f1.b_hat, f0.b_hat, epsilon = 1e-12);
        assert_abs_diff_eq!(f1.c2_hat, f0.c2_hat, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn inflation_bounds_and_monotonicity(
            n in 3usize..200, m_bar in -5.0f64..5.0, ss_m in 0.01f64..100.0,
            d1 in 0.0f64..10.0, extra in 1e-3f64..10.0,
        ) {
            let f = MosFit { a_hat: 0.0, b_hat: 1.0, c2_hat: 1.0, n, m_bar, ss_m };
            let floor = 1.0 + 1.0 / n as f64;
            prop_assert_eq!(f.inflation_factor(m_bar), floor);
            prop_assert!(f.inflation_factor(m_bar + d1) >= floor);
            let near = f.predict_t(m_bar - d1).unwrap().sigma2();
            let far = f.predict_t(m_bar - d1 - extra).unwrap().sigma2();
            prop_assert!(far > near);
        }

        #[test]
        fn t_location_equals_plugin_mean(
            a in -5.0f64..5.0, b in -3.0f64..3.0, m in -10.0f64..10.0,
        ) {
            let f = MosFit { a_hat: a, b_hat: b, c2_hat: 0.8, n: 12, m_bar: 0.5, ss_m: 4.0 };
            prop_assert_eq!(f.predict_t(m).unwrap().mu(), f.predict_plugin(m).unwrap().mu());
        }
    }
}
