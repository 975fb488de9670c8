//! Non-homogeneous Gaussian regression: `y ~ N(a + b m, c + d v)`.
//!
//! Parameters are estimated by maximizing the Gaussian log-likelihood with
//! a Nelder-Mead simplex over `(a, b, c, delta)` where `d = delta^2`, so the
//! spread coefficient is non-negative by construction. `c` is held above a
//! small floor proportional to the observation variance.

use crate::distributions::{Normal, PredictiveDist};
use crate::error::{Error, Result};
use crate::mos::fit_mos;
use crate::simplex::{self, SimplexSettings};
use crate::training::{Record, TrainingSet};

pub const MIN_TRAINING: usize = 4;

/// Relative size of the floor on `c`, as a fraction of the sample variance
/// of the observations.
pub const C_FLOOR_FRACTION: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgrParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl NgrParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|x| x.is_finite()) {
            return Err(Error::ParameterDomain(format!("non-finite NGR parameters ({a}, {b}, {c}, {d})")));
        }
        if d < 0.0 {
            return Err(Error::ParameterDomain(format!("NGR spread coefficient d = {d} is negative")));
        }
        Ok(NgrParams { a, b, c, d })
    }

    pub fn mean(&self, m: f64) -> f64 {
        self.a + self.b * m
    }

    pub fn variance(&self, v: f64) -> f64 {
        self.c + self.d * v
    }

    /// `Normal(a + b m*, c + d v*)`.
    pub fn predict(&self, m_star: f64, v_star: f64) -> Result<Normal> {
        let var = self.variance(v_star);
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::DegenerateVariance { variance: var, replicate: None });
        }
        Normal::new(self.mean(m_star), var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgrFit {
    pub params: NgrParams,
    /// Exact Gaussian log-likelihood at `params`.
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

fn check_variances(params: &NgrParams, records: &[Record]) -> Result<()> {
    for r in records {
        let s = params.variance(r.v);
        if !(s > 0.0) {
            return Err(Error::Domain(format!("c + d v = {s} is not positive at v = {}", r.v)));
        }
    }
    Ok(())
}

/// The NGR log-likelihood with additive constants and the common factor
/// 1/2 dropped: `-sum[ln(c + d v) + (y - a - b m)^2 / (c + d v)]`.
///
/// It is exactly `2 * (exact_log_likelihood + n/2 ln 2 pi)`, so both have the
/// same maximizer.
pub fn ngr_log_likelihood(params: &NgrParams, train: &TrainingSet) -> Result<f64> {
    check_variances(params, train.records())?;
    Ok(-train
        .records()
        .iter()
        .map(|r| {
            let s = params.variance(r.v);
            let e = r.y - params.mean(r.m);
            s.ln() + e * e / s
        })
        .sum::<f64>())
}

/// Exact Gaussian log-likelihood `sum ln N(y; a + b m, c + d v)`.
pub fn exact_log_likelihood(params: &NgrParams, train: &TrainingSet) -> Result<f64> {
    check_variances(params, train.records())?;
    Ok(exact_ll(params.a, params.b, params.c, params.d, train.records()))
}

fn exact_ll(a: f64, b: f64, c: f64, d: f64, records: &[Record]) -> f64 {
    -0.5 * records
        .iter()
        .map(|r| {
            let s = c + d * r.v;
            let e = r.y - a - b * r.m;
            LN_2PI + s.ln() + e * e / s
        })
        .sum::<f64>()
}

/// Weighted least squares for `(a, b)` with weights `1 / (c + d v)`, the
/// conditional maximizer of the likelihood for fixed `(c, d)`.
fn weighted_mean_coefficients(c: f64, d: f64, records: &[Record]) -> Option<(f64, f64)> {
    let (mut sw, mut swm, mut swy) = (0.0, 0.0, 0.0);
    for r in records {
        let w = 1.0 / (c + d * r.v);
        sw += w;
        swm += w * r.m;
        swy += w * r.y;
    }
    let (m_w, y_w) = (swm / sw, swy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for r in records {
        let w = 1.0 / (c + d * r.v);
        sxx += w * (r.m - m_w) * (r.m - m_w);
        sxy += w * (r.m - m_w) * (r.y - y_w);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    let a = y_w - b * m_w;
    (a.is_finite() && b.is_finite()).then_some((a, b))
}

/// Maximum-likelihood NGR fit.
///
/// Records are put into a canonical order first so the result does not
/// depend on how the training set is ordered. After the simplex search,
/// `(a, b)` are replaced by their closed-form conditional optimum when
/// that does not lower the likelihood.
pub fn fit_ngr(train: &TrainingSet, settings: &SimplexSettings) -> Result<NgrFit> {
    let n = train.len();
    if n < MIN_TRAINING {
        return Err(Error::InsufficientData { needed: MIN_TRAINING, got: n });
    }
    let mos = fit_mos(train)?;
    let records = train.canonical();
    let nf = n as f64;

    let y_bar = records.iter().map(|r| r.y).sum::<f64>() / nf;
    let var_y = records.iter().map(|r| (r.y - y_bar).powi(2)).sum::<f64>() / (nf - 1.0);
    let c_floor = (C_FLOOR_FRACTION * var_y).max(1e-300);
    let v_bar = records.iter().map(|r| r.v).sum::<f64>() / nf;

    // The likelihood-maximizing residual variance uses the /n divisor.
    let c0 = (mos.c2_hat * (nf - 2.0) / nf).max(c_floor);
    let delta0 = 1e-3;
    let x0 = [mos.a_hat, mos.b_hat, c0, delta0];
    let steps = [
        (0.1 * mos.a_hat.abs()).max((c0 / nf).sqrt()),
        (0.1 * mos.b_hat.abs()).max((c0 / mos.ss_m).sqrt()),
        0.5 * c0,
        if v_bar > 0.0 { 0.5 * (c0 / v_bar).sqrt() } else { 0.1 },
    ];

    let objective = |x: &[f64]| -> f64 {
        let c = x[2].max(c_floor);
        -exact_ll(x[0], x[1], c, x[3] * x[3], &records)
    };
    let min = simplex::minimize(objective, &x0, &steps, settings);

    let (mut a, mut b) = (min.x[0], min.x[1]);
    let c = min.x[2].max(c_floor);
    let d = min.x[3] * min.x[3];
    let mut ll = exact_ll(a, b, c, d, &records);
    if let Some((wa, wb)) = weighted_mean_coefficients(c, d, &records) {
        let polished = exact_ll(wa, wb, c, d, &records);
        if polished >= ll {
            (a, b, ll) = (wa, wb, polished);
        }
    }
    if !ll.is_finite() {
        return Err(Error::Numeric(format!("NGR fit ended at non-finite log-likelihood {ll}")));
    }
    Ok(NgrFit {
        params: NgrParams::new(a, b, c, d)?,
        log_likelihood: ll,
        converged: min.converged,
        iterations: min.iterations,
        evaluations: min.evaluations,
    })
}

pub fn ngr_predict_plugin(fit: &NgrFit, m_star: f64, v_star: f64) -> Result<PredictiveDist> {
    fit.params.predict(m_star, v_star).map(Into::into)
}
