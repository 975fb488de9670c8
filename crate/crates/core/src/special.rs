//! Scalar special functions shared by the distribution and scoring code.

use statrs::function::{beta, erf};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// 1 / sqrt(2 pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// 1 / sqrt(pi)
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard Normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard Normal cdf, accurate in both tails.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Inverse of the standard Normal cdf for `p` in (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // Newton steps against the accurate cdf polish the starting value.
    for _ in 0..2 {
        let dens = std_normal_pdf(z);
        if !(dens > 0.0) {
            break;
        }
        let step = (std_normal_cdf(z) - p) / dens;
        if !step.is_finite() {
            break;
        }
        z -= step;
    }
    z
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Cdf of the central Student-t distribution with `nu` degrees of freedom,
/// via the regularized incomplete beta function.
pub fn central_t_cdf(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let t2 = t * t;
    if nu > 1e5 {
        // Large-nu expansion about the Normal; the next term is O(nu^-3).
        let corr = (t2 * t + t) / (4.0 * nu) + (5.0 * t2 * t2 * t + 16.0 * t2 * t + 3.0 * t) / (96.0 * nu * nu);
        return std_normal_cdf(t) - std_normal_pdf(t) * corr;
    }
    // I_x(nu/2, 1/2) with x = nu / (nu + t^2) is the two-sided tail mass
    // beyond |t|. For t^2 < nu, x is close to 1, so use the complement
    // with 1 - x = t^2 / (nu + t^2) formed directly.
    let tail = if t2 < nu {
        0.5 * (1.0 - beta::beta_reg(0.5, 0.5 * nu, t2 / (nu + t2)))
    } else {
        0.5 * beta::beta_reg(0.5 * nu, 0.5, nu / (nu + t2))
    };
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Log of the normalizing constant of the central t density,
/// `lnG((nu+1)/2) - lnG(nu/2) - 0.5 ln(pi nu)`.
pub fn ln_t_norm(nu: f64) -> f64 {
    let lg = if nu > 1e5 {
        // lnG(x + 1/2) - lnG(x) from the asymptotic series, avoiding the
        // cancellation between two huge ln_gamma values.
        let x = 0.5 * nu;
        0.5 * x.ln() - 1.0 / (8.0 * x) + 1.0 / (192.0 * x * x * x)
    } else {
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu)
    };
    lg - 0.5 * (std::f64::consts::PI * nu).ln()
}
