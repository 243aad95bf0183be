//! Scalar distribution helpers that work without `std`.

use core::f64::consts::{PI, SQRT_2};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Rational approximation (Acklam) followed by one Halley step against
/// `erfc`, which brings the result to full double precision.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Maps a uniform variate `u ∈ [0, 1)` to a Poisson(`mean`) count by
/// inverting the CDF. The map is monotone in `u`, so the same `u` fed
/// with different means yields coupled counts.
pub fn poisson_from_uniform(mean: f64, u: f64) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    if mean > 600.0 {
        // e^{-mean} underflows; the normal approximation is accurate here.
        let k = mean + libm::sqrt(mean) * normal_quantile(u.clamp(1e-300, 1.0 - 1e-16));
        return libm::round(k).max(0.0) as usize;
    }
    let cap = (mean + 40.0 * libm::sqrt(mean) + 100.0) as usize;
    let mut k = 0usize;
    let mut pmf = libm::exp(-mean);
    let mut cdf = pmf;
    while u >= cdf && k < cap {
        k += 1;
        pmf *= mean / k as f64;
        cdf += pmf;
    }
    k
}

/// Normal density with zero mean and variance `var`.
pub fn normal_pdf(x: f64, var: f64) -> f64 {
    libm::exp(-0.5 * x * x / var) / libm::sqrt(2.0 * PI * var)
}
