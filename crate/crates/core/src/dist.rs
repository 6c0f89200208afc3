//! Scalar distribution functions: standard normal, central and noncentral
//! chi-square.

use crate::error::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p,
            expected: "0 < p < 1",
        })
    }
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Two-sided p-value `2·(1 − Φ(|z|))` for a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / SQRT_2)
}

/// Acklam's rational approximation to Φ⁻¹(p), relative error about 1e-9.
fn acklam_inverse(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
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
    }
}

/// Upper-tail standard normal quantile: the `x` with `Φ(x) = 1 − alpha`.
///
/// Acklam's approximation followed by one Halley refinement step.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    check_probability("alpha", alpha)?;
    Ok(upper_normal_quantile_unchecked(alpha))
}

pub(crate) fn upper_normal_quantile_unchecked(alpha: f64) -> f64 {
    if alpha == 0.5 {
        return 0.0;
    }
    // Solve Φ(y) = alpha, then x = -y.
    let y = acklam_inverse(alpha);
    let e = normal_cdf(y) - alpha;
    let u = e * SQRT_2PI * libm::exp(0.5 * y * y);
    let y = y - u / (1.0 + 0.5 * y * u);
    -y
}

/// Regularized lower incomplete gamma `P(a, x)` and its complement `Q(a, x)`.
fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        // Series expansion for P.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum * libm::exp(log_prefactor)).min(1.0);
        (p, 1.0 - p)
    } else {
        // Modified Lentz continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (libm::exp(log_prefactor) * h).min(1.0);
        (1.0 - q, q)
    }
}

/// Central chi-square CDF.
pub fn chi2_cdf(x: f64, df: usize) -> f64 {
    if x <= 0.0 || df == 0 {
        return if df == 0 && x >= 0.0 { 1.0 } else { 0.0 };
    }
    regularized_gamma(0.5 * df as f64, 0.5 * x).0
}

/// Central chi-square survival function `Pr(χ²(df) > x)`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return if df == 0 { 0.0 } else { 1.0 };
    }
    if df == 0 {
        return 0.0;
    }
    regularized_gamma(0.5 * df as f64, 0.5 * x).1
}

/// Upper-tail chi-square quantile: the `x` with `Pr(χ²(df) > x) = alpha`.
///
/// Bracketing bisection on the regularized incomplete gamma function,
/// iterated to floating-point resolution.
pub fn chi2_quantile(alpha: f64, df: usize) -> Result<f64> {
    check_probability("alpha", alpha)?;
    if df == 0 {
        return Err(Error::Domain {
            name: "df",
            value: 0.0,
            expected: "df >= 1",
        });
    }
    // below(x) is true while x lies left of the quantile.
    let below = |x: f64| {
        if alpha < 0.5 {
            chi2_sf(x, df) > alpha
        } else {
            chi2_cdf(x, df) < 1.0 - alpha
        }
    };
    let mut lo = 0.0;
    let mut hi = df as f64 + 10.0 * libm::sqrt(2.0 * df as f64) + 10.0;
    while below(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Noncentral chi-square CDF as a Poisson mixture of central chi-square
/// CDFs, `Σ_j e^{−δ/2}(δ/2)^j/j! · F_{df+2j}(x)`.
///
/// Terms are summed outward from the Poisson mode; summation stops once the
/// unvisited Poisson mass is below `1e-12`.
pub fn noncentral_chi2_cdf(x: f64, df: usize, noncentrality: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            name: "x",
            value: x,
            expected: "x >= 0",
        });
    }
    if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
        return Err(Error::Domain {
            name: "noncentrality",
            value: noncentrality,
            expected: "noncentrality >= 0",
        });
    }
    if df == 0 {
        return Err(Error::Domain {
            name: "df",
            value: 0.0,
            expected: "df >= 1",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if noncentrality == 0.0 {
        return Ok(chi2_cdf(x, df));
    }

    let lambda = 0.5 * noncentrality;
    let log_weight = |j: f64| -lambda + j * libm::log(lambda) - libm::lgamma(j + 1.0);
    let mode = libm::floor(lambda);

    let mut mass = 0.0;
    let mut total = 0.0;

    // Downward from the mode.
    let mut j = mode;
    loop {
        let w = libm::exp(log_weight(j));
        mass += w;
        total += w * chi2_cdf(x, df + 2 * j as usize);
        if j == 0.0 || (w < 1e-18 && j < mode) {
            break;
        }
        j -= 1.0;
    }
    // Upward until the remaining tail mass is negligible.
    let mut j = mode + 1.0;
    while 1.0 - mass >= 1e-12 {
        let w = libm::exp(log_weight(j));
        mass += w;
        total += w * chi2_cdf(x, df + 2 * j as usize);
        if w == 0.0 && j > lambda + 100.0 {
            break;
        }
        j += 1.0;
    }
    Ok(total.clamp(0.0, 1.0))
}
