//! Normal, chi-square and Student-t distribution kernels.
//!
//! Everything here is written from scratch on top of three primitives: the
//! log-gamma function, the regularized incomplete gamma function and the
//! regularized incomplete beta function. The normal CDF uses its own
//! erf series / erfc continued fraction so that it stays independent of the
//! gamma machinery (the chi-square(1) identity is used as a cross-check).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid_arg, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(invalid_arg(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps tiny round-off excursions back into range.
    pub(crate) fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Lower regularized gamma P(a, x) by its power series; use for `x < a + 1`.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

/// Upper regularized gamma Q(a, x) by Lentz's continued fraction; use for `x >= a + 1`.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// P(X > t) for X ~ chi-square(df).
pub fn chi2_sf(df: u32, t: f64) -> Result<Probability> {
    if df == 0 {
        return Err(invalid_arg(
            "chi-square degrees of freedom must be positive",
        ));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(invalid_arg(format!(
            "chi-square argument {t} must be finite and >= 0"
        )));
    }
    Ok(Probability::clamped(gamma_q(df as f64 / 2.0, t / 2.0)))
}

/// erfc for `x >= 0`.
fn erfc_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 2.5 {
        // erf(x) = 2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (2n+1)!!
        let two_x2 = 2.0 * x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= two_x2 / (2.0 * n + 1.0);
            sum += term;
            if term <= sum * EPS {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * (-x * x).exp() * sum
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..MAX_ITER {
            let ak = k as f64 / 2.0;
            d = x + ak * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = x + ak / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = c * d;
            f *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (-x * x).exp() / PI.sqrt() / f
    }
}

/// Standard normal lower tail without argument validation.
pub(crate) fn phi(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * erfc_nonneg(-z * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc_nonneg(z * FRAC_1_SQRT_2)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(invalid_arg(format!(
            "normal_cdf argument {z} is not finite"
        )));
    }
    Ok(Probability::clamped(phi(z)))
}

/// Standard normal upper tail, accurate far into the right tail.
pub fn normal_sf(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(invalid_arg(format!("normal_sf argument {z} is not finite")));
    }
    Ok(Probability::clamped(phi(-z)))
}

/// Acklam's rational approximation for the lower half, `0 < p <= 0.5`.
fn quantile_guess(p: f64) -> f64 {
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
        -2.549_671_010_344_494,
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
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

fn lower_quantile(p: f64) -> f64 {
    let x = quantile_guess(p);
    // one Halley step against the high-precision CDF
    let e = phi(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse of the standard normal CDF on the open interval (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid_arg(format!(
            "normal_quantile argument {p} outside (0, 1)"
        )));
    }
    if p > 0.5 {
        // 1 - p is exact here
        Ok(-lower_quantile(1.0 - p))
    } else {
        Ok(lower_quantile(p))
    }
}

/// P(X > t) for X ~ Student-t(df).
pub fn student_t_sf(df: u32, t: f64) -> Result<Probability> {
    if df == 0 {
        return Err(invalid_arg("Student-t degrees of freedom must be positive"));
    }
    if !t.is_finite() {
        return Err(invalid_arg(format!("Student-t argument {t} is not finite")));
    }
    let nu = df as f64;
    let x = nu / (nu + t * t);
    let tail = 0.5 * beta_reg(nu / 2.0, 0.5, x);
    Ok(Probability::clamped(if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn even_df_sf(df: u32, t: f64) -> f64 {
        let half = t / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..(df / 2) {
            term *= half / k as f64;
            sum += term;
        }
        (-half).exp() * sum
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= tol * 1e-3
    }

    #[test]
    fn chi2_examples() {
        assert_eq!(chi2_sf(4, 0.0).unwrap().value(), 1.0);
        assert!((chi2_sf(4, 2.0).unwrap().value() - 0.735_758_882_3).abs() < 1e-10);
        assert!((chi2_sf(2, 5.991_465).unwrap().value() - 0.05).abs() < 1e-7);
    }

    #[test]
    fn chi2_matches_even_closed_form() {
        for df in [2u32, 4, 6, 8] {
            for i in 0..=600 {
                let t = i as f64 * 0.1;
                let got = chi2_sf(df, t).unwrap().value();
                let want = even_df_sf(df, t);
                assert!(close(got, want, 1e-10), "df={df} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn chi2_one_df_is_two_sided_normal() {
        for i in 0..=600 {
            let z = i as f64 * 0.01;
            let lhs = chi2_sf(1, z * z).unwrap().value();
            let rhs = 2.0 * normal_cdf(-z).unwrap().value();
            assert!((lhs - rhs).abs() < 1e-9, "z={z}");
        }
    }

    #[test]
    fn chi2_errors() {
        assert!(chi2_sf(0, 1.0).is_err());
        assert!(chi2_sf(3, -0.5).is_err());
        assert!(chi2_sf(3, f64::INFINITY).is_err());
    }

    #[test]
    fn normal_examples() {
        assert_eq!(normal_cdf(0.0).unwrap().value(), 0.5);
        assert!((normal_cdf(1.959_964).unwrap().value() - 0.975).abs() < 1e-7);
        assert!((normal_cdf(-1.0).unwrap().value() - 0.158_655_3).abs() < 1e-7);
        assert!(normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn normal_symmetry() {
        for i in 0..=4000 {
            let z = -10.0 + i as f64 * 0.005;
            let a = normal_cdf(z).unwrap().value();
            let b = normal_cdf(-z).unwrap().value();
            assert!((a + b - 1.0).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn normal_quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_964).abs() < 1e-6);
        let z = normal_quantile(normal_cdf(0.73).unwrap().value()).unwrap();
        assert!((z - 0.73).abs() < 1e-9);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn normal_quantile_round_trip_contract() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let z = normal_quantile(p).unwrap();
            assert!((phi(z) - p).abs() <= 1e-10, "p={p}");
        }
        for e in 3..300 {
            let p = 10f64.powf(-(e as f64) / 10.0);
            let z = normal_quantile(p).unwrap();
            assert!((phi(z) - p).abs() <= 1e-10 * p.max(1e-5), "p={p}");
        }
    }

    #[test]
    fn student_t_examples() {
        assert!((student_t_sf(1, 1.0).unwrap().value() - 0.25).abs() < 1e-12);
        // df = 2 has sf(t) = 1/2 - t / (2 sqrt(t^2 + 2))
        let t = std::f64::consts::SQRT_2;
        assert!((student_t_sf(2, t).unwrap().value() - (0.5 - t / 4.0)).abs() < 1e-12);
        assert_eq!(student_t_sf(10, 0.0).unwrap().value(), 0.5);
        assert!(student_t_sf(0, 1.0).is_err());
    }

    #[test]
    fn student_t_closed_forms() {
        for i in 0..=2000 {
            let t = -20.0 + i as f64 * 0.02;
            let cauchy = 0.5 - t.atan() / PI;
            let df2 = 0.5 * (1.0 - t / (2.0 + t * t).sqrt());
            assert!(
                (student_t_sf(1, t).unwrap().value() - cauchy).abs() < 1e-10,
                "t={t}"
            );
            assert!(
                (student_t_sf(2, t).unwrap().value() - df2).abs() < 1e-10,
                "t={t}"
            );
        }
    }

    #[test]
    fn survival_functions_monotone() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 * 0.05).collect();
        for df in [1u32, 3, 4, 9, 25] {
            let chi: Vec<f64> = grid
                .iter()
                .map(|&t| chi2_sf(df, t).unwrap().value())
                .collect();
            let st: Vec<f64> = grid
                .iter()
                .map(|&t| student_t_sf(df, t - 25.0).unwrap().value())
                .collect();
            assert!(chi.windows(2).all(|w| w[1] <= w[0]));
            assert!(st.windows(2).all(|w| w[1] <= w[0]));
        }
        let nsf: Vec<f64> = grid
            .iter()
            .map(|&t| normal_sf(t - 25.0).unwrap().value())
            .collect();
        assert!(nsf.windows(2).all(|w| w[1] <= w[0]));
    }
}
