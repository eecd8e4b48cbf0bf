//! Welch's two-sample t-test with a self-contained Student-t CDF.
//!
//! The two-sided p-value uses the exact identity
//! `p = I_x(df/2, 1/2)` with `x = df/(df + t^2)`, where `I` is the
//! regularized incomplete beta function, evaluated by Lentz's continued
//! fraction. Accuracy is far better than the 1e-6 the audit needs, without
//! pulling in a statistics dependency.

use crate::error::MeasureError;
use crate::math;

/// Result of a Welch two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WelchTest {
    /// t statistic, signed as mean(a) - mean(b).
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    math::sqrt(ss / (xs.len() - 1) as f64)
}

/// Welch's t-test between two samples; both need at least two values.
///
/// Degenerate spread is handled explicitly: when both sample variances are
/// zero the test collapses to t = 0, p = 1 for equal means and t = ±inf,
/// p = 0 otherwise (degrees of freedom fall back to the pooled n - 2).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, MeasureError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MeasureError::DegenerateGroup);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let sa = sample_stddev(a);
    let sb = sample_stddev(b);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let se2 = va + vb;
    if se2 <= 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            WelchTest { t: 0.0, df, p: 1.0 }
        } else {
            WelchTest {
                t: if ma > mb {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                df,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / math::sqrt(se2);
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(WelchTest {
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

/// Two-sided p-value for a Student-t statistic with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// ln Γ(x) by the Lanczos approximation (g = 7, 9 coefficients).
#[allow(clippy::excessive_precision)]
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    const SQRT_TWO_PI_LN: f64 = 0.91893853320467274; // ln sqrt(2π)

    // reflection is unnecessary here: every caller passes x > 0
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        a += c / (x + i as f64 + 1.0);
    }
    let tmp = x + 7.5;
    SQRT_TWO_PI_LN + (x + 0.5) * math::ln(tmp) - tmp + math::ln(a)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * math::ln(x) + b * math::ln(1.0 - x);
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

// Lentz's continued fraction for the incomplete beta function.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if math::abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if math::abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle constants keep every digit
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_reference() {
        // reference values from an independent implementation
        let cases = [
            (0.5, 0.572364942924700),
            (1.0, 0.0),
            (3.7, 1.428072326665388),
            (10.2, 13.254266744235549),
            (100.5, 361.435540467777571),
        ];
        for (x, want) in cases {
            assert!(
                (ln_gamma(x) - want).abs() < 1e-10,
                "ln_gamma({x}) = {} want {want}",
                ln_gamma(x)
            );
        }
    }

    #[test]
    fn t_cdf_matches_reference() {
        let cases = [
            (1.0, 3.0, 0.391002218955770),
            (2.5, 7.4, 0.039229145694277),
            (0.3, 1.5, 0.800472196803585),
            (4.2, 20.0, 0.000440718163122),
            (1.96, 1000.0, 0.050273184955749),
        ];
        for (t, df, want) in cases {
            let got = student_t_two_sided_p(t, df);
            assert!((got - want).abs() < 1e-9, "p({t},{df}) = {got} want {want}");
        }
    }

    #[test]
    fn welch_matches_reference() {
        // frozen from an independent Welch implementation
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - (-1.358732440973515)).abs() < 1e-12);
        assert!((r.df - 4.749414519906324).abs() < 1e-12);
        assert!((r.p - 0.235194111389406).abs() < 1e-9);

        let a = [0.1, 0.2, 0.15, 0.3, 0.25, 0.22];
        let b = [0.5, 0.45, 0.6, 0.55];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - (-7.406660219774692)).abs() < 1e-12);
        assert!((r.p - 0.000143037890506).abs() < 1e-9);

        let a = [10.0, 11.0, 12.0];
        let b = [10.5, 11.5, 12.5, 13.5, 9.5];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - (-0.547722557505166)).abs() < 1e-12);
        assert!((r.p - 0.604026691386082).abs() < 1e-9);
    }

    #[test]
    fn identical_groups_give_t_zero_p_one() {
        let a = [0.4, 0.4, 0.4];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn zero_variance_gap_is_certain() {
        // hand Welch oracle: zero variance on both sides degenerates to a
        // sign test on the mean gap
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((mean(&b) - mean(&a) - 1.0).abs() < 1e-15);
        assert_eq!(r.p, 0.0);
        assert!(r.p < 0.01);
    }

    #[test]
    fn antisymmetric_under_group_swap() {
        let a = [1.0, 2.0, 3.5, 2.2];
        let b = [4.0, 3.8, 5.1];
        let fwd = welch_t_test(&a, &b).unwrap();
        let rev = welch_t_test(&b, &a).unwrap();
        assert!((fwd.t + rev.t).abs() < 1e-12);
        assert!((fwd.p - rev.p).abs() < 1e-12);
    }

    #[test]
    fn degenerate_group_is_rejected() {
        assert_eq!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(MeasureError::DegenerateGroup)
        );
    }
}
