//! Associated Laguerre polynomials evaluated in overflow-safe scaled arithmetic.
//!
//! Every probability mass function in this crate is built from values
//! `L_n^alpha(x)` at negative arguments `x = -lambda (1 - rho) / rho`. At
//! such arguments all series terms of the polynomial are positive and the
//! values grow super-geometrically in `n`, overflowing native `f64` near
//! `n ~ 150` for moderate `|x|`. Evaluation therefore runs the standard
//! three-term recurrence on [`ScaledValue`]s, which carry an explicit
//! power-of-two exponent alongside an `f64` mantissa.

use serde::{Deserialize, Serialize};

/// A real number stored as `mantissa * 2^exponent` with `|mantissa|` in
/// `[1, 2)` (or exactly zero).
///
/// The representable magnitude range is limited only by the `i64` exponent,
/// far beyond `f64` overflow. Arithmetic rounds once per operation, so
/// precision matches plain `f64` arithmetic wherever the latter does not
/// over- or underflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    mantissa: f64,
    exponent: i64,
}

const LN_2: f64 = std::f64::consts::LN_2;

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: ScaledValue = ScaledValue {
        mantissa: 1.0,
        exponent: 0,
    };

    /// Renormalizes an arbitrary finite `mantissa * 2^exponent` pair.
    fn normalize(mut mantissa: f64, mut exponent: i64) -> Self {
        assert!(mantissa.is_finite(), "non-finite mantissa in ScaledValue");
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        loop {
            let abs = mantissa.abs();
            if (1.0..2.0).contains(&abs) {
                return ScaledValue { mantissa, exponent };
            }
            let biased = ((abs.to_bits() >> 52) & 0x7ff) as i64;
            if biased == 0 {
                // Subnormal: lift into the normal range and rescan.
                mantissa *= 2f64.powi(512);
                exponent -= 512;
                continue;
            }
            // Scale in steps that stay inside the normal range of f64;
            // multiplication by a power of two is exact.
            let step = (biased - 1023).clamp(-512, 512);
            mantissa *= 2f64.powi(-step as i32);
            exponent += step;
        }
    }

    pub fn from_f64(value: f64) -> Self {
        Self::normalize(value, 0)
    }

    /// Builds `exp(ln_value)` without evaluating the exponential in `f64`.
    pub fn from_ln(ln_value: f64) -> Self {
        assert!(ln_value.is_finite());
        let exponent = (ln_value / LN_2).floor();
        let mantissa = (ln_value - exponent * LN_2).exp();
        Self::normalize(mantissa, exponent as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn is_sign_positive(&self) -> bool {
        self.mantissa > 0.0
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// Converts back to `f64`, saturating to `±inf` / `0` outside its range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let e = self.exponent.clamp(-1100, 1100) as i32;
        self.mantissa * 2f64.powi(e)
    }

    /// Natural logarithm; requires a strictly positive value.
    pub fn ln(&self) -> f64 {
        assert!(
            self.mantissa > 0.0,
            "ln of non-positive ScaledValue ({})",
            self.mantissa
        );
        self.mantissa.ln() + self.exponent as f64 * LN_2
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::normalize(self.mantissa * other.mantissa, self.exponent + other.exponent)
    }

    pub fn mul_f64(&self, factor: f64) -> Self {
        self.mul(&Self::from_f64(factor))
    }

    pub fn div_f64(&self, divisor: f64) -> Self {
        let d = Self::from_f64(divisor);
        assert!(!d.is_zero(), "division by zero");
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::normalize(self.mantissa / d.mantissa, self.exponent - d.exponent)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.exponent >= other.exponent {
            (self, other)
        } else {
            (other, self)
        };
        let shift = hi.exponent - lo.exponent;
        if shift > 1074 {
            return *hi;
        }
        Self::normalize(
            hi.mantissa + lo.mantissa * 2f64.powi(-(shift as i32)),
            hi.exponent,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&ScaledValue {
            mantissa: -other.mantissa,
            exponent: other.exponent,
        })
    }

    pub fn abs(&self) -> Self {
        ScaledValue {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Integer power by repeated squaring.
    pub fn powu(&self, mut n: u32) -> Self {
        let mut base = *self;
        let mut acc = Self::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

/// Streaming evaluation of `L_0^alpha(x), L_1^alpha(x), ...` by the
/// three-term recurrence
/// `n L_n^alpha = (2n - 1 + alpha - x) L_{n-1}^alpha - (n - 1 + alpha) L_{n-2}^alpha`.
struct Recurrence {
    alpha: f64,
    x: f64,
    n: u64,
    prev: ScaledValue,
    prev2: ScaledValue,
}

impl Recurrence {
    fn new(alpha: u32, x: f64) -> Self {
        Recurrence {
            alpha: f64::from(alpha),
            x,
            n: 0,
            prev: ScaledValue::ZERO,
            prev2: ScaledValue::ZERO,
        }
    }
}

impl Iterator for Recurrence {
    type Item = ScaledValue;

    fn next(&mut self) -> Option<ScaledValue> {
        let value = match self.n {
            0 => ScaledValue::ONE,
            1 => ScaledValue::from_f64(1.0 + self.alpha - self.x),
            n => {
                let nf = n as f64;
                let lead = self.prev.mul_f64(2.0 * nf - 1.0 + self.alpha - self.x);
                let trail = self.prev2.mul_f64(nf - 1.0 + self.alpha);
                lead.sub(&trail).div_f64(nf)
            }
        };
        self.prev2 = self.prev;
        self.prev = value;
        self.n += 1;
        Some(value)
    }
}

/// Evaluates the associated Laguerre polynomial `L_n^alpha(x)`.
///
/// For `x < 0` and integer `alpha >= 0` every term of the defining sum is
/// positive, so the recurrence accumulates without cancellation and the
/// result is exact to within a few ulp per step.
pub fn laguerre_eval(n: u32, alpha: u32, x: f64) -> ScaledValue {
    Recurrence::new(alpha, x)
        .nth(n as usize)
        .expect("recurrence is infinite")
}

/// Evaluates `[L_0^alpha(x), ..., L_{n_max}^alpha(x)]` in a single
/// recurrence pass. Element `n` is bit-identical to `laguerre_eval(n, alpha, x)`.
pub fn laguerre_row(n_max: u32, alpha: u32, x: f64) -> Vec<ScaledValue> {
    Recurrence::new(alpha, x).take(n_max as usize + 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Direct evaluation of the defining sum
    /// `L_n^alpha(x) = sum_m (-1)^m C(n+alpha, n-m) x^m / m!`,
    /// usable as an independent oracle for small `n`.
    fn direct_sum(n: u32, alpha: u32, x: f64) -> f64 {
        assert!(n <= 20, "direct sum oracle is limited to small n");
        let mut total = 0.0f64;
        let mut x_pow = 1.0f64;
        let mut m_fact = 1.0f64;
        for m in 0..=n {
            if m > 0 {
                x_pow *= x;
                m_fact *= f64::from(m);
            }
            total += sign(m) * binomial(n + alpha, n - m) * x_pow / m_fact;
        }
        total
    }

    fn sign(m: u32) -> f64 {
        if m % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn binomial(n: u32, k: u32) -> f64 {
        let mut acc = 1.0f64;
        for j in 0..k {
            acc = acc * f64::from(n - j) / f64::from(j + 1);
        }
        acc
    }

    #[test]
    fn degree_zero_is_one() {
        assert_eq!(laguerre_eval(0, 0, -3.7).to_f64(), 1.0);
        assert_eq!(laguerre_eval(0, 5, 0.0).to_f64(), 1.0);
    }

    #[test]
    fn degree_one_is_linear() {
        for &x in &[-10.0, -3.7, -0.25, 0.0, 2.0] {
            assert_eq!(laguerre_eval(1, 0, x).to_f64(), 1.0 - x);
        }
    }

    #[test]
    fn small_cases_match_direct_sum() {
        // L_2^1(-1) = C(3,2) + C(3,1) + 1/2 = 6.5
        assert_relative_eq!(laguerre_eval(2, 1, -1.0).to_f64(), 6.5, max_relative = 1e-14);
        for n in 0..=20u32 {
            for alpha in 0..=6u32 {
                for &x in &[-12.0, -2.5, -0.5, -0.01, 1.5] {
                    let got = laguerre_eval(n, alpha, x).to_f64();
                    let want = direct_sum(n, alpha, x);
                    assert_relative_eq!(got, want, max_relative = 1e-11, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn row_matches_point_examples() {
        let row = laguerre_row(1, 0, 2.0);
        assert_eq!(row[0].to_f64(), 1.0);
        assert_eq!(row[1].to_f64(), -1.0);
        let row = laguerre_row(0, 5, 0.0);
        assert_eq!(row.len(), 1);
        assert_eq!(row[0].to_f64(), 1.0);
        let row = laguerre_row(3, 2, -0.5);
        for (n, value) in row.iter().enumerate() {
            assert_relative_eq!(
                value.to_f64(),
                direct_sum(n as u32, 2, -0.5),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn positive_on_negative_axis() {
        for n in (0..=200u32).step_by(7) {
            for alpha in (0..=20u32).step_by(4) {
                for &x in &[-100.0, -42.0, -7.5, -1.0, -1e-3] {
                    let v = laguerre_eval(n, alpha, x);
                    assert!(
                        v.is_sign_positive(),
                        "L_{n}^{alpha}({x}) should be positive, got {v:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn survives_far_beyond_f64_overflow() {
        let v = laguerre_eval(4000, 3, -80.0);
        assert!(v.is_sign_positive());
        assert!(v.to_f64().is_infinite());
        assert!(v.ln().is_finite());
    }

    #[test]
    fn scaled_value_round_trips() {
        for &v in &[1.0, -1.0, 0.5, 1e300, -3.25e-200, 6.02e23] {
            assert_eq!(ScaledValue::from_f64(v).to_f64(), v);
        }
        assert!(ScaledValue::from_f64(0.0).is_zero());
        assert_eq!(ScaledValue::from_ln(0.0).to_f64(), 1.0);
        assert_relative_eq!(ScaledValue::from_ln(-745.0).ln(), -745.0, max_relative = 1e-14);
        assert_relative_eq!(
            ScaledValue::from_ln(3000.0).ln(),
            3000.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn scaled_arithmetic_matches_f64() {
        let a = ScaledValue::from_f64(3.75);
        let b = ScaledValue::from_f64(-1.5);
        assert_eq!(a.mul(&b).to_f64(), 3.75 * -1.5);
        assert_eq!(a.add(&b).to_f64(), 3.75 - 1.5);
        assert_eq!(a.sub(&b).to_f64(), 3.75 + 1.5);
        assert_eq!(a.div_f64(2.0).to_f64(), 1.875);
        assert_eq!(b.powu(3).to_f64(), -3.375);
        assert_eq!(a.powu(0).to_f64(), 1.0);
        // Exponents far apart: the small addend vanishes, as in f64.
        let tiny = ScaledValue::normalize(1.0, -4000);
        assert_eq!(a.add(&tiny).to_f64(), 3.75);
    }

    proptest! {
        #[test]
        fn row_agrees_with_eval_bitwise(
            n_max in 0u32..120,
            alpha in 0u32..12,
            x in -60.0f64..8.0,
        ) {
            let row = laguerre_row(n_max, alpha, x);
            for (n, value) in row.iter().enumerate() {
                let point = laguerre_eval(n as u32, alpha, x);
                prop_assert_eq!(value.mantissa().to_bits(), point.mantissa().to_bits());
                prop_assert_eq!(value.exponent(), point.exponent());
            }
        }

        #[test]
        fn recurrence_identity_holds(
            n in 1u32..50,
            alpha in 0u32..10,
            x in -50.0f64..-1e-6,
        ) {
            // n L_n^a = (n + a) L_{n-1}^a - x L_{n-1}^{a+1}
            let lhs = laguerre_eval(n, alpha, x).mul_f64(f64::from(n));
            let rhs = laguerre_eval(n - 1, alpha, x)
                .mul_f64(f64::from(n + alpha))
                .sub(&laguerre_eval(n - 1, alpha + 1, x).mul_f64(x));
            let diff = lhs.sub(&rhs);
            if !diff.is_zero() {
                // Relative error compared in log space: values may exceed f64.
                let log_rel = diff.abs().ln() - lhs.abs().ln();
                prop_assert!(log_rel < (1e-10f64).ln(), "relative error exp({log_rel})");
            }
        }
    }
}
