use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type for vectors and optimizer state: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an f64 literal. Panics only if the target type cannot hold it at all.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: u64) -> Self {
        <Self as FromPrimitive>::from_u64(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `1 - base^t` evaluated as `-expm1(t * ln(base))`, accurate when `base` is near 1.
pub fn one_minus_pow<S: Scalar>(base: S, t: u64) -> S {
    if t == 0 {
        return S::zero();
    }
    if base == S::zero() {
        return S::one();
    }
    -(S::from_count(t) * base.ln()).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_minus_pow_matches_direct_power() {
        for &b in &[0.5f64, 0.9, 0.999, 0.9999] {
            for &t in &[1u64, 2, 10, 1000] {
                let direct = 1.0 - b.powi(t as i32);
                let got = one_minus_pow(b, t);
                assert!((got - direct).abs() <= 1e-12 * direct.abs(), "{b} {t}");
            }
        }
        assert_eq!(one_minus_pow(0.0f64, 3), 1.0);
        assert_eq!(one_minus_pow(0.7f64, 0), 0.0);
    }

    #[test]
    fn one_minus_pow_keeps_precision_near_one() {
        let b = 1.0f64 - 1e-8;
        let got = one_minus_pow(b, 1);
        assert!((got - (1.0 - b)).abs() < 1e-22);
        let got_f32 = one_minus_pow(0.5f32, 2);
        assert!((got_f32 - 0.75).abs() < 1e-6);
    }
}
