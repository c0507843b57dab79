//! Exact field arithmetic over the rationals and prime fields GF(p).
//!
//! Every computation in this crate runs over one of these two fields; there
//! is no floating point anywhere. Rationals are arbitrary-precision and kept
//! in lowest terms with positive denominator by `num_rational`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands from different fields: {0} vs {1}")]
    MixedFields(FieldSpec, FieldSpec),
    #[error("{0} is not a prime > 2")]
    BadPrime(u64),
    #[error("cannot parse {0:?} as an element of {1}")]
    BadLiteral(String, FieldSpec),
}

/// Which field a computation runs over: the rationals or GF(p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldSpec {
    Q,
    GFp(u64),
}

impl FieldSpec {
    /// Validates the spec; GF(p) requires p prime and > 2.
    pub fn checked(self) -> Result<Self, FieldError> {
        match self {
            FieldSpec::Q => Ok(self),
            FieldSpec::GFp(p) => {
                if p > 2 && is_prime(p) {
                    Ok(self)
                } else {
                    Err(FieldError::BadPrime(p))
                }
            }
        }
    }

    pub fn zero(self) -> Scalar {
        match self {
            FieldSpec::Q => Scalar::Q(BigRational::zero()),
            FieldSpec::GFp(p) => Scalar::Fp { p, val: 0 },
        }
    }

    pub fn one(self) -> Scalar {
        match self {
            FieldSpec::Q => Scalar::Q(BigRational::one()),
            FieldSpec::GFp(p) => Scalar::Fp { p, val: 1 },
        }
    }

    pub fn from_i64(self, n: i64) -> Scalar {
        match self {
            FieldSpec::Q => Scalar::Q(BigRational::from_integer(BigInt::from(n))),
            FieldSpec::GFp(p) => {
                let r = n.rem_euclid(p as i64) as u64;
                Scalar::Fp { p, val: r }
            }
        }
    }

    /// Parses a literal like `"3"`, `"-5/7"` (Q) or `"5"` (GF(p)).
    pub fn parse(self, s: &str) -> Result<Scalar, FieldError> {
        let bad = || FieldError::BadLiteral(s.to_string(), self);
        match self {
            FieldSpec::Q => {
                let r = BigRational::from_str(s).map_err(|_| bad())?;
                Ok(Scalar::Q(r))
            }
            FieldSpec::GFp(p) => {
                let n = i128::from_str(s.trim()).map_err(|_| bad())?;
                let r = n.rem_euclid(p as i128) as u64;
                Ok(Scalar::Fp { p, val: r })
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Q => write!(f, "Q"),
            FieldSpec::GFp(p) => write!(f, "GF({p})"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// An exact field element: a rational or a residue mod p.
///
/// GF(p) residues are always stored in `[0, p)`. Mixing scalars from two
/// different fields is a programming error and panics in the arithmetic
/// operators; use the `checked_*` methods at boundaries where the field is
/// not statically known.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scalar {
    Q(BigRational),
    Fp { p: u64, val: u64 },
}

impl Scalar {
    pub fn field(&self) -> FieldSpec {
        match self {
            Scalar::Q(_) => FieldSpec::Q,
            Scalar::Fp { p, .. } => FieldSpec::GFp(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_zero(),
            Scalar::Fp { val, .. } => *val == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_one(),
            Scalar::Fp { val, .. } => *val == 1,
        }
    }

    fn same_field(&self, other: &Scalar) -> Result<(), FieldError> {
        if self.field() == other.field() {
            Ok(())
        } else {
            Err(FieldError::MixedFields(self.field(), other.field()))
        }
    }

    pub fn checked_add(&self, rhs: &Scalar) -> Result<Scalar, FieldError> {
        self.same_field(rhs)?;
        Ok(match (self, rhs) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            (Scalar::Fp { p, val: a }, Scalar::Fp { val: b, .. }) => Scalar::Fp {
                p: *p,
                val: add_mod(*a, *b, *p),
            },
            _ => unreachable!(),
        })
    }

    pub fn checked_sub(&self, rhs: &Scalar) -> Result<Scalar, FieldError> {
        self.checked_add(&rhs.neg_ref())
    }

    pub fn checked_mul(&self, rhs: &Scalar) -> Result<Scalar, FieldError> {
        self.same_field(rhs)?;
        Ok(match (self, rhs) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            (Scalar::Fp { p, val: a }, Scalar::Fp { val: b, .. }) => Scalar::Fp {
                p: *p,
                val: mul_mod(*a, *b, *p),
            },
            _ => unreachable!(),
        })
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Result<Scalar, FieldError> {
        self.checked_mul(&rhs.checked_inv()?)
    }

    pub fn checked_inv(&self) -> Result<Scalar, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(match self {
            Scalar::Q(r) => Scalar::Q(r.recip()),
            Scalar::Fp { p, val } => Scalar::Fp {
                p: *p,
                val: inv_mod(*val, *p),
            },
        })
    }

    pub fn neg_ref(&self) -> Scalar {
        match self {
            Scalar::Q(r) => Scalar::Q(-r),
            Scalar::Fp { p, val } => Scalar::Fp {
                p: *p,
                val: if *val == 0 { 0 } else { p - val },
            },
        }
    }

    pub fn inv(&self) -> Scalar {
        self.checked_inv().expect("inverse of zero")
    }

    /// Stable textual form used by the JSON schema: `"a/b"` or `"a"`.
    pub fn to_literal(&self) -> String {
        match self {
            Scalar::Q(r) => {
                if r.denom().is_one() {
                    r.numer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Fp { val, .. } => val.to_string(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_literal())
    }
}

fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 + b as u128) % p as u128) as u64
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn inv_mod(a: u64, p: u64) -> u64 {
    // extended Euclid; p prime, a != 0 mod p
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (p as i128, (a % p) as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1, "{a} not invertible mod {p}");
    t.rem_euclid(p as i128) as u64
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl std::ops::$trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.$checked(rhs).expect("mixed-field arithmetic")
            }
        }
        impl std::ops::$trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, checked_add);
scalar_binop!(Sub, sub, checked_sub);
scalar_binop!(Mul, mul, checked_mul);
scalar_binop!(Div, div, checked_div);

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

impl std::ops::Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_add_exact() {
        let f = FieldSpec::Q;
        let half = f.parse("1/2").unwrap();
        let third = f.parse("1/3").unwrap();
        assert_eq!(&half + &third, f.parse("5/6").unwrap());
    }

    #[test]
    fn gf7_inverse() {
        let f = FieldSpec::GFp(7).checked().unwrap();
        let three = f.from_i64(3);
        assert_eq!(three.inv(), f.from_i64(5));
        assert!((three.inv() * three).is_one());
    }

    #[test]
    fn zero_has_no_inverse() {
        assert_eq!(
            FieldSpec::Q.zero().checked_inv(),
            Err(FieldError::DivisionByZero)
        );
    }

    #[test]
    fn mixed_fields_rejected() {
        let a = FieldSpec::Q.one();
        let b = FieldSpec::GFp(5).one();
        assert!(matches!(
            a.checked_add(&b),
            Err(FieldError::MixedFields(..))
        ));
    }

    #[test]
    fn prime_validation() {
        assert!(FieldSpec::GFp(2).checked().is_err());
        assert!(FieldSpec::GFp(9).checked().is_err());
        assert!(FieldSpec::GFp(7919).checked().is_ok());
    }

    #[test]
    fn field_axioms_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for field in [FieldSpec::Q, FieldSpec::GFp(101)] {
            for _ in 0..200 {
                let a = field.from_i64(rng.gen_range(-50..50));
                let b = field.from_i64(rng.gen_range(-50..50));
                let c = field.from_i64(rng.gen_range(-50..50));
                assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
                assert_eq!(&a + &b, &b + &a);
                assert_eq!(&a * &b, &b * &a);
                assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
                if !a.is_zero() {
                    assert!((&a * &a.inv()).is_one());
                }
            }
        }
    }
}
