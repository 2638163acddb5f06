//! Exact rationals and real quadratic field elements.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `p`, `-p` or `p/q`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: '{s}'"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| bad())?;
    let d: BigInt = den.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(Rat::new(n, d))
}

pub fn fmt_rat(q: &Rat) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rat_to_f64(q: &Rat) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact square root of a nonnegative rational, if it exists.
pub fn rat_sqrt(q: &Rat) -> Option<Rat> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &n * &n == *q.numer() && &d * &d == *q.denom() {
        Some(Rat::new(n, d))
    } else {
        None
    }
}

/// Writes `n = f^2 * d` with `d` square-free; `n > 0`.
pub fn squarefree_part(n: &BigInt) -> (BigInt, BigInt) {
    let mut m = n.abs();
    let mut f = BigInt::one();
    let mut d = BigInt::one();
    let mut p = BigInt::from(2);
    while &p * &p <= m {
        let mut e = 0u32;
        while (&m % &p).is_zero() {
            m /= &p;
            e += 1;
        }
        if e > 0 {
            f *= p.pow(e / 2);
            if e % 2 == 1 {
                d *= &p;
            }
        }
        p += 1;
    }
    d *= m;
    (f, d)
}

pub fn is_squarefree(n: &BigInt) -> bool {
    let (f, _) = squarefree_part(n);
    f.is_one()
}

/// Element `a + b*sqrt(d)` of the real quadratic field `Q(sqrt(d))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadElem {
    d: BigInt,
    a: Rat,
    b: Rat,
}

impl QuadElem {
    pub fn new(a: Rat, b: Rat, d: impl Into<BigInt>) -> Result<Self> {
        let d = d.into();
        if d < BigInt::from(2) || !is_squarefree(&d) {
            return Err(Error::InvalidRadicand(d.to_string()));
        }
        Ok(QuadElem { d, a, b })
    }

    /// The rational `q` seen inside the field of `self`.
    pub fn lift_rat(&self, q: Rat) -> Self {
        QuadElem { d: self.d.clone(), a: q, b: Rat::zero() }
    }

    pub fn d(&self) -> &BigInt {
        &self.d
    }

    pub fn a(&self) -> &Rat {
        &self.a
    }

    pub fn b(&self) -> &Rat {
        &self.b
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn conj(&self) -> Self {
        QuadElem { d: self.d.clone(), a: self.a.clone(), b: -self.b.clone() }
    }

    pub fn trace(&self) -> Rat {
        &self.a + &self.a
    }

    pub fn field_norm(&self) -> Rat {
        &self.a * &self.a - Rat::from_integer(self.d.clone()) * &self.b * &self.b
    }

    /// Exact sign, decided by comparing `a^2` with `d*b^2`.
    pub fn sign(&self) -> i8 {
        let sa = signum_rat(&self.a);
        let sb = signum_rat(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let lhs = &self.a * &self.a;
        let rhs = Rat::from_integer(self.d.clone()) * &self.b * &self.b;
        if lhs > rhs {
            sa
        } else {
            sb
        }
    }

    pub fn is_integral(&self) -> bool {
        self.trace().is_integer() && self.field_norm().is_integer()
    }

    pub fn is_unit(&self) -> bool {
        self.is_integral() && self.field_norm().abs().is_one()
    }

    pub fn is_totally_positive(&self) -> bool {
        self.sign() == 1 && self.conj().sign() == 1
    }

    fn same_field(&self, o: &Self) -> Result<()> {
        if self.d != o.d {
            return Err(Error::FieldMismatch { left: self.d.to_string(), right: o.d.to_string() });
        }
        Ok(())
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self> {
        self.same_field(o)?;
        Ok(QuadElem { d: self.d.clone(), a: &self.a + &o.a, b: &self.b + &o.b })
    }

    pub fn checked_sub(&self, o: &Self) -> Result<Self> {
        self.same_field(o)?;
        Ok(QuadElem { d: self.d.clone(), a: &self.a - &o.a, b: &self.b - &o.b })
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self> {
        self.same_field(o)?;
        let dd = Rat::from_integer(self.d.clone());
        Ok(QuadElem {
            d: self.d.clone(),
            a: &self.a * &o.a + dd * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        })
    }

    pub fn inv(&self) -> Result<Self> {
        let n = self.field_norm();
        if n.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(QuadElem { d: self.d.clone(), a: &self.a / &n, b: -&self.b / &n })
    }

    pub fn checked_div(&self, o: &Self) -> Result<Self> {
        self.same_field(o)?;
        self.checked_mul(&o.inv()?)
    }

    pub fn scale(&self, q: &Rat) -> Self {
        QuadElem { d: self.d.clone(), a: &self.a * q, b: &self.b * q }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = self.lift_rat(Rat::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn cmp_exact(&self, o: &Self) -> Result<Ordering> {
        Ok(match self.checked_sub(o)?.sign() {
            -1 => Ordering::Less,
            0 => Ordering::Equal,
            _ => Ordering::Greater,
        })
    }

    pub fn to_f64(&self) -> f64 {
        let a = rat_to_f64(&self.a);
        let b = rat_to_f64(&self.b);
        let root = rat_to_f64(&Rat::from_integer(self.d.clone())).sqrt();
        if signum_rat(&self.a) * signum_rat(&self.b) >= 0 {
            a + b * root
        } else {
            // a and b disagree in sign: divide the norm by the conjugate to avoid cancellation
            rat_to_f64(&self.field_norm()) / (a - b * root)
        }
    }

    /// Primitive integer polynomial (leading coefficient first, positive) vanishing at `self`.
    pub fn minimal_polynomial(&self) -> Vec<BigInt> {
        let coeffs = if self.b.is_zero() {
            vec![Rat::one(), -self.a.clone()]
        } else {
            vec![Rat::one(), -self.trace(), self.field_norm()]
        };
        primitive_integer_poly(&coeffs)
    }

    /// Parses `a+b*sqrt(d)`, `a-b*sqrt(d)`, `b*sqrt(d)` or `sqrt(d)` with rational `a`, `b`.
    pub fn parse(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("not a quadratic element: '{s}'"));
        let start = compact.find("sqrt(").ok_or_else(bad)?;
        let inner = compact[start + 5..].strip_suffix(')').ok_or_else(bad)?;
        let d: BigInt = inner.parse().map_err(|_| bad())?;
        let mut left = &compact[..start];
        left = left.strip_suffix('*').unwrap_or(left);
        let split = left
            .char_indices()
            .filter(|&(i, c)| i > 0 && (c == '+' || c == '-'))
            .map(|(i, _)| i)
            .last();
        let (a_str, b_str) = match split {
            Some(i) => (&left[..i], &left[i..]),
            None => ("0", left),
        };
        let b = match b_str {
            "" | "+" => Rat::one(),
            "-" => -Rat::one(),
            other => parse_rat(other.strip_prefix('+').unwrap_or(other))?,
        };
        let a = parse_rat(a_str.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(a_str))?;
        QuadElem::new(a, b, d)
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_negative() {
            write!(f, "{}-{}*sqrt({})", fmt_rat(&self.a), fmt_rat(&-self.b.clone()), self.d)
        } else {
            write!(f, "{}+{}*sqrt({})", fmt_rat(&self.a), fmt_rat(&self.b), self.d)
        }
    }
}

// Operator forms panic on mismatched fields; use the checked_* methods on untrusted input.
impl Add for &QuadElem {
    type Output = QuadElem;
    fn add(self, o: &QuadElem) -> QuadElem {
        self.checked_add(o).expect("quadratic fields differ")
    }
}

impl Sub for &QuadElem {
    type Output = QuadElem;
    fn sub(self, o: &QuadElem) -> QuadElem {
        self.checked_sub(o).expect("quadratic fields differ")
    }
}

impl Mul for &QuadElem {
    type Output = QuadElem;
    fn mul(self, o: &QuadElem) -> QuadElem {
        self.checked_mul(o).expect("quadratic fields differ")
    }
}

impl Div for &QuadElem {
    type Output = QuadElem;
    fn div(self, o: &QuadElem) -> QuadElem {
        self.checked_div(o).expect("quadratic division failed")
    }
}

impl Neg for &QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        QuadElem { d: self.d.clone(), a: -self.a.clone(), b: -self.b.clone() }
    }
}

pub fn signum_rat(q: &Rat) -> i8 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

/// Clears denominators and content; makes the leading coefficient positive.
pub fn primitive_integer_poly(coeffs: &[Rat]) -> Vec<BigInt> {
    let l = coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let mut ints: Vec<BigInt> = coeffs.iter().map(|c| (c * Rat::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
    if !g.is_zero() {
        for c in ints.iter_mut() {
            *c /= &g;
        }
    }
    if ints.first().map(|c| c.is_negative()).unwrap_or(false) {
        for c in ints.iter_mut() {
            *c = -c.clone();
        }
    }
    ints
}

/// Ordered-field operations shared by rational and quadratic computations.
pub trait Scalar: Clone + fmt::Debug + PartialEq {
    /// Embeds a rational into the same field as `self`.
    fn lift(&self, q: &Rat) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn over(&self, o: &Self) -> Self;
    fn signum(&self) -> i8;
    fn approx(&self) -> f64;

    fn min_of(&self, o: &Self) -> Self {
        if self.minus(o).signum() <= 0 {
            self.clone()
        } else {
            o.clone()
        }
    }

    fn is_zero_value(&self) -> bool {
        self.signum() == 0
    }
}

impl Scalar for Rat {
    fn lift(&self, q: &Rat) -> Self {
        q.clone()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn signum(&self) -> i8 {
        signum_rat(self)
    }
    fn approx(&self) -> f64 {
        rat_to_f64(self)
    }
}

impl Scalar for QuadElem {
    fn lift(&self, q: &Rat) -> Self {
        self.lift_rat(q.clone())
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn signum(&self) -> i8 {
        self.sign()
    }
    fn approx(&self) -> f64 {
        self.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> QuadElem {
        QuadElem::parse(s).unwrap()
    }

    #[test]
    fn conj_examples() {
        assert_eq!(q("3+1*sqrt(2)").conj(), q("3-1*sqrt(2)"));
        assert_eq!(q("7+0*sqrt(2)").conj(), q("7+0*sqrt(2)"));
        assert_eq!(q("2+1*sqrt(2)").conj(), q("2-1*sqrt(2)"));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(q("3+1*sqrt(2)").field_norm(), int(7));
        assert_eq!(q("3+2*sqrt(2)").field_norm(), int(1));
        assert_eq!(q("1+0*sqrt(3)").field_norm(), int(1));
    }

    #[test]
    fn sign_examples() {
        assert_eq!(q("2-1*sqrt(2)").sign(), 1);
        assert_eq!(q("1-1*sqrt(2)").sign(), -1);
        assert_eq!(q("0+0*sqrt(2)").sign(), 0);
        assert_eq!(q("-3+3*sqrt(2)").sign(), 1);
    }

    #[test]
    fn integrality_and_units() {
        assert!(q("3+2*sqrt(2)").is_integral());
        assert!(!q("11/7+6/7*sqrt(2)").is_integral());
        assert!(q("1/2+1/2*sqrt(5)").is_integral());
        assert!(q("3+2*sqrt(2)").is_unit());
        assert!(!q("3+1*sqrt(2)").is_unit());
        assert!(q("1+0*sqrt(2)").is_unit());
    }

    #[test]
    fn total_positivity() {
        assert!(q("3+1*sqrt(2)").is_totally_positive());
        assert!(!q("sqrt(2)").is_totally_positive());
        assert!(q("2-1*sqrt(2)").is_totally_positive());
    }

    #[test]
    fn alpha_over_conjugate_is_not_integral() {
        let a = q("3+1*sqrt(2)");
        let ratio = &a / &a.conj();
        assert_eq!(ratio, q("11/7+6/7*sqrt(2)"));
        assert!(!ratio.is_integral());
    }

    #[test]
    fn rejects_bad_radicands_and_mixed_fields() {
        assert!(QuadElem::new(int(1), int(1), 4).is_err());
        assert!(QuadElem::new(int(1), int(1), 1).is_err());
        let x = q("1+1*sqrt(2)");
        let y = q("1+1*sqrt(3)");
        assert_eq!(x.checked_add(&y).unwrap_err().kind(), "field_mismatch");
        assert_eq!(x.lift_rat(int(0)).inv().unwrap_err(), Error::DivisionByZero);
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["3+1*sqrt(2)", "2-1*sqrt(2)", "3/2+1/2*sqrt(5)", "-1/3+0*sqrt(7)"] {
            assert_eq!(q(s).to_string(), s);
        }
        assert_eq!(q("sqrt(2)"), QuadElem::new(int(0), int(1), 2).unwrap());
        assert_eq!(q("-2*sqrt(3)"), QuadElem::new(int(0), int(-2), 3).unwrap());
    }

    #[test]
    fn minimal_polynomials() {
        let one_plus_root2 = q("1+1*sqrt(2)");
        let mp: Vec<i64> = one_plus_root2.minimal_polynomial().iter().map(|c| c.to_i64().unwrap()).collect();
        assert_eq!(mp, vec![1, -2, -1]);
        let half_root2 = q("0+1/2*sqrt(2)");
        let mp: Vec<i64> = half_root2.minimal_polynomial().iter().map(|c| c.to_i64().unwrap()).collect();
        assert_eq!(mp, vec![2, 0, -1]);
    }

    #[test]
    fn squarefree_decomposition() {
        let (f, d) = squarefree_part(&BigInt::from(32));
        assert_eq!((f, d), (BigInt::from(4), BigInt::from(2)));
        let (f, d) = squarefree_part(&BigInt::from(5));
        assert_eq!((f, d), (BigInt::from(1), BigInt::from(5)));
    }
}
