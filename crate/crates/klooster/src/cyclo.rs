//! Exact elements of the ring of integers of a prime-power cyclotomic
//! field: the value type of every exponential sum in this crate.
//!
//! An element is stored on the power basis `1, z, ..., z^(phi(p^k)-1)` with
//! `z = e(1/p^k)` and integer coefficients. Exponents at or above
//! `phi(p^k)` are eliminated with the minimal-polynomial relation
//! `z^((p-1)p^(k-1)) = -(1 + z^(p^(k-1)) + ... + z^((p-2)p^(k-1)))`,
//! and the modulus exponent `k` is always reduced to the smallest field
//! containing the value, so equality is plain coefficient comparison.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde_json::json;

use crate::modarith::Prime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycloError {
    MixedPrimes { left: u64, right: u64 },
    Overflow,
}

impl fmt::Display for CycloError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycloError::MixedPrimes { left, right } => {
                write!(f, "cannot combine roots of unity of order {left}^* and {right}^*")
            }
            CycloError::Overflow => write!(f, "prime power exceeds u64 range"),
        }
    }
}

impl std::error::Error for CycloError {}

/// phi(p^k): the rank of the cyclotomic ring, with phi(p^0) = 1.
pub fn phi(p: u64, k: u32) -> u64 {
    if k == 0 {
        1
    } else {
        p.pow(k - 1) * (p - 1)
    }
}

/// An exact integer combination of p^k-th roots of unity, canonically
/// reduced. Values that lie in a smaller cyclotomic field (including the
/// rational integers, k = 0) are stored there.
#[derive(Debug, Clone)]
pub struct CycloSum {
    prime: u64,
    k: u32,
    coeffs: Vec<BigInt>,
}

impl CycloSum {
    pub fn zero() -> CycloSum {
        CycloSum {
            prime: 2,
            k: 0,
            coeffs: vec![BigInt::zero()],
        }
    }

    pub fn one() -> CycloSum {
        CycloSum::integer(1)
    }

    pub fn integer(n: i64) -> CycloSum {
        CycloSum {
            prime: 2,
            k: 0,
            coeffs: vec![BigInt::from(n)],
        }
    }

    /// e(numerator / p^k), reduced to canonical form.
    pub fn term(numerator: i64, p: Prime, k: u32) -> CycloSum {
        let pk = p.pow(k).expect("prime power fits u64");
        let e = (numerator as i128).rem_euclid(pk as i128) as u64;
        let mut counts = vec![0i64; pk as usize];
        counts[e as usize] = 1;
        CycloSum::from_exponent_counts(p, k, &counts)
    }

    /// Builds `sum_j counts[j] * e(j / p^k)` from a full exponent histogram
    /// of length p^k. This is the exact bridge out of the u64 sum kernels.
    pub fn from_exponent_counts(p: Prime, k: u32, counts: &[i64]) -> CycloSum {
        let pk = p.pow(k).expect("prime power fits u64");
        assert_eq!(counts.len() as u64, pk, "histogram length must be p^k");
        let buf: Vec<BigInt> = counts.iter().map(|&c| BigInt::from(c)).collect();
        CycloSum::reduce_full(p.get(), k, buf)
    }

    /// Same as [`CycloSum::from_exponent_counts`] with big-integer counts.
    pub fn from_exponent_counts_big(p: Prime, k: u32, counts: Vec<BigInt>) -> CycloSum {
        let pk = p.pow(k).expect("prime power fits u64");
        assert_eq!(counts.len() as u64, pk, "histogram length must be p^k");
        CycloSum::reduce_full(p.get(), k, counts)
    }

    /// Reduces a full p^k-length exponent vector to the power basis, then
    /// shrinks k as far as the support allows.
    fn reduce_full(p: u64, k: u32, mut buf: Vec<BigInt>) -> CycloSum {
        let ph = phi(p, k) as usize;
        if k > 0 {
            let step = p.pow(k - 1) as usize;
            for e in (ph..buf.len()).rev() {
                if buf[e].is_zero() {
                    continue;
                }
                let c = std::mem::replace(&mut buf[e], BigInt::zero());
                let base = e - (p as usize - 1) * step;
                for i in 0..(p as usize - 1) {
                    buf[base + i * step] -= &c;
                }
            }
        }
        buf.truncate(ph);
        let mut out = CycloSum {
            prime: p,
            k,
            coeffs: buf,
        };
        out.shrink();
        out
    }

    /// Lowers k while the value lies in the smaller field.
    fn shrink(&mut self) {
        loop {
            if self.k == 0 {
                return;
            }
            if self.k == 1 {
                if self.coeffs.iter().skip(1).all(|c| c.is_zero()) {
                    self.coeffs.truncate(1);
                    self.k = 0;
                    continue;
                }
                return;
            }
            let p = self.prime as usize;
            if (0..self.coeffs.len()).all(|j| j % p == 0 || self.coeffs[j].is_zero()) {
                let smaller: Vec<BigInt> = self.coeffs.iter().step_by(p).cloned().collect();
                self.coeffs = smaller;
                self.k -= 1;
            } else {
                return;
            }
        }
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn modulus_exp(&self) -> u32 {
        self.k
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_rational(&self) -> bool {
        self.k == 0
    }

    /// The rational integer value, if the sum is one.
    pub fn as_integer(&self) -> Option<&BigInt> {
        if self.k == 0 {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    /// Re-expresses the value on the basis of the (same-prime) field with
    /// modulus exponent `k2 >= k`.
    fn lift(&self, k2: u32) -> CycloSum {
        assert!(k2 >= self.k);
        if k2 == self.k {
            return self.clone();
        }
        let stretch = self.prime.pow(k2 - self.k) as usize;
        let mut coeffs = vec![BigInt::zero(); phi(self.prime, k2) as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[j * stretch] = c.clone();
            }
        }
        CycloSum {
            prime: self.prime,
            k: k2,
            coeffs,
        }
    }

    /// Brings two operands onto a common basis; rational values adopt the
    /// other operand's prime.
    fn align(&self, other: &CycloSum) -> Result<(CycloSum, CycloSum), CycloError> {
        let (mut a, mut b) = (self.clone(), other.clone());
        if a.k == 0 {
            a.prime = b.prime;
        }
        if b.k == 0 {
            b.prime = a.prime;
        }
        if a.prime != b.prime {
            return Err(CycloError::MixedPrimes {
                left: a.prime,
                right: b.prime,
            });
        }
        let k = a.k.max(b.k);
        Ok((a.lift(k), b.lift(k)))
    }

    pub fn add(&self, other: &CycloSum) -> Result<CycloSum, CycloError> {
        let (mut a, b) = self.align(other)?;
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += y;
        }
        a.shrink();
        Ok(a)
    }

    pub fn sub(&self, other: &CycloSum) -> Result<CycloSum, CycloError> {
        self.add(&other.scale(&BigInt::from(-1)))
    }

    pub fn scale(&self, n: &BigInt) -> CycloSum {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= n;
        }
        out.shrink();
        out
    }

    pub fn scale_i64(&self, n: i64) -> CycloSum {
        self.scale(&BigInt::from(n))
    }

    pub fn mul(&self, other: &CycloSum) -> Result<CycloSum, CycloError> {
        let (a, b) = self.align(other)?;
        if a.k == 0 {
            return Ok(CycloSum {
                prime: a.prime,
                k: 0,
                coeffs: vec![&a.coeffs[0] * &b.coeffs[0]],
            });
        }
        let pk = a.prime.pow(a.k) as usize;
        let mut buf = vec![BigInt::zero(); pk];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let mut e = i + j;
                if e >= pk {
                    e -= pk;
                }
                buf[e] += x * y;
            }
        }
        Ok(CycloSum::reduce_full(a.prime, a.k, buf))
    }

    /// Complex conjugation: each root of unity goes to its inverse.
    pub fn conj(&self) -> CycloSum {
        if self.k == 0 {
            return self.clone();
        }
        let pk = self.prime.pow(self.k) as usize;
        let mut buf = vec![BigInt::zero(); pk];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                buf[(pk - j) % pk] = c.clone();
            }
        }
        CycloSum::reduce_full(self.prime, self.k, buf)
    }

    /// `self * conj(self)`, the exact squared modulus (a real value).
    pub fn norm_squared(&self) -> CycloSum {
        self.mul(&self.conj()).expect("same field")
    }

    /// Numeric value with a rigorous absolute error bound.
    ///
    /// Every term is evaluated with sin/cos accurate to a few ulps and the
    /// coefficients are converted with one rounding each, so the total
    /// error is at most `sum(|c_j|) * EPS * 4 * (len + 4)`.
    pub fn to_complex(&self) -> (f64, f64, f64) {
        let pk = self.prime.pow(self.k) as f64;
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        let mut total_abs = 0.0f64;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cf = c.to_f64().unwrap_or(f64::INFINITY);
            let angle = 2.0 * std::f64::consts::PI * (j as f64) / pk;
            re += cf * angle.cos();
            im += cf * angle.sin();
            total_abs += cf.abs();
        }
        let err = total_abs * f64::EPSILON * 4.0 * (self.coeffs.len() as f64 + 4.0);
        (re, im, err)
    }

    pub fn abs_upper_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::INFINITY).abs())
            .sum()
    }

    /// JSON form: exact coefficients (decimal strings) plus a derived
    /// floating-point block.
    pub fn to_json(&self) -> serde_json::Value {
        let (re, im, err) = self.to_complex();
        json!({
            "p": self.prime,
            "k": self.k,
            "coeffs": self.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "re": re,
            "im": im,
            "err": err,
        })
    }
}

impl PartialEq for CycloSum {
    fn eq(&self, other: &Self) -> bool {
        if self.k == 0 && other.k == 0 {
            return self.coeffs[0] == other.coeffs[0];
        }
        self.prime == other.prime && self.k == other.k && self.coeffs == other.coeffs
    }
}

impl Eq for CycloSum {}

impl fmt::Display for CycloSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if j == 0 {
                write!(f, "{}", c)?;
            } else {
                write!(f, "{}*e({}/{}^{})", c, j, self.prime, self.k)?;
            }
        }
        Ok(())
    }
}

/// Sums a list of values, aligning moduli as needed.
pub fn sum_all<'a, I: IntoIterator<Item = &'a CycloSum>>(items: I) -> Result<CycloSum, CycloError> {
    let mut acc = CycloSum::zero();
    for item in items {
        acc = acc.add(item)?;
    }
    Ok(acc)
}
